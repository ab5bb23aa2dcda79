"""Plain-text table and CSV renderers for quality reports."""

from __future__ import annotations

from pathlib import Path

from .metrics import ImageScore, QualityReport

COLUMNS = ["image", "scale_v", "scale_h", "psnr_db", "ssim"]


def _cell(row: ImageScore, col: str) -> str:
    val = getattr(row, col)
    if col == "psnr_db":
        return f"{val:.4f}"
    if col == "ssim":
        return f"{val:.6f}"
    if isinstance(val, float):
        return f"{val:g}"
    return str(val)


def _format_csv(rows: list[list[str]], columns: list[str]) -> str:
    """Format rows as CSV."""
    lines = [",".join(columns)]
    for row in rows:
        vals = []
        for val in row:
            if "," in val or '"' in val:
                vals.append(f'"{val.replace(chr(34), chr(34) + chr(34))}"')
            else:
                vals.append(val)
        lines.append(",".join(vals))
    return "\n".join(lines)


def _format_table(rows: list[list[str]], columns: list[str]) -> str:
    """Format rows as ASCII table."""
    widths = [len(col) for col in columns]
    for row in rows:
        for i, val in enumerate(row):
            widths[i] = max(widths[i], len(val))

    header = " | ".join(col.ljust(widths[i]) for i, col in enumerate(columns))
    separator = "-+-".join("-" * w for w in widths)

    lines = [header, separator]
    lines.extend(
        " | ".join(val.ljust(widths[i]) for i, val in enumerate(row)) for row in rows
    )
    return "\n".join(lines)


def format_report(report: QualityReport, fmt: str = "table") -> str:
    """Render one report; the table form ends with a mean row."""
    rows = [[_cell(r, c) for c in COLUMNS] for r in report.rows]
    if fmt == "csv":
        return _format_csv(rows, COLUMNS)
    mean = [
        "mean",
        f"{report.scale_v:g}",
        f"{report.scale_h:g}",
        f"{report.mean_psnr:.4f}",
        f"{report.mean_ssim:.6f}",
    ]
    return _format_table([*rows, mean], COLUMNS)


def format_side_by_side(reports: list[QualityReport]) -> str:
    """One row per image with PSNR/SSIM columns for every method."""
    columns = ["image"]
    for rep in reports:
        columns += [f"{rep.method}_psnr_db", f"{rep.method}_ssim"]
    by_image = [{r.image: r for r in rep.rows} for rep in reports]
    names = sorted({name for table in by_image for name in table})
    rows = []
    for name in names:
        row = [name]
        for table in by_image:
            score = table.get(name)
            row += ["", ""] if score is None else [f"{score.psnr_db:.4f}", f"{score.ssim:.6f}"]
        rows.append(row)
    mean = ["mean"]
    for rep in reports:
        mean += [f"{rep.mean_psnr:.4f}", f"{rep.mean_ssim:.6f}"]
    rows.append(mean)
    return _format_table(rows, columns)


def write_report(report: QualityReport, directory: Path) -> tuple[Path, Path]:
    """Write ``report_<method>.txt`` and ``report_<method>.csv``."""
    directory.mkdir(parents=True, exist_ok=True)
    txt = directory / f"report_{report.method}.txt"
    csv = directory / f"report_{report.method}.csv"
    txt.write_text(format_report(report, "table") + "\n")
    csv.write_text(format_report(report, "csv") + "\n")
    return txt, csv
