from pathlib import Path

from saam_sr.metrics import ImageScore, QualityReport
from saam_sr.report import format_report, format_side_by_side, write_report


def report(method: str, psnrs: dict[str, float]) -> QualityReport:
    rep = QualityReport(method, 2.0, 2.5, crop=3)
    rep.rows = [ImageScore(name, 2.0, 2.5, value, 0.9) for name, value in psnrs.items()]
    return rep


def test_csv_has_one_row_per_image() -> None:
    text = format_report(report("saam", {"a,b.png": 30.0, "c.png": 31.5}), "csv")
    assert text.splitlines() == [
        "image,scale_v,scale_h,psnr_db,ssim",
        '"a,b.png",2,2.5,30.0000,0.900000',
        "c.png,2,2.5,31.5000,0.900000",
    ]


def test_table_ends_with_the_mean() -> None:
    lines = format_report(report("saam", {"a.png": 30.0, "c.png": 32.0})).splitlines()
    assert lines[0].split(" | ")[0].strip() == "image"
    assert set(lines[1]) <= {"-", "+"}
    assert lines[-1].split("|")[0].strip() == "mean"
    assert "31.0000" in lines[-1]


def test_side_by_side_aligns_images() -> None:
    ours = report("saam", {"a.png": 30.0, "b.png": 29.0})
    theirs = report("bicubic", {"a.png": 28.0})
    lines = format_side_by_side([ours, theirs]).splitlines()
    header = [c.strip() for c in lines[0].split("|")]
    assert header == ["image", "saam_psnr_db", "saam_ssim", "bicubic_psnr_db", "bicubic_ssim"]
    b_row = [c.strip() for c in lines[3].split("|")]
    assert b_row[0] == "b.png"
    assert b_row[3:] == ["", ""]


def test_write_report(tmp_path: Path) -> None:
    txt, csv = write_report(report("bicubic", {"a.png": 28.0}), tmp_path / "out")
    assert txt.name == "report_bicubic.txt"
    assert csv.read_text().endswith("\n")
    assert "28.0000" in txt.read_text()
