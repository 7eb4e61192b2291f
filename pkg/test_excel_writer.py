"""
Comparison workbook tests: grid layout, scaling, missing cells and styling.
"""

import math

import openpyxl
import pandas as pd

from excel_writer import ComparisonWorkbook


def sample_grid():
    grid = pd.DataFrame([[0.004, 0.006], [math.nan, 0.002]], index=["playback", "irlc"],
                        columns=[2, 3], dtype=float)
    grid.index.name, grid.columns.name = "method", "speed"
    return grid


def test_grid_sheet(tmp_path):
    workbook = ComparisonWorkbook(str(tmp_path / "nested" / "comparison.xlsx"))
    workbook.add_grid("DTW (mm)", sample_grid(), scale=1000.0)
    path = workbook.save()

    ws = openpyxl.load_workbook(path)["DTW (mm)"]
    assert [c.value for c in ws[1]] == ["method", "2x", "3x"]
    assert [c.value for c in ws["A"]] == ["method", "playback", "irlc"]
    assert abs(ws["B2"].value - 4.0) < 1e-12
    assert ws["B3"].value is None
    assert ws["B2"].number_format == "0.000"
    assert ws.freeze_panes == "B2"


def test_header_and_cell_styles(tmp_path):
    workbook = ComparisonWorkbook(str(tmp_path / "comparison.xlsx"))
    workbook.add_grid("grid", sample_grid())
    workbook.add_table("curve", pd.DataFrame({"iteration": [1, 2], "stop": ["", "fault"]}))
    path = workbook.save()

    book = openpyxl.load_workbook(path)
    assert book.sheetnames == ["grid", "curve"]
    header, value, label = book["grid"]["A1"], book["grid"]["C2"], book["grid"]["A2"]
    assert header.font.bold
    assert header.fill.fgColor.rgb.endswith("366092")
    for cell in (header, value, label):
        assert cell.border.left.style == cell.border.bottom.style == "thin"
    assert value.alignment.horizontal == "center"
    assert label.alignment.horizontal == "left"

    curve = book["curve"]
    assert [c.value for c in curve[1]] == ["iteration", "stop"]
    assert curve["A3"].value == 2
    assert curve["B3"].value == "fault"
