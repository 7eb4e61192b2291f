"""
Excel Writer Module
Method x speed comparison grids and learning curves as a styled workbook.
"""

import math

import openpyxl
from openpyxl.styles import Alignment, Border, Font, PatternFill, Side
from openpyxl.utils import get_column_letter
from pathlib import Path
import pandas as pd


HEADER_FONT = Font(bold=True, color="FFFFFF")
HEADER_FILL = PatternFill("solid", fgColor="366092")
THIN = Side(style="thin")
GRID_BORDER = Border(left=THIN, right=THIN, top=THIN, bottom=THIN)


class ComparisonWorkbook:
    def __init__(self, filepath: str):
        self.filepath = filepath
        self.workbook = openpyxl.Workbook()
        self.workbook.remove(self.workbook.active)

    @staticmethod
    def _style(cell, header: bool = False, center: bool = False):
        """Grid border on every cell; headers bold white on blue."""
        cell.border = GRID_BORDER
        if header:
            cell.font = HEADER_FONT
            cell.fill = HEADER_FILL
        cell.alignment = Alignment(horizontal="center" if header or center else "left", vertical="center")
        return cell

    @staticmethod
    def _cell_value(value):
        if isinstance(value, float) and math.isnan(value):
            return None
        return value

    def add_grid(self, title: str, grid: pd.DataFrame, scale: float = 1.0, number_format: str = "0.000"):
        """
        One sheet per grid: methods down, speeds across.

        Args:
            title (str): Sheet name
            grid (DataFrame): comparison_grid output
            scale (float): Factor applied to every value (e.g. 1000 for mm)
            number_format (str): Excel number format of the value cells
        """
        ws = self.workbook.create_sheet(title)

        cell = ws.cell(row=1, column=1, value="method")
        self._style(cell, header=True)
        ws.column_dimensions["A"].width = 14
        for col, speed in enumerate(grid.columns, start=2):
            cell = ws.cell(row=1, column=col, value=f"{speed}x")
            self._style(cell, header=True)
            ws.column_dimensions[get_column_letter(col)].width = 12

        for row, (method, values) in enumerate(grid.iterrows(), start=2):
            self._style(ws.cell(row=row, column=1, value=method))
            for col, value in enumerate(values, start=2):
                cell = ws.cell(row=row, column=col, value=self._cell_value(float(value) * scale))
                cell.number_format = number_format
                self._style(cell, center=True)

        ws.freeze_panes = "B2"

    def add_table(self, title: str, table: pd.DataFrame):
        """Plain header + rows sheet (learning curves)."""
        ws = self.workbook.create_sheet(title)
        for col, header in enumerate(table.columns, start=1):
            self._style(ws.cell(row=1, column=col, value=str(header)), header=True)
            ws.column_dimensions[get_column_letter(col)].width = 14

        for row, values in enumerate(table.itertuples(index=False), start=2):
            for col, value in enumerate(values, start=1):
                value = value.item() if hasattr(value, "item") else value
                self._style(ws.cell(row=row, column=col, value=self._cell_value(value)),
                            center=isinstance(value, (int, float)))

    def save(self):
        path = Path(self.filepath)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.workbook.save(path)
        print(f"✓ Comparison saved to Excel ({len(self.workbook.sheetnames)} sheets)")
        return path
