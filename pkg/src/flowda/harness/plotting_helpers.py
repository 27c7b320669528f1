"""Adapters between CSV rows and the plotting record shape."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class PlotRow:
    filter_name: str
    flow: str
    guidance: str
    sampling_steps: int
    summary_rmse: float


def rows_from_csv_dicts(rows) -> list[PlotRow]:
    out = []
    for r in rows:
        out.append(PlotRow(
            filter_name=r["filter"],
            flow=r["flow"],
            guidance=r["guidance"],
            sampling_steps=int(r["T"]),
            summary_rmse=float(r["summary_rmse"]),
        ))
    return out
