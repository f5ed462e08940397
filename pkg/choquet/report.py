"""
实验输出：SVG 散点图、result.json 与表格文件

SVG 坐标映射（600×600 视口，y 轴向上）:
    lo, hi = 两个点集合并后的逐轴最小/最大值，各向外扩 5% 跨度（跨度为 0 时扩 1）
    px = (x - lo_x) / (hi_x - lo_x) · 600
    py = 600 - (y - lo_y) / (hi_y - lo_y) · 600
"""
import json
import logging
import os
from typing import Dict, Optional

import numpy as np
import pandas as pd

from choquet.exceptions import ShapeError
from choquet.measures import EmpiricalMeasure

logger = logging.getLogger(__name__)

VIEWPORT = 600
TARGET_COLOR = "#1f77b4"
OVERLAY_COLOR = "#d62728"


def svg_bounds(points: np.ndarray):
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    span = hi - lo
    margin = np.where(span > 0, 0.05 * span, 1.0)
    return lo - margin, hi + margin


def to_viewport(points: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    scaled = (points - lo) / (hi - lo) * VIEWPORT
    return np.stack([scaled[:, 0], VIEWPORT - scaled[:, 1]], axis=1)


def _circles(pixels: np.ndarray, color: str) -> list:
    return [f'<circle cx="{x:.3f}" cy="{y:.3f}" r="2" fill="{color}" fill-opacity="0.6"/>' for x, y in pixels]


def emit_svg_scatter(points: EmpiricalMeasure, overlay: Optional[EmpiricalMeasure], path: str):
    """目标点集用蓝色，生成点集（overlay）用红色；相同输入输出相同字节"""
    if points.dim != 2 or (overlay is not None and overlay.dim != 2):
        raise ShapeError("scatter plots need 2D measures")
    joint = points.points if overlay is None else np.concatenate([points.points, overlay.points])
    lo, hi = svg_bounds(joint)
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{VIEWPORT}" height="{VIEWPORT}" viewBox="0 0 {VIEWPORT} {VIEWPORT}">',
        f'<rect x="0" y="0" width="{VIEWPORT}" height="{VIEWPORT}" fill="white" stroke="black"/>',
    ]
    lines += _circles(to_viewport(points.points, lo, hi), TARGET_COLOR)
    if overlay is not None:
        lines += _circles(to_viewport(overlay.points, lo, hi), OVERLAY_COLOR)
    lines.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_result(out_dir: str, subcommand: str, seed: int, scalars: Dict[str, float]) -> str:
    """result.json: {"subcommand", "seed", "scalars"}"""
    path = os.path.join(out_dir, "result.json")
    payload = {"subcommand": subcommand, "seed": seed, "scalars": {k: float(v) for k, v in scalars.items()}}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    return path


def write_table(frame: pd.DataFrame, out_dir: str, name: str = "log", excel: bool = False) -> str:
    """写出 CSV，excel=True 时同时写出 .xlsx"""
    path = os.path.join(out_dir, f"{name}.csv")
    frame.to_csv(path, index=False)
    if excel:
        frame.to_excel(os.path.join(out_dir, f"{name}.xlsx"), index=False, engine="openpyxl")
    logger.info(f"Saved {len(frame)} rows to {path}")
    return path
