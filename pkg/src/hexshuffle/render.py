"""Deterministic SVG pictures of tilings.

All lozenges of one orientation go into a single ``<path>`` element, so the
file size is linear in the number of lozenges and the output depends only on
the tiling and the options (coordinates are printed with a fixed number of
decimals; there are no timestamps).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    FLAT,
    HORIZONTAL,
    RISING,
    SQRT3_2,
    PathFamily,
    hexagon_vertices,
    lattice_point,
    to_lozenges,
)

DOWNSAMPLE_LIMIT = 4_000_000
DEFAULT_PALETTE = {HORIZONTAL: "#e8c547", RISING: "#3b6ea8", FLAT: "#c0504d"}


@dataclass(frozen=True)
class RenderOptions:
    scale: float = 20.0
    palette: tuple[str, str, str] = (DEFAULT_PALETTE[HORIZONTAL], DEFAULT_PALETTE[RISING], DEFAULT_PALETTE[FLAT])
    stroke: str = "#222222"
    stroke_width: float = 0.04
    paths: bool = False
    outline: bool = True
    margin: float = 0.5
    limit: int = DOWNSAMPLE_LIMIT


def _fmt(v: float) -> str:
    s = f"{v:.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _subpaths(kind: int, t: np.ndarray, x: np.ndarray) -> str:
    px = t * SQRT3_2
    py = x - 0.5 * t
    if kind == HORIZONTAL:
        pts = [(px - SQRT3_2, py + 0.5), (px, py + 1.0), (px + SQRT3_2, py + 0.5), (px, py)]
    elif kind == RISING:
        pts = [(px, py), (px, py + 1.0), (px + SQRT3_2, py + 1.5), (px + SQRT3_2, py + 0.5)]
    else:
        pts = [(px, py), (px, py + 1.0), (px + SQRT3_2, py + 0.5), (px + SQRT3_2, py - 0.5)]
    parts = []
    for i in range(len(t)):
        xy = [(_fmt(a[i]), _fmt(b[i])) for a, b in pts]
        parts.append("M" + " L".join(f"{u} {v}" for u, v in xy) + "Z")
    return "".join(parts)


def _frame(pf: PathFamily, opts: RenderOptions):
    hexv = hexagon_vertices(pf.dims)
    xs = [p[0] for p in hexv]
    ys = [p[1] for p in hexv]
    x0, x1 = min(xs) - opts.margin, max(xs) + opts.margin
    y0, y1 = min(ys) - opts.margin, max(ys) + opts.margin
    return hexv, x0, x1, y0, y1


def _header(x0, x1, y0, y1, scale) -> list[str]:
    w, h = (x1 - x0) * scale, (y1 - y0) * scale
    # flip y so that x grows upwards as in the lattice picture
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(w)}" height="{_fmt(h)}" '
        f'viewBox="{_fmt(x0)} {_fmt(-y1)} {_fmt(x1 - x0)} {_fmt(y1 - y0)}">',
        '<g transform="scale(1,-1)">',
    ]


def _path_overlay(pf: PathFamily, stride: int, width: float) -> list[str]:
    out = []
    T = pf.dims.T
    ts = list(range(0, T + 1, stride))
    if ts[-1] != T:
        ts.append(T)
    for i in range(0, pf.dims.N, stride):
        pts = [lattice_point(t, pf.X[t, i] + 0.5) for t in ts]
        d = "M" + " L".join(f"{_fmt(a)} {_fmt(b)}" for a, b in pts)
        out.append(f'<path d="{d}" fill="none" stroke="#000000" stroke-width="{_fmt(width)}"/>')
    return out


def render_svg(pf: PathFamily, options: RenderOptions | None = None) -> str:
    """SVG text for the tiling of ``pf``.

    Above ``options.limit`` lozenges the picture is replaced by a thinned
    path drawing (every ``k``-th path sampled at every ``k``-th section) and a
    warning is issued.
    """
    opts = options or RenderOptions()
    dims = pf.dims
    count = dims.a * dims.b + dims.b * dims.c + dims.c * dims.a
    hexv, x0, x1, y0, y1 = _frame(pf, opts)
    lines = _header(x0, x1, y0, y1, opts.scale)
    if count > opts.limit:
        stride = int(np.ceil(np.sqrt(count / opts.limit)))
        warnings.warn(f"{count} lozenges exceed {opts.limit}; drawing every {stride}-th path instead", stacklevel=2)
        lines += _path_overlay(pf, stride, opts.stroke_width * stride)
    else:
        til = to_lozenges(pf)
        for kind in (HORIZONTAL, RISING, FLAT):
            sel = til.kind == kind
            if not np.any(sel):
                continue
            d = _subpaths(kind, til.t[sel], til.x[sel])
            lines.append(
                f'<path d="{d}" fill="{opts.palette[kind]}" stroke="{opts.stroke}" '
                f'stroke-width="{_fmt(opts.stroke_width)}" stroke-linejoin="round"/>'
            )
        if opts.paths:
            lines += _path_overlay(pf, 1, opts.stroke_width * 2)
    if opts.outline:
        d = "M" + " L".join(f"{_fmt(a)} {_fmt(b)}" for a, b in hexv) + "Z"
        lines.append(f'<path d="{d}" fill="none" stroke="#000000" stroke-width="{_fmt(opts.stroke_width * 2)}"/>')
    lines += ["</g>", "</svg>", ""]
    return "\n".join(lines)


def write_svg(pf: PathFamily, path, options: RenderOptions | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render_svg(pf, options))


def palette_from(colors: Sequence[str] | None) -> tuple[str, str, str]:
    if colors is None:
        return RenderOptions().palette
    colors = tuple(colors)
    if len(colors) != 3:
        raise ValueError("a palette needs exactly three colours")
    return colors
