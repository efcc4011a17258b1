"""Vector snapshots of a configuration, boundary arcs colored by class."""

from __future__ import annotations

import numpy as np

from .geometry import ArcClass, Domain, FreeCrystal, classify_boundary

CLASS_COLORS = {
    ArcClass.FREE_BOUNDARY: "#1f77b4",
    ArcClass.CRACK: "#d62728",
    ArcClass.FILAMENT: "#9467bd",
    ArcClass.WETTING_LAYER: "#17becf",
    ArcClass.CONTACT: "#2ca02c",
    ArcClass.DELAMINATION: "#ff7f0e",
}

CLASS_LABELS = {
    ArcClass.FREE_BOUNDARY: "free boundary",
    ArcClass.CRACK: "crack",
    ArcClass.FILAMENT: "filament",
    ArcClass.WETTING_LAYER: "wetting layer",
    ArcClass.CONTACT: "contact",
    ArcClass.DELAMINATION: "delamination",
}

# zero-width sets rendered dashed so they stay visible at zero area
_DASHED = {ArcClass.CRACK, ArcClass.FILAMENT}


def _fmt(x):
    return f"{x:.6g}"


def snapshot_svg(path, domain: Domain, crystal: FreeCrystal, arcs=None):
    """Write an SVG with one path per boundary class present, plus a legend."""
    if arcs is None:
        arcs = classify_boundary(crystal, domain)
    lo, hi = domain.bbox
    w, h = hi[0] - lo[0], hi[1] - lo[1]
    pad = 0.08 * max(w, h)
    stroke = 0.004 * max(w, h)
    legend_w = 0.62 * max(w, h)

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" '
        f'viewBox="{_fmt(lo[0] - pad)} {_fmt(-(hi[1] + pad))} '
        f'{_fmt(w + 2 * pad + legend_w)} {_fmt(h + 2 * pad)}">',
        # y axis points up in scene coordinates; flip for SVG
        '<g transform="scale(1,-1)">',
    ]

    for s in domain.substrates:
        pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in s.outer)
        lines.append(f'<polygon points="{pts}" fill="#d9d9d9" stroke="none"/>')
    cont = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in domain.container.outer)
    lines.append(f'<polygon points="{cont}" fill="none" stroke="#999999" '
                 f'stroke-width="{_fmt(stroke)}"/>')

    by_class = {}
    for arc in arcs:
        by_class.setdefault(arc.cls, []).append(arc)
    for cls in ArcClass:
        if cls not in by_class:
            continue
        subpaths = []
        for arc in by_class[cls]:
            (x0, y0), (x1, y1) = arc.segment
            subpaths.append(f"M {_fmt(x0)} {_fmt(y0)} L {_fmt(x1)} {_fmt(y1)}")
        dash = f' stroke-dasharray="{_fmt(3 * stroke)} {_fmt(2 * stroke)}"' \
            if cls in _DASHED else ""
        lines.append(
            f'<path d="{" ".join(subpaths)}" fill="none" '
            f'stroke="{CLASS_COLORS[cls]}" stroke-width="{_fmt(1.5 * stroke)}"'
            f'{dash} id="class-{cls.value}"/>')
    lines.append("</g>")

    font = 0.05 * max(w, h)
    x_leg = hi[0] + pad + 0.05 * legend_w
    y_leg = -(hi[1]) + font
    for i, cls in enumerate(c for c in ArcClass if c in by_class):
        y = y_leg + i * 1.5 * font
        lines.append(
            f'<rect x="{_fmt(x_leg)}" y="{_fmt(y - 0.8 * font)}" '
            f'width="{_fmt(font)}" height="{_fmt(0.8 * font)}" '
            f'fill="{CLASS_COLORS[cls]}"/>')
        lines.append(
            f'<text x="{_fmt(x_leg + 1.4 * font)}" y="{_fmt(y)}" '
            f'font-size="{_fmt(font)}" font-family="sans-serif">'
            f'{CLASS_LABELS[cls]}</text>')
    lines.append("</svg>")

    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
