"""Static density maps: grayscale PGM, an SVG overlay and an optional PNG figure."""

from __future__ import annotations

import warnings
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import Region, WorkZoneLayout
from .density import ClusterCenter, DensityField, find_cluster_centers
from .errors import EmptyField

SVG_CELL = 4  # pixels per grid cell in the overlay


def pgm_text(fld: DensityField) -> str:
    """Plain (P2) PGM, one pixel per cell, scaled so the peak is white.

    The top image row is the largest y, so the map reads like a plan view
    with the leftmost lane at the top.
    """
    v = fld.values
    ny, nx = v.shape
    peak = float(v.max()) if v.size else 0.0
    if not peak > 0:
        warnings.warn(f"density field {fld.label and fld.label.value} is empty", EmptyField, stacklevel=2)
        pix = np.zeros((ny, nx), dtype=int)
    else:
        pix = np.clip(np.rint(v / peak * 255.0), 0, 255).astype(int)
    rows = [" ".join(map(str, r)) for r in pix[::-1]]
    return f"P2\n{nx} {ny}\n255\n" + "\n".join(rows) + ("\n" if rows else "")


def read_pgm(text: str) -> np.ndarray:
    tokens = [t for line in text.splitlines() if not line.startswith("#") for t in line.split()]
    if not tokens or tokens[0] != "P2":
        raise ValueError("not a plain PGM")
    w, h = int(tokens[1]), int(tokens[2])
    return np.array(tokens[4:4 + w * h], dtype=int).reshape(h, w)


def svg_text(fld: DensityField, layout: WorkZoneLayout, centers: Optional[Sequence[ClusterCenter]] = None,
             min_peak: float = 0.1) -> str:
    """Zone boundaries and cluster-center markers in grid pixel coordinates."""
    spec = fld.spec
    ny, nx = fld.values.shape
    width, height = nx * SVG_CELL, ny * SVG_CELL
    if centers is None:
        centers = find_cluster_centers(fld, layout, min_peak)

    def px(x):
        return (x - spec.x_min) / spec.cell * SVG_CELL

    def py(y):
        return (spec.y_max - y) / spec.cell * SVG_CELL

    title = "density" if fld.label is None else fld.label.value
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f"<title>{_esc(title)}</title>"]
    for lane in range(layout.lane_count + 1):
        y = py(lane * layout.lane_width)
        out.append(f'<line x1="0" y1="{y:.2f}" x2="{width}" y2="{y:.2f}" stroke="#808080" stroke-width="0.5"/>')
    for k, x in enumerate(layout.boundaries()):
        if spec.x_min <= x <= spec.x_max:
            out.append(f'<line x1="{px(x):.2f}" y1="0" x2="{px(x):.2f}" y2="{height}" '
                       f'stroke="#ffa500" stroke-width="1" stroke-dasharray="4 2"/>')
            if k < len(Region) - 2:
                name = Region(k + 1).name.lower().replace("_", " ")
                out.append(f'<text x="{px(x) + 2:.2f}" y="10" font-size="8" fill="#ffa500">{name}</text>')
    for c in centers:
        cx, cy = px(c.x), py(c.y)
        out.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="4" fill="none" stroke="#ff0000" stroke-width="1.5"/>')
        out.append(f'<text x="{cx + 5:.2f}" y="{cy - 5:.2f}" font-size="9" fill="#ff0000">{c.density:.2f}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def render_heatmap(fld: DensityField, layout: WorkZoneLayout, out_stem, png: bool = False,
                   min_peak: float = 0.1) -> list[Path]:
    """Write ``<stem>.pgm`` and ``<stem>.svg`` (and ``<stem>.png`` on request)."""
    stem = Path(out_stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    centers = find_cluster_centers(fld, layout, min_peak)
    pgm, svg = stem.with_suffix(".pgm"), stem.with_suffix(".svg")
    pgm.write_text(pgm_text(fld))
    svg.write_text(svg_text(fld, layout, centers))
    written = [pgm, svg]
    if png:
        written.append(render_png(fld, layout, stem.with_suffix(".png"), centers))
    return written


def render_png(fld: DensityField, layout: WorkZoneLayout, path, centers=None) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    spec = fld.spec
    if centers is None:
        centers = find_cluster_centers(fld, layout)
    fig, ax = plt.subplots(figsize=(10, 2.8))
    im = ax.imshow(fld.values, origin="lower", aspect="auto", cmap="magma",
                   extent=(spec.x_min, spec.x_max, spec.y_min, spec.y_max))
    for x in layout.boundaries():
        ax.axvline(x, color="orange", lw=0.8, ls="--")
    for lane in range(layout.lane_count + 1):
        ax.axhline(lane * layout.lane_width, color="0.6", lw=0.4)
    for c in centers:
        ax.plot(c.x, c.y, "o", mfc="none", mec="red")
        ax.annotate(f"{c.density:.2f}", (c.x, c.y), xytext=(4, 4), textcoords="offset points", color="red", fontsize=8)
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.set_title("density" if fld.label is None else fld.label.value)
    fig.colorbar(im, ax=ax, label="density")
    fig.tight_layout()
    path = Path(path)
    # fixed metadata keeps repeated renders byte-identical
    fig.savefig(path, dpi=110, metadata={"Software": None})
    plt.close(fig)
    return path
