"""SVG line charts of sample paths against the Strassen-ball diagnostics."""
import io
import logging
from pathlib import Path
from typing import Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from services.additive.experiments import extremal_functions  # noqa: E402
from shared.models import PolygonalPath  # noqa: E402

logger = logging.getLogger(__name__)

# deterministic SVG ids and no timestamp
matplotlib.rcParams["svg.hashsalt"] = "assemblies"
_METADATA = {"Date": None}


def render_paths_svg(paths: Sequence[PolygonalPath], title: str = "",
                     out: Optional[Union[str, Path]] = None) -> str:
    """Draw U_m paths with g1, g2 and the +-sqrt(t) envelope of K.

    Args:
        paths: Sample paths to overlay
        title: Chart title
        out: Optional file to write

    Returns:
        SVG document text
    """
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    grid = np.linspace(0.0, 1.0, 201)
    ax.plot(grid, np.sqrt(grid), color="0.6", linestyle="--", linewidth=0.8, label="envelope")
    ax.plot(grid, -np.sqrt(grid), color="0.6", linestyle="--", linewidth=0.8)
    for name, g in extremal_functions().items():
        ax.plot(g.t, g.y, linewidth=1.4, label=name)
    for i, path in enumerate(paths):
        ax.plot(path.t, path.y, color="tab:blue", alpha=0.35, linewidth=0.7,
                label="U_m" if i == 0 else None)
    ax.set_xlim(0.0, 1.0)
    ax.set_xlabel("t")
    ax.set_ylabel("U_m(t)")
    if title:
        ax.set_title(title)
    ax.legend(loc="upper left", fontsize="small")

    buffer = io.StringIO()
    fig.savefig(buffer, format="svg", metadata=_METADATA)
    plt.close(fig)
    svg = buffer.getvalue()
    if out is not None:
        Path(out).write_text(svg, encoding="utf-8")
        logger.info(f"Wrote {len(paths)} paths to {out}")
    return svg
