"""Static SVG drawing of a trained network: nodes plus one curve panel per active edge."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .network import KanNetwork

SVG_SALT = "kanaft"


def _node_x(count: int) -> np.ndarray:
    return (np.arange(count) + 0.5) / count


def draw_network(net: KanNetwork, path, input_names=None, title: str | None = None) -> int:
    """Write ``path`` as SVG and return the number of edge panels drawn.

    Bytes are reproducible for a fixed network: the SVG id salt is pinned
    and the date metadata is dropped.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    names = list(input_names) if input_names else [f"z{i + 1}" for i in range(net.shape[0])]
    n_rows = len(net.shape)
    width = max(3.0, 2.2 * max(net.shape))
    height = 2.6 * (n_rows - 1) + 1.2
    with plt.rc_context({"svg.hashsalt": SVG_SALT, "svg.fonttype": "none"}):
        fig = plt.figure(figsize=(width, height))
        canvas = fig.add_axes([0, 0, 1, 1])
        canvas.set_axis_off()
        canvas.set_xlim(0, 1)
        canvas.set_ylim(0, 1)
        row_y = np.linspace(0.06, 0.94, n_rows)
        panels = 0
        for l, layer in enumerate(net.layers):
            x_in, x_out = _node_x(layer.in_dim), _node_x(layer.out_dim)
            y_in, y_out = row_y[l], row_y[l + 1]
            for j in range(layer.out_dim):
                for i in range(layer.in_dim):
                    if not layer.mask[j, i]:
                        continue
                    canvas.plot([x_in[i], x_out[j]], [y_in, y_out], color="0.75", lw=0.8, zorder=0)
                    cx, cy = (x_in[i] + x_out[j]) / 2, (y_in + y_out) / 2
                    pw = min(0.8 / layer.in_dim, 0.22)
                    ph = 0.45 * (y_out - y_in)
                    ax = fig.add_axes([cx - pw / 2, cy - ph / 2, pw, ph])
                    ax.set_gid(f"edge-{l}-{j}-{i}")
                    lo, hi = layer.domains[i]
                    x = np.linspace(lo, hi, 120)
                    ax.plot(x, layer.edge(j, i)(x), color="k", lw=1.2)
                    ax.set_xticks([])
                    ax.set_yticks([])
                    panels += 1
        for r, count in enumerate(net.shape):
            xs = _node_x(count)
            canvas.scatter(xs, np.full(count, row_y[r]), s=60, color="k", zorder=3)
            if r == 0:
                for x, name in zip(xs, names):
                    canvas.text(x, row_y[0] - 0.045, name, ha="center", va="top", fontsize=9)
        canvas.text(0.5, row_y[-1] + 0.03, "log T", ha="center", va="bottom", fontsize=9)
        if title:
            fig.suptitle(title, fontsize=9)
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return panels
