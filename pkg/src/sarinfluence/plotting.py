"""Matplotlib figures for model comparison and divergence diagnostics.

Figures are rendered to SVG text with fixed hash salt and no timestamp, so
identical inputs give byte-identical files. Plotted markers and error bars
carry ``gid`` attributes (``point-*``, ``errorbar-*``) that appear as element
ids in the SVG.
"""

import io

import matplotlib
from matplotlib.figure import Figure

MARKERS = {"kl": "^", "is": "*", "l2": "x", "bregman": "x"}
COLORS = {"kl": "tab:red", "is": "tab:green", "l2": "tab:blue", "bregman": "tab:blue"}
CRITERION_STYLE = {"WAIC": ("o", "tab:blue", -0.12), "LOO": ("s", "tab:orange", 0.12)}

RC = {
    "svg.hashsalt": "sarinfluence",
    "svg.fonttype": "none",
    "font.size": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def _svg(fig):
    buf = io.StringIO()
    with matplotlib.rc_context(RC):
        fig.savefig(buf, format="svg", metadata={"Date": None})
    return buf.getvalue()


def _new_figure(width=6.0, height=3.6):
    with matplotlib.rc_context(RC):
        fig = Figure(figsize=(width, height))
        ax = fig.add_subplot()
    return fig, ax


def comparison_svg(tidy):
    """Horizontal dot plot: one row per model, WAIC and LOO with +-1 SE bars."""
    models = list(dict.fromkeys(r["model"] for r in tidy))
    fig, ax = _new_figure(6.0, 1.2 + 0.6 * len(models))
    with matplotlib.rc_context(RC):
        seen = set()
        for row in tidy:
            marker, color, offset = CRITERION_STYLE[row["criterion"]]
            ypos = models.index(row["model"]) + offset
            label = row["criterion"] if row["criterion"] not in seen else None
            seen.add(row["criterion"])
            bars = ax.errorbar(
                row["estimate"], ypos, xerr=row["se"], fmt=marker, color=color,
                capsize=3, label=label,
            )
            tag = f"{row['model']}-{row['criterion']}"
            bars.lines[0].set_gid(f"point-{tag}")
            bars.lines[2][0].set_gid(f"errorbar-{tag}")
        ax.set_yticks(range(len(models)), models)
        ax.invert_yaxis()
        ax.set_xlabel("criterion value (smaller is better)")
        ax.legend(frameon=False, loc="best")
        fig.tight_layout()
    return _svg(fig)


def divergence_svg(reports):
    """One scatter panel per report: divergence (type 1) or proportion (type 2)."""
    fig = Figure(figsize=(6.0, 2.6 * len(reports)))
    with matplotlib.rc_context(RC):
        axes = fig.subplots(len(reports), 1, squeeze=False)[:, 0]
        for ax, (name, rep) in zip(axes, reports.items()):
            obs = range(1, rep.per_obs.size + 1)
            pts = ax.scatter(
                obs, rep.per_obs, marker=MARKERS.get(rep.measure, "o"),
                color=COLORS.get(rep.measure, "black"),
            )
            pts.set_gid(f"point-{name}")
            ax.set_title(name, loc="left")
            ax.set_xlabel("observation")
            ax.set_ylabel("D" if rep.type == 1 else "P")
        fig.tight_layout()
    return _svg(fig)


def overlay_svg(reports):
    """All measures' supreme proportions on one axis, with a legend."""
    fig, ax = _new_figure(6.0, 3.6)
    with matplotlib.rc_context(RC):
        for name, rep in reports.items():
            obs = range(1, rep.per_obs.size + 1)
            pts = ax.scatter(
                obs, rep.per_obs, marker=MARKERS.get(rep.measure, "o"),
                color=COLORS.get(rep.measure, "black"), label=name,
            )
            pts.set_gid(f"point-{name}")
        ax.set_ylim(0, 1)
        ax.set_xlabel("observation")
        ax.set_ylabel("P")
        ax.legend(frameon=False, loc="upper right")
        fig.tight_layout()
    return _svg(fig)
