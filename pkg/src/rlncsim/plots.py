"""Render sweep results to figure files next to the CSV output."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_SCHEME_STYLE = {
    "generation": dict(color="tab:blue", marker="o"),
    "sliding-window": dict(color="tab:orange", marker="s"),
    "arq": dict(color="tab:green", marker="^", linestyle="--"),
}


def _grouped(rows, keys):
    groups: dict = {}
    for row in rows:
        groups.setdefault(tuple(row[k] for k in keys), []).append(row)
    return groups


def render_sweep(rows, preset: str, path: str) -> str:
    """One PNG per sweep: delay/efficiency/PER against the sweep axis."""
    if rows and "strategy" in rows[0]:
        return render_tandem(rows, path)
    metric, ylabel = {
        "fig4": ("eta", "efficiency"),
        "fig5": ("PER", "upper-layer PER"),
    }.get(preset, ("E_D_ms", "in-order delay E[D] (ms)"))
    els = sorted({row["E_L"] for row in rows})
    fig, axes = plt.subplots(1, len(els), figsize=(4.2 * len(els), 3.4),
                             sharey=True, squeeze=False)
    for ax, el in zip(axes[0], els):
        subset = [r for r in rows if r["E_L"] == el]
        for (scheme, R), group in sorted(_grouped(subset, ["scheme", "R"]).items()):
            group.sort(key=lambda r: r["axis_value"])
            xs = [r["axis_value"] for r in group]
            ys = [r[metric] for r in group]
            style = dict(_SCHEME_STYLE.get(scheme, {}))
            label = scheme if len({g[1] for g in _grouped(subset, ["scheme", "R"])}) <= 1 \
                else f"{scheme} (R={R})"
            if preset == "fig6":
                errs = [2 * r["std_D"] for r in group]
                ax.errorbar(xs, ys, yerr=errs, capsize=2, label=label, **style)
            else:
                ax.plot(xs, ys, label=label, **style)
        ax.set_title(f"E[L] = {el:g}")
        ax.set_xlabel(rows[0]["axis_name"])
        if preset == "fig5":
            ax.set_yscale("log")
        ax.grid(True, alpha=0.3)
    axes[0][0].set_ylabel(ylabel)
    axes[0][-1].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def render_tandem(rows, path: str) -> str:
    """Grouped bars: per-link efficiency under each strategy."""
    strategies = sorted({r["strategy"] for r in rows})
    links = sorted({r["link"] for r in rows})
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    width = 0.8 / len(strategies)
    for si, strategy in enumerate(strategies):
        vals = [next(r["efficiency"] for r in rows
                     if r["strategy"] == strategy and r["link"] == link)
                for link in links]
        xs = [l - 0.4 + width * (si + 0.5) for l in links]
        ax.bar(xs, vals, width=width, label=strategy)
    ax.set_xticks(links)
    ax.set_xticklabels([f"link {l}" for l in links])
    ax.set_ylabel("efficiency")
    ax.set_ylim(0, 1.05)
    ax.legend(fontsize=8)
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path
