"""Figure rendering for experiment reports.

Every plan gets one PNG next to its delimited output; the data files stay the
primary artifact, the figure is a quick-look companion.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

from .experiments import ExperimentResult


def render_figure(result: ExperimentResult, path: str) -> None:
    plan = result.plan.name
    fig, ax = plt.subplots(figsize=(6.4, 4.2), dpi=130)
    if plan == "balloon-period-sweep":
        _balloon_fig(ax, result.rows)
    elif plan == "lb-path-growth":
        _lb_path_fig(ax, result.rows)
    elif plan == "discrepancy-decay":
        _discrepancy_fig(ax, result.rows)
    elif plan == "oracle-agreement":
        _oracle_fig(ax, result.rows)
    ax.set_title(plan)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _ok_rows(rows):
    return [r for r in rows if not r.get("error")]


def _balloon_fig(ax, rows):
    rows = _ok_rows(rows)
    singles = [r for r in rows if r["kind"] == "balloon"]
    multis = [r for r in rows if r["kind"] == "multi-balloon"]
    ax.plot([r["param"] for r in singles], [r["t_p"] for r in singles],
            "o-", label="balloon: period vs cycle size")
    if multis:
        ax2 = ax.twinx()
        ax2.semilogy([r["param"] for r in multis], [r["t_p"] for r in multis],
                     "s--", color="tab:red", label="merged balloons")
        ax2.set_ylabel("period (merged, log scale)")
        ax2.legend(loc="lower right")
    ax.set_xlabel("size parameter")
    ax.set_ylabel("measured period")
    ax.legend(loc="upper left")


def _lb_path_fig(ax, rows):
    rows = _ok_rows(rows)
    ns = [r["n_path"] for r in rows]
    ts = [r["t_s"] for r in rows]
    ax.loglog(ns, ts, "o-", label="measured stabilization time")
    ax.loglog(ns, [n * n / 64 for n in ns], ":", color="gray", label="n^2 / 64 reference")
    ax.set_xlabel("path length n")
    ax.set_ylabel("steps to lock-in")
    ax.legend()


def _discrepancy_fig(ax, rows):
    for r in _ok_rows(rows):
        if not r.get("disc_samples"):
            continue
        pts = [tuple(map(int, kv.split(":"))) for kv in r["disc_samples"].split("|")]
        ax.plot([p[0] + 1 for p in pts], [p[1] for p in pts], alpha=0.5, lw=1)
    ax.set_xscale("log")
    ax.set_xlabel("step")
    ax.set_ylabel("discrepancy over arcs")


def _oracle_fig(ax, rows):
    rows = _ok_rows(rows)
    hs = [r["t_s_hash"] for r in rows]
    ps = [r["t_s_potential"] for r in rows]
    top = max([1, *hs, *ps])
    ax.plot([0, top], [0, top], ":", color="gray")
    ax.plot(hs, ps, "o", alpha=0.6)
    ax.set_xlabel("t_s, hash oracle")
    ax.set_ylabel("t_s, potential criterion")
