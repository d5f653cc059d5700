"""Figure rendering for benchmark results.

Kept out of the core solver: matplotlib is imported lazily and only the CLI
summarize path calls in here. Each figure is written as a PNG next to the
delimited output; figures whose columns are absent are skipped silently.
"""

from __future__ import annotations

from pathlib import Path


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def _ok_rows(rows, column):
    return [r for r in rows if r.get("status") == "ok" and r.get(column) not in ("", None)]


def render_summary_figures(rows: list[dict], out_dir) -> list[Path]:
    """Render the standard report figures; returns the paths written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    plt = _pyplot()
    written = []

    gap_rows = _ok_rows(rows, "gap_over_alpha_n")
    if gap_rows:
        fig, ax = plt.subplots(figsize=(6, 4))
        for alpha in sorted({r["alpha"] for r in gap_rows}):
            pts = [(r["epsilon"], r["gap_over_alpha_n"]) for r in gap_rows if r["alpha"] == alpha]
            eps = sorted({e for e, _ in pts})
            means = [sum(g for e, g in pts if e == x) / len([g for e, g in pts if e == x]) for x in eps]
            ax.plot(eps, means, "o-", label=f"alpha={alpha:g}")
            ax.scatter([e for e, _ in pts], [g for _, g in pts], s=8, alpha=0.3)
        ax.set_xlabel("epsilon")
        ax.set_ylabel("(OPT - ALG) / (alpha n)")
        ax.set_title("Optimality gap ratio")
        ax.legend()
        fig.tight_layout()
        path = out_dir / "gap_vs_epsilon.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    over_rows = _ok_rows(rows, "overflow_s_over_alpha_b")
    if over_rows:
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.hist([r["overflow_s_over_alpha_b"] for r in over_rows], bins=30)
        ax.set_xlabel("s / (alpha b)")
        ax.set_ylabel("runs")
        ax.set_title("Pre-scaling overflow ratio")
        fig.tight_layout()
        path = out_dir / "overflow_ratios.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    round_rows = _ok_rows(rows, "rounds_T")
    if len({r["n"] for r in round_rows}) > 1:
        fig, ax = plt.subplots(figsize=(6, 4))
        for algo in sorted({r["algorithm"] for r in round_rows}):
            pts = sorted((r["n"], r["rounds_T"]) for r in round_rows if r["algorithm"] == algo)
            ax.loglog([n for n, _ in pts], [t for _, t in pts], "o-", label=algo)
        ax.set_xlabel("n")
        ax.set_ylabel("rounds T")
        ax.set_title("Round count vs problem size")
        ax.legend()
        fig.tight_layout()
        path = out_dir / "rounds_vs_n.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    clock_rows = _ok_rows(rows, "wall_clock_ms")
    if len({r["n"] for r in clock_rows}) > 1:
        fig, ax = plt.subplots(figsize=(6, 4))
        for algo in sorted({r["algorithm"] for r in clock_rows}):
            pts = sorted((r["n"], r["wall_clock_ms"]) for r in clock_rows if r["algorithm"] == algo)
            ax.loglog([n for n, _ in pts], [t for _, t in pts], "o-", label=algo)
        ax.set_xlabel("n")
        ax.set_ylabel("wall clock (ms)")
        ax.set_title("Scaling in the number of agents")
        ax.legend()
        fig.tight_layout()
        path = out_dir / "scaling_wall_clock.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    return written
