"""SVG figures for the CLI report path. CSV files stay the canonical output."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rc("figure", figsize=(7, 4))
plt.rc("axes", linewidth=0.6, grid=True)
plt.rc("grid", linewidth=0.3, alpha=0.6)
plt.rc("svg", hashsalt="seqihr")  # stable element ids across runs


def _save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_daily_deaths(path, days, model, data_days=None, data=None, title="Daily deaths") -> None:
    """Model daily deaths, optionally overlaid on the smoothed data series."""
    fig, ax = plt.subplots()
    ax.plot(days, model, color="tab:blue", lw=1.2, label="model")
    if data is not None:
        ax.plot(data_days, data, color="tab:red", lw=1.0, label="data (7-day mean)")
    ax.set_xlabel("day")
    ax.set_ylabel("deaths per day")
    ax.set_title(title)
    ax.legend(frameon=False)
    _save(fig, path)


def plot_trajectory(path, times, states, labels=("S", "E", "I", "Q", "H", "R", "D")) -> None:
    """Compartment fractions on a log axis, so small compartments stay visible."""
    fig, ax = plt.subplots()
    for k, label in enumerate(labels):
        col = np.asarray(states[:, k], dtype=float)
        if np.any(col > 0):
            ax.plot(times, np.where(col > 0, col, np.nan), lw=1.0, label=label)
    ax.set_yscale("log")
    ax.set_xlabel("day")
    ax.set_ylabel("population fraction")
    ax.legend(frameon=False, ncol=4, fontsize="small")
    _save(fig, path)


def plot_frontier(path, results, reference=None) -> None:
    """All evaluated policies (faint) and each kind's Pareto frontier, in percent."""
    colors = {"uniform": "tab:orange", "targeted": "tab:blue"}
    fig, ax = plt.subplots()
    for result in sorted(results, key=lambda r: r.kind):
        color = colors.get(result.kind, "tab:gray")
        pts = np.array([(p.gdp_loss, p.death_rate) for p in result.points]) * 100
        front = np.array([(p.gdp_loss, p.death_rate) for p in result.frontier]) * 100
        ax.scatter(pts[:, 0], pts[:, 1], s=2, color=color, alpha=0.15, lw=0)
        ax.plot(front[:, 0], front[:, 1], "-o", ms=2.5, lw=1.0, color=color, label=f"{result.kind} frontier")
    if reference:
        for name, (gdp, death) in reference.items():
            ax.plot([gdp * 100], [death * 100], "x", color="k", ms=6)
            ax.annotate(name, (gdp * 100, death * 100), textcoords="offset points", xytext=(4, 4),
                        fontsize="small")
    ax.set_xlabel("GDP loss (%)")
    ax.set_ylabel("death rate (%)")
    ax.legend(frameon=False)
    _save(fig, path)


def plot_chi_sweep(path, rows, names=("y", "m", "o")) -> None:
    """Optimal lockdown level per group against the value of a statistical life."""
    chis = np.array([chi for chi, _ in rows])
    fig, ax = plt.subplots()
    for g, name in enumerate(names):
        levels = [point.policy.levels[g][0] for _, point in rows]
        ax.plot(chis, levels, "-o", ms=3, lw=1.0, label=f"L_{name}")
    ax.set_xscale("log")
    ax.set_xlabel("chi (value of life, years of output)")
    ax.set_ylabel("lockdown level")
    ax.legend(frameon=False)
    _save(fig, path)
