"""Figures for the experiment bundle, written as PNG files next to the CSVs."""
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (6.4, 4.0),
    "figure.dpi": 100,
    "savefig.dpi": 150,
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "lines.linewidth": 1.3,
    "legend.frameon": False,
    "legend.fontsize": 8,
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_trajectories(traj_opt, traj_near, labels, path):
    """Frequencies and inputs of both loops, one panel each."""
    n = traj_opt.plant_dim
    omega = [i for i, lab in enumerate(labels) if lab.startswith("omega")] or list(range(n))
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(2, 2, sharex=True, figsize=(9, 5.5))
        for col, (traj, name) in enumerate(((traj_opt, "optimal"), (traj_near, "near-optimal"))):
            for i in omega:
                axes[0, col].plot(traj.times, traj.states[:, i], label=labels[i])
            for j in range(traj.inputs.shape[1]):
                axes[1, col].plot(traj.times, traj.inputs[:, j], label=f"u_{j + 1}")
            axes[0, col].set_title(name)
            axes[1, col].set_xlabel("t [s]")
        axes[0, 0].set_ylabel("state")
        axes[1, 0].set_ylabel("input")
        axes[0, 1].legend(loc="best")
        axes[1, 1].legend(loc="best")
        return _save(fig, path)


def plot_jt(jt, path):
    """Running cost of both loops."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(jt[:, 0], jt[:, 1], label="optimal")
        ax.plot(jt[:, 0], jt[:, 2], "--", label="near-optimal")
        ax.set_xlabel("T [s]")
        ax.set_ylabel("J_T")
        ax.legend()
        return _save(fig, path)


def plot_jt_shifted(jt, path):
    """Running cost minus the steady-state rate, plus the gap between the loops."""
    with plt.rc_context(STYLE):
        fig, (ax, ax_gap) = plt.subplots(1, 2, figsize=(9, 3.6))
        ax.plot(jt[:, 0], jt[:, 3], label="optimal")
        ax.plot(jt[:, 0], jt[:, 4], "--", label="near-optimal")
        ax.set_xlabel("T [s]")
        ax.set_ylabel("J_T - f_bar (T - t0)")
        ax.legend()
        ax_gap.plot(jt[:, 0], jt[:, 5], color="C3")
        ax_gap.set_xlabel("T [s]")
        ax_gap.set_ylabel("J_T near-optimal - J_T optimal")
        return _save(fig, path)


def plot_gap_vs_k(reports, path):
    ks = np.array([r.k for r in reports])
    analytic = np.array([r.analytic_gap for r in reports])
    simulated = np.array([r.simulated_gap_at_T for r in reports])
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.loglog(ks, analytic, "o-", label="analytic")
        ax.loglog(ks, simulated, "x", ms=8, label="simulated")
        ax.set_xlabel("gain scale k")
        ax.set_ylabel("performance gap")
        ax.legend()
        return _save(fig, path)


def render_bundle(out_dir, traj_opt, traj_near, jt, reports, labels):
    paths = [
        plot_trajectories(traj_opt, traj_near, labels, os.path.join(out_dir, "trajectories.png")),
        plot_jt(jt, os.path.join(out_dir, "jt_curves.png")),
        plot_jt_shifted(jt, os.path.join(out_dir, "jt_shifted.png")),
    ]
    if reports:
        paths.append(plot_gap_vs_k(reports, os.path.join(out_dir, "gap_vs_k.png")))
    return paths
