"""Report serialization: evaluation table, JSON/CSV output, and figures."""

import csv
import json

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

TABLE_COLUMNS = ["n", "Q_min", "Q_avg", "theta_min", "theta_max",
                 "theta_lt30", "theta_gt90", "d_H", "RMS", "T", "Q_up", "Q_up_per_T"]


def _fmt_count(n):
    return f"{n / 1000:.3f}k" if n >= 1000 else str(n)


def format_table(report):
    """Two-row (input/output) aligned text table in the standard column order."""
    rows = [
        ["", *TABLE_COLUMNS],
        ["input", _fmt_count(report.n_in),
         f"{report.Q_min_in:.3f}", f"{report.Q_avg_in:.3f}",
         f"{report.theta_min_in:.3f}", f"{report.theta_max_in:.3f}",
         f"{report.theta_lt30_in:.3f}", f"{report.theta_gt90_in:.3f}",
         "--", "--", "--", "--", "--"],
        ["output", _fmt_count(report.n_out),
         f"{report.Q_min:.3f}", f"{report.Q_avg:.3f}",
         f"{report.theta_min:.3f}", f"{report.theta_max:.3f}",
         f"{report.theta_lt30:.3f}", f"{report.theta_gt90:.3f}",
         f"{report.d_H:.3f}", f"{report.RMS:.3f}", f"{report.T:.3f}",
         f"{report.Q_up:.3f}", f"{report.Q_up_per_T:.3f}"],
    ]
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    return "\n".join("  ".join(cell.rjust(w) for cell, w in zip(row, widths)) for row in rows)


def report_json(report):
    return json.dumps(report.to_dict(), indent=2) + "\n"


def write_report_json(report, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(report_json(report))


def write_report_csv(report, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["row", *TABLE_COLUMNS])
        w.writerow(["input", report.n_in, report.Q_min_in, report.Q_avg_in,
                    report.theta_min_in, report.theta_max_in,
                    report.theta_lt30_in, report.theta_gt90_in,
                    "", "", "", "", ""])
        w.writerow(["output", report.n_out, report.Q_min, report.Q_avg,
                    report.theta_min, report.theta_max,
                    report.theta_lt30, report.theta_gt90,
                    report.d_H, report.RMS, report.T,
                    report.Q_up, report.Q_up_per_T])


def render_metrics_figures(report, input_mesh, output_mesh, stem):
    """Angle and quality histograms for the mesh pair; returns written paths."""
    from .quality import corner_angles, triangle_qualities

    paths = []
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    bins = 60
    ax.hist(corner_angles(input_mesh), bins=bins, range=(0, 180), alpha=0.55,
            label=f"input ({_fmt_count(report.n_in)} vertices)", density=True)
    ax.hist(corner_angles(output_mesh), bins=bins, range=(0, 180), alpha=0.55,
            label=f"output ({_fmt_count(report.n_out)} vertices)", density=True)
    ax.axvline(60.0, color="k", lw=0.8, ls="--")
    ax.set_xlabel("corner angle (deg)")
    ax.set_ylabel("density")
    ax.legend(frameon=False)
    fig.tight_layout()
    p = f"{stem}_angles.png"
    fig.savefig(p, dpi=130)
    plt.close(fig)
    paths.append(p)

    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    q_in = triangle_qualities(input_mesh.vertices, input_mesh.faces)
    q_out = triangle_qualities(output_mesh.vertices, output_mesh.faces)
    ax.hist(q_in, bins=50, range=(0, 1), alpha=0.55,
            label=f"input (avg {report.Q_avg_in:.3f})", density=True)
    ax.hist(q_out, bins=50, range=(0, 1), alpha=0.55,
            label=f"output (avg {report.Q_avg:.3f})", density=True)
    ax.set_xlabel("triangle quality")
    ax.set_ylabel("density")
    ax.legend(frameon=False, loc="upper left")
    fig.tight_layout()
    p = f"{stem}_quality.png"
    fig.savefig(p, dpi=130)
    plt.close(fig)
    paths.append(p)
    return paths


def render_convergence_figure(iterations, stem):
    """Displacement trace and per-level site counts over the run."""
    it = [s.index for s in iterations]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.4, 3.4))
    ax1.semilogy(it, [s.delta for s in iterations], marker=".")
    ax1.set_xlabel("iteration")
    ax1.set_ylabel("max displacement / bbox diag")
    for L in range(3):
        ax2.plot(it, [s.level_counts[L] for s in iterations], label=f"{L + 1} clip(s)")
    ax2.set_xlabel("iteration")
    ax2.set_ylabel("sites")
    ax2.legend(frameon=False)
    fig.tight_layout()
    p = f"{stem}_convergence.png"
    fig.savefig(p, dpi=130)
    plt.close(fig)
    return [p]


def write_sweep_csv(rows, fh):
    """Rows of (alpha, beta, Q_avg, T) as CSV to an open file object."""
    w = csv.writer(fh)
    w.writerow(["alpha", "beta", "Q_avg", "T"])
    for alpha, beta, q_avg, t in rows:
        w.writerow([alpha, beta, q_avg, t])


def render_sweep_figures(rows, stem):
    """Q_avg and T heatmaps over the (alpha, beta) grid."""
    alphas = sorted({r[0] for r in rows})
    betas = sorted({r[1] for r in rows})
    qs = {(r[0], r[1]): r[2] for r in rows}
    ts = {(r[0], r[1]): r[3] for r in rows}
    paths = []
    for name, data, label in (("qavg", qs, "mean triangle quality"),
                              ("time", ts, "remeshing time (s)")):
        grid = [[data.get((a, b), float("nan")) for a in alphas] for b in betas]
        fig, ax = plt.subplots(figsize=(4.6, 3.8))
        im = ax.imshow(grid, origin="lower", aspect="auto", cmap="viridis")
        ax.set_xticks(range(len(alphas)), [f"{a:g}" for a in alphas])
        ax.set_yticks(range(len(betas)), [f"{b:g}" for b in betas])
        ax.set_xlabel("alpha")
        ax.set_ylabel("beta")
        fig.colorbar(im, ax=ax, label=label)
        fig.tight_layout()
        p = f"{stem}_{name}.png"
        fig.savefig(p, dpi=130)
        plt.close(fig)
        paths.append(p)
    return paths
