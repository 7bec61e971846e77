"""Experiment runner: ``qospinn {solve,inverse,uq,verify,lipschitz}``.

Configs are flat INI files (see README for the schema). Every run writes
CSV artifacts and static plots into the output directory; identical config
and seed reproduce identical CSVs apart from the timestamp comment line.

Exit codes: 0 success, 1 config/validation error, 2 runtime failure.
"""

import argparse
import sys
import traceback
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .checkpoint import load_model, save_model
from .cliparse import read_config
from .estimators import McDropoutBaseline, QoSpinnSolver, QoSpinnUncertainty
from .lipschitz import model_bound_report
from .pde import make_problem
from .training import history_to_csv
from .uq import eac


def _stamp(f):
    f.write(f"# created {datetime.now(timezone.utc).isoformat()}\n")


def _write_rows(path, header, rows):
    with open(path, "w") as f:
        _stamp(f)
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def _plot_field_maps(path, axes, pred, ref, axis_names):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    err = np.abs(pred - ref)
    fig, axs = plt.subplots(1, 3, figsize=(13, 3.6), constrained_layout=True)
    extent = [axes[1][0], axes[1][-1], axes[0][0], axes[0][-1]]
    for ax, data, title in zip(axs, (pred, ref, err), ("prediction", "reference", "abs error")):
        im = ax.imshow(data, origin="lower", aspect="auto",
                       extent=[extent[0], extent[1], extent[2], extent[3]])
        ax.set_title(title)
        ax.set_xlabel(axis_names[1])
        ax.set_ylabel(axis_names[0])
        fig.colorbar(im, ax=ax)
    fig.savefig(path, dpi=130)
    plt.close(fig)


def _plot_slices(path, xs, slices, ref_fn, pred_fn, axis_name="x", band_fn=None):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axs = plt.subplots(1, len(slices), figsize=(3.4 * len(slices), 3.2),
                            constrained_layout=True, sharey=True)
    if len(slices) == 1:
        axs = [axs]
    for ax, t in zip(axs, slices):
        mu = pred_fn(xs, t)
        ax.plot(xs, ref_fn(xs, t), "k--", lw=1.2, label="reference")
        ax.plot(xs, mu, lw=1.2, label="prediction")
        if band_fn is not None:
            sd = band_fn(xs, t)
            ax.fill_between(xs, mu - 2 * sd, mu + 2 * sd, alpha=0.25, label="+-2 sigma")
        ax.set_title(f"t = {t:g}")
        ax.set_xlabel(axis_name)
    axs[0].legend(fontsize=8)
    fig.savefig(path, dpi=130)
    plt.close(fig)


def _field_outputs(out, solver, time_slices):
    problem = solver.problem_
    axes = problem.eval_axes
    pred = solver.predict_grid(axes)
    ref = problem.reference_grid(axes)
    err = np.abs(pred - ref)
    mesh = np.meshgrid(*axes, indexing="ij")
    header = list(problem.axis_names) + ["u_pred", "u_ref", "abs_err"]
    rows = zip(*([m.ravel() for m in mesh] + [pred.ravel(), ref.ravel(), err.ravel()]))
    _write_rows(out / "field.csv", header, rows)

    # per-time-slice errors; time is the last axis
    t_axis = axes[-1]
    flat = pred.reshape(-1, len(t_axis))
    rflat = ref.reshape(-1, len(t_axis))
    rows = []
    for i, t in enumerate(t_axis):
        e = flat[:, i] - rflat[:, i]
        rows.append((t, float(np.mean(e * e)), float(np.max(np.abs(e)))))
    _write_rows(out / "error.csv", ["t", "mse", "max_err"], rows)

    if problem.n_axes == 2:
        _plot_field_maps(out / "field_maps.png", axes, pred, ref, problem.axis_names)
        xs = axes[0]
        _plot_slices(out / "field_slices.png", xs, time_slices,
                     lambda x, t: problem.reference_grid([x, np.array([t])])[:, 0],
                     lambda x, t: solver.predict_grid([x, np.array([t])])[:, 0],
                     axis_name=problem.axis_names[0])
    return float(np.mean((pred - ref) ** 2)), float(np.max(err))


def _run_solve(args, inverse=False):
    sections = read_config(args.config)
    exp = sections.get("experiment", {})
    tr = sections.get("trainer", {})
    problem_name = exp.get("problem", "advection_diffusion_1d")
    seed = args.seed if args.seed is not None else int(exp.get("seed", 0))
    out = Path(args.out or exp.get("out_dir", f"results/{problem_name}"))
    out.mkdir(parents=True, exist_ok=True)

    problem_probe = make_problem(problem_name)
    if inverse and problem_probe.learnable_param is None:
        raise ConfigError(f"problem {problem_name} has no learnable parameter")

    solver = QoSpinnSolver(
        problem=problem_name,
        architecture=exp.get("architecture", "2 x [16, 16, 16, 20]"),
        lr=float(tr.get("lr", 5e-3)),
        epochs=args.epochs if args.epochs is not None else int(tr.get("epochs", 20000)),
        collocation=int(tr.get("collocation", 250)),
        lambda_res=float(tr.get("lambda_res", 1.0)),
        lambda_ic=float(tr.get("lambda_ic", 10.0)),
        lambda_bc=float(tr.get("lambda_bc", 10.0)),
        lambda_data=float(tr.get("lambda_data", 10.0)),
        resample_every=int(tr.get("resample_every", 100)),
        seed=seed,
        log_every=int(tr.get("log_every", 100)),
        eval_every=int(tr.get("eval_every", 2000)),
    )
    quiet = getattr(args, "quiet", False)
    cb = None if quiet else (lambda row: print(
        f"epoch {row['epoch']}: loss {row['loss_total']:.4e}"
        + (f" beta {row['beta_hat']:.4f}" if "beta_hat" in row else ""), flush=True))
    solver.fit(callback=cb)

    history_to_csv(solver.history_, out / "history.csv")
    mse, max_err = _field_outputs(out, solver, time_slices=(0.0, 0.25, 0.5, 0.75, 1.0)
                                  if problem_name.startswith("burgers") else (0.0, 0.5, 1.0))
    save_model(solver.model_, out / "checkpoint.npz",
               extra_meta={"problem": problem_name, "seed": seed})
    if inverse or solver.param_estimate_ is not None:
        est = solver.param_estimate_
        _write_rows(out / "beta_trace.csv", ["epoch", "beta_hat"],
                    list(enumerate(est.trace)))
        print(f"recovered parameter: {est.value:.6f}")
    print(f"final grid MSE {mse:.6e}, max error {max_err:.6e}; artifacts in {out}")
    return 0


def _run_uq(args):
    sections = read_config(args.config)
    exp = sections.get("experiment", {})
    uqc = sections.get("uq", {})
    seed = args.seed if args.seed is not None else int(exp.get("seed", 0))
    out = Path(args.out or exp.get("out_dir", "results/uq_burgers"))
    out.mkdir(parents=True, exist_ok=True)
    quiet = getattr(args, "quiet", False)

    est = QoSpinnUncertainty(
        architecture=exp.get("architecture", "2x[35, 35] + [35, 35]"),
        lr=float(uqc.get("lr", 5e-4)),
        epochs=args.epochs if args.epochs is not None else int(uqc.get("epochs", 6000)),
        collocation_pairs=int(uqc.get("collocation_pairs", 1024)),
        n_ic=int(uqc.get("n_ic", 128)),
        n_bc=int(uqc.get("n_bc", 64)),
        gamma=float(uqc.get("gamma", 0.05)),
        feature_count=int(uqc.get("feature_count", 128)),
        ridge=float(uqc.get("ridge", 1.0)),
        nu=float(uqc.get("nu", 0.05)),
        seed=seed,
        log_every=int(uqc.get("log_every", 500)),
    )
    cb = None if quiet else (lambda row: print(f"uq epoch {row['epoch']}: loss {row['total']:.4e}", flush=True))
    est.fit(callback=cb)

    baseline = McDropoutBaseline(
        architecture=uqc.get("baseline_architecture", "2x[100, 100] + [100, 100]"),
        lr=float(uqc.get("lr", 5e-4)),
        epochs=int(uqc.get("baseline_epochs", 4000)),
        collocation_pairs=int(uqc.get("collocation_pairs", 1024)),
        p_drop=float(uqc.get("p_drop", 0.05)),
        passes=int(uqc.get("passes", 100)),
        nu=float(uqc.get("nu", 0.05)),
        seed=seed,
    )
    cb = None if quiet else (lambda row: print(f"baseline epoch {row['epoch']}: loss {row['total']:.4e}", flush=True))
    baseline.fit(callback=cb)

    problem = make_problem("burgers_1d")
    oracle = problem.get_oracle()
    xs = np.linspace(0.0, 1.0, 101)
    slices = [float(s) for s in str(uqc.get("time_slices", "0,0.25,0.5,0.75,1")).split(",")]

    report_rows = []
    summary_rows = []
    scatter_rows = []
    for name, predictor in (("QO-SPINN", est), ("MC-Dropout", baseline)):
        for t in slices:
            X = np.stack([xs, np.full_like(xs, t)], axis=1)
            mu, sd = predictor.predict(X, return_std=True)
            ref = oracle.sample(xs, t)
            err = np.abs(mu - ref)
            if name == "QO-SPINN":
                for x, m_, s_, r_, e_ in zip(xs, mu, sd, ref, err):
                    report_rows.append((t, x, m_, s_, r_, e_))
            summary_rows.append((name, t, float(np.mean((mu - ref) ** 2)),
                                 float(err.max()), eac(sd, err)))
            scatter_rows.extend((name, t, s_, e_) for s_, e_ in zip(sd, err))
    _write_rows(out / "uq_report.csv", ["t", "x", "mu", "sigma", "reference", "abs_err"],
                report_rows)
    _write_rows(out / "uq_summary.csv", ["method", "time", "mse", "max_error", "eac"],
                summary_rows)
    _write_rows(out / "sigma_error_scatter.csv", ["method", "t", "sigma", "abs_err"],
                scatter_rows)
    save_model(est.model_, out / "uq_checkpoint.npz", extra_meta={"seed": seed})

    _plot_slices(out / "uq_bands.png", xs, slices,
                 lambda x, t: oracle.sample(x, np.full_like(x, t)),
                 lambda x, t: est.predict(np.stack([x, np.full_like(x, t)], axis=1)),
                 band_fn=lambda x, t: est.predict(
                     np.stack([x, np.full_like(x, t)], axis=1), return_std=True)[1])
    _plot_sigma_scatter(out / "sigma_vs_error.png", summary_rows, scatter_rows)
    for row in summary_rows:
        print(f"{row[0]:>10} t={row[1]:<5g} mse={row[2]:.4e} max={row[3]:.4e} eac={row[4]: .4f}")
    print(f"UQ artifacts in {out}")
    return 0


def _plot_sigma_scatter(path, summary_rows, scatter_rows):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    slices = sorted({r[1] for r in scatter_rows})
    fig, axs = plt.subplots(1, len(slices), figsize=(3.2 * len(slices), 3.0),
                            constrained_layout=True)
    if len(slices) == 1:
        axs = [axs]
    for ax, t in zip(axs, slices):
        pts = [(s, e) for (m, tt, s, e) in scatter_rows if tt == t and m == "QO-SPINN"]
        if pts:
            s, e = zip(*pts)
            ax.scatter(s, e, s=6, alpha=0.6)
        ax.set_xlabel("sigma")
        ax.set_ylabel("abs error")
        ax.set_title(f"t = {t:g}")
    fig.savefig(path, dpi=130)
    plt.close(fig)


def _run_lipschitz(args):
    out = Path(args.out or "results/lipschitz")
    out.mkdir(parents=True, exist_ok=True)
    model = load_model(args.checkpoint)
    report = model_bound_report(model, samples=args.samples, pairs=args.pairs,
                                seed=args.seed or 0)
    text = report.to_text()
    (out / "bound_report.txt").write_text(text + "\n")
    rows = [(i, m, l, s) for i, (m, l, s) in
            enumerate(zip(report.M, report.L, report.spec_norms))]
    _write_rows(out / "bound_report.csv", ["subnet", "M", "L_sampled", "spec_norm_final"], rows)
    print(text)
    return 0 if report.bound_satisfied else 2


def _run_verify(args):
    from .verify import run_all
    failures = run_all()
    print(f"{failures} failing properties" if failures else "all properties hold")
    return 0 if failures == 0 else 2


class ConfigError(ValueError):
    pass


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qospinn",
        description="separable physics-informed solver with orthogonal circuit layers")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="INI experiment config")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--epochs", type=int, default=None, help="override epoch count")
        p.add_argument("--quiet", action="store_true")

    add_common(sub.add_parser("solve", help="train a forward problem"))
    add_common(sub.add_parser("inverse", help="train an inverse problem"))
    add_common(sub.add_parser("uq", help="uncertainty quantification experiment"))
    p_lip = sub.add_parser("lipschitz", help="bound report for a trained checkpoint")
    p_lip.add_argument("--checkpoint", required=True)
    p_lip.add_argument("--out", default=None)
    p_lip.add_argument("--seed", type=int, default=0)
    p_lip.add_argument("--samples", type=int, default=2000)
    p_lip.add_argument("--pairs", type=int, default=100000)
    sub.add_parser("verify", help="run the invariant suite")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "solve":
            return _run_solve(args, inverse=False)
        if args.command == "inverse":
            return _run_solve(args, inverse=True)
        if args.command == "uq":
            return _run_uq(args)
        if args.command == "lipschitz":
            return _run_lipschitz(args)
        if args.command == "verify":
            return _run_verify(args)
        parser.error(f"unknown command {args.command}")
    except (ConfigError, ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
