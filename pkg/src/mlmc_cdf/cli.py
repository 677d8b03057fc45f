"""Command line entry point: ``mlmc-cdf {decay,adaptive,gain,theory,cdf}``."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import bench
from .bench import ExperimentConfig, eps_label, write_csv
from .sde import MODELS
from .theory import RateAssumptions, complexity_exponents, plan_parameters

PAPER_SCALE = {"eps": bench.PAPER_EPS, "reps": 100, "samples": 10**6, "levels": tuple(range(11))}
DESK_SCALE = {"eps": bench.DESK_EPS, "reps": 20, "samples": 10**5, "levels": tuple(range(8))}


def _eps_value(text: str) -> float:
    """Accept ``0.125``, ``2^-3`` or ``2**-3``."""
    t = text.strip().replace("**", "^")
    if "^" in t:
        base, exp = t.split("^", 1)
        return float(base) ** float(exp)
    return float(t)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", choices=sorted(MODELS), default="terminal")
    p.add_argument("--mu", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--T", type=float)
    p.add_argument("--barrier", type=float)
    p.add_argument("--s0", type=float)
    p.add_argument("--s1", type=float)
    p.add_argument("--eps", type=_eps_value, nargs="+", help="accuracy targets, e.g. 2^-3 2^-4")
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, help="samples per level in decay studies")
    p.add_argument("--out", type=Path, default=Path("out"))
    p.add_argument("--paper-scale", action="store_true",
                   help="full-size grids: eps down to 2^-9, 100 reps, 10^6 decay samples")
    p.add_argument("--jobs", type=int, default=1, help="parallel processes over runs")
    p.add_argument("--threads", type=int, default=1, help="threads for path simulation")
    p.add_argument("--no-figures", action="store_true", help="write CSV/JSON only")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mlmc-cdf", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decay", help="per-level mean and variance decay")
    _common(p)
    p.add_argument("--deltas", type=float, nargs="*", help="smoothing widths (0 is always added)")
    p.add_argument("--levels", type=int, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--fit", type=int, nargs=2, metavar=("LO", "HI"), default=(2, 7))

    p = sub.add_parser("adaptive", help="repeated adaptive runs per eps")
    _common(p)

    p = sub.add_parser("gain", help="cost relative to single-level Monte Carlo")
    _common(p)
    p.add_argument("--alpha", type=float, help="weak rate for the baseline (default: decay fit)")
    p.add_argument("--fit", type=int, nargs=2, metavar=("LO", "HI"), default=(2, 7))

    p = sub.add_parser("cdf", help="estimated versus exact distribution function")
    _common(p)
    p.add_argument("--points", type=int, default=1001)

    p = sub.add_parser("theory", help="cost exponents and oracle parameter plan")
    p.add_argument("--alpha1", type=float, default=0.0)
    p.add_argument("--alpha2", type=float, default=1.0)
    p.add_argument("--alpha3", type=float, default=1.0)
    p.add_argument("--beta4", type=float, default=2.0)
    p.add_argument("--beta5", type=float, default=2.0)
    p.add_argument("--r", type=int, default=3)
    p.add_argument("--M", type=int, default=2)
    p.add_argument("--eps", type=_eps_value, nargs="+", default=[2.0**-i for i in range(3, 10)])
    p.add_argument("--out", type=Path)
    return parser


def _config(args, **overrides) -> ExperimentConfig:
    scale = PAPER_SCALE if args.paper_scale else DESK_SCALE
    model = MODELS[args.model].replace(mu=args.mu, sigma=args.sigma, T=args.T,
                                       barrier=args.barrier, s0=args.s0, s1=args.s1)
    fields = dict(
        model=model,
        eps=tuple(args.eps) if args.eps else scale["eps"],
        reps=args.reps if args.reps is not None else scale["reps"],
        seed=args.seed,
        samples=args.samples if args.samples is not None else scale["samples"],
        levels=scale["levels"],
        jobs=args.jobs,
        threads=args.threads,
    )
    fields.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**fields)


def _title(config: ExperimentConfig) -> str:
    p = config.model.params
    return f"{config.model.kind.value}: mu={p.mu:g}, sigma={p.sigma:g}, T={p.T:g}"


def _decay(args) -> int:
    levels = tuple(range(args.levels[0], args.levels[1] + 1)) if args.levels else None
    config = _config(args, levels=levels, fit_levels=tuple(args.fit),
                     deltas=tuple(args.deltas) if args.deltas is not None else None)
    result = bench.decay_study(config)
    write_csv(args.out / "decay.csv", ["level", "delta", "mean", "var"], result.csv_rows())
    if not args.no_figures:
        from .plotting import plot_decay
        plot_decay(result, args.out / "decay.png", _title(config))
    lo, hi = config.fit_levels
    for d in result.deltas:
        print(f"delta={d:g}: mean slope {result.slope(d, 'mean'):.3f}, "
              f"variance slope {result.slope(d, 'var'):.3f} (levels {lo}-{hi})")
    return 0


def _write_reports(out: Path, outcomes) -> None:
    for runs in outcomes:
        for o in runs:
            d = o.report.to_dict()
            d["sup_error"] = o.error if math.isfinite(o.error) else None
            path = out / f"report_{eps_label(o.eps)}_{o.rep}.json"
            path.write_text(json.dumps(d, indent=2, sort_keys=True) + "\n", encoding="ascii")


def _adaptive_outputs(args, config, alpha: float = 1.0):
    outcomes = bench.adaptive_study(config)
    records = bench.gain_records(outcomes, alpha, config.q_norm)
    args.out.mkdir(parents=True, exist_ok=True)
    write_csv(args.out / "adaptive.csv", ["eps", "rmse", "cost", "kn_mean", "inv_delta_mean"],
              [(r.eps, r.rmse, r.cost_ml, r.kn_mean, r.inv_delta_mean) for r in records])
    _write_reports(args.out, outcomes)
    for r in records:
        note = f" ({r.failures} aborted)" if r.failures else ""
        print(f"eps={r.eps:g}: rmse {r.rmse:.4g}, mean cost {r.cost_ml:.4g}, "
              f"mean k {r.kn_mean:.3g}, mean 1/delta {r.inv_delta_mean:.3g}{note}")
    return outcomes, records


def _adaptive(args) -> int:
    config = _config(args)
    _, records = _adaptive_outputs(args, config)
    if not args.no_figures:
        from .plotting import plot_accuracy
        plot_accuracy(records, args.out / "adaptive.png", _title(config))
    return 0


def _gain(args) -> int:
    config = _config(args, fit_levels=tuple(args.fit))
    if args.alpha is not None:
        alpha, source = args.alpha, "given"
    else:
        # weak rate of the indicator functional, as the baseline uses no smoothing
        decay = bench.decay_study(ExperimentConfig(
            model=config.model, eps=config.eps, seed=config.seed, samples=config.samples,
            levels=config.levels, fit_levels=config.fit_levels, deltas=(), threads=config.threads))
        alpha, source = decay.slope(0.0, "mean"), "decay fit, indicator"
    print(f"baseline weak rate alpha = {alpha:.4f} ({source})")
    _, records = _adaptive_outputs(args, config, alpha)
    write_csv(args.out / "gain.csv", ["eps", "cost_sl", "cost_ml", "gain"],
              [(r.eps, r.cost_sl, r.cost_ml, r.gain) for r in records])
    (args.out / "gain_alpha.json").write_text(
        json.dumps({"alpha": alpha, "source": source, "fit_levels": list(config.fit_levels)},
                   indent=2, sort_keys=True) + "\n", encoding="ascii")
    for r in records:
        print(f"eps={r.eps:g}: gain {r.gain:.3g}")
    if not args.no_figures:
        from .plotting import plot_gain
        plot_gain(records, args.out / "gain.png", _title(config))
    return 0


def _cdf(args) -> int:
    config = _config(args, reps=1)
    outcomes = bench.adaptive_study(config)
    model = config.model
    s = np.linspace(model.s0, model.s1, args.points)
    exact = model.cdf(s)
    estimates = {}
    for runs in outcomes:
        o = runs[0]
        if o.report.cdf is None:
            print(f"eps={o.eps:g}: run aborted ({o.report.aborted})", file=sys.stderr)
            continue
        est = o.report.cdf(s)
        estimates[o.eps] = est
        write_csv(args.out / f"cdf_{eps_label(o.eps)}.csv", ["s", "F_true", "F_est"],
                  zip(s, exact, est))
        print(f"eps={o.eps:g}: sup error {o.error:.4g}")
    if not args.no_figures and estimates:
        from .plotting import plot_cdf
        plot_cdf(s, exact, estimates, args.out / "cdf.png", _title(config))
    return 0


def _theory(args) -> int:
    rates = RateAssumptions(args.alpha1, args.alpha2, args.alpha3, args.beta4, args.beta5,
                            args.r, args.M)
    order = complexity_exponents(rates)
    doc = {
        "rates": dict(rates.__dict__),
        "q": rates.q,
        "case": order.case,
        "gamma": order.gamma if math.isfinite(order.gamma) else None,
        "eta": order.eta,
        "neighbors": list(order.neighbors),
        "plans": [plan_parameters(rates, e).to_dict() for e in args.eps],
    }
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    sys.stdout.write(text)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "theory.json").write_text(text, encoding="ascii")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"decay": _decay, "adaptive": _adaptive, "gain": _gain, "cdf": _cdf,
               "theory": _theory}[args.command]
    return handler(args)


if __name__ == "__main__":
    raise SystemExit(main())
