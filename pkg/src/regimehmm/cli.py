"""Command-line front end.

Subcommands::

    regimehmm returns   PRICES [--stride K] [--out FILE]
    regimehmm calibrate RETURNS [--states R] [--mixtures K] [--seed S]
                        [--max-iters N] [--tol X] [--restarts N] [--out-dir DIR]
    regimehmm decode    RETURNS --model MODEL [--context RETURNS] [--initial model|stationary]
    regimehmm simulate  --model MODEL --length T [--seed S]
    regimehmm compare   RETURNS [--seed S] [--max-iters N] [--tol X]

Exit codes: 0 success, 2 input error, 3 numerical/estimation error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .baumwelch import FitConfig, StarvedStateError, fit, heuristic_init
from .core import (
    EstimationError,
    GmHmm,
    ModelError,
    ObservationSeq,
    check_model,
    load_model,
    model_to_json,
)
from .data import DataError, load_csv, load_returns_csv, to_log_returns, write_returns_csv
from .density import gm_moments
from .hamilton import HamiltonFitConfig, HamiltonTheta, hamilton_fit, hamilton_loglik, invariant_distribution
from .inference import forward, viterbi
from .sim import simulate

logger = logging.getLogger("regimehmm")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3


# --- reporting --------------------------------------------------------------

def _pct(x: float) -> str:
    return f"{100.0 * x:8.1f}"


def format_model(m: GmHmm, title: str = "Calibrated model") -> str:
    """Calibration tables: probabilities, then per-component means, stds (%/yr) and weights."""
    R, K = m.R, m.K
    lines = [title, "", "Initial state probabilities (pi)", "  state  probability"]
    lines += [f"  {i + 1:5d}  {p:.6g}" for i, p in enumerate(m.pi.pi)]
    lines += ["", "Transition matrix (A)"]
    lines += ["  " + "  ".join(f"{a:6.3f}" for a in row) for row in m.A]
    moments = [gm_moments(g) for g in m.emissions]
    header = "  component " + "".join(f"{'state ' + str(j + 1):>10}" for j in range(R))
    for d in range(m.n):
        tag = "" if m.n == 1 else f" [asset {d + 1}]"
        lines += ["", f"Mixture means (%/yr){tag}", header]
        for k in range(K):
            lines.append(f"  N{k + 1:<9d}" + "".join(f"{_pct(m.means[j, k, d]):>10}" for j in range(R)))
        lines.append("  overall   " + "".join(f"{_pct(mu[d]):>10}" for mu, _ in moments))
        lines += ["", f"Mixture standard deviations (%/yr){tag}", header]
        for k in range(K):
            lines.append(
                f"  N{k + 1:<9d}" + "".join(f"{_pct(np.sqrt(m.covs[j, k, d, d])):>10}" for j in range(R))
            )
        lines.append("  overall   " + "".join(f"{_pct(np.sqrt(c[d, d])):>10}" for _, c in moments))
    lines += ["", "Mixture weights (c)", header]
    for k in range(K):
        lines.append(f"  N{k + 1:<9d}" + "".join(f"{m.weights[j, k]:10.3f}" for j in range(R)))
    return "\n".join(lines)


def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_manifest(out_dir: Path, command: str, argv: list[str], inputs: dict, config: dict,
                    outputs: list[Path], started: float, seed=None, model_path=None) -> Path:
    doc = {
        "command": command,
        "argv": argv,
        "tool_version": __version__,
        "inputs": {k: {"path": str(v), "sha256": _sha256(v)} for k, v in inputs.items() if v is not None},
        "config": config,
        "seed": seed,
        "model_path": None if model_path is None else str(model_path),
        "outputs": [str(p) for p in outputs],
        "started_at": datetime.fromtimestamp(started, timezone.utc).isoformat(),
        "wall_clock_seconds": round(time.time() - started, 6),
    }
    path = out_dir / f"{command}_manifest.json"
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return path


def _out_dir(args) -> Path:
    d = Path(args.out_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


# --- commands ---------------------------------------------------------------

def cmd_returns(args, argv) -> int:
    prices = load_csv(args.prices)
    o = to_log_returns(prices, args.stride)
    if args.out:
        write_returns_csv(o, args.out)
        print(f"wrote {o.T} returns to {args.out}")
    else:
        write_returns_csv(o, "/dev/stdout")
    return EXIT_OK


def cmd_calibrate(args, argv) -> int:
    started = time.time()
    o = load_returns_csv(args.returns)
    if args.states < 1 or args.mixtures < 1:
        raise DataError("--states and --mixtures must be >= 1")
    cfg = FitConfig(max_iters=args.max_iters, rel_tol=args.tol, seed=args.seed, restarts=args.restarts)
    init = heuristic_init(o, args.states, args.mixtures, cfg.variance_floor_scale)
    report = fit(o, init, cfg)
    check_model(report.model)

    out = _out_dir(args)
    model_path = out / "model.json"
    model_path.write_text(model_to_json(report.model), encoding="utf-8")
    trace_path = out / "fit_report.json"
    trace_path.write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    _write_manifest(out, "calibrate", argv, {"returns": Path(args.returns)},
                    {"states": args.states, "mixtures": args.mixtures, "max_iters": cfg.max_iters,
                     "tol": cfg.rel_tol, "restarts": cfg.restarts,
                     "variance_floor_scale": cfg.variance_floor_scale},
                    [model_path, trace_path], started, seed=args.seed, model_path=model_path)

    print(format_model(report.model))
    print()
    status = "converged" if report.converged else "stopped at max iterations"
    print(f"log-likelihood {report.log_likelihood:.6f} after {report.iterations} iterations ({status})")
    print(f"model written to {model_path}")
    return EXIT_OK


def decode_sequence(m: GmHmm, o: ObservationSeq, context: ObservationSeq | None = None,
                    initial: str = "model") -> list[int]:
    """1-based Viterbi regimes for ``o``.

    With ``context`` the path is decoded over ``context`` followed by ``o``
    and only the part covering ``o`` is returned, so ``o`` is read as a
    continuation of the sample the model was calibrated on. ``initial``
    chooses the starting distribution: the model's own ``pi`` or the chain's
    invariant distribution.
    """
    if initial == "stationary":
        m = m.with_pi(invariant_distribution(m.trans))
    elif initial != "model":
        raise ValueError(f"unknown initial distribution {initial!r}")
    full = o if context is None else context.concat(o)
    path = viterbi(m, full).regimes
    return path[len(path) - o.T:]


def cmd_decode(args, argv) -> int:
    started = time.time()
    m = check_model(load_model(args.model))
    o = load_returns_csv(args.returns)
    context = load_returns_csv(args.context) if args.context else None
    regimes = decode_sequence(m, o, context, args.initial)
    labels = o.labels or tuple(str(t + 1) for t in range(o.T))

    out = _out_dir(args)
    path = out / "decode.csv"
    rows = ["label,regime,log_return"]
    rows += [f"{lab},{g},{repr(float(x))}" for lab, g, x in zip(labels, regimes, o.obs[:, 0])]
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    _write_manifest(out, "decode", argv,
                    {"returns": Path(args.returns), "model": Path(args.model),
                     "context": Path(args.context) if args.context else None},
                    {"initial": args.initial}, [path], started, model_path=args.model)

    print(f"{'label':>8}  regime  return (%)")
    for lab, g, x in zip(labels, regimes, o.obs[:, 0]):
        print(f"{lab:>8}  {g:6d}  {_pct(x)}")
    return EXIT_OK


def cmd_simulate(args, argv) -> int:
    started = time.time()
    m = check_model(load_model(args.model))
    sim = simulate(m, args.length, args.seed)
    out = _out_dir(args)
    ret_path = out / "simulated_returns.csv"
    write_returns_csv(sim.obs, ret_path)
    st_path = out / "simulated_states.csv"
    rows = ["date,regime"] + [f"{lab},{g}" for lab, g in zip(sim.obs.labels, sim.states.tolist())]
    st_path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    _write_manifest(out, "simulate", argv, {"model": Path(args.model)}, {"length": args.length},
                    [ret_path, st_path], started, seed=args.seed, model_path=args.model)
    occ = np.bincount(sim.states.zero_based, minlength=m.R) / args.length
    print(f"simulated {args.length} steps; regime occupancy " + ", ".join(f"{p:.3f}" for p in occ))
    return EXIT_OK


def compare(o: ObservationSeq, cfg: FitConfig, hcfg: HamiltonFitConfig | None = None) -> dict:
    """Fit the two-regime single-Gaussian model by Baum-Welch and by the Hamilton filter."""
    if o.n != 1:
        raise DataError("compare needs univariate returns")
    init = heuristic_init(o, 2, 1, cfg.variance_floor_scale)
    bw = fit(o, init, cfg)
    bw_model = bw.model
    bw_theta = HamiltonTheta.from_model(bw_model)
    bw_eta = invariant_distribution(bw_model.trans)

    stationary = bw_model.with_pi(bw_eta)
    eq_forward = forward(stationary, o).log_likelihood
    eq_hamilton = hamilton_loglik(bw_theta, o)

    h_init = HamiltonTheta.from_model(init)
    hf = hamilton_fit(o, h_init, hcfg or HamiltonFitConfig(seed=cfg.seed))
    h_eta = invariant_distribution(hf.theta.to_model().trans)
    return {
        "T": o.T,
        "baum_welch": {
            "log_likelihood": bw.log_likelihood,
            "iterations": bw.iterations,
            "converged": bw.converged,
            "theta": bw_theta.to_dict(),
            "pi": bw_model.pi.pi.tolist(),
            "eta": bw_eta.tolist(),
        },
        "hamilton": {
            "log_likelihood": hf.log_likelihood,
            "function_evaluations": hf.n_evals,
            "converged": hf.converged,
            "theta": hf.theta.to_dict(),
            "eta": h_eta.tolist(),
        },
        "equivalence": {
            "forward_stationary_loglik": eq_forward,
            "hamilton_loglik": eq_hamilton,
            "abs_difference": abs(eq_forward - eq_hamilton),
        },
    }


def format_compare(rep: dict) -> str:
    bw, hm = rep["baum_welch"], rep["hamilton"]
    rows = [
        ("log-likelihood", f"{bw['log_likelihood']:.6f}", f"{hm['log_likelihood']:.6f}"),
        ("iterations / evaluations", str(bw["iterations"]), str(hm["function_evaluations"])),
        ("converged", str(bw["converged"]), str(hm["converged"])),
    ]
    for key, scale, unit in [("u1", 100, "%"), ("u2", 100, "%"), ("phi1", None, ""), ("phi2", None, ""),
                             ("a12", 1, ""), ("a21", 1, "")]:
        if scale is None:
            bv, hv = np.sqrt(bw["theta"][key]) * 100, np.sqrt(hm["theta"][key]) * 100
            name = f"sqrt({key}) (%/yr)"
        else:
            bv, hv = bw["theta"][key] * scale, hm["theta"][key] * scale
            name = f"{key}{' (%/yr)' if unit else ''}"
        rows.append((name, f"{bv:.4f}", f"{hv:.4f}"))
    rows.append(("eta", " ".join(f"{x:.4f}" for x in bw["eta"]), " ".join(f"{x:.4f}" for x in hm["eta"])))
    rows.append(("pi (Baum-Welch only)", " ".join(f"{x:.4g}" for x in bw["pi"]), "-"))
    w = max(len(r[0]) for r in rows)
    out = [f"{'':<{w}}  {'Baum-Welch':>18}  {'Hamilton':>18}"]
    out += [f"{a:<{w}}  {b:>18}  {c:>18}" for a, b, c in rows]
    eq = rep["equivalence"]
    out += ["", "Hamilton filter at the Baum-Welch parameters (pi = eta): "
            f"{eq['hamilton_loglik']:.10f} vs forward {eq['forward_stationary_loglik']:.10f}"]
    return "\n".join(out)


def cmd_compare(args, argv) -> int:
    started = time.time()
    o = load_returns_csv(args.returns)
    cfg = FitConfig(max_iters=args.max_iters, rel_tol=args.tol, seed=args.seed)
    rep = compare(o, cfg)
    out = _out_dir(args)
    path = out / "compare.json"
    path.write_text(json.dumps(rep, indent=2) + "\n", encoding="utf-8")
    _write_manifest(out, "compare", argv, {"returns": Path(args.returns)},
                    {"max_iters": cfg.max_iters, "tol": cfg.rel_tol}, [path], started, seed=args.seed)
    print(format_compare(rep))
    return EXIT_OK


# --- entry point ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="regimehmm", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def fit_flags(sp):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--max-iters", type=int, default=500)
        sp.add_argument("--tol", type=float, default=1e-7, help="relative log-likelihood tolerance")
        sp.add_argument("--out-dir", default=".")

    sp = sub.add_parser("returns", help="convert a date,price file into log returns")
    sp.add_argument("prices")
    sp.add_argument("--stride", type=int, default=1, help="rows per non-overlapping return window")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_returns)

    sp = sub.add_parser("calibrate", help="fit a Gaussian-mixture HMM by Baum-Welch")
    sp.add_argument("returns")
    sp.add_argument("--states", type=int, default=2)
    sp.add_argument("--mixtures", type=int, default=2)
    sp.add_argument("--restarts", type=int, default=0)
    fit_flags(sp)
    sp.set_defaults(func=cmd_calibrate)

    sp = sub.add_parser("decode", help="Viterbi regime sequence under a saved model")
    sp.add_argument("returns")
    sp.add_argument("--model", required=True)
    sp.add_argument("--context", help="returns preceding RETURNS; decoded jointly but not reported")
    sp.add_argument("--initial", choices=["model", "stationary"], default="model")
    sp.add_argument("--out-dir", default=".")
    sp.set_defaults(func=cmd_decode)

    sp = sub.add_parser("simulate", help="simulate regimes and returns from a saved model")
    sp.add_argument("--model", required=True)
    sp.add_argument("--length", "-T", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out-dir", default=".")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("compare", help="Baum-Welch vs Hamilton filter on a 2-regime Gaussian model")
    sp.add_argument("returns")
    fit_flags(sp)
    sp.set_defaults(func=cmd_compare)
    return p


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, argv)
    except StarvedStateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print("hint: try --restarts, a different --seed, or fewer --states/--mixtures", file=sys.stderr)
        return EXIT_NUMERIC
    except EstimationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, ModelError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
