"""Command-line entry point: ``eqlab <subcommand> [options]``."""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import alignment as al
from . import boolean_fourier as bf
from . import gd_engine as gd
from . import msp
from . import reductions as rd
from . import sphere_harmonics as sh
from .specio import SpecError, function_from_obj, load_json, load_function, load_polynomial

SCHEMA = 1


def _digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class Run:
    """Collects the manifest for one invocation."""

    def __init__(self, args, config: dict, inputs=()):
        self.t0 = time.perf_counter()
        self.subcommand = args.command
        self.seed = getattr(args, "seed", None)
        self.config = config
        self.inputs = {str(p): _digest(p) for p in inputs if p}

    def report(self, body: dict, steps: int | None = None) -> dict:
        manifest = {
            "subcommand": self.subcommand,
            "config": self.config,
            "seed": self.seed,
            "version": __version__,
            "inputs": self.inputs,
            "wall_clock_s": round(time.perf_counter() - self.t0, 6),
        }
        if steps is not None:
            manifest["steps"] = steps
        return {"schema": SCHEMA, "manifest": manifest, **body}


def _emit(report: dict, args):
    text = json.dumps(report, indent=2, default=_jsonable)
    if getattr(args, "out", None):
        Path(args.out).write_text(text + "\n")
    else:
        print(text)


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _write_csv(path, rows: list[dict]):
    if not path or not rows:
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


def _function_from_args(args) -> tuple[bf.HypercubeFunction, list]:
    if args.function:
        return load_function(args.function), [args.function]
    if args.builtin:
        if args.d is None:
            raise SpecError("--builtin needs --d")
        obj = {"type": "builtin", "name": args.builtin, "d": args.d}
        if args.set:
            obj["set"] = json.loads(args.set)
        return function_from_obj(obj, "--builtin"), []
    raise SpecError("give --function FILE or --builtin NAME --d D")


def _set_label(mask: int) -> list[int]:
    return [i + 1 for i in bf.mask_to_set(mask)]


# subcommands ---------------------------------------------------------------------

def cmd_fourier(args):
    f, inputs = _function_from_args(args)
    run = Run(args, {"function": args.function, "builtin": args.builtin, "d": f.d}, inputs)
    spec = bf.wht_forward(f)
    support = spec.support(args.tol)
    body = {
        "d": f.d,
        "norm_sq": bf.l2_norm_sq(f),
        "level_weights": bf.level_weights(spec).tolist(),
        "coefficients": [{"set": _set_label(m), "value": float(spec.coeffs[m])} for m in support[: args.max_terms]],
        "support_size": len(support),
    }
    _write_csv(args.emit_plot_data, [{"level": k, "weight": w} for k, w in enumerate(body["level_weights"])])
    return run.report(body)


def cmd_align(args):
    f, inputs = _function_from_args(args)
    T = json.loads(args.fixed) if args.fixed else []
    run = Run(args, {"group": args.group, "d": f.d, "fixed": T, "method": args.method}, inputs)
    spec = bf.wht_forward(f)
    Tmask = sum(1 << (i - 1) for i in T)
    if args.method == "brute_force":
        if args.group == "trivial":  # fixing every coordinate leaves only the identity
            G = al.GroupSpec("perm_fixing", f.d, (1 << f.d) - 1)
        else:
            G = al.GroupSpec(args.group, f.d, Tmask if args.group == "perm_fixing" else 0)
        rep = al.brute_force_alignment(f, G, center=args.center)
    elif args.group == "sign_perm":
        rep = al.sign_perm_alignment(spec, include_constant=args.include_constant)
    elif args.group == "sign":
        rep = al.sign_alignment(spec)
    elif args.group in ("perm", "perm_fixing"):
        rep = al.perm_subgroup_alignment(spec, Tmask if args.group == "perm_fixing" else 0, seed=args.seed or 0)
    else:
        raise SpecError(f"group {args.group!r} needs --method brute_force")
    body = rep.to_dict()
    body["witness"] = _witness_one_indexed(body["witness"])
    return run.report(body)


def _witness_one_indexed(w: dict) -> dict:
    out = dict(w)
    if "set" in w:
        out["set"] = [i + 1 for i in w["set"]]
    if "spectrum" in w:
        out["spectrum"] = [{"set": [i + 1 for i in al.eval_set(k)], "value": v} for k, v in w["spectrum"].items()]
    return out


def cmd_msp(args):
    sets = json.loads(args.support)
    coeffs = json.loads(args.coeffs) if args.coeffs else None
    run = Run(args, {"support": sets, "leap": args.leap, "coeffs": coeffs})
    sup = msp.FourierSupport.from_lists(sets, P=args.P, coeffs=coeffs)
    rep = msp.is_l_msp(sup, args.leap)
    body = rep.to_dict()
    if args.d is not None and not rep.satisfies:
        nb = msp.necessity_bound(sup, args.d, args.leap, args.eta, args.R, args.tau, args.k)
        body["necessity_bound"] = {"bound": nb.bound, "eps0": nb.eps0, "C_h": nb.C_h, "c_h": nb.c_h,
                                   "alignment_bound": nb.alignment_bound, **nb.terms}
    return run.report(body)


def _net_from_config(cfg: dict, d: int, rng) -> gd.TwoLayerNet:
    net = cfg.get("net", {})
    w = net.get("w_init", {"kind": "gaussian", "scale": 1.0})
    a = net.get("a_init", {"kind": "zero"})
    return gd.init_net(d, int(net.get("m", 16)), rng, gd.InitSpec(w["kind"], w.get("scale", 1.0)),
                       gd.InitSpec(a["kind"], a.get("scale", 1.0)), net.get("activation", "tanh"),
                       int(net.get("degree", 1)))


def cmd_train(args):
    cfg = load_json(args.config)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    args.seed = seed
    f = function_from_obj(cfg["target"], f"{args.config}: target")
    t = dict(cfg.get("train", {}))
    for key in ("eta", "tau", "R", "k"):  # flags override the config file
        if getattr(args, key) is not None:
            t[key] = getattr(args, key)
    cfg = {**cfg, "train": t, "seed": seed}
    tc = gd.TrainConfig(float(t.get("eta", 0.1)), float(t.get("tau", 0.0)), float(t.get("R", 1.0)),
                        int(t.get("k", 10)), seed, t.get("clip_mode", "network"), int(t.get("record_every", 1)))
    run = Run(args, cfg, [args.config])
    net = _net_from_config(cfg, f.d, np.random.default_rng([seed, 1]))
    labels = gd.quantize_labels(f.values, cfg.get("label_bits"))
    data = gd.hypercube_data(bf.HypercubeFunction(f.d, labels), float(cfg.get("gamma", 0.0)))
    traj = gd.gd_run(net, data, tc)
    _write_csv(args.emit_plot_data, [{"step": s, "loss": l} for s, l in zip(traj.steps, traj.losses)])
    return run.report({"initial_loss": traj.losses[0], "final_loss": traj.losses[-1],
                       "trajectory": [{"step": s, "loss": l} for s, l in zip(traj.steps, traj.losses)]}, steps=tc.k)


def cmd_weaklearn(args):
    seed = args.seed if args.seed is not None else 0
    args.seed = seed
    if args.polynomial:
        p = load_polynomial(args.polynomial)
        run = Run(args, {"polynomial": args.polynomial, "l": args.l, "m": args.m, "eta": args.eta}, [args.polynomial])
        rep = gd.weak_learn_sphere(p, args.l, args.m, args.eta, seed, args.samples)
        rep["rotation_alignment"] = sh.rotation_alignment(p)[0]
    else:
        f, inputs = _function_from_args(args)
        run = Run(args, {"d": f.d, "s": args.s, "m": args.m, "eta": args.eta, "tau": args.tau}, inputs)
        rep = gd.weak_learn_boolean(f, args.s, args.m, args.eta, args.tau, seed)
    return run.report(rep, steps=1)


def cmd_reduce(args):
    chain = args.chain.split(",")
    seed = args.seed if args.seed is not None else int(np.random.SeedSequence().entropy % 2**31)
    args.seed = seed
    run = Run(args, {"chain": chain, "d": args.d, "rho": args.rho, "gamma": args.gamma, "trials": args.trials,
                     "n": args.n, "T": args.T, "n_A": args.n_A})
    d = args.d
    key = tuple(chain)

    def trial(i):
        rng = rd.trial_rng(seed, i)
        rng_alg = rd.trial_rng(seed, i, 1)
        if key == ("lpgn", "sfsm8"):
            inst = rd.gen_lpgn(d, args.n, args.gamma, rng)
            orc = rd.CandidateOracle("mod8", [rd.signs_from_subset(d, inst.S)], threshold=1.0,
                                     error_rate=args.oracle_error)
            ans = rd.reduce_lpgn_to_sfsm8(inst.q, inst.X, inst.y, orc, d // 2, rng_alg)
            return {"trial": i, "answer": ans, "truth": inst.answer, "success": int(ans == inst.answer)}
        if key == ("promise", "lpgn"):
            cfg = rd.kernel_config_for(args.gamma, args.n)
            inst = rd.gen_promise_lpn(d, args.n, cfg.rho, rng)
            orc = rd.CandidateOracle("parity", [inst.S], promise_size=d // 2, error_rate=args.oracle_error)
            ans = rd.reduce_promise_lpn_to_lpgn(inst.q, inst.X, inst.y, orc, cfg, rng_alg)
            return {"trial": i, "answer": ans, "truth": inst.answer, "success": int(ans == inst.answer)}
        if key == ("lpn", "promise"):
            n = rd.lpn_to_promise_samples_needed(d, args.T, args.n_A)
            inst = rd.gen_lpn(d, n, args.rho, rng)
            orc = rd.CandidateOracle("parity", rd.padded_candidates(d, inst.S), threshold=args.rho / 2,
                                     promise_size=d, error_rate=args.oracle_error)
            ans, r_hat, _ = rd.reduce_lpn_to_promise_lpn(inst.q, inst.X, inst.y, orc, args.n_A, args.T, rng_alg)
            r_star = d - bin(inst.S).count("1")
            return {"trial": i, "answer": ans, "truth": inst.answer, "r_hat": r_hat, "r_star": r_star,
                    "success": int(ans == inst.answer)}
        if key == ("lpn", "promise", "lpgn", "sfsm8"):
            pc = rd.PipelineConfig(args.n_A, args.T, args.gamma)
            n = rd.lpn_to_promise_samples_needed(d, pc.T, pc.n_A)
            inst = rd.gen_lpn(d, n, rd.pipeline_rho(pc), rng)
            cands = [rd.signs_from_subset(2 * d, S) for S in rd.padded_candidates(d, inst.S)]
            term = rd.CandidateOracle("mod8", cands, threshold=1.0, error_rate=args.oracle_error)
            ans, r_hat = rd.pipeline_lpn_to_sfsm8(inst, term, pc, rng_alg)
            return {"trial": i, "answer": ans, "truth": inst.answer, "r_hat": r_hat,
                    "success": int(ans == inst.answer)}
        raise SpecError(f"unsupported chain {args.chain!r}; use lpgn,sfsm8 | promise,lpgn | lpn,promise | "
                        "lpn,promise,lpgn,sfsm8")

    rows = rd.run_trials(trial, args.trials, args.jobs)
    _write_csv(args.csv, rows)
    _write_csv(args.emit_plot_data, rows)
    wins = sum(r["success"] for r in rows)
    body = {"summary": rd.binomial_summary(wins, args.trials)}
    if key == ("lpn", "promise"):
        body["r_hat_recovered"] = rd.binomial_summary(sum(r["r_hat"] == r["r_star"] for r in rows), args.trials)
    return run.report(body)


def cmd_verify(args):
    from . import verify

    run = Run(args, {"suite": args.suite})
    only = [int(x) for x in args.only.split(",")] if args.only else None
    results = verify.run_suite(quick=args.suite == "quick", only=only)
    for r in results:
        print(r.line(), file=sys.stderr)
    body = {"passed": all(r.passed for r in results),
            "checks": [{"number": r.number, "name": r.name, "passed": r.passed, "seconds": r.seconds,
                        "detail": r.detail} for r in results]}
    return run.report(body)


# parser ---------------------------------------------------------------------------

def _add_function_args(p):
    p.add_argument("--function", help="JSON function spec file")
    p.add_argument("--builtin", choices=bf.BUILTINS[:-1], help="builtin target name")
    p.add_argument("--d", type=int, help="dimension for --builtin")
    p.add_argument("--set", help="1-indexed subset for the parity builtin, e.g. '[1,2]'")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="eqlab", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--out", help="write the JSON report here instead of stdout")
        p.add_argument("--emit-plot-data", dest="emit_plot_data", help="CSV file for external plotting")

    p = sub.add_parser("fourier", help="Walsh-Hadamard spectrum of a function")
    _add_function_args(p)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--max-terms", dest="max_terms", type=int, default=64)
    common(p)

    p = sub.add_parser("align", help="G-alignment of a function")
    _add_function_args(p)
    p.add_argument("--group", choices=("sign_perm", "sign", "perm", "perm_fixing", "trivial"), default="sign_perm")
    p.add_argument("--fixed", help="1-indexed coordinates fixed by perm_fixing, e.g. '[1,2]'")
    p.add_argument("--method", choices=("closed_form", "brute_force"), default="closed_form")
    p.add_argument("--center", action="store_true", help="brute force on f - E f")
    p.add_argument("--include-constant", dest="include_constant", action="store_true")
    common(p)

    p = sub.add_parser("msp", help="merged-staircase check and lower bound")
    p.add_argument("--support", required=True, help="JSON list of 1-indexed sets")
    p.add_argument("--leap", type=int, default=1)
    p.add_argument("--coeffs", help="JSON list of coefficients, one per set")
    p.add_argument("--P", type=int)
    p.add_argument("--d", type=int, help="ambient dimension; enables the necessity bound")
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--R", type=float, default=1.0)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--k", type=int, default=0)
    common(p)

    p = sub.add_parser("train", help="noisy clipped GD from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--eta", type=float, help="overrides train.eta")
    p.add_argument("--tau", type=float, help="overrides train.tau")
    p.add_argument("--R", type=float, help="overrides train.R")
    p.add_argument("--k", type=int, help="overrides train.k")
    common(p)

    p = sub.add_parser("weaklearn", help="one-step weak learning constructions")
    _add_function_args(p)
    p.add_argument("--polynomial", help="JSON sphere polynomial (uses the sphere construction)")
    p.add_argument("--s", type=int, default=2)
    p.add_argument("--l", type=int, default=1)
    p.add_argument("--m", type=int, default=1000)
    p.add_argument("--eta", type=float, default=1e-4)
    p.add_argument("--tau", type=float, default=0.0)
    p.add_argument("--samples", type=int, default=20000)
    common(p)

    p = sub.add_parser("reduce", help="reduction chain trials with test oracles")
    p.add_argument("--chain", default="lpgn,sfsm8")
    p.add_argument("--d", type=int, default=10)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--rho", type=float, default=0.8)
    p.add_argument("--gamma", type=float, default=0.2)
    p.add_argument("--T", type=int, default=100)
    p.add_argument("--n-A", dest="n_A", type=int, default=40)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--oracle-error", dest="oracle_error", type=float, default=0.0)
    p.add_argument("--csv", help="per-trial CSV log")
    common(p)

    p = sub.add_parser("verify", help="run the built-in check suite")
    p.add_argument("--suite", choices=("quick", "full"), default="quick")
    p.add_argument("--only", help="comma-separated check numbers")
    common(p)
    return ap


COMMANDS = {"fourier": cmd_fourier, "align": cmd_align, "msp": cmd_msp, "train": cmd_train,
            "weaklearn": cmd_weaklearn, "reduce": cmd_reduce, "verify": cmd_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        report = COMMANDS[args.command](args)
    except (SpecError, bf.DimensionError, ValueError) as e:
        print(f"eqlab {args.command}: error: {e}", file=sys.stderr)
        return 2
    _emit(report, args)
    if args.command == "verify" and not report["passed"]:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
