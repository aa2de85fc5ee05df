"""Command-line front end: ``graphon-ldp <command> [options]``.

Exit codes: 0 success, 1 input error, 2 a requested check failed.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import downward, mc, upward
from .graphon import BlockGraphon, ReferenceGraphon, block_average
from .io import (
    dumps,
    fmt,
    load_graphon,
    load_json,
    parse_reference,
    read_adjacency_csv,
    read_edge_list,
    write_csv,
    write_json,
)
from .spectral import empirical_graphon, laplacian_spectrum
from .upward import c_r

EXIT_OK, EXIT_INPUT, EXIT_CHECK = 0, 1, 2


class InputError(Exception):
    pass


class CheckFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def parse_beta_grid(text: str) -> list[float]:
    """``start:stop:count`` (inclusive, evenly spaced) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise InputError("beta grid must be start:stop:count")
        a, b, k = float(parts[0]), float(parts[1]), int(parts[2])
        if k < 1:
            raise InputError("beta grid count must be positive")
        return [a] if k == 1 else [float(v) for v in np.linspace(a, b, k)]
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise InputError(f"bad beta list: {exc}") from None


def _reference(args) -> ReferenceGraphon:
    return parse_reference(args.reference, args.constant, args.rank1)


def _add_reference(p):
    g = p.add_argument_group("reference graphon (exactly one)")
    g.add_argument("--reference", help="JSON file or inline JSON describing the reference graphon")
    g.add_argument("--constant", type=float, metavar="P", help="constant reference r = P")
    g.add_argument("--rank1", metavar="C0,C1,...",
                   help="rank-1 reference f(x) f(y), f with ascending polynomial coefficients")


def _out(args, name) -> Path:
    d = Path(args.output_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d / name


def _log(args, message: str) -> None:
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    with open(_out(args, "run.log"), "a") as fh:
        fh.write(f"{stamp} {args.command} {message}\n")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_spectrum(args) -> int:
    sources = [x is not None for x in (args.edges, args.adjacency, args.graphon)]
    if sum(sources) != 1:
        raise InputError("give exactly one of --edges, --adjacency, --graphon")
    if args.edges is not None:
        a = read_edge_list(args.edges, args.vertices)
        g = empirical_graphon(a) if a.shape[0] else BlockGraphon.zero(1)
    elif args.adjacency is not None:
        a = read_adjacency_csv(args.adjacency)
        g = empirical_graphon(a) if a.shape[0] else BlockGraphon.zero(1)
    else:
        obj = load_graphon(args.graphon)
        g = obj if isinstance(obj, BlockGraphon) else block_average(obj, args.blocks)
    s = laplacian_spectrum(g)
    write_json(_out(args, "spectrum.json"), s.to_dict())
    rows = [("reduced", v) for v in s.reduced_eigs] + [("degree", v) for v in s.degree_values]
    write_csv(_out(args, "eigenvalues.csv"), ["kind", "value"], rows)
    print(f"laplacian_norm {fmt(s.laplacian_norm)}")
    return EXIT_OK


def cmd_rate_up(args) -> int:
    r = _reference(args)
    betas = parse_beta_grid(args.beta)
    c, _ = c_r(r)
    low = [b for b in betas if b < c - 1e-12]
    if low:
        raise InputError(f"beta {low[0]!r} is below C_r = {c!r}; the upward rate needs beta >= C_r")
    curve = upward.psi_hat_curve(r, betas, n_grid=args.x_grid)
    (_out(args, "rate_up.csv")).write_text(curve.to_csv())
    consts = dict(curve.constants)
    consts["scaling_ratios"] = [[p.beta, p.scaling_ratio] for p in curve.points if p.scaling_ratio is not None]
    write_json(_out(args, "constants.json"), consts)
    for p in curve.points:
        print(f"beta {fmt(p.beta)} psi_hat {fmt(p.value)}")
    return EXIT_OK


def cmd_rate_down(args) -> int:
    r = _reference(args)
    betas = parse_beta_grid(args.beta)
    c, _ = c_r(r)
    bad = [b for b in betas if b < 0 or b > c + 1e-12]
    if bad:
        raise InputError(f"beta {bad[0]!r} outside [0, C_r] with C_r = {c!r}")
    rows = []
    minimisers = {}
    for b in betas:
        sol = downward.solve_psi(r, b, n_blocks=args.blocks, restarts=args.restarts, seed=args.seed)
        if sol.method == "analytic":
            lo = up = sol.value
            feas = True
        else:
            lo, up, feas = sol.lower_bound, sol.upper_bound, sol.upper_feasible
        scal = downward.scaling_integral(r, b)
        rows.append([b, lo, sol.value, up, sol.feasibility_gap, sol.iterations, scal, feas])
        minimisers[fmt(b)] = sol.minimiser.to_dict()
        if not feas:
            print(f"beta {fmt(b)}: explicit candidate infeasible", file=sys.stderr)
    write_csv(_out(args, "rate_down.csv"),
              ["beta", "psi_lower", "psi_solver", "psi_upper", "feasibility_gap", "iters",
               "scaling_integral", "upper_feasible"], rows)
    if args.save_minimisers:
        write_json(_out(args, "minimisers.json"), minimisers)
    for row in rows:
        print(f"beta {fmt(row[0])} psi {fmt(row[2])}")
    return EXIT_OK


def cmd_sample(args) -> int:
    if args.graphon is not None:
        obj = load_graphon(args.graphon)
    else:
        obj = _reference(args)
    if args.n < 1:
        raise InputError("--n must be positive")
    s = mc.sample_graph(mc.finite_reference(obj, args.n), args.n, args.seed)
    iu, ju = np.triu_indices(args.n, k=1)
    hit = s.adjacency[iu, ju] == 1
    lines = [f"{u} {v}" for u, v in zip(iu[hit], ju[hit])]
    _out(args, "edges.txt").write_text("\n".join(lines) + ("\n" if lines else ""))
    deg = mc.degree_stats(s)
    write_csv(_out(args, "degrees.csv"), ["vertex", "degree_over_n"], list(enumerate(deg.degrees)))
    print(f"edges {len(lines)} max_degree_over_n {fmt(deg.max_degree)}")
    return EXIT_OK


def _mc_reference(cfg):
    ref = cfg.get("reference")
    if ref is None:
        raise InputError("experiment needs a 'reference'")
    return load_graphon(ref if isinstance(ref, dict) else json.dumps(ref) if not isinstance(ref, str) else ref)


def cmd_mc(args) -> int:
    cfg = load_json(args.config)
    if not isinstance(cfg, dict):
        raise InputError("experiment config must be a JSON object")
    for key in ("n", "samples"):
        if key not in cfg:
            raise InputError(f"experiment config is missing {key!r}")
    n, samples = int(cfg["n"]), int(cfg["samples"])
    if samples < 1:
        raise InputError("'samples' must be at least 1")
    if n < 1:
        raise InputError("'n' must be at least 1")
    seed = int(cfg.get("seed", args.seed))
    beta = float(cfg.get("beta", 0.0))
    ref = _mc_reference(cfg)
    method = cfg.get("method", "direct")
    checks = cfg.get("checks", [])
    results = []
    failed = []

    if "event" in cfg or method == "tilted":
        if method == "tilted":
            est = mc.tail_prob_tilted(ref, n, beta, samples, seed)
        else:
            est = mc.tail_prob_direct(ref, n, cfg["event"], beta, samples, seed)
        results.append({"kind": "tail", "method": est.method, "n": n, "beta": beta, **est.to_dict()})

    for check in checks:
        if check == "weyl":
            rn = mc.finite_reference(ref, n)
            oks = [mc.weyl_check(mc.sample_graph(rn, n, mc.derive_seed(seed, k)))[3] for k in range(samples)]
            res = {"kind": "weyl", "passed": int(sum(oks)), "samples": samples, "ok": all(oks)}
        elif check == "hoeffding":
            res = {"kind": "hoeffding", **mc.hoeffding_check(ref, n, float(cfg.get("t", 0.1)), samples, seed)}
        elif check == "fkg":
            res = {"kind": "fkg", **mc.fkg_check(ref, n, beta, samples, seed)}
        else:
            raise InputError(f"unknown check {check!r}; expected weyl, hoeffding or fkg")
        results.append(res)
        if not res["ok"]:
            failed.append(check)

    with open(_out(args, "results.jsonl"), "a") as fh:
        for res in results:
            fh.write(dumps(res) + "\n")
    rows = [[n, beta, r["method"], r["log_prob"], r["rate_estimate"], r["ci_low"], r["ci_high"], r["ess"]]
            for r in results if r["kind"] == "tail"]
    write_csv(_out(args, "summary.csv"),
              ["n", "beta", "method", "log_prob", "rate_estimate", "ci_low", "ci_high", "ess"], rows)
    for res in results:
        print(dumps(res))
    if failed:
        raise CheckFailure("failed checks: " + ", ".join(failed))
    return EXIT_OK


def cmd_scaling(args) -> int:
    r = _reference(args)
    betas = parse_beta_grid(args.beta)
    c, _ = c_r(r)
    rows = []
    k_hat = upward.curvature(r)[0] if r.continuous else math.nan
    for b in betas:
        if b <= c:
            s = downward.scaling_integral(r, b)
            lo = downward.lower_bound(r, b)
            up, feas, _ = downward.upper_bound(r, b, args.blocks)
            rows.append(["down", b, s, lo, up, feas, lo / s if s > 0 else math.nan,
                         up / s if s > 0 else math.nan])
        else:
            val, _ = upward.psi_hat(r, b)
            s = (b - c) ** 2
            rows.append(["up", b, s, val, val, True, val / s, k_hat])
    write_csv(_out(args, "scaling.csv"),
              ["side", "beta", "scale", "lower", "upper", "upper_feasible", "ratio_lower", "ratio_upper"],
              rows)
    for row in rows:
        print(",".join(fmt(v) if not isinstance(v, str) else v for v in row))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--output-dir", default=argparse.SUPPRESS,
                        help="directory for output files (default: current)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="base random seed (default 0)")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                        help="worker threads; capped by GRAPHON_LDP_THREADS when set")
    p = _Parser(prog="graphon-ldp", description=__doc__.splitlines()[0], parents=[common])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _sub_add = sub.add_parser

    def add_parser(name, **kw):
        return _sub_add(name, parents=[common], **kw)

    sub.add_parser = add_parser

    s = sub.add_parser("spectrum", help="Laplacian spectrum of a graph or graphon")
    s.add_argument("--edges", help="edge list file, one 'u v' pair per line, 0-indexed")
    s.add_argument("--vertices", type=int, default=None, help="vertex count for --edges (default: max index + 1)")
    s.add_argument("--adjacency", help="dense 0/1 adjacency CSV")
    s.add_argument("--graphon", help="graphon JSON (block or reference)")
    s.add_argument("--blocks", type=int, default=64, help="block count for reference graphons (default 64)")
    s.set_defaults(func=cmd_spectrum)

    s = sub.add_parser("rate-up", help="upward rate curve and constants")
    _add_reference(s)
    s.add_argument("--beta", required=True, help="beta grid: start:stop:count or comma list")
    s.add_argument("--x-grid", type=int, default=upward.DEFAULT_X_GRID, help="x scan points (default 257)")
    s.set_defaults(func=cmd_rate_up)

    s = sub.add_parser("rate-down", help="downward rate bounds and solver")
    _add_reference(s)
    s.add_argument("--beta", required=True, help="beta grid: start:stop:count or comma list")
    s.add_argument("--blocks", type=int, default=32, help="solver block count (default 32)")
    s.add_argument("--restarts", type=int, default=4, help="solver starts (default 4)")
    s.add_argument("--save-minimisers", action="store_true", help="write minimisers.json")
    s.set_defaults(func=cmd_rate_down)

    s = sub.add_parser("sample", help="draw one random graph")
    _add_reference(s)
    s.add_argument("--graphon", help="block graphon JSON instead of a reference")
    s.add_argument("--n", type=int, required=True, help="vertex count")
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("mc", help="Monte Carlo experiment from a JSON config")
    s.add_argument("config", help="experiment JSON file or inline JSON")
    s.set_defaults(func=cmd_mc)

    s = sub.add_parser("scaling", help="scaling ratios near C_r on both sides")
    _add_reference(s)
    s.add_argument("--beta", required=True, help="beta grid: start:stop:count or comma list")
    s.add_argument("--blocks", type=int, default=64, help="blocks for the explicit candidate (default 64)")
    s.set_defaults(func=cmd_scaling)
    return p


GLOBAL_DEFAULTS = {"output_dir": ".", "seed": 0, "threads": None}


def _apply_threads(requested):
    cap = os.environ.get("GRAPHON_LDP_THREADS")
    n = requested
    if cap:
        try:
            c = max(1, int(cap))
            n = c if n is None else min(n, c)
        except ValueError:
            pass
    if n is not None:
        os.environ["GRAPHON_LDP_THREADS"] = str(max(1, n))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for key, default in GLOBAL_DEFAULTS.items():
        if not hasattr(args, key):
            setattr(args, key, default)
    _apply_threads(args.threads)
    try:
        code = args.func(args)
        _log(args, "ok")
        return code
    except CheckFailure as exc:
        print(f"graphon-ldp: {exc}", file=sys.stderr)
        _log(args, f"check failure: {exc}")
        return EXIT_CHECK
    except (InputError, ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"graphon-ldp: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
