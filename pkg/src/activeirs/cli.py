"""Command line front end: solve / sweep / verify / compare."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict

from .channels import Scenario, generate_channels
from .convex import SolverOptions
from .harness import (
    PRESETS,
    SweepConfig,
    compare_schemes,
    load_sweep_config,
    records_csv,
    run_sweep,
    scenario_hash,
    solve_passive_baseline,
    verify,
)
from .hybrid import partition_devices, solve_hybrid
from .noma import solve_noma
from .tdma import solve_tdma, solve_tdma_single_beam


def _scenario_from_args(args) -> Scenario:
    sc = PRESETS[args.preset]()
    overrides = {}
    for name in ("K", "N", "E", "P_r", "T_max"):
        val = getattr(args, name, None)
        if val is not None:
            overrides[name] = val
    if args.x_d is not None:
        c = sc.device_center
        overrides["device_center"] = (args.x_d, c[1], c[2])
    if args.x_irs is not None:
        c = sc.irs_pos
        overrides["irs_pos"] = (args.x_irs, c[1], c[2])
    return sc.with_(**overrides) if overrides else sc


def _echo_config(sc: Scenario, extra=None):
    cfg = asdict(sc)
    cfg["scenario_hash"] = scenario_hash(sc)
    if extra:
        cfg.update(extra)
    print(json.dumps(cfg, sort_keys=True))


def _add_scenario_flags(p):
    p.add_argument("--preset", default="paper-v", choices=sorted(PRESETS))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-K", type=int, default=None)
    p.add_argument("-N", type=int, default=None)
    p.add_argument("--E", type=float, default=None)
    p.add_argument("--P-r", dest="P_r", type=float, default=None)
    p.add_argument("--T-max", dest="T_max", type=float, default=None)
    p.add_argument("--x-d", type=float, default=None)
    p.add_argument("--x-irs", type=float, default=None)
    p.add_argument("--out", default=None)


def cmd_solve(args) -> int:
    sc = _scenario_from_args(args)
    ch = generate_channels(sc, args.seed)
    opts = SolverOptions()
    scheme = args.scheme
    _echo_config(sc, {"seed": args.seed, "scheme": scheme})
    if scheme == "tdma":
        sol = solve_tdma(ch, sc, opts)
        print(f"objective_bits_per_hz: {sol.objective!r}")
        if args.out:
            with open(args.out, "w", newline="") as f, open(
                args.out + ".beams.csv", "w", newline=""
            ) as fb:
                sol.export_csv(f, fb)
            print(f"solution written to {args.out} (+ .beams.csv)")
        return 0
    if scheme == "noma":
        sol = solve_noma(ch, sc, opts)
        print(f"objective_bits_per_hz: {sol.objective!r}")
        if args.out:
            with open(args.out, "w", newline="") as f, open(
                args.out + ".trace.csv", "w", newline=""
            ) as ft:
                sol.export_csv(f, ft)
            print(f"solution written to {args.out} (+ .trace.csv)")
        return 0
    if scheme == "single_beam":
        sol = solve_tdma_single_beam(ch, sc, opts)
        rows = [("k", "tau", "p")] + [
            (k, repr(float(sol.tau[k])), repr(float(sol.p[k]))) for k in range(sc.K)
        ]
        obj = sol.objective
    elif scheme == "passive":
        sol = solve_passive_baseline(ch, sc, opts)
        rows = [("k", "tau", "p")] + [
            (k, repr(float(sol.tau[k])), repr(float(sol.p[k]))) for k in range(sc.K)
        ]
        obj = sol.objective
    elif scheme.startswith("hybrid"):
        L = args.L if args.L else int(scheme.split("-", 1)[1])
        sol = solve_hybrid(ch, sc, partition_devices(sc.K, L, "round_robin"), opts)
        rows = [("k", "group", "p", "e")] + [
            (k, next(l for l, g in enumerate(sol.grouping.groups) if k in g),
             repr(float(sol.p[k])), repr(float(sol.e[k])))
            for k in range(sc.K)
        ]
        obj = sol.objective
    else:
        print(f"unknown scheme {scheme!r}", file=sys.stderr)
        return 2
    print(f"objective_bits_per_hz: {obj!r}")
    if args.out:
        with open(args.out, "w", newline="") as f:
            csv.writer(f).writerows(rows)
        print(f"solution written to {args.out}")
    return 0


def cmd_sweep(args) -> int:
    cfg = load_sweep_config(args.config)
    if args.out:
        cfg = SweepConfig(**{**asdict_cfg(cfg), "out": args.out})
    if args.workers:
        cfg = SweepConfig(**{**asdict_cfg(cfg), "workers": args.workers})
    _echo_config(cfg.base, {
        "axis": cfg.axis, "values": list(cfg.values), "seeds": cfg.seeds,
        "schemes": list(cfg.schemes), "workers": cfg.workers,
    })
    records = run_sweep(cfg)
    if not cfg.out:
        print(records_csv(records), end="")
    else:
        print(f"{len(records)} records written to {cfg.out}")
    return 0


def asdict_cfg(cfg: SweepConfig) -> dict:
    return {
        "base": cfg.base,
        "axis": cfg.axis,
        "values": cfg.values,
        "seeds": cfg.seeds,
        "schemes": cfg.schemes,
        "include_passive": cfg.include_passive,
        "out": cfg.out,
        "workers": cfg.workers,
    }


def cmd_verify(args) -> int:
    checks = verify(out=args.out)
    failed = [name for name, ok, _ in checks if not ok]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return 1 if failed else 0


def cmd_compare(args) -> int:
    sc = _scenario_from_args(args)
    ch = generate_channels(sc, args.seed)
    L_values = [int(x) for x in args.L_list.split(",")] if args.L_list else [1, 2, sc.K]
    _echo_config(sc, {"seed": args.seed, "L_values": L_values})
    rows = compare_schemes(ch, sc, L_values)
    header = ("scheme", "L", "objective_bits_per_hz", "overhead_coeffs")
    print(",".join(header))
    for r in rows:
        print(f"{r[0]},{r[1]},{r[2]!r},{r[3]}")
    if args.out:
        with open(args.out, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(header)
            w.writerows(rows)
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="activeirs",
        description="Throughput-maximizing resource allocation for an "
        "amplifying-surface-aided uplink",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one instance with one scheme")
    _add_scenario_flags(p)
    p.add_argument("--scheme", default="tdma",
                   help="tdma | noma | single_beam | passive | hybrid-<L>")
    p.add_argument("-L", type=int, default=None)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="run a sweep described by a config file")
    p.add_argument("config")
    p.add_argument("--out", default=None)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run the oracle/invariant suite")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("compare", help="compare schemes on one instance")
    _add_scenario_flags(p)
    p.add_argument("-L", "--L-list", dest="L_list", default=None,
                   help="comma-separated group counts for the grouped scheme")
    p.set_defaults(func=cmd_compare)

    args = ap.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
