"""Experiment harness: presets, parameter sweeps, comparisons, verification.

Sweep output is a CSV with a stable column order; every cell is produced
by a pure function of (scenario, seed, scheme), so reruns and different
worker counts yield byte-identical files apart from the trailing
wall-time column.
"""

from __future__ import annotations

import csv
import hashlib
import io
import time
from concurrent.futures import ProcessPoolExecutor
from configparser import ConfigParser
from dataclasses import asdict, dataclass

import numpy as np

from .channels import Scenario, generate_channels
from .convex import DEFAULT_OPTIONS, KnapsackLp, SolverOptions, solve_knapsack
from .hybrid import Grouping, partition_devices, signaling_overhead, solve_hybrid
from .noma import solve_noma
from .tdma import (
    equal_snr_time_allocation,
    solve_passive_tdma,
    solve_tdma,
    solve_tdma_single_beam,
)

__all__ = [
    "SweepConfig",
    "RunRecord",
    "paper_v_scenario",
    "run_sweep",
    "solve_passive_baseline",
    "compare_schemes",
    "verify",
    "load_sweep_config",
    "dump_scenario",
    "scenario_hash",
]

SWEEP_COLUMNS = [
    "scenario_hash",
    "axis",
    "value",
    "seed",
    "scheme",
    "L",
    "objective_bits_per_hz",
    "iterations",
    "overhead_coeffs",
    "rank_fallback",
    "maxiter_flag",
    "wall_time_s",
]


def paper_v_scenario(**overrides) -> Scenario:
    """Named preset with the reference experiment defaults baked in."""
    base = dict(
        K=10,
        N=50,
        T_max=0.1,
        E=0.01,
        P_r=1e-3,
        ap_pos=(0.0, 0.0, 0.0),
        irs_pos=(0.0, 0.0, 4.0),
        device_center=(30.0, 0.0, 4.0),
        device_radius=5.0,
        alpha_ris=2.2,
        alpha_direct=3.4,
        ref_loss_db=30.0,
    )
    base.update(overrides)
    return Scenario(**base)


PRESETS = {"paper-v": paper_v_scenario}


def scenario_hash(sc: Scenario) -> str:
    blob = repr(sorted(asdict(sc).items())).encode()
    return hashlib.sha1(blob).hexdigest()[:12]


@dataclass(frozen=True)
class SweepConfig:
    base: Scenario
    axis: str                    # K | N | E | P_r | x_D | x_IRS | L
    values: tuple
    seeds: int = 20
    schemes: tuple = ("tdma", "noma")
    include_passive: bool = False
    grouping: tuple | None = None   # explicit index lists for hybrid runs
    out: str | None = None
    workers: int = 1

    def __post_init__(self):
        if self.seeds < 1:
            raise ValueError("need at least one seed")
        vals = tuple(float(v) for v in self.values)
        if not all(np.isfinite(vals)):
            raise ValueError("axis values must be finite")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "schemes", tuple(self.schemes))
        if self.grouping is not None:
            object.__setattr__(
                self, "grouping", tuple(tuple(int(k) for k in g) for g in self.grouping)
            )


@dataclass
class RunRecord:
    scenario_hash: str
    axis: str
    value: float
    seed: int
    scheme: str
    L: int
    objective_bits_per_hz: float
    iterations: int
    overhead_coeffs: int
    rank_fallback: bool
    maxiter_flag: bool
    wall_time_s: float

    def row(self):
        return [
            self.scenario_hash,
            self.axis,
            format(self.value, ".10g"),
            self.seed,
            self.scheme,
            self.L,
            format(self.objective_bits_per_hz, ".12e"),
            self.iterations,
            self.overhead_coeffs,
            int(self.rank_fallback),
            int(self.maxiter_flag),
            format(self.wall_time_s, ".3e"),
        ]


def apply_axis(base: Scenario, axis: str, value: float) -> Scenario:
    if axis == "K":
        return base.with_(K=int(value))
    if axis == "N":
        return base.with_(N=int(value))
    if axis == "E":
        return base.with_(E=value)
    if axis == "P_r":
        return base.with_(P_r=value)
    if axis == "x_D":
        c = base.device_center
        return base.with_(device_center=(value, c[1], c[2]))
    if axis == "x_IRS":
        c = base.irs_pos
        return base.with_(irs_pos=(value, c[1], c[2]))
    if axis == "L":
        return base
    raise ValueError(f"unknown sweep axis {axis!r}")


def solve_passive_baseline(ch, sc, opts=None):
    """Simplified unit-modulus surface baseline (no amplification, no
    surface noise); see solve_passive_tdma for the relaxation details."""
    return solve_passive_tdma(ch, sc, opts)


def _solve_point(args):
    base_dict, axis, value, seed, scheme, opts, grouping_spec = args
    base = Scenario(**base_dict)
    sc = apply_axis(base, axis, value)
    L = int(value) if axis == "L" else None
    t0 = time.perf_counter()
    ch = generate_channels(sc, seed)
    rank_fb = False
    maxiter = False
    if scheme == "tdma":
        sol = solve_tdma(ch, sc, opts)
        obj, iters, L_out = sol.objective, len(sol.trace), sc.K
    elif scheme == "noma":
        sol = solve_noma(ch, sc, opts)
        obj, iters, L_out = sol.objective, len(sol.ao_trace), 1
        rank_fb = not sol.sdp_rank_exact
    elif scheme == "single_beam":
        sol = solve_tdma_single_beam(ch, sc, opts)
        obj, iters, L_out = sol.objective, len(sol.trace), 1
        rank_fb = not sol.meta.get("sdp_rank_exact", True)
    elif scheme in ("passive", "passive-simplified"):
        scheme = "passive-simplified"
        sol = solve_passive_baseline(ch, sc, opts)
        obj, iters, L_out = sol.objective, len(sol.trace), sc.K
    elif scheme.startswith("hybrid"):
        if grouping_spec is not None:
            grouping = Grouping(L=len(grouping_spec), groups=grouping_spec)
            L_out = grouping.L
        else:
            L_out = L if L is not None else int(scheme.split("-", 1)[1])
            grouping = partition_devices(sc.K, L_out, "round_robin")
        sol = solve_hybrid(ch, sc, grouping, opts)
        obj, iters = sol.objective, len(sol.ao_trace)
        rank_fb = not sol.meta.get("sdp_rank_exact", True)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return RunRecord(
        scenario_hash=scenario_hash(sc),
        axis=axis,
        value=value,
        seed=seed,
        scheme=scheme,
        L=L_out,
        objective_bits_per_hz=obj,
        iterations=iters,
        overhead_coeffs=L_out * sc.N,
        rank_fallback=rank_fb,
        maxiter_flag=maxiter,
        wall_time_s=time.perf_counter() - t0,
    )


def run_sweep(cfg: SweepConfig, opts: SolverOptions | None = None):
    """Run every (axis value, seed, scheme) cell; failures are recorded as
    NaN objectives with the flag column set instead of aborting the sweep.

    Returns the records in deterministic config order and writes them to
    cfg.out when set.
    """
    opts = opts or DEFAULT_OPTIONS
    base_dict = asdict(cfg.base)
    schemes = list(cfg.schemes)
    if cfg.include_passive and "passive" not in schemes:
        schemes.append("passive")
    if cfg.axis == "L":
        schemes = [s if s.startswith("hybrid") else s for s in schemes]
    tasks = [
        (base_dict, cfg.axis, value, seed, scheme, opts, cfg.grouping)
        for value in cfg.values
        for seed in range(cfg.seeds)
        for scheme in schemes
    ]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            records = list(ex.map(_solve_point_safe, tasks, chunksize=1))
    else:
        records = [_solve_point_safe(t) for t in tasks]
    if cfg.out:
        with open(cfg.out, "w", newline="") as f:
            write_records(records, f)
    return records


def _solve_point_safe(args):
    try:
        return _solve_point(args)
    except Exception:
        base_dict, axis, value, seed, scheme, _, _ = args
        sc = apply_axis(Scenario(**base_dict), axis, value)
        return RunRecord(
            scenario_hash=scenario_hash(sc),
            axis=axis,
            value=value,
            seed=seed,
            scheme=scheme,
            L=0,
            objective_bits_per_hz=float("nan"),
            iterations=0,
            overhead_coeffs=0,
            rank_fallback=False,
            maxiter_flag=True,
            wall_time_s=0.0,
        )


def write_records(records, buf) -> None:
    w = csv.writer(buf)
    w.writerow(SWEEP_COLUMNS)
    for r in records:
        w.writerow(r.row())


def records_csv(records) -> str:
    buf = io.StringIO()
    write_records(records, buf)
    return buf.getvalue()


def compare_schemes(ch, sc, L_values, opts=None):
    """Objective and signaling overhead per scheme on one instance.

    Returns rows (scheme, L, objective, overhead_coefficients).
    """
    opts = opts or DEFAULT_OPTIONS
    rows = []
    sol = solve_tdma(ch, sc, opts)
    rows.append(("tdma", sc.K, sol.objective, sc.K * sc.N))
    nsol = solve_noma(ch, sc, opts)
    rows.append(("noma", 1, nsol.objective, sc.N))
    for L in L_values:
        grouping = partition_devices(sc.K, int(L), "round_robin")
        hsol = solve_hybrid(ch, sc, grouping, opts)
        rows.append((f"hybrid-{int(L)}", int(L), hsol.objective,
                     signaling_overhead(grouping, sc.N)))
    return rows


# ---------------------------------------------------------------------------
# config files (flat INI: [scenario] and [sweep] sections)


def _config_parser() -> ConfigParser:
    cp = ConfigParser()
    cp.optionxform = str  # keep option case (K vs k, T_max, ...)
    return cp


def dump_scenario(sc: Scenario) -> str:
    cp = _config_parser()
    cp["scenario"] = {
        "K": str(sc.K),
        "N": str(sc.N),
        "T_max": repr(sc.T_max),
        "E": repr(sc.E[0]) if len(set(sc.E)) == 1 else ",".join(repr(e) for e in sc.E),
        "P_r": repr(sc.P_r),
        "sigma2": repr(sc.sigma2),
        "sigma_r2": repr(sc.sigma_r2),
        "ap_pos": ",".join(repr(x) for x in sc.ap_pos),
        "irs_pos": ",".join(repr(x) for x in sc.irs_pos),
        "device_center": ",".join(repr(x) for x in sc.device_center),
        "device_radius": repr(sc.device_radius),
        "alpha_ris": repr(sc.alpha_ris),
        "alpha_direct": repr(sc.alpha_direct),
        "ref_loss_db": repr(sc.ref_loss_db),
    }
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def _parse_scenario(section) -> Scenario:
    def floats(key):
        return tuple(float(x) for x in section[key].split(","))

    kw = {}
    if "K" in section:
        kw["K"] = int(section["K"])
    if "N" in section:
        kw["N"] = int(section["N"])
    for key in ("T_max", "P_r", "sigma2", "sigma_r2", "device_radius",
                "alpha_ris", "alpha_direct", "ref_loss_db"):
        if key in section:
            kw[key] = float(section[key])
    for key in ("ap_pos", "irs_pos", "device_center"):
        if key in section:
            kw[key] = floats(key)
    if "E" in section:
        e = floats("E")
        kw["E"] = e[0] if len(e) == 1 else e
    return Scenario(**kw)


def load_sweep_config(path_or_text: str) -> SweepConfig:
    """Parse a sweep description (INI text or a path to one)."""
    cp = _config_parser()
    if "\n" in path_or_text or "[" == path_or_text.strip()[:1]:
        cp.read_string(path_or_text)
    else:
        with open(path_or_text) as f:
            cp.read_string(f.read())
    preset = cp.get("scenario", "preset", fallback=None)
    if preset:
        sec = {k: v for k, v in cp["scenario"].items() if k != "preset"}
        base = _merge_preset(preset, sec) if sec else PRESETS[preset]()
    else:
        base = _parse_scenario(cp["scenario"])
    sw = cp["sweep"]
    grouping = None
    if sw.get("grouping"):
        # semicolon-separated index lists, e.g. "0,2;1,3"
        grouping = tuple(
            tuple(int(k) for k in part.split(",")) for part in sw["grouping"].split(";")
        )
    return SweepConfig(
        base=base,
        axis=sw["axis"],
        values=tuple(float(x) for x in sw["values"].split(",")),
        seeds=sw.getint("seeds", 20),
        schemes=tuple(s.strip() for s in sw.get("schemes", "tdma,noma").split(",")),
        include_passive=sw.getboolean("passive", False),
        grouping=grouping,
        out=sw.get("out", None),
        workers=sw.getint("workers", 1),
    )


def _merge_preset(preset, section) -> Scenario:
    base = PRESETS[preset]()
    merged = _parse_scenario({**_scenario_section(base), **section})
    return merged


def _scenario_section(sc: Scenario):
    cp = _config_parser()
    cp.read_string(dump_scenario(sc))
    return dict(cp["scenario"])


# ---------------------------------------------------------------------------
# verification suite (tiny instances, deterministic)


def verify(out=None, verbose=True):
    """Deterministic oracle/invariant checks on tiny instances.

    Prints one PASS/FAIL line per check, optionally writes them as CSV,
    and returns the list of (name, passed, detail) tuples.
    """
    from .convex import SdpProblem, solve_sdp
    from .noma import noma_throughput
    from .oracle import GridSpec, brute_force, vertex_enumerate_lp
    from .tdma import tdma_throughput

    checks = []

    def record(name, passed, detail=""):
        checks.append((name, bool(passed), detail))
        if verbose:
            print(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")

    sc = Scenario(K=2, N=2, T_max=0.1, E=0.01, P_r=1e-3)
    ch = generate_channels(sc, seed=0)

    rng = np.random.default_rng(0)
    ok = True
    for _ in range(5):
        kk = int(rng.integers(1, 5))
        prob = KnapsackLp(
            c=rng.random(kk),
            a=rng.random(kk) * rng.integers(0, 2, kk),
            u=rng.random(kk),
            b=float(rng.random()),
        )
        ref, _ = vertex_enumerate_lp(prob)
        got = float(solve_knapsack(prob) @ prob.c)
        ok &= abs(got - ref) <= 1e-12 * max(1.0, ref)
    record("knapsack_matches_vertex_enumeration", ok)

    A = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    Cm = 0.5 * (A + A.conj().T)
    r = solve_sdp(SdpProblem(C=Cm, equalities=((np.eye(3), 1.0),)))
    lam = float(np.linalg.eigvalsh(Cm)[-1])
    record("sdp_matches_eigenvalue", abs(r.objective - lam) <= 1e-6,
           f"err={abs(r.objective-lam):.2e}")

    tsol = solve_tdma(ch, sc)
    e_res = float(np.max(np.abs(tsol.tau * tsol.p - np.asarray(sc.E)) / np.asarray(sc.E)))
    record("tdma_energy_depletion", e_res <= 1e-6, f"res={e_res:.1e}")
    record("tdma_trace_monotone", bool(np.all(np.diff(tsol.trace) >= -1e-9)))
    record(
        "tdma_objective_recompute",
        abs(tdma_throughput(tsol, ch, sc) - tsol.objective) <= 1e-9,
    )

    nsol = solve_noma(ch, sc)
    record("noma_full_duration", nsol.tau == sc.T_max)
    record("noma_trace_monotone", bool(np.all(np.diff(nsol.ao_trace) >= -1e-9)))
    record(
        "noma_objective_recompute",
        abs(noma_throughput(nsol, ch, sc) - nsol.objective) <= 1e-9,
    )
    record("noma_rank_one", nsol.sdp_rank_exact)

    gains = np.array([abs(ch.h_d[k]) ** 2 for k in range(sc.K)])
    tau_ref = equal_snr_time_allocation(gains, sc.E, sc.T_max)
    snrs = np.asarray(sc.E) * gains / (tau_ref * sc.sigma2)
    record("equal_snr_closed_form", float(np.ptp(snrs) / snrs[0]) <= 1e-9)

    grid = GridSpec(phase_levels=12, amplitude_levels=10, time_levels=16)
    go, _ = brute_force(ch, sc, "tdma", grid)
    record("tdma_beats_grid", tsol.objective >= go * 0.98,
           f"solver={tsol.objective:.5f} grid={go:.5f}")
    gn, _ = brute_force(ch, sc, "noma", grid)
    record("noma_beats_grid", nsol.objective >= gn * 0.98,
           f"solver={nsol.objective:.5f} grid={gn:.5f}")

    if out:
        with open(out, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["check", "passed", "detail"])
            for name, passed, detail in checks:
                w.writerow([name, int(passed), detail])
    return checks
