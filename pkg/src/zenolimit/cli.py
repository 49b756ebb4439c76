"""Config-driven experiment runner.

``zenolimit <subcommand> --config cfg.json [--out results.csv]``. See
``zenolimit --help`` for the config schema and the CSV columns of each
experiment kind.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np

from . import analysis, dynamics, gaussian, model
from .linalg import NotHermitianError, check_density_matrix, kron, partial_trace

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_NUMERICAL = 4

KINDS = ("sweep", "dephasing", "entanglement", "collision", "multires")

COLUMNS = {
    "sweep": ["lambda", "t", "trace_distance", "fidelity", "top_fock_population", "n_max_used", "truncation_ok", "wall_ms"],
    "dephasing": ["t", "coh_re_analytic", "coh_im_analytic", "coh_re_sim", "coh_im_sim", "abs_err", "decoherence_magnitude"],
    "entanglement": ["sample", "negativity_initial", "negativity_limit", "ppt", "time_independence", "applicable"],
    "collision": ["step", "purity", "trace_distance_from_previous", "trace_distance_from_mixed"],
    "multires": ["t", "row", "col", "re", "im"],
}

HELP_EPILOG = """\
config (JSON object):
  kind          optional; must match the subcommand when given
  system        {"hamiltonian": OP, "coupling": OP | {"composite": {...}}, "coupling2": OP}
  reservoir     {"family": "ohmic"|"flat", "amplitude", "cutoff", "exponent",
                 "omega_max", "modes", "n_max", "beta"}  or
                {"frequencies": [...], "couplings": [...], "n_max", "beta"}
                beta may be a number or "inf" (default "inf")
  state         "ket:01" | "bell:phi+" | "mixed" | {"vector": V} | {"matrix": M}
  lambda        list of coupling constants (ascending, >= 0)
  times         list of times (>= 0)
  seed          integer (overridden by --seed)
  output        CSV path (overridden by --out; stdout when neither is given)
  truncation    sweep only: {"adapt": true, "target": 1e-4, "dim_cap": 4096}
  element       dephasing only: [i, j] coherence in the computational basis
  samples       entanglement only: number of random entangled states
  measurements  collision only: list of OP, measured in order

  OP is a preset name (sigma_x, sigma_y, sigma_z, identity2, zero2,
  flip_flop, zz_sum, zz_product, sigma_{x,y,z}_{1,2}), a matrix given as
  nested rows of numbers or [re, im] pairs, {"scale": s, "op": OP} or
  {"sum": [OP, ...]}. A composite coupling is
  {"operators": [OP, ...], "combine": "sum"|"product", "mu": 0.1}; its
  random perturbation uses the seed.

CSV columns (floats with 17 significant digits, one '#' header line):
  sweep         lambda,t,trace_distance,fidelity,top_fock_population,
                n_max_used,truncation_ok,wall_ms
                one row per (lambda, t); n_max_used is ';'-joined per mode
  dephasing     t,coh_re_analytic,coh_im_analytic,coh_re_sim,coh_im_sim,
                abs_err,decoherence_magnitude
                requires [H_S, G] = 0 and exactly one lambda;
                decoherence_magnitude = |c(t)| / |c(0)| (analytic)
  entanglement  sample,negativity_initial,negativity_limit,ppt,
                time_independence,applicable
                Zeno-limit state at the first time of a 2-qubit system
  collision     step,purity,trace_distance_from_previous,
                trace_distance_from_mixed  (step 0 is the input state)
  multires      t,row,col,re,im
                reduced system state under ultrastrong coupling to a
                second reservoir (projections of coupling2) and coupling
                lambda (exactly one value) to the configured reservoir

exit status: 0 ok (truncation-cap flags are warnings on stderr),
  2 unreadable or malformed config, 3 invalid config, 4 numerical guard
"""


class ConfigError(ValueError):
    """Config parses but is invalid (exit 3)."""


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------


def _presets() -> dict[str, np.ndarray]:
    i2 = model.IDENTITY2
    out = {
        "sigma_x": model.SIGMA_X,
        "sigma_y": model.SIGMA_Y,
        "sigma_z": model.SIGMA_Z,
        "identity2": i2,
        "zero2": np.zeros((2, 2), dtype=complex),
        "flip_flop": model.flip_flop_coupling(),
        "zz_sum": kron(model.SIGMA_Z, i2) + kron(i2, model.SIGMA_Z),
        "zz_product": kron(model.SIGMA_Z, model.SIGMA_Z),
    }
    for name, s in (("x", model.SIGMA_X), ("y", model.SIGMA_Y), ("z", model.SIGMA_Z)):
        out[f"sigma_{name}_1"] = kron(s, i2)
        out[f"sigma_{name}_2"] = kron(i2, s)
    return out


PRESETS = _presets()


def _number(x) -> complex:
    if isinstance(x, bool):
        raise ConfigError(f"expected a number, got {x!r}")
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, list) and len(x) == 2 and all(isinstance(v, (int, float)) for v in x):
        return complex(x[0], x[1])
    raise ConfigError(f"expected a number or [re, im] pair, got {x!r}")


def _matrix(rows) -> np.ndarray:
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise ConfigError("matrix must be a nonempty list of rows")
    m = np.array([[_number(x) for x in row] for row in rows], dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ConfigError(f"matrix must be square, got shape {m.shape}")
    return m


def parse_operator(spec) -> np.ndarray:
    if isinstance(spec, str):
        if spec not in PRESETS:
            raise ConfigError(f"unknown operator preset {spec!r}")
        return PRESETS[spec].copy()
    if isinstance(spec, list):
        return _matrix(spec)
    if isinstance(spec, dict):
        if "scale" in spec and "op" in spec:
            return _number(spec["scale"]) * parse_operator(spec["op"])
        if "sum" in spec:
            ops = [parse_operator(s) for s in spec["sum"]]
            if not ops or any(o.shape != ops[0].shape for o in ops):
                raise ConfigError("sum needs operators of one shape")
            return sum(ops)
    raise ConfigError(f"cannot interpret operator {spec!r}")


def parse_state(spec, dim: int) -> np.ndarray:
    if isinstance(spec, str):
        if spec == "mixed":
            rho = np.eye(dim, dtype=complex) / dim
        elif spec.startswith("ket:"):
            bits = spec[4:]
            if not bits or set(bits) - {"0", "1"}:
                raise ConfigError(f"bad ket {spec!r}")
            rho = model.projector(model.ket(*map(int, bits)))
        elif spec.startswith("bell:"):
            try:
                rho = model.projector(model.bell_state(spec[5:]))
            except (KeyError, ValueError) as exc:
                raise ConfigError(f"unknown Bell state {spec!r}") from exc
        else:
            raise ConfigError(f"unknown state preset {spec!r}")
    elif isinstance(spec, dict) and "vector" in spec:
        v = np.array([_number(x) for x in spec["vector"]], dtype=complex)
        if not np.linalg.norm(v) > 0:
            raise ConfigError("state vector is zero")
        rho = model.projector(v / np.linalg.norm(v))
    elif isinstance(spec, dict) and "matrix" in spec:
        rho = _matrix(spec["matrix"])
    else:
        raise ConfigError(f"cannot interpret state {spec!r}")
    if rho.shape != (dim, dim):
        raise ConfigError(f"state has dimension {rho.shape[0]}, system has {dim}")
    try:
        check_density_matrix(rho)
    except ValueError as exc:
        raise ConfigError(f"state is not a density matrix: {exc}") from exc
    return rho


def _beta(x) -> float:
    if x is None or x == "inf":
        return np.inf
    if isinstance(x, (int, float)) and not isinstance(x, bool) and x > 0:
        return float(x)
    raise ConfigError(f"beta must be positive or \"inf\", got {x!r}")


def parse_reservoir(spec) -> tuple[model.ReservoirSpec, float]:
    if not isinstance(spec, dict):
        raise ConfigError("reservoir must be an object")
    beta = _beta(spec.get("beta"))
    n_max = spec.get("n_max", 2)
    if isinstance(n_max, list):
        n_max = tuple(n_max)
    try:
        if "frequencies" in spec:
            w = np.asarray(spec["frequencies"], dtype=float)
            g = np.array([_number(x) for x in spec.get("couplings", [])], dtype=complex)
            r = model.ReservoirSpec(w, g, n_max)
        else:
            density = model.SpectralDensity(
                spec.get("family", "ohmic"),
                float(spec.get("amplitude", 0.1)),
                float(spec.get("cutoff", 1.0)),
                float(spec.get("exponent", 1.0)),
                spec.get("omega_max"),
            )
            r = model.discretize_reservoir(density, int(spec.get("modes", 4)), n_max)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid reservoir: {exc}") from exc
    if np.isfinite(beta) and np.any(r.frequencies <= 0):
        raise ConfigError("finite beta needs strictly positive frequencies")
    return r, beta


def _grid(x, name: str, ascending: bool = False) -> list[float]:
    if not isinstance(x, list) or not x:
        raise ConfigError(f"{name} must be a nonempty list")
    try:
        vals = [float(v) for v in x]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must contain numbers") from exc
    if min(vals) < 0 or not np.all(np.isfinite(vals)):
        raise ConfigError(f"{name} must be finite and non-negative")
    if ascending and any(b < a for a, b in zip(vals, vals[1:])):
        raise ConfigError(f"{name} must be ascending")
    return vals


@dataclass
class ExperimentConfig:
    kind: str
    hamiltonian: np.ndarray
    coupling: np.ndarray | model.CompositeCoupling
    coupling2: np.ndarray | None
    reservoir: model.ReservoirSpec | None
    beta: float
    lam: list[float]
    times: list[float]
    seed: int
    output: str | None
    state: np.ndarray | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def coupling_matrix(self) -> np.ndarray:
        if isinstance(self.coupling, model.CompositeCoupling):
            return model.composite_coupling(self.coupling)
        return self.coupling

    def system(self) -> model.SystemSpec:
        return model.SystemSpec(self.hamiltonian, self.coupling_matrix, self.coupling2)


def validate(raw: dict, kind: str, seed: int | None = None) -> ExperimentConfig:
    """Check a parsed JSON config for ``kind`` and build the experiment config."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    if raw.get("kind", kind) != kind:
        raise ConfigError(f"config kind {raw.get('kind')!r} does not match subcommand {kind!r}")
    seed = int(raw.get("seed", 0)) if seed is None else seed
    sys_spec = raw.get("system")
    if not isinstance(sys_spec, dict) or "hamiltonian" not in sys_spec:
        raise ConfigError("system.hamiltonian is required")
    h = parse_operator(sys_spec["hamiltonian"])
    coupling: np.ndarray | model.CompositeCoupling
    c_spec = sys_spec.get("coupling", "zero2" if kind == "collision" else None)
    if c_spec is None:
        raise ConfigError("system.coupling is required")
    if isinstance(c_spec, dict) and "composite" in c_spec:
        comp = c_spec["composite"]
        try:
            coupling = model.CompositeCoupling(
                tuple(parse_operator(o) for o in comp["operators"]),
                comp.get("combine", "sum"),
                float(comp.get("mu", 0.0)),
                seed,
            )
            if coupling.combine not in ("sum", "product"):
                raise ConfigError(f"unknown combine {coupling.combine!r}")
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"invalid composite coupling: {exc}") from exc
    else:
        coupling = parse_operator(c_spec)
    g2 = parse_operator(sys_spec["coupling2"]) if "coupling2" in sys_spec else None

    cfg = ExperimentConfig(kind, h, coupling, g2, None, np.inf, [], [], seed, raw.get("output"))
    try:
        sysobj = cfg.system()
    except (NotHermitianError, ValueError) as exc:
        raise ConfigError(f"invalid system: {exc}") from exc
    d = sysobj.dim

    if kind in ("sweep", "dephasing", "multires"):
        cfg.reservoir, cfg.beta = parse_reservoir(raw.get("reservoir"))
        cfg.lam = _grid(raw.get("lambda"), "lambda", ascending=True)
    if kind != "collision":
        cfg.times = _grid(raw.get("times"), "times")
    if kind in ("sweep", "dephasing", "collision", "multires"):
        cfg.state = parse_state(raw.get("state", "mixed"), d)

    if kind == "sweep":
        tr = raw.get("truncation", {})
        cfg.extra = {
            "adapt": bool(tr.get("adapt", True)),
            "target": float(tr.get("target", dynamics.TRUNCATION_TARGET)),
            "dim_cap": int(tr.get("dim_cap", dynamics.DIMENSION_CAP)),
        }
        if 0.0 in cfg.times:
            raise ConfigError("sweep times must be positive")
        if d * cfg.reservoir.dim > cfg.extra["dim_cap"]:
            raise ConfigError("starting truncation exceeds dim_cap")
    elif kind == "dephasing":
        if len(cfg.lam) != 1:
            raise ConfigError("dephasing takes exactly one lambda")
        i, j = raw.get("element", [0, 1])
        if not (0 <= i < d and 0 <= j < d):
            raise ConfigError("element out of range")
        cfg.extra = {"element": (int(i), int(j))}
    elif kind == "entanglement":
        if not isinstance(coupling, model.CompositeCoupling) or coupling.dims != (2, 2):
            raise ConfigError("entanglement needs a composite coupling on two qubits")
        if 0.0 in cfg.times:
            raise ConfigError("entanglement times must be positive")
        if "state" in raw:
            cfg.state = parse_state(raw["state"], d)
        samples = int(raw.get("samples", 0 if "state" in raw else 10))
        if cfg.state is None and samples < 1:
            raise ConfigError("samples must be positive")
        cfg.extra = {"samples": samples}
    elif kind == "collision":
        ms = raw.get("measurements")
        if not isinstance(ms, list) or not ms:
            raise ConfigError("measurements must be a nonempty list")
        ops = [parse_operator(m) for m in ms]
        if any(o.shape != (d, d) for o in ops):
            raise ConfigError("measurement operators must match the system dimension")
        try:
            cfg.extra = {"decs": [model.spectral_decompose(o) for o in ops]}
        except ValueError as exc:
            raise ConfigError(f"invalid measurement: {exc}") from exc
    elif kind == "multires":
        if g2 is None:
            raise ConfigError("multires needs system.coupling2")
        if len(cfg.lam) != 1:
            raise ConfigError("multires takes exactly one lambda")
        if np.isfinite(cfg.beta):
            raise ConfigError("multires supports the vacuum (beta = inf) only")
    return cfg


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, tuple):
        return ";".join(str(v) for v in x)
    return "%.17g" % float(x)


def run_sweep(cfg: ExperimentConfig, threads: int, log) -> tuple[list[list], list[str]]:
    rows, warnings = [], []
    sysobj = cfg.system()
    for t in cfg.times:
        log(f"sweep t={t:g}: {len(cfg.lam)} lambda points")
        recs = dynamics.lambda_sweep(
            sysobj, cfg.reservoir, cfg.state, cfg.beta, t, cfg.lam,
            cfg.extra["adapt"], cfg.extra["target"], cfg.extra["dim_cap"], threads,
        )
        for rec in recs:
            if not rec.truncation_ok:
                warnings.append(
                    f"truncation target not met at lambda={rec.lam:g}, t={t:g} "
                    f"(top Fock population {rec.top_fock_population:.3g})"
                )
            rows.append([rec.lam, rec.t, rec.trace_distance, rec.fidelity, rec.top_fock_population,
                         rec.n_max_used, rec.truncation_ok, rec.wall_time_ms])
    return rows, warnings


def run_dephasing(cfg: ExperimentConfig, threads: int, log) -> tuple[list[list], list[str]]:
    sysobj = cfg.system()
    r, lam = cfg.reservoir, cfg.lam[0]
    state = gaussian.thermal_covariance(cfg.beta, r.frequencies)
    i, j = cfg.extra["element"]
    c0 = gaussian.dephasing_reduced_state(sysobj, r, lam, 0.0, state, cfg.state)[i, j]
    runs = dynamics.simulate(sysobj, r, cfg.state, cfg.beta, lam, cfg.times)
    rows, warnings = [], []
    for t, run in zip(cfg.times, runs):
        analytic = gaussian.dephasing_reduced_state(sysobj, r, lam, t, state, cfg.state)[i, j]
        sim = run.rho_reduced[i, j]
        mag = abs(analytic) / abs(c0) if abs(c0) > 0 else np.nan
        rows.append([t, analytic.real, analytic.imag, sim.real, sim.imag, abs(analytic - sim), mag])
    top = max(float(np.max(run.top_populations)) for run in runs)
    if top >= dynamics.TRUNCATION_TARGET:
        warnings.append(f"simulated column may be truncation-limited (top Fock population {top:.3g})")
    return rows, warnings


def run_entanglement(cfg: ExperimentConfig, threads: int, log) -> tuple[list[list], list[str]]:
    t = cfg.times[0]
    states = [cfg.state] if cfg.state is not None else analysis.random_entangled_states(cfg.extra["samples"], cfg.seed)
    rows = []
    for k, rho in enumerate(states):
        rep = analysis.zeno_limit_separability_check(rho, cfg.coupling, cfg.hamiltonian, t)
        rows.append([k, analysis.negativity(rho, (2, 2)), rep.negativity, rep.ppt, rep.time_independence, rep.applicable])
    return rows, []


def run_collision(cfg: ExperimentConfig, threads: int, log) -> tuple[list[list], list[str]]:
    d = cfg.state.shape[0]
    mixed = np.eye(d) / d
    rho = cfg.state
    rows = [[0, np.trace(rho @ rho).real, 0.0, analysis.trace_distance(rho, mixed)]]
    for step, dec in enumerate(cfg.extra["decs"], start=1):
        nxt = analysis.collision_sequence(rho, [dec])
        rows.append([step, np.trace(nxt @ nxt).real, analysis.trace_distance(nxt, rho), analysis.trace_distance(nxt, mixed)])
        rho = nxt
    return rows, []


def run_multires(cfg: ExperimentConfig, threads: int, log) -> tuple[list[list], list[str]]:
    sysobj = cfg.system()
    r1 = cfg.reservoir
    d = sysobj.dim
    dec2 = model.spectral_decompose(cfg.coupling2)
    rho = np.kron(cfg.state, dynamics.initial_reservoir_state(r1, cfg.beta))
    states = dynamics.two_reservoir_zeno_evolve(sysobj, r1, dec2, cfg.lam[0], rho, cfg.times)
    rows = []
    for t, st in zip(cfg.times, states):
        red = partial_trace(st, (d, r1.dim), 0)
        for a in range(d):
            for b in range(d):
                rows.append([t, a, b, red[a, b].real, red[a, b].imag])
    return rows, []


RUNNERS = {
    "sweep": run_sweep,
    "dephasing": run_dephasing,
    "entanglement": run_entanglement,
    "collision": run_collision,
    "multires": run_multires,
}


def render_csv(kind: str, rows: list[list]) -> str:
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    lines = [f"# zenolimit {kind} {stamp}", ",".join(COLUMNS[kind])]
    lines += [",".join(_fmt(x) for x in row) for row in rows]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zenolimit",
        description="Ultrastrong-coupling (Zeno limit) experiments for a system coupled to bosonic reservoirs.",
        epilog=HELP_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in KINDS + ("validate",):
        p = sub.add_parser(name, epilog=HELP_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter,
                           help="parse and validate a config only" if name == "validate" else f"run a {name} experiment")
        p.add_argument("--config", required=True, help="path to a JSON config")
        p.add_argument("--out", help="CSV output path (default: config 'output', else stdout)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--threads", type=int, default=1, help="worker threads for sweep points")
        p.add_argument("--quiet", action="store_true", help="suppress progress messages")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    def log(msg: str) -> None:
        if not args.quiet:
            print(msg, file=sys.stderr)

    try:
        raw = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_PARSE
    if args.threads < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return EXIT_VALIDATION

    kind = args.command
    if kind == "validate":
        kind = raw.get("kind") if isinstance(raw, dict) else None
        if kind not in KINDS:
            print(f"error: config 'kind' must be one of {', '.join(KINDS)}", file=sys.stderr)
            return EXIT_VALIDATION
    try:
        cfg = validate(raw, kind, args.seed)
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    if args.command == "validate":
        log(f"config ok ({kind})")
        return EXIT_OK

    start = time.perf_counter()
    try:
        rows, warnings = RUNNERS[kind](cfg, args.threads, log)
    except (gaussian.NonCommutingError, gaussian.InfraredDivergenceError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"error: numerical guard: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    text = render_csv(kind, rows)
    out = args.out or cfg.output
    if out:
        Path(out).write_text(text)
        log(f"wrote {len(rows)} rows to {out} in {time.perf_counter() - start:.1f} s")
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
