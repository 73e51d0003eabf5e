"""Batch front-end: ``characterize``, ``oracle``, ``converge`` and ``sweep``.

Configuration is a YAML file with unit-bearing keys. Frequencies of the
Rydberg model are linear frequencies in MHz (``*_mhz_over_2pi``), converted
to angular frequencies internally. Example::

    model: rydberg_cphase
    n_trajectories: 500
    rydberg:
      omega_b_mhz_over_2pi: 39.0
      gamma_d_mhz_over_2pi: 0.001
    sweep:
      omega_b_mhz_over_2pi: [10, 20, 39, 60]
      blockade_mhz_over_2pi: [20, 30]

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 sweep finished with failed points.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import channels, rydberg
from .mastereq import IntegrationError, aapc_characterize_density, sqpc_characterize
from .mcwf import SimulationError, TrajectoryEngine, default_workers
from .model import HilbertSpec, JumpOperator, LindbladModel, Segment, pauli_basis
from .tomography import ChiMatrix, characterize, fidelity, ideal_chi, trace_distance

log = logging.getLogger("aawf")

SCHEMA_VERSION = 1
MODELS = ("amplitude_damping", "dephasing", "custom_matrix_file", "rydberg_cphase")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_PARTIAL = 0, 2, 3, 4

CONVERGE_COLUMNS = ("n", "mean_F", "std_F", "mean_T", "std_T")
SWEEP_COLUMNS = ("omega_B_MHz", "B_MHz", "T", "F", "upper_bound", "S", "J", "n")
DELTA_CHI_COLUMNS = ("m", "n", "label_m", "label_n", "re", "im")

# the third blockade value is an assumption; only 20 and 30 MHz are fixed
DEFAULT_SWEEP_OMEGA_B = (5.0, 10.0, 20.0, 30.0, 39.0, 50.0, 60.0, 80.0, 100.0, 150.0)
DEFAULT_SWEEP_BLOCKADE = (10.0, 20.0, 30.0)
DEFAULT_N_LIST = (20, 50, 100, 200, 500)

RYDBERG_KEYS = {
    "delta_mhz_over_2pi": "Delta",
    "omega_r_mhz_over_2pi": "OmegaR",
    "omega_b_mhz_over_2pi": "OmegaB",
    "blockade_mhz_over_2pi": "B",
    "gamma_p_mhz_over_2pi": "gamma_p",
    "gamma_r_mhz_over_2pi": "gamma_r",
    "gamma_d_mhz_over_2pi": "gamma_d",
    "delta_e0_mhz_over_2pi": "deltaE0",
    "branching": "branching",
}
CHANNEL_KEYS = {"rate_per_s", "duration_s"}
TOP_KEYS = {
    "model", "n_trajectories", "master_seed", "workers", "integrator", "output",
    "amplitude_damping", "dephasing", "custom_matrix_file", "rydberg", "oracle",
    "converge", "sweep",
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    model: str
    params: dict
    n_trajectories: int = 500
    master_seed: int = 0
    workers: Optional[int] = None
    rtol: float = 1e-9
    atol: float = 1e-12
    out_dir: Path = Path(".")
    aapc_check: bool = True
    n_list: tuple = DEFAULT_N_LIST
    repeats: int = 50
    sweep_omega_b: tuple = DEFAULT_SWEEP_OMEGA_B
    sweep_blockade: tuple = DEFAULT_SWEEP_BLOCKADE
    sweep_n: Optional[int] = None
    flagged_point: Optional[tuple] = None
    base_dir: Path = field(default=Path("."), repr=False)

    def echo(self) -> dict:
        return {"name": self.model, **{k: v for k, v in self.params.items()}}


def _strict(section: dict, allowed, where: str) -> dict:
    if section is None:
        return {}
    if not isinstance(section, dict):
        raise ConfigError(f"{where} must be a mapping")
    unknown = set(section) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")
    return section


def _number(v, where, positive=False, integer=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where} must be a number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(f"{where} must be an integer")
    if positive and not v > 0:
        raise ConfigError(f"{where} must be positive")
    return int(v) if integer else float(v)


def parse_config(raw: dict, base_dir: Path = Path(".")) -> RunConfig:
    """Validate a raw mapping; unknown keys abort before any computation."""
    raw = _strict(raw, TOP_KEYS, "config")
    model = raw.get("model")
    if model not in MODELS:
        raise ConfigError(f"model must be one of {MODELS}, got {model!r}")
    cfg = RunConfig(model=model, params={}, base_dir=base_dir)
    if "n_trajectories" in raw:
        cfg.n_trajectories = _number(raw["n_trajectories"], "n_trajectories", True, True)
    if "master_seed" in raw:
        cfg.master_seed = _number(raw["master_seed"], "master_seed", integer=True)
    if "workers" in raw:
        cfg.workers = _number(raw["workers"], "workers", True, True)
    integ = _strict(raw.get("integrator"), {"rtol", "atol"}, "integrator")
    cfg.rtol = _number(integ.get("rtol", cfg.rtol), "integrator.rtol", True)
    cfg.atol = _number(integ.get("atol", cfg.atol), "integrator.atol", True)
    out = _strict(raw.get("output"), {"dir"}, "output")
    if "dir" in out:
        cfg.out_dir = base_dir / out["dir"]
    orc = _strict(raw.get("oracle"), {"aapc_check"}, "oracle")
    cfg.aapc_check = bool(orc.get("aapc_check", True))

    if model in ("amplitude_damping", "dephasing"):
        sec = _strict(raw.get(model), CHANNEL_KEYS, model)
        missing = CHANNEL_KEYS - set(sec)
        if missing:
            raise ConfigError(f"{model} needs {sorted(missing)}")
        cfg.params = {
            "rate_per_s": _number(sec["rate_per_s"], f"{model}.rate_per_s"),
            "duration_s": _number(sec["duration_s"], f"{model}.duration_s", True),
        }
        if cfg.params["rate_per_s"] < 0:
            raise ConfigError("rate_per_s must be non-negative")
    elif model == "custom_matrix_file":
        sec = _strict(raw.get(model), {"path"}, model)
        if "path" not in sec:
            raise ConfigError("custom_matrix_file needs 'path'")
        path = base_dir / sec["path"]
        if not path.is_file():
            raise ConfigError(f"custom model file {path} does not exist")
        cfg.params = {"path": str(sec["path"])}
    else:
        sec = _strict(raw.get("rydberg"), RYDBERG_KEYS, "rydberg")
        params = {}
        for k, v in sec.items():
            if k == "branching":
                if not isinstance(v, list) or len(v) != 3:
                    raise ConfigError("rydberg.branching must be a list of three fractions")
                params[k] = [_number(c, "rydberg.branching") for c in v]
            elif k == "delta_e0_mhz_over_2pi" and v is None:
                params[k] = None
            else:
                params[k] = _number(v, f"rydberg.{k}")
        cfg.params = params
        try:
            rydberg_params(cfg.params)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    conv = _strict(raw.get("converge"), {"n_list", "repeats"}, "converge")
    if "n_list" in conv:
        cfg.n_list = tuple(_number(n, "converge.n_list", True, True) for n in conv["n_list"])
    if "repeats" in conv:
        cfg.repeats = _number(conv["repeats"], "converge.repeats", True, True)
    sw = _strict(
        raw.get("sweep"),
        {"omega_b_mhz_over_2pi", "blockade_mhz_over_2pi", "n_trajectories", "flagged_point"},
        "sweep",
    )
    if "omega_b_mhz_over_2pi" in sw:
        cfg.sweep_omega_b = tuple(_number(v, "sweep.omega_b", True) for v in sw["omega_b_mhz_over_2pi"])
    if "blockade_mhz_over_2pi" in sw:
        cfg.sweep_blockade = tuple(_number(v, "sweep.blockade", True) for v in sw["blockade_mhz_over_2pi"])
    if "n_trajectories" in sw:
        cfg.sweep_n = _number(sw["n_trajectories"], "sweep.n_trajectories", True, True)
    if "flagged_point" in sw:
        fp = sw["flagged_point"]
        if not isinstance(fp, list) or len(fp) != 2:
            raise ConfigError("sweep.flagged_point must be [omega_b_mhz, blockade_mhz]")
        cfg.flagged_point = tuple(_number(v, "sweep.flagged_point", True) for v in fp)
    return cfg


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return parse_config(raw or {}, path.parent)


def rydberg_params(params: dict) -> rydberg.RydbergParams:
    kw = {RYDBERG_KEYS[k]: v for k, v in params.items()}
    defaults = {
        "Delta": 2000.0, "OmegaR": 118.0, "OmegaB": 39.0, "B": 20.0,
        "gamma_p": 6.07, "gamma_r": 0.53e-3, "gamma_d": 1.0e-3,
    }
    for k, v in defaults.items():
        kw.setdefault(k, v)
    return rydberg.RydbergParams.from_mhz(**kw)


def _cmatrix(obj) -> np.ndarray:
    return np.asarray(obj["re"], dtype=float) + 1j * np.asarray(obj.get("im", 0.0), dtype=float)


def load_custom_model(path: Path) -> LindbladModel:
    """Read a JSON model description.

    Keys: ``full_dim``, ``qubit_dims``, optional ``qubit_index_map`` and
    ``loss_indices``, ``segments`` (list of ``{duration_s, hamiltonian}``),
    ``jump_ops`` (list of ``{label, re, im, loss}``) and optional
    ``ideal_unitary``. Matrices are ``{"re": [[...]], "im": [[...]]}``.
    """
    try:
        d = json.loads(Path(path).read_text())
        spec = HilbertSpec(
            int(d["full_dim"]),
            tuple(d.get("qubit_dims", (2,))),
            tuple(d["qubit_index_map"]) if "qubit_index_map" in d else None,
            tuple(d.get("loss_indices", ())),
        )
        segs = tuple(Segment(float(s["duration_s"]), _cmatrix(s["hamiltonian"])) for s in d["segments"])
        jumps = tuple(
            JumpOperator(j.get("label", f"L{k}"), _cmatrix(j), bool(j.get("loss", False)))
            for k, j in enumerate(d.get("jump_ops", ()))
        )
        ideal = _cmatrix(d["ideal_unitary"]) if "ideal_unitary" in d else np.eye(spec.dq)
        return LindbladModel(spec, segs, jumps, ideal)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid custom model file {path}: {exc}") from exc


def build_model(cfg: RunConfig, params: dict | None = None) -> LindbladModel:
    params = cfg.params if params is None else params
    if cfg.model == "amplitude_damping":
        return channels.amplitude_damping_model(params["rate_per_s"], params["duration_s"])
    if cfg.model == "dephasing":
        return channels.dephasing_model(params["rate_per_s"], params["duration_s"])
    if cfg.model == "custom_matrix_file":
        return load_custom_model(cfg.base_dir / params["path"])
    return rydberg.build_cphase_model(rydberg_params(params))


def ideal_unitary(model: LindbladModel) -> np.ndarray:
    if model.ideal_unitary is not None:
        return np.asarray(model.ideal_unitary, dtype=complex)
    return np.eye(model.spec.dq, dtype=complex)


# ---------------------------------------------------------------- artifacts


def chi_artifact(chi: ChiMatrix, model_echo: dict, metrics: dict) -> dict:
    data = np.asarray(chi.data)
    return {
        "schema_version": SCHEMA_VERSION,
        "basis_labels": list(chi.labels),
        "dq": int(round(np.sqrt(data.shape[0]))),
        "chi": [{"re": float(z.real), "im": float(z.imag)} for z in data.reshape(-1)],
        "meta": {
            "n": "exact" if chi.n is None else int(chi.n),
            "S": None if chi.n is None else int(chi.S),
            "J": None if chi.n is None else int(chi.J),
            "disposed": None if chi.n is None else int(chi.disposed),
            "seed": chi.seed,
            "model": model_echo,
            "metrics": {k: (None if v is None else float(v)) for k, v in metrics.items()},
        },
    }


def dumps_artifact(art: dict) -> str:
    return json.dumps(art, indent=1) + "\n"


def write_artifact(art: dict, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_artifact(art))
    return path


def read_artifact(path: str | Path) -> tuple:
    """Return ``(ChiMatrix, raw_dict)``; the schema version is checked."""
    art = json.loads(Path(path).read_text())
    if art.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"unsupported chi artifact schema {art.get('schema_version')!r}")
    d2 = len(art["basis_labels"])
    data = np.array([complex(e["re"], e["im"]) for e in art["chi"]]).reshape(d2, d2)
    meta = art["meta"]
    n = None if meta["n"] == "exact" else meta["n"]
    chi = ChiMatrix(
        data, tuple(art["basis_labels"]), n, meta["S"] or 0, meta["J"] or 0,
        meta["disposed"] or 0, meta["seed"],
    )
    return chi, art


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path: Path, columns, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])
    return path


# --------------------------------------------------------------- experiments


def run_characterize(cfg: RunConfig, model: LindbladModel | None = None, seed: int | None = None,
                     n: int | None = None):
    """Run the ensemble characterisation; returns ``(Characterization, metrics, chi_ideal)``."""
    model = model or build_model(cfg)
    basis = pauli_basis(len(model.spec.qubit_dims)) if all(
        d == 2 for d in model.spec.qubit_dims) else None
    if basis is None:
        raise ConfigError("only qubit registers (qubit_dims of 2) are supported")
    chi_ideal = ideal_chi(ideal_unitary(model), basis)
    res = characterize(
        TrajectoryEngine(model), basis, n or cfg.n_trajectories,
        cfg.master_seed if seed is None else seed, cfg.workers or 1,
    )
    return res, res.metrics(chi_ideal), chi_ideal


def cmd_characterize(cfg: RunConfig) -> dict:
    res, metrics, _ = run_characterize(cfg)
    art = chi_artifact(res.chi, cfg.echo(), metrics)
    path = write_artifact(art, cfg.out_dir / "chi.json")
    c = res.chi
    print(
        f"chi written to {path}\n"
        f"  n={c.n} S={c.S} J={c.J} disposed={c.disposed} trace={c.trace:.6f}\n"
        f"  T={metrics['trace_distance_to_ideal']:.6g} F={metrics['fidelity_to_ideal']:.6g} "
        f"bound={metrics['nojump_upper_bound']}"
    )
    return art


def cmd_oracle(cfg: RunConfig) -> dict:
    model = build_model(cfg)
    if model.spec.dq > 4:
        raise ConfigError(f"oracle limited to D_q <= 4, model has D_q={model.spec.dq}")
    basis = pauli_basis(len(model.spec.qubit_dims))
    chi = sqpc_characterize(model, basis, rtol=cfg.rtol, atol=cfg.atol)
    chi_ideal = ideal_chi(ideal_unitary(model), basis)
    metrics = {
        "trace_distance_to_ideal": trace_distance(chi_ideal, chi),
        "fidelity_to_ideal": fidelity(chi_ideal, chi),
        "nojump_upper_bound": None,
    }
    if cfg.aapc_check:
        alt = aapc_characterize_density(model, basis, rtol=cfg.rtol, atol=cfg.atol)
        metrics["aapc_max_abs_difference"] = float(np.abs(alt.data - chi.data).max())
    art = chi_artifact(chi, cfg.echo(), metrics)
    path = write_artifact(art, cfg.out_dir / "chi_oracle.json")
    print(f"exact chi written to {path}; T={metrics['trace_distance_to_ideal']:.6g}")
    return art


def ensemble_seed(master_seed: int, *key: int) -> int:
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def cmd_converge(cfg: RunConfig) -> list:
    if cfg.repeats < 2:
        raise ConfigError("converge needs repeats >= 2")
    model = build_model(cfg)
    engine = TrajectoryEngine(model)
    basis = pauli_basis(len(model.spec.qubit_dims))
    chi_ideal = ideal_chi(ideal_unitary(model), basis)
    rows = []
    for n in cfg.n_list:
        F, T = [], []
        for k in range(cfg.repeats):
            res = characterize(engine, basis, n, ensemble_seed(cfg.master_seed, n, k), cfg.workers or 1)
            F.append(fidelity(chi_ideal, res.chi))
            T.append(trace_distance(chi_ideal, res.chi))
        rows.append({
            "n": n, "mean_F": float(np.mean(F)), "std_F": float(np.std(F, ddof=1)),
            "mean_T": float(np.mean(T)), "std_T": float(np.std(T, ddof=1)),
        })
        log.info("n=%d F=%.5f±%.5f T=%.5f±%.5f", n, rows[-1]["mean_F"], rows[-1]["std_F"],
                 rows[-1]["mean_T"], rows[-1]["std_T"])
    path = write_csv(cfg.out_dir / "converge.csv", CONVERGE_COLUMNS, rows)
    print(f"convergence table written to {path}")
    return rows


def cmd_sweep(cfg: RunConfig) -> tuple:
    """Returns ``(rows, failures)``."""
    if cfg.model != "rydberg_cphase":
        raise ConfigError("sweep is only defined for the rydberg_cphase model")
    n = cfg.sweep_n or cfg.n_trajectories
    basis = pauli_basis(2)
    chi_ideal = ideal_chi(rydberg.ideal_cphase(), basis)
    flagged = cfg.flagged_point or (
        cfg.params.get("omega_b_mhz_over_2pi", 39.0), cfg.params.get("blockade_mhz_over_2pi", 20.0)
    )
    rows, failures, delta = [], [], None
    for i, B in enumerate(cfg.sweep_blockade):
        for j, ob in enumerate(cfg.sweep_omega_b):
            params = dict(cfg.params, omega_b_mhz_over_2pi=ob, blockade_mhz_over_2pi=B)
            try:
                model = rydberg.build_cphase_model(rydberg_params(params))
                res = characterize(TrajectoryEngine(model), basis, n,
                                   ensemble_seed(cfg.master_seed, i, j), cfg.workers or 1)
                m = res.metrics(chi_ideal)
            except (ValueError, ArithmeticError, SimulationError, np.linalg.LinAlgError) as exc:
                log.error("sweep point omega_B=%g MHz, B=%g MHz failed: %s", ob, B, exc)
                failures.append((ob, B, str(exc)))
                continue
            c = res.chi
            rows.append({
                "omega_B_MHz": ob, "B_MHz": B, "T": m["trace_distance_to_ideal"],
                "F": m["fidelity_to_ideal"],
                "upper_bound": m["nojump_upper_bound"] if m["nojump_upper_bound"] is not None else float("nan"),
                "S": c.S, "J": c.J, "n": c.n,
            })
            if (ob, B) == tuple(flagged):
                delta = np.asarray(c.data) - np.asarray(chi_ideal.data)
    path = write_csv(cfg.out_dir / "sweep.csv", SWEEP_COLUMNS, rows)
    print(f"sweep table written to {path} ({len(rows)} points, {len(failures)} failed)")
    if delta is not None:
        labels = basis.labels
        drows = [
            {"m": a, "n": b, "label_m": labels[a], "label_n": labels[b],
             "re": float(delta[a, b].real), "im": float(delta[a, b].imag)}
            for a in range(len(labels)) for b in range(len(labels))
        ]
        write_csv(cfg.out_dir / "delta_chi.csv", DELTA_CHI_COLUMNS, drows)
    return rows, failures


COMMANDS = {
    "characterize": cmd_characterize,
    "oracle": cmd_oracle,
    "converge": cmd_converge,
    "sweep": cmd_sweep,
}


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aawf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--workers", type=int, default=None,
                       help="parallel trajectory workers (default: all cores)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg.master_seed = args.seed
        if args.out is not None:
            cfg.out_dir = Path(args.out)
        if args.workers is not None:
            cfg.workers = args.workers
        elif cfg.workers is None:
            cfg.workers = default_workers()
        if cfg.workers < 1:
            raise ConfigError("--workers must be >= 1")
        result = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SimulationError, IntegrationError, ArithmeticError, np.linalg.LinAlgError,
            ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if args.command == "sweep" and result[1]:
        return EXIT_PARTIAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
