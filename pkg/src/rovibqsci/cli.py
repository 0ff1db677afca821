"""Command-line entry point.

Verbs: ``spectrum``, ``pauli``, ``qsci``, ``baseline``, ``model-validate``.

Every run resolves its configuration from built-in defaults, then an
optional YAML file (``--config``), then command-line flags, later sources
winning.  A ``manifest.yaml`` written to the output directory records the
resolved configuration, so ``--config out/manifest.yaml`` replays a run.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .baselines import (BaselineReport, optimal_combined, pt1_energies, pt2_energies, random_baseline,
                        write_report_csv)
from .molecule import (ModelParseError, ModelValidationError, bundled_model_path, derive_frame,
                       eckart_residuals, load_model)
from .pauli import (DROP_TOL, cutoff_filter, fit_Lq_vs_J, pauli_decompose_factored, term_statistics,
                    write_pauli_sum)
from .qsci import GAMMA, BasisSet, Schedule, assign_labels, exact_levels, iter_pipeline, write_results_csv
from .trotter import write_distribution
from .units import CM1_TO_HARTREE, FS_TO_AU
from .watson import DENSE_LIMIT, DenseLimitError, TermGroup, WatsonHamiltonian, dense_spectrum

log = logging.getLogger("rovibqsci")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3

DEFAULTS = {
    "spectrum": {"vmax": 3, "J": 0, "groups": "ALL", "n_lowest": 20},
    "pauli": {"vmax": 3, "J": 0, "cutoff": 0.0, "direction": "above", "tol": DROP_TOL, "tol_unit": "cm1",
              "fit_J": []},
    "qsci": {"vmax": 3, "J": 0, "references": list(GAMMA), "points": list(range(8)), "mode": "steps",
             "tau": 10.0, "tau_unit": "au", "n_steps": 1, "eps": 1e-4, "lam": 110.0, "n_shot": 0,
             "seed": None, "order": "descending", "exact": True},
    "baseline": {"method": "pt2", "vmax": 3, "references": list(GAMMA), "eps": 1e-4, "max_size": 20,
                 "size": 20, "trials": 1000, "seed": 0},
    "model-validate": {},
}
COMMON = {"model": None, "model_sha256": None}


class ConfigError(ValueError):
    """Invalid configuration or command-line input."""


# --- configuration ----------------------------------------------------------

def _csv_list(text, cast):
    return [cast(x) for x in str(text).split(",") if x.strip()]


def load_config(path, verb: str) -> dict:
    """Read a YAML config file; a run manifest is accepted and its ``config`` used."""
    try:
        with open(path) as fh:
            d = yaml.safe_load(fh) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(d, dict):
        raise ConfigError(f"config {path} must be a mapping")
    if "config" in d and "verb" in d:
        if d["verb"] != verb:
            raise ConfigError(f"manifest {path} is for verb {d['verb']!r}, not {verb!r}")
        d = d["config"]
    return d


def resolve_config(verb: str, file_cfg: dict | None, flags: dict) -> dict:
    """Merge defaults < file < flags; unknown keys are rejected."""
    cfg = {**COMMON, **DEFAULTS[verb]}
    for source in (file_cfg or {}, {k: v for k, v in flags.items() if v is not None}):
        unknown = set(source) - set(cfg)
        if unknown:
            raise ConfigError(f"unknown {verb} option(s): {', '.join(sorted(unknown))}")
        cfg.update(source)
    return cfg


def _file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _load_model(cfg: dict):
    path = Path(cfg["model"]) if cfg["model"] else bundled_model_path()
    if not path.is_file():
        raise ConfigError(f"model file {path} not found")
    sha = _file_sha256(path)
    if cfg.get("model_sha256") and cfg["model_sha256"] != sha:
        raise ConfigError(f"model file {path} does not match the recorded hash")
    cfg["model"], cfg["model_sha256"] = str(path), sha
    model = load_model(path)
    return model, derive_frame(model)


class Run:
    """Output directory with a manifest written on exit (success or failure)."""

    def __init__(self, verb: str, cfg: dict, out):
        self.verb, self.cfg = verb, cfg
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.outputs: list = []
        self.started = datetime.now(timezone.utc).isoformat()

    def path(self, name: str) -> Path:
        if name not in self.outputs:
            self.outputs.append(name)
        p = self.out / name
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def finish(self, status: str = "ok", error: str | None = None) -> None:
        manifest = {
            "tool": "rovibqsci", "version": __version__, "verb": self.verb,
            "config": _plain(self.cfg), "status": status,
            "units": {"energy": "cm^-1", "time": "atomic units", "cm1_to_hartree": CM1_TO_HARTREE},
            "started": self.started, "finished": datetime.now(timezone.utc).isoformat(),
            "outputs": list(self.outputs),
        }
        if error:
            manifest["error"] = error
            (self.out / "FAILED").write_text(error + "\n")
        with open(self.out / "manifest.yaml", "w") as fh:
            yaml.safe_dump(manifest, fh, sort_keys=False)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


# --- verbs ------------------------------------------------------------------

def cmd_spectrum(cfg: dict, run: Run) -> None:
    model, frame = _load_model(cfg)
    groups = TermGroup.parse(cfg["groups"])
    vmax, J = int(cfg["vmax"]), int(cfg["J"])
    size = (vmax + 1) ** model.n_vib * (2 * J + 1)
    if size > DENSE_LIMIT:
        raise DenseLimitError(f"basis dimension {size} exceeds the dense limit {DENSE_LIMIT}")
    W = WatsonHamiltonian(model, int(cfg["vmax"]), int(cfg["J"]), frame)
    w, v = dense_spectrum(W.matrix(groups), int(cfg["n_lowest"]), vectors=True)
    basis = BasisSet(W.basis.states())
    par = W.basis.parities(model)
    with open(run.path("spectrum.csv"), "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["index", "energy_cm1", "delta_cm1", "parity", "label"])
        for i, e in enumerate(w):
            weights = np.abs(v[:, i]) ** 2
            parity = int(par[np.argmax(weights)])
            wr.writerow([i, f"{e:.4f}", f"{e - w[0]:.4f}", parity, assign_labels(v[:, i], basis, frame, W.J)])
    print(f"groups {'+'.join(g.value for g in groups)}  vmax {W.vmax}  J {W.J}  lowest {w[0]:.4f} cm^-1")


def cmd_pauli(cfg: dict, run: Run) -> None:
    model, frame = _load_model(cfg)
    unit = cfg["tol_unit"]
    if unit not in ("cm1", "hartree"):
        raise ConfigError("tol_unit must be 'cm1' or 'hartree'")
    tol = float(cfg["tol"]) * (1.0 / CM1_TO_HARTREE if unit == "hartree" else 1.0)
    ps = pauli_decompose_factored(model, frame, int(cfg["vmax"]), int(cfg["J"]), tol=tol)
    full = len(ps)
    lam = float(cfg["cutoff"])
    if lam > 0:
        ps = cutoff_filter(ps, lam, cfg["direction"])
    write_pauli_sum(ps, run.path("pauli_sum.txt"))
    with open(run.path("pauli_stats.csv"), "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["weight", "count"])
        if len(ps):
            wr.writerows(term_statistics(ps)["by_weight"].items())
    print(f"N_q {ps.n_qubits}  L_q {full}" + (f"  kept {len(ps)} (cutoff {lam} {cfg['direction']})" if lam > 0 else ""))
    J_list = [int(j) for j in cfg["fit_J"]]
    if J_list:
        fit = fit_Lq_vs_J(model, int(cfg["vmax"]), J_list, frame, tol=tol)
        with open(run.path("pauli_fit.csv"), "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["J", "L_q"])
            wr.writerows(zip(fit["J"], fit["L_q"]))
        print(f"fit L_q = {fit['c']:.4f} J^{fit['kappa']:.4f}")


def _schedule(cfg: dict) -> Schedule:
    unit = cfg["tau_unit"]
    if unit not in ("au", "fs"):
        raise ConfigError("tau_unit must be 'au' or 'fs'")
    scale = FS_TO_AU if unit == "fs" else 1.0
    points = [float(p) for p in cfg["points"]]
    if cfg["mode"] == "steps":
        if any(p != int(p) for p in points):
            raise ConfigError("step-mode schedule points must be integers")
        points = [int(p) for p in points]
    else:
        points = [p * scale for p in points]
    return Schedule(points, cfg["mode"], float(cfg["tau"]) * scale, int(cfg["n_steps"]), float(cfg["eps"]),
                    float(cfg["lam"]), int(cfg["n_shot"]), cfg["seed"], cfg["order"])


def cmd_qsci(cfg: dict, run: Run) -> None:
    model, frame = _load_model(cfg)
    schedule = _schedule(cfg)
    vmax, J = int(cfg["vmax"]), int(cfg["J"])
    exact = None
    if cfg["exact"] and (vmax + 1) ** model.n_vib * (2 * J + 1) <= DENSE_LIMIT:
        exact = exact_levels(model, frame, vmax, J)
    log.info("schedule %s", schedule.as_dict())
    points = []
    for pt in iter_pipeline(model, schedule, cfg["references"], J, vmax, frame):
        points.append(pt)
        for ref, d in pt.distributions.items():
            write_distribution(d, run.path(f"distributions/point{pt.point:g}_{ref}.txt"), eps=1e-14)
        write_results_csv(points, run.path("results.csv"), exact, J)
        sizes = " ".join(f"{k}:{n}" for k, n in pt.sizes.items())
        print(f"point {pt.point:g}  sizes {sizes}  energies " + " ".join(f"{e:.4f}" for e in pt.combined.energies))


def cmd_baseline(cfg: dict, run: Run) -> None:
    model, frame = _load_model(cfg)
    method, vmax, refs = cfg["method"], int(cfg["vmax"]), list(cfg["references"])
    if method == "pt2":
        res = pt2_energies(model, frame, vmax, refs)
        report = BaselineReport("pt2", list(res), np.array([r["E"] for r in res.values()]), [])
    elif method == "pt1":
        report = pt1_energies(model, frame, vmax, refs, float(cfg["eps"]))
        report.sizes = []
    elif method == "optimal":
        report = optimal_combined(model, frame, vmax, int(cfg["max_size"]), refs)
    elif method == "random":
        report = random_baseline(model, frame, vmax, int(cfg["size"]), int(cfg["trials"]), cfg["seed"], refs)
    else:
        raise ConfigError(f"unknown baseline method {method!r}; choose pt2, pt1, optimal or random")
    write_report_csv(report, run.path("baseline.csv"))
    final = np.atleast_2d(report.energies)[-1]
    print(f"{method}: " + " ".join(f"{r}={e:.4f}" for r, e in zip(report.references, final)))


def cmd_model_validate(cfg: dict, run: Run | None) -> None:
    model, frame = _load_model(cfg)
    trans, rot = eckart_residuals(model.masses_u, model.coords, model.L)
    print(f"model {cfg['model']}")
    print(f"sha256 {cfg['model_sha256']}")
    print(f"atoms {' '.join(model.symbols)}  modes {model.n_vib}")
    print("rotational constants (cm^-1) " + " ".join(
        f"{ax}={b:.4f}" for ax, b in zip(model.axes, frame.rotational_constants_cm1)))
    print(f"max |L^T L - 1| {np.abs(model.L.T @ model.L - np.eye(model.n_vib)).max():.2e}  "
          f"Eckart residual {max(np.abs(trans).max(), np.abs(rot).max()):.2e}")
    if model.L_raw is not None:
        print(f"L refinement max change {np.abs(model.L - model.L_raw).max():.2e}")
    print("ok")


COMMANDS = {"spectrum": cmd_spectrum, "pauli": cmd_pauli, "qsci": cmd_qsci, "baseline": cmd_baseline,
            "model-validate": cmd_model_validate}


# --- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rovibqsci", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"rovibqsci {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp, out=True):
        sp.add_argument("--config", help="YAML config file or a previous run's manifest.yaml")
        sp.add_argument("--model", help="molecule model file (default: bundled H2O)")
        if out:
            sp.add_argument("--out", help="output directory (default: rovibqsci_<verb>)")

    sp = sub.add_parser("spectrum", help="dense rovibrational levels for a term-group mask")
    common(sp)
    sp.add_argument("--vmax", type=int)
    sp.add_argument("--J", type=int)
    sp.add_argument("--groups", help="e.g. RR+HO+ANHARM, or ALL")
    sp.add_argument("--n-lowest", dest="n_lowest", type=int)

    sp = sub.add_parser("pauli", help="Pauli decomposition and term statistics")
    common(sp)
    sp.add_argument("--vmax", type=int)
    sp.add_argument("--J", type=int)
    sp.add_argument("--cutoff", type=float, help="keep terms by |h| relative to this value (cm^-1)")
    sp.add_argument("--direction", choices=["above", "below"])
    sp.add_argument("--tol", type=float, help="drop coefficients with |h| <= tol")
    sp.add_argument("--tol-unit", dest="tol_unit", choices=["cm1", "hartree"])
    sp.add_argument("--fit-J", dest="fit_J", type=lambda s: _csv_list(s, int),
                    help="comma-separated J values for an L_q = c J^kappa fit")

    sp = sub.add_parser("qsci", help="sampled-basis pipeline over a schedule")
    common(sp)
    sp.add_argument("--vmax", type=int)
    sp.add_argument("--J", type=int)
    sp.add_argument("--references", type=lambda s: _csv_list(s, str), help="e.g. 000,010,020,100,001")
    sp.add_argument("--points", type=lambda s: _csv_list(s, float), help="comma-separated schedule points")
    sp.add_argument("--mode", choices=["steps", "tau"])
    sp.add_argument("--tau", type=float)
    sp.add_argument("--tau-unit", dest="tau_unit", choices=["au", "fs"])
    sp.add_argument("--n-steps", dest="n_steps", type=int)
    sp.add_argument("--eps", type=float)
    sp.add_argument("--lam", type=float, help="Trotter term cutoff (cm^-1)")
    sp.add_argument("--n-shot", dest="n_shot", type=int, help="0 samples exact probabilities")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--order", choices=["descending", "ascending", "lexicographic"])
    sp.add_argument("--no-exact", dest="exact", action="store_const", const=False,
                    help="skip the dense reference spectrum")

    sp = sub.add_parser("baseline", help="classical comparison methods")
    common(sp)
    sp.add_argument("--method", choices=["pt2", "pt1", "optimal", "random"])
    sp.add_argument("--vmax", type=int)
    sp.add_argument("--references", type=lambda s: _csv_list(s, str))
    sp.add_argument("--eps", type=float)
    sp.add_argument("--max-size", dest="max_size", type=int)
    sp.add_argument("--size", type=int)
    sp.add_argument("--trials", type=int)
    sp.add_argument("--seed", type=int)

    sp = sub.add_parser("model-validate", help="parse and validate a molecule model file")
    common(sp, out=False)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    flags = {k: v for k, v in vars(args).items() if k not in ("verb", "config", "out", "verbose")}
    run = None
    try:
        file_cfg = load_config(args.config, args.verb) if args.config else None
        cfg = resolve_config(args.verb, file_cfg, flags)
        log.info("1 cm^-1 = %.10e hartree", CM1_TO_HARTREE)
        if args.verb != "model-validate":
            run = Run(args.verb, cfg, args.out or f"rovibqsci_{args.verb.replace('-', '_')}")
        COMMANDS[args.verb](cfg, run)
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        return _fail(run, exc, EXIT_NUMERICAL)
    except (ValueError, KeyError, TypeError, OSError, ModelParseError, ModelValidationError) as exc:
        return _fail(run, exc, EXIT_VALIDATION)
    if run is not None:
        run.finish()
    return EXIT_OK


def _fail(run: Run | None, exc: Exception, code: int) -> int:
    msg = f"{type(exc).__name__}: {exc}"
    print(f"error: {msg}", file=sys.stderr)
    if run is not None:
        run.finish("failed", msg)
    return code
