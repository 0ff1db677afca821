"""Classical comparison methods: perturbation theory, greedy and random bases."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .molecule import DerivedFrame, MoleculeModel, derive_frame
from .qsci import GAMMA, BasisSet, SubspaceResult, combine_references, pick_by_overlap, select_basis
from .trotter import Distribution
from .watson import RovibBasisState, WatsonHamiltonian

__all__ = [
    "ResonanceError",
    "BaselineReport",
    "harmonic_energies",
    "pt2_energies",
    "pt1_distribution",
    "pt1_energies",
    "optimal_greedy",
    "optimal_combined",
    "random_baseline",
    "write_report_csv",
]

RESONANCE_TOL = 1.0  # cm^-1
GREEDY_TIE = 1e-10  # cm^-1


class ResonanceError(ArithmeticError):
    """A perturbative denominator is (nearly) zero."""


@dataclass
class BaselineReport:
    method: str
    references: list
    energies: np.ndarray  # cm^-1, one per reference (mean for random)
    sizes: list = field(default_factory=list)
    std: np.ndarray | None = None
    extra: dict = field(default_factory=dict)


def _refs(references, J=0):
    return [r if isinstance(r, RovibBasisState) else RovibBasisState.from_label(str(r), J, 0)
            for r in references]


def harmonic_energies(model: MoleculeModel, quanta) -> np.ndarray:
    """Sum_k (v_k + 1/2) omega_k in cm^-1 for rows of quanta (extra columns ignored)."""
    q = np.atleast_2d(np.asarray(quanta))[:, : model.n_vib]
    return (q + 0.5) @ np.asarray(model.omega_cm1)


def _perturbation_column(W: WatsonHamiltonian, ref: RovibBasisState):
    """<v'|H'|ref> over the full basis, H' = H - H_HO, and the HO energies."""
    model = W.model
    quanta = W.basis.quanta
    col = W.matrix_elements(quanta, np.repeat(W.quanta([ref]), len(quanta), axis=0))
    e_ho = harmonic_energies(model, quanta)
    i = W.basis.index(ref)
    col = col.copy()
    col[i] -= e_ho[i]
    return col, e_ho, i


def _pt1_coefficients(W, ref):
    col, e_ho, i = _perturbation_column(W, ref)
    denom = e_ho[i] - e_ho
    denom[i] = np.inf
    near = (np.abs(denom) <= RESONANCE_TOL) & (np.abs(col) > 0)
    if np.any(near):
        bad = W.basis.state(int(np.flatnonzero(near)[0]))
        raise ResonanceError(f"near-degenerate denominator between {ref} and {bad}")
    return col, e_ho, i, denom


def pt2_energies(model: MoleculeModel, frame: DerivedFrame | None, vmax: int, references=GAMMA,
                 hamiltonian: WatsonHamiltonian | None = None) -> dict:
    """Second-order Rayleigh-Schroedinger energies around the harmonic oscillator.

    Returns ``{label: {"E": total, "E_HO", "E1", "E2"}}`` in cm^-1.

    Raises
    ------
    ResonanceError
        If a coupled state lies within 1 cm^-1 of the reference in zeroth order.
    """
    W = WatsonHamiltonian(model, vmax, 0, frame) if hamiltonian is None else hamiltonian
    out = {}
    for ref in _refs(references, W.J):
        col, e_ho, i, denom = _pt1_coefficients(W, ref)
        e1 = float(col[i].real)
        mask = np.arange(len(col)) != i
        e2 = float(np.sum(np.abs(col[mask]) ** 2 / denom[mask]))
        out[ref.vib_label] = {"E": float(e_ho[i]) + e1 + e2, "E_HO": float(e_ho[i]), "E1": e1, "E2": e2}
    return out


def pt1_distribution(model: MoleculeModel, frame: DerivedFrame | None, vmax: int, reference,
                     hamiltonian: WatsonHamiltonian | None = None) -> Distribution:
    """|<v'|psi_PT>|^2 for the unnormalized first-order state (reference weight 1)."""
    W = WatsonHamiltonian(model, vmax, 0, frame) if hamiltonian is None else hamiltonian
    ref = _refs([reference], W.J)[0]
    col, e_ho, i, denom = _pt1_coefficients(W, ref)
    c = col / denom
    c[i] = 1.0
    return Distribution(np.abs(c) ** 2, vmax, W.J, model.n_vib, "pt1")


def pt1_energies(model, frame, vmax: int, references=GAMMA, eps: float = 1e-4) -> BaselineReport:
    """Select states with p_PT > eps per reference, solve, combine."""
    frame = derive_frame(model) if frame is None else frame
    W = WatsonHamiltonian(model, vmax, 0, frame)
    subs = []
    for ref in _refs(references):
        omega = select_basis(pt1_distribution(model, frame, vmax, ref, W), eps, BasisSet([ref]))
        subs.append(_solve(W, omega, ref))
    comb = combine_references(subs, model, frame, W)
    return BaselineReport("pt1", [r.vib_label for r in _refs(references)], comb.energies,
                          [len(s.basis) for s in subs],
                          extra={"raw": [float(s.picked_energies[0]) for s in subs], "labels": comb.labels})


def _solve(W, omega: BasisSet, ref) -> SubspaceResult:
    H = W.subspace_matrix(W.quanta(list(omega)))
    w, v = np.linalg.eigh(H)
    return SubspaceResult(omega, w, v, (pick_by_overlap(w, v, omega.position(ref)),), ref)


def _block(W: WatsonHamiltonian, ref: RovibBasisState):
    par = W.basis.parities(W.model)
    idx = np.flatnonzero(par == par[W.basis.index(ref)])
    return idx, W.subspace_matrix(W.basis.quanta[idx])


def optimal_greedy(model: MoleculeModel, frame: DerivedFrame | None, vmax: int, reference, max_size: int,
                   hamiltonian: WatsonHamiltonian | None = None) -> dict:
    """Grow a basis one state at a time, each time minimizing the tracked energy.

    The tracked state is the eigenvector with the largest overlap with the
    reference.  Candidates are the states of the reference's parity block;
    ties within 1e-10 cm^-1 go to the lower basis index.

    Returns ``{"sizes", "energies", "bases", "subspaces", "ties"}``.
    """
    W = WatsonHamiltonian(model, vmax, 0, frame) if hamiltonian is None else hamiltonian
    ref = _refs([reference], W.J)[0]
    idx, Hb = _block(W, ref)
    if max_size > len(idx):
        raise ValueError(f"max_size {max_size} exceeds the parity block dimension {len(idx)}")
    pos = {int(b): k for k, b in enumerate(idx)}
    chosen = [pos[W.basis.index(ref)]]
    energies, bases, subs, ties = [], [], [], 0
    while True:
        sub = Hb[np.ix_(chosen, chosen)]
        w, v = np.linalg.eigh(sub)
        j = pick_by_overlap(w, v, 0)
        omega = BasisSet([W.basis.state(int(idx[c])) for c in chosen])
        energies.append(float(w[j]))
        bases.append(omega)
        subs.append(SubspaceResult(omega, w, v, (j,), ref))
        if len(chosen) >= max_size:
            break
        best, best_e = None, np.inf
        for c in range(len(idx)):
            if c in chosen:
                continue
            trial = chosen + [c]
            wt, vt = np.linalg.eigh(Hb[np.ix_(trial, trial)])
            e = wt[pick_by_overlap(wt, vt, 0)]
            if e < best_e - GREEDY_TIE:
                best, best_e = c, e
            elif abs(e - best_e) <= GREEDY_TIE:
                ties += 1  # candidates are scanned by increasing index; keep the first
        chosen.append(best)
    return {"sizes": list(range(1, len(energies) + 1)), "energies": np.array(energies), "bases": bases,
            "subspaces": subs, "ties": ties}


def optimal_combined(model, frame, vmax: int, max_size: int, references=GAMMA) -> BaselineReport:
    """Greedy curves for every reference combined at each basis size."""
    frame = derive_frame(model) if frame is None else frame
    W = WatsonHamiltonian(model, vmax, 0, frame)
    runs = [optimal_greedy(model, frame, vmax, r, max_size, W) for r in _refs(references)]
    combined = np.array([combine_references([r["subspaces"][k] for r in runs], model, frame, W).energies
                         for k in range(max_size)])
    return BaselineReport("optimal", [r.vib_label for r in _refs(references)], combined,
                          list(range(1, max_size + 1)),
                          extra={"raw": np.array([r["energies"] for r in runs]).T, "ties": [r["ties"] for r in runs]})


def random_baseline(model: MoleculeModel, frame: DerivedFrame | None, vmax: int, size: int, trials: int,
                    seed=None, references=GAMMA) -> BaselineReport:
    """Statistics of energies from random bases containing the references.

    Each trial draws ``size - len(references)`` further states uniformly
    without replacement from the rest of the J = 0 basis; one shared basis
    serves every reference, whose energy is the eigenvalue of the
    eigenvector overlapping it most.
    """
    W = WatsonHamiltonian(model, vmax, 0, frame)
    refs = _refs(references)
    S = W.basis.size
    if size < len(refs):
        raise ValueError(f"size must be at least {len(refs)}")
    if size > S:
        raise ValueError(f"size {size} exceeds the basis dimension {S}")
    H = W.subspace_matrix(W.basis.quanta)
    ref_idx = np.array([W.basis.index(r) for r in refs])
    pool = np.setdiff1d(np.arange(S), ref_idx)
    rng = np.random.default_rng(seed)
    out = np.empty((trials, len(refs)))
    for t in range(trials):
        pick = np.concatenate([ref_idx, rng.choice(pool, size - len(refs), replace=False)])
        w, v = np.linalg.eigh(H[np.ix_(pick, pick)])
        out[t] = [w[pick_by_overlap(w, v, k)] for k in range(len(refs))]
    return BaselineReport("random", [r.vib_label for r in refs], out.mean(axis=0), [size],
                          std=out.std(axis=0, ddof=1) if trials > 1 else np.zeros(len(refs)),
                          extra={"samples": out, "seed": seed, "trials": trials})


def write_report_csv(report: BaselineReport, path, reference_energy: float = 0.0) -> None:
    """Rows ``method, size, reference, energy_cm1, std_cm1`` (energies minus ``reference_energy``)."""
    E = np.atleast_2d(report.energies)
    sizes = report.sizes if len(report.sizes) == E.shape[0] else [""] * E.shape[0]
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["method", "size", "reference", "energy_cm1", "std_cm1"])
        for row, n in zip(E, sizes):
            for k, lab in enumerate(report.references):
                sd = "" if report.std is None else f"{report.std[k]:.4f}"
                wr.writerow([report.method, n, lab, f"{row[k] - reference_energy:.4f}", sd])
