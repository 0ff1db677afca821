"""Quantum-selected configuration interaction on sampled rovibrational bases.

For each reference state the Trotter trial state is sampled, states above a
probability threshold are accumulated into a basis, the Hamiltonian is
diagonalized in that basis and the eigenvector with the largest overlap with
the reference is kept.  The kept states from all references are combined by
canonical orthogonalization and a final small diagonalization.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .molecule import DerivedFrame, MoleculeModel, derive_frame
from .operators import asymmetric_top_solve
from .pauli import pauli_decompose_factored
from .trotter import (Distribution, exact_distribution, parity_postselect, prepare_basis_state,
                      sample_shots, trotter_evolve)
from .watson import RovibBasisState, WatsonHamiltonian, dense_spectrum

__all__ = [
    "GAMMA",
    "BasisSet",
    "Schedule",
    "SubspaceResult",
    "CombinedResult",
    "PipelinePoint",
    "select_basis",
    "subspace_hamiltonian",
    "subspace_solve",
    "pick_by_overlap",
    "combine_references",
    "union_basis",
    "extend_to_J",
    "assign_labels",
    "exact_levels",
    "iter_pipeline",
    "run_pipeline",
    "write_results_csv",
    "RESULT_COLUMNS",
]

#: The five lowest vibrational states of a triatomic, used as references.
GAMMA = ("000", "010", "020", "100", "001")

DENSE_SUBSPACE_LIMIT = 2000
ORTH_CUTOFF = 1e-8
LABEL_AMBIGUITY = 1e-6

RESULT_COLUMNS = ("schedule_point", "reference", "omega_size", "raw_energy_cm1",
                  "combined_energy_cm1", "label", "exact_energy_cm1", "error_cm1")


class BasisSet:
    """Ordered, duplicate-free set of basis states sharing one J."""

    def __init__(self, states=(), provenance: dict | None = None):
        self._states: list = []
        self._index: dict = {}
        self.provenance = dict(provenance or {})
        for s in states:
            self.add(s)

    def add(self, state: RovibBasisState) -> bool:
        if state in self._index:
            return False
        if self._states and state.J != self._states[0].J:
            raise ValueError(f"state {state} has J={state.J}, basis has J={self._states[0].J}")
        self._index[state] = len(self._states)
        self._states.append(state)
        return True

    def __len__(self):
        return len(self._states)

    def __iter__(self):
        return iter(self._states)

    def __contains__(self, state):
        return state in self._index

    def __getitem__(self, i):
        return self._states[i]

    def __eq__(self, other):
        return isinstance(other, BasisSet) and self._states == other._states

    def __repr__(self):
        return f"BasisSet(size={len(self)})"

    @property
    def J(self) -> int | None:
        return self._states[0].J if self._states else None

    @property
    def states(self) -> list:
        return list(self._states)

    def position(self, state: RovibBasisState) -> int:
        return self._index[state]

    def copy(self) -> "BasisSet":
        return BasisSet(self._states, self.provenance)


@dataclass(frozen=True)
class Schedule:
    """Sequence of trial-state parameters.

    ``mode="steps"`` varies the number of Trotter steps at fixed ``tau``;
    ``mode="tau"`` varies the time step (a.u.) at fixed ``n_steps``.
    ``n_shot=0`` selects from exact probabilities.
    """

    points: tuple
    mode: str = "steps"
    tau: float = 10.0
    n_steps: int = 1
    eps: float = 1e-4
    lam: float = 110.0
    n_shot: int = 0
    seed: int | None = None
    order: str = "descending"

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        if self.mode not in ("steps", "tau"):
            raise ValueError(f"schedule mode must be 'steps' or 'tau', got {self.mode!r}")
        if self.eps <= 0:
            raise ValueError("threshold eps must be positive")
        if not self.points or any(b <= a for a, b in zip(self.points, self.points[1:])):
            raise ValueError("schedule points must be non-empty and strictly increasing")
        if any(p < 0 for p in self.points):
            raise ValueError("schedule points must be non-negative")

    def parameters(self, point):
        """(tau, n_steps) at one schedule point."""
        return (self.tau, int(point)) if self.mode == "steps" else (float(point), self.n_steps)

    def as_dict(self) -> dict:
        return {"points": list(self.points), "mode": self.mode, "tau": self.tau, "n_steps": self.n_steps,
                "eps": self.eps, "lam": self.lam, "n_shot": self.n_shot, "seed": self.seed,
                "order": self.order}


@dataclass
class SubspaceResult:
    basis: BasisSet
    energies: np.ndarray
    vectors: np.ndarray
    picked: tuple = ()  # column indices of the kept eigenvectors
    reference: RovibBasisState | None = None

    @property
    def picked_energies(self) -> np.ndarray:
        return self.energies[list(self.picked)]


@dataclass
class CombinedResult:
    energies: np.ndarray
    vectors: np.ndarray  # columns over ``basis``
    basis: BasisSet
    labels: list
    max_overlap: float
    rank: int


@dataclass
class PipelinePoint:
    point: float
    subspaces: dict  # reference label -> SubspaceResult
    combined: CombinedResult
    sizes: dict = field(default_factory=dict)
    distributions: dict = field(default_factory=dict)  # reference label -> Distribution


# --- helpers -----------------------------------------------------------------

class _HamiltonianCache:
    def __init__(self, model, frame):
        self.model, self.frame = model, frame
        self._store = {}

    def get(self, vmax: int, J: int) -> WatsonHamiltonian:
        key = (vmax, J)
        if key not in self._store:
            self._store[key] = WatsonHamiltonian(self.model, vmax, J, self.frame)
        return self._store[key]


def _as_state(ref, J: int = 0) -> RovibBasisState:
    return ref if isinstance(ref, RovibBasisState) else RovibBasisState.from_label(str(ref), J, 0)


def _eigh(H: np.ndarray, n: int | None = None):
    size = H.shape[0]
    if size <= DENSE_SUBSPACE_LIMIT:
        return scipy.linalg.eigh(H)
    k = min(n or 10, size - 1)
    w, v = scipy.sparse.linalg.eigsh(H, k=k, which="SA", tol=1e-12)
    order = np.argsort(w)
    return w[order], v[:, order]


# --- operations --------------------------------------------------------------

def select_basis(d: Distribution, eps: float, carry: BasisSet | None = None) -> BasisSet:
    """``carry`` followed by new states with p > eps in descending probability."""
    out = BasisSet() if carry is None else carry.copy()
    idx = np.flatnonzero(d.probs > eps)
    idx = idx[np.lexsort((idx, -d.probs[idx]))]
    basis = d.basis
    for i in idx:
        out.add(basis.state(int(i)))
    return out


def subspace_hamiltonian(omega, model: MoleculeModel, frame: DerivedFrame | None = None,
                         hamiltonian: WatsonHamiltonian | None = None) -> np.ndarray:
    """Dense H over the states of ``omega`` from individual matrix elements."""
    states = list(omega)
    if not states:
        raise ValueError("empty basis")
    Js = {s.J for s in states}
    if len(Js) != 1:
        raise ValueError(f"basis mixes J values {sorted(Js)}")
    J = Js.pop()
    vmax = max(max(s.v) for s in states)
    if hamiltonian is None or hamiltonian.J != J or hamiltonian.vmax < vmax:
        hamiltonian = WatsonHamiltonian(model, vmax, J, frame)
    return hamiltonian.subspace_matrix(hamiltonian.quanta(states))


def pick_by_overlap(energies, vectors, ref_position: int, tol: float = 1e-12) -> int:
    """Column with the largest |<ref|phi>|; near-ties go to the lower energy."""
    ov = np.abs(np.asarray(vectors)[ref_position, :])
    best = ov.max()
    cands = np.flatnonzero(ov >= best - tol)
    return int(cands[np.argmin(np.asarray(energies)[cands])])


def _pick_rotational(energies, vectors, basis: BasisSet, ref: RovibBasisState, n: int) -> tuple:
    # Largest weight on the reference vibrational state, summed over K.
    rows = [i for i, s in enumerate(basis) if s.v == ref.v]
    w = np.sum(np.abs(vectors[rows, :]) ** 2, axis=0)
    order = np.lexsort((np.asarray(energies), -np.round(w, 12)))
    return tuple(sorted(int(i) for i in order[:n]))


def subspace_solve(omega: BasisSet, reference: RovibBasisState, model, frame=None, hamiltonian=None,
                   n_pick: int = 1) -> SubspaceResult:
    """Diagonalize H in ``omega`` and keep the state(s) closest to ``reference``.

    With ``n_pick > 1`` (J > 0) the kept states are those with the largest
    weight on the reference vibrational state, summed over K.
    """
    H = subspace_hamiltonian(omega, model, frame, hamiltonian)
    w, v = _eigh(H)
    if n_pick == 1:
        picked = (pick_by_overlap(w, v, omega.position(reference)),)
    else:
        picked = _pick_rotational(w, v, omega, reference, n_pick)
    return SubspaceResult(omega, w, v, picked, reference)


def union_basis(sets) -> BasisSet:
    """Deduplicated union preserving first-seen order."""
    out = BasisSet()
    for s in sets:
        for st in s:
            out.add(st)
    return out


def extend_to_J(omega: BasisSet, J: int) -> BasisSet:
    """Product of the vibrational states of a J=0 basis with K = -J..J."""
    if J < 0:
        raise ValueError("J must be non-negative")
    out = BasisSet(provenance=dict(omega.provenance, J=J))
    for s in omega:
        for K in range(-J, J + 1):
            out.add(RovibBasisState(s.v, J, K))
    return out


def _embed(sub: SubspaceResult, union: BasisSet) -> np.ndarray:
    pos = [union.position(s) for s in sub.basis]
    out = np.zeros((len(union), len(sub.picked)), dtype=complex)
    out[pos, :] = sub.vectors[:, list(sub.picked)]
    return out


def combine_references(subspaces, model, frame=None, hamiltonian=None, cutoff: float = ORTH_CUTOFF,
                       min_rank: int | None = None) -> CombinedResult:
    """Canonical orthogonalization of the kept states and final diagonalization.

    Parameters
    ----------
    subspaces : sequence of SubspaceResult
    cutoff : float
        Overlap eigenvalues below this are discarded.
    min_rank : int, optional
        Raise if fewer independent states survive (default: all of them).
    """
    subspaces = list(subspaces)
    union = union_basis(s.basis for s in subspaces)
    Phi = np.hstack([_embed(s, union) for s in subspaces])
    if Phi.shape[1] < 2:
        raise ValueError("need at least two states to combine")
    H = subspace_hamiltonian(union, model, frame, hamiltonian)
    S = Phi.conj().T @ Phi
    Hc = Phi.conj().T @ H @ Phi
    s, U = np.linalg.eigh(S)
    keep = s > cutoff
    rank = int(keep.sum())
    need = Phi.shape[1] if min_rank is None else min_rank
    if rank < need:
        raise np.linalg.LinAlgError(f"overlap matrix has rank {rank} < {need} after cutoff {cutoff}")
    X = U[:, keep] / np.sqrt(s[keep])
    w, c = np.linalg.eigh(X.conj().T @ Hc @ X)
    vecs = Phi @ (X @ c)
    off = S - np.diag(np.diag(S))
    J = union.J
    labels = [assign_labels(vecs[:, i], union, frame if frame is not None else derive_frame(model), J)
              for i in range(len(w))]
    return CombinedResult(w, vecs, union, labels, float(np.abs(off).max()), rank)


def assign_labels(vector, basis, frame, J: int | None = None, return_overlap: bool = False):
    """Spectroscopic label ``v1v2v3`` (J = 0) or ``v1v2v3 J_KaKc``.

    The label is the product state |v>|Phi_{J_KaKc}> with the largest overlap
    with ``vector``; overlaps within 1e-6 of each other are flagged with a
    trailing ``?``.
    """
    states = list(basis)
    J = states[0].J if J is None else J
    vector = np.asarray(vector)
    vib = {}
    for i, s in enumerate(states):
        vib.setdefault(s.v, {})[s.K] = i
    if J == 0:
        best = sorted(((abs(vector[i]) ** 2, v) for v, ks in vib.items() for i in ks.values()),
                      key=lambda t: -t[0])
        label = "".join(map(str, best[0][1]))
        amb = len(best) > 1 and best[0][0] - best[1][0] < LABEL_AMBIGUITY
        ov = best[0][0]
    else:
        rot = asymmetric_top_solve(frame, J)
        cands = []
        for v, ks in vib.items():
            amp = np.zeros(2 * J + 1, dtype=complex)
            for K, i in ks.items():
                amp[K + J] = vector[i]
            ovs = np.abs(rot.vectors.conj().T @ amp) ** 2
            for r, o in enumerate(ovs):
                cands.append((o, v, r))
        cands.sort(key=lambda t: -t[0])
        o, v, r = cands[0]
        label = "".join(map(str, v)) + " " + rot.label_str(r)
        amb = len(cands) > 1 and o - cands[1][0] < LABEL_AMBIGUITY
        ov = o
    if amb:
        label += "?"
    return (label, float(ov)) if return_overlap else label


def exact_levels(model, frame, vmax: int, J: int = 0, n_lowest: int = 40) -> dict:
    """Dense full-basis levels: ``{"energies", "labels", "by_label", "ground"}``.

    ``by_label`` maps each label to the lowest energy carrying it.
    """
    W = WatsonHamiltonian(model, vmax, J, frame)
    w, v = dense_spectrum(W.matrix(), n_lowest, vectors=True)
    basis = BasisSet(W.basis.states())
    labels = [assign_labels(v[:, i], basis, frame, J) for i in range(len(w))]
    by_label = {}
    for e, lab in zip(w, labels):
        by_label.setdefault(lab.rstrip("?"), float(e))
    ground = float(dense_spectrum(WatsonHamiltonian(model, vmax, 0, frame).matrix(), 1)[0]) if J else float(w[0])
    return {"energies": w, "labels": labels, "by_label": by_label, "ground": ground}


def iter_pipeline(model: MoleculeModel, schedule: Schedule, references=GAMMA, J: int = 0, vmax: int | None = None,
                  frame: DerivedFrame | None = None, pauli_sum=None):
    """Yield one :class:`PipelinePoint` per schedule point.

    Trial states are always evolved at J = 0; for J > 0 the accumulated
    bases are extended with K = -J..J before the subspace solves.
    """
    frame = derive_frame(model) if frame is None else frame
    vmax = model.vmax if vmax is None else vmax
    refs = [_as_state(r, 0) for r in references]
    ps = pauli_decompose_factored(model, frame, vmax, 0) if pauli_sum is None else pauli_sum
    cache = _HamiltonianCache(model, frame)
    H0 = cache.get(vmax, 0)
    HJ = cache.get(vmax, J)
    carry = {r: BasisSet([r], {"reference": str(r)}) for r in refs}
    for k, point in enumerate(schedule.points):
        tau, n_steps = schedule.parameters(point)
        subspaces, dists = {}, {}
        for ri, r in enumerate(refs):
            psi = trotter_evolve(prepare_basis_state(r, vmax, 0), ps, tau, n_steps, schedule.lam, schedule.order)
            d = exact_distribution(psi)
            if schedule.n_shot:
                seed = None if schedule.seed is None else [schedule.seed, k, ri]
                d = sample_shots(d, schedule.n_shot, np.random.SeedSequence(seed) if seed else None)
            d = parity_postselect(d, r.parity(model), model)
            dists[str(r)] = d
            eps = schedule.eps if not schedule.n_shot else min(schedule.eps, 0.5 / schedule.n_shot)
            carry[r] = select_basis(d, eps, carry[r])
            carry[r].provenance.update(schedule=schedule.as_dict(), points=list(schedule.points[: k + 1]))
            if J == 0:
                subspaces[str(r)] = subspace_solve(carry[r], r, model, frame, H0)
            else:
                omega = extend_to_J(carry[r], J)
                subspaces[str(r)] = subspace_solve(omega, RovibBasisState(r.v, J, 0), model, frame, HJ,
                                                   n_pick=2 * J + 1)
        combined = combine_references(subspaces.values(), model, frame, HJ)
        sizes = {key: len(s.basis) for key, s in subspaces.items()}
        yield PipelinePoint(point, subspaces, combined, sizes, dists)


def run_pipeline(model: MoleculeModel, schedule: Schedule, references=GAMMA, J: int = 0, vmax: int | None = None,
                 frame: DerivedFrame | None = None, pauli_sum=None) -> list:
    """Run :func:`iter_pipeline` to completion; returns a list of PipelinePoint."""
    return list(iter_pipeline(model, schedule, references, J, vmax, frame, pauli_sum))


def _reference_rows(pt: PipelinePoint, J: int) -> list:
    """(reference, raw energy, combined energy, label) rows for one point."""
    rows = []
    used = set()
    for key, sub in pt.subspaces.items():
        for col in sub.picked:
            raw = float(sub.energies[col])
            target = assign_labels(sub.vectors[:, col], sub.basis, None, 0) if J == 0 else None
            # Combined level whose label matches; otherwise the nearest unused one.
            j = None
            if target is not None:
                for i, lab in enumerate(pt.combined.labels):
                    if lab.rstrip("?") == target and i not in used:
                        j = i
                        break
            if j is None:
                free = [i for i in range(len(pt.combined.energies)) if i not in used]
                j = min(free, key=lambda i: abs(pt.combined.energies[i] - raw))
            used.add(j)
            rows.append((key, raw, float(pt.combined.energies[j]), pt.combined.labels[j]))
    return rows


def write_results_csv(points, path, exact: dict | None = None, J: int = 0) -> None:
    """Results table with the columns in :data:`RESULT_COLUMNS` (energies in cm^-1)."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(RESULT_COLUMNS)
        for pt in points:
            for key, raw, comb, label in _reference_rows(pt, J):
                ex = None if exact is None else exact["by_label"].get(label.rstrip("?"))
                wr.writerow([pt.point, key, pt.sizes[key], f"{raw:.4f}", f"{comb:.4f}", label,
                             "" if ex is None else f"{ex:.4f}",
                             "" if ex is None else f"{comb - ex:.4f}"])
