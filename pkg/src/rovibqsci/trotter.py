"""Statevector simulation of the Trotterized trial state and its sampling.

The trial state is

    |psi(tau, N)> = U^N |psi_0>,   U = prod_{|h_k| > lambda} exp(-i tau h_k P_k),

with ``tau`` in atomic units of time and ``h_k`` converted from cm^-1 to
hartree.  Each factor is applied as ``cos(theta) s - i sin(theta) P s``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .molecule import MoleculeModel
from .pauli import PauliString, PauliSum, n_qubits, qubit_index
from .units import CM1_TO_HARTREE
from .watson import RovibBasis, RovibBasisState

__all__ = [
    "ORDER_POLICIES",
    "Statevector",
    "Distribution",
    "prepare_basis_state",
    "apply_pauli_rotation",
    "order_terms",
    "trotter_evolve",
    "exact_distribution",
    "sample_shots",
    "parity_postselect",
    "write_distribution",
]

ORDER_POLICIES = ("descending", "ascending", "lexicographic")


@dataclass
class Statevector:
    """2^{N_q} amplitudes in the binary encoding of a (vmax, J) basis."""

    amplitudes: np.ndarray
    vmax: int
    J: int
    n_vib: int = 3
    meta: dict = field(default_factory=dict)

    @property
    def n_qubits(self) -> int:
        return n_qubits(self.n_vib, self.vmax, self.J)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def copy(self) -> "Statevector":
        return Statevector(self.amplitudes.copy(), self.vmax, self.J, self.n_vib, dict(self.meta))


@dataclass
class Distribution:
    """Probabilities over the physical basis, indexed like :class:`RovibBasis`.

    ``provenance`` is ``"exact"`` or ``"shots"``; shot distributions also
    carry integer ``counts``.
    """

    probs: np.ndarray
    vmax: int
    J: int
    n_vib: int = 3
    provenance: str = "exact"
    n_shot: int = 0
    seed: int | None = None
    parity_filtered: bool = False
    padded_mass: float = 0.0
    counts: np.ndarray | None = None

    @property
    def basis(self) -> RovibBasis:
        return RovibBasis(self.n_vib, self.vmax, self.J)

    def support(self, eps: float = 0.0) -> np.ndarray:
        return np.flatnonzero(self.probs > eps)

    def as_dict(self, eps: float = 0.0) -> dict:
        basis = self.basis
        return {basis.state(i): float(self.probs[i]) for i in self.support(eps)}


def prepare_basis_state(b: RovibBasisState, vmax: int, J: int | None = None, n_vib: int | None = None) -> Statevector:
    """Computational basis state encoding ``b``."""
    J = b.J if J is None else J
    n_vib = len(b.v) if n_vib is None else n_vib
    if b.J != J or len(b.v) != n_vib or abs(b.K) > J or any(v < 0 or v > vmax for v in b.v):
        raise ValueError(f"state {b} is not in the vmax={vmax}, J={J} basis")
    amps = np.zeros(1 << n_qubits(n_vib, vmax, J), dtype=complex)
    amps[qubit_index([tuple(b.v) + (b.K + J,)], vmax, J)[0]] = 1.0
    return Statevector(amps, vmax, J, n_vib)


def _pauli_action(x: int, z: int, N: int):
    # (P s)[k] = diag[k] * s[k ^ x]
    k = np.arange(N)
    src = k ^ x
    parity = np.zeros(N, dtype=np.int64)
    t = src & z
    while np.any(t):
        parity ^= t & 1
        t >>= 1
    phase = 1j ** (bin(x & z).count("1") % 4)
    return src, phase * (1 - 2 * parity)


def apply_pauli_rotation(s, P, theta: float):
    """Return exp(-i theta P) s for a Pauli string ``P`` (str, PauliString or (x, z))."""
    amps = s.amplitudes if isinstance(s, Statevector) else np.asarray(s, dtype=complex)
    if isinstance(P, tuple):
        x, z = P
    else:
        P = P if isinstance(P, PauliString) else PauliString(P)
        if (1 << P.n_qubits) != len(amps):
            raise ValueError("Pauli string length does not match the statevector")
        x, z = P.masks
    src, diag = _pauli_action(int(x), int(z), len(amps))
    out = np.cos(theta) * amps - 1j * np.sin(theta) * diag * amps[src]
    if isinstance(s, Statevector):
        return Statevector(out, s.vmax, s.J, s.n_vib, dict(s.meta))
    return out


def order_terms(ps: PauliSum, policy: str = "descending") -> np.ndarray:
    """Indices of ``ps`` terms in the product order of one Trotter step.

    ``descending``: |h| large to small, ties by string; ``ascending``: the
    reverse magnitude order with the same tie-break; ``lexicographic``: by
    string only.
    """
    mags = np.abs(ps.coeffs)
    rank = np.arange(len(ps))  # strings are already sorted lexicographically
    if policy == "descending":
        return np.lexsort((rank, -mags))
    if policy == "ascending":
        return np.lexsort((rank, mags))
    if policy == "lexicographic":
        return rank
    raise ValueError(f"unknown ordering policy {policy!r}; choose from {ORDER_POLICIES}")


def trotter_evolve(s0: Statevector, ps: PauliSum, tau: float, n_steps: int, lam: float = 0.0,
                   order: str = "descending", include_identity: bool = True) -> Statevector:
    """Apply ``n_steps`` first-order Trotter steps of the terms with |h| > ``lam``.

    Parameters
    ----------
    tau : float
        Time step in atomic units (10 a.u. ~ 0.24 fs).
    lam : float
        Cutoff in cm^-1.
    order : str
        Term ordering policy, see :func:`order_terms`.
    include_identity : bool
        The identity term only contributes a global phase.

    The applied term order is recorded in ``meta["order"]`` of the result.
    """
    if tau < 0 or n_steps < 0:
        raise ValueError("tau and n_steps must be non-negative")
    if ps.n_qubits != s0.n_qubits:
        raise ValueError(f"Pauli sum acts on {ps.n_qubits} qubits, state has {s0.n_qubits}")
    xs, zs = ps.masks()
    keep = np.abs(ps.coeffs) > lam
    if not include_identity:
        keep &= (xs | zs) != 0
    idx = [i for i in order_terms(ps, order) if keep[i]]
    N = len(s0.amplitudes)
    ops = []
    for i in idx:
        src, diag = _pauli_action(int(xs[i]), int(zs[i]), N)
        th = tau * ps.coeffs[i] * CM1_TO_HARTREE
        ops.append((src, np.cos(th), -1j * np.sin(th) * diag))
    amps = s0.amplitudes.astype(complex, copy=True)
    for _ in range(n_steps):
        for src, c, sd in ops:
            amps = c * amps + sd * amps[src]
    meta = dict(s0.meta)
    meta.update(tau_au=float(tau), n_steps=int(n_steps), cutoff_cm1=float(lam), order_policy=order,
                order=[ps.strings[i] for i in idx], n_terms=len(idx))
    return Statevector(amps, s0.vmax, s0.J, s0.n_vib, meta)


def exact_distribution(s: Statevector) -> Distribution:
    """|amplitude|^2 on the physical basis states; padded mass kept separately."""
    basis = RovibBasis(s.n_vib, s.vmax, s.J)
    p_all = np.abs(s.amplitudes) ** 2
    idx = qubit_index(basis.quanta, s.vmax, s.J)
    probs = p_all[idx]
    padded = float(p_all.sum() - probs.sum())
    return Distribution(probs, s.vmax, s.J, s.n_vib, "exact", padded_mass=max(padded, 0.0))


def sample_shots(d: Distribution, n_shot: int, seed=None) -> Distribution:
    """Multinomial sample of ``n_shot`` measurements; reproducible for a given seed."""
    if n_shot <= 0:
        raise ValueError("n_shot must be positive")
    if d.provenance != "exact":
        raise ValueError("can only sample from an exact distribution")
    p = np.clip(d.probs, 0.0, None)
    p = p / p.sum()
    counts = np.random.default_rng(seed).multinomial(n_shot, p)
    return Distribution(counts / n_shot, d.vmax, d.J, d.n_vib, "shots", n_shot, seed,
                        d.parity_filtered, d.padded_mass, counts)


def parity_postselect(d: Distribution, reference_parity: int, model: MoleculeModel) -> Distribution:
    """Drop wrong-parity states and renormalize by the retained mass."""
    if reference_parity not in (1, -1):
        raise ValueError("reference parity must be +1 or -1")
    par = d.basis.parities(model)
    keep = par == reference_parity
    mass = float(d.probs[keep].sum())
    if mass <= 0:
        raise ValueError("no probability mass with the reference parity")
    probs = np.where(keep, d.probs, 0.0) / mass
    counts = None if d.counts is None else np.where(keep, d.counts, 0)
    return Distribution(probs, d.vmax, d.J, d.n_vib, d.provenance, d.n_shot, d.seed,
                        True, d.padded_mass, counts)


def write_distribution(d: Distribution, path, eps: float = 0.0) -> None:
    """Text dump, one line per state: ``index v1 .. vN K probability``."""
    basis = d.basis
    with open(path, "w") as fh:
        fh.write(f"# provenance {d.provenance}\n# n_shot {d.n_shot}\n# seed {d.seed}\n")
        fh.write(f"# parity_filtered {d.parity_filtered}\n# padded_mass {d.padded_mass:.3e}\n")
        fh.write("# index " + " ".join(f"v{k + 1}" for k in range(d.n_vib)) + " K probability\n")
        for i in d.support(eps):
            q = basis.quanta[i]
            vs = " ".join(str(int(v)) for v in q[:-1])
            fh.write(f"{i} {vs} {int(q[-1]) - d.J} {d.probs[i]:.12e}\n")
