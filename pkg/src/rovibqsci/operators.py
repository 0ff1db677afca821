"""Matrix representations of single-mode oscillator operators and of the
molecule-fixed angular momentum, plus the asymmetric-top rotor problem.

Oscillator operators use the dimensionless convention
<v|q|v+1> = sqrt((v+1)/2), <v|p|v+1> = -i sqrt((v+1)/2).  Products are
formed in an enlarged space and truncated afterwards, so every returned
matrix element <v|...|v'> with v, v' < d is exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "ModeOperator",
    "AngularMomentumSet",
    "RotorLevels",
    "ladder",
    "mode_product",
    "q_power_matrix",
    "momentum_matrices",
    "angular_momentum",
    "rotor_labels",
    "asymmetric_top_solve",
]


@dataclass(frozen=True)
class ModeOperator:
    matrix: np.ndarray
    bandwidth: int
    hermitian: bool

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def ladder(d: int) -> np.ndarray:
    """Annihilation operator a in dimension d (a|v> = sqrt(v)|v-1>)."""
    return np.diag(np.sqrt(np.arange(1, d, dtype=float)), 1)


def _qp(d: int):
    a = ladder(d)
    q = (a + a.T) / np.sqrt(2.0)
    p = 1j * (a.T - a) / np.sqrt(2.0)
    return q.astype(complex), p


@lru_cache(maxsize=None)
def mode_product(d: int, word: str) -> np.ndarray:
    """Matrix of an ordered product of q and p factors, e.g. ``"qpqq"``.

    The empty word is the identity.  Returned arrays are read-only and
    shared between callers.
    """
    if any(c not in "qp" for c in word):
        raise ValueError(f"operator word may only contain 'q' and 'p': {word!r}")
    big = d + len(word) + 1
    q, p = _qp(big)
    m = np.eye(big, dtype=complex)
    for c in word:
        m = m @ (q if c == "q" else p)
    out = np.ascontiguousarray(m[:d, :d])
    out.setflags(write=False)
    return out


def q_power_matrix(d: int, power: int) -> ModeOperator:
    if power not in (1, 2, 3, 4):
        raise ValueError(f"power must be 1..4, got {power}")
    if d < 1:
        raise ValueError("dimension must be positive")
    return ModeOperator(mode_product(d, "q" * power).real.copy(), power, True)


def momentum_matrices(d: int):
    """(p, p^2) in dimension d."""
    if d < 1:
        raise ValueError("dimension must be positive")
    p = ModeOperator(mode_product(d, "p").copy(), 1, True)
    p2 = ModeOperator(mode_product(d, "pp").real.copy(), 2, True)
    return p, p2


@dataclass(frozen=True)
class AngularMomentumSet:
    """Molecule-fixed J_a, J_b, J_c in the |J,K> basis, K = -J..J (units of hbar).

    Row/column index m corresponds to K = m - J.  The components obey the
    anomalous commutation rule [J_a, J_b] = -i J_c, so J+ = J_a + i J_b
    lowers K.
    """

    J: int
    Ja: np.ndarray
    Jb: np.ndarray
    Jc: np.ndarray

    @property
    def components(self):
        return (self.Ja, self.Jb, self.Jc)

    @property
    def Jplus(self) -> np.ndarray:
        return self.Ja + 1j * self.Jb

    @property
    def Jminus(self) -> np.ndarray:
        return self.Ja - 1j * self.Jb

    @property
    def K(self) -> np.ndarray:
        return np.arange(-self.J, self.J + 1)


@lru_cache(maxsize=None)
def angular_momentum(J: int) -> AngularMomentumSet:
    if J < 0:
        raise ValueError(f"J must be non-negative, got {J}")
    K = np.arange(-J, J + 1)
    n = 2 * J + 1
    jp = np.zeros((n, n))
    # J+ |J,K> = sqrt(J(J+1) - K(K-1)) |J,K-1>
    for m in range(1, n):
        k = K[m]
        jp[m - 1, m] = np.sqrt(J * (J + 1) - k * (k - 1))
    jm = jp.T
    Ja = (jp + jm) / 2.0 + 0j
    Jb = (jp - jm) / 2j
    Jc = np.diag(K).astype(complex)
    for x in (Ja, Jb, Jc):
        x.setflags(write=False)
    return AngularMomentumSet(J, Ja, Jb, Jc)


def rotor_labels(J: int) -> list:
    """(Ka, Kc) labels in order of increasing energy: J_0J, J_1J, J_1J-1, ..., J_J0."""
    labels = [(0, J)]
    for ka in range(1, J + 1):
        labels.append((ka, J - ka + 1))
        labels.append((ka, J - ka))
    return labels


@dataclass(frozen=True)
class RotorLevels:
    J: int
    energies: np.ndarray
    vectors: np.ndarray
    labels: list

    def label_str(self, i: int) -> str:
        ka, kc = self.labels[i]
        return f"{self.J}_{ka}{kc}" if max(ka, kc) < 10 else f"{self.J}_{ka},{kc}"


def asymmetric_top_solve(frame_or_constants, J: int) -> RotorLevels:
    """Rigid-rotor levels 1/2 J^T mu_0 J (cm^-1) labeled J_{KaKc}.

    ``frame_or_constants`` is a :class:`~rovibqsci.molecule.DerivedFrame`
    or the three rotational constants in model axis order.
    """
    consts = getattr(frame_or_constants, "rotational_constants_cm1", frame_or_constants)
    consts = np.asarray(consts, float)
    jm = angular_momentum(J)
    H = sum(c * (Ji @ Ji) for c, Ji in zip(consts, jm.components))
    w, v = np.linalg.eigh(H)
    v = _fix_phase(v)
    return RotorLevels(J, w, v, rotor_labels(J))


def _fix_phase(v: np.ndarray) -> np.ndarray:
    # Largest-magnitude component of each vector made real positive.
    idx = np.argmax(np.abs(v) - 1e-9 * np.arange(v.shape[0])[:, None], axis=0)
    ph = v[idx, np.arange(v.shape[1])]
    return v * (np.abs(ph) / ph)[None, :]
