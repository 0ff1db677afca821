"""Matrix representation of the truncated Watson Hamiltonian.

The Hamiltonian is kept symbolically as a list of product terms

    coef * O_1 (x) O_2 (x) ... (x) O_Nvib (x) R

where each ``O_k`` is an ordered word of dimensionless ``q``/``p`` factors
acting on mode ``k`` and ``R`` is an ordered product of molecule-fixed
angular momentum components.  Sparse matrices, single matrix elements and
the factored Pauli decomposition are all evaluated from the same term list,
grouped as

    H = H_RR + H_HO + V_anharm + H_vibCor + H_rovib.
"""

from __future__ import annotations

import enum
import itertools
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .molecule import DerivedFrame, MoleculeModel, derive_frame
from .operators import angular_momentum, mode_product
from .units import CM1_TO_HARTREE, HARTREE_TO_CM1

__all__ = [
    "TermGroup",
    "ALL_GROUPS",
    "RovibBasisState",
    "RovibBasis",
    "WatsonHamiltonian",
    "SparseHamiltonian",
    "HermiticityError",
    "DenseLimitError",
    "build_group",
    "build_full",
    "matrix_element",
    "dense_spectrum",
    "DENSE_LIMIT",
]

DENSE_LIMIT = 8192
HERMITICITY_TOL = 1e-9  # cm^-1
_DROP = 1e-12  # cm^-1; coefficients below this are round-off


class TermGroup(enum.Enum):
    RR = "RR"
    HO = "HO"
    ANHARM = "ANHARM"
    VIBCOR = "VIBCOR"
    ROVIB = "ROVIB"

    @classmethod
    def parse(cls, spec) -> tuple:
        """Parse ``"RR+HO"``-style masks (or an iterable of names/members)."""
        if isinstance(spec, cls):
            return (spec,)
        if isinstance(spec, str):
            if spec.upper() in ("ALL", "FULL"):
                return ALL_GROUPS
            spec = [s for s in spec.replace(",", "+").split("+") if s.strip()]
        out = []
        for s in spec:
            g = s if isinstance(s, cls) else cls(str(s).strip().upper())
            if g not in out:
                out.append(g)
        return tuple(sorted(out, key=ALL_GROUPS.index))


ALL_GROUPS = (TermGroup.RR, TermGroup.HO, TermGroup.ANHARM, TermGroup.VIBCOR, TermGroup.ROVIB)


class HermiticityError(ArithmeticError):
    """Assembled matrix has an anti-Hermitian residue above tolerance."""


class DenseLimitError(ValueError):
    """Matrix too large for the dense eigensolver."""


@dataclass(frozen=True, order=True)
class RovibBasisState:
    """Product state |v_1 ... v_N> |J, K>."""

    v: tuple
    J: int = 0
    K: int = 0

    def __post_init__(self):
        object.__setattr__(self, "v", tuple(int(x) for x in self.v))
        if self.J < 0 or abs(self.K) > self.J:
            raise ValueError(f"invalid rotational quantum numbers J={self.J}, K={self.K}")
        if any(x < 0 for x in self.v):
            raise ValueError(f"negative vibrational quantum number in {self.v}")

    def parity(self, model: MoleculeModel) -> int:
        """Exchange parity, +1 or -1 (for H2O: (-1)^(v3 + K))."""
        n = sum(self.v[m] for m in model.parity_modes)
        if model.parity_include_K:
            n += self.K
        return -1 if n % 2 else 1

    @property
    def vib_label(self) -> str:
        return "".join(str(x) for x in self.v)

    def __str__(self):
        return self.vib_label if self.J == 0 else f"{self.vib_label}|{self.J},{self.K}>"

    @classmethod
    def from_label(cls, label: str, J: int = 0, K: int = 0) -> "RovibBasisState":
        return cls(tuple(int(c) for c in label), J, K)


class RovibBasis:
    """Full direct-product basis, ordered with v_1 slowest and K fastest."""

    def __init__(self, n_vib: int, vmax: int, J: int):
        self.n_vib, self.vmax, self.J = n_vib, vmax, J
        self.d = vmax + 1
        self.nrot = 2 * J + 1
        grids = np.indices((self.d,) * n_vib + (self.nrot,)).reshape(n_vib + 1, -1).T
        self.quanta = grids  # columns: v_1..v_N, m = K + J
        self.quanta.setflags(write=False)

    @property
    def size(self) -> int:
        return self.quanta.shape[0]

    def index(self, state: RovibBasisState) -> int:
        if state.J != self.J:
            raise ValueError(f"state has J={state.J}, basis has J={self.J}")
        if len(state.v) != self.n_vib or max(state.v) > self.vmax:
            raise ValueError(f"state {state} outside basis (vmax={self.vmax})")
        idx = 0
        for x in state.v:
            idx = idx * self.d + x
        return idx * self.nrot + state.K + self.J

    def state(self, index: int) -> RovibBasisState:
        row = self.quanta[index]
        return RovibBasisState(tuple(row[:-1]), self.J, int(row[-1]) - self.J)

    def states(self):
        return [self.state(i) for i in range(self.size)]

    def parities(self, model: MoleculeModel) -> np.ndarray:
        n = self.quanta[:, list(model.parity_modes)].sum(axis=1) if model.parity_modes else 0
        if model.parity_include_K:
            n = n + self.quanta[:, -1] - self.J
        return np.where(np.asarray(n) % 2, -1, 1) * np.ones(self.size, dtype=int)


# --- symbolic term generation ------------------------------------------------

def _words(n_vib, factors):
    w = [""] * n_vib
    for mode, letter in factors:
        w[mode] += letter
    return tuple(w)


class _Collector:
    def __init__(self, n_vib):
        self.n_vib = n_vib
        self.terms = defaultdict(complex)

    def add(self, coef, factors, rot=()):
        if coef != 0:
            self.terms[(_words(self.n_vib, factors), tuple(rot))] += coef


def _pi_terms(zeta_alpha, s):
    """pi_alpha = sum_{k != l} zeta_kl Q_k P_l as (coef, factors)."""
    out = []
    n = len(s)
    for k in range(n):
        for l in range(n):
            z = zeta_alpha[k, l]
            if k != l and z != 0.0:
                out.append((z * s[l] / s[k], ((k, "q"), (l, "p"))))
    return out


def _mu_terms(mu_l, alpha, beta, s):
    """Monomials of mu_l[alpha, beta] in dimensionless q."""
    T = mu_l[alpha, beta]
    if T.ndim == 0:
        return [(float(T), ())] if T != 0 else []
    out = []
    for idx in zip(*np.nonzero(T)):
        out.append((T[idx] / np.prod(s[list(idx)]), tuple((int(k), "q") for k in idx)))
    return out


def _generate_terms(model: MoleculeModel, frame: DerivedFrame, group: TermGroup) -> dict:
    """Symbolic terms of one group, coefficients in cm^-1."""
    n = model.n_vib
    s = np.sqrt(frame.omega_hartree)
    w = frame.omega_hartree
    col = _Collector(n)
    mu = frame.mu
    ax = range(3)

    if group is TermGroup.HO:
        for k in range(n):
            col.add(0.5 * w[k], ((k, "p"), (k, "p")))
            col.add(0.5 * w[k], ((k, "q"), (k, "q")))

    elif group is TermGroup.RR:
        for a, b in itertools.product(ax, ax):
            if mu[0][a, b] != 0:
                col.add(0.5 * mu[0][a, b], (), (a, b))

    elif group is TermGroup.ANHARM:
        phi3 = model.cubic_tensor * CM1_TO_HARTREE
        phi4 = model.quartic_tensor * CM1_TO_HARTREE
        for idx in zip(*np.nonzero(phi3)):
            col.add(phi3[idx] / 6.0, tuple((int(k), "q") for k in idx))
        for idx in zip(*np.nonzero(phi4)):
            col.add(phi4[idx] / 24.0, tuple((int(k), "q") for k in idx))

    elif group is TermGroup.VIBCOR:
        pis = [_pi_terms(frame.zeta[a], s) for a in ax]
        for ell in range(3):
            for a, b in itertools.product(ax, ax):
                for cm, fm in _mu_terms(mu[ell], a, b, s):
                    for ca, fa in pis[a]:
                        for cb, fb in pis[b]:
                            col.add(0.5 * ca * cm * cb, fa + fm + fb)
        # -hbar^2/8 tr(mu), all orders
        for ell in range(5):
            for a in ax:
                for cm, fm in _mu_terms(mu[ell], a, a, s):
                    col.add(-0.125 * cm, fm)

    elif group is TermGroup.ROVIB:
        pis = [_pi_terms(frame.zeta[b], s) for b in ax]
        for ell in range(1, 5):
            for a, b in itertools.product(ax, ax):
                for cm, fm in _mu_terms(mu[ell], a, b, s):
                    col.add(0.5 * cm, fm, (a, b))
        for ell in range(4):
            for a, b in itertools.product(ax, ax):
                for cm, fm in _mu_terms(mu[ell], a, b, s):
                    for cb, fb in pis[b]:
                        col.add(-cm * cb, fm + fb, (a,))
    else:  # pragma: no cover - enum is closed
        raise ValueError(f"unsupported term group {group!r}")

    out = {}
    for key in sorted(col.terms):
        c = col.terms[key] * HARTREE_TO_CM1
        if abs(c) > _DROP:
            out[key] = c
    return out


# --- Hamiltonian objects -----------------------------------------------------

@dataclass(frozen=True)
class SparseHamiltonian:
    """Sparse Hermitian matrix over a :class:`RovibBasis` (cm^-1)."""

    matrix: sp.csr_matrix
    vmax: int
    J: int
    groups: tuple
    basis: RovibBasis = field(repr=False)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def triplets(self):
        """(row, col, value) arrays in row-major order."""
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return coo.row[order], coo.col[order], coo.data[order]

    def dump(self, path) -> None:
        """Write a plain-text coordinate listing (see README for the format)."""
        rows, cols, vals = self.triplets()
        mask = "+".join(g.value for g in self.groups)
        with open(path, "w") as fh:
            fh.write(f"# vmax {self.vmax}\n# J {self.J}\n# S {self.size}\n# groups {mask}\n")
            fh.write(f"# nnz {len(vals)}\n")
            for r, c, v in zip(rows, cols, vals):
                fh.write(f"{r} {c} {v.real:.17g} {v.imag:.17g}\n")

    @staticmethod
    def load_triplets(path):
        header, data = {}, []
        with open(path) as fh:
            for line in fh:
                if line.startswith("#"):
                    k, v = line[1:].split(None, 1)
                    header[k] = v.strip()
                elif line.strip():
                    r, c, re, im = line.split()
                    data.append((int(r), int(c), float(re) + 1j * float(im)))
        S = int(header["S"])
        rows, cols, vals = zip(*data) if data else ((), (), ())
        return header, sp.csr_matrix((np.array(vals, complex), (rows, cols)), shape=(S, S))


class WatsonHamiltonian:
    """Symbolic Watson Hamiltonian for a model at fixed ``vmax`` and ``J``.

    Parameters
    ----------
    model : MoleculeModel
    vmax : int
        Maximum vibrational quantum number per mode.
    J : int
        Total angular momentum.
    frame : DerivedFrame, optional
        Derived from ``model`` when omitted.
    """

    def __init__(self, model: MoleculeModel, vmax: int, J: int = 0, frame: DerivedFrame | None = None):
        if vmax < 0:
            raise ValueError("vmax must be non-negative")
        if J < 0:
            raise ValueError("J must be non-negative")
        self.model = model
        self.frame = derive_frame(model) if frame is None else frame
        self.vmax, self.J = vmax, J
        self.basis = RovibBasis(model.n_vib, vmax, J)
        self._terms = {}

    def terms(self, group: TermGroup) -> dict:
        """{(mode words, rotational axes): coefficient in cm^-1}."""
        if not isinstance(group, TermGroup):
            raise ValueError(f"unsupported term group {group!r}")
        if group not in self._terms:
            self._terms[group] = _generate_terms(self.model, self.frame, group)
        return self._terms[group]

    def combined_terms(self, groups=ALL_GROUPS) -> dict:
        out = defaultdict(complex)
        for g in TermGroup.parse(groups):
            for key, c in self.terms(g).items():
                out[key] += c
        return {k: out[k] for k in sorted(out) if abs(out[k]) > _DROP}

    def rot_matrix(self, rot: tuple) -> np.ndarray:
        jm = angular_momentum(self.J)
        m = np.eye(2 * self.J + 1, dtype=complex)
        for a in rot:
            m = m @ jm.components[a]
        return m

    def vib_matrix(self, words: tuple) -> np.ndarray:
        d = self.vmax + 1
        return [mode_product(d, w) for w in words]

    def _by_rot(self, groups):
        by_rot = defaultdict(list)
        for (words, rot), c in self.combined_terms(groups).items():
            by_rot[rot].append((words, c))
        return by_rot

    def matrix(self, groups=ALL_GROUPS, check_hermitian: bool = True) -> SparseHamiltonian:
        groups = TermGroup.parse(groups)
        S = self.basis.size
        H = sp.csr_matrix((S, S), dtype=complex)
        for rot, items in sorted(self._by_rot(groups).items()):
            R = sp.csr_matrix(self.rot_matrix(rot))
            if R.nnz == 0:
                continue
            V = None
            for words, c in items:
                f = sp.csr_matrix(np.asarray(mode_product(self.vmax + 1, words[0])))
                for w in words[1:]:
                    f = sp.kron(f, sp.csr_matrix(np.asarray(mode_product(self.vmax + 1, w))), format="csr")
                V = c * f if V is None else V + c * f
            H = H + sp.kron(V, R, format="csr")
        H.sum_duplicates()
        H.eliminate_zeros()
        H.sort_indices()
        if check_hermitian:
            resid = abs(H - H.conj().T)
            resid = resid.max() if resid.nnz else 0.0
            if resid > HERMITICITY_TOL:
                raise HermiticityError(f"anti-Hermitian residue {resid:.3g} cm^-1 in groups {groups}")
        return SparseHamiltonian(H, self.vmax, self.J, groups, self.basis)

    @cached_property
    def _element_tables(self):
        # Per rotational key: stacked per-mode matrices and coefficients.
        d = self.vmax + 1
        tables = []
        for rot, items in sorted(self._by_rot(ALL_GROUPS).items()):
            R = self.rot_matrix(rot)
            if not np.any(R):
                continue
            coefs = np.array([c for _, c in items])
            mats = [np.stack([mode_product(d, w[k]) for w, _ in items]) for k in range(self.model.n_vib)]
            tables.append((R, coefs, mats))
        return tables

    def matrix_elements(self, bra_quanta, ket_quanta) -> np.ndarray:
        """Vectorized <b|H|b'> for rows of quanta arrays (v_1..v_N, K + J)."""
        bra = np.atleast_2d(np.asarray(bra_quanta, int))
        ket = np.atleast_2d(np.asarray(ket_quanta, int))
        out = np.zeros(bra.shape[0], dtype=complex)
        # Selection rules: |dv| <= 4 per mode, |dK| <= 2.
        ok = (np.abs(bra - ket).max(axis=1) <= 4) & (np.abs(bra[:, -1] - ket[:, -1]) <= 2)
        if not np.any(ok):
            return out
        b, k = bra[ok], ket[ok]
        acc = np.zeros(b.shape[0], dtype=complex)
        for R, coefs, mats in self._element_tables:
            r = R[b[:, -1], k[:, -1]]
            nz = r != 0
            if not np.any(nz):
                continue
            prod = np.ones((len(coefs), int(nz.sum())), dtype=complex)
            for mode, M in enumerate(mats):
                prod *= M[:, b[nz, mode], k[nz, mode]]
            acc[nz] += r[nz] * (coefs @ prod)
        out[ok] = acc
        return out

    def subspace_matrix(self, quanta) -> np.ndarray:
        """Dense H restricted to the given basis states (rows of quanta)."""
        q = np.asarray(quanta, int)
        n = len(q)
        iu, ju = np.triu_indices(n)
        vals = self.matrix_elements(q[iu], q[ju])
        H = np.zeros((n, n), dtype=complex)
        H[iu, ju] = vals
        H[ju, iu] = np.conj(vals)
        H[np.diag_indices(n)] = H[np.diag_indices(n)].real
        return H

    def quanta(self, states) -> np.ndarray:
        rows = []
        for s in states:
            if s.J != self.J:
                raise ValueError(f"state {s} has J={s.J}, Hamiltonian has J={self.J}")
            if len(s.v) != self.model.n_vib or max(s.v) > self.vmax:
                raise ValueError(f"state {s} outside basis (vmax={self.vmax})")
            rows.append(tuple(s.v) + (s.K + self.J,))
        return np.array(rows, dtype=int).reshape(-1, self.model.n_vib + 1)


def build_group(model, frame, vmax, J, group) -> SparseHamiltonian:
    if isinstance(group, str):
        group = TermGroup.parse(group)
    groups = group if isinstance(group, tuple) else (group,)
    for g in groups:
        if not isinstance(g, TermGroup):
            raise ValueError(f"unsupported term group {g!r}")
    return WatsonHamiltonian(model, vmax, J, frame).matrix(groups)


def build_full(model, frame, vmax, J) -> SparseHamiltonian:
    return WatsonHamiltonian(model, vmax, J, frame).matrix(ALL_GROUPS)


def matrix_element(b: RovibBasisState, b2: RovibBasisState, model, frame=None,
                   vmax: int | None = None, hamiltonian: WatsonHamiltonian | None = None) -> complex:
    """Single <b|H|b2> in cm^-1 without building the matrix."""
    if b.J != b2.J:
        raise ValueError(f"mismatched J: {b.J} vs {b2.J}")
    if hamiltonian is None:
        vmax = max(max(b.v), max(b2.v)) if vmax is None else vmax
        hamiltonian = WatsonHamiltonian(model, vmax, b.J, frame)
    q = hamiltonian.quanta([b, b2])
    return complex(hamiltonian.matrix_elements(q[:1], q[1:])[0])


def dense_spectrum(H, n_lowest: int | None = None, vectors: bool = False, limit: int = DENSE_LIMIT):
    """Lowest ``n_lowest`` eigenvalues (ascending) of a Hermitian matrix.

    ``H`` may be a :class:`SparseHamiltonian`, a sparse matrix or an array.
    Returns eigenvalues, or (eigenvalues, eigenvectors) with ``vectors=True``.
    """
    M = H.matrix if isinstance(H, SparseHamiltonian) else H
    S = M.shape[0]
    if S > limit:
        raise DenseLimitError(f"dimension {S} exceeds dense limit {limit}")
    A = M.toarray() if sp.issparse(M) else np.asarray(M)
    n = S if n_lowest is None else min(n_lowest, S)
    res = scipy.linalg.eigh(A, subset_by_index=(0, n - 1), eigvals_only=not vectors)
    return res
