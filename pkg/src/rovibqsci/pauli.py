"""Binary qubit encoding of the rovibrational basis and Pauli decompositions.

Basis states map to computational basis states by concatenating binary
registers ``bin(v_1) bin(v_2) ... bin(v_N) bin(K + J)``, with ``v_1`` in the
most significant bits.  Pauli strings are written with the most significant
qubit first, so the leftmost letter acts on the leading bit of ``v_1``.

Internally a Pauli operator on ``n`` qubits is addressed by two bit masks
``(x, z)``; qubit ``i`` carries I, X, Z or Y for ``(x_i, z_i)`` equal to
(0, 0), (1, 0), (0, 1) or (1, 1).  With ``Y = iXZ``,

    P |j> = i^{|x & z|} (-1)^{popcount(z & j)} |j ^ x>,

which gives the trace formula

    tr(P M) = i^{|x & z|} sum_j (-1)^{z . j} M[j, j ^ x],

evaluated for all ``z`` at once by a Walsh-Hadamard transform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .molecule import DerivedFrame, MoleculeModel
from .operators import mode_product
from .units import HARTREE_TO_CM1
from .watson import ALL_GROUPS, RovibBasisState, WatsonHamiltonian

__all__ = [
    "DROP_TOL",
    "COUNT_TOL",
    "MAPPING_TAG",
    "PauliString",
    "PauliSum",
    "register_sizes",
    "n_qubits",
    "encode_basis_index",
    "qubit_index",
    "decode_qubit_index",
    "padded_matrix",
    "pauli_decompose_trace",
    "pauli_decompose_factored",
    "term_statistics",
    "cutoff_filter",
    "scaling_study",
    "fit_Lq_vs_J",
    "write_pauli_sum",
    "read_pauli_sum",
]

DROP_TOL = 1e-10  # cm^-1
#: 1e-10 hartree expressed in cm^-1; the natural zero for coefficients
#: accumulated in atomic units, used when counting terms.
COUNT_TOL = 1e-10 * HARTREE_TO_CM1
TRACE_MAX_QUBITS = 10
MAPPING_TAG = "binary;m=K+J"

_LETTER = np.array(["I", "X", "Z", "Y"])  # indexed by x_bit + 2 z_bit


@dataclass(frozen=True, order=True)
class PauliString:
    """Tensor product of single-qubit Paulis, most significant qubit first."""

    letters: str

    def __post_init__(self):
        if any(c not in "IXYZ" for c in self.letters):
            raise ValueError(f"invalid Pauli string {self.letters!r}")

    def __len__(self):
        return len(self.letters)

    def __str__(self):
        return self.letters

    @property
    def n_qubits(self) -> int:
        return len(self.letters)

    @property
    def weight(self) -> int:
        return sum(c != "I" for c in self.letters)

    @property
    def masks(self) -> tuple:
        x = z = 0
        for c in self.letters:
            x = (x << 1) | (c in "XY")
            z = (z << 1) | (c in "ZY")
        return x, z

    @classmethod
    def from_masks(cls, x: int, z: int, n: int) -> "PauliString":
        return cls("".join(_LETTER[((x >> q) & 1) + 2 * ((z >> q) & 1)] for q in range(n - 1, -1, -1)))

    def matrix(self) -> np.ndarray:
        return _masks_to_matrix(*self.masks, self.n_qubits)


class PauliSum:
    """Real-weighted sum of Pauli strings, stored in canonical (lexicographic) order.

    Parameters
    ----------
    coeffs : array_like
        Real coefficients in cm^-1.
    strings : sequence of str
        Pauli strings, all of length ``n_qubits``.
    n_qubits : int
    meta : dict, optional
        Free-form provenance (vmax, J, mapping).
    """

    def __init__(self, coeffs, strings, n_qubits: int, meta: dict | None = None):
        coeffs = np.asarray(coeffs, dtype=float).reshape(-1)
        strings = [str(s) for s in strings]
        if len(strings) != len(coeffs):
            raise ValueError("coefficient and string counts differ")
        if any(len(s) != n_qubits for s in strings):
            raise ValueError(f"all strings must have length {n_qubits}")
        if len(set(strings)) != len(strings):
            raise ValueError("duplicate Pauli strings")
        order = np.argsort(np.array(strings, dtype=f"U{max(n_qubits, 1)}"), kind="stable")
        self.coeffs = coeffs[order]
        self.strings = [strings[i] for i in order]
        self.n_qubits = n_qubits
        self.meta = dict(meta or {})

    def __len__(self):
        return len(self.strings)

    def __iter__(self):
        return iter(zip(self.coeffs, self.strings))

    def __eq__(self, other):
        if not isinstance(other, PauliSum):
            return NotImplemented
        return (self.n_qubits == other.n_qubits and self.strings == other.strings
                and np.array_equal(self.coeffs, other.coeffs))

    def __repr__(self):
        return f"PauliSum(n_qubits={self.n_qubits}, L_q={len(self)})"

    @property
    def L_q(self) -> int:
        return len(self)

    @property
    def weights(self) -> np.ndarray:
        if not self.strings:
            return np.zeros(0, dtype=int)
        arr = np.array([list(s) for s in self.strings])
        return (arr != "I").sum(axis=1)

    def masks(self):
        """(x, z) integer mask arrays, one entry per term."""
        x = np.zeros(len(self), dtype=np.int64)
        z = np.zeros(len(self), dtype=np.int64)
        if not self.strings:
            return x, z
        arr = np.array([list(s) for s in self.strings])
        bits = 1 << np.arange(self.n_qubits - 1, -1, -1, dtype=np.int64)
        x = ((arr == "X") | (arr == "Y")) @ bits
        z = ((arr == "Z") | (arr == "Y")) @ bits
        return x.astype(np.int64), z.astype(np.int64)

    def allclose(self, other: "PauliSum", atol: float = 1e-10) -> bool:
        return (self.n_qubits == other.n_qubits and self.strings == other.strings
                and np.allclose(self.coeffs, other.coeffs, rtol=0, atol=atol))

    def subset(self, keep) -> "PauliSum":
        keep = np.asarray(keep, bool)
        return PauliSum(self.coeffs[keep], [s for s, k in zip(self.strings, keep) if k],
                        self.n_qubits, self.meta)

    def to_matrix(self) -> np.ndarray:
        """Dense 2^n x 2^n matrix sum_k h_k P_k."""
        N = 1 << self.n_qubits
        M = np.zeros((N, N), dtype=complex)
        j = np.arange(N)
        xs, zs = self.masks()
        for h, x, z in zip(self.coeffs, xs, zs):
            M[j ^ x, j] += h * _phase(x, z) * _signs(z, j)
        return M


def _popcount(a):
    a = np.asarray(a, dtype=np.int64)
    c = np.zeros_like(a)
    while np.any(a):
        c += a & 1
        a = a >> 1
    return c


def _phase(x, z):
    return 1j ** (int(_popcount(np.int64(x) & np.int64(z))) % 4)


def _signs(z, j):
    return 1 - 2 * (_popcount(j & z) & 1)


def _masks_to_matrix(x: int, z: int, n: int) -> np.ndarray:
    N = 1 << n
    j = np.arange(N)
    M = np.zeros((N, N), dtype=complex)
    M[j ^ x, j] = _phase(x, z) * _signs(z, j)
    return M


# --- encoding ----------------------------------------------------------------

def _bits(n: int) -> int:
    return 0 if n <= 1 else math.ceil(math.log2(n))


def register_sizes(n_vib: int, vmax: int, J: int) -> tuple:
    """Qubits per register: (vibrational per mode, ..., rotational)."""
    if vmax < 0 or J < 0:
        raise ValueError("vmax and J must be non-negative")
    return (_bits(vmax + 1),) * n_vib + (_bits(2 * J + 1),)


def n_qubits(n_vib: int, vmax: int, J: int) -> int:
    return sum(register_sizes(n_vib, vmax, J))


def encode_basis_index(b: RovibBasisState, vmax: int, J: int) -> str:
    """Bitstring of ``b`` under the binary mapping (most significant bit first)."""
    sizes = register_sizes(len(b.v), vmax, J)
    if b.J != J or abs(b.K) > J:
        raise ValueError(f"state {b} incompatible with J={J}")
    if any(v < 0 or v > vmax for v in b.v):
        raise ValueError(f"vibrational quantum number out of range 0..{vmax} in {b}")
    values = list(b.v) + [b.K + J]
    return "".join(format(val, f"0{n}b") if n else "" for val, n in zip(values, sizes))


def qubit_index(quanta, vmax: int, J: int) -> np.ndarray:
    """Integer qubit index for rows of quanta arrays (v_1..v_N, K + J)."""
    q = np.atleast_2d(np.asarray(quanta, dtype=np.int64))
    sizes = register_sizes(q.shape[1] - 1, vmax, J)
    idx = np.zeros(q.shape[0], dtype=np.int64)
    for col, n in enumerate(sizes):
        idx = (idx << n) | q[:, col]
    return idx


def decode_qubit_index(index, n_vib: int, vmax: int, J: int) -> np.ndarray:
    """Inverse of :func:`qubit_index`; rows may fall outside the physical range."""
    idx = np.atleast_1d(np.asarray(index, dtype=np.int64))
    sizes = register_sizes(n_vib, vmax, J)
    cols = []
    for n in reversed(sizes):
        cols.append(idx & ((1 << n) - 1))
        idx = idx >> n
    return np.stack(cols[::-1], axis=1)


def padded_matrix(H, vmax: int, J: int, n_vib: int = 3) -> np.ndarray:
    """Embed a basis-ordered Hamiltonian into the 2^{N_q} qubit space (zero padding)."""
    from scipy import sparse

    from .watson import RovibBasis

    A = H.matrix if hasattr(H, "matrix") and not isinstance(H, np.ndarray) else H
    A = A.toarray() if sparse.issparse(A) else np.asarray(A)
    basis = RovibBasis(n_vib, vmax, J)
    if A.shape != (basis.size, basis.size):
        raise ValueError(f"matrix shape {A.shape} does not match basis size {basis.size}")
    N = 1 << n_qubits(n_vib, vmax, J)
    idx = qubit_index(basis.quanta, vmax, J)
    out = np.zeros((N, N), dtype=complex)
    out[np.ix_(idx, idx)] = A
    return out


# --- decomposition -----------------------------------------------------------

def _fwht(a: np.ndarray, axis: int = -1) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform along ``axis`` (length 2^n)."""
    a = np.moveaxis(np.array(a, dtype=complex), axis, -1)
    shape = a.shape
    N = shape[-1]
    n = N.bit_length() - 1
    h = 1
    a = a.reshape(-1, N)
    while h < N:
        a = a.reshape(a.shape[0], N // (2 * h), 2, h)
        u, v = a[:, :, 0, :], a[:, :, 1, :]
        a = np.stack((u + v, u - v), axis=2)
        h *= 2
    a = a.reshape(shape)
    assert N == 1 << n
    return np.moveaxis(a, -1, axis)


def _coefficient_table(M: np.ndarray) -> np.ndarray:
    """C[x, z] = 2^-n tr(P_{x,z} M) for all 4^n Pauli strings."""
    M = np.asarray(M)
    N = M.shape[0]
    if M.shape != (N, N) or N & (N - 1):
        raise ValueError(f"matrix dimension must be a power of two, got {M.shape}")
    j = np.arange(N)
    F = M[j[None, :], j[None, :] ^ j[:, None]]  # F[x, j] = M[j, j ^ x]
    W = _fwht(F, axis=1) / N  # W[x, z] = 2^-n sum_j (-1)^{z.j} F[x, j]
    x = j[:, None]
    z = j[None, :]
    phase = 1j ** (_popcount(x & z) % 4)
    return W * phase


def _table_to_sum(C: np.ndarray, n: int, meta=None, tol: float = DROP_TOL) -> PauliSum:
    xs, zs = np.nonzero(np.abs(C) > tol)
    coeffs = C[xs, zs]
    if len(coeffs) == 0:
        return PauliSum([], [], n, meta)
    imag = float(np.max(np.abs(coeffs.imag)))
    meta = dict(meta or {})
    meta["max_imag"] = max(imag, float(meta.get("max_imag", 0.0)))
    codes = np.empty((len(xs), n), dtype=np.int64)
    for q in range(n):
        shift = n - 1 - q
        codes[:, q] = ((xs >> shift) & 1) + 2 * ((zs >> shift) & 1)
    letters = _LETTER[codes]
    strings = ["".join(r) for r in letters] if n else [""] * len(xs)
    return PauliSum(coeffs.real, strings, n, meta)


def pauli_decompose_trace(Hq: np.ndarray, meta: dict | None = None, max_qubits: int = TRACE_MAX_QUBITS,
                          tol: float = DROP_TOL) -> PauliSum:
    """Reference decomposition h_k = 2^-n tr(P_k H_q) of a padded matrix.

    Raises
    ------
    ValueError
        If the dimension is not a power of two or exceeds ``2**max_qubits``.
    """
    Hq = np.asarray(Hq)
    N = Hq.shape[0]
    if Hq.ndim != 2 or Hq.shape[1] != N or N < 1 or N & (N - 1):
        raise ValueError(f"matrix dimension must be a power of two, got {Hq.shape}")
    n = N.bit_length() - 1
    if n > max_qubits:
        raise ValueError(f"{n} qubits exceeds the trace-method limit of {max_qubits}")
    return _table_to_sum(_coefficient_table(Hq), n, meta, tol)


def _xz_kron(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    # Coefficient tables compose like the operators: masks concatenate.
    na, nb = A.shape[0], B.shape[0]
    return np.einsum("ac,bd->abcd", A, B).reshape(na * nb, na * nb)


@lru_cache(maxsize=None)
def _word_table(d: int, nbits: int, word: str) -> np.ndarray:
    N = 1 << nbits
    M = np.zeros((N, N), dtype=complex)
    M[:d, :d] = mode_product(d, word)
    out = _coefficient_table(M)
    out.setflags(write=False)
    return out


def pauli_decompose_factored(model: MoleculeModel, frame: DerivedFrame | None, vmax: int, J: int,
                             groups=ALL_GROUPS, tol: float = DROP_TOL) -> PauliSum:
    """Pauli sum of H assembled from per-register decompositions.

    Each product term ``c * O_1 (x) ... (x) O_N (x) R`` is decomposed register
    by register (zero-padded to the register size) and the coefficient tables
    are combined with Kronecker products, so no 2^{N_q}-dimensional matrix is
    ever formed.
    """
    W = WatsonHamiltonian(model, vmax, J, frame)
    sizes = register_sizes(model.n_vib, vmax, J)
    n = sum(sizes)
    d = vmax + 1
    Nv = 1 << sum(sizes[:-1])
    total = None
    for rot, items in sorted(W._by_rot(groups).items()):
        R = np.zeros((1 << sizes[-1],) * 2, dtype=complex)
        R[: 2 * J + 1, : 2 * J + 1] = W.rot_matrix(rot)
        if not np.any(R):
            continue
        Crot = _coefficient_table(R)
        Cvib = np.zeros((Nv, Nv), dtype=complex)
        for words, c in items:
            t = np.ones((1, 1), dtype=complex)
            for w, nb in zip(words, sizes[:-1]):
                t = _xz_kron(t, _word_table(d, nb, w))
            Cvib += c * t
        block = _xz_kron(Cvib, Crot)
        total = block if total is None else total + block
    if total is None:
        total = np.zeros((1 << n, 1 << n), dtype=complex)
    meta = {"vmax": vmax, "J": J, "mapping": MAPPING_TAG}
    return _table_to_sum(total, n, meta, tol)


# --- statistics --------------------------------------------------------------

def term_statistics(ps: PauliSum, include_identity: bool = True) -> dict:
    """Histogram of terms by weight plus the sorted magnitudes |h|.

    Returns a dict with ``by_weight`` ({weight: count}), ``abs_sorted``
    (descending |h|), ``deciles`` (of |h|) and ``count``.
    """
    if len(ps) == 0:
        raise ValueError("empty Pauli sum")
    w = ps.weights
    mags = np.abs(ps.coeffs)
    if not include_identity:
        w, mags = w[w > 0], mags[w > 0]
    by_weight = {int(k): int(v) for k, v in zip(*np.unique(w, return_counts=True))}
    return {
        "count": int(len(w)),
        "by_weight": by_weight,
        "abs_sorted": np.sort(mags)[::-1],
        "deciles": np.quantile(mags, np.linspace(0, 1, 11)) if len(mags) else np.zeros(11),
    }


def cutoff_filter(ps: PauliSum, lam: float, direction: str = "above") -> PauliSum:
    """Keep terms with |h| > lam (``"above"``) or |h| < lam (``"below"``)."""
    if lam < 0:
        raise ValueError("cutoff must be non-negative")
    mags = np.abs(ps.coeffs)
    if direction == "above":
        keep = mags > lam
    elif direction == "below":
        keep = mags < lam
    else:
        raise ValueError(f"direction must be 'above' or 'below', got {direction!r}")
    out = ps.subset(keep)
    out.meta.update(cutoff=lam, direction=direction)
    return out


def scaling_study(ell: int, etas=range(1, 10)) -> dict:
    """Term counts of the single-mode Q^ell matrix at vmax + 1 = 2^eta.

    Returns ``{"eta": [...], "L_q": [...], "fit": (b, c)}`` where the fit is
    the least-squares line L_q / 2^eta = b eta + c over eta > 1.
    """
    if ell not in (1, 2, 3, 4):
        raise ValueError(f"power must be 1..4, got {ell}")
    etas = [int(e) for e in etas]
    counts = []
    for eta in etas:
        if eta < 1:
            raise ValueError("eta must be positive")
        C = _word_table(1 << eta, eta, "q" * ell)
        counts.append(int(np.count_nonzero(np.abs(C) > DROP_TOL)))
    e = np.array(etas, float)
    y = np.array(counts, float) / 2.0 ** e
    sel = e > 1
    fit = tuple(np.polyfit(e[sel], y[sel], 1)) if sel.sum() >= 2 else (np.nan, np.nan)
    return {"eta": etas, "L_q": counts, "fit": fit}


def fit_Lq_vs_J(model: MoleculeModel, vmax: int, J_list=None, frame=None, counts=None,
                tol: float = COUNT_TOL) -> dict:
    """Power-law fit L_q = c J^kappa on log-log axes.

    ``J_list`` defaults to J = 2^{n-1} - 1 for n = 2..6.  Precomputed
    ``counts`` (one per J) skip the decompositions.
    """
    if J_list is None:
        J_list = [2 ** (n - 1) - 1 for n in range(2, 7)]
    J_arr = np.asarray(J_list, float)
    if len(J_arr) < 2:
        raise ValueError("need at least two J values for a fit")
    if np.any(J_arr <= 0):
        raise ValueError("J values must be positive for a log-log fit")
    if counts is None:
        counts = [len(pauli_decompose_factored(model, frame, vmax, int(J), tol=tol)) for J in J_list]
    kappa, logc = np.polyfit(np.log(J_arr), np.log(np.asarray(counts, float)), 1)
    return {"J": list(J_list), "L_q": list(counts), "c": float(np.exp(logc)), "kappa": float(kappa)}


# --- file format -------------------------------------------------------------

def write_pauli_sum(ps: PauliSum, path) -> None:
    """One term per line: ``coefficient_cm1 STRING``; header lines start with '#'."""
    with open(path, "w") as fh:
        fh.write(f"# n_qubits {ps.n_qubits}\n")
        for key in ("vmax", "J", "mapping", "cutoff", "direction"):
            if key in ps.meta:
                fh.write(f"# {key} {ps.meta[key]}\n")
        fh.write(f"# L_q {len(ps)}\n")
        for h, s in ps:
            fh.write(f"{h:.12e} {s or '-'}\n")


def read_pauli_sum(path) -> PauliSum:
    meta, coeffs, strings = {}, [], []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                k, v = line[1:].split(None, 1)
                meta[k] = v.strip()
            elif line.strip():
                h, s = line.split()
                coeffs.append(float(h))
                strings.append("" if s == "-" else s)
    n = int(meta.pop("n_qubits"))
    meta.pop("L_q", None)
    for k in ("vmax", "J"):
        if k in meta:
            meta[k] = int(meta[k])
    return PauliSum(coeffs, strings, n, meta)
