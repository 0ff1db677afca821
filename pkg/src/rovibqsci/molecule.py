"""Molecular parameters and the derived Eckart-frame quantities.

A :class:`MoleculeModel` holds everything the Watson Hamiltonian needs as
input data: masses, the equilibrium geometry, the normal-mode matrix ``L``,
harmonic frequencies and the reduced cubic/quartic force constants.  The
:class:`DerivedFrame` collects the quantities computed from it (inertia
tensor, Coriolis matrices, ``a_k`` matrices and the inverse-inertia
expansion coefficients).

All derived quantities are in Hartree atomic units (masses in electron
masses, lengths in bohr, normal coordinates in sqrt(m_e)*bohr) unless the
name says otherwise.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .units import AMU_TO_ME, CM1_TO_HARTREE, HARTREE_TO_CM1

__all__ = [
    "ModelParseError",
    "ModelValidationError",
    "MoleculeModel",
    "DerivedFrame",
    "MU_COEFFICIENTS",
    "bundled_model_path",
    "load_model",
    "model_from_dict",
    "inertia_tensor",
    "equilibrium_inertia",
    "coriolis_coefficients",
    "a_matrices",
    "mu_expansion",
    "derive_frame",
    "levi_civita",
]

#: Taylor coefficients of (1 + x/2)^-2, used in the inverse-inertia expansion.
MU_COEFFICIENTS = (1.0, -1.0, 3.0 / 4.0, -1.0 / 2.0, 5.0 / 16.0)

# Raw data printed to four decimals cannot satisfy the strict invariants, so
# the loader accepts deviations up to this size and then refines L.
RAW_L_TOLERANCE = 2e-3
ORTHONORMAL_TOL = 1e-10
ECKART_TOL = 1e-8


class ModelParseError(ValueError):
    """The model file is malformed or misses required fields."""


class ModelValidationError(ValueError):
    """The model data violates a physical invariant."""


def levi_civita() -> np.ndarray:
    eps = np.zeros((3, 3, 3))
    for i, j, k in itertools.permutations(range(3)):
        eps[i, j, k] = np.linalg.det(np.eye(3)[[i, j, k]])
    return eps


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _symmetric_tensor(values: dict, n: int, order: int) -> np.ndarray:
    t = np.zeros((n,) * order)
    for idx, val in values.items():
        for perm in set(itertools.permutations(idx)):
            t[perm] = val
    return t


@dataclass(frozen=True)
class MoleculeModel:
    """Validated molecular parameters.

    Attributes
    ----------
    symbols : tuple of str
    masses_u : (Na,) array
        Atomic masses in unified atomic mass units.
    coords : (Na, 3) array
        Equilibrium positions in bohr, principal-axis frame.
    L : (3*Na, Nvib) array
        Normal-mode matrix (refined to satisfy orthonormality and Eckart
        conditions exactly).
    omega_cm1 : (Nvib,) array
        Harmonic frequencies.
    cubic, quartic : dict
        Reduced force constants in cm^-1 keyed by sorted 0-based index tuples.
    vmax : int
        Default maximum vibrational quantum number per mode.
    parity_modes : tuple of int
        0-based modes whose quanta enter the exchange parity.
    parity_include_K : bool
        Whether K enters the exchange parity.
    """

    symbols: tuple
    masses_u: np.ndarray
    coords: np.ndarray
    L: np.ndarray
    omega_cm1: np.ndarray
    cubic: dict
    quartic: dict
    vmax: int = 3
    axes: tuple = ("a", "b", "c")
    parity_modes: tuple = ()
    parity_include_K: bool = True
    name: str = ""
    L_raw: np.ndarray | None = field(default=None, compare=False, repr=False)

    @property
    def n_atoms(self) -> int:
        return len(self.symbols)

    @property
    def n_vib(self) -> int:
        return self.L.shape[1]

    @property
    def masses_me(self) -> np.ndarray:
        return self.masses_u * AMU_TO_ME

    @property
    def omega_hartree(self) -> np.ndarray:
        return self.omega_cm1 * CM1_TO_HARTREE

    @property
    def cubic_tensor(self) -> np.ndarray:
        """Fully symmetric reduced cubic constants (cm^-1)."""
        return _symmetric_tensor(self.cubic, self.n_vib, 3)

    @property
    def quartic_tensor(self) -> np.ndarray:
        return _symmetric_tensor(self.quartic, self.n_vib, 4)

    def L_atom(self, n: int) -> np.ndarray:
        """(3, Nvib) block of L for atom ``n``."""
        return self.L[3 * n:3 * n + 3]

    def with_masses(self, masses_u) -> "MoleculeModel":
        """Same model with different masses (geometry and L kept as is)."""
        return MoleculeModel(
            symbols=self.symbols, masses_u=_readonly(masses_u), coords=self.coords,
            L=self.L, omega_cm1=self.omega_cm1, cubic=self.cubic, quartic=self.quartic,
            vmax=self.vmax, axes=self.axes, parity_modes=self.parity_modes,
            parity_include_K=self.parity_include_K, name=self.name, L_raw=self.L_raw,
        )

    def with_mode_order(self, order) -> "MoleculeModel":
        """Permute the normal modes (columns of L and all mode-indexed data)."""
        order = list(order)
        inv = {old: new for new, old in enumerate(order)}

        def remap(d):
            return {tuple(sorted(inv[i] for i in k)): v for k, v in d.items()}

        return MoleculeModel(
            symbols=self.symbols, masses_u=self.masses_u, coords=self.coords,
            L=_readonly(self.L[:, order]), omega_cm1=_readonly(self.omega_cm1[order]),
            cubic=remap(self.cubic), quartic=remap(self.quartic), vmax=self.vmax,
            axes=self.axes, parity_modes=tuple(sorted(inv[m] for m in self.parity_modes)),
            parity_include_K=self.parity_include_K, name=self.name,
            L_raw=None if self.L_raw is None else _readonly(self.L_raw[:, order]),
        )


@dataclass(frozen=True)
class DerivedFrame:
    """Frame quantities derived from a :class:`MoleculeModel`.

    Attributes
    ----------
    inertia : (3, 3) array
        Equilibrium inertia tensor (m_e bohr^2), diagonal.
    rotational_constants_cm1 : (3,) array
        hbar^2 / (2 I_aa) etc. in cm^-1, in model axis order.
    zeta : (3, Nvib, Nvib) array
        Coriolis coupling matrices, one per axis.
    a : (Nvib, 3, 3) array
        Inertia derivatives dI/dQ_k at equilibrium.
    mu : tuple of arrays
        ``mu[l]`` has shape (3, 3) + (Nvib,) * l; the order-l term of the
        inverse inertia tensor is sum mu[l][:, :, k1..kl] Q_k1 ... Q_kl.
    """

    inertia: np.ndarray
    rotational_constants_cm1: np.ndarray
    zeta: np.ndarray
    a: np.ndarray
    mu: tuple
    omega_hartree: np.ndarray

    @property
    def n_vib(self) -> int:
        return self.zeta.shape[1]


def bundled_model_path(name: str = "h2o") -> Path:
    return Path(str(resources.files("rovibqsci") / "data" / f"{name}.model"))


def _c2v_triatomic(geom: dict, masses: np.ndarray, orientation: int = -1) -> np.ndarray:
    """Central atom first, then the two equivalent atoms, in the b-c plane.

    The Eckart conditions fix the placement only up to inversion r -> -r,
    which flips the sign of every a_k.  ``orientation=-1`` puts the central
    atom on -c and the first terminal atom on -b; together with the bundled
    L matrix and force constants this reproduces the reference spectrum.
    """
    r = float(geom["bond_bohr"])
    half = np.deg2rad(float(geom["angle_deg"])) / 2.0
    b0, h = r * np.sin(half), r * np.cos(half)
    m0, m1 = masses[0], masses[1]
    c_center = 2 * m1 * h / (m0 + 2 * m1)
    return orientation * np.array([
        [0.0, 0.0, c_center],
        [0.0, b0, c_center - h],
        [0.0, -b0, c_center - h],
    ])


def _parse_index_map(raw, order: int, n_vib: int, what: str) -> dict:
    out = {}
    for key, val in (raw or {}).items():
        # "133" for single-digit mode numbers, "1,3,3" otherwise
        key_s = str(key)
        digits = key_s.split(",") if "," in key_s else list(key_s)
        try:
            idx = tuple(sorted(int(d) - 1 for d in digits))
        except ValueError as exc:
            raise ModelParseError(f"bad {what} index {key!r}") from exc
        if len(idx) != order or min(idx) < 0 or max(idx) >= n_vib:
            raise ModelParseError(f"{what} index {key!r} out of range")
        if idx in out:
            raise ModelParseError(f"duplicate {what} index {key!r}")
        out[idx] = float(val)
    return out


def _external_basis(masses_me: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """Orthonormal basis of mass-weighted translations and rotations."""
    na = len(masses_me)
    sq = np.sqrt(masses_me)
    eps = levi_civita()
    vecs = []
    for alpha in range(3):
        t = np.zeros((na, 3))
        t[:, alpha] = sq
        vecs.append(t.ravel())
    for alpha in range(3):
        # Rotational Eckart: sum_n sqrt(m_n) eps_{alpha beta gamma} r_{n beta} L_{n gamma}
        w = sq[:, None] * np.einsum("bg,nb->ng", eps[alpha], coords)
        vecs.append(w.ravel())
    V = np.array(vecs).T
    U, s, _ = np.linalg.svd(V, full_matrices=False)
    return U[:, s > 1e-10 * s.max()]


def eckart_residuals(masses, coords, L):
    """Translational and rotational Eckart sums, each of shape (3, Nvib)."""
    sq = np.sqrt(np.asarray(masses, float))
    Ls = L.reshape(len(sq), 3, -1)
    trans = np.einsum("n,nak->ak", sq, Ls)
    rot = np.einsum("n,abg,nb,ngk->ak", sq, levi_civita(), coords, Ls)
    return trans, rot


def _refine_L(L: np.ndarray, masses_me: np.ndarray, coords: np.ndarray) -> np.ndarray:
    E = _external_basis(masses_me, coords)
    P = L - E @ (E.T @ L)
    w, U = np.linalg.eigh(P.T @ P)
    L = P @ (U @ np.diag(w ** -0.5) @ U.T)
    # Entries that vanish by symmetry come out as round-off; keep them exact.
    L[np.abs(L) < 1e-12] = 0.0
    return L


def model_from_dict(d: dict, refine: bool = True) -> MoleculeModel:
    """Build and validate a model from a parsed model-file mapping.

    With ``refine=True`` the L matrix is projected onto the Eckart-allowed
    vibrational subspace and symmetrically orthonormalized, after checking
    that the raw matrix is within rounding distance of satisfying both.
    """
    try:
        atoms = d["atoms"]
        symbols = tuple(str(a["symbol"]) for a in atoms)
        masses_u = np.array([float(a["mass_u"]) for a in atoms])
        modes = d["modes"]
        omega = np.array(modes["omega_cm1"], dtype=float)
        L = np.array(modes["L"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelParseError(f"malformed model: {exc}") from exc

    na, nvib = len(symbols), len(omega)
    if L.shape != (3 * na, nvib):
        raise ModelParseError(f"L has shape {L.shape}, expected {(3 * na, nvib)}")
    axes = tuple(d.get("axes", ("a", "b", "c")))
    if sorted(axes) != ["a", "b", "c"]:
        raise ModelParseError(f"axes must be a permutation of a, b, c; got {axes}")

    geom = d.get("geometry")
    if geom is not None:
        if geom.get("type") != "c2v_triatomic" or na != 3:
            raise ModelParseError("only c2v_triatomic internal geometry is supported")
        coords = _c2v_triatomic(geom, masses_u, int(geom.get("orientation", -1)))
    else:
        try:
            coords = np.array([a["re_bohr"] for a in atoms], dtype=float)
        except KeyError as exc:
            raise ModelParseError("atoms need re_bohr when no geometry block is given") from exc
        if coords.shape != (na, 3):
            raise ModelParseError("re_bohr must have three components")

    if np.any(masses_u <= 0):
        raise ModelValidationError("masses must be positive")
    if np.any(omega <= 0):
        raise ModelValidationError("harmonic frequencies must be positive")

    cubic = _parse_index_map(d.get("cubic"), 3, nvib, "cubic")
    quartic = _parse_index_map(d.get("quartic"), 4, nvib, "quartic")

    parity = d.get("parity", {}) or {}
    parity_modes = tuple(int(m) - 1 for m in parity.get("modes", []))
    if any(m < 0 or m >= nvib for m in parity_modes):
        raise ModelParseError("parity mode out of range")

    masses_me = masses_u * AMU_TO_ME
    L_raw = L.copy()
    if refine:
        _check_L(L, masses_u, coords, RAW_L_TOLERANCE, RAW_L_TOLERANCE, relative=True)
        L = _refine_L(L, masses_me, coords)
    _check_L(L, masses_u, coords, ORTHONORMAL_TOL, ECKART_TOL, relative=False)

    return MoleculeModel(
        symbols=symbols, masses_u=_readonly(masses_u), coords=_readonly(coords),
        L=_readonly(L), omega_cm1=_readonly(omega), cubic=cubic, quartic=quartic,
        vmax=int(d.get("vmax", 3)), axes=axes, parity_modes=parity_modes,
        parity_include_K=bool(parity.get("include_K", True)), name=str(d.get("name", "")),
        L_raw=_readonly(L_raw),
    )


def _check_L(L, masses_u, coords, orth_tol, eck_tol, relative):
    dev = np.abs(L.T @ L - np.eye(L.shape[1])).max()
    if dev > orth_tol:
        raise ModelValidationError(f"L columns not orthonormal (max |L^T L - 1| = {dev:.3g})")
    trans, rot = eckart_residuals(masses_u, coords, L)
    if relative:
        # Compare against the size of the individual contributions.
        sq = np.sqrt(masses_u)
        trans = trans / np.sqrt(np.sum(sq ** 2))
        rot = rot / np.sqrt(np.sum(masses_u * np.sum(coords ** 2, axis=1)))
    if np.abs(trans).max() > eck_tol:
        raise ModelValidationError(f"translational Eckart condition violated ({np.abs(trans).max():.3g})")
    if np.abs(rot).max() > eck_tol:
        raise ModelValidationError(f"rotational Eckart condition violated ({np.abs(rot).max():.3g})")


def load_model(path=None, refine: bool = True) -> MoleculeModel:
    """Load a molecule model file; the bundled H2O model when ``path`` is None."""
    path = bundled_model_path() if path is None else Path(path)
    try:
        with open(path) as fh:
            d = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ModelParseError(f"{path}: {exc}") from exc
    if not isinstance(d, dict):
        raise ModelParseError(f"{path}: expected a mapping at top level")
    return model_from_dict(d, refine=refine)


def inertia_tensor(masses, coords) -> np.ndarray:
    coords = np.asarray(coords, float)
    r2 = np.sum(coords ** 2, axis=1)
    return np.einsum("n,nab->ab", np.asarray(masses, float),
                     r2[:, None, None] * np.eye(3) - coords[:, :, None] * coords[:, None, :])


def equilibrium_inertia(model: MoleculeModel):
    """Equilibrium inertia tensor (a.u.) and rotational constants (cm^-1)."""
    I = inertia_tensor(model.masses_me, model.coords)
    diag = np.diag(I)
    if np.linalg.matrix_rank(I, tol=1e-8 * np.abs(I).max()) < 3 or np.any(diag <= 1e-8 * diag.max()):
        raise ModelValidationError("singular inertia tensor: the nonlinear-molecule formalism does not apply")
    off = np.abs(I - np.diag(diag)).max()
    if off > 1e-8 * diag.max():
        raise ModelValidationError(f"equilibrium geometry is not in the principal-axis frame (off-diagonal {off:.3g})")
    I = np.diag(diag)
    return I, HARTREE_TO_CM1 / (2.0 * diag)


def coriolis_coefficients(model: MoleculeModel) -> np.ndarray:
    """zeta[alpha, k, l] = sum_n eps_{alpha beta gamma} L_{n beta,k} L_{n gamma,l}."""
    Ls = model.L.reshape(model.n_atoms, 3, model.n_vib)
    z = np.einsum("abg,nbk,ngl->akl", levi_civita(), Ls, Ls)
    return 0.5 * (z - np.transpose(z, (0, 2, 1)))  # exact antisymmetry despite round-off


def a_matrices(model: MoleculeModel) -> np.ndarray:
    """Inertia derivatives a_k (shape (Nvib, 3, 3), a.u.)."""
    sq = np.sqrt(model.masses_me)
    Ls = model.L.reshape(model.n_atoms, 3, model.n_vib)
    r = model.coords
    dot = np.einsum("n,ng,ngk->k", sq, r, Ls)
    # 2 sum_n sqrt(m_n) (delta_ab r_n . L_nk - r_nb L_na,k)
    cross = np.einsum("n,nb,nak->kab", sq, r, Ls)
    return 2.0 * (dot[:, None, None] * np.eye(3) - cross)


def _inv_sqrt_sym(I):
    w, U = np.linalg.eigh(I)
    return U @ np.diag(w ** -0.5) @ U.T


def mu_expansion(frame: DerivedFrame, order: int) -> np.ndarray:
    """Order-``order`` coefficient tensor of the inverse inertia tensor.

    Returns an array of shape (3, 3) + (Nvib,) * order such that
    mu_order(Q) = sum over k1..kl of T[:, :, k1, ..., kl] Q_k1 ... Q_kl.
    """
    if order not in range(5):
        raise ValueError(f"mu expansion order must be 0..4, got {order}")
    return frame.mu[order]


def _mu_tensors(I: np.ndarray, a: np.ndarray) -> tuple:
    Ih = _inv_sqrt_sym(I)
    B = np.einsum("ij,kjl,lm->kim", Ih, a, Ih)  # (Nvib, 3, 3)
    out = []
    # T holds the product B_k1 ... B_kl with shape (3, 3, k1, ..., kl)
    T = np.eye(3)
    for ell, c in enumerate(MU_COEFFICIENTS):
        if ell > 0:
            T = np.einsum("ij...,kjl->il...k", T, B)
        out.append(_readonly(c * np.einsum("ij,jk...,kl->il...", Ih, T, Ih)))
    return tuple(out)


def derive_frame(model: MoleculeModel) -> DerivedFrame:
    I, rot = equilibrium_inertia(model)
    zeta = coriolis_coefficients(model)
    a = a_matrices(model)
    return DerivedFrame(
        inertia=_readonly(I), rotational_constants_cm1=_readonly(rot),
        zeta=_readonly(zeta), a=_readonly(a), mu=_mu_tensors(I, a),
        omega_hartree=_readonly(model.omega_hartree),
    )
