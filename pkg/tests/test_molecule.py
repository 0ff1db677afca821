import dataclasses

import numpy as np
import pytest
import yaml

from rovibqsci.molecule import (MU_COEFFICIENTS, ModelParseError, ModelValidationError, a_matrices,
                                bundled_model_path, coriolis_coefficients, derive_frame, eckart_residuals,
                                equilibrium_inertia, inertia_tensor, levi_civita, load_model, model_from_dict,
                                mu_expansion)


def raw_dict():
    with open(bundled_model_path()) as fh:
        return yaml.safe_load(fh)


def test_bundled_frequencies_and_geometry(model):
    np.testing.assert_allclose(model.omega_cm1, [3830.87, 1649.74, 3940.46])
    O, H1, H2 = model.coords
    r = np.linalg.norm(H1 - O)
    cosang = np.dot(H1 - O, H2 - O) / (r * np.linalg.norm(H2 - O))
    assert r == pytest.approx(1.8121, abs=1e-10)
    assert np.degrees(np.arccos(cosang)) == pytest.approx(104.368, abs=1e-8)


def test_L_invariants(model):
    assert np.abs(model.L.T @ model.L - np.eye(3)).max() < 1e-10
    trans, rot = eckart_residuals(model.masses_u, model.coords, model.L)
    assert np.abs(trans).max() < 1e-8
    assert np.abs(rot).max() < 1e-8
    # refinement only removes rounding of the printed matrix
    assert np.abs(model.L - model.L_raw).max() < 1e-3


def test_center_of_mass_at_origin(model):
    com = model.masses_u @ model.coords
    assert np.abs(com).max() < 1e-12


def test_rotational_constants(frame):
    np.testing.assert_allclose(frame.rotational_constants_cm1, [9.49, 27.24, 14.57], atol=0.05)


def test_inertia_principal_axes(model, frame):
    I = inertia_tensor(model.masses_me, model.coords)
    off = np.abs(I - np.diag(np.diag(I))).max()
    assert off < 1e-8 * np.diag(I).max()


def test_doubling_masses_halves_constants(model, frame):
    _, rot2 = equilibrium_inertia(model.with_masses(2 * model.masses_u))
    np.testing.assert_allclose(rot2, frame.rotational_constants_cm1 / 2, rtol=1e-12)


def test_collinear_geometry_rejected(model):
    coords = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 1.8], [0.0, 0.0, -1.8]])
    linear = dataclasses.replace(model, coords=coords)
    with pytest.raises(ModelValidationError, match="singular"):
        equilibrium_inertia(linear)


def test_coriolis_antisymmetric(frame):
    z = frame.zeta
    np.testing.assert_array_equal(z, -np.transpose(z, (0, 2, 1)))
    assert np.all(np.diagonal(z, axis1=1, axis2=2) == 0)


def test_coriolis_direct_oracle(model):
    eps = levi_civita()
    L = model.L
    n = model.n_vib
    z = np.zeros((3, n, n))
    for a in range(3):
        for k in range(n):
            for l in range(n):
                for atom in range(model.n_atoms):
                    for b in range(3):
                        for g in range(3):
                            z[a, k, l] += eps[a, b, g] * L[3 * atom + b, k] * L[3 * atom + g, l]
    np.testing.assert_allclose(coriolis_coefficients(model), z, atol=1e-14)


def test_coriolis_mode_permutation(model):
    order = [2, 0, 1]
    z = coriolis_coefficients(model)
    zp = coriolis_coefficients(model.with_mode_order(order))
    np.testing.assert_allclose(zp, z[:, order][:, :, order], atol=1e-14)


def test_a_matrices_finite_difference(model):
    a = a_matrices(model)
    m = model.masses_me
    delta = 1e-4
    for k in range(model.n_vib):
        disp = (model.L[:, k].reshape(-1, 3)) / np.sqrt(m)[:, None]
        Ip = inertia_tensor(m, model.coords + delta * disp)
        Im = inertia_tensor(m, model.coords - delta * disp)
        np.testing.assert_allclose(a[k], (Ip - Im) / (2 * delta), atol=1e-6)
        np.testing.assert_allclose(a[k], a[k].T, atol=1e-12)


def test_zero_L_column_gives_zero_a(model):
    L = model.L.copy()
    L[:, 1] = 0.0
    a = a_matrices(dataclasses.replace(model, L=L))
    assert np.all(a[1] == 0)


def _mu_sum(frame, Q, order):
    total = np.zeros((3, 3))
    for ell in range(order + 1):
        T = mu_expansion(frame, ell)
        for _ in range(ell):
            T = T @ Q
        total += T
    return total


def _inverse_Iprime(frame, Q):
    # I' = I_e + sum_k a_k Q_k + 1/4 sum_kl a_k I_e^-1 a_l Q_k Q_l
    I = frame.inertia
    A = np.einsum("kab,k->ab", frame.a, Q)
    Ip = I + A + 0.25 * A @ np.linalg.inv(I) @ A
    return np.linalg.inv(Ip)


def test_mu_order_zero_and_coefficients(frame):
    np.testing.assert_allclose(mu_expansion(frame, 0), np.diag(1 / np.diag(frame.inertia)), rtol=1e-14)
    assert MU_COEFFICIENTS == (1.0, -1.0, 0.75, -0.5, 0.3125)
    for ell in range(5):
        T = mu_expansion(frame, ell)
        # mu_l^T with the Q indices reversed is mu_l
        Tt = np.transpose(T, (1, 0) + tuple(range(T.ndim - 1, 1, -1)))
        np.testing.assert_allclose(T, Tt, atol=1e-14 * np.abs(T).max())
    with pytest.raises(ValueError):
        mu_expansion(frame, 5)


def test_mu_expansion_matches_inverse(frame, rng):
    for _ in range(5):
        Q = rng.normal(size=3)
        Q *= 0.2 / np.linalg.norm(Q)
        exact = _inverse_Iprime(frame, Q)
        approx = _mu_sum(frame, Q, 4)
        assert np.abs(approx - exact).max() <= 1e-4 * np.abs(exact).max()


def test_mu_truncation_error_is_fifth_order(frame):
    Q = np.array([0.3, -0.5, 0.2])
    Q /= np.linalg.norm(Q)
    errs = [np.abs(_mu_sum(frame, s * Q, 4) - _inverse_Iprime(frame, s * Q)).max() for s in (2.0, 1.0)]
    assert 16 <= errs[0] / errs[1] <= 64


def test_non_orthonormal_L_rejected():
    d = raw_dict()
    d["modes"]["L"][2][1] *= 1.5
    with pytest.raises(ModelValidationError):
        model_from_dict(d)


def test_parse_errors(tmp_path):
    d = raw_dict()
    del d["modes"]
    with pytest.raises(ModelParseError):
        model_from_dict(d)
    bad = tmp_path / "bad.model"
    bad.write_text("atoms: [unclosed\n")
    with pytest.raises(ModelParseError):
        load_model(bad)
    d = raw_dict()
    d["cubic"] = {"114": 1.0}
    with pytest.raises(ModelParseError, match="out of range"):
        model_from_dict(d)


def test_nonpositive_frequency_rejected():
    d = raw_dict()
    d["modes"]["omega_cm1"][1] = -1.0
    with pytest.raises(ModelValidationError):
        model_from_dict(d)


def test_force_constant_tensors_symmetric(model):
    c = model.cubic_tensor
    for perm in [(1, 0, 2), (0, 2, 1), (2, 1, 0)]:
        np.testing.assert_array_equal(c, np.transpose(c, perm))
    q = model.quartic_tensor
    for perm in [(1, 0, 2, 3), (0, 1, 3, 2), (3, 1, 2, 0)]:
        np.testing.assert_array_equal(q, np.transpose(q, perm))


def test_frame_is_immutable(frame):
    with pytest.raises(ValueError):
        frame.zeta[0, 0, 1] = 1.0
    assert derive_frame(load_model()).rotational_constants_cm1.tolist() == frame.rotational_constants_cm1.tolist()
