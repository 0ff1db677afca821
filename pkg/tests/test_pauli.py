import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rovibqsci.pauli import (COUNT_TOL, PauliString, PauliSum, cutoff_filter, decode_qubit_index,
                             encode_basis_index, fit_Lq_vs_J, n_qubits, padded_matrix, pauli_decompose_factored,
                             pauli_decompose_trace, qubit_index, read_pauli_sum, register_sizes, scaling_study,
                             term_statistics, write_pauli_sum)
from rovibqsci.watson import RovibBasis, RovibBasisState, build_full

PAULI = {"I": np.eye(2), "X": np.array([[0, 1], [1, 0]]), "Y": np.array([[0, -1j], [1j, 0]]),
         "Z": np.diag([1, -1])}


def kron_string(s):
    M = np.eye(1)
    for c in s:
        M = np.kron(M, PAULI[c])
    return M


def test_qubit_counts():
    assert n_qubits(3, 3, 0) == 6
    assert n_qubits(3, 7, 0) == 9
    assert n_qubits(3, 3, 31) == 12
    assert register_sizes(3, 1, 1) == (1, 1, 1, 2)


def test_encoding_examples():
    assert encode_basis_index(RovibBasisState((0, 0, 0), 0, 0), 3, 0) == "000000"
    assert encode_basis_index(RovibBasisState((0, 3, 0), 0, 0), 3, 0)[2:4] == "11"
    assert encode_basis_index(RovibBasisState((0, 0, 0), 1, -1), 3, 1)[-2:] == "00"
    with pytest.raises(ValueError):
        encode_basis_index(RovibBasisState((4, 0, 0), 0, 0), 3, 0)


@settings(max_examples=50, deadline=None)
@given(vmax=st.integers(0, 8), J=st.integers(0, 9), data=st.data())
def test_encode_decode_roundtrip(vmax, J, data):
    v = tuple(data.draw(st.integers(0, vmax)) for _ in range(3))
    K = data.draw(st.integers(-J, J))
    b = RovibBasisState(v, J, K)
    bits = encode_basis_index(b, vmax, J)
    idx = qubit_index([v + (K + J,)], vmax, J)[0]
    assert int(bits or "0", 2) == idx  # vmax=0, J=0 needs no qubits
    np.testing.assert_array_equal(decode_qubit_index(idx, 3, vmax, J)[0], list(v) + [K + J])


def test_pauli_string_matrix():
    for s in ["XYZI", "IIII", "YYXZ", "ZIYX"]:
        np.testing.assert_allclose(PauliString(s).matrix(), kron_string(s))
    x, z = PauliString("XYZI").masks
    assert PauliString.from_masks(x, z, 4).letters == "XYZI"
    assert PauliString("XYZI").weight == 3
    with pytest.raises(ValueError):
        PauliString("XQ")


def test_pauli_sum_canonical_and_duplicates():
    a = PauliSum([1.0, 2.0], ["ZI", "XI"], 2)
    b = PauliSum([2.0, 1.0], ["XI", "ZI"], 2)
    assert a == b and a.strings == ["XI", "ZI"]
    with pytest.raises(ValueError):
        PauliSum([1.0, 1.0], ["XI", "XI"], 2)


def test_trace_identity_and_errors():
    ps = pauli_decompose_trace(np.eye(8))
    assert ps.strings == ["III"] and ps.coeffs.tolist() == [1.0]
    with pytest.raises(ValueError):
        pauli_decompose_trace(np.eye(6))
    with pytest.raises(ValueError):
        pauli_decompose_trace(np.eye(4), max_qubits=1)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(1, 5), seed=st.integers(0, 2 ** 31))
def test_trace_reconstruction_random_hermitian(n, seed):
    r = np.random.default_rng(seed)
    N = 1 << n
    A = r.normal(size=(N, N)) + 1j * r.normal(size=(N, N))
    A = A + A.conj().T
    ps = pauli_decompose_trace(A)
    np.testing.assert_allclose(ps.to_matrix(), A, atol=1e-10)
    assert ps.meta["max_imag"] < 1e-12
    # brute-force trace oracle on one term
    h, s = next(iter(ps))
    assert h == pytest.approx(np.trace(kron_string(s) @ A).real / N, abs=1e-10)


@pytest.mark.parametrize("vmax,J", [(1, 0), (3, 0), (1, 1), (1, 2), (3, 1)])
def test_trace_equals_factored_and_reconstructs(model, frame, vmax, J):
    Hq = padded_matrix(build_full(model, frame, vmax, J), vmax, J)
    a = pauli_decompose_trace(Hq)
    b = pauli_decompose_factored(model, frame, vmax, J)
    assert a.strings == b.strings
    np.testing.assert_allclose(a.coeffs, b.coeffs, atol=1e-10)
    np.testing.assert_allclose(b.to_matrix(), Hq, atol=1e-10)
    assert a.meta["max_imag"] < 1e-12
    # padded rows and columns stay exactly zero
    phys = qubit_index(RovibBasis(3, vmax, J).quanta, vmax, J)
    pad = np.setdiff1d(np.arange(Hq.shape[0]), phys)
    assert np.all(Hq[pad] == 0) and np.all(Hq[:, pad] == 0)


@pytest.mark.parametrize("vmax,expected", [(1, 20), (3, 773)])
def test_J0_counts(model, frame, vmax, expected):
    assert len(pauli_decompose_factored(model, frame, vmax, 0, tol=COUNT_TOL)) == expected


def test_J0_counts_independent_of_rotational_register(model, frame):
    # at J = 0 there are no rotational qubits, so no rotational convention can matter
    assert register_sizes(3, 3, 0)[-1] == 0


def test_statistics_and_cutoff(model, frame):
    ps = pauli_decompose_factored(model, frame, 3, 0)
    assert cutoff_filter(ps, 0.0) == ps.subset(np.abs(ps.coeffs) > 0)
    assert len(cutoff_filter(ps, np.inf)) == 0
    kept = cutoff_filter(ps, 110.0)
    stats = term_statistics(kept, include_identity=False)
    assert stats["count"] == 40
    assert stats["by_weight"] == {1: 11, 2: 17, 3: 10, 4: 2}
    below = cutoff_filter(ps, 110.0, "below")
    assert len(below) + len(kept) == len(ps)
    one = PauliSum([2.0], ["XZ"], 2)
    assert term_statistics(one)["by_weight"] == {2: 1}
    with pytest.raises(ValueError):
        term_statistics(PauliSum([], [], 2))
    with pytest.raises(ValueError):
        cutoff_filter(ps, -1.0)


def test_file_roundtrip(model, frame, tmp_path):
    ps = pauli_decompose_factored(model, frame, 1, 1)
    path = tmp_path / "h.pauli"
    write_pauli_sum(ps, path)
    again = read_pauli_sum(path)
    assert again.allclose(ps, atol=1e-9)
    assert again.meta["mapping"] == ps.meta["mapping"]


@pytest.mark.parametrize("eta", range(1, 10))
def test_scaling_closed_forms(eta):
    one = scaling_study(1, [eta])["L_q"][0]
    assert one == eta * 2 ** (eta - 1)
    if eta > 1:
        assert scaling_study(3, [eta])["L_q"][0] == (eta - 1) * 2 ** eta


def test_scaling_examples():
    assert scaling_study(1, [3])["L_q"] == [12]
    assert scaling_study(3, [4])["L_q"] == [48]
    with pytest.raises(ValueError):
        scaling_study(5)


def test_power_law_fit_exact_recovery(model):
    J = [1, 3, 7, 15]
    fit = fit_Lq_vs_J(model, 1, J, counts=[50 * j ** 1.25 for j in J])
    assert fit["c"] == pytest.approx(50, rel=1e-10) and fit["kappa"] == pytest.approx(1.25, rel=1e-10)
    with pytest.raises(ValueError):
        fit_Lq_vs_J(model, 1, [3], counts=[10])


def test_Lq_plateau_for_shared_rotational_register(model, frame):
    counts = [len(pauli_decompose_factored(model, frame, 3, J, tol=COUNT_TOL)) for J in range(16, 32)]
    print(f"L_q(vmax=3, J=16..31) min {min(counts)} max {max(counts)}")
    assert min(counts) >= 195000 and max(counts) <= 209000
