"""Pauli decomposition of the J = 0 Hamiltonian and the effect of a magnitude cutoff."""

from rovibqsci import derive_frame, load_model
from rovibqsci.pauli import COUNT_TOL, cutoff_filter, pauli_decompose_factored, scaling_study, term_statistics

model = load_model()
frame = derive_frame(model)

for vmax in (1, 3, 7):
    ps = pauli_decompose_factored(model, frame, vmax, 0, tol=COUNT_TOL)
    print(f"vmax={vmax}: {ps.n_qubits} qubits, {len(ps)} terms")

for vmax, lam in ((3, 110.0), (7, 219.0)):
    kept = cutoff_filter(pauli_decompose_factored(model, frame, vmax, 0), lam)
    st = term_statistics(kept, include_identity=False)
    print(f"vmax={vmax}, |h| > {lam}: {st['count']} non-identity terms by weight {st['by_weight']}")

for ell in (1, 2, 3, 4):
    s = scaling_study(ell)
    print(f"Q^{ell}: L_q = {s['L_q']}, fit (b, c) = ({s['fit'][0]:.3f}, {s['fit'][1]:.3f})")
