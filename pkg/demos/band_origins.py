"""Band origins of H2O at J = 0 for several basis truncations, plus HO and PT2."""

import numpy as np

from rovibqsci import WatsonHamiltonian, derive_frame, load_model
from rovibqsci.baselines import harmonic_energies, pt2_energies
from rovibqsci.qsci import GAMMA
from rovibqsci.watson import RovibBasisState, dense_spectrum

model = load_model()
frame = derive_frame(model)
print(f"{'':8s}" + "".join(f"{g:>10s}" for g in GAMMA))

ho = harmonic_energies(model, [RovibBasisState.from_label(g).v for g in GAMMA])
print(f"{'HO':8s}{ho[0]:10.1f}" + "".join(f"{e - ho[0]:10.1f}" for e in ho[1:]))

for vmax in (3, 5, 7):
    W = WatsonHamiltonian(model, vmax, 0, frame)
    w, v = dense_spectrum(W.matrix(), vectors=True)
    row = [w[0]]
    for g in GAMMA[1:]:
        k = int(np.argmax(np.abs(v[W.basis.index(RovibBasisState.from_label(g))])))
        row.append(w[k] - w[0])
    print(f"{'vmax=' + str(vmax):8s}" + "".join(f"{e:10.1f}" for e in row))

pt2 = pt2_energies(model, frame, 7)
e0 = pt2["000"]["E"]
print(f"{'PT2':8s}{e0:10.1f}" + "".join(f"{pt2[g]['E'] - e0:10.1f}" for g in GAMMA[1:]))
