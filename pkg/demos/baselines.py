"""Classical basis-selection baselines at vmax = 3: PT1, greedy optimum and random draws."""

from rovibqsci import derive_frame, load_model
from rovibqsci.baselines import optimal_combined, pt1_energies, random_baseline
from rovibqsci.qsci import GAMMA, exact_levels

model = load_model()
frame = derive_frame(model)
ground = exact_levels(model, frame, 3, 0)["ground"]

pt1 = pt1_energies(model, frame, 3)
print("PT1 sizes", pt1.sizes, "energies", [round(e - ground, 1) for e in pt1.energies])

opt = optimal_combined(model, frame, 3, 10)
for n, row in zip(opt.sizes, opt.energies):
    print(f"greedy size {n:2d}:", " ".join(f"{e - ground:8.1f}" for e in row))

rnd = random_baseline(model, frame, 3, 20, 1000, seed=0)
for g, m, s in zip(GAMMA, rnd.energies - ground, rnd.std):
    print(f"random size 20, {g}: {m:8.1f} +- {s:.1f}")
