"""
Energy decay of a rotating field in a box with a cubic cavity.

The cavity walls absorb through an impedance condition with gamma = 0.05
and the outer faces of the cube are perfectly conducting.  The initial
field is a swirl around the box centre.  B is taken as the discrete curl of
a potential, so it starts exactly solenoidal and stays that way.

Run:  python3 demos/decay_in_cavity.py [n] [steps]
"""
import sys

import numpy as np

from maxwell_prec import DomainSpec, ProblemSetup, Simulation, generate

n = int(sys.argv[1]) if len(sys.argv) > 1 else 8
steps = int(sys.argv[2]) if len(sys.argv) > 2 else 20

mesh = generate(DomainSpec("cavity", n, ((0.25,) * 3, (0.75,) * 3)))
setup = ProblemSetup.swirl_decay(gamma=0.05, tau=0.1, steps=steps)
sim = Simulation(mesh, setup, kind="XLDU")
print(f"mesh: {mesh.n_tets} tets, unknowns (B, E, p) = {sim.system.sizes}")

print(f"{'step':>4} {'t':>5} {'its':>4} {'energy/E0':>11} {'|DB|_inf':>9}")
for rec in sim.run():
    print(f"{rec.step:4d} {rec.time:5.2f} {rec.iterations:4d} {rec.energy / sim.energy0:11.6f} {rec.divB:9.1e}")

e = np.array([sim.energy0] + [r.energy for r in sim.records])
print(f"energy never grows: {bool(np.all(np.diff(e) <= 1e-10 * e[0]))}")
print(f"fraction left after t = {setup.T_final:g}: {e[-1] / e[0]:.4f}")
