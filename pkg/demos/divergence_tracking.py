"""
The magnetic divergence of every Krylov iterate, not just the converged one.

Each preconditioner maps a right-hand side with solenoidal B part to a
correction with solenoidal B part, so the FGMRES iterates inherit the
property.  Here we solve one step with each preconditioner and print the
largest |D B| seen across all iterates, along with the residual history.

Run:  python3 demos/divergence_tracking.py
"""
from maxwell_prec import DomainSpec, ProblemSetup, Simulation, generate
from maxwell_prec.precond import KINDS

mesh = generate(DomainSpec("cavity", 8, ((0.25,) * 3, (0.75,) * 3)))
setup = ProblemSetup.swirl_decay(tau=0.1)
for kind in KINDS:
    sim = Simulation(mesh, setup, kind)
    st = sim.step()
    hist = " ".join(f"{h:.0e}" for h in st.history)
    print(f"{kind:5s} its={st.iterations:3d} max|DB|={st.max_relative_divergence():.1e}  [{hist}]")
