"""
Robustness to jumps in permittivity or permeability.

A shell around the cavity gets eps (or mu) scaled by factors from 1e-6 to
1e6.  Because every block inverse is built from the weighted operators,
iteration counts barely move.

Run:  python3 demos/coefficient_jumps.py
"""
from maxwell_prec.bench import ExperimentPlan, Scenario, run_plan
from maxwell_prec.precond import KINDS

values = (1e-6, 1e-2, 1.0, 1e2, 1e6)
for which in ("eps-jump", "mu-jump"):
    plan = ExperimentPlan("cavity", (8,), (0.1,), KINDS, tuple(Scenario(which, v) for v in values))
    table = run_plan(plan)
    print(which)
    for kind in KINDS:
        counts = [r.iters for r in table.lookup(kind=kind)]
        print(f"  {kind:5s} {counts}  max/min = {max(counts) / min(counts):.2f}")
