"""
Acceptance checks 1-9.  Each test records a one-line PASS/FAIL summary that
is printed in the pytest terminal summary (and on stdout when this file is
run as a script).
"""
import numpy as np
import pytest

from maxwell_prec.bench import ExperimentPlan, Scenario, run_plan
from maxwell_prec.krylov import SolverConfig
from maxwell_prec.linalg import build_system, spgemm
from maxwell_prec.precond import KINDS, Preconditioner, verify_ldu
from maxwell_prec.stability import exact_config, infsup_constant, preconditioned_dense
from maxwell_prec.timestepper import ProblemSetup, Simulation, decay_rate, discretize

from conftest import ACCEPTANCE_REPORT, box, cavity

LADDER = (2, 4, 8, 16)


def report(k: int, ok: bool, detail: str) -> None:
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE_REPORT[k] = line
    print(line)


def test_criterion_1_exactness():
    worst_gtz = 0.0
    nnz = 0
    meshes = [box(n) for n in LADDER] + [cavity(n) for n in LADDER if n >= 4]
    for m in meshes:
        d = discretize(m, 0.05)
        nnz += spgemm(d.inc.K, d.inc.G, integer=True).nnz + spgemm(d.inc.D, d.inc.K, integer=True).nnz
        GtZ = (d.inc.G.T.astype(float) @ d.forms.Z).tocsr()
        if GtZ.nnz:
            worst_gtz = max(worst_gtz, float(abs(GtZ).max()))
    ok = nnz == 0 and worst_gtz <= 1e-13
    report(1, ok, f"{len(meshes)} meshes, nnz(KG)+nnz(DK)={nnz}, max|G^T Z|={worst_gtz:.1e}")
    assert ok


def test_criterion_2_ldu():
    worst = 0.0
    for n in (1, 2):
        d = discretize(box(n), 0.05)
        for tau in (0.2, 0.025):
            A = build_system(tau, d.forms, d.inc).to_dense()
            worst = max(worst, verify_ldu(d.forms, d.inc, tau) / np.abs(A).max())
    ok = worst <= 1e-12
    report(2, ok, f"max |A - LDU| / |A|_max = {worst:.1e}")
    assert ok


def test_criterion_3_exact_inner_spectrum():
    d = discretize(box(3), 0.05)
    assert sum(d.sizes) <= 500
    worst = 0.0
    for tau in (0.2, 0.025):
        s = build_system(tau, d.forms, d.inc)
        ev = np.linalg.eigvals(preconditioned_dense(Preconditioner("XLDU", s, exact_config(1e-10))))
        worst = max(worst, float(np.max(np.abs(ev - 1))))
    ok = worst <= 1e-6
    report(3, ok, f"{sum(d.sizes)} DOFs, max |lambda - 1| = {worst:.1e}")
    assert ok


def test_criterion_4_infsup():
    d = discretize(box(3), 0.05)
    assert sum(d.sizes) <= 500
    vals = {tau: infsup_constant(build_system(tau, d.forms, d.inc, aux=True)) for tau in (0.2, 0.05)}
    ok = min(vals.values()) >= 0.25
    report(4, ok, ", ".join(f"tau={t}: sigma_min={v:.3f}" for t, v in vals.items()))
    assert ok


def test_criterion_5_divergence_every_iterate():
    mesh = cavity(8)
    worst = 0.0
    steps = 0
    for kind in KINDS:
        sim = Simulation(mesh, ProblemSetup.swirl_decay(tau=0.1, steps=20), kind)
        sim.run()
        for st in sim.stats:
            worst = max(worst, st.max_relative_divergence())
        steps += len(sim.stats)
    ok = worst <= 1e-9 and steps == 20 * len(KINDS)
    report(5, ok, f"{steps} steps over {len(KINDS)} kinds, max |D B^l|/max(1,|B^l|) = {worst:.1e}")
    assert ok


def test_criterion_6_mesh_tau_robustness():
    taus = (0.2, 0.1, 0.05, 0.025)
    table = run_plan(ExperimentPlan("box", (2, 4, 8), taus, KINDS, steps=2, report_step=2))
    assert table.ok
    it = {(int(r.mesh.split("-")[1]), r.tau, r.kind): r.iters for r in table.rows}
    bad_a = [(k, t, it[8, t, k], it[2, t, k]) for k in KINDS for t in taus if it[8, t, k] > 1.5 * it[2, t, k]]
    max_of = lambda kinds: max(v for (n, t, k), v in it.items() if k in kinds)
    b, c, dd = max_of({"XLDU"}), max_of({"WL", "WU", "XLD", "XDU"}), max_of({"WD"})
    ok = not bad_a and b <= 12 and c <= 20 and dd <= 60
    parts = [f"(a) {'ok' if not bad_a else 'violations ' + '; '.join(f'{k} tau={t}: {x} vs {y}' for k, t, x, y in bad_a)}",
             f"(b) XLDU max {b}", f"(c) triangular max {c}", f"(d) WD max {dd}"]
    report(6, ok, ", ".join(parts))
    assert ok


def test_criterion_7_coefficient_jumps():
    values = (1e-6, 1e-2, 1.0, 1e2, 1e6)
    worst = 0.0
    where = ""
    mesh_plan = dict(mesh_kind="cavity", n=(8,), tau=(0.1,), kinds=KINDS, steps=2, report_step=2)
    for which in ("eps-jump", "mu-jump"):
        sc = tuple(Scenario(which, v) for v in values)
        table = run_plan(ExperimentPlan(scenarios=sc, **mesh_plan))
        assert table.ok
        for kind in KINDS:
            its = [r.iters for r in table.lookup(kind=kind)]
            ratio = max(its) / min(its)
            if ratio > worst:
                worst, where = ratio, f"{kind} {which}"
    ok = worst <= 2.5
    report(7, ok, f"worst max/min ratio {worst:.2f} at {where}")
    assert ok


def test_criterion_8_energy():
    # dissipative: nonempty GammaI
    sim = Simulation(cavity(8), ProblemSetup.swirl_decay(gamma=0.05, tau=0.1, steps=20), "XLDU")
    sim.run()
    e = np.array([sim.energy0] + [r.energy for r in sim.records])
    rise = float(np.max(np.diff(e)) / e[0])
    # lossless: GammaI empty, outer tolerance tight enough to resolve 1e-10
    cons = Simulation(box(4, "none"), ProblemSetup.pulse(gamma=0.05, tau=0.1, steps=20), "XLDU",
                      SolverConfig(outer_tol=1e-12))
    cons.run()
    c = np.array([cons.energy0] + [r.energy for r in cons.records])
    drift = float(np.max(np.abs(c - c[0])) / c[0])
    ok = rise <= 1e-10 and drift <= 1e-10
    report(8, ok, f"max relative step increase {rise:.1e} with GammaI, relative drift {drift:.1e} without")
    assert ok


def test_criterion_9_constant():
    r = decay_rate(0.05)
    ok = r == -4.0
    report(9, ok, f"r(0.05) = {r!r}")
    assert ok


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-s"]))
