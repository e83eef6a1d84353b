"""
Experiment grids over mesh size, time step, preconditioner and coefficient
scenario, with CSV / Markdown reporting and a command-line entry point.

Example::

    bench --mesh-kind cavity --n 2,4 --tau 0.1,0.05 --precond WD,XLDU \
          --scenario const,eps-jump:1e6 --steps 3 --out results.csv
"""
from __future__ import annotations

import argparse
import csv
import itertools
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from .assembly import CoefficientField
from .krylov import SolverConfig
from .mesh import DomainSpec, TetMesh, generate
from .precond import KINDS, _kind
from .timestepper import ProblemSetup, Simulation, StepRejected

__all__ = ["Scenario", "ExperimentPlan", "ResultRow", "ResultTable", "run_plan", "emit_csv", "emit_markdown",
           "read_csv", "main"]

log = logging.getLogger(__name__)

COLUMNS = ("mesh", "tau", "kind", "scenario", "iters", "time_ms", "divB_max", "energy_drift")
CAVITY = ((0.25, 0.25, 0.25), (0.75, 0.75, 0.75))


@dataclass(frozen=True)
class Scenario:
    """``const``, ``eps-jump:<value>`` or ``mu-jump:<value>`` (jump in ``mu^-1``)."""

    kind: str = "const"
    value: float = 1.0

    @classmethod
    def parse(cls, text: str) -> "Scenario":
        text = text.strip()
        if text == "const":
            return cls()
        name, _, val = text.partition(":")
        if name not in ("eps-jump", "mu-jump") or not val:
            raise ValueError(f"bad scenario {text!r}; expected const, eps-jump:<v> or mu-jump:<v>")
        v = float(val)
        if not v > 0:
            raise ValueError("jump values must be positive")
        return cls(name, v)

    def label(self) -> str:
        return "const" if self.kind == "const" else f"{self.kind}:{self.value:g}"

    def coefficients(self, mesh: TetMesh) -> CoefficientField:
        if self.kind == "const":
            return CoefficientField.constant(mesh)
        return CoefficientField.band_jump(mesh, "eps" if self.kind == "eps-jump" else "mu_inv", self.value)


@dataclass(frozen=True)
class ExperimentPlan:
    mesh_kind: str = "cavity"
    n: tuple[int, ...] = (4,)
    tau: tuple[float, ...] = (0.1,)
    kinds: tuple[str, ...] = KINDS
    scenarios: tuple[Scenario, ...] = (Scenario(),)
    steps: int = 2
    report_step: int = 2
    gamma: float = 0.05
    cfg: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        for name in ("n", "tau", "kinds", "scenarios"):
            if not getattr(self, name):
                raise ValueError(f"plan needs at least one entry in {name}")
        if self.mesh_kind not in ("box", "cavity"):
            raise ValueError(f"unknown mesh kind {self.mesh_kind!r}")
        if not 1 <= self.report_step <= self.steps:
            raise ValueError("report_step must lie in [1, steps]")
        object.__setattr__(self, "kinds", tuple(_kind(k) for k in self.kinds))

    def domain(self, n: int) -> DomainSpec:
        if self.mesh_kind == "box":
            return DomainSpec("box", n)
        return DomainSpec("cavity", n, CAVITY)

    def setup(self, tau: float) -> ProblemSetup:
        if self.mesh_kind == "cavity":
            return ProblemSetup.swirl_decay(self.gamma, tau=tau, steps=self.steps)
        return ProblemSetup.pulse(self.gamma, tau=tau, steps=self.steps)

    def cells(self):
        return itertools.product(self.n, self.tau, self.kinds, self.scenarios)


@dataclass(frozen=True)
class ResultRow:
    mesh: str
    tau: float
    kind: str
    scenario: str
    iters: int  # -1 marks a failed cell
    time_ms: float
    divB_max: float
    energy_drift: float

    @property
    def key(self):
        return (self.mesh, self.tau, self.kind, self.scenario)

    @property
    def failed(self) -> bool:
        return self.iters < 0


@dataclass
class ResultTable:
    rows: list[ResultRow] = field(default_factory=list)

    def sorted(self) -> list[ResultRow]:
        order = {k: i for i, k in enumerate(KINDS)}
        return sorted(self.rows, key=lambda r: (_mesh_sort(r.mesh), r.tau, order.get(r.kind, 99), r.scenario))

    @property
    def ok(self) -> bool:
        return all(not r.failed for r in self.rows)

    def lookup(self, **kw) -> list[ResultRow]:
        return [r for r in self.rows if all(getattr(r, k) == v for k, v in kw.items())]

    def __len__(self):
        return len(self.rows)


def _mesh_sort(label: str):
    kind, _, n = label.partition("-")
    return (kind, int(n) if n.isdigit() else 0)


def _run_cell(plan: ExperimentPlan, mesh: TetMesh, label: str, tau: float, kind: str, sc: Scenario) -> ResultRow:
    t0 = time.perf_counter()
    try:
        sim = Simulation(mesh, plan.setup(tau), kind, plan.cfg, sc.coefficients(mesh))
        sim.run(plan.steps)
    except (StepRejected, ArithmeticError, RuntimeError) as exc:
        log.error("cell %s tau=%g %s %s failed: %s", label, tau, kind, sc.label(), exc)
        return ResultRow(label, tau, kind, sc.label(), -1, 1e3 * (time.perf_counter() - t0), float("nan"),
                         float("nan"))
    rec = sim.records[plan.report_step - 1]
    div = max(max(r.max_iterate_divergence, r.divB) for r in sim.records)
    e0 = sim.energy0
    drift = (sim.records[-1].energy - e0) / e0 if e0 else 0.0
    wall = sum(s.wall_time for s in sim.stats)
    return ResultRow(label, tau, kind, sc.label(), rec.iterations, 1e3 * wall, div, drift)


def run_plan(plan: ExperimentPlan) -> ResultTable:
    """Run every cell; failures are recorded with ``iters = -1`` and the run continues."""
    table = ResultTable()
    meshes: dict[int, TetMesh] = {}
    for n, tau, kind, sc in plan.cells():
        if n not in meshes:
            meshes[n] = generate(plan.domain(n))
        label = f"{plan.mesh_kind}-{n}"
        row = _run_cell(plan, meshes[n], label, tau, kind, sc)
        log.info("%s tau=%g %s %s: %d iterations", label, tau, kind, sc.label(), row.iters)
        table.rows.append(row)
    return table


def _fmt(r: ResultRow) -> list[str]:
    return [r.mesh, f"{r.tau:g}", r.kind, r.scenario, str(r.iters), f"{r.time_ms:.3f}", f"{r.divB_max:.3e}",
            f"{r.energy_drift:.6e}"]


def emit_csv(table: ResultTable, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for r in table.sorted():
            w.writerow(_fmt(r))


def read_csv(path: str | Path) -> ResultTable:
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        rows = [
            ResultRow(d["mesh"], float(d["tau"]), d["kind"], d["scenario"], int(d["iters"]), float(d["time_ms"]),
                      float(d["divB_max"]), float(d["energy_drift"]))
            for d in rd
        ]
    return ResultTable(rows)


def emit_markdown(table: ResultTable, path: str | Path) -> None:
    lines = ["| " + " | ".join(COLUMNS) + " |", "|" + "---|" * len(COLUMNS)]
    lines += ["| " + " | ".join(_fmt(r)) + " |" for r in table.sorted()]
    Path(path).write_text("\n".join(lines) + "\n")


def _csv_list(conv):
    def parse(text: str):
        try:
            return tuple(conv(t) for t in text.split(",") if t.strip())
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None

    return parse


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bench", description="Preconditioner iteration-count sweeps.")
    p.add_argument("--mesh-kind", choices=("box", "cavity"), default="cavity")
    p.add_argument("--n", type=_csv_list(int), default=(4,))
    p.add_argument("--tau", type=_csv_list(float), default=(0.1,))
    p.add_argument("--precond", type=_csv_list(_kind), default=KINDS)
    p.add_argument("--scenario", type=_csv_list(Scenario.parse), default=(Scenario(),))
    p.add_argument("--steps", type=int, default=2)
    p.add_argument("--report-step", type=int, default=2)
    p.add_argument("--gamma", type=float, default=0.05)
    p.add_argument("--outer-tol", type=float, default=1e-8)
    p.add_argument("--inner-tol", type=float, default=1e-2)
    p.add_argument("--smoother", choices=("jacobi", "sgs"), default="jacobi")
    p.add_argument("--out", type=Path, default=None, help="CSV path (stdout when omitted)")
    p.add_argument("--markdown", type=Path, default=None)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        plan = ExperimentPlan(
            args.mesh_kind, args.n, args.tau, args.precond, args.scenario, args.steps, args.report_step, args.gamma,
            SolverConfig(outer_tol=args.outer_tol, inner_tol=args.inner_tol, smoother=args.smoother),
        )
    except ValueError as exc:
        print(f"bench: {exc}", file=sys.stderr)
        return 2
    threads = os.environ.get("SOLVER_THREADS")
    if threads:
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=int(threads)):
            table = run_plan(plan)
    else:
        table = run_plan(plan)
    if args.out is not None:
        emit_csv(table, args.out)
    else:
        w = csv.writer(sys.stdout)
        w.writerow(COLUMNS)
        w.writerows(_fmt(r) for r in table.sorted())
    if args.markdown is not None:
        emit_markdown(table, args.markdown)
    return 0 if table.ok else 1


if __name__ == "__main__":
    sys.exit(main())
