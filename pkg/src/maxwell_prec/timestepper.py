"""
Crank-Nicolson time stepping for the (B, E, p) mixed system.

Each step solves ``A x^n = g(x^{n-1})`` with FGMRES and one of the block
preconditioners.  The previous step is used as initial guess, so every
FGMRES iterate keeps ``D B = 0`` when the initial ``B`` is solenoidal.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .assembly import AssembledForms, CoefficientField, assemble_current, assemble_forms
from .derham import DofMaps, IncidenceMatrices, build_dof_maps, build_incidence, interp_curl, interp_div
from .krylov import SolverConfig, SolveStats, fgmres, pcg
from .linalg import BlockVector, SystemOperator, build_system
from .mesh import TetMesh
from .precond import Preconditioner, SchurComplements, build_schur

__all__ = [
    "decay_rate",
    "decay_fields",
    "pulse_fields",
    "ProblemSetup",
    "Discretization",
    "TimeState",
    "StepRejected",
    "discretize",
    "initialize",
    "assemble_rhs",
    "energy",
    "step",
    "Simulation",
]

log = logging.getLogger(__name__)

Field = Callable[[np.ndarray], np.ndarray]


def decay_rate(gamma: float) -> float:
    """Spatial/temporal decay exponent ``r = (1 - sqrt(1 + 4/gamma)) / 2``."""
    return 0.5 * (1.0 - math.sqrt(1.0 + 4.0 / gamma))


def decay_fields(gamma: float, center=(0.5, 0.5, 0.5), scale: float = 4.0):
    """Exponentially decaying exterior solution around an obstacle at ``center``.

    Mesh coordinates are mapped by ``y = scale * (x - center)``, so with the
    default scale the cavity ``[0.25, 0.75]^3`` becomes the box of half-width 1.
    Returns ``(E0, A0, B0)``: the initial electric field, a vector potential
    with ``curl A0 = B0``, and ``B0`` itself.
    """
    r = decay_rate(gamma)
    c = np.asarray(center, dtype=float)

    def E0(x):
        y = scale * (np.atleast_2d(x) - c)
        R = np.linalg.norm(y, axis=1)
        amp = np.exp(r * R) / R**2 * (r * r - r / R)
        return amp[:, None] * np.column_stack([np.zeros_like(R), y[:, 2], -y[:, 1]])

    def A0(x):
        return -E0(x) / (r * scale)

    def B0(x):
        y = scale * (np.atleast_2d(x) - c)
        R = np.linalg.norm(y, axis=1)
        X, Y, Z = y.T
        amp = np.exp(r * R)
        radial = (r * r - 3 * r / R + 3 / R**2) / R**3
        out = radial[:, None] * np.column_stack([Z * Z + Y * Y, -X * Y, -X * Z])
        out[:, 0] += 2 * r / R**2 - 2 / R**3
        return amp[:, None] * out

    return E0, A0, B0


def pulse_fields(center=(0.5, 0.5, 0.5), width: float = 0.2):
    """Smooth rotating pulse ``(E0, A0)`` for plain box domains."""
    c = np.asarray(center, dtype=float)

    def _rot(x):
        y = np.atleast_2d(x) - c
        bump = np.exp(-np.sum(y * y, axis=1) / width**2)
        return bump[:, None] * np.column_stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]])

    def E0(x):
        return _rot(x)

    def A0(x):
        return _rot(x)[:, [2, 0, 1]]

    return E0, A0


@dataclass(frozen=True)
class ProblemSetup:
    """Physical and temporal parameters of a run.

    The initial magnetic field is given either directly (``B0``, interpolated
    face by face) or through a vector potential (``B0_potential``), in which
    case ``B^0 = K Pi^curl A0`` is discretely divergence free by construction.
    """

    gamma: float = 0.05
    tau: float = 0.1
    steps: int = 20
    E0: Field | None = None
    B0: Field | None = None
    B0_potential: Field | None = None
    current: Callable[[np.ndarray, float], np.ndarray] | None = None
    coeff: Callable[[TetMesh], CoefficientField] | None = None

    def __post_init__(self):
        if not self.gamma > -1:
            raise ValueError("gamma must exceed -1")
        if not self.tau > 0:
            raise ValueError("tau must be positive")

    @property
    def T_final(self) -> float:
        return self.steps * self.tau

    @classmethod
    def swirl_decay(cls, gamma: float = 0.05, center=(0.5, 0.5, 0.5), scale: float = 4.0, **kw) -> "ProblemSetup":
        E0, A0, _ = decay_fields(gamma, center, scale)
        return cls(gamma=gamma, E0=E0, B0_potential=A0, **kw)

    @classmethod
    def pulse(cls, gamma: float = 0.05, **kw) -> "ProblemSetup":
        E0, A0 = pulse_fields()
        return cls(gamma=gamma, E0=E0, B0_potential=A0, **kw)


@dataclass(eq=False)
class Discretization:
    mesh: TetMesh
    dofs: DofMaps
    inc: IncidenceMatrices
    forms: AssembledForms
    coeff: CoefficientField

    @property
    def sizes(self) -> tuple[int, int, int]:
        return self.dofs.sizes


def discretize(mesh: TetMesh, gamma: float, coeff: CoefficientField | None = None) -> Discretization:
    coeff = coeff if coeff is not None else CoefficientField.constant(mesh)
    dofs = build_dof_maps(mesh)
    inc = build_incidence(mesh, dofs)
    return Discretization(mesh, dofs, inc, assemble_forms(mesh, dofs, coeff, gamma), coeff)


@dataclass
class TimeState:
    n: int
    t: float
    x: BlockVector
    prev: BlockVector | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def B(self):
        return self.x.B

    @property
    def E(self):
        return self.x.E

    @property
    def p(self):
        return self.x.p


class StepRejected(RuntimeError):
    def __init__(self, n: int, stats: SolveStats):
        super().__init__(f"step {n} rejected: FGMRES {stats.status} after {stats.iterations} iterations, "
                         f"relative residual {stats.final_residual:.3e}")
        self.stats = stats


def remove_gradient(E: np.ndarray, disc: Discretization, tol: float = 1e-12) -> np.ndarray:
    """Project out ``grad H_0``: solve ``G^T Me G q = G^T Me E`` and return ``E - G q``."""
    G = disc.inc.G.astype(float)
    if G.shape[1] == 0:
        return E.copy()
    MeG = disc.forms.Me @ G
    q = pcg((G.T @ MeG).tocsr(), MeG.T @ E, "jacobi", tol=tol, maxit=10 * G.shape[1] + 100)
    return E - G @ q


def initialize(setup: ProblemSetup, disc: Discretization) -> TimeState:
    """Interpolate the initial fields; ``p^0 = 0``."""
    mesh, dofs = disc.mesh, disc.dofs
    nb, ne, npp = disc.sizes
    warnings: list[str] = []
    if setup.B0_potential is not None:
        B = disc.inc.K.astype(float) @ interp_curl(mesh, dofs, setup.B0_potential)
    elif setup.B0 is not None:
        B = interp_div(mesh, dofs, setup.B0)
        div = np.max(np.abs(disc.inc.D @ B), initial=0.0)
        if div > 1e-9 * max(1.0, np.max(np.abs(B), initial=0.0)):
            msg = f"interpolated B0 is not discretely solenoidal (|D B0|_inf = {div:.2e})"
            log.warning(msg)
            warnings.append(msg)
    else:
        B = np.zeros(nb)
    E = interp_curl(mesh, dofs, setup.E0) if setup.E0 is not None else np.zeros(ne)
    E = remove_gradient(E, disc)
    return TimeState(0, 0.0, BlockVector(B, E, np.zeros(npp)), warnings=warnings)


def assemble_rhs(state: TimeState, setup: ProblemSetup, system: SystemOperator,
                 disc: Discretization | None = None) -> BlockVector:
    """Right-hand side functionals built from the previous step."""
    f = system.forms
    s = 2.0 / system.tau
    B, E, p = state.x.B, state.x.E, state.x.p
    gB = s * (f.Mb @ B) - system.MbK @ E
    gE = s * (f.Me @ E) - system.MeG @ p + system.KtMb @ B - f.Z @ E
    gp = s * (f.Mp @ p) + system.GtMe @ E
    if setup.current is not None:
        if disc is None:
            raise ValueError("a source current needs the discretization")
        t_new = state.t + system.tau
        for t in (state.t, t_new):
            gE = gE - assemble_current(disc.mesh, disc.dofs, lambda x, t=t: setup.current(x, t))
    return BlockVector(gB, gE, gp)


def energy(x: BlockVector, forms: AssembledForms) -> float:
    """``|B|^2_{mu^-1} + |E|^2_eps + |p|^2``."""
    return float(x.B @ (forms.Mb @ x.B) + x.E @ (forms.Me @ x.E) + x.p @ (forms.Mp @ x.p))


def step(state: TimeState, setup: ProblemSetup, system: SystemOperator, precond: Preconditioner,
         cfg: SolverConfig | None = None, disc: Discretization | None = None) -> tuple[TimeState, SolveStats]:
    """Advance one step; raises :class:`StepRejected` if FGMRES does not converge."""
    b = assemble_rhs(state, setup, system, disc).flat
    x, stats = fgmres(system, precond, b, state.x.flat, cfg)
    if not stats.converged:
        raise StepRejected(state.n + 1, stats)
    new = TimeState(state.n + 1, state.t + system.tau, BlockVector.from_flat(x, system.sizes), prev=state.x)
    return new, stats


@dataclass
class StepRecord:
    step: int
    time: float
    iterations: int
    relative_residual: float
    energy: float
    divB: float
    max_iterate_divergence: float
    wall_time: float


class Simulation:
    """Mesh, discretization, operator and preconditioner for repeated stepping.

    >>> sim = Simulation(mesh, ProblemSetup.swirl_decay(tau=0.1), kind="XLDU")  # doctest: +SKIP
    >>> records = sim.run(20)  # doctest: +SKIP
    """

    def __init__(self, mesh: TetMesh, setup: ProblemSetup, kind: str = "XLDU", cfg: SolverConfig | None = None,
                 coeff: CoefficientField | None = None):
        if coeff is None and setup.coeff is not None:
            coeff = setup.coeff(mesh)
        self.setup = setup
        self.cfg = cfg or SolverConfig()
        self.disc = discretize(mesh, setup.gamma, coeff)
        self.system = build_system(setup.tau, self.disc.forms, self.disc.inc)
        self.schur: SchurComplements = build_schur(self.disc.forms, self.disc.inc, setup.tau)
        self.precond = Preconditioner(kind, self.system, self.cfg, self.schur)
        self.state = initialize(setup, self.disc)
        self.stats: list[SolveStats] = []
        self.records: list[StepRecord] = []
        self.energy0 = energy(self.state.x, self.disc.forms)

    def energy(self) -> float:
        return energy(self.state.x, self.disc.forms)

    def divergence(self) -> float:
        return float(np.max(np.abs(self.disc.inc.D @ self.state.B), initial=0.0))

    def step(self) -> SolveStats:
        self.state, stats = step(self.state, self.setup, self.system, self.precond, self.cfg, self.disc)
        self.stats.append(stats)
        self.records.append(
            StepRecord(self.state.n, self.state.t, stats.iterations, stats.final_residual, self.energy(),
                       self.divergence(), stats.max_relative_divergence(), stats.wall_time)
        )
        return stats

    def run(self, steps: int | None = None) -> list[StepRecord]:
        for _ in range(self.setup.steps if steps is None else steps):
            self.step()
        return self.records

    def write_log(self, path: str | Path) -> None:
        """Per-step CSV: step, time, iterations, relative residual, energy, |D B|_inf."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "time", "iterations", "relative_residual", "energy", "divB_inf"])
            for r in self.records:
                w.writerow([r.step, f"{r.time:.12g}", r.iterations, f"{r.relative_residual:.6e}",
                            f"{r.energy:.17g}", f"{r.divB:.6e}"])
