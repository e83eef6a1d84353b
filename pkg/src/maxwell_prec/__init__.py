"""Maxwell time stepping with impedance boundaries and block preconditioners."""
from .assembly import AssembledForms, CoefficientField, assemble_forms
from .derham import DofMaps, IncidenceMatrices, build_dof_maps, build_incidence, interp_curl, interp_div
from .krylov import SolverConfig, SolveStats, fgmres, gmres_inner, pcg
from .linalg import BlockVector, SystemOperator, build_system
from .mesh import DomainSpec, FaceLabel, TetMesh, generate, generate_box, generate_box_with_cavity, read_mesh, write_mesh
from .precond import KINDS, Preconditioner, SchurComplements, build_schur, verify_ldu
from .timestepper import ProblemSetup, Simulation, TimeState, decay_rate, energy, initialize

__version__ = "0.1.0"
