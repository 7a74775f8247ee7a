from app.solvers.base import SolverBackend, SolverResult, SolveStatus, get_backend
from app.solvers.bruteforce import BruteForceBackend
from app.solvers.highs import HighsBackend
from app.solvers.lpfile import render_lp, write_lp, write_triplets

__all__ = [
    "SolverBackend",
    "SolverResult",
    "SolveStatus",
    "get_backend",
    "BruteForceBackend",
    "HighsBackend",
    "render_lp",
    "write_lp",
    "write_triplets",
]
