"""Benchmark problem registry."""

from . import diffusion, flow_mixing, helmholtz, klein_gordon, navier_stokes, poisson
from .base import (
    Condition,
    Domain,
    FaceBatch,
    Partials,
    PdeProblem,
    PointCondition,
    axis_rng,
    boundary_batches,
    exact_solution,
    sample_factorized,
    uniform_grid,
)

_BUILDERS = {
    "helmholtz3d": helmholtz.make_problem,
    "kg3d": klein_gordon.make_problem_3d,
    "kg4d": klein_gordon.make_problem_4d,
    "diffusion_nl3d": diffusion.make_nonlinear,
    "diffusion6d": diffusion.make_linear6d,
    "flow_mixing": flow_mixing.make_problem,
    "poisson_lshape": poisson.make_problem,
    "ns4d": navier_stokes.make_problem,
}

PROBLEM_IDS = tuple(_BUILDERS)


def get_problem(problem_id: str) -> PdeProblem:
    try:
        return _BUILDERS[problem_id]()
    except KeyError:
        raise KeyError(f"unknown problem {problem_id!r}; valid ids: {', '.join(PROBLEM_IDS)}") from None


__all__ = [
    "PROBLEM_IDS",
    "Condition",
    "Domain",
    "FaceBatch",
    "Partials",
    "PdeProblem",
    "PointCondition",
    "axis_rng",
    "boundary_batches",
    "exact_solution",
    "get_problem",
    "sample_factorized",
    "uniform_grid",
]
