"""(2+1)-d flow mixing: rotation of a tanh front by a vortex.

    u_t + a u_x + b u_y = 0,   t in [0, 4], x, y in [-4, 4]
    a = -(v_t / v_max) y / r,  b = (v_t / v_max) x / r
    v_t = sech²(r) tanh(r),    v_max = 0.385
    u = -tanh(y/2 cos(ωt) - x/2 sin(ωt)),  ω = v_t / (v_max r)
"""

import numpy as np

from .base import Condition, Domain, PdeProblem, exact_target, face_conditions, full, required_terms, value_quantities, value_terms

V_MAX = 0.385
R_MIN = 1e-12
NAMES = ("t", "x", "y")
DOMAIN = Domain(((0.0, 4.0), (-4.0, 4.0), (-4.0, 4.0)), NAMES, time_axis=0)


def _radius(x, y):
    return np.maximum(np.sqrt(x * x + y * y), R_MIN)


def tangential_speed(x, y):
    """v_t / v_max."""
    r = _radius(x, y)
    return np.tanh(r) / np.cosh(r) ** 2 / V_MAX


def velocity(x, y):
    r = _radius(x, y)
    s = tangential_speed(x, y)
    return -s * y / r, s * x / r


def angular_speed(x, y):
    return tangential_speed(x, y) / _radius(x, y)


def exact(mesh):
    t, x, y = mesh
    w = angular_speed(x, y)
    return full(mesh, -np.tanh(0.5 * y * np.cos(w * t) - 0.5 * x * np.sin(w * t)))


def residual_flow_mixing(g, mesh):
    _, x, y = mesh
    a, b = velocity(x, y)
    return {"pde": g(t=1) + a * g(x=1) + b * g(y=1)}


def make_problem():
    vt = value_terms(NAMES)
    conds = [Condition("ic", 0, "lo", vt, value_quantities(), exact_target(exact))]
    conds += face_conditions(DOMAIN, vt, value_quantities(), exact_target(exact))
    return PdeProblem(
        id="flow_mixing",
        domain=DOMAIN,
        out_dim=1,
        residual=residual_flow_mixing,
        terms=required_terms(residual_flow_mixing, NAMES, [np.zeros((1, 1, 1))] * 3),
        conditions=tuple(conds),
        exact=exact,
        reference=exact,
        eval_resolution=64,
        default_counts=32,
        description="flow mixing (rotating tanh front)",
    )
