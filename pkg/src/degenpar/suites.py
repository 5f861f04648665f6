"""Seeded property suites. Each returns a list of verdicts; seeds run in worker processes when ``jobs > 1``."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .fd import CORNER_NODE, ManufacturedSolution, SolverConfig, build_grid, manufactured_convergence
from .fichera import SIGMA0, SIGMA1, SIGMA2, SIGMA3, heston_beta
from .geometry import DomainSpec, classify_degenerate_boundary
from .harness import (C_BOUNDED_BELOW, C_NONNEG, C_POS, HESTON_BOX, RegimeMismatch, Sum, boundary_condition_contrast,
                      check_argmax_on_dirichlet, check_comparison, check_hopf_sign, check_obstacle_estimates,
                      check_obstacle_feasible, check_strong_max_constancy, check_time_weighted_bound,
                      check_uniqueness, check_weak_max_bound, constant_instance, ghost_data_check, heston_instance,
                      hopf_instances, random_field, random_instance, zero_max_instance)
from .obstacle import PsorConfig, complementarity_residual, solve_obstacle_problem
from .operator import HestonParams, make_heston
from .verdict import INCONCLUSIVE, Verdict

# Heston sets with beta = 2 kappa theta / sigma^2 in {0.5, 1, 3}; fb on x2 = 0 is -0.04, 0, 0.04
BETA_SETS = {
    0.5: HestonParams(sigma=0.4, rho=-0.5, kappa=1.0, theta=0.04, r=0.05),
    1.0: HestonParams(sigma=0.2, rho=-0.5, kappa=0.5, theta=0.04, r=0.05),
    3.0: HestonParams(sigma=0.2, rho=-0.5, kappa=1.5, theta=0.04, r=0.05),
}


def expected_floor_class(beta: float, tol: float = 1e-12) -> str:
    """Class of ``x2 = 0``: inflow (Sigma1) for beta > 1, characteristic (Sigma0) at 1, outflow (Sigma2) below."""
    if abs(beta - 1.0) <= tol:
        return SIGMA0
    return SIGMA1 if beta > 1.0 else SIGMA2


def _map_seeds(fn, seeds, jobs: int = 1, **kw) -> list[Verdict]:
    seeds = list(seeds)
    if jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            chunks = list(ex.map(_call, [(fn, s, kw) for s in seeds]))
    else:
        chunks = [fn(s, **kw) for s in seeds]
    return [v for chunk in chunks for v in chunk]


def _call(args):
    fn, seed, kw = args
    return fn(seed, **kw)


# --- Fichera ---------------------------------------------------------------


def fichera_suite(sets=None, tol: float = 1e-10, dom: DomainSpec | None = None) -> tuple[list[Verdict], dict]:
    """Sigma classes of every face and ``fb`` on ``x2 = 0`` against ``sigma^2 (beta - 1) / 2``.

    ``sets`` maps a label to :class:`HestonParams`; the default is the beta sweep 0.5, 1, 3.
    """
    sets = sets or BETA_SETS
    out, reports = [], {}
    for label, params in sets.items():
        beta = params.beta
        rep = heston_beta(params, dom)
        reports[label] = rep
        reports[beta] = rep
        cls = rep.partition.face_class
        expected = {"bottom": SIGMA1, "top": SIGMA2, "x1=lo": SIGMA3, "x1=hi": SIGMA3, "x2=hi": SIGMA3,
                    "x2=lo": expected_floor_class(beta)}
        wrong = sum(cls.get(f) != c for f, c in expected.items())
        out.append(Verdict("fichera.partition", f"beta = {beta:g}: face classes bottom S1, top S2, x2>0 sides S3, "
                           f"x2=0 {expected['x2=lo']}", float(wrong), 0.0, details={"classes": dict(cls)}))
        lo, hi = rep.partition.fb_range["x2=lo"]
        err = max(abs(lo - rep.fb_floor), abs(hi - rep.fb_floor))
        out.append(Verdict("fichera.fb_floor", f"beta = {beta:g}: fb on x2=0 equals sigma^2 (beta - 1) / 2 = "
                           f"{rep.fb_floor:.6g}", err, tol, details={"fb_min": lo, "fb_max": hi}))
    return out, reports


# --- weak maximum principle and a priori bounds ----------------------------


def _wmp_seed(seed: int, resolution=(11, 6)) -> list[Verdict]:
    regime = C_NONNEG if seed % 2 == 0 else C_POS
    inst = random_instance(seed, regime, resolution=resolution, f_sign="nonpos", g_sign="nonpos")
    u = inst.solve()
    mono = u.stats.get("monotone", True)
    return [Verdict("wmp.nonpositive", f"seed {seed}: c >= 0, f <= 0, g <= 0, monotone assembly  =>  max u <= 0",
                    max(float(u.values.max()), 0.0) + (0.0 if mono else np.inf), 1e-8,
                    details={"seed": seed, "family": inst.tags["family"], "max_u": float(u.values.max())})]


def wmp_suite(seeds=range(200), jobs: int = 1, resolution=(11, 6)) -> list[Verdict]:
    return _map_seeds(_wmp_seed, seeds, jobs, resolution=resolution)


def _bounds_seed(seed: int, regime: str, resolution=(11, 6)) -> list[Verdict]:
    out = []
    if regime == C_POS:
        inst = random_instance(seed, regime, resolution=resolution)
        u = inst.solve()
        out += [check_weak_max_bound(u, inst, k) for k in (2, 4, 6)]
    elif regime == C_NONNEG:
        for sign, items in (("nonpos", (1,)), ("nonneg", (3,)), ("zero", (1, 3, 5))):
            inst = random_instance(seed, regime, resolution=resolution, f_sign=sign)
            u = inst.solve()
            out += [check_weak_max_bound(u, inst, k) for k in items]
    elif regime == C_BOUNDED_BELOW:
        inst = random_instance(seed, regime, resolution=resolution)
        u = inst.solve()
        out += [check_time_weighted_bound(u, inst, kind) for kind in ("sub", "super", "solution")]
    else:
        raise ValueError(f"unknown regime {regime!r}")
    return out


def bounds_suite(regime: str, seeds=range(100), jobs: int = 1, resolution=(11, 6)) -> list[Verdict]:
    return _map_seeds(_bounds_seed, seeds, jobs, regime=regime, resolution=resolution)


def _comparison_seed(seed: int, resolution=(11, 6)) -> list[Verdict]:
    regime = (C_NONNEG, C_POS, C_BOUNDED_BELOW)[seed % 3]
    inst = random_instance(seed, regime, resolution=resolution)
    rng = np.random.default_rng([seed, 7])
    d = inst.data
    lower = inst.with_data(f=Sum(d.f, random_field(rng, inst.grid.dim, "nonpos", 0.5)),
                           g=Sum(d.g, random_field(rng, inst.grid.dim, "nonpos", 0.5)))
    v = inst.solve()
    u = lower.solve()
    return [check_comparison(u, v, tol=1e-8, property_id="comparison.ordered_pair"),
            check_uniqueness(v, inst.solve(), tol=1e-10)]


def comparison_suite(seeds=range(100), jobs: int = 1, resolution=(11, 6)) -> list[Verdict]:
    return _map_seeds(_comparison_seed, seeds, jobs, resolution=resolution)


# --- obstacle --------------------------------------------------------------


def _obstacle_seed(seed: int, resolution=(11, 6)) -> list[Verdict]:
    weighted = seed % 5 == 4
    regime = C_BOUNDED_BELOW if weighted else (C_POS if seed % 2 == 0 else C_NONNEG)
    f_sign = "nonneg" if seed % 4 < 2 else "nonpos"
    inst = random_instance(seed, regime, resolution=resolution, f_sign=f_sign, obstacle=True)
    res = inst.solve_obstacle()
    v1, v2, v3 = complementarity_residual(res)
    out = [check_obstacle_feasible(res),
           Verdict("obstacle.complementarity", "max |min(Lu - f, u - psi)| on interior and degenerate nodes",
                   v3, 1e-8, details={"seed": seed, "psi_minus_u": v1, "f_minus_Lu": v2})]
    items = (2, 4) if weighted else (1, 2, 3, 4)
    try:
        out += check_obstacle_estimates(res, inst, items, weighted=weighted)
    except RegimeMismatch:
        pass
    rng = np.random.default_rng([seed, 11])
    d = inst.data
    dim = inst.grid.dim
    # comparison: lower f, g and psi
    g_lo = Sum(d.g, random_field(rng, dim, "nonpos", 0.3))
    lower = inst.with_data(f=Sum(d.f, random_field(rng, dim, "nonpos", 0.3)), g=g_lo,
                           psi=type(d.psi)(Sum(d.psi.first, random_field(rng, dim, "nonpos", 0.3)), g_lo))
    res_lo = lower.solve_obstacle()
    out += check_obstacle_estimates((res, res_lo), inst, (5,))
    # stability: perturb g and psi by at most 0.01 with f fixed
    g2 = Sum(d.g, random_field(rng, dim, "any", 0.01))
    pert = inst.with_data(g=g2, psi=type(d.psi)(Sum(d.psi.first, random_field(rng, dim, "any", 0.01)), g2))
    out += check_obstacle_estimates((res, pert.solve_obstacle()), inst, (6,), weighted=weighted)
    # an obstacle far below the solution never binds
    low_psi = inst.with_data(psi=type(d.psi)(random_field(rng, dim, "any").shifted(-50.0), d.g))
    gap = float(np.max(np.abs(low_psi.solve_obstacle().values - inst.solve().values)))
    out.append(Verdict("obstacle.inactive_matches_plain", "inactive obstacle reproduces the unconstrained solve",
                       gap, 1e-8, details={"seed": seed}))
    return out


def obstacle_suite(seeds=range(50), jobs: int = 1, resolution=(11, 6)) -> list[Verdict]:
    return _map_seeds(_obstacle_seed, seeds, jobs, resolution=resolution)


# --- strong maximum principle and Hopf ------------------------------------


def _constant_seed(seed: int, resolution=(11, 6)) -> list[Verdict]:
    inst = constant_instance(seed, M=1.0 + 0.1 * (seed % 7), resolution=resolution)
    u = inst.solve()
    rng = np.random.default_rng([seed, 5])
    active = np.flatnonzero(inst.grid.underline_mask())
    P0 = (int(rng.integers(0, inst.grid.n_levels - 1)), int(rng.choice(active)))
    return [check_strong_max_constancy(u, inst, P0, tol=1e-10)]


def _argmax_seed(seed: int, resolution=(11, 6)) -> list[Verdict]:
    regime = C_NONNEG if seed % 2 == 0 else C_POS
    inst = random_instance(seed, regime, resolution=resolution, f_sign="neg", g_sign="nonneg")
    return [check_argmax_on_dirichlet(inst.solve(), inst)]


def strong_max_suite(n_constant: int = 20, n_generic: int = 50, jobs: int = 1) -> list[Verdict]:
    out = _map_seeds(_constant_seed, range(n_constant), jobs)
    out += _map_seeds(_argmax_seed, range(n_generic), jobs)
    zi = zero_max_instance()
    u = zi.solve()
    mid = zi.grid.n_nodes // 2
    late = int(np.searchsorted(zi.grid.times, 0.5 * zi.dom.T)) + 1
    out.append(check_strong_max_constancy(u, zi, (late, mid), zero_max=True))
    return out


def hopf_suite() -> list[Verdict]:
    out = []
    for inst, P in hopf_instances():
        v = check_hopf_sign(inst.solve(), inst, P)
        v.details["family"] = inst.tags.get("family")
        out.append(v)
    ci = constant_instance(0, M=1.0, resolution=(11, 6))
    node = int(np.flatnonzero(ci.grid.dirichlet_mask() & ~np.isin(np.arange(ci.grid.n_nodes),
                                                                   ci.grid.nodes_of(CORNER_NODE)))[0])
    v = check_hopf_sign(ci.solve(), ci, (0, node))
    out.append(Verdict("hopf.inconclusive_on_constant", "constant solution has no strict maximum",
                       0.0 if v.status == INCONCLUSIVE else 1.0, 0.0, details={"status": v.status}))
    return out


# --- convergence, degenerate data, boundary condition ----------------------

CONVERGENCE_PARAMS = HestonParams(sigma=0.2, rho=-0.5, kappa=1.5, theta=0.04, r=0.05)


def _poly_solution(time_factor, dtime_factor, x2_power: int = 2) -> ManufacturedSolution:
    p = x2_power

    def space(x):
        return 1.0 + x[:, 0] + (2.0 * x[:, 1] if p == 1 else x[:, 1] ** 2)

    def grad(t, x):
        g = np.empty_like(x)
        g[:, 0] = 1.0
        g[:, 1] = 2.0 if p == 1 else 2.0 * x[:, 1]
        return time_factor(t) * g

    def hess(t, x):
        h = np.zeros((x.shape[0], 2, 2))
        if p == 2:
            h[:, 1, 1] = 2.0
        return time_factor(t) * h

    return ManufacturedSolution(u=lambda t, x: time_factor(t) * space(x),
                                u_t=lambda t, x: dtime_factor(t) * space(x), grad=grad, hess=hess)


def convergence_suite(params: HestonParams = CONVERGENCE_PARAMS, min_order: float = 0.9) -> list[Verdict]:
    """Spatial and temporal orders on Heston, and exactness on an affine solution."""
    op = make_heston(params)
    dom = DomainSpec(T=1.0, box=HESTON_BOX)
    part = classify_degenerate_boundary(op, dom)
    # time-linear: implicit Euler is exact in time, leaving the spatial error alone
    lin = _poly_solution(lambda t: 2.0 - t, lambda t: -1.0 + 0.0 * t)
    space = manufactured_convergence(op, dom, part, lin, [(21, 11), (41, 11), (81, 11)], vary="space")
    expo = _poly_solution(lambda t: np.exp(-t), lambda t: -np.exp(-t))
    time_ = manufactured_convergence(op, dom, part, expo, [(41, 11), (41, 21), (41, 41)], vary="time")
    affine = _poly_solution(lambda t: 2.0 - t, lambda t: -1.0 + 0.0 * t, x2_power=1)
    aff = manufactured_convergence(op, dom, part, affine, [(21, 11)], vary="space")
    return [
        Verdict("convergence.space", f"observed spatial order >= {min_order}", max(min_order - min(space.orders), 0),
                0.0, details={"errors": space.errors, "orders": space.orders}),
        Verdict("convergence.time", f"observed temporal order >= {min_order}", max(min_order - min(time_.orders), 0),
                0.0, details={"errors": time_.errors, "orders": time_.orders}),
        Verdict("convergence.affine_exact", "affine-in-x, linear-in-t solutions are reproduced",
                aff.errors[0], 1e-10),
    ]


GHOST_PARAMS = CONVERGENCE_PARAMS


def ghost_suite(params: HestonParams = GHOST_PARAMS, shape=21, n_levels: int = 11) -> list[Verdict]:
    return ghost_data_check(heston_instance(params, shape, n_levels))


def boundary_condition_suite(beta: float = 0.5) -> list[Verdict]:
    return [boundary_condition_contrast(BETA_SETS[beta])]


def american_put(params: HestonParams | None = None, shape=21, n_levels: int = 11, strike: float = 1.0):
    """American put in log-price on the Heston box; returns the obstacle result and the instance."""
    from .harness import PutPayoff
    from .obstacle import ObstacleData
    from .harness import Constant

    params = params or HestonParams(sigma=0.3, rho=-0.3, kappa=1.5, theta=0.04, r=0.05)
    payoff = PutPayoff(strike)
    data = ObstacleData(f=Constant(0.0), g=payoff, terminal=payoff, psi=payoff)
    inst = heston_instance(params, shape, n_levels, data=data)
    return solve_obstacle_problem(inst.op, inst.grid, data, SolverConfig(), PsorConfig()), inst


SUITES = {
    "fichera": lambda jobs=1, **kw: fichera_suite(**kw)[0],
    "ghost_data": lambda jobs=1, **kw: ghost_suite(**kw),
    "wmp": lambda jobs=1, **kw: wmp_suite(jobs=jobs, **kw),
    "bounds_c_pos": lambda jobs=1, **kw: bounds_suite(C_POS, jobs=jobs, **kw),
    "bounds_c_nonneg": lambda jobs=1, **kw: bounds_suite(C_NONNEG, jobs=jobs, **kw),
    "bounds_c_bounded_below": lambda jobs=1, **kw: bounds_suite(C_BOUNDED_BELOW, jobs=jobs, **kw),
    "comparison": lambda jobs=1, **kw: comparison_suite(jobs=jobs, **kw),
    "obstacle": lambda jobs=1, **kw: obstacle_suite(jobs=jobs, **kw),
    "strong_max": lambda jobs=1, **kw: strong_max_suite(jobs=jobs, **kw),
    "hopf": lambda jobs=1, **kw: hopf_suite(**kw),
    "convergence": lambda jobs=1, **kw: convergence_suite(**kw),
    "boundary_condition": lambda jobs=1, **kw: boundary_condition_suite(**kw),
}
