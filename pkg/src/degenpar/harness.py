"""Random and constructed problem instances, and verdicts for the maximum-principle estimates.

Discrete suprema are grid maxima. ``sup u*`` runs over Dirichlet nodes at all
levels plus every node of the terminal level; ``sup Lu`` runs over interior
and degenerate-boundary nodes below the terminal level, where the discrete
row residual equals ``f`` for a solution.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .fd import (DEG_NODE, INTERIOR, Grid, SolverConfig, Trajectory, build_grid,
                 solve_terminal_value_problem)
from .geometry import DomainSpec, classify_degenerate_boundary, reachable_set
from .obstacle import ObstacleData, ObstacleResult, PsorConfig, solve_obstacle_problem
from .operator import HestonParams, ParabolicOperator, make_constant, make_heston
from .verdict import INCONCLUSIVE, Verdict

C_POS = "c_pos"
C_NONNEG = "c_nonneg"
C_BOUNDED_BELOW = "c_bounded_below"
REGIMES = (C_POS, C_NONNEG, C_BOUNDED_BELOW)
C0_DEFAULT = 0.05
SIGNS = ("any", "nonpos", "nonneg", "zero", "neg")


class RegimeMismatch(ValueError):
    """A check was requested under hypotheses its estimate does not grant."""


# --- random data fields ----------------------------------------------------


@dataclass(frozen=True)
class RandomField:
    """``offset + sum_j amp_j cos(<k_j, x> + w_j t + phase_j)``; picklable and vectorised."""

    offset: float
    amp: tuple = ()
    k: tuple = ()
    w: tuple = ()
    phase: tuple = ()

    def __call__(self, t, x):
        x = np.atleast_2d(x)
        out = np.full(x.shape[0], float(self.offset))
        for a, k, w, p in zip(self.amp, self.k, self.w, self.phase):
            out = out + a * np.cos(x @ np.asarray(k) + w * t + p)
        return out

    @property
    def bound(self) -> float:
        return float(np.sum(np.abs(self.amp)))

    def shifted(self, delta: float) -> "RandomField":
        return replace(self, offset=self.offset + delta)


def random_field(rng: np.random.Generator, dim: int, sign: str = "any", scale: float = 1.0,
                 n_modes: int = 3) -> RandomField:
    if sign not in SIGNS:
        raise ValueError(f"unknown sign {sign!r}; choose from {SIGNS}")
    if sign == "zero":
        return RandomField(0.0)
    amp = tuple(float(v) for v in scale * rng.uniform(-1, 1, n_modes) / n_modes)
    k = tuple(tuple(float(v) for v in rng.uniform(-3, 3, dim)) for _ in range(n_modes))
    w = tuple(float(v) for v in rng.uniform(-2, 2, n_modes))
    phase = tuple(float(v) for v in rng.uniform(0, 2 * np.pi, n_modes))
    s = float(np.sum(np.abs(amp)))
    offset = {"any": float(rng.uniform(-s, s)), "nonpos": -s, "nonneg": s, "neg": -s - 0.05 * scale}[sign]
    return RandomField(offset, amp, k, w, phase)


@dataclass(frozen=True)
class Constant:
    value: float

    def __call__(self, t, x):
        return np.full(np.atleast_2d(x).shape[0], float(self.value))


@dataclass(frozen=True)
class MinOf:
    first: object
    second: object

    def __call__(self, t, x):
        return np.minimum(self.first(t, x), self.second(t, x))


@dataclass(frozen=True)
class Sum:
    first: object
    second: object

    def __call__(self, t, x):
        return self.first(t, x) + self.second(t, x)


# --- synthetic separable operators ----------------------------------------


@dataclass(frozen=True)
class SeparableParams:
    """``a = (1 + eps t) diag(s_1 (x1 - lo_1), s_2, ...)``, ``b_1 = b0 + b1 (x1 - lo_1)``, ``b_k`` constant,
    ``c = c_lo + c_amp (1 + sin(omega x1 + t + phi)) / 2``. Degenerate on ``x1 = lo`` with inflow ``b0 >= 0``."""

    dim: int
    s: tuple
    eps: float
    b0: float
    b1: float
    b_rest: tuple
    c_lo: float
    c_amp: float
    omega: float
    phi: float
    lo: float = 0.0


def make_separable(p: SeparableParams) -> ParabolicOperator:
    d = p.dim
    s = np.asarray(p.s, dtype=float)

    def a(t, x):
        diag = np.empty((x.shape[0], d))
        diag[:, 0] = s[0] * np.maximum(x[:, 0] - p.lo, 0.0)
        diag[:, 1:] = s[1:]
        out = np.zeros((x.shape[0], d, d))
        idx = np.arange(d)
        out[:, idx, idx] = diag
        return out * (1.0 + p.eps * np.asarray(t, dtype=float).reshape(-1, 1, 1))

    def da(t, x):
        out = np.zeros((x.shape[0], d, d, d))
        out[:, 0, 0, 0] = s[0] * (1.0 + p.eps * np.asarray(t, dtype=float).reshape(-1)) * np.ones(x.shape[0])
        return out

    def b(t, x):
        out = np.empty((x.shape[0], d))
        out[:, 0] = p.b0 + p.b1 * (x[:, 0] - p.lo)
        out[:, 1:] = np.asarray(p.b_rest, dtype=float)
        return out

    def c(t, x):
        return p.c_lo + p.c_amp * 0.5 * (1.0 + np.sin(p.omega * x[:, 0] + t + p.phi))

    return ParabolicOperator(dim=d, a=a, b=b, c=c, da=da, name="separable", time_independent=(p.eps == 0.0),
                             params=dict(p.__dict__))


# --- instances -------------------------------------------------------------


@dataclass
class ProblemInstance:
    op: ParabolicOperator
    dom: DomainSpec
    grid: Grid
    data: ObstacleData
    seed: int | None
    regime: str
    tags: dict = field(default_factory=dict)

    def solve(self, cfg: SolverConfig | None = None, data=None, **kw) -> Trajectory:
        d = data if data is not None else self.data
        if isinstance(d, ObstacleData):
            d = d.without_obstacle()
        return solve_terminal_value_problem(self.op, self.grid, d, cfg, **kw)

    def solve_obstacle(self, cfg: SolverConfig | None = None, psor: PsorConfig | None = None,
                       data=None) -> ObstacleResult:
        return solve_obstacle_problem(self.op, self.grid, data if data is not None else self.data, cfg, psor)

    def with_data(self, **changes) -> "ProblemInstance":
        return replace(self, data=replace(self.data, **changes))


def sample_c(op: ParabolicOperator, grid: Grid) -> tuple[float, float]:
    lo, hi = np.inf, -np.inf
    for t in grid.times:
        _, _, c = op.coefficients(t, grid.points)
        lo, hi = min(lo, float(c.min())), max(hi, float(c.max()))
    return lo, hi


def _regime_tags(regime: str, c_min: float, T: float) -> dict:
    tags = {"c_min": c_min, "T": T}
    if regime == C_POS:
        if c_min < C0_DEFAULT:
            raise RegimeMismatch(f"sampled min c = {c_min} < c0 = {C0_DEFAULT}")
        tags["c0"] = C0_DEFAULT
    elif regime == C_NONNEG:
        if c_min < 0:
            raise RegimeMismatch(f"sampled min c = {c_min} < 0")
    elif regime == C_BOUNDED_BELOW:
        tags["K0"] = max(-c_min, 0.0)
    else:
        raise ValueError(f"unknown regime {regime!r}; choose from {REGIMES}")
    return tags


def _draw_c(rng, regime):
    """Lower end and amplitude of ``c`` for the regime."""
    if regime == C_POS:
        return C0_DEFAULT + float(rng.uniform(0, 0.1)), float(rng.uniform(0, 0.2))
    if regime == C_NONNEG:
        return 0.0, float(rng.uniform(0, 0.2)) if rng.uniform() < 0.7 else 0.0
    if regime == C_BOUNDED_BELOW:
        return -float(rng.uniform(0.1, 0.5)), float(rng.uniform(0, 0.3))
    raise ValueError(f"unknown regime {regime!r}; choose from {REGIMES}")


HESTON_BOX = ((-1.0, 1.0), (0.0, 0.5))


def random_instance(seed: int, regime: str, dim: int = 2, resolution=(11, 6), family: str | None = None,
                    f_sign: str = "any", g_sign: str = "any", obstacle: bool = False) -> ProblemInstance:
    """Seeded instance satisfying the regime's conditions on ``c`` and inflow on the degenerate boundary.

    ``family`` is ``"heston"`` (d = 2 only) or ``"separable"``; by default d = 2
    draws either with equal odds. ``resolution = (nodes per axis, time levels)``.
    """
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}; choose from {REGIMES}")
    rng = np.random.default_rng([int(seed), REGIMES.index(regime), dim])
    if family is None:
        family = "heston" if dim == 2 and rng.uniform() < 0.5 else "separable"
    T = float(rng.uniform(0.5, 1.0))
    c_lo, c_amp = _draw_c(rng, regime)
    if family == "heston":
        if dim != 2:
            raise ValueError("the Heston family is two-dimensional")
        r = c_lo + c_amp * float(rng.uniform())
        params = HestonParams(sigma=float(rng.uniform(0.2, 0.5)), rho=float(rng.uniform(-0.3, 0.3)),
                              kappa=float(rng.uniform(0.5, 2.0)), theta=float(rng.uniform(0.02, 0.1)),
                              r=r, q=float(rng.uniform(0, 0.05)))
        op = make_heston(params)
        dom = DomainSpec(T=T, box=HESTON_BOX)
    elif family == "separable":
        p = SeparableParams(
            dim=dim, s=tuple(float(v) for v in rng.uniform(0.2, 1.0, dim)), eps=float(rng.uniform(0, 0.5)),
            b0=float(rng.uniform(0.1, 1.0)), b1=float(rng.uniform(-1, 1)),
            b_rest=tuple(float(v) for v in rng.uniform(-0.5, 0.5, dim - 1)),
            c_lo=c_lo, c_amp=c_amp, omega=float(rng.uniform(1, 4)), phi=float(rng.uniform(0, 2 * np.pi)),
        )
        op = make_separable(p)
        dom = DomainSpec(T=T, box=((0.0, 1.0),) * dim)
    else:
        raise ValueError(f"unknown family {family!r}")
    n_space, n_levels = resolution
    part = classify_degenerate_boundary(op, dom)
    grid = build_grid(dom, part, n_space, n_levels)
    f = random_field(rng, dim, f_sign)
    g = random_field(rng, dim, g_sign)
    psi = MinOf(random_field(rng, dim, "any"), g) if obstacle else None
    c_min, c_max = sample_c(op, grid)
    tags = _regime_tags(regime, c_min, T)
    tags.update(family=family, c_max=c_max, f_sign=f_sign, g_sign=g_sign, dim=dim)
    return ProblemInstance(op, dom, grid, ObstacleData(f=f, g=g, psi=psi), seed, regime, tags)


# --- grid sets used by the estimates ---------------------------------------


def boundary_mask(grid: Grid) -> np.ndarray:
    """``(n_levels, n_nodes)`` mask of nodes carrying data: Dirichlet nodes plus the terminal level."""
    m = np.tile(grid.dirichlet_mask(), (grid.n_levels, 1))
    m[-1] = True
    return m


def q_mask(grid: Grid) -> np.ndarray:
    """Nodes where the equation holds: interior plus degenerate boundary, below the terminal level."""
    m = np.tile(grid.underline_mask(), (grid.n_levels, 1))
    m[-1] = False
    return m


def source_values(inst: ProblemInstance, data=None) -> np.ndarray:
    """``f`` on the equation nodes, NaN elsewhere."""
    data = data if data is not None else inst.data
    grid = inst.grid
    out = np.full((grid.n_levels, grid.n_nodes), np.nan)
    idx = np.flatnonzero(grid.underline_mask())
    for lv in range(grid.n_levels - 1):
        out[lv, idx] = data.source(grid, lv, idx)
    return out


def _slack(cfg: SolverConfig | None = None, psor: PsorConfig | None = None) -> float:
    cfg = cfg or SolverConfig()
    return 10.0 * (cfg.tol_lin + (psor.tol_psor if psor is not None else 0.0))


def _witness(grid: Grid, excess: np.ndarray):
    lv, node = np.unravel_index(int(np.nanargmax(excess)), excess.shape)
    return {"level": int(lv), "t": float(grid.times[lv]), "node": int(node), "x": grid.points[node].tolist()}


def _bound_verdict(pid, statement, excess, grid, tol, details=None) -> Verdict:
    viol = float(np.nanmax(excess))
    return Verdict(pid, statement, max(viol, 0.0), tol, witness=_witness(grid, excess) if viol > tol else None,
                   details=details or {})


def _require_c(inst, c_floor, what):
    c_min = inst.tags.get("c_min")
    if c_min is None:
        c_min, _ = sample_c(inst.op, inst.grid)
    if c_min < c_floor:
        raise RegimeMismatch(f"{what} needs c >= {c_floor}; sampled min c = {c_min}")


def _c0(inst) -> float:
    c0 = inst.tags.get("c0")
    if c0 is None or c0 <= 0:
        raise RegimeMismatch("estimate needs a positive lower bound c0 on c")
    _require_c(inst, c0, "estimate")
    return c0


# --- boundary-value estimates ----------------------------------------------

WMP_STATEMENTS = {
    1: "c >= 0, Lu <= 0  =>  u <= max(0, sup u*)",
    2: "c >= c0 > 0  =>  u <= max(0, sup Lu / c0, sup u*)",
    3: "c >= 0, Lv >= 0  =>  v >= min(0, inf v*)",
    4: "c >= c0 > 0  =>  v >= min(0, inf Lv / c0, inf v*)",
    5: "c >= 0, Lu = 0  =>  |u| <= max |u*|",
    6: "c >= c0 > 0  =>  |u| <= max(||Lu|| / c0, max |u*|)",
}


def check_weak_max_bound(u: Trajectory, inst: ProblemInstance, item: int, tol: float | None = None,
                         f: np.ndarray | None = None) -> Verdict:
    """Weak maximum principle estimate number ``item`` (1..6) for a solution ``u`` of ``Lu = f``."""
    if item not in WMP_STATEMENTS:
        raise ValueError(f"item must be one of {sorted(WMP_STATEMENTS)}")
    grid, U = inst.grid, u.values
    tol = _slack() if tol is None else tol
    f = source_values(inst) if f is None else f
    fq = f[q_mask(grid)]
    fq = fq if fq.size else np.zeros(1)
    ub = U[boundary_mask(grid)]
    if item in (1, 3, 5):
        _require_c(inst, 0.0, f"item {item}")
        if item == 1 and fq.max() > 0:
            raise RegimeMismatch("item 1 needs Lu <= 0")
        if item == 3 and fq.min() < 0:
            raise RegimeMismatch("item 3 needs Lv >= 0")
        if item == 5 and np.abs(fq).max() > 0:
            raise RegimeMismatch("item 5 needs Lu = 0")
    else:
        c0 = _c0(inst)
    if item == 1:
        excess = U - max(0.0, ub.max())
    elif item == 2:
        excess = U - max(0.0, fq.max() / c0, ub.max())
    elif item == 3:
        excess = min(0.0, ub.min()) - U
    elif item == 4:
        excess = min(0.0, fq.min() / c0, ub.min()) - U
    elif item == 5:
        excess = np.abs(U) - np.abs(ub).max()
    else:
        excess = np.abs(U) - max(np.abs(fq).max() / c0, np.abs(ub).max())
    return _bound_verdict(f"wmp.estimate.{item}", WMP_STATEMENTS[item], excess, grid, tol,
                          {"seed": inst.seed, "regime": inst.regime})


def time_weight(inst: ProblemInstance) -> np.ndarray:
    """``e^{(K0 + 1)(T - t)}`` per time level, with ``K0`` from the sampled minimum of ``c``."""
    if "K0" not in inst.tags:
        raise RegimeMismatch("time-weighted estimate needs the c >= -K0 regime tag")
    _require_c(inst, -inst.tags["K0"], "time-weighted estimate")
    K0, T = inst.tags["K0"], inst.dom.T
    return np.exp((K0 + 1.0) * (T - inst.grid.times))


def check_time_weighted_bound(u: Trajectory, inst: ProblemInstance, kind: str = "sub", literal: bool = False,
                              tol: float | None = None, f: np.ndarray | None = None) -> Verdict:
    """Estimates with ``1/c0`` replaced by ``W(t) = e^{(K0 + 1)(T - t)}`` for ``c >= -K0``.

    The weight multiplies every term of the bound (``W sup f`` and ``W sup u*``).
    ``literal=True`` applies the weight to the source term only, which is not
    a valid bound: with ``c = -K0``, ``f = 0`` and ``u* = 1`` the solution is
    ``e^{K0 (T - t)} > 1``.
    """
    grid, U = inst.grid, u.values
    tol = _slack() if tol is None else tol
    W = time_weight(inst)[:, None]
    Wb = 1.0 if literal else W
    f = source_values(inst) if f is None else f
    fq = f[q_mask(grid)]
    fq = fq if fq.size else np.zeros(1)
    ub = U[boundary_mask(grid)]
    if kind == "sub":
        excess = U - np.maximum(0.0, np.maximum(W * fq.max(), Wb * ub.max()))
        st = "c >= -K0  =>  u <= max(0, W(t) sup Lu, W(t) sup u*)"
    elif kind == "super":
        excess = np.minimum(0.0, np.minimum(W * fq.min(), Wb * ub.min())) - U
        st = "c >= -K0  =>  v >= min(0, W(t) inf Lv, W(t) inf v*)"
    elif kind == "solution":
        excess = np.abs(U) - np.maximum(W * np.abs(fq).max(), Wb * np.abs(ub).max())
        st = "c >= -K0  =>  |u| <= max(W(t) ||Lu||, W(t) max |u*|)"
    else:
        raise ValueError("kind must be 'sub', 'super' or 'solution'")
    if literal:
        st = st.replace("W(t) sup u*", "sup u*").replace("W(t) inf v*", "inf v*").replace("W(t) max", "max")
    return _bound_verdict(f"wmp.time_weighted.{kind}" + (".literal" if literal else ""), st + ", W = e^{(K0+1)(T-t)}",
                          excess, grid, tol, {"K0": inst.tags["K0"], "seed": inst.seed})


def check_comparison(u: Trajectory, v: Trajectory, inst_pair=None, tol: float = 1e-8,
                     property_id: str = "comparison") -> Verdict:
    """Nodewise ``u <= v`` for paired problems on one grid."""
    if u.grid is not v.grid and (u.grid.shape != v.grid.shape or u.grid.n_levels != v.grid.n_levels
                                 or u.grid.dom != v.grid.dom):
        raise ValueError("comparison needs both trajectories on the same grid")
    excess = u.values - v.values
    return _bound_verdict(property_id, "Lu <= Lv on Q and u* <= v* on the data boundary  =>  u <= v",
                          excess, u.grid, tol)


def check_uniqueness(u: Trajectory, v: Trajectory, tol: float = 1e-10) -> Verdict:
    excess = np.abs(u.values - v.values)
    return _bound_verdict("uniqueness", "identical data  =>  identical solutions", excess, u.grid, tol)


# --- obstacle estimates ----------------------------------------------------

OBSTACLE_STATEMENTS = {
    1: "f >= 0  =>  v >= min(0, inf g)",
    2: "c >= c0 > 0  =>  v >= min(0, inf f / c0, inf g)",
    3: "f <= 0  =>  u <= max(0, sup g, sup psi)",
    4: "c >= c0 > 0  =>  u <= max(0, sup f / c0, sup g, sup psi)",
    5: "f1 >= f2, psi1 >= psi2, g1 >= g2  =>  u1 >= u2",
    6: "|u1 - u2| <= max(||f1 - f2|| / c0, ||g1 - g2||, ||psi1 - psi2||); with f1 = f2 and c >= 0 the f term drops",
}


def _psi_sup(res: ObstacleResult) -> float:
    finite = res.psi[np.isfinite(res.psi)]
    return float(finite.max()) if finite.size else -np.inf


def check_obstacle_bound(res: ObstacleResult, inst: ProblemInstance, item: int, weighted: bool = False,
                         tol: float | None = None) -> Verdict:
    """Single-solution obstacle estimates (items 1..4); ``weighted`` swaps ``1/c0`` for ``W(t)`` on all terms."""
    grid, U = inst.grid, res.values
    tol = _slack(None, PsorConfig()) if tol is None else tol
    _require_c(inst, -inst.tags.get("K0", 0.0) if weighted else 0.0, f"obstacle item {item}")
    fq = res.f[q_mask(grid)]
    gb = U[boundary_mask(grid)]
    psi_sup = max(_psi_sup(res), -np.inf)
    if weighted:
        if item not in (2, 4):
            raise ValueError("time-weighted obstacle estimates exist for items 2 and 4")
        scale = time_weight(inst)[:, None]
    elif item in (2, 4):
        scale = 1.0 / _c0(inst)
    if item == 1:
        if fq.min() < 0:
            raise RegimeMismatch("obstacle item 1 needs f >= 0")
        excess = min(0.0, gb.min()) - U
    elif item == 2:
        w = scale if weighted else 1.0
        excess = np.minimum(0.0, np.minimum(scale * fq.min(), w * gb.min())) - U
    elif item == 3:
        if fq.max() > 0:
            raise RegimeMismatch("obstacle item 3 needs f <= 0")
        excess = U - max(0.0, gb.max(), psi_sup)
    elif item == 4:
        w = scale if weighted else 1.0
        excess = U - np.maximum(0.0, np.maximum(scale * fq.max(), w * max(gb.max(), psi_sup)))
    else:
        raise ValueError("single-solution obstacle items are 1..4")
    pid = f"obstacle.estimate.{item}" + (".time_weighted" if weighted else "")
    return _bound_verdict(pid, OBSTACLE_STATEMENTS[item], excess, grid, tol, {"seed": inst.seed})


def check_obstacle_pair(res1: ObstacleResult, res2: ObstacleResult, inst: ProblemInstance, item: int,
                        weighted: bool = False, tol: float | None = None) -> Verdict:
    """Comparison (item 5: ``u1 >= u2``) and stability (item 6) for two solves on one grid."""
    grid = inst.grid
    tol = _slack(None, PsorConfig()) if tol is None else tol
    U1, U2 = res1.values, res2.values
    if item == 5:
        excess = U2 - U1
        return _bound_verdict("obstacle.comparison", OBSTACLE_STATEMENTS[5], excess, grid, tol)
    if item != 6:
        raise ValueError("pair items are 5 and 6")
    q = q_mask(grid)
    df = np.abs(res1.f[q] - res2.f[q]).max() if q.any() else 0.0
    dg = np.abs(U1[boundary_mask(grid)] - U2[boundary_mask(grid)]).max()
    both = np.isfinite(res1.psi) & np.isfinite(res2.psi)
    dpsi = float(np.abs(res1.psi[both] - res2.psi[both]).max()) if both.any() else 0.0
    if weighted:
        W = time_weight(inst)[:, None]
        bound = W * max(df, dg, dpsi)
        pid = "obstacle.stability.time_weighted"
    elif df == 0.0:
        _require_c(inst, 0.0, "obstacle stability with equal f")
        bound = max(dg, dpsi)
        pid = "obstacle.stability.equal_f"
    else:
        bound = max(df / _c0(inst), dg, dpsi)
        pid = "obstacle.stability"
    excess = np.abs(U1 - U2) - bound
    return _bound_verdict(pid, OBSTACLE_STATEMENTS[6], excess, grid, tol,
                          {"df": float(df), "dg": float(dg), "dpsi": dpsi})


def check_obstacle_estimates(results, inst: ProblemInstance, items=(1, 2, 3, 4, 5, 6),
                             weighted: bool = False) -> list[Verdict]:
    """Every applicable obstacle estimate.

    ``results`` is a single :class:`ObstacleResult` or a tuple ``(res1, res2)``
    for the pair items. Items whose hypotheses fail on this instance are
    skipped; a regime mismatch for every requested item raises.
    """
    pair = isinstance(results, tuple)
    out, skipped = [], []
    for item in items:
        try:
            if item in (5, 6):
                if pair:
                    out.append(check_obstacle_pair(results[0], results[1], inst, item, weighted and item == 6))
            elif not pair:
                if weighted and item not in (2, 4):
                    continue
                out.append(check_obstacle_bound(results, inst, item, weighted))
        except RegimeMismatch as exc:
            skipped.append(str(exc))
    if not out:
        raise RegimeMismatch("no requested obstacle estimate applies: " + "; ".join(skipped))
    return out


def check_obstacle_feasible(res: ObstacleResult) -> Verdict:
    free = res.stepper.free
    gap = (res.psi - res.values)[:, free]
    viol = float(np.max(gap, initial=-np.inf))
    return Verdict("obstacle.above_psi", "u >= psi at every interior and degenerate-boundary node",
                   max(viol, 0.0), 0.0)


# --- strong maximum principle ----------------------------------------------


def check_strong_max_constancy(u: Trajectory, inst: ProblemInstance, P0, tol: float = 1e-10,
                               zero_max: bool = False) -> Verdict:
    """``u = u(P0)`` on ``S(P0)`` (or ``u = 0`` on ``C(P0)`` when ``zero_max``) at a maximum node ``P0``."""
    level, node = P0
    grid = inst.grid
    if not grid.underline_mask()[node]:
        raise ValueError(f"P0 node {node} lies on the Dirichlet boundary")
    S, C = reachable_set(inst.dom, grid, P0)
    U = u.values
    u0 = U[level, node]
    if zero_max:
        viol = float(np.max(np.abs(U[C])))
        pid, st = "strong_max.zero_on_slice", "max u = u(P0) = 0  =>  u = 0 on C(P0)"
    else:
        viol = float(np.max(np.abs(U[S] - u0)))
        pid, st = "strong_max.constancy", "max u = u(P0) > 0 at P0 off the data boundary  =>  u = u(P0) on S(P0)"
    hyp = float(U[grid.underline_mask()[None, :] & (np.arange(grid.n_levels) < grid.n_levels)[:, None]].max())
    details = {"u_P0": float(u0), "nodes_in_S": int(S.sum()), "nodes_in_C": int(C.sum())}
    if u0 < hyp - tol:
        return Verdict(pid, st, viol, tol, status=INCONCLUSIVE, details={**details, "reason": "P0 is not a maximum"})
    return Verdict(pid, st, viol, tol, details=details)


def check_argmax_on_dirichlet(u: Trajectory, inst: ProblemInstance, tie_tol: float = 1e-12) -> Verdict:
    """Every node within ``tie_tol`` of a positive global maximum carries Dirichlet or terminal data."""
    grid, U = inst.grid, u.values
    M = float(U.max())
    st = "c >= 0, f <= 0, non-constant data  =>  positive max attained only on the data boundary"
    if M <= 0:
        return Verdict("strong_max.argmax_on_data_boundary", st, 0.0, 0.0, status=INCONCLUSIVE,
                       details={"reason": "no positive maximum", "max": M})
    top = U >= M - tie_tol
    off = top & q_mask(grid)
    witness = _witness(grid, np.where(off, 1.0, np.nan)) if off.any() else None
    return Verdict("strong_max.argmax_on_data_boundary", st, float(off.sum()), 0.0, witness=witness,
                   details={"max": M, "n_argmax": int(top.sum())})


# --- Hopf sign -------------------------------------------------------------


def inward_axis(grid: Grid, node: int) -> tuple[int, int]:
    """``(axis, +1/-1)`` of the inward normal at a boundary node on exactly one face."""
    mi = grid.multi_index[node]
    hits = [(k, 1 if mi[k] == 0 else -1) for k in range(grid.dim) if mi[k] in (0, grid.shape[k] - 1)]
    if len(hits) != 1:
        raise ValueError(f"node {node} is not on exactly one face (normal undefined)")
    return hits[0]


def check_hopf_sign(u: Trajectory, inst: ProblemInstance, Pbar, threshold: float = 1e-6,
                    strict_margin: float = 1e-12) -> Verdict:
    """Inward one-sided difference quotient at a strict boundary maximum must be negative.

    Inconclusive when ``Pbar`` is not a strict maximum over its free spatial
    neighbours by more than ``strict_margin`` (relative), or when none of the
    cases ``c = 0``, ``c >= 0 and u(Pbar) >= 0``, ``u(Pbar) = 0`` applies.
    """
    level, node = Pbar
    grid = inst.grid
    axis, sgn = inward_axis(grid, node)
    U = u.values[level]
    j = node + sgn * grid.strides[axis]
    q = (U[j] - U[node]) / grid.h[axis]
    pid, st = "hopf.inward_quotient", "strict boundary max  =>  (u(P + h n) - u(P)) / h < 0"
    nb = [k for k in grid.neighbours()[node] if grid.underline_mask()[k]]
    details = {"quotient": float(q), "u_Pbar": float(U[node]), "axis": axis + 1}
    margin = strict_margin * max(1.0, abs(U[node]))
    if not nb or not np.all(U[nb] < U[node] - margin):
        return Verdict(pid, st, 0.0, 0.0, status=INCONCLUSIVE, details={**details, "reason": "no strict maximum"})
    c_min, c_max = inst.tags.get("c_min"), inst.tags.get("c_max")
    if c_min is None:
        c_min, c_max = sample_c(inst.op, grid)
    if c_min == 0.0 and c_max == 0.0:
        case = "c = 0"
    elif c_min >= 0 and U[node] >= 0:
        case = "c >= 0, u(P) >= 0"
    elif abs(U[node]) <= 1e-14:
        case = "u(P) = 0"
    else:
        return Verdict(pid, st, 0.0, 0.0, status=INCONCLUSIVE, details={**details, "reason": "no case applies"})
    details["case"] = case
    return Verdict(pid, st, max(q + threshold, 0.0), 0.0, details=details)


# --- constructed instances -------------------------------------------------


def make_instance(op, dom, shape, n_levels, data, regime=C_NONNEG, seed=None, **tags) -> ProblemInstance:
    """Classify, grid and tag a hand-built problem; the regime is checked against sampled ``c``."""
    part = classify_degenerate_boundary(op, dom)
    grid = build_grid(dom, part, shape, n_levels)
    c_min, c_max = sample_c(op, grid)
    t = _regime_tags(regime, c_min, dom.T)
    t.update(c_max=c_max, **tags)
    return ProblemInstance(op, dom, grid, data, seed, regime, t)


def degenerate_1d(s: float = 1.0, b0: float = 1.0, b1: float = 0.0, c: float = 0.0) -> ParabolicOperator:
    """``a = s x``, ``b = b0 + b1 x``, constant ``c`` on ``x >= 0``; degenerate inflow at ``x = 0``."""
    p = SeparableParams(dim=1, s=(s,), eps=0.0, b0=b0, b1=b1, b_rest=(), c_lo=c, c_amp=0.0, omega=0.0, phi=0.0)
    return make_separable(p)


def hopf_instances(n_space: int = 41, n_levels: int = 21) -> list[tuple[ProblemInstance, tuple[int, int]]]:
    """Ten boundary-maximum instances: ``f < 0``, zero data on the face holding ``Pbar``, ``g <= 0`` elsewhere.

    The maximum sits on a Dirichlet face; the operators have a degenerate
    inflow face (``b_perp > 0``) or are uniformly parabolic (classical case).
    """
    out = []
    data = ObstacleData(f=Constant(-1.0), g=Constant(0.0))
    mid = n_levels // 2
    for s, b0, c in ((1.0, 1.0, 0.0), (0.5, 2.0, 0.0), (1.0, 0.5, 0.1), (2.0, 1.0, 0.5)):
        op = degenerate_1d(s, b0, 0.0, c)
        inst = make_instance(op, DomainSpec(T=1.0, box=((0.0, 1.0),)), n_space, n_levels, data, family="hopf-1d")
        out.append((inst, (mid, inst.grid.n_nodes - 1)))
    heston = [(0.4, 1.0, 0.04, 0.0), (0.2, 1.0, 0.02, 0.0), (0.2, 1.5, 0.04, 0.05), (0.3, 1.0, 0.06, 0.02)]
    for k, (sig, kap, th, r) in enumerate(heston):
        op = make_heston(HestonParams(sig, -0.3, kap, th, r, 0.0))
        inst = make_instance(op, DomainSpec(T=1.0, box=HESTON_BOX), 21, n_levels, data, family="hopf-heston")
        g = inst.grid
        j = g.shape[1] // 2
        node = (g.shape[0] - 1) * g.strides[0] + j if k % 2 == 0 else (g.shape[0] // 2) * g.strides[0] + g.shape[1] - 1
        out.append((inst, (mid, int(node))))
    for box in (((0.0, 1.0), (0.0, 1.0)), ((0.25, 0.75), (0.0, 0.5))):
        op = make_constant(np.eye(2), np.zeros(2), 0.0, name="identity-laplacian")
        inst = make_instance(op, DomainSpec(T=1.0, box=box), 21, n_levels, data, family="hopf-classical")
        g = inst.grid
        node = (g.shape[0] // 2) * g.strides[0]
        out.append((inst, (mid, int(node))))
    return out


def constant_instance(seed: int, M: float = 1.0, resolution=(11, 6)) -> ProblemInstance:
    """``c = 0``, ``f = 0``, ``g = M``: the solution is the constant ``M``."""
    rng = np.random.default_rng(seed)
    if rng.uniform() < 0.5:
        params = HestonParams(float(rng.uniform(0.2, 0.5)), float(rng.uniform(-0.3, 0.3)),
                              float(rng.uniform(0.5, 2)), float(rng.uniform(0.02, 0.1)), 0.0, 0.0)
        op, dom = make_heston(params), DomainSpec(T=1.0, box=HESTON_BOX)
    else:
        op = degenerate_1d(float(rng.uniform(0.2, 1)), float(rng.uniform(0.1, 1)), float(rng.uniform(-1, 1)), 0.0)
        dom = DomainSpec(T=1.0, box=((0.0, 1.0),))
    return make_instance(op, dom, resolution[0], resolution[1], ObstacleData(f=Constant(0.0), g=Constant(M)),
                     seed=seed, family="constant")


@dataclass(frozen=True)
class StepInTime:
    """Zero for ``t >= t1``, ``value`` before."""

    t1: float
    value: float

    def __call__(self, t, x):
        return np.full(np.atleast_2d(x).shape[0], 0.0 if t >= self.t1 - 1e-12 else float(self.value))


def zero_max_instance(n_space: int = 11, n_levels: int = 11) -> ProblemInstance:
    """``f = 0``; data zero for ``t >= T/2`` and negative before, so ``u = 0`` on the later half only."""
    op = degenerate_1d(1.0, 1.0, 0.0, 0.1)
    data = ObstacleData(f=Constant(0.0), g=StepInTime(0.5, -1.0))
    return make_instance(op, DomainSpec(T=1.0, box=((0.0, 1.0),)), n_space, n_levels, data, family="zero-max")


# --- degenerate-data independence and the Ventcel/Fichera contrast ---------


@dataclass(frozen=True)
class GhostAtPoints:
    """``base + amplitude * cos(...)`` at the listed spatial points, ``base`` elsewhere."""

    base: object
    points: tuple
    amplitude: float = 1e3

    def __call__(self, t, x):
        x = np.atleast_2d(x)
        pts = np.asarray(self.points, dtype=float).reshape(-1, x.shape[1])
        on = np.zeros(x.shape[0], dtype=bool)
        for p in pts:
            on |= np.all(np.abs(x - p) <= 1e-12, axis=1)
        noise = self.amplitude * np.cos(7.0 * x.sum(axis=1) + 3.0 * t)
        return self.base(t, x) + np.where(on, noise, 0.0)


def heston_instance(params: HestonParams, shape=21, n_levels: int = 11, data=None, box=HESTON_BOX,
                    T: float = 1.0) -> ProblemInstance:
    """Heston on a box with the far-field faces marked as truncations."""
    dom = DomainSpec(T=T, box=box, truncated_faces={"x1=lo", "x1=hi", "x2=hi"})
    payoff = PutPayoff(1.0)
    data = data or ObstacleData(f=Constant(0.0), g=payoff, terminal=payoff)
    regime = C_POS if params.r >= C0_DEFAULT else (C_NONNEG if params.r >= 0 else C_BOUNDED_BELOW)
    return make_instance(make_heston(params), dom, shape, n_levels, data, regime=regime, family="heston")


@dataclass(frozen=True)
class PutPayoff:
    strike: float

    def __call__(self, t, x):
        return np.maximum(self.strike - np.exp(np.atleast_2d(x)[:, 0]), 0.0)


def ghost_data_check(inst: ProblemInstance, cfg: SolverConfig | None = None) -> list[Verdict]:
    """Arbitrary ``g`` on degenerate-boundary nodes must not change the solution nor be read."""
    from .fd import RecordingProblemData

    cfg = cfg or SolverConfig()
    grid = inst.grid
    d = inst.data
    terminal = d.terminal if d.terminal is not None else d.g
    deg_nodes = grid.nodes_of(DEG_NODE)
    ghost_g = GhostAtPoints(d.g, tuple(map(tuple, grid.points[deg_nodes])))
    rec = RecordingProblemData(d.f, d.g, terminal)
    ghost = RecordingProblemData(d.f, ghost_g, terminal)
    u1 = solve_terminal_value_problem(inst.op, grid, rec, cfg)
    u2 = solve_terminal_value_problem(inst.op, grid, ghost, cfg)
    diff = float(np.max(np.abs(u1.values - u2.values)))
    reads = rec.reads_of("g", deg_nodes) + ghost.reads_of("g", deg_nodes)
    return [
        Verdict("ghost_data.unchanged", "ghost Dirichlet values on degenerate-boundary nodes leave u unchanged",
                diff, 10 * cfg.tol_lin, details={"n_deg_nodes": int(len(deg_nodes))}),
        Verdict("ghost_data.unread", "no Dirichlet data is read at degenerate-boundary nodes",
                float(reads), 0.0, details={"n_deg_nodes": int(len(deg_nodes))}),
    ]


def boundary_condition_contrast(params: HestonParams, offset: float = 1.0, shape=21, n_levels: int = 11,
                                min_change: float = 0.1) -> Verdict:
    """Pin the degenerate face to the first-order-row solution's trace plus ``offset`` and re-solve.

    The sup-norm change over interior nodes measures how much imposing
    Fichera-style data on ``x2 = 0`` alters the answer.
    """
    inst = heston_instance(params, shape, n_levels)
    base = inst.solve()
    grid = inst.grid
    mask = grid.node_class == DEG_NODE
    values = base.values + offset
    pinned = inst.solve(pinned=(mask, values))
    interior = grid.node_class == INTERIOR
    change = float(np.max(np.abs(pinned.values[:-1, interior] - base.values[:-1, interior])))
    return Verdict("boundary_condition.matters",
                   f"extra data on x2=0 offset by {offset:g} changes u by >= {min_change:g} in the interior",
                   max(min_change - change, 0.0), 0.0, details={"beta": params.beta, "sup_change": change})
