"""Monotone finite differences for ``Lu = f`` on Q with Dirichlet data on the non-degenerate boundary only.

Degenerate-boundary nodes carry the first-order row
``-u_t - <b, Du> + c u = f`` (second-order terms dropped), discretised with
upwind differences; ``b`` must point into the domain there.
"""

from __future__ import annotations

import csv
import io
import time
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import BoundaryPartition, DomainSpec, face_name
from .operator import ParabolicOperator
from .verdict import Verdict

OUTSIDE, INTERIOR, DEG_NODE, NONDEG_NODE, CORNER_NODE = -1, 0, 1, 2, 3
CLASS_NAMES = {OUTSIDE: "outside", INTERIOR: "interior", DEG_NODE: "deg",
               NONDEG_NODE: "nondeg", CORNER_NODE: "corner"}


class InflowError(ValueError):
    """The drift points out of the domain at a degenerate-boundary node."""

    def __init__(self, node: int, x, axis: int, b_perp: float):
        self.node = node
        super().__init__(
            f"degenerate-boundary node {node} at x={list(map(float, x))} has inward drift "
            f"b_perp={b_perp:.3e} < 0 along x{axis + 1}; the first-order boundary row is not well posed"
        )


class NonMonotoneError(RuntimeError):
    def __init__(self, verdict: Verdict):
        self.verdict = verdict
        super().__init__(f"assembled system is not an M-matrix: {verdict.line()}")


# --- grid ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Grid:
    dom: DomainSpec
    shape: tuple[int, ...]
    n_levels: int
    node_class: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.shape))

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(np.linspace(lo, hi, n) for (lo, hi), n in zip(self.dom.box, self.shape))

    @property
    def h(self) -> tuple[float, ...]:
        return tuple((hi - lo) / (n - 1) for (lo, hi), n in zip(self.dom.box, self.shape))

    @cached_property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.dom.T, self.n_levels)

    @property
    def dt(self) -> float:
        return self.dom.T / (self.n_levels - 1)

    @cached_property
    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    @cached_property
    def multi_index(self) -> np.ndarray:
        return np.stack(np.unravel_index(np.arange(self.n_nodes), self.shape), axis=1)

    @property
    def strides(self) -> tuple[int, ...]:
        out, s = [], 1
        for n in reversed(self.shape):
            out.append(s)
            s *= n
        return tuple(reversed(out))

    def underline_mask(self) -> np.ndarray:
        """Nodes of the interior plus the degenerate boundary (no Dirichlet data)."""
        return (self.node_class == INTERIOR) | (self.node_class == DEG_NODE)

    def dirichlet_mask(self) -> np.ndarray:
        return ~self.underline_mask()

    def nodes_of(self, cls: int) -> np.ndarray:
        return np.flatnonzero(self.node_class == cls)

    def counts(self) -> dict:
        return {CLASS_NAMES[k]: int(np.sum(self.node_class == k)) for k in CLASS_NAMES}

    def neighbours(self) -> list[np.ndarray]:
        return self._neighbours

    @cached_property
    def _neighbours(self) -> list[np.ndarray]:
        mi = self.multi_index
        out = []
        for i in range(self.n_nodes):
            nb = []
            for k, stride in enumerate(self.strides):
                if mi[i, k] > 0:
                    nb.append(i - stride)
                if mi[i, k] < self.shape[k] - 1:
                    nb.append(i + stride)
            out.append(np.array(nb, dtype=int))
        return out

    def node_faces(self, i: int) -> list[str]:
        mi = self.multi_index[i]
        faces = []
        for k, n in enumerate(self.shape):
            if mi[k] == 0:
                faces.append(face_name(k, "lo"))
            elif mi[k] == n - 1:
                faces.append(face_name(k, "hi"))
        return faces


def build_grid(dom: DomainSpec, partition: BoundaryPartition | None, shape, n_levels: int) -> Grid:
    """Tensor grid over the bounding box with every node classified once.

    A boundary node is degenerate when every box face through it is DEG; a node
    on two or more faces that are not all DEG is a corner and takes Dirichlet
    data by continuity. ``partition=None`` treats every face as non-degenerate.
    For union-of-box domains nodes off the closure of ``O`` are ``OUTSIDE``.
    """
    if np.isscalar(shape):
        shape = (int(shape),) * dom.dim
    shape = tuple(int(n) for n in shape)
    if len(shape) != dom.dim:
        raise ValueError(f"resolution has {len(shape)} axes, domain has {dom.dim}")
    if min(shape) < 3:
        raise ValueError(f"need at least 3 nodes per axis, got {shape}")
    if n_levels < 2:
        raise ValueError(f"need at least 2 time levels, got {n_levels}")
    deg = partition.deg if partition is not None else frozenset()
    n_nodes = int(np.prod(shape))
    mi = np.stack(np.unravel_index(np.arange(n_nodes), shape), axis=1)
    cls = np.full(n_nodes, INTERIOR, dtype=int)
    if dom.is_box:
        for i in range(n_nodes):
            faces = []
            for k, n in enumerate(shape):
                if mi[i, k] == 0:
                    faces.append(face_name(k, "lo"))
                elif mi[i, k] == n - 1:
                    faces.append(face_name(k, "hi"))
            if not faces:
                continue
            all_deg = all(f in deg for f in faces)
            if all_deg:
                cls[i] = DEG_NODE
            elif len(faces) == 1:
                cls[i] = NONDEG_NODE
            else:
                cls[i] = CORNER_NODE
    else:
        axes = [np.linspace(lo, hi, n) for (lo, hi), n in zip(dom.box, shape)]
        pts = np.stack([ax[mi[:, k]] for k, ax in enumerate(axes)], axis=1)
        tol = 1e-12
        inside = np.zeros(n_nodes, dtype=bool)
        closure = np.zeros(n_nodes, dtype=bool)
        for comp in dom.components:
            lo = np.array([c[0] for c in comp])
            hi = np.array([c[1] for c in comp])
            inside |= np.all((pts > lo + tol) & (pts < hi - tol), axis=1)
            closure |= np.all((pts >= lo - tol) & (pts <= hi + tol), axis=1)
        cls[:] = OUTSIDE
        cls[closure] = NONDEG_NODE
        cls[inside] = INTERIOR
    return Grid(dom=dom, shape=shape, n_levels=int(n_levels), node_class=cls)


# --- grid functions --------------------------------------------------------


@dataclass
class GridFunction:
    grid: Grid
    values: np.ndarray
    level: int | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_nodes,):
            raise ValueError(f"expected {self.grid.n_nodes} values, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid function has non-finite values")

    def as_array(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"x{k + 1}" for k in range(self.grid.dim)] + ["value"])
        for x, v in zip(self.grid.points, self.values):
            w.writerow([repr(float(c)) for c in x] + [repr(float(v))])
        return buf.getvalue()


@dataclass
class Trajectory:
    grid: Grid
    values: np.ndarray  # (n_levels, n_nodes)
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.values.shape != (self.grid.n_levels, self.grid.n_nodes):
            raise ValueError("trajectory shape does not match the grid")

    def level(self, n: int) -> GridFunction:
        return GridFunction(self.grid, self.values[n], n)

    def max(self) -> float:
        return float(self.values.max())


# --- problem data ----------------------------------------------------------


def _zero(t, x):
    return np.zeros(x.shape[0])


def _eval(fn, t, x) -> np.ndarray:
    out = np.broadcast_to(np.asarray(fn(t, x), dtype=float), (x.shape[0],))
    if not np.all(np.isfinite(out)):
        raise ValueError(f"non-finite data values at t={t}")
    return np.array(out)


@dataclass
class ProblemData:
    """Source ``f`` on Q, Dirichlet data ``g`` on the non-degenerate boundary, terminal data.

    All callables take ``(t, x)`` with ``x`` of shape ``(n, d)``. Terminal data
    defaults to ``g(T, .)``.
    """

    f: Callable = _zero
    g: Callable = _zero
    terminal: Callable | None = None

    def source(self, grid: Grid, level: int, idx: np.ndarray) -> np.ndarray:
        return _eval(self.f, grid.times[level], grid.points[idx])

    def boundary(self, grid: Grid, level: int, idx: np.ndarray) -> np.ndarray:
        return _eval(self.g, grid.times[level], grid.points[idx])

    def terminal_values(self, grid: Grid, idx: np.ndarray) -> np.ndarray:
        fn = self.terminal if self.terminal is not None else self.g
        return _eval(fn, grid.dom.T, grid.points[idx])


class RecordingProblemData(ProblemData):
    """Logs every data read as ``(kind, level, node indices)``."""

    def __init__(self, f=_zero, g=_zero, terminal=None):
        super().__init__(f, g, terminal)
        self.log: list[tuple[str, int, np.ndarray]] = []

    def source(self, grid, level, idx):
        self.log.append(("f", level, np.array(idx)))
        return super().source(grid, level, idx)

    def boundary(self, grid, level, idx):
        self.log.append(("g", level, np.array(idx)))
        return super().boundary(grid, level, idx)

    def terminal_values(self, grid, idx):
        self.log.append(("terminal", grid.n_levels - 1, np.array(idx)))
        return super().terminal_values(grid, idx)

    def reads_of(self, kind: str, nodes) -> int:
        nodes = np.asarray(nodes)
        return int(sum(np.isin(idx, nodes).sum() for k, _, idx in self.log if k == kind))


# --- assembly --------------------------------------------------------------


@dataclass(frozen=True)
class SolverConfig:
    theta: float = 1.0
    linear_solver: str = "direct"  # or "iterative"
    tol_lin: float = 1e-12
    upwind: bool = True
    require_monotone: bool = True

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")
        if not self.tol_lin > 0:
            raise ValueError("tol_lin must be positive")
        if self.linear_solver not in ("direct", "iterative"):
            raise ValueError(f"unknown linear solver {self.linear_solver!r}")


@dataclass(frozen=True, eq=False)
class SpatialAssembly:
    """Rows of ``-tr(a D^2) - <b, D> + c`` on interior and degenerate nodes; zero rows elsewhere."""

    A: sp.csr_matrix
    active: np.ndarray

    def apply(self, v) -> np.ndarray:
        return self.A @ np.asarray(v, dtype=float)


def assemble_spatial_operator(op: ParabolicOperator, grid: Grid, t: float,
                              terms=("a", "b", "c"), upwind: bool = True) -> SpatialAssembly:
    """Assemble the spatial part of ``L`` at time ``t``.

    Interior rows use central second differences, the sign-split seven-point
    stencil for mixed derivatives and upwind first differences. Degenerate rows
    keep only the first-order and zeroth-order terms, with the upwind
    direction forced to point into the domain; a drift pointing outward raises
    :class:`InflowError`.
    """
    if op.dim != grid.dim:
        raise ValueError("operator and grid dimensions differ")
    active = grid.underline_mask()
    rows_idx = np.flatnonzero(active)
    n, d = grid.n_nodes, grid.dim
    a, b, c = op.coefficients(t, grid.points[rows_idx])
    mi = grid.multi_index[rows_idx]
    interior = grid.node_class[rows_idx] == INTERIOR
    h, strides, shape = grid.h, grid.strides, grid.shape
    R, C, V = [], [], []

    def add(mask, offsets, weights):
        """Add ``weights`` at column ``node + sum(offsets_k * stride_k)`` for rows in ``mask``."""
        sel = mask & (weights != 0)
        if not np.any(sel):
            return
        col = rows_idx[sel].copy()
        for k, o in offsets:
            m = mi[sel, k] + o
            bad = (m < 0) | (m >= shape[k])
            if np.any(bad):
                j = np.flatnonzero(bad)[0]
                node = rows_idx[sel][j]
                raise InflowError(int(node), grid.points[node], k, float(-o * b[sel][j, k]))
            col = col + o * strides[k]
        R.append(rows_idx[sel])
        C.append(col)
        V.append(weights[sel])

    everywhere = np.ones(len(rows_idx), dtype=bool)
    if "a" in terms:
        for k in range(d):
            w = np.where(interior, a[:, k, k], 0.0) / h[k] ** 2
            add(interior, [], 2 * w)
            add(interior, [(k, 1)], -w)
            add(interior, [(k, -1)], -w)
        for k in range(d):
            for l in range(k + 1, d):
                akl = np.where(interior, a[:, k, l], 0.0)
                w = np.abs(akl) / (h[k] * h[l])
                add(interior, [], -2 * w)
                for m, o in ((k, 1), (k, -1), (l, 1), (l, -1)):
                    add(interior, [(m, o)], w)
                pos, neg = interior & (akl > 0), interior & (akl < 0)
                add(pos, [(k, 1), (l, 1)], -w)
                add(pos, [(k, -1), (l, -1)], -w)
                add(neg, [(k, 1), (l, -1)], -w)
                add(neg, [(k, -1), (l, 1)], -w)
    if "b" in terms:
        for k in range(d):
            bk = b[:, k] / h[k]
            central = interior if not upwind else np.zeros_like(interior)
            up = ~central
            fwd, bwd = up & (bk > 0), up & (bk < 0)
            add(fwd, [], bk)
            add(fwd, [(k, 1)], -bk)
            add(bwd, [], -bk)
            add(bwd, [(k, -1)], bk)
            add(central, [(k, 1)], -0.5 * bk)
            add(central, [(k, -1)], 0.5 * bk)
    if "c" in terms:
        add(everywhere, [], c.astype(float))
    if R:
        rr, cc, vv = np.concatenate(R), np.concatenate(C), np.concatenate(V)
    else:
        rr = cc = np.zeros(0, dtype=int)
        vv = np.zeros(0)
    A = sp.coo_matrix((vv, (rr, cc)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    return SpatialAssembly(A=A, active=active)


def verify_discrete_monotonicity(rows, rel_tol: float = 1e-12, grid: Grid | None = None) -> Verdict:
    """M-matrix check: non-positive off-diagonals, positive diagonal, weak row dominance.

    Entirely zero rows (Dirichlet rows of a spatial assembly) are skipped.
    Violations are measured relative to the row's diagonal.
    """
    M = sp.csr_matrix(rows)
    diag = M.diagonal()
    off = M - sp.diags(diag)
    off = sp.csr_matrix(off)
    off_pos = off.maximum(0).max(axis=1).toarray().ravel() if off.nnz else np.zeros(M.shape[0])
    off_abs = np.asarray(abs(off).sum(axis=1)).ravel()
    nonzero = (np.abs(diag) + off_abs) > 0
    scale = np.maximum(np.abs(diag), 1e-300)
    viol = np.zeros(M.shape[0])
    viol = np.maximum(viol, off_pos / scale)
    viol = np.maximum(viol, (off_abs - diag) / scale)
    viol[diag <= 0] = np.inf
    viol[~nonzero] = 0.0
    worst = int(np.argmax(viol)) if len(viol) else 0
    witness = None
    if len(viol) and viol[worst] > rel_tol:
        witness = {"row": worst}
        if grid is not None:
            witness["x"] = grid.points[worst].tolist()
            witness["class"] = CLASS_NAMES[int(grid.node_class[worst])]
    return Verdict(
        property_id="scheme.m_matrix",
        statement="off-diagonals <= 0, diagonal > 0, diagonal >= sum |off-diagonal| per row",
        violation=float(viol[worst]) if len(viol) else 0.0,
        tolerance=rel_tol,
        witness=witness,
        details={"n_rows": int(M.shape[0]), "n_failing": int(np.sum(viol > rel_tol))},
    )


# --- time stepping ---------------------------------------------------------


class TimeStepper:
    """Theta-scheme rows ``(I/dt + theta A) u^n = (I/dt - (1-theta) A) u^{n+1} + f``.

    Dirichlet rows (non-degenerate boundary, corners and any ``pinned`` nodes)
    are identity rows. With time-independent coefficients one factorisation is
    reused for every step.
    """

    def __init__(self, op: ParabolicOperator, grid: Grid, cfg: SolverConfig | None = None,
                 pinned: np.ndarray | None = None):
        self.op, self.grid = op, grid
        self.cfg = cfg or SolverConfig()
        self.pinned = np.zeros(grid.n_nodes, dtype=bool) if pinned is None else np.asarray(pinned, bool)
        self.dirichlet = grid.dirichlet_mask() | self.pinned
        self.free = ~self.dirichlet
        self._assembly: dict = {}
        self._lu: dict = {}
        self.n_factorizations = 0

    def assembly(self, level: int) -> SpatialAssembly:
        key = 0 if self.op.time_independent else level
        if key not in self._assembly:
            asm = assemble_spatial_operator(self.op, self.grid, float(self.grid.times[level]),
                                            upwind=self.cfg.upwind)
            keep = sp.diags(self.free.astype(float))
            self._assembly[key] = SpatialAssembly(A=sp.csr_matrix(keep @ asm.A), active=self.free)
        return self._assembly[key]

    def system(self, level: int) -> sp.csr_matrix:
        A = self.assembly(level).A
        dt = self.grid.dt
        d = np.where(self.free, 1.0 / dt, 1.0)
        return sp.csr_matrix(sp.diags(d) + self.cfg.theta * A)

    def explicit_part(self, level_next: int, u_next: np.ndarray) -> np.ndarray:
        out = u_next / self.grid.dt
        if self.cfg.theta < 1.0:
            out = out - (1.0 - self.cfg.theta) * self.assembly(level_next).apply(u_next)
        return out

    def rhs(self, level: int, u_next, f_n, f_next, dirichlet_vals) -> np.ndarray:
        th = self.cfg.theta
        r = self.explicit_part(level + 1, u_next) + th * f_n + (1.0 - th) * f_next
        r[self.dirichlet] = dirichlet_vals
        return r

    def residual(self, level: int, u_n, u_next, f_n, f_next) -> np.ndarray:
        """Row residual ``M u^n - rhs`` on free nodes, the discrete ``Lu - f``."""
        r = self.system(level) @ u_n - self.rhs(level, u_next, f_n, f_next, 0.0)
        r[self.dirichlet] = 0.0
        return r

    def solve(self, level: int, rhs: np.ndarray, x0=None) -> np.ndarray:
        key = 0 if self.op.time_independent else level
        M = self.system(level)
        if self.cfg.linear_solver == "direct":
            if key not in self._lu:
                self._lu = {key: spla.splu(sp.csc_matrix(M))}
                self.n_factorizations += 1
            x = self._lu[key].solve(rhs)
        else:
            ilu = spla.spilu(sp.csc_matrix(M))
            pre = spla.LinearOperator(M.shape, ilu.solve)
            x, info = spla.bicgstab(M, rhs, x0=x0, rtol=self.cfg.tol_lin, atol=0.0, M=pre, maxiter=1000)
            if info != 0:
                raise RuntimeError(f"iterative linear solve did not converge at level {level} (info={info})")
        if not np.all(np.isfinite(x)):
            raise FloatingPointError(f"non-finite solution at level {level}")
        return x

    def monotonicity(self, level: int = 0) -> Verdict:
        return verify_discrete_monotonicity(self.system(level), grid=self.grid)


def _check_monotone(stepper: TimeStepper) -> Verdict:
    levels = [0] if stepper.op.time_independent else range(stepper.grid.n_levels - 1)
    worst = None
    for n in levels:
        v = stepper.monotonicity(n)
        if worst is None or v.violation > worst.violation:
            worst = v
    if not worst.passed:
        if stepper.cfg.require_monotone:
            raise NonMonotoneError(worst)
        warnings.warn(f"proceeding with a non-monotone system: {worst.line()}", stacklevel=3)
    return worst


def solve_terminal_value_problem(op: ParabolicOperator, grid: Grid, data: ProblemData,
                                 cfg: SolverConfig | None = None,
                                 pinned: tuple[np.ndarray, np.ndarray] | None = None) -> Trajectory:
    """March backward from ``u(T) = terminal`` to ``t = 0``.

    ``g`` is read only at Dirichlet nodes, never at degenerate-boundary nodes.
    ``pinned = (mask, values)`` imposes extra Dirichlet values (shape
    ``(n_levels, n_nodes)``) on the masked nodes below the terminal level.
    """
    cfg = cfg or SolverConfig()
    t0 = time.perf_counter()
    mask = None if pinned is None else np.asarray(pinned[0], dtype=bool)
    stepper = TimeStepper(op, grid, cfg, mask)
    mono = _check_monotone(stepper)
    N, n = grid.n_levels, grid.n_nodes
    u = np.empty((N, n))
    u[N - 1] = data.terminal_values(grid, np.arange(n))
    free_idx = np.flatnonzero(stepper.free)
    g_idx = np.flatnonzero(grid.dirichlet_mask() & ~stepper.pinned)
    dir_idx = np.flatnonzero(stepper.dirichlet)

    def f_full(level):
        out = np.zeros(n)
        out[free_idx] = data.source(grid, level, free_idx)
        return out

    f_next = f_full(N - 1) if cfg.theta < 1.0 else np.zeros(n)
    for level in range(N - 2, -1, -1):
        f_n = f_full(level)
        vals = np.zeros(n)
        vals[g_idx] = data.boundary(grid, level, g_idx)
        if mask is not None:
            vals[mask] = np.asarray(pinned[1])[level][mask]
        rhs = stepper.rhs(level, u[level + 1], f_n, f_next, vals[dir_idx])
        u[level] = stepper.solve(level, rhs, x0=u[level + 1])
        f_next = f_n
    stats = {"monotone": mono.passed, "monotone_violation": mono.violation,
             "n_factorizations": stepper.n_factorizations,
             "runtime": time.perf_counter() - t0}
    return Trajectory(grid, u, stats)


# --- manufactured solutions ------------------------------------------------


@dataclass(frozen=True)
class ManufacturedSolution:
    """Exact ``u`` with its time derivative, gradient ``(n, d)`` and Hessian ``(n, d, d)``."""

    u: Callable
    u_t: Callable
    grad: Callable
    hess: Callable

    def source(self, op: ParabolicOperator) -> Callable:
        def f(t, x):
            a, b, c = op.coefficients(t, x)
            return (-self.u_t(t, x) - np.einsum("nij,nij->n", a, self.hess(t, x))
                    - np.einsum("ni,ni->n", b, self.grad(t, x)) + c * self.u(t, x))
        return f

    def data(self, op: ParabolicOperator) -> ProblemData:
        return ProblemData(f=self.source(op), g=self.u, terminal=self.u)


@dataclass
class ConvergenceStudy:
    steps: list
    errors: list
    orders: list
    monotone_errors: bool

    @property
    def observed_order(self) -> float:
        return float(self.orders[-1]) if self.orders else float("nan")


def manufactured_convergence(op: ParabolicOperator, dom: DomainSpec, partition, solution: ManufacturedSolution,
                             ladder, vary: str = "space", cfg: SolverConfig | None = None) -> ConvergenceStudy:
    """Sup-norm errors over a ladder of ``(shape, n_levels)`` resolutions and observed orders.

    ``vary`` selects the step used in the order estimate: the largest spacing
    (``"space"``) or the time step (``"time"``). A non-decreasing error
    sequence is reported through ``monotone_errors`` rather than raised.
    """
    data = solution.data(op)
    steps, errors = [], []
    for shape, n_levels in ladder:
        grid = build_grid(dom, partition, shape, n_levels)
        traj = solve_terminal_value_problem(op, grid, data, cfg)
        exact = np.stack([solution.u(t, grid.points) for t in grid.times])
        errors.append(float(np.max(np.abs(traj.values - exact))))
        steps.append(max(grid.h) if vary == "space" else grid.dt)
    orders = []
    for k in range(len(errors) - 1):
        if errors[k + 1] > 0 and errors[k] > 0:
            orders.append(float(np.log(errors[k] / errors[k + 1]) / np.log(steps[k] / steps[k + 1])))
        else:
            orders.append(float("nan"))
    mono = all(e2 < e1 for e1, e2 in zip(errors, errors[1:]))
    return ConvergenceStudy(steps, errors, orders, mono)


def truncation_sensitivity(op: ParabolicOperator, small: DomainSpec, large: DomainSpec, partition_small,
                           partition_large, data: ProblemData, h, n_levels: int,
                           cfg: SolverConfig | None = None) -> dict:
    """Solve on two truncations with equal spacing and compare on the inner half of the smaller box."""
    from scipy.interpolate import RegularGridInterpolator

    def shape_for(dom):
        return tuple(int(round((hi - lo) / hk)) + 1 for (lo, hi), hk in zip(dom.box, h))

    g1 = build_grid(small, partition_small, shape_for(small), n_levels)
    g2 = build_grid(large, partition_large, shape_for(large), n_levels)
    u1 = solve_terminal_value_problem(op, g1, data, cfg)
    u2 = solve_terminal_value_problem(op, g2, data, cfg)
    interp = RegularGridInterpolator(g2.axes, u2.values[0].reshape(g2.shape))
    inner = np.ones(g1.n_nodes, dtype=bool)
    for k, (lo, hi) in enumerate(small.box):
        q = 0.25 * (hi - lo)
        inner &= (g1.points[:, k] >= lo + q - 1e-12) & (g1.points[:, k] <= hi - q + 1e-12)
    diff = np.abs(u1.values[0][inner] - interp(g1.points[inner]))
    return {"max_diff_inner_half": float(diff.max()), "n_compared": int(inner.sum())}
