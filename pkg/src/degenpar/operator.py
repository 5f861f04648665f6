"""Linear parabolic operators ``Lu = -u_t - tr(a D^2 u) - <b, Du> + c u``.

Coefficient fields are vectorised callables of ``(t, x)`` where ``x`` has
shape ``(n, d)``:

* ``a(t, x) -> (n, d, d)`` symmetric positive semi-definite,
* ``b(t, x) -> (n, d)``,
* ``c(t, x) -> (n,)``,
* optionally ``da(t, x) -> (n, d, d, d)`` with ``da[..., k, j, m] = d a^{kj} / d x_m``.

``t`` may be a scalar or an array broadcastable against ``x[:, 0]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .verdict import Verdict

SYM_TOL = 1e-12
PSD_TOL = -1e-10


class CoefficientError(ValueError):
    """Raised when a coefficient evaluation is malformed or non-finite."""


@dataclass(frozen=True)
class SpaceTimePoint:
    t: float
    x: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in np.atleast_1d(self.x)))
        if len(self.x) < 1:
            raise ValueError("a space-time point needs at least one spatial coordinate")
        if not (np.isfinite(self.t) and np.all(np.isfinite(self.x))):
            raise ValueError(f"non-finite coordinates in {self}")

    @property
    def dim(self) -> int:
        return len(self.x)


@dataclass(frozen=True)
class CoefficientTriple:
    a_val: np.ndarray
    b_val: np.ndarray
    c_val: float


@dataclass(frozen=True)
class ParabolicOperator:
    dim: int
    a: Callable
    b: Callable
    c: Callable
    da: Callable | None = None
    deriv_step: float = 1e-5
    name: str = "custom"
    time_independent: bool = False
    params: dict = field(default_factory=dict, compare=False)

    def coefficients(self, t, x) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Evaluate ``(a, b, c)`` at the rows of ``x`` with shape checks."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.dim:
            raise CoefficientError(f"expected points of dimension {self.dim}, got {x.shape[1]}")
        n, d = x.shape
        a = np.broadcast_to(np.asarray(self.a(t, x), dtype=float), (n, d, d))
        b = np.broadcast_to(np.asarray(self.b(t, x), dtype=float), (n, d))
        c = np.broadcast_to(np.asarray(self.c(t, x), dtype=float), (n,))
        for label, arr in (("a", a), ("b", b), ("c", c)):
            if not np.all(np.isfinite(arr)):
                bad = np.argwhere(~np.isfinite(arr.reshape(n, -1)))[0, 0]
                raise CoefficientError(f"non-finite coefficient {label} at x={x[bad]}, t={t}")
        asym = np.max(np.abs(a - np.swapaxes(a, 1, 2))) if n else 0.0
        if asym > SYM_TOL:
            raise CoefficientError(f"a is not symmetric (max asymmetry {asym:.3e})")
        if n:
            lam = least_eigenvalue_matrix(a)
            worst = int(np.argmin(lam))
            if lam[worst] < PSD_TOL:
                raise CoefficientError(
                    f"a is not positive semi-definite at x={x[worst]}, t={t}: "
                    f"least eigenvalue {lam[worst]:.3e}"
                )
        return a, b, c

    def a_derivatives(self, t, x) -> np.ndarray:
        """Spatial partials of ``a`` as ``(n, d, d, d)``; central differences if no analytic form."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n, d = x.shape
        if self.da is not None:
            return np.broadcast_to(np.asarray(self.da(t, x), dtype=float), (n, d, d, d))
        h = self.deriv_step
        out = np.empty((n, d, d, d))
        for m in range(d):
            step = np.zeros(d)
            step[m] = h
            out[..., m] = (self.a(t, x + step) - self.a(t, x - step)) / (2 * h)
        return out

    def a_divergence(self, t, x) -> np.ndarray:
        """Row divergence ``sum_j d a^{kj} / d x_j`` as ``(n, d)``."""
        da = self.a_derivatives(t, x)
        return np.einsum("nkjj->nk", da)


def _as_array(x, dim):
    x = np.asarray(x, dtype=float)
    return x.reshape(-1, dim)


def eval_coefficients(op: ParabolicOperator, p: SpaceTimePoint) -> CoefficientTriple:
    if p.dim != op.dim:
        raise CoefficientError(f"point has dimension {p.dim}, operator has {op.dim}")
    a, b, c = op.coefficients(p.t, np.array([p.x]))
    return CoefficientTriple(a_val=np.array(a[0]), b_val=np.array(b[0]), c_val=float(c[0]))


def least_eigenvalue_matrix(a: np.ndarray) -> np.ndarray:
    """Smallest eigenvalue of each symmetric matrix in a ``(..., d, d)`` stack."""
    a = np.asarray(a, dtype=float)
    d = a.shape[-1]
    if np.max(np.abs(a - np.swapaxes(a, -1, -2)), initial=0.0) > SYM_TOL:
        raise CoefficientError("least eigenvalue requested for a non-symmetric matrix")
    if d == 1:
        return a[..., 0, 0].copy()
    if d == 2:
        mean = 0.5 * (a[..., 0, 0] + a[..., 1, 1])
        half_diff = 0.5 * (a[..., 0, 0] - a[..., 1, 1])
        return mean - np.hypot(half_diff, a[..., 0, 1])
    return np.linalg.eigvalsh(a)[..., 0]


def least_eigenvalue(op: ParabolicOperator, p: SpaceTimePoint) -> float:
    return float(least_eigenvalue_matrix(eval_coefficients(op, p).a_val))


def check_quadratic_growth(op: ParabolicOperator, samples, K: float) -> Verdict:
    """Check ``tr a + <b, x> <= K (1 + |x|^2)`` on the sample points.

    ``samples`` is a list of :class:`SpaceTimePoint` or an ``(n, 1 + d)`` array
    of ``(t, x)`` rows. The verdict reports the worst ratio and where it occurs.
    """
    if isinstance(samples, np.ndarray):
        arr = np.atleast_2d(samples)
        ts, xs = arr[:, 0], arr[:, 1:]
    else:
        if not samples:
            raise ValueError("no samples given")
        ts = np.array([p.t for p in samples])
        xs = np.array([p.x for p in samples])
    if len(ts) == 0:
        raise ValueError("no samples given")
    a, b, _ = op.coefficients(ts, xs)
    growth = np.trace(a, axis1=1, axis2=2) + np.einsum("nk,nk->n", b, xs)
    ratio = growth / (1.0 + np.sum(xs**2, axis=1))
    worst = int(np.argmax(ratio))
    return Verdict(
        property_id="coefficients.quadratic_growth",
        statement=f"tr a + <b,x> <= K(1+|x|^2) with K={K:g}",
        violation=max(float(ratio[worst]) - K, 0.0),
        tolerance=0.0,
        witness={"t": float(ts[worst]), "x": xs[worst].tolist()},
        details={"worst_ratio": float(ratio[worst])},
    )


def conjugate_apply(op: ParabolicOperator, phi, v, applier: Callable[[np.ndarray], np.ndarray]):
    """Apply the conjugated operator ``v -> phi * L(v / phi)`` on a grid.

    ``applier`` is a discrete realisation of ``L`` acting on nodal values
    (for example :meth:`degenpar.fd.SpatialAssembly.apply`). Algebraically this
    equals ``(L + N) v`` with ``N v = -[L, phi](v / phi)``.
    """
    phi = np.asarray(phi, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(~(phi > 0)):
        bad = np.flatnonzero(~(phi.ravel() > 0))[0]
        raise ValueError(f"conjugating weight must be positive; node {bad} has {phi.ravel()[bad]}")
    return phi * applier(v / phi)


# --- builtins --------------------------------------------------------------


@dataclass(frozen=True)
class HestonParams:
    sigma: float
    rho: float
    kappa: float
    theta: float
    r: float = 0.0
    q: float = 0.0

    def __post_init__(self):
        if self.sigma == 0 or not np.isfinite(self.sigma):
            raise ValueError("Heston vol-of-vol sigma must be non-zero")
        if not -1.0 < self.rho < 1.0:
            raise ValueError(f"Heston correlation must lie in (-1, 1), got {self.rho}")
        if not self.kappa > 0:
            raise ValueError(f"Heston mean reversion kappa must be positive, got {self.kappa}")
        if not self.theta > 0:
            raise ValueError(f"Heston long-run variance theta must be positive, got {self.theta}")

    @property
    def beta(self) -> float:
        return 2.0 * self.kappa * self.theta / self.sigma**2


def make_heston(params: HestonParams) -> ParabolicOperator:
    """Heston generator in log-price ``x1`` and variance ``x2``."""
    p = params
    shape = np.array([[1.0, p.rho * p.sigma], [p.rho * p.sigma, p.sigma**2]])

    def a(t, x):
        return 0.5 * x[:, 1, None, None] * shape

    def b(t, x):
        return np.stack([p.r - p.q - 0.5 * x[:, 1], p.kappa * (p.theta - x[:, 1])], axis=1)

    def c(t, x):
        return np.full(x.shape[0], float(p.r))

    def da(t, x):
        out = np.zeros((x.shape[0], 2, 2, 2))
        out[..., 1] = 0.5 * shape
        return out

    return ParabolicOperator(
        dim=2, a=a, b=b, c=c, da=da, name="heston", time_independent=True,
        params={"sigma": p.sigma, "rho": p.rho, "kappa": p.kappa,
                "theta": p.theta, "r": p.r, "q": p.q},
    )


def make_constant(a, b, c, name="constant") -> ParabolicOperator:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    d = a.shape[0]

    return ParabolicOperator(
        dim=d,
        a=lambda t, x: np.broadcast_to(a, (x.shape[0], d, d)),
        b=lambda t, x: np.broadcast_to(b, (x.shape[0], d)),
        c=lambda t, x: np.full(x.shape[0], float(c)),
        da=lambda t, x: np.zeros((x.shape[0], d, d, d)),
        name=name,
        time_independent=True,
    )


def identity_laplacian(dim: int = 2) -> ParabolicOperator:
    return make_constant(np.eye(dim), np.zeros(dim), 0.0, name="identity-laplacian")


BUILTIN_DESCRIPTIONS = {
    "heston": (
        "Heston generator, d = 2, x1 = log-price, x2 = variance >= 0\n"
        "  Lv = -v_t - (x2/2)(v_11 + 2 rho sigma v_12 + sigma^2 v_22)\n"
        "       - (r - q - x2/2) v_1 - kappa (theta - x2) v_2 + r v\n"
        "  a(t,x) = (x2/2) [[1, rho*sigma], [rho*sigma, sigma^2]]\n"
        "  b(t,x) = (r - q - x2/2, kappa*(theta - x2))\n"
        "  c(t,x) = r\n"
        "  parameters: sigma != 0, -1 < rho < 1, kappa > 0, theta > 0, r, q\n"
        "  a vanishes on {x2 = 0}; there b . e2 = kappa*theta > 0 (inflow)\n"
        "  beta = 2 kappa theta / sigma^2 decides the sign of the Fichera function on {x2 = 0}"
    ),
    "identity-laplacian": (
        "Backward heat operator Lv = -v_t - Laplacian(v)\n"
        "  a = I, b = 0, c = 0 (uniformly parabolic, no degenerate boundary)"
    ),
}


def describe(name: str) -> str:
    try:
        return BUILTIN_DESCRIPTIONS[name]
    except KeyError:
        raise KeyError(f"unknown builtin operator {name!r}; known: {sorted(BUILTIN_DESCRIPTIONS)}") from None
