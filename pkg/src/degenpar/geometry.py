"""Space-time cylinders over boxes: parabolic boundary, degeneracy labels, normals, reachability."""

from __future__ import annotations

import csv
import io
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .operator import ParabolicOperator

DEG = "DEG"
NONDEG = "NONDEG"
TRUNCATION = "TRUNCATION"

ON_FACE_TOL = 1e-12


class AmbiguousFaceError(ValueError):
    """A flat face on which the diffusion vanishes at some sampled points but not others."""

    def __init__(self, face: str, n_degenerate: int, n_total: int):
        self.face = face
        super().__init__(
            f"face {face!r} is partially degenerate ({n_degenerate}/{n_total} sampled points "
            "have vanishing diffusion); refusing to guess a label"
        )


def face_name(axis: int, side: str) -> str:
    return f"x{axis + 1}={side}"


def parse_face_name(name: str) -> tuple[int, str]:
    lhs, side = name.split("=")
    if not lhs.startswith("x") or side not in ("lo", "hi"):
        raise ValueError(f"bad face label {name!r}")
    return int(lhs[1:]) - 1, side


@dataclass(frozen=True)
class DomainSpec:
    """Cylinder ``(0, T) x O`` with ``O`` a box or a finite union of boxes.

    ``box`` is the bounding box; ``components`` (optional) lists sub-boxes whose
    union is ``O``. ``truncated_faces`` names box faces that are artificial
    far-field cuts of an unbounded model domain.
    """

    T: float
    box: tuple[tuple[float, float], ...]
    truncated_faces: frozenset[str] = frozenset()
    components: tuple[tuple[tuple[float, float], ...], ...] | None = None

    def __post_init__(self):
        box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "truncated_faces", frozenset(self.truncated_faces))
        if not self.T > 0:
            raise ValueError(f"terminal time must be positive, got {self.T}")
        if not box:
            raise ValueError("domain needs at least one spatial axis")
        for k, (lo, hi) in enumerate(box):
            if not lo < hi:
                raise ValueError(f"degenerate box along x{k + 1}: ({lo}, {hi})")
        names = {face_name(k, s) for k in range(len(box)) for s in ("lo", "hi")}
        unknown = self.truncated_faces - names
        if unknown:
            raise ValueError(f"unknown truncated faces {sorted(unknown)}")
        if self.components is not None:
            comps = tuple(tuple((float(lo), float(hi)) for lo, hi in c) for c in self.components)
            for c in comps:
                if len(c) != len(box):
                    raise ValueError("component dimension does not match the bounding box")
                for (lo, hi), (blo, bhi) in zip(c, box):
                    if not (blo <= lo < hi <= bhi):
                        raise ValueError(f"component {c} is not a non-degenerate sub-box of {box}")
            object.__setattr__(self, "components", comps)

    @property
    def dim(self) -> int:
        return len(self.box)

    @property
    def is_box(self) -> bool:
        return self.components is None or len(self.components) == 1 and self.components[0] == self.box

    def face_names(self) -> list[str]:
        return [face_name(k, s) for k in range(self.dim) for s in ("lo", "hi")]


@dataclass(frozen=True)
class BoundaryFace:
    kind: str  # "top", "side" or "corner"
    name: str
    axis: int | None = None
    side: str | None = None
    normal: tuple[float, tuple[float, ...]] | None = None
    labels: frozenset[str] = frozenset()

    def geometry(self, dom: DomainSpec) -> str:
        if self.kind == "top":
            return f"t={dom.T:g}; x in {list(dom.box)}"
        fixed = dom.box[self.axis][0 if self.side == "lo" else 1]
        span = "t in (0,{:g})".format(dom.T) if self.kind == "side" else f"t={dom.T:g}"
        return f"{span}; x{self.axis + 1}={fixed:g}"

    def with_labels(self, labels) -> "BoundaryFace":
        return BoundaryFace(self.kind, self.name, self.axis, self.side, self.normal, frozenset(labels))


@dataclass(frozen=True)
class BoundaryPartition:
    faces: tuple[BoundaryFace, ...]
    deg: frozenset[str]
    nondeg: frozenset[str]
    ambiguous: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.deg & self.nondeg:
            raise ValueError(f"faces labelled both DEG and NONDEG: {sorted(self.deg & self.nondeg)}")

    def face(self, name: str) -> BoundaryFace:
        for f in self.faces:
            if f.name == name:
                return f
        raise KeyError(name)

    def to_csv(self, dom: DomainSpec) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["face_id", "kind", "label", "geometry", "normal"])
        for f in self.faces:
            if f.name in self.deg:
                label = DEG
            elif f.name in self.nondeg:
                label = NONDEG
            else:
                label = "closure"
            if TRUNCATION in f.labels:
                label += "+" + TRUNCATION
            normal = "" if f.normal is None else " ".join(
                f"{v:g}" for v in (f.normal[0], *f.normal[1])
            )
            w.writerow([f.name, f.kind, label, f.geometry(dom), normal])
        return buf.getvalue()


def _side_normal(dim: int, axis: int, side: str) -> tuple[float, tuple[float, ...]]:
    n = [0.0] * dim
    n[axis] = 1.0 if side == "lo" else -1.0
    return 0.0, tuple(n)


def parabolic_boundary(dom: DomainSpec) -> list[BoundaryFace]:
    """Top ``{T} x O``, sides ``(0,T) x dO`` per box face, and corners ``{T} x dO``.

    The initial slice ``{0} x O`` is not part of the parabolic boundary of a
    terminal-value problem.
    """
    if not dom.is_box:
        raise NotImplementedError("boundary faces are only enumerated for single-box domains")
    d = dom.dim
    top = BoundaryFace("top", "top", normal=(-1.0, (0.0,) * d))
    sides, corners = [], []
    for k in range(d):
        for s in ("lo", "hi"):
            name = face_name(k, s)
            labels = {TRUNCATION} if name in dom.truncated_faces else set()
            sides.append(BoundaryFace("side", name, k, s, _side_normal(d, k, s), frozenset(labels)))
            corners.append(BoundaryFace("corner", f"corner:{name}", k, s, None))
    return [top, *sides, *corners]


def _face_samples(dom: DomainSpec, axis: int, side: str, n_tangential: int, n_time: int):
    """Interior sample points of a side face, edges excluded."""
    fixed = dom.box[axis][0 if side == "lo" else 1]
    grids = []
    for k, (lo, hi) in enumerate(dom.box):
        if k == axis:
            grids.append(np.array([fixed]))
        else:
            grids.append(np.linspace(lo, hi, n_tangential + 2)[1:-1])
    mesh = np.stack(np.meshgrid(*grids, indexing="ij"), axis=-1).reshape(-1, dom.dim)
    times = np.linspace(0.0, dom.T, n_time + 2)[1:-1]
    ts = np.repeat(times, len(mesh))
    xs = np.tile(mesh, (len(times), 1))
    return ts, xs


def degenerate_limit(op: ParabolicOperator, dom: DomainSpec, axis: int, side: str, ts, xs,
                     probe_offsets) -> np.ndarray:
    """Estimate ``lim ||a||`` approaching the face from inside, per sample point.

    Frobenius norms at decreasing inward offsets are extrapolated linearly to
    offset zero from the two smallest probes; when ``a`` can be evaluated on the
    face itself the smaller of the two estimates is used.
    """
    _, n_vec = _side_normal(dom.dim, axis, side)
    inward = np.asarray(n_vec)
    offsets = np.sort(np.asarray(probe_offsets, dtype=float))[::-1]
    if len(offsets) < 2 or offsets[-1] <= 0:
        raise ValueError("need at least two positive probe offsets")
    norms = []
    for delta in offsets:
        a, _, _ = op.coefficients(ts, xs + delta * inward)
        norms.append(np.linalg.norm(a, axis=(1, 2)))
    d1, d2 = offsets[-2], offsets[-1]
    v1, v2 = norms[-2], norms[-1]
    extrap = np.abs(v2 - d2 * (v1 - v2) / (d1 - d2))
    try:
        a_face, _, _ = op.coefficients(ts, xs)
        on_face = np.linalg.norm(a_face, axis=(1, 2))
        extrap = np.minimum(extrap, on_face)
    except (ValueError, FloatingPointError):
        pass
    return extrap


def classify_degenerate_boundary(
    op: ParabolicOperator,
    dom: DomainSpec,
    eps_a: float = 1e-10,
    probe_offsets=None,
    n_tangential: int = 7,
    n_time: int = 5,
    strict: bool = True,
) -> BoundaryPartition:
    """Split the parabolic boundary into degenerate (DEG) and non-degenerate (NONDEG) faces.

    A side face is DEG when the inward limit of the diffusion matrix vanishes
    (within ``eps_a``) at every sampled face point. The top always has a
    non-zero time normal and is NONDEG; truncation faces are forced NONDEG.
    Mixed faces raise :class:`AmbiguousFaceError` when ``strict``; otherwise they
    are labelled NONDEG (Dirichlet data required) and listed in ``ambiguous``.
    """
    if eps_a <= 0:
        raise ValueError("eps_a must be positive")
    if op.dim != dom.dim:
        raise ValueError(f"operator dimension {op.dim} does not match domain dimension {dom.dim}")
    faces = parabolic_boundary(dom)
    deg, nondeg, ambiguous = set(), {"top"}, set()
    labelled = []
    for f in faces:
        if f.kind == "top":
            labelled.append(f.with_labels({NONDEG}))
            continue
        if f.kind == "corner":
            labelled.append(f)
            continue
        if TRUNCATION in f.labels:
            nondeg.add(f.name)
            labelled.append(f.with_labels({NONDEG, TRUNCATION}))
            continue
        offsets = probe_offsets
        if offsets is None:
            lo, hi = dom.box[f.axis]
            offsets = (hi - lo) * np.array([1e-2, 1e-3, 1e-4])
        ts, xs = _face_samples(dom, f.axis, f.side, n_tangential, n_time)
        limit = degenerate_limit(op, dom, f.axis, f.side, ts, xs, offsets)
        vanish = limit <= eps_a
        if vanish.all():
            deg.add(f.name)
            labelled.append(f.with_labels({DEG}))
        elif not vanish.any():
            nondeg.add(f.name)
            labelled.append(f.with_labels({NONDEG}))
        else:
            if strict:
                raise AmbiguousFaceError(f.name, int(vanish.sum()), vanish.size)
            ambiguous.add(f.name)
            nondeg.add(f.name)
            labelled.append(f.with_labels({NONDEG}))
    return BoundaryPartition(tuple(labelled), frozenset(deg), frozenset(nondeg), frozenset(ambiguous))


def inward_normal(face: BoundaryFace, p, dom: DomainSpec) -> tuple[float, tuple[float, ...]]:
    """Inward unit normal ``(n0, n_vec)`` of ``face`` at the point ``p = (t, x)``."""
    if face.kind == "corner" or face.normal is None:
        raise ValueError(f"normal undefined on corner {face.name!r}")
    t, x = p
    x = np.atleast_1d(np.asarray(x, dtype=float))
    inside_t = -ON_FACE_TOL <= t <= dom.T + ON_FACE_TOL
    inside_x = all(lo - ON_FACE_TOL <= xi <= hi + ON_FACE_TOL for xi, (lo, hi) in zip(x, dom.box))
    if face.kind == "top":
        on = abs(t - dom.T) <= ON_FACE_TOL and inside_x
    else:
        fixed = dom.box[face.axis][0 if face.side == "lo" else 1]
        on = abs(x[face.axis] - fixed) <= ON_FACE_TOL and inside_t and inside_x
    if not on:
        raise ValueError(f"point {p} does not lie on face {face.name!r}")
    return face.normal


def reachable_set(dom: DomainSpec, grid, P0) -> tuple[np.ndarray, np.ndarray]:
    """Discrete ``S(P0)`` and ``C(P0)`` for the grid node ``P0 = (level, node)``.

    Graph search over grid nodes of the interior plus the degenerate boundary,
    with edges between spatial neighbours on one time level and from each node
    to the same spatial node one level later. Curves along which time does not
    increase from ``P`` to ``P0`` start at ``t >= t0``, so ``S(P0)`` lives on
    levels ``level .. N-1`` (the terminal level belongs to the Dirichlet
    boundary). ``C(P0)`` is the connected component of ``P0``'s own slice.

    Returns boolean masks of shape ``(n_levels, n_nodes)``.
    """
    level, node = (int(v) for v in P0)
    if grid.dom != dom:
        raise ValueError("grid was built for a different domain")
    active = grid.underline_mask()
    n_levels = len(grid.times)
    top = n_levels - 1
    if not 0 <= level < top:
        raise ValueError(f"P0 must sit strictly below the terminal level; got level {level}")
    if not active[node]:
        raise ValueError(f"P0 node {node} is not in the interior or degenerate boundary")
    nbrs = grid.neighbours()
    seen = np.zeros((n_levels, grid.n_nodes), dtype=bool)
    seen[level, node] = True
    queue = deque([(level, node)])
    while queue:
        n, i = queue.popleft()
        cand = [(n, j) for j in nbrs[i] if active[j]]
        if n + 1 < top:
            cand.append((n + 1, i))
        for m, j in cand:
            if not seen[m, j]:
                seen[m, j] = True
                queue.append((m, j))
    slice_mask = np.zeros_like(seen)
    stack = [node]
    slice_mask[level, node] = True
    while stack:
        i = stack.pop()
        for j in nbrs[i]:
            if active[j] and not slice_mask[level, j]:
                slice_mask[level, j] = True
                stack.append(j)
    return seen, slice_mask
