"""Fichera function and the Sigma-partition of the full boundary of a space-time box.

Here ``t = x0`` is treated as one more coordinate of a degenerate-elliptic
operator, so the initial slice ``{0} x O`` (labelled ``bottom``) is part of the
boundary alongside the top and the sides.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .geometry import DomainSpec, face_name
from .operator import HestonParams, ParabolicOperator, make_heston

SIGMA0, SIGMA1, SIGMA2, SIGMA3 = "Sigma0", "Sigma1", "Sigma2", "Sigma3"
EPS_CHAR = 1e-10
EPS_FB = 1e-9


class AmbiguousSigmaError(ValueError):
    def __init__(self, face: str, classes: dict):
        self.face = face
        self.classes = classes
        super().__init__(f"face {face!r} has mixed Sigma classes {classes}")


@dataclass(frozen=True)
class FicheraSample:
    point: tuple[float, tuple[float, ...]]
    fb: float
    sigma_class: str
    face: str = ""


def _check_unit(normal) -> tuple[float, np.ndarray]:
    n0, nvec = normal
    nvec = np.atleast_1d(np.asarray(nvec, dtype=float))
    norm = np.hypot(float(n0), np.linalg.norm(nvec))
    if abs(norm - 1.0) > 1e-12:
        raise ValueError(f"normal must be a unit vector, got norm {norm}")
    return float(n0), nvec


def fichera_values(op: ParabolicOperator, ts, xs, normal) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised ``(fb, a n.n)`` at the rows ``(ts, xs)`` for one normal."""
    n0, nvec = _check_unit(normal)
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    a, b, _ = op.coefficients(ts, xs)
    div = op.a_divergence(ts, xs)
    if not np.all(np.isfinite(div)):
        raise FloatingPointError("derivative of a is not finite at a boundary sample")
    fb = n0 + (b - div) @ nvec
    ann = np.einsum("nij,i,j->n", a, nvec, nvec)
    return fb, ann


def fichera_function(op: ParabolicOperator, dom: DomainSpec, p, normal) -> float:
    """``fb(p) = n0 + sum_k (b^k - sum_j d_j a^{kj}) n_k`` with ``normal = (n0, n_vec)`` inward."""
    t, x = p if not hasattr(p, "t") else (p.t, p.x)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape[0] != dom.dim:
        raise ValueError("point dimension does not match the domain")
    fb, _ = fichera_values(op, float(t), x[None, :], normal)
    return float(fb[0])


def classify_sample(fb: float, ann: float, eps_char: float = EPS_CHAR, eps_fb: float = EPS_FB) -> str:
    if ann > eps_char:
        return SIGMA3
    if fb > eps_fb:
        return SIGMA1
    if fb < -eps_fb:
        return SIGMA2
    return SIGMA0


def fichera_faces(dom: DomainSpec):
    """``(name, normal, sampler)`` for bottom, top and the side faces of the box cylinder."""
    d = dom.dim
    out = []

    def slice_sampler(t_fixed):
        def sample(n_space, n_time):
            grids = [np.linspace(lo, hi, n_space + 2)[1:-1] for lo, hi in dom.box]
            xs = np.stack(np.meshgrid(*grids, indexing="ij"), axis=-1).reshape(-1, d)
            return np.full(len(xs), t_fixed), xs
        return sample

    out.append(("bottom", (1.0, (0.0,) * d), slice_sampler(0.0)))
    out.append(("top", (-1.0, (0.0,) * d), slice_sampler(dom.T)))
    for k in range(d):
        for side in ("lo", "hi"):
            nvec = [0.0] * d
            nvec[k] = 1.0 if side == "lo" else -1.0

            def sample(n_space, n_time, k=k, side=side):
                fixed = dom.box[k][0 if side == "lo" else 1]
                grids = [np.array([fixed]) if j == k else np.linspace(lo, hi, n_space + 2)[1:-1]
                         for j, (lo, hi) in enumerate(dom.box)]
                xs = np.stack(np.meshgrid(*grids, indexing="ij"), axis=-1).reshape(-1, d)
                times = np.linspace(0.0, dom.T, n_time + 2)[1:-1]
                return np.repeat(times, len(xs)), np.tile(xs, (len(times), 1))

            out.append((face_name(k, side), (0.0, tuple(nvec)), sample))
    return out


@dataclass(frozen=True)
class SigmaPartition:
    face_class: dict  # face name -> Sigma class
    fb_range: dict  # face name -> (min fb, max fb)
    samples: tuple = ()

    def faces_in(self, *classes) -> frozenset:
        return frozenset(f for f, c in self.face_class.items() if c in classes)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["face_id", "sigma_class", "fb_min", "fb_max"])
        for face, cls in self.face_class.items():
            lo, hi = self.fb_range[face]
            w.writerow([face, cls, f"{lo:.12g}", f"{hi:.12g}"])
        return buf.getvalue()


def sigma_partition(
    op: ParabolicOperator,
    dom: DomainSpec,
    eps_char: float = EPS_CHAR,
    eps_fb: float = EPS_FB,
    n_space: int = 5,
    n_time: int = 4,
    keep_samples: bool = False,
) -> SigmaPartition:
    """Assign every face of the space-time box to one of Sigma0..Sigma3.

    Each face is sampled at interior points; a face with mixed sample classes
    raises :class:`AmbiguousSigmaError`.
    """
    if eps_char <= 0 or eps_fb <= 0:
        raise ValueError("tolerances must be positive")
    face_class, fb_range, kept = {}, {}, []
    for name, normal, sampler in fichera_faces(dom):
        ts, xs = sampler(n_space, n_time)
        fb, ann = fichera_values(op, ts, xs, normal)
        classes = [classify_sample(f, a, eps_char, eps_fb) for f, a in zip(fb, ann)]
        counts = {c: classes.count(c) for c in sorted(set(classes))}
        if len(counts) != 1:
            raise AmbiguousSigmaError(name, counts)
        face_class[name] = classes[0]
        fb_range[name] = (float(fb.min()), float(fb.max()))
        if keep_samples:
            kept.extend(
                FicheraSample((float(t), tuple(map(float, x))), float(f), c, name)
                for t, x, f, c in zip(ts, xs, fb, classes)
            )
    return SigmaPartition(face_class, fb_range, tuple(kept))


def fichera_dirichlet_locus(partition: SigmaPartition) -> frozenset:
    """Faces where the classical Fichera theory prescribes data: Sigma2 union Sigma3."""
    return partition.faces_in(SIGMA2, SIGMA3)


DEFAULT_HESTON_DOMAIN = DomainSpec(T=1.0, box=((-1.0, 1.0), (0.0, 1.0)))


@dataclass(frozen=True)
class BetaReport:
    beta: float
    fb_floor: float
    fb_floor_numeric: float
    partition: SigmaPartition
    dirichlet_locus_fichera: frozenset
    dirichlet_locus_ventcel: frozenset

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    @property
    def loci_agree(self) -> bool:
        return self.dirichlet_locus_fichera == self.dirichlet_locus_ventcel

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["face_id", "sigma_class", "fichera_data", "partial_dirichlet_data"])
        for face, cls in self.partition.face_class.items():
            w.writerow([face, cls, int(face in self.dirichlet_locus_fichera),
                        int(face in self.dirichlet_locus_ventcel)])
        return buf.getvalue()

    def to_text(self) -> str:
        lines = [
            f"beta = 2 kappa theta / sigma^2 = {self.beta:.12g}",
            f"fb on x2=0: sigma^2 (beta - 1) / 2 = {self.fb_floor:.12g} (computed {self.fb_floor_numeric:.12g})",
            f"{'face':<10} {'class':<8} {'Fichera data':<14} {'partial Dirichlet data':<22}",
        ]
        for face, cls in self.partition.face_class.items():
            fich = "yes" if face in self.dirichlet_locus_fichera else "no"
            ours = "yes" if face in self.dirichlet_locus_ventcel else "no"
            lines.append(f"{face:<10} {cls:<8} {fich:<14} {ours:<22}")
        verdict = "agree" if self.loci_agree else "DIFFER (data on x2=0 is demanded only by the Fichera prescription)"
        lines.append(f"data loci {verdict}")
        return "\n".join(lines) + "\n"


def heston_beta(params: HestonParams, dom: DomainSpec | None = None) -> BetaReport:
    """Compare the Fichera data locus with the partial-Dirichlet locus for a Heston operator.

    The partial-Dirichlet locus is the non-degenerate boundary: top plus every
    side except ``x2 = 0``.
    """
    dom = dom or DEFAULT_HESTON_DOMAIN
    op = make_heston(params)
    part = sigma_partition(op, dom)
    floor = 0.5 * params.sigma**2 * (params.beta - 1.0)
    lo, hi = part.fb_range["x2=lo"]
    ventcel = frozenset({"top"} | {f for f in dom.face_names() if f != "x2=lo"})
    return BetaReport(
        beta=params.beta,
        fb_floor=floor,
        fb_floor_numeric=0.5 * (lo + hi),
        partition=part,
        dirichlet_locus_fichera=fichera_dirichlet_locus(part),
        dirichlet_locus_ventcel=ventcel,
    )
