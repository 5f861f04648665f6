import numpy as np
import pytest

from degenpar.fd import build_grid
from degenpar.geometry import (DEG, NONDEG, TRUNCATION, AmbiguousFaceError, DomainSpec,
                               classify_degenerate_boundary, face_name, inward_normal, parabolic_boundary,
                               parse_face_name, reachable_set)
from degenpar.harness import degenerate_1d
from degenpar.operator import HestonParams, ParabolicOperator, identity_laplacian, make_heston

HESTON = make_heston(HestonParams(sigma=0.2, rho=-0.5, kappa=1.5, theta=0.04, r=0.05))
DOM = DomainSpec(T=1.0, box=((-1.0, 1.0), (0.0, 0.5)))


def test_face_names_roundtrip():
    assert face_name(1, "lo") == "x2=lo"
    assert parse_face_name("x3=hi") == (2, "hi")
    with pytest.raises(ValueError):
        parse_face_name("bottom")


def test_domain_validation():
    with pytest.raises(ValueError):
        DomainSpec(T=0.0, box=((0, 1),))
    with pytest.raises(ValueError):
        DomainSpec(T=1.0, box=((1, 0),))
    with pytest.raises(ValueError):
        DomainSpec(T=1.0, box=((0, 1),), truncated_faces={"x2=lo"})


def test_parabolic_boundary_excludes_initial_slice():
    faces = parabolic_boundary(DOM)
    names = [f.name for f in faces]
    assert "top" in names and "bottom" not in names
    assert faces[0].normal == (-1.0, (0.0, 0.0))
    assert {f.name for f in faces if f.kind == "side"} == set(DOM.face_names())


def test_heston_floor_is_degenerate():
    part = classify_degenerate_boundary(HESTON, DOM)
    assert part.deg == {"x2=lo"}
    assert part.nondeg == {"top", "x1=lo", "x1=hi", "x2=hi"}
    assert DEG in part.face("x2=lo").labels


def test_uniformly_parabolic_has_no_degenerate_face():
    part = classify_degenerate_boundary(identity_laplacian(2), DomainSpec(T=1.0, box=((0, 1), (0, 1))))
    assert part.deg == frozenset()


def test_truncation_faces_are_nondegenerate():
    dom = DomainSpec(T=1.0, box=((-1.0, 1.0), (0.0, 0.5)), truncated_faces={"x2=lo"})
    part = classify_degenerate_boundary(HESTON, dom)
    assert part.deg == frozenset()
    assert {NONDEG, TRUNCATION} <= part.face("x2=lo").labels


def _mixed_operator():
    # a vanishes on x1 = 0 only where x2 < 1/2
    def a(t, x):
        s = np.where(x[:, 1] < 0.5, x[:, 0], 1.0)
        out = np.zeros((x.shape[0], 2, 2))
        out[:, 0, 0] = s
        out[:, 1, 1] = s
        return out
    return ParabolicOperator(dim=2, a=a, b=lambda t, x: np.ones((x.shape[0], 2)), c=lambda t, x: np.zeros(x.shape[0]))


def test_mixed_face_is_ambiguous():
    dom = DomainSpec(T=1.0, box=((0, 1), (0, 1)))
    with pytest.raises(AmbiguousFaceError) as exc:
        classify_degenerate_boundary(_mixed_operator(), dom)
    assert exc.value.face == "x1=lo"
    part = classify_degenerate_boundary(_mixed_operator(), dom, strict=False)
    assert part.ambiguous == {"x1=lo"} and "x1=lo" in part.nondeg


def test_inward_normal():
    part = classify_degenerate_boundary(HESTON, DOM)
    assert inward_normal(part.face("x2=lo"), (0.5, (0.2, 0.0)), DOM) == (0.0, (0.0, 1.0))
    assert inward_normal(part.face("x1=hi"), (0.5, (1.0, 0.2)), DOM) == (0.0, (-1.0, 0.0))
    with pytest.raises(ValueError):
        inward_normal(part.face("x2=lo"), (0.5, (0.2, 0.3)), DOM)
    with pytest.raises(ValueError):
        inward_normal(part.face("corner:x2=lo"), (1.0, (0.2, 0.0)), DOM)


def _grid_1d(n=11, levels=6):
    dom = DomainSpec(T=1.0, box=((0.0, 1.0),))
    op = degenerate_1d()
    return dom, build_grid(dom, classify_degenerate_boundary(op, dom), n, levels)


def test_reachable_set_in_one_dimension():
    dom, grid = _grid_1d()
    S, C = reachable_set(dom, grid, (2, 5))
    active = grid.underline_mask()
    # active nodes are x = 0 (degenerate) and the interior; forward in time up to the last free level
    for lv in range(grid.n_levels):
        expected = active if 2 <= lv < grid.n_levels - 1 else np.zeros_like(active)
        np.testing.assert_array_equal(S[lv], expected)
    np.testing.assert_array_equal(C[2], active)
    assert not C[[0, 1, 3, 4, 5]].any()


def test_reachable_set_rejects_bad_points():
    dom, grid = _grid_1d()
    with pytest.raises(ValueError):
        reachable_set(dom, grid, (grid.n_levels - 1, 5))
    with pytest.raises(ValueError):
        reachable_set(dom, grid, (0, grid.n_nodes - 1))
    with pytest.raises(ValueError):
        reachable_set(DomainSpec(T=2.0, box=((0.0, 1.0),)), grid, (0, 5))


def test_reachable_set_respects_union_components():
    dom = DomainSpec(T=1.0, box=((0, 2), (0, 1)), components=(((0, 0.9), (0, 1)), ((1.1, 2), (0, 1))))
    grid = build_grid(dom, None, (21, 11), 4)
    left = int(np.flatnonzero(grid.underline_mask() & (grid.points[:, 0] < 0.5))[0])
    S, C = reachable_set(dom, grid, (0, left))
    assert C[0].any()
    assert not np.any(C[0] & (grid.points[:, 0] > 1.0))
