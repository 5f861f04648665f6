import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from degenpar.fichera import (DEFAULT_HESTON_DOMAIN, SIGMA0, SIGMA1, SIGMA2, SIGMA3, AmbiguousSigmaError,
                              classify_sample, fichera_dirichlet_locus, fichera_function, heston_beta,
                              sigma_partition)
from degenpar.geometry import DomainSpec
from degenpar.operator import HestonParams, ParabolicOperator, identity_laplacian, make_heston

BETA3 = HestonParams(sigma=0.2, rho=-0.5, kappa=1.5, theta=0.04, r=0.05)
BETA05 = HestonParams(sigma=0.4, rho=-0.5, kappa=1.0, theta=0.04, r=0.05)
BETA1 = HestonParams(sigma=0.2, rho=-0.5, kappa=0.5, theta=0.04, r=0.05)


def test_fb_on_floor_worked_values():
    # sigma^2 (beta - 1) / 2 by hand: 0.04 * 2 / 2, 0.16 * (-0.5) / 2, 0
    for params, expected in ((BETA3, 0.04), (BETA05, -0.04), (BETA1, 0.0)):
        fb = fichera_function(make_heston(params), DEFAULT_HESTON_DOMAIN, (0.5, (0.2, 0.0)), (0.0, (0.0, 1.0)))
        assert fb == pytest.approx(expected, abs=1e-12)


@given(st.floats(0.05, 1.0), st.floats(-0.9, 0.9), st.floats(0.1, 5.0), st.floats(0.01, 0.5),
       st.floats(-1.0, 1.0), st.floats(0.0, 1.0))
def test_fb_floor_formula(sigma, rho, kappa, theta, x1, t):
    # fb = b^2 - d_1 a^{21} - d_2 a^{22} = kappa theta - sigma^2 / 2 on x2 = 0
    p = HestonParams(sigma, rho, kappa, theta)
    fb = fichera_function(make_heston(p), DEFAULT_HESTON_DOMAIN, (t, (x1, 0.0)), (0.0, (0.0, 1.0)))
    assert fb == pytest.approx(kappa * theta - 0.5 * sigma**2, abs=1e-10)
    assert fb == pytest.approx(0.5 * sigma**2 * (p.beta - 1.0), abs=1e-10)


def test_classify_sample_thresholds():
    assert classify_sample(0.0, 1.0) == SIGMA3
    assert classify_sample(1e-3, 0.0) == SIGMA1
    assert classify_sample(-1e-3, 0.0) == SIGMA2
    assert classify_sample(1e-12, 0.0) == SIGMA0


def test_normal_must_be_unit():
    with pytest.raises(ValueError):
        fichera_function(make_heston(BETA3), DEFAULT_HESTON_DOMAIN, (0.5, (0.0, 0.0)), (0.0, (0.0, 2.0)))


@pytest.mark.parametrize("params,floor", [(BETA05, SIGMA2), (BETA1, SIGMA0), (BETA3, SIGMA1)])
def test_partition_faces(params, floor):
    part = sigma_partition(make_heston(params), DEFAULT_HESTON_DOMAIN)
    assert part.face_class == {"bottom": SIGMA1, "top": SIGMA2, "x1=lo": SIGMA3, "x1=hi": SIGMA3,
                               "x2=lo": floor, "x2=hi": SIGMA3}


def test_loci_differ_only_below_one():
    r05, r1, r3 = heston_beta(BETA05), heston_beta(BETA1), heston_beta(BETA3)
    assert not r05.loci_agree
    assert r05.dirichlet_locus_fichera - r05.dirichlet_locus_ventcel == {"x2=lo"}
    assert r1.loci_agree and r3.loci_agree
    assert "DIFFER" in r05.to_text()
    rows = r05.to_csv().splitlines()
    assert rows[0] == "face_id,sigma_class,fichera_data,partial_dirichlet_data"
    assert "x2=lo,Sigma2,1,0" in rows


def test_uniformly_parabolic_sides_are_sigma3():
    part = sigma_partition(identity_laplacian(2), DomainSpec(T=1.0, box=((0, 1), (0, 1))))
    assert fichera_dirichlet_locus(part) == {"top", "x1=lo", "x1=hi", "x2=lo", "x2=hi"}


def test_mixed_face_raises():
    def a(t, x):
        out = np.zeros((x.shape[0], 1, 1))
        out[:, 0, 0] = np.where(t < 0.5, 1.0, 0.0)
        return out
    op = ParabolicOperator(dim=1, a=a, b=lambda t, x: np.ones((x.shape[0], 1)), c=lambda t, x: np.zeros(x.shape[0]),
                           da=lambda t, x: np.zeros((x.shape[0], 1, 1, 1)))
    with pytest.raises(AmbiguousSigmaError):
        sigma_partition(op, DomainSpec(T=1.0, box=((0, 1),)))


def test_sweep_is_fast():
    t0 = time.perf_counter()
    for p in (BETA05, BETA1, BETA3):
        heston_beta(p)
    assert time.perf_counter() - t0 < 1.0
