"""Lindhard evaluation, Nyquist winding, and the stability scan."""

import numpy as np
import pytest
from scipy.special import erfi

from qmix.errors import DegeneracyError, DomainError, NumericalError
from qmix.kernels import InteractionKernel, VelocityProfile
from qmix.penrose import (
    _pv_batch,
    dispersion,
    dispersion_root,
    lindhard,
    lindhard_imag_batch,
    nyquist_curve,
    penrose_margin,
    sufficient_condition,
    winding_number,
)


@pytest.fixture(scope="module")
def g1():
    return VelocityProfile("gaussian", beta=1.0, amplitude=1.0, d=1)


@pytest.fixture(scope="module")
def g3():
    return VelocityProfile("gaussian", beta=1.0, amplitude=1.0, d=3)


def test_principal_value_against_erfi_closed_form(g1):
    # PV int e^{-v^2/2} / (v - b) dv = -pi e^{-b^2/2} erfi(b / sqrt 2)
    for b in (0.5, 1.7):
        exact = -np.pi * np.exp(-b * b / 2.0) * erfi(b / np.sqrt(2.0))
        got = _pv_batch(
            g1.marginal,
            np.array([b]),
            g1.marginal_scale(),
            g1.marginal_support_radius(),
        )[0]
        assert abs(got - exact) < 1e-12


# Reference values from high-precision quadrature of the shifted-marginal
# integrand (mpmath, 50 digits), frozen.
ANCHORS = [
    (1, 1.0, 0.0j, 1.0, 0.36730159575595780651 + 0.0j),
    (1, 0.8, 1.3j, 0.6, -0.071607723934974306367 - 0.21620480222099309598j),
    (1, 1.1, 0.9j, 0.0, 0.18420485299158258737 - 0.29272296774137767862j),
    (1, 1.2, 0.35 + 0.9j, 0.7, 0.16581635807350801829 - 0.17722576845363386918j),
    (3, 1.5, 0.6j, 0.25, 0.053338257901493766893 - 0.028898783459927961387j),
]


@pytest.mark.parametrize("d,k,lam,hbar,ref", ANCHORS)
def test_lindhard_frozen_anchors(g1, g3, d, k, lam, hbar, ref):
    g = g1 if d == 1 else g3
    got = lindhard(g, k, lam, hbar)
    assert abs(got - ref) < 1e-12


def test_lindhard_vanishes_at_zero_mode(g1):
    assert lindhard(g1, 0.0, 0.7j, 0.5) == 0.0 + 0.0j


def test_lindhard_domain_errors(g1):
    with pytest.raises(DomainError):
        lindhard(g1, 1.0, -0.1 + 0.5j, 0.5)
    with pytest.raises(DomainError):
        lindhard(g1, 1.0, 0.5j, -0.2)


def test_boundary_values_conjugate_symmetric(g1):
    taus = np.array([0.3, 0.9, 2.1])
    plus = lindhard_imag_batch(g1, 0.9, taus, 0.6)
    minus = lindhard_imag_batch(g1, 0.9, -taus, 0.6)
    assert np.max(np.abs(minus - np.conj(plus))) < 1e-12


def test_dual_branch_agreement(g1, g3):
    # damped quadrature at Re lam = 1e-6 vs the boundary branch
    rng = np.random.default_rng(7)
    for g in (g1, g3):
        for _ in range(3):
            k = rng.uniform(0.4, 2.0)
            tau = rng.uniform(-2.0, 2.0)
            hbar = rng.uniform(0.05, 1.0)
            a = lindhard(g, k, 1e-6 + 1j * tau, hbar)
            b = lindhard(g, k, 1j * tau, hbar)
            assert abs(a - b) < 1e-5


def test_classical_limit_order(g1):
    k, tau = 1.1, 0.8
    base = lindhard(g1, k, 1j * tau, 0.0)
    hs = np.array([0.4, 0.2, 0.1, 0.05])
    errs = np.array([abs(lindhard(g1, k, 1j * tau, h) - base) for h in hs])
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert slope >= 1.8


def test_dispersion_point_wiring(g1):
    w = InteractionKernel("gaussian", amplitude=0.3, width=1.0, d=1)
    pt = dispersion(w, g1, 0.9, 0.4j, 0.5)
    assert abs(pt.symbol - complex(w.hat_radial(0.9)) * pt.m) < 1e-15
    assert abs(pt.one_plus - (1.0 + pt.symbol)) < 1e-15
    wide = InteractionKernel("gaussian", amplitude=0.3, width=1.0, d=2)
    with pytest.raises(DomainError):
        dispersion(wide, g1, 0.9, 0.4j, 0.5)


def test_winding_number_circle():
    th = np.linspace(0.0, 2.0 * np.pi, 257)
    circle = -1.0 + 0.5 * np.exp(1j * th)
    assert winding_number(circle) == 1
    assert winding_number(circle[::-1]) == -1
    shifted = 1.0 + 0.5 * np.exp(1j * th)
    assert winding_number(shifted) == 0


def test_winding_number_error_paths():
    th = np.linspace(0.0, 2.0 * np.pi, 257)
    with pytest.raises(DomainError):
        winding_number(np.exp(1j * th[:-20]))
    with pytest.raises(DomainError):
        winding_number(np.exp(1j * th[:2]))
    with pytest.raises(DegeneracyError):
        winding_number(-1.0 + 1e-10 * np.exp(1j * th))


def test_nyquist_curve_settles_and_closes(g1):
    w = InteractionKernel("gaussian", amplitude=0.4, width=1.0, d=1)
    curve = nyquist_curve(w, g1, 0.8, 0.5)
    closed = curve.closed_values()
    assert closed[0] == 0 and closed[-1] == 0
    assert np.max(np.abs(np.diff(closed))) <= 0.1 + 1e-12
    assert winding_number(closed) == 0


def test_nyquist_rejects_bad_grid(g1):
    w = InteractionKernel("gaussian", amplitude=0.4, width=1.0, d=1)
    with pytest.raises(DomainError):
        nyquist_curve(w, g1, 0.8, 0.5, tau_grid=[0.0, 1.0, 2.0])
    with pytest.raises(DomainError):
        nyquist_curve(w, g1, 0.8, 0.5, tau_grid=[2.0, 1.0, -1.0, -2.0])


def test_margin_stable_small_repulsive(g1):
    w = InteractionKernel("gaussian", amplitude=0.3, width=1.0, d=1)
    rep = penrose_margin(w, g1, hbar_set=(0.0, 0.5), k_max=4.0, lam_max=4.0,
                         n_k=6, n_tau=65, n_interior=4, n_interior_tau=5)
    assert rep.verdict == "stable"
    assert rep.kappa > 0
    assert all(n == 0 for n in rep.winding_numbers.values())


def test_margin_decreases_with_coupling(g1):
    kappas = []
    for amp in (0.1, 0.4, 0.8):
        w = InteractionKernel("gaussian", amplitude=amp, width=1.0, d=1)
        rep = penrose_margin(w, g1, hbar_set=(0.5,), k_max=3.0, lam_max=3.0,
                             n_k=4, n_tau=65, n_interior=3, n_interior_tau=5,
                             with_windings=False)
        kappas.append(rep.kappa)
    assert kappas[0] > kappas[1] > kappas[2]


def test_unstable_attractive_kernel_winds_and_has_root(g1):
    # strong attraction in d = 1: nonzero winding plus an actual growth rate
    w = InteractionKernel("gaussian", amplitude=-8.0, width=1.0, d=1)
    rep = penrose_margin(w, g1, hbar_set=(0.5,), k_max=2.0, lam_max=4.0,
                         n_k=4, n_tau=129, n_interior=3, n_interior_tau=5)
    assert rep.verdict == "unstable"
    bad = [key for key, n in rep.winding_numbers.items() if n != 0]
    assert bad
    k_bad = bad[0][0]
    lam = dispersion_root(w, g1, k_bad, 0.5, 1.0 + 0.0j)
    assert lam.real > 0
    val = dispersion(w, g1, k_bad, lam, 0.5).one_plus
    assert abs(val) < 1e-6


def test_dispersion_root_fails_cleanly_when_stable(g1):
    w = InteractionKernel("gaussian", amplitude=0.2, width=1.0, d=1)
    with pytest.raises((NumericalError, DomainError)):
        dispersion_root(w, g1, 1.0, 0.5, 0.5 + 0.3j)


def test_margin_dimension_mismatch(g1):
    w = InteractionKernel("gaussian", amplitude=0.3, width=1.0, d=2)
    with pytest.raises(DomainError):
        penrose_margin(w, g1, hbar_set=(0.5,), n_k=2)


def test_sufficient_condition_small_coupling(g1):
    w = InteractionKernel("gaussian", amplitude=0.01, width=1.0, d=1)
    rep = sufficient_condition(w, g1)
    assert rep.passed and rep.which_passed == "smallness"
    rep2 = sufficient_condition(w, g1, which="repulsive_decreasing")
    assert rep2.passed
    with pytest.raises(DomainError):
        sufficient_condition(w, g1, which="bogus")
