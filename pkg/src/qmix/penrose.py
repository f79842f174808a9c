"""Stability of translation-invariant states under mean-field perturbations.

The linearized density response is controlled by the symbol

    L(lam, k) = w_hat(k) * m(lam, k)

on the closed right half plane Re lam >= 0.  The state is stable, uniformly
over a set of semiclassical parameters, when 1 + L stays away from zero for
every wavenumber.  This module evaluates m by quadrature, walks the boundary
curve tau -> L(i*tau, k), counts windings around -1, and scans a compact
region of (k, lam, hbar) for the margin inf |1 + L|.
"""

import numpy as np
from dataclasses import dataclass, field
from scipy.optimize import brentq, root

from .errors import (
    DomainError,
    QuadratureError,
    ResolutionError,
    DegeneracyError,
    NumericalError,
)
from .gridtools import gauss_panels, panel_edges
from .kernels import TWO_PI

_PV_HALF_WINDOW = 8.0
# below this half-gap the two-point difference quotient of the marginal
# loses more accuracy than the semiclassical correction is worth
_CLASSICAL_SWITCH = 1e-4


def _pv_batch(func, poles, scale, support, refine=True):
    """Principal value of int func(p)/(p - b) dp at each pole b.

    Splits at |p - b| = W: inside, the symmetric pairing
    (func(b+u) - func(b-u))/u subtracts the singular part and the log
    remainder of the subtraction cancels identically; outside, the
    integrand is regular and is integrated directly.  `scale` sets the
    panel width, `support` the radius beyond which func vanishes.
    """
    poles = np.atleast_1d(np.asarray(poles, dtype=float))
    W = _PV_HALF_WINDOW

    def run(width):
        u_in, w_in = gauss_panels(panel_edges(0.0, W, width))
        up = poles[:, None] + u_in[None, :]
        um = poles[:, None] - u_in[None, :]
        total = ((func(up) - func(um)) / u_in[None, :]) @ w_in

        b_min, b_max = poles.min(), poles.max()
        # p = b + u stays inside |p| <= support only for a bounded |u|
        hi = support - b_min
        if hi > W:
            u_out, w_out = gauss_panels(panel_edges(W, hi, width))
            total = total + (func(poles[:, None] + u_out[None, :]) / u_out) @ w_out
        lo = support + b_max
        if lo > W:
            u_out, w_out = gauss_panels(panel_edges(W, lo, width))
            total = total - (func(poles[:, None] - u_out[None, :]) / u_out) @ w_out
        return total

    width = min(scale / 2.0, W / 16.0)
    coarse = run(width)
    if not refine:
        return coarse
    fine = run(width / 2.0)
    ref = max(1.0, float(np.max(np.abs(fine))))
    err = float(np.max(np.abs(fine - coarse)))
    if err > 1e-8 * ref:
        raise QuadratureError(
            "principal value did not converge (residual %.3g)" % err,
            residual=err,
        )
    return fine


def lindhard_imag_batch(g, knorm, taus, hbar):
    """m(i*tau, k) for an array of tau at fixed |k| and hbar."""
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    knorm = float(knorm)
    if knorm <= 1e-12:
        return np.zeros(taus.shape, dtype=complex)
    a = taus / knorm
    h = 0.5 * hbar * knorm
    pref = TWO_PI ** (-g.d)
    scale = g.marginal_scale()
    supp = g.marginal_support_radius()

    if h < _CLASSICAL_SWITCH:
        pv_d = _pv_batch(g.marginal_deriv, a, scale, supp)
        return pref * (-pv_d + 1j * np.pi * g.marginal_deriv(a))

    both = np.concatenate([a - h, a + h])
    pv = _pv_batch(g.marginal, both, scale, supp)
    n = taus.size
    real = (pv[:n] - pv[n:]) / (hbar * knorm)
    imag = np.pi * (g.marginal(a + h) - g.marginal(a - h)) / (hbar * knorm)
    return pref * (real + 1j * imag)


def _lindhard_laplace(g, knorm, lam, hbar):
    """m(lam, k) for Re lam > 0 by damped oscillatory quadrature."""
    sigma = lam.real
    h = 0.5 * hbar * knorm
    pref = TWO_PI ** (-g.d)

    ghat0 = abs(float(g.fourier_radial(0.0)))
    if ghat0 == 0.0:
        return 0.0 + 0.0j
    # |integrand| <= |g_hat(s)| * amp * e^{-sigma s / k} with the sine
    # factor bounded by amp = min(s, 1/h); cut where that drops under tol
    tol = 1e-14 * ghat0
    if h > 0:
        amp = 1.0 / h
        try:
            s_env = g.fourier_tail_radius(tol / max(1.0, amp))
        except QuadratureError:
            s_env = np.inf
    else:
        s_env = g.fourier_tail_radius(tol)
        for _ in range(2):
            try:
                s_env = g.fourier_tail_radius(tol / max(1.0, s_env))
            except QuadratureError:
                s_env = np.inf
                break
        amp = s_env if np.isfinite(s_env) else 1.0
    s_damp = (knorm / sigma) * np.log(max(np.e, ghat0 * max(1.0, amp) / tol))
    s_max = max(min(s_env, s_damp), 2.0 * g.fourier_scale())

    nu = max(abs(lam.imag) / knorm, h, 1e-30)
    width = min(np.pi / nu, g.fourier_scale() / 2.0)
    if s_max / width > 4e5:
        raise QuadratureError(
            "oscillatory tail needs %g panels; refusing" % (s_max / width)
        )

    def run(w):
        s, wt = gauss_panels(panel_edges(0.0, s_max, w))
        damp = np.exp(-(sigma / knorm) * s - 1j * (lam.imag / knorm) * s)
        if h > 0:
            osc = np.sin(h * s) / h
        else:
            osc = s
        return pref * np.dot(wt, damp * osc * g.fourier_radial(s))

    coarse = run(width)
    fine = run(width / 2.0)
    err = abs(fine - coarse)
    if err > 1e-8 * max(1.0, abs(fine)):
        raise QuadratureError(
            "Laplace-side quadrature did not converge (residual %.3g)" % err,
            residual=err,
        )
    return complex(fine)


def lindhard(g, k, lam, hbar):
    """Response integral m(lam, k) of a radial velocity profile.

    `k` may be a scalar magnitude or a d-vector; only |k| enters.  `lam`
    must satisfy Re lam >= 0 and `hbar` >= 0 (hbar = 0 is the classical
    branch).  Returns a complex number; m(lam, 0) = 0 identically.
    """
    if hbar < 0:
        raise DomainError("hbar must be nonnegative, got %r" % (hbar,))
    kv = np.asarray(k, dtype=float)
    knorm = float(np.linalg.norm(kv)) if kv.ndim else abs(float(kv))
    lam = complex(lam)
    if lam.real < 0:
        raise DomainError(
            "m is defined on the closed right half plane; Re lam = %g" % lam.real
        )
    if knorm <= 1e-12:
        return 0.0 + 0.0j
    if lam.real == 0.0:
        return complex(lindhard_imag_batch(g, knorm, [lam.imag], hbar)[0])
    return _lindhard_laplace(g, knorm, lam, hbar)


@dataclass
class DispersionPoint:
    """Symbol values at one (k, lam, hbar) point."""

    k: float
    lam: complex
    hbar: float
    m: complex
    symbol: complex
    one_plus: complex

    def to_dict(self):
        return {
            "k": self.k,
            "lam": [self.lam.real, self.lam.imag],
            "hbar": self.hbar,
            "m": [self.m.real, self.m.imag],
            "symbol": [self.symbol.real, self.symbol.imag],
            "one_plus": [self.one_plus.real, self.one_plus.imag],
        }


def dispersion(w, g, k, lam, hbar):
    """Evaluate m, L = w_hat(k) m, and 1 + L at a single point."""
    if w.d != g.d:
        raise DomainError(
            "interaction dimension %d does not match profile dimension %d"
            % (w.d, g.d)
        )
    kv = np.asarray(k, dtype=float)
    knorm = float(np.linalg.norm(kv)) if kv.ndim else abs(float(kv))
    m = lindhard(g, knorm, lam, hbar)
    sym = complex(w.hat_radial(knorm)) * m
    return DispersionPoint(
        k=knorm, lam=complex(lam), hbar=hbar, m=m, symbol=sym, one_plus=1.0 + sym
    )


def dispersion_root(w, g, k, hbar, lam0, tol=1e-10):
    """Locate a zero of 1 + L in the open right half plane near lam0.

    Used to cross-check a nonzero winding: an unstable mode is an actual
    root with Re lam > 0.  Raises NumericalError when the search fails and
    DomainError when the converged root leaves the open half plane.
    """
    kv = np.asarray(k, dtype=float)
    knorm = float(np.linalg.norm(kv)) if kv.ndim else abs(float(kv))
    wk = complex(w.hat_radial(knorm))

    def f(xy):
        lam = complex(xy[0], xy[1])
        if lam.real <= 0:
            lam = complex(1e-8, lam.imag)
        val = 1.0 + wk * _lindhard_laplace(g, knorm, lam, hbar)
        return [val.real, val.imag]

    sol = root(f, [complex(lam0).real, complex(lam0).imag], method="hybr", tol=tol)
    lam = complex(sol.x[0], sol.x[1])
    if not sol.success:
        raise NumericalError("root search did not converge: %s" % sol.message)
    res = abs(complex(*f(sol.x)))
    if res > 1e-6:
        raise NumericalError("root residual %.3g too large" % res)
    if lam.real <= 0:
        raise DomainError("root converged to Re lam = %g <= 0" % lam.real)
    return lam


@dataclass
class NyquistCurve:
    """Sampled boundary curve tau -> L(i tau, k), tau ascending."""

    k: float
    hbar: float
    taus: np.ndarray
    values: np.ndarray

    def closed_values(self):
        """Append the limit point 0 at both ends so the contour closes."""
        z = np.zeros(self.values.size + 2, dtype=complex)
        z[1:-1] = self.values
        return z


def nyquist_curve(w, g, k, hbar, tau_grid=None, gap=0.1, max_points=200000):
    """Sample L(i tau, k) until neighbouring points are closer than gap.

    Starts from tau_grid (a symmetric sorted grid; a default is built when
    omitted), stretches the endpoints until |L| < gap/2 there so closing
    the contour through 0 is harmless, then bisects every segment whose
    endpoints are farther apart than gap.  Raises ResolutionError when
    refinement exceeds max_points.
    """
    kv = np.asarray(k, dtype=float)
    knorm = float(np.linalg.norm(kv)) if kv.ndim else abs(float(kv))
    wk = complex(w.hat_radial(knorm))
    if knorm <= 1e-12 or wk == 0:
        taus = np.array([-1.0, 0.0, 1.0])
        return NyquistCurve(knorm, hbar, taus, np.zeros(3, dtype=complex))

    if tau_grid is None:
        tau_max = 40.0 * max(1.0, np.hypot(1.0, hbar * knorm) * knorm)
        taus = np.linspace(-tau_max, tau_max, 513)
    else:
        taus = np.asarray(tau_grid, dtype=float)
        if taus.size < 3 or np.any(np.diff(taus) <= 0):
            raise DomainError("tau_grid must be sorted and strictly increasing")
        if abs(taus[0] + taus[-1]) > 1e-9 * max(1.0, taus[-1]):
            raise DomainError("tau_grid must be symmetric about 0")
    vals = wk * lindhard_imag_batch(g, knorm, taus, hbar)

    for _ in range(12):
        if max(abs(vals[0]), abs(vals[-1])) < gap / 2.0:
            break
        ends = np.array([2.0 * taus[0], 2.0 * taus[-1]])
        new = wk * lindhard_imag_batch(g, knorm, ends, hbar)
        taus = np.concatenate([[ends[0]], taus, [ends[1]]])
        vals = np.concatenate([[new[0]], vals, [new[1]]])
    else:
        raise ResolutionError(
            "boundary curve does not settle near 0 by tau = %g" % taus[-1]
        )

    for _ in range(40):
        jumps = np.abs(np.diff(vals))
        bad = np.nonzero(jumps > gap)[0]
        if bad.size == 0:
            return NyquistCurve(knorm, hbar, taus, vals)
        mids = 0.5 * (taus[bad] + taus[bad + 1])
        new_vals = wk * lindhard_imag_batch(g, knorm, mids, hbar)
        taus = np.concatenate([taus, mids])
        order = np.argsort(taus, kind="stable")
        taus = taus[order]
        vals = np.concatenate([vals, new_vals])[order]
        if taus.size > max_points:
            break
    raise ResolutionError(
        "boundary curve needs more than %d points at gap %g" % (max_points, gap)
    )


def winding_number(values, point=-1.0 + 0.0j, closure_tol=1e-9):
    """Winding of a closed polyline around a point, by angle increments.

    The polyline must return to its start (within closure_tol relative to
    its size).  Raises DegeneracyError when a vertex comes closer to the
    point than 1e-9, since the count is then meaningless.
    """
    z = np.asarray(values, dtype=complex)
    if z.size < 3:
        raise DomainError("need at least 3 vertices, got %d" % z.size)
    scale = max(1.0, float(np.max(np.abs(z))))
    if abs(z[0] - z[-1]) > closure_tol * scale:
        raise DomainError(
            "curve is not closed: endpoint gap %.3g" % abs(z[0] - z[-1])
        )
    rel = z - point
    dist = np.min(np.abs(rel))
    if dist < 1e-9:
        raise DegeneracyError("curve passes within %.3g of the test point" % dist)
    angles = np.angle(rel[1:] / rel[:-1])
    total = float(np.sum(angles))
    wind = total / (2.0 * np.pi)
    if abs(wind - round(wind)) > 0.05:
        raise ResolutionError(
            "winding estimate %.4f is not close to an integer" % wind
        )
    return int(round(wind))


@dataclass
class PenroseReport:
    """Outcome of a stability scan over (k, lam, hbar)."""

    kappa: float
    argmin_k: float
    argmin_lam: complex
    argmin_hbar: float
    winding_numbers: dict
    tail_certificate: float
    verdict: str
    params: dict = field(default_factory=dict)
    curves: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "kappa": self.kappa,
            "argmin_k": self.argmin_k,
            "argmin_lam": [self.argmin_lam.real, self.argmin_lam.imag],
            "argmin_hbar": self.argmin_hbar,
            "winding_numbers": {
                "k=%.6g,hbar=%.6g" % key: val
                for key, val in sorted(self.winding_numbers.items())
            },
            "tail_certificate": self.tail_certificate,
            "verdict": self.verdict,
            "params": self.params,
        }


class _MinTracker:
    """Keep the first strict minimum in feed order."""

    def __init__(self):
        self.value = np.inf
        self.where = (0.0, 0j, 0.0)

    def feed(self, vals, ks, lams, hbars):
        vals = np.asarray(vals, dtype=float).reshape(-1)
        if np.any(~np.isfinite(vals)):
            raise NumericalError("non-finite |1 + L| in stability scan")
        i = int(np.argmin(vals))
        if vals[i] < self.value:
            self.value = float(vals[i])
            ks = np.broadcast_to(np.asarray(ks, dtype=float).reshape(-1), vals.shape)
            lams = np.broadcast_to(
                np.asarray(lams, dtype=complex).reshape(-1), vals.shape
            )
            hbars = np.broadcast_to(
                np.asarray(hbars, dtype=float).reshape(-1), vals.shape
            )
            lam = complex(lams[i])
            self.where = (float(ks[i]), complex(lam.real + 0.0, lam.imag), float(hbars[i]))


def penrose_margin(
    w,
    g,
    hbar_set=(0.0, 0.25, 0.5, 1.0),
    k_max=8.0,
    lam_max=8.0,
    n_k=32,
    n_tau=129,
    n_interior=8,
    n_interior_tau=9,
    with_windings=True,
    keep_curves=False,
    gap=0.1,
):
    """Scan inf |1 + L| over [0, k_max] x {Re lam >= 0, |lam| <= lam_max}.

    The boundary Re lam = 0 carries the dense tau grid; the interior is
    sampled on a logarithmic ladder of n_interior real parts, coarse
    because minima of |1 + L| concentrate on the boundary.  A tail
    certificate records the sampled minimum of |1 + L| on the shells
    |k| = k_max and |lam| = lam_max; the verdict is "stable" only when
    kappa > 0, every winding vanishes, and the tail minimum is at least
    1/2.  Ties in the argmin go to the first point in scan order
    (k ascending, then tau, then hbar).
    """
    if w.d != g.d:
        raise DomainError(
            "interaction dimension %d does not match profile dimension %d"
            % (w.d, g.d)
        )
    if k_max <= 0 or lam_max <= 0:
        raise DomainError("k_max and lam_max must be positive")
    hbars = [float(h) for h in hbar_set]
    if any(h < 0 for h in hbars):
        raise DomainError("hbar values must be nonnegative")

    ks = k_max * np.arange(1, n_k + 1) / n_k
    taus = np.linspace(-lam_max, lam_max, n_tau)
    sigmas = lam_max * np.logspace(-3, 0, n_interior)
    taus_int = np.linspace(-lam_max, lam_max, n_interior_tau)
    thetas = np.linspace(-np.pi / 2.0, np.pi / 2.0, 21)
    track = _MinTracker()
    windings = {}
    curves = {}
    tail = np.inf

    for k in ks:
        wk = complex(w.hat_radial(k))
        on_k_shell = abs(k - k_max) < 1e-12
        # boundary Re lam = 0: matrix (tau, hbar), fed tau-major
        bnd = np.empty((n_tau, len(hbars)))
        for j, hbar in enumerate(hbars):
            bnd[:, j] = np.abs(1.0 + wk * lindhard_imag_batch(g, k, taus, hbar))
        track.feed(
            bnd,
            k,
            np.repeat(1j * taus, len(hbars)),
            np.tile(hbars, n_tau),
        )
        if on_k_shell:
            tail = min(tail, float(bnd.min()))
        # interior Re lam > 0, coarse ladder
        for sig in sigmas:
            sel = taus_int[np.hypot(sig, taus_int) <= lam_max * (1 + 1e-12)]
            for tau in sel:
                lam = complex(sig, tau)
                for hbar in hbars:
                    v = abs(1.0 + wk * _lindhard_laplace(g, k, lam, hbar))
                    track.feed([v], [k], [lam], [hbar])
                    if on_k_shell:
                        tail = min(tail, v)
        # shell |lam| = lam_max
        for th in thetas:
            lam = lam_max * complex(np.cos(th), np.sin(th))
            for hbar in hbars:
                if lam.real < 1e-12:
                    mv = complex(lindhard_imag_batch(g, k, [lam.imag], hbar)[0])
                else:
                    mv = _lindhard_laplace(g, k, lam, hbar)
                v = abs(1.0 + wk * mv)
                track.feed([v], [k], [lam], [hbar])
                tail = min(tail, v)
        if with_windings:
            for hbar in hbars:
                curve = nyquist_curve(w, g, k, hbar, gap=gap)
                windings[(float(k), hbar)] = winding_number(curve.closed_values())
                if keep_curves:
                    curves[(float(k), hbar)] = curve

    kappa = track.value
    argk, arglam, arghb = track.where
    if with_windings and any(n != 0 for n in windings.values()):
        verdict = "unstable"
    elif kappa > 0 and tail >= 0.5 and with_windings:
        verdict = "stable"
    else:
        verdict = "inconclusive"
    return PenroseReport(
        kappa=kappa,
        argmin_k=argk,
        argmin_lam=arglam,
        argmin_hbar=arghb,
        winding_numbers=windings,
        tail_certificate=float(tail),
        verdict=verdict,
        params={
            "hbar_set": hbars,
            "k_max": k_max,
            "lam_max": lam_max,
            "n_k": n_k,
            "n_tau": n_tau,
            "n_interior": n_interior,
            "n_interior_tau": n_interior_tau,
            "gap": gap,
        },
        curves=curves,
    )


@dataclass
class SufficientConditionReport:
    """Which closed-form stability criterion holds, if any."""

    requested: str
    passed: bool
    which_passed: str | None
    surrogate: bool
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "requested": self.requested,
            "passed": self.passed,
            "which_passed": self.which_passed,
            "surrogate": self.surrogate,
            "details": self.details,
        }


def _check_smallness(w, g):
    # |L| <= sup|w_hat| * (2 pi)^{-d} int_0^inf s |g_hat(s)| ds holds
    # uniformly in (lam, k, hbar); a product below 1 bounds |1 + L| away
    # from 0 by the complement
    moment = g.fourier_moment(1)
    bound = w.l1_norm_bound * moment
    return {
        "interaction_l1": w.l1_norm_bound,
        "profile_first_moment": moment,
        "product": bound,
        "margin": 1.0 - bound,
        "passed": bool(bound < 1.0),
    }


def _check_repulsive(w, g, k_max=64.0, n=2048):
    s = np.linspace(0.0, k_max, n)
    wh = np.asarray(w.hat_radial(s), dtype=float)
    nonneg = bool(np.all(wh >= -1e-12 * max(1.0, float(np.max(np.abs(wh))))))
    peak = abs(float(g.marginal(0.0)))
    u_cap = g.marginal_support_radius(1e-12 * max(peak, 1e-300))
    u = np.linspace(0.0, max(u_cap, 1e-6), n)[1:]
    dec = np.asarray(g.marginal_deriv(u), dtype=float)
    live = np.asarray(g.marginal(u), dtype=float) > 1e-12 * peak
    decreasing = bool(np.all(dec[live] < 0.0))
    return {
        "interaction_nonnegative": nonneg,
        "marginal_strictly_decreasing": decreasing,
        "passed": bool(nonneg and decreasing),
    }


def _jump_zeros(g, h, a_cap, n=2001):
    """Zeros of the spectral jump a -> g_k(a+h) - g_k(a-h) on [0, a_cap]."""
    if h > 0:
        f = lambda a: g.marginal(a + h) - g.marginal(a - h)
    else:
        f = lambda a: g.marginal_deriv(a)
    grid = np.linspace(0.0, a_cap, n)
    vals = np.asarray(f(grid), dtype=float)
    zeros = [0.0]  # the even marginal forces a zero at a = 0
    sign = np.sign(vals)
    flips = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
    for i in flips:
        zeros.append(
            brentq(lambda a: float(f(np.array([a]))[0]), grid[i], grid[i + 1])
        )
    exact = np.nonzero(vals[1:-1] == 0.0)[0] + 1
    zeros.extend(grid[exact].tolist())
    return sorted(set(zeros))


def _check_generalized(w, g, hbar_set, k_max, n_k):
    # the boundary curve crosses the real axis exactly where the jump
    # vanishes; Re(1 + L) > 0 at every crossing keeps -1 outside
    ks = k_max * np.arange(1, n_k + 1) / n_k
    supp = g.marginal_support_radius()
    worst = np.inf
    where = None
    for hbar in hbar_set:
        for k in ks:
            wk = float(w.hat_radial(k))
            h = 0.5 * hbar * k
            crits = _jump_zeros(g, h, supp + h + 1.0)
            taus = k * np.asarray(crits)
            m = lindhard_imag_batch(g, k, taus, hbar)
            re = 1.0 + wk * m.real
            i = int(np.argmin(re))
            if re[i] < worst:
                worst = float(re[i])
                where = {"k": float(k), "hbar": float(hbar), "tau": float(taus[i])}
    return {
        "min_real_one_plus": worst,
        "argmin": where,
        "passed": bool(worst > 0.0),
    }


def sufficient_condition(
    w,
    g,
    which="auto",
    hbar_set=(0.0, 0.25, 0.5, 1.0),
    k_max=8.0,
    n_k=16,
):
    """Test closed-form criteria that imply a positive stability margin.

    "smallness" bounds |L| by the interaction size times the first radial
    moment of the profile transform; "repulsive_decreasing" checks a nonnegative
    interaction transform against a strictly decreasing marginal;
    "generalized" evaluates Re(1 + L) at the real-axis crossings of the
    boundary curve.  "auto" tries them in that order.  All three are
    sampled certificates, not proofs, and reports are marked accordingly.
    """
    checks = {
        "smallness": lambda: _check_smallness(w, g),
        "repulsive_decreasing": lambda: _check_repulsive(w, g),
        "generalized": lambda: _check_generalized(w, g, hbar_set, k_max, n_k),
    }
    if which == "auto":
        details = {}
        for name in ("smallness", "repulsive_decreasing", "generalized"):
            details[name] = checks[name]()
            if details[name]["passed"]:
                return SufficientConditionReport(
                    requested="auto",
                    passed=True,
                    which_passed=name,
                    surrogate=True,
                    details=details,
                )
        return SufficientConditionReport(
            requested="auto",
            passed=False,
            which_passed=None,
            surrogate=True,
            details=details,
        )
    if which not in checks:
        raise DomainError(
            "unknown condition %r; expected smallness, repulsive_decreasing, "
            "generalized, or auto" % (which,)
        )
    det = checks[which]()
    return SufficientConditionReport(
        requested=which,
        passed=bool(det["passed"]),
        which_passed=which if det["passed"] else None,
        surrogate=True,
        details={which: det},
    )
