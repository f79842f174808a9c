"""Linearized density dynamics near a stable translation-invariant state.

Per spatial mode k the density obeys a scalar Volterra equation

    rho(t) = forcing(t) - (kernel * rho)(t),

whose forcing is the freely mixed initial data.  The same trace can be
reconstructed from the resolvent side: the remainder part of the response
function, brought back from the Laplace domain along the imaginary axis,
convolved with the free trace.  The two routes share no numerics, so their
agreement validates both.
"""

import numpy as np
from dataclasses import dataclass

from scipy.interpolate import CubicSpline, RegularGridInterpolator
from scipy.special import sici

from .errors import (
    DomainError,
    RangeError,
    NumericalError,
    InstabilityError,
)
from .kernels import TWO_PI
from .penrose import lindhard_imag_batch


def _as_vector(k, d):
    kv = np.asarray(k, dtype=float)
    if kv.ndim == 0:
        if d != 1:
            raise DomainError("scalar mode label only allowed in dimension 1")
        kv = kv.reshape(1)
    if kv.shape != (d,):
        raise DomainError("mode label of shape %r, expected (%d,)" % (kv.shape, d))
    return kv


class GaussianWigner:
    """Centered gaussian phase-space data exp(-(a_k|k|^2 + a_eta|eta|^2)).

    Real, even, and positive, so it is its own conjugate mirror and the
    associated operator perturbation is self-adjoint.
    """

    kind = "gaussian_profile"

    def __init__(self, d, amplitude=1.0, k_rate=1.0, eta_rate=1.0):
        if d not in (1, 2, 3):
            raise DomainError("dimension must be 1, 2, or 3")
        if k_rate <= 0 or eta_rate <= 0:
            raise DomainError("decay rates must be positive")
        self.d = d
        self.amplitude = float(amplitude)
        self.k_rate = float(k_rate)
        self.eta_rate = float(eta_rate)

    def evaluate(self, k, eta):
        k = np.asarray(k, dtype=float)
        eta = np.asarray(eta, dtype=float)
        q = self.k_rate * np.sum(k * k, axis=-1) + self.eta_rate * np.sum(
            eta * eta, axis=-1
        )
        return self.amplitude * np.exp(-q) + 0.0j

    def sup_bound(self):
        return abs(self.amplitude)


class BracketWigner:
    """Polynomially localized data (1 + |k|^2 + |eta|^2)^(-exponent).

    Decays in the same bracket family as the weighted norms, so its free
    density decays algebraically in <k, kt> with the same exponent at
    every mode.  Real, even, positive: its own conjugate mirror.
    """

    kind = "bracket_profile"

    def __init__(self, d, exponent, amplitude=1.0):
        if d not in (1, 2, 3):
            raise DomainError("dimension must be 1, 2, or 3")
        if exponent <= (d + 1) / 2.0:
            raise DomainError(
                "exponent must exceed (d+1)/2 for a summable density"
            )
        self.d = d
        self.exponent = float(exponent)
        self.amplitude = float(amplitude)

    def evaluate(self, k, eta):
        k = np.asarray(k, dtype=float)
        eta = np.asarray(eta, dtype=float)
        base = 1.0 + np.sum(k * k, axis=-1) + np.sum(eta * eta, axis=-1)
        return self.amplitude * base ** (-self.exponent) + 0.0j

    def sup_bound(self):
        return abs(self.amplitude)


class GridWigner:
    """Phase-space data tabulated on a symmetric (k, eta) tensor grid.

    Off-grid queries interpolate; points outside the box evaluate to 0.
    Construction verifies the conjugate mirror symmetry
    values(-k,-eta) = conj(values(k,eta)) to 1e-10.
    """

    kind = "grid_sampled"

    def __init__(self, k_axes, eta_axes, values):
        k_axes = [np.asarray(a, dtype=float) for a in k_axes]
        eta_axes = [np.asarray(a, dtype=float) for a in eta_axes]
        self.d = len(k_axes)
        if len(eta_axes) != self.d:
            raise DomainError("k and eta axis counts differ")
        values = np.asarray(values, dtype=complex)
        shape = tuple(a.size for a in k_axes) + tuple(a.size for a in eta_axes)
        if values.shape != shape:
            raise DomainError(
                "value array of shape %r, expected %r" % (values.shape, shape)
            )
        for a in k_axes + eta_axes:
            if a.size < 2 or np.any(np.diff(a) <= 0):
                raise DomainError("axes must be increasing with >= 2 points")
            if abs(a[0] + a[-1]) > 1e-12 * max(1.0, a[-1]):
                raise DomainError("axes must be symmetric about 0")
        mirror = np.conj(values[(slice(None, None, -1),) * (2 * self.d)])
        defect = float(np.max(np.abs(values - mirror)))
        if defect > 1e-10 * max(1.0, float(np.max(np.abs(values)))):
            raise DomainError(
                "conjugate mirror symmetry violated by %.3g" % defect
            )
        self._interp = RegularGridInterpolator(
            tuple(k_axes) + tuple(eta_axes),
            values,
            method="cubic" if all(a.size >= 4 for a in k_axes + eta_axes) else "linear",
            bounds_error=False,
            fill_value=0.0,
        )
        self.k_axes = k_axes
        self.eta_axes = eta_axes
        self.values = values

    def evaluate(self, k, eta):
        k = np.asarray(k, dtype=float)
        eta = np.asarray(eta, dtype=float)
        pts = np.concatenate(
            np.broadcast_arrays(k, eta), axis=-1
        ).reshape(-1, 2 * self.d)
        out = self._interp(pts)
        return out.reshape(np.broadcast_shapes(k.shape, eta.shape)[:-1])

    def sup_bound(self):
        return float(np.max(np.abs(self.values)))


@dataclass
class DensityTrace:
    """Uniformly sampled time series of one density Fourier mode."""

    k: np.ndarray
    times: np.ndarray
    values: np.ndarray
    hbar: float
    provenance: str

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.times.size != self.values.size:
            raise DomainError("times and values length mismatch")
        if self.times.size >= 2:
            steps = np.diff(self.times)
            if np.any(steps <= 0) or np.max(np.abs(steps - steps[0])) > 1e-9 * steps[0]:
                raise DomainError("times must be uniformly increasing")
        if self.times.size and self.times[0] < 0:
            raise DomainError("times must be nonnegative")

    @property
    def dt(self):
        return float(self.times[1] - self.times[0]) if self.times.size > 1 else 0.0

    def knorm(self):
        return float(np.linalg.norm(self.k))


def free_density(W0, k, t):
    """Density of the freely mixing perturbation: the data read at (k, kt)."""
    k = np.asarray(k, dtype=float)
    if np.ndim(t) == 0 and float(t) < 0:
        raise DomainError("time must be nonnegative")
    t = np.asarray(t, dtype=float)
    return W0.evaluate(k, k * t[..., None] if t.ndim else k * t)


def free_trace(W0, k, dt, T, hbar=0.0):
    """Free-mixing DensityTrace on the uniform grid 0, dt, ..., ~T."""
    kv = _as_vector(k, W0.d)
    n = int(round(T / dt))
    times = dt * np.arange(n + 1)
    vals = W0.evaluate(kv[None, :], kv[None, :] * times[:, None])
    return DensityTrace(kv, times, vals, hbar, "free")


def volterra_kernel(w, g, hbar, t, k):
    """Memory kernel of the per-mode Volterra equation.

    Vectorized over t.  The semiclassical difference quotient
    (2/hbar) sin(hbar t |k|^2 / 2) degenerates to t|k|^2 at hbar = 0.
    """
    if hbar < 0:
        raise DomainError("hbar must be nonnegative")
    kv = np.asarray(k, dtype=float)
    knorm = float(np.linalg.norm(kv)) if kv.ndim else abs(float(kv))
    t = np.asarray(t, dtype=float)
    if knorm <= 1e-12:
        return np.zeros(t.shape)
    wk = float(w.hat_radial(knorm))
    if hbar > 0:
        osc = (2.0 / hbar) * np.sin(0.5 * hbar * t * knorm**2)
    else:
        osc = t * knorm**2
    return TWO_PI ** (-g.d) * wk * osc * g.fourier_radial(knorm * t)


def solve_volterra(kernel, forcing, dt, T, k=None, hbar=0.0):
    """March rho = forcing - kernel * rho by product-trapezoid steps.

    `kernel` and `forcing` must accept arrays of times.  The diagonal
    trapezoid weight dt/2 * kernel(0) is kept on the left-hand side, so
    the scheme stays well defined even for kernels with kernel(0) != 0;
    for this module's family kernel(0) = 0 and the march is explicit.
    Global accuracy is second order in dt.
    """
    if dt <= 0:
        raise DomainError("dt must be positive")
    if T < dt:
        raise DomainError("T must be at least dt")
    n = int(round(T / dt))
    times = dt * np.arange(n + 1)
    ker = np.asarray(kernel(times), dtype=float)
    force = np.asarray(forcing(times), dtype=complex)
    if ker.shape != times.shape or force.shape != times.shape:
        raise DomainError("kernel/forcing must map times to same-shape arrays")

    phi = np.empty(n + 1, dtype=complex)
    phi[0] = force[0]
    diag = 1.0 + 0.5 * dt * ker[0]
    for m in range(1, n + 1):
        conv = 0.5 * ker[m] * phi[0] + np.dot(ker[m - 1:0:-1], phi[1:m])
        phi[m] = (force[m] - dt * conv) / diag
        if not (np.isfinite(phi[m].real) and np.isfinite(phi[m].imag)):
            raise NumericalError("non-finite value at step %d (t=%g)" % (m, times[m]))
    kv = np.zeros(1) if k is None else np.atleast_1d(np.asarray(k, dtype=float))
    return DensityTrace(kv, times, phi, hbar, "volterra")


@dataclass
class GreenRemainder:
    """Remainder response kernel on a time grid, with its error certificate.

    `trunc_bound` estimates the inverse-transform truncation error from the
    sampled fourth-power decay of the integrand beyond the grid; the
    quadratic far-field term itself is integrated exactly.
    """

    k: np.ndarray
    hbar: float
    times: np.ndarray
    values: np.ndarray
    tau_max: float
    n_tau: int
    min_one_plus: float
    trunc_bound: float


def _batched_symbol(w, g, knorm, taus, hbar, chunk=4096):
    """w_hat(k) m(i tau, k) over a large tau grid, in memory-bounded chunks."""
    wk = complex(w.hat_radial(knorm))
    out = np.empty(taus.size, dtype=complex)
    for i in range(0, taus.size, chunk):
        out[i:i + chunk] = wk * lindhard_imag_batch(g, knorm, taus[i:i + chunk], hbar)
    return out


def green_remainder(w, g, hbar, k, tau_max=None, n_tau=2**14, t_grid=None):
    """Inverse transform of symbol/(1 + symbol) along the imaginary axis.

    Trapezoid on [-tau_max, tau_max] with FFT acceleration and 4x zero
    padding; beyond the grid the integrand is replaced by its exact
    quadratic-decay asymptote, integrated in closed form.  Requires the
    sampled |1 + symbol| to stay above 1e-6 (raises InstabilityError) and
    every time to sit inside the alias-free window 2 pi / d tau (raises
    RangeError).
    """
    if t_grid is None:
        raise DomainError("t_grid is required")
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0 or np.any(t < 0):
        raise DomainError("t_grid must be a 1-d array of nonnegative times")
    kv = np.asarray(k, dtype=float)
    knorm = float(np.linalg.norm(kv)) if kv.ndim else abs(float(kv))
    kv = np.atleast_1d(kv)

    if knorm <= 1e-12 or w.is_zero:
        return GreenRemainder(
            kv, hbar, t, np.zeros(t.shape, dtype=complex),
            tau_max or 0.0, n_tau, np.inf, 0.0,
        )

    if tau_max is None:
        tau_max = 40.0 * max(1.0, np.hypot(1.0, hbar * knorm) * knorm)
    if n_tau < 64 or n_tau % 2:
        raise DomainError("n_tau must be even and at least 64")
    dtau = 2.0 * tau_max / n_tau
    window = 2.0 * np.pi / dtau
    if float(np.max(t)) > window:
        raise RangeError(
            "times reach %g, beyond the alias-free window %g"
            % (float(np.max(t)), window)
        )

    taus = -tau_max + dtau * np.arange(n_tau + 1)
    sym = _batched_symbol(w, g, knorm, taus, hbar)
    denom = 1.0 + sym
    min_one_plus = float(np.min(np.abs(denom)))
    if min_one_plus < 1e-6:
        raise InstabilityError(
            "|1 + symbol| reaches %.3g on the grid; the mode is not damped"
            % min_one_plus
        )
    integrand = sym / denom

    # trapezoid weights, then a padded FFT evaluates the phase sums on a
    # uniform time comb finer than any oscillation the grid can carry
    weighted = integrand.copy()
    weighted[0] *= 0.5
    weighted[-1] *= 0.5
    n_pad = 4 * n_tau
    padded = np.zeros(n_pad, dtype=complex)
    padded[: n_tau + 1] = weighted
    comb = np.fft.ifft(padded) * n_pad
    t_comb = (2.0 * np.pi / (n_pad * dtau)) * np.arange(n_pad)
    phase = np.exp(-1j * tau_max * t_comb)
    g_comb = (dtau / (2.0 * np.pi)) * phase * comb

    keep = t_comb <= min(window, float(np.max(t)) + 2.0 * np.pi / (tau_max))
    spline_re = CubicSpline(t_comb[keep], g_comb[keep].real)
    spline_im = CubicSpline(t_comb[keep], g_comb[keep].imag)
    core = spline_re(t) + 1j * spline_im(t)

    # far field: symbol/(1+symbol) ~ amp/(i tau)^2 with the exact
    # coefficient from the second moment of the memory kernel
    amp = float(w.hat_radial(knorm)) * TWO_PI ** (-g.d) * knorm**2 * float(
        g.fourier_radial(0.0)
    )
    si, _ = sici(tau_max * t)
    tail = -(amp / np.pi) * (
        np.cos(tau_max * t) / tau_max - t * (0.5 * np.pi - si)
    )

    outer = np.abs(taus) >= 0.5 * tau_max
    resid = np.abs(integrand[outer] - amp / (1j * taus[outer]) ** 2)
    c4 = float(np.max(np.abs(taus[outer]) ** 4 * resid))
    trunc_bound = c4 / (3.0 * np.pi * tau_max**3)

    return GreenRemainder(
        kv, hbar, t, core + tail, tau_max, n_tau, min_one_plus, trunc_bound
    )


def linear_density_volterra(W0, w, g, hbar, k, dt, T):
    """Linearized trace of mode k by the time-marching route."""
    kv = _as_vector(k, g.d)

    def kernel(times):
        return volterra_kernel(w, g, hbar, times, kv)

    def forcing(times):
        return W0.evaluate(kv[None, :], kv[None, :] * times[:, None])

    return solve_volterra(kernel, forcing, dt, T, k=kv, hbar=hbar)


def linear_density_green(W0, w, g, hbar, k, dt, T, tau_max=None, n_tau=2**14):
    """Linearized trace of mode k by the resolvent route.

    Convolves the remainder kernel with the free trace by trapezoid on the
    shared uniform grid; independent of the Volterra march in both the
    response evaluation and the time integration.
    """
    kv = _as_vector(k, g.d)
    n = int(round(T / dt))
    times = dt * np.arange(n + 1)
    free = W0.evaluate(kv[None, :], kv[None, :] * times[:, None])
    rem = green_remainder(w, g, hbar, kv, tau_max=tau_max, n_tau=n_tau, t_grid=times)
    gr = rem.values
    conv = np.convolve(gr, free)[: n + 1]
    conv -= 0.5 * gr[0] * free
    conv -= 0.5 * free[0] * gr
    vals = free - dt * conv
    return DensityTrace(kv, times, vals, hbar, "green")
