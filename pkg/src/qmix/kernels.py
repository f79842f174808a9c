"""Velocity profiles and interaction kernels.

A velocity profile g is a radial function on R^d.  The toolkit only ever
touches it through

* its Fourier transform  g_hat(p) = int exp(-i p.v) g(v) dv  (radial),
* its one-dimensional marginal along a unit vector e,
      g_marg(u) = int_{e^perp} g(u e + w) dw,
  which by the projection-slice identity has 1D Fourier transform
  g_hat(s e), and
* the constant background density (2 pi)^{-d} g_hat(0) of the steady state
  built from it.

Interaction kernels w enter only through w_hat(k) (real, even) and an L1
bound used by the smallness stability criterion.
"""

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline
from scipy.special import gamma as _gamma
from scipy.special import jv as _besselj

from .errors import ConfigError, DomainError, QuadratureError, RangeError
from .gridtools import gauss_panels, panel_edges

TWO_PI = 2.0 * np.pi


def sphere_area(m):
    """Surface measure of the unit sphere S^m in R^(m+1); S^0 has measure 2."""
    return 2.0 * np.pi ** ((m + 1) / 2.0) / _gamma((m + 1) / 2.0)


class VelocityProfile:
    """Radial velocity profile with closed-form or tabulated evaluators."""

    def __init__(self, kind, d, amplitude=1.0, beta=None, radii=None, values=None):
        if d < 1 or int(d) != d:
            raise ConfigError("dimension must be a positive integer")
        self.kind = kind
        self.d = int(d)
        self.amplitude = float(amplitude)
        if kind == "gaussian":
            if beta is None or beta <= 0:
                raise ConfigError("gaussian profile needs beta > 0")
            self.beta = float(beta)
        elif kind == "tabulated":
            radii = np.asarray(radii, dtype=float)
            values = np.asarray(values, dtype=float)
            if radii.ndim != 1 or radii.size < 4:
                raise ConfigError("tabulated profile needs at least 4 radial samples")
            if radii[0] != 0.0 or np.any(np.diff(radii) <= 0):
                raise ConfigError("radii must increase strictly from 0")
            if not np.all(np.isfinite(values)):
                raise ConfigError("tabulated values must be finite")
            self.radii = radii
            self.values = values
            # radial smoothness: even extension forces zero slope at r = 0
            self._spline = CubicSpline(radii, values, bc_type=((1, 0.0), "not-a-knot"))
            self._marg_spline = None
            self._validate_mass()
        else:
            raise ConfigError("unknown profile kind %r" % (kind,))

    # -- constructors ----------------------------------------------------

    @classmethod
    def gaussian(cls, beta=1.0, d=3, amplitude=1.0):
        return cls("gaussian", d, amplitude=amplitude, beta=beta)

    @classmethod
    def tabulated(cls, radii, values, d, amplitude=1.0):
        return cls("tabulated", d, amplitude=amplitude, radii=radii, values=values)

    # -- pointwise evaluators --------------------------------------------

    @property
    def support_radius(self):
        """Radius beyond which g is treated as zero."""
        if self.kind == "gaussian":
            # below 1e-18 of the peak
            return self.beta * np.sqrt(2.0 * np.log(1e18))
        return self.radii[-1]

    def radial(self, r):
        """g as a function of |v|."""
        r = np.abs(np.asarray(r, dtype=float))
        if self.kind == "gaussian":
            return self.amplitude * np.exp(-(r**2) / (2.0 * self.beta**2))
        out = np.zeros_like(r)
        inside = r <= self.radii[-1]
        out[inside] = self._spline(r[inside])
        return self.amplitude * out

    def evaluate(self, v):
        """g at velocity points; v has shape (..., d)."""
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != self.d:
            raise DomainError("velocity dimension mismatch")
        return self.radial(np.sqrt(np.sum(v**2, axis=-1)))

    # -- Fourier transform -----------------------------------------------

    def fourier_radial(self, s):
        """g_hat as a function of |p| (g_hat is radial and real)."""
        s = np.abs(np.asarray(s, dtype=float))
        if self.kind == "gaussian":
            amp = self.amplitude * TWO_PI ** (self.d / 2.0) * self.beta**self.d
            return amp * np.exp(-(self.beta**2) * s**2 / 2.0)
        return self._hankel(s)

    def fourier(self, p):
        """g_hat(p) with p of shape (..., d)."""
        p = np.asarray(p, dtype=float)
        if p.shape[-1] != self.d:
            raise DomainError("momentum dimension mismatch")
        return self.fourier_radial(np.sqrt(np.sum(p**2, axis=-1)))

    def _hankel(self, s, refine=True):
        """Radial Fourier transform of the tabulated profile by quadrature."""
        scalar = s.ndim == 0
        s = np.atleast_1d(s)
        R = self.radii[-1]
        smax = float(np.max(s)) if s.size else 0.0
        width = min(R / 8.0, np.pi / (2.0 * max(smax, 1.0 / R)))

        def run(w):
            nodes, wts = gauss_panels(panel_edges(0.0, R, w))
            gr = self._spline(nodes)
            d = self.d
            if d == 1:
                return (2.0 * np.cos(s[:, None] * nodes[None, :]) * gr[None, :]) @ wts
            nu = d / 2.0 - 1.0
            pref = TWO_PI ** (d / 2.0)
            vals = np.empty(s.shape)
            tiny = s < 1e-12
            if np.any(~tiny):
                ss = s[~tiny]
                arg = ss[:, None] * nodes[None, :]
                integ = gr[None, :] * _besselj(nu, arg) * nodes[None, :] ** (d / 2.0)
                vals[~tiny] = pref * ss ** (1.0 - d / 2.0) * (integ @ wts)
            if np.any(tiny):
                mass = np.dot(gr * nodes ** (d - 1), wts)
                vals[tiny] = sphere_area(d - 1) * mass
            return vals

        vals = run(width)
        if refine:
            resid = np.inf
            for _ in range(4):
                width /= 2.0
                vals2 = run(width)
                resid = np.max(np.abs(vals - vals2)) / max(
                    1.0, np.max(np.abs(vals2))
                )
                vals = vals2
                if resid <= 1e-9:
                    break
            if resid > 1e-9:
                raise QuadratureError(
                    "radial Fourier transform did not converge", residual=resid
                )
        vals = self.amplitude * vals
        return vals[0] if scalar else vals

    def fourier_tail_radius(self, tol):
        """|p| beyond which |g_hat| stays below tol (envelope estimate)."""
        peak = abs(self.fourier_radial(0.0))
        if peak <= tol:
            return 0.0
        if self.kind == "gaussian":
            return np.sqrt(2.0 * np.log(peak / tol)) / self.beta
        # tabulated: sample an expanding log grid; the envelope of the
        # transform of a compactly supported spline decays algebraically
        R = self.radii[-1]
        s = np.pi / R
        for _ in range(60):
            grid = np.linspace(s, 2.0 * s, 16)
            if np.all(np.abs(self.fourier_radial(grid)) < tol):
                return 2.0 * s
            s *= 2.0
            if s > 1e5:
                break
        raise QuadratureError(
            "Fourier tail of tabulated profile does not reach %g" % tol
        )

    def fourier_scale(self):
        """Length scale of variation of g_hat along the radius."""
        if self.kind == "gaussian":
            return 1.0 / self.beta
        return np.pi / self.radii[-1]

    # -- marginal ----------------------------------------------------------

    def marginal(self, u):
        """Marginal along any direction (radial g makes it direction-free)."""
        u = np.asarray(u, dtype=float)
        if self.kind == "gaussian":
            amp = self.amplitude * TWO_PI ** ((self.d - 1) / 2.0) * self.beta ** (
                self.d - 1
            )
            return amp * np.exp(-(u**2) / (2.0 * self.beta**2))
        if self.d == 1:
            return self.radial(u)
        self._ensure_marginal_spline()
        au = np.abs(u)
        out = np.zeros_like(au)
        inside = au < self.radii[-1]
        out[inside] = self._marg_spline(au[inside])
        return out

    def marginal_deriv(self, u):
        """d/du of the marginal."""
        u = np.asarray(u, dtype=float)
        if self.kind == "gaussian":
            return -u / self.beta**2 * self.marginal(u)
        if self.d == 1:
            au = np.abs(u)
            out = np.zeros_like(au)
            inside = au <= self.radii[-1]
            out[inside] = self._spline(au[inside], 1)
            return self.amplitude * np.sign(u) * out
        self._ensure_marginal_spline()
        au = np.abs(u)
        out = np.zeros_like(au)
        inside = au < self.radii[-1]
        out[inside] = self._marg_deriv(au[inside])
        return np.sign(u) * out

    def marginal_support_radius(self, tol=1e-18):
        peak = abs(float(self.marginal(0.0)))
        if self.kind == "gaussian":
            if peak <= tol:
                return 0.0
            return self.beta * np.sqrt(2.0 * np.log(peak / tol))
        return self.radii[-1]

    def marginal_scale(self):
        """Length scale of variation of the marginal."""
        if self.kind == "gaussian":
            return self.beta
        return self.radii[-1] / 16.0

    def _ensure_marginal_spline(self, n_grid=1025, refine_check=True):
        if self._marg_spline is not None:
            return
        R = self.radii[-1]
        ug = np.linspace(0.0, R, n_grid)
        n_nodes = 96
        vals = self._marginal_quad(ug, n_nodes)
        if refine_check:
            resid = np.inf
            for _ in range(4):
                n_nodes *= 2
                vals2 = self._marginal_quad(ug, n_nodes)
                resid = np.max(np.abs(vals - vals2)) / max(
                    1e-300, np.max(np.abs(vals2))
                )
                vals = vals2
                if resid <= 1e-9:
                    break
            if resid > 1e-9:
                raise QuadratureError(
                    "marginal quadrature did not converge", residual=resid
                )
        spl = CubicSpline(ug, vals, bc_type=((1, 0.0), "not-a-knot"))
        self._marg_spline = spl
        self._marg_deriv = spl.derivative()

    def _marginal_quad(self, ug, n_nodes):
        # transverse integral over t in [0, sqrt(R^2-u^2)] with t = T x,
        # so t^{d-2} dt = T^{d-1} x^{d-2} dx and the x nodes are shared
        R = self.radii[-1]
        x, w = gauss_panels(np.linspace(0.0, 1.0, n_nodes // 16 + 1), order=16)
        T = np.sqrt(np.maximum(R**2 - ug**2, 0.0))
        r = np.sqrt(ug[:, None] ** 2 + (T[:, None] * x[None, :]) ** 2)
        gr = np.zeros_like(r)
        inside = r <= R
        gr[inside] = self._spline(r[inside])
        vals = ((gr * x[None, :] ** (self.d - 2)) @ w) * T ** (self.d - 1)
        return self.amplitude * sphere_area(self.d - 2) * vals

    # -- derived quantities -------------------------------------------------

    def steady_density(self):
        """Constant spatial density of the steady state built from g."""
        return float(self.fourier_radial(0.0)) / TWO_PI**self.d

    def fourier_moment(self, n=1):
        """(2 pi)^{-d} int_0^inf s^n |g_hat(s)| ds, a sampled certificate."""
        if self.kind == "gaussian":
            # closed form for n = 1; quadrature otherwise
            if n == 1:
                amp = abs(self.amplitude) * TWO_PI ** (self.d / 2.0)
                return amp * self.beta ** (self.d - 2) / TWO_PI**self.d
        smax = self.fourier_tail_radius(1e-16 * max(1.0, abs(self.fourier_radial(0.0))))
        nodes, wts = gauss_panels(panel_edges(0.0, smax, self.fourier_scale() / 2.0))
        return float(np.dot(np.abs(self.fourier_radial(nodes)) * nodes**n, wts)) / (
            TWO_PI**self.d
        )

    def _validate_mass(self):
        """g_hat(0) must equal the volume integral of g (independent routes)."""
        ghat0 = float(self._hankel(np.asarray(0.0)))
        R = self.radii[-1]
        r = np.linspace(0.0, R, 4097)
        mass = sphere_area(self.d - 1) * simpson(
            self._spline(r) * r ** (self.d - 1), x=r
        )
        mass *= self.amplitude
        denom = max(abs(mass), 1e-300)
        if abs(ghat0 - mass) / denom > 1e-8:
            raise QuadratureError(
                "profile mass check failed: g_hat(0)=%r vs integral %r" % (ghat0, mass),
                residual=abs(ghat0 - mass) / denom,
            )


class InteractionKernel:
    """Interaction potential, seen through its radial Fourier transform."""

    def __init__(self, kind, d, amplitude=1.0, alpha=None, width=None,
                 k_radii=None, values=None, l1_norm_bound=None):
        if d < 1 or int(d) != d:
            raise ConfigError("dimension must be a positive integer")
        self.kind = kind
        self.d = int(d)
        self.amplitude = float(amplitude)
        if kind == "yukawa":
            if self.d != 3:
                raise ConfigError("the screened-Coulomb kernel is defined for d=3")
            if alpha is None or alpha <= 0:
                raise ConfigError("yukawa kernel needs alpha > 0")
            self.alpha = float(alpha)
        elif kind == "gaussian":
            if width is None or width <= 0:
                raise ConfigError("gaussian kernel needs width > 0")
            self.width = float(width)
        elif kind == "zero":
            pass
        elif kind == "tabulated":
            k_radii = np.asarray(k_radii, dtype=float)
            values = np.asarray(values, dtype=float)
            if k_radii.ndim != 1 or k_radii.size < 4:
                raise ConfigError("tabulated kernel needs at least 4 samples")
            if k_radii[0] != 0.0 or np.any(np.diff(k_radii) <= 0):
                raise ConfigError("kernel radii must increase strictly from 0")
            if l1_norm_bound is None or l1_norm_bound < 0:
                raise ConfigError("tabulated kernel needs l1_norm_bound >= 0")
            if np.max(np.abs(values)) > l1_norm_bound * (1.0 + 1e-9):
                raise ConfigError(
                    "l1_norm_bound must dominate the sampled sup of |w_hat|"
                )
            self.k_radii = k_radii
            self.values = values
            self._bound = float(l1_norm_bound)
            self._spline = CubicSpline(k_radii, values, bc_type=((1, 0.0), "not-a-knot"))
        else:
            raise ConfigError("unknown kernel kind %r" % (kind,))

    @classmethod
    def yukawa(cls, alpha=1.0, amplitude=1.0):
        return cls("yukawa", 3, amplitude=amplitude, alpha=alpha)

    @classmethod
    def gaussian(cls, width=1.0, d=3, amplitude=1.0):
        return cls("gaussian", d, amplitude=amplitude, width=width)

    @classmethod
    def zero(cls, d=3):
        return cls("zero", d)

    @classmethod
    def tabulated(cls, k_radii, values, d, l1_norm_bound, amplitude=1.0):
        return cls("tabulated", d, amplitude=amplitude, k_radii=k_radii,
                   values=values, l1_norm_bound=l1_norm_bound)

    def scaled(self, factor):
        """Copy of the kernel with amplitude multiplied by factor."""
        k = object.__new__(InteractionKernel)
        k.__dict__.update(self.__dict__)
        k.amplitude = self.amplitude * factor
        return k

    @property
    def is_zero(self):
        return self.kind == "zero" or self.amplitude == 0.0

    def hat_radial(self, s):
        s = np.abs(np.asarray(s, dtype=float))
        if self.kind == "yukawa":
            return self.amplitude * 4.0 * np.pi / (s**2 + self.alpha**2)
        if self.kind == "gaussian":
            a = self.width
            return (
                self.amplitude
                * TWO_PI ** (self.d / 2.0)
                * a**self.d
                * np.exp(-(a**2) * s**2 / 2.0)
            )
        if self.kind == "zero":
            return np.zeros_like(s)
        if np.any(s > self.k_radii[-1] * (1.0 + 1e-12)):
            raise RangeError("tabulated kernel queried beyond its range")
        return self.amplitude * self._spline(np.minimum(s, self.k_radii[-1]))

    def hat(self, k):
        k = np.asarray(k, dtype=float)
        if k.shape[-1] != self.d:
            raise DomainError("wavevector dimension mismatch")
        return self.hat_radial(np.sqrt(np.sum(k**2, axis=-1)))

    @property
    def l1_norm_bound(self):
        if self.kind == "yukawa":
            return abs(self.amplitude) * 4.0 * np.pi / self.alpha**2
        if self.kind == "gaussian":
            return abs(self.amplitude) * (TWO_PI * self.width**2) ** (self.d / 2.0)
        if self.kind == "zero":
            return 0.0
        return abs(self.amplitude) * self._bound

    def hat_sup(self):
        if self.kind in ("yukawa", "gaussian"):
            return abs(float(self.hat_radial(0.0)))
        if self.kind == "zero":
            return 0.0
        return abs(self.amplitude) * float(np.max(np.abs(self.values)))

    def decay_certificate(self, s_max=None, n=512):
        """Sampled sup of <s>^(M-1/2) |w_hat(s)| with M = ceil((d+1)/2)."""
        M = int(np.ceil((self.d + 1) / 2.0))
        if s_max is None:
            s_max = self.k_radii[-1] if self.kind == "tabulated" else 64.0
        s = np.linspace(0.0, s_max, n)
        return float(np.max((1.0 + s**2) ** ((M - 0.5) / 2.0) * np.abs(self.hat_radial(s))))


def steady_state_kernel(g, x, y, hbar):
    """Integral kernel of the steady state built from g at semiclassical hbar.

    x and y are d-vectors (or scalars when d = 1); broadcasting applies over
    leading axes.
    """
    if hbar <= 0:
        raise DomainError("the operator kernel needs hbar > 0")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim == 0 or x.shape[-1] != g.d:
        if g.d != 1:
            raise DomainError("position dimension mismatch")
        x = x[..., None]
        y = y[..., None]
    dist = np.sqrt(np.sum((y - x) ** 2, axis=-1)) / hbar
    return g.fourier_radial(dist) / TWO_PI**g.d


def steady_state_wigner(g, xi, hbar, rtol=1e-10):
    """Wigner transform of the steady state, computed by direct quadrature.

    Evaluates (2 pi)^{-2d} hbar^{-d} int exp(-i xi.y / hbar) g_hat(-y/hbar) dy
    on the radial profile; the result is independent of x by translation
    invariance.  Supports d = 1 (the quadrature is a plain 1D oscillatory
    integral); higher d reduce to d = 1 by radial symmetry of g_hat only at
    xi = 0, so the general case integrates per axis for product profiles.
    """
    if hbar <= 0:
        raise DomainError("the Wigner quadrature needs hbar > 0")
    if g.d != 1:
        raise DomainError("direct Wigner quadrature implemented for d = 1")
    xi = float(np.squeeze(np.asarray(xi, dtype=float)))
    ymax = hbar * g.fourier_tail_radius(1e-16 * max(1.0, abs(g.fourier_radial(0.0))))
    freq = max(abs(xi) / hbar, 1.0 / max(ymax, 1e-12))
    width = min(np.pi / (2.0 * freq), max(ymax / 8.0, 1e-8))
    nodes, wts = gauss_panels(panel_edges(-ymax, ymax, width))
    vals = np.exp(-1j * xi * nodes / hbar) * g.fourier_radial(nodes / hbar)
    out = np.dot(vals, wts) / (TWO_PI ** (2 * g.d) * hbar**g.d)
    nodes2, wts2 = gauss_panels(panel_edges(-ymax, ymax, width / 2.0))
    vals2 = np.exp(-1j * xi * nodes2 / hbar) * g.fourier_radial(nodes2 / hbar)
    out2 = np.dot(vals2, wts2) / (TWO_PI ** (2 * g.d) * hbar**g.d)
    if abs(out - out2) > rtol * max(1.0, abs(out2)):
        raise QuadratureError("Wigner quadrature did not converge",
                              residual=abs(out - out2))
    return out2
