"""Discrete surrogates of the weighted norms that control phase mixing.

Velocity moments act on the transformed field as derivatives along the
second block of axes, regularity weights as bracket multipliers in (k, eta).
Everything here reduces a snapshot to scalars: norms, running bootstrap
monitors, decay-rate fits, and physical-space upper bounds for the density.
All routines are pure and read the field arrays without copying them.
"""

import itertools
import warnings

import numpy as np
from dataclasses import dataclass, field as dc_field

from .errors import ConfigError, DomainError, InsufficientDataError
from .gridtools import fit_loglog, shifted

_trapz = getattr(np, "trapezoid", None) or np.trapz


@dataclass(frozen=True)
class NormParams:
    """Weight selection for a single norm evaluation.

    weight_mode "plain" uses <k,eta>^sigma alone, "time_bracket" adds the
    mixing weight <t k, eta>, "k_power" adds |k|^delta.
    """

    sigma: float
    M: int = 0
    weight_mode: str = "plain"
    delta: float = 0.25

    def __post_init__(self):
        if self.sigma < 0:
            raise ConfigError("sigma must be nonnegative")
        if not 0 <= self.M <= 4:
            raise ConfigError("M must lie in 0..4 (difference stencil limit)")
        if self.weight_mode not in ("plain", "time_bracket", "k_power"):
            raise ConfigError("unknown weight_mode %r" % (self.weight_mode,))
        if self.weight_mode == "k_power" and self.delta <= 0:
            raise ConfigError("delta must be positive for k_power weighting")


@dataclass(frozen=True)
class NormSet:
    """Exponent ladder shared by the bootstrap monitors.

    The entries must increase; the recommended gaps (sigma1 >= d+8,
    sigma2-sigma1 > 3/2, sigma3-sigma2 > d/2, sigma4-sigma3 > (d+1)/2+delta,
    sigma4 < N0-(d+3)/2) are reported by `gap_violations`, not enforced.
    """

    sigma0: float
    sigma1: float
    sigma2: float
    sigma3: float
    sigma4: float
    N0: float
    delta: float
    M: int

    def __post_init__(self):
        ladder = (self.sigma0, self.sigma1, self.sigma2, self.sigma3, self.sigma4)
        if any(b <= a for a, b in zip(ladder, ladder[1:])):
            raise ConfigError("exponents must increase strictly")
        if not 0 < self.delta < 0.5:
            raise ConfigError("delta must lie in (0, 1/2)")
        if not 0 <= self.M <= 4:
            raise ConfigError("M must lie in 0..4")

    def gap_violations(self, d):
        out = []
        if self.sigma1 < d + 8:
            out.append("sigma1 = %g below d+8 = %g" % (self.sigma1, d + 8))
        if self.sigma2 - self.sigma1 <= 1.5:
            out.append("sigma2-sigma1 = %g not above 3/2" % (self.sigma2 - self.sigma1))
        if self.sigma3 - self.sigma2 <= d / 2.0:
            out.append(
                "sigma3-sigma2 = %g not above d/2 = %g"
                % (self.sigma3 - self.sigma2, d / 2.0)
            )
        if self.sigma4 - self.sigma3 <= (d + 1) / 2.0 + self.delta:
            out.append(
                "sigma4-sigma3 = %g not above (d+1)/2+delta = %g"
                % (self.sigma4 - self.sigma3, (d + 1) / 2.0 + self.delta)
            )
        if self.sigma4 >= self.N0 - (d + 3) / 2.0:
            out.append(
                "sigma4 = %g not below N0-(d+3)/2 = %g"
                % (self.sigma4, self.N0 - (d + 3) / 2.0)
            )
        return out


def default_norm_set(d):
    """Exponent ladder satisfying every recommended gap for dimension d."""
    s1 = float(d + 8)
    s2 = s1 + 2.0
    s3 = s2 + d / 2.0 + 0.25
    delta = 0.25
    s4 = s3 + (d + 1) / 2.0 + delta + 0.25
    n0 = np.ceil(s4 + (d + 3) / 2.0 + 0.5)
    return NormSet(
        sigma0=2.0,
        sigma1=s1,
        sigma2=s2,
        sigma3=s3,
        sigma4=s4,
        N0=float(n0),
        delta=delta,
        M=int(np.ceil((d + 1) / 2.0)),
    )


def _derive(values, axis, order, h):
    """Centered 4th-order finite difference of the given order along axis."""
    if order == 0:
        return values
    if order == 1:
        s = lambda o: shifted(values, axis, o)
        return (-s(2) + 8.0 * s(1) - 8.0 * s(-1) + s(-2)) / (12.0 * h)
    if order == 2:
        s = lambda o: shifted(values, axis, o)
        return (
            -s(2) + 16.0 * s(1) - 30.0 * values + 16.0 * s(-1) - s(-2)
        ) / (12.0 * h**2)
    half = order // 2
    return _derive(_derive(values, axis, half, h), axis, order - half, h)


def _bracket_sq(field, t, mode, delta):
    """Squared weight on the full (k, eta) grid, broadcast-shaped."""
    d = field.d
    shape_k = [1] * (2 * d)
    shape_e = [1] * (2 * d)
    k_sq = 0.0
    e_sq = 0.0
    tk_sq = 0.0
    for i in range(d):
        sk = list(shape_k)
        sk[i] = field.k_axes[i].size
        ax = field.k_axes[i].reshape(sk)
        k_sq = k_sq + ax**2
        tk_sq = tk_sq + (t * ax) ** 2
        se = list(shape_e)
        se[d + i] = field.eta_axes[i].size
        ex = field.eta_axes[i].reshape(se)
        e_sq = e_sq + ex**2
    base = 1.0 + k_sq + e_sq
    if mode == "plain":
        return base, None
    if mode == "time_bracket":
        return base, 1.0 + tk_sq + e_sq
    if mode == "k_power":
        return base, k_sq ** (delta / 2.0)
    raise ConfigError("unknown weight_mode %r" % (mode,))


def weighted_norm(field, params, t=None):
    """Sobolev-type surrogate norm of a transformed-field snapshot.

    Square root of the sum over velocity-moment orders |alpha| <= M of the
    squared grid L2 norm of <k,eta>^sigma (x extra weight) D_eta^alpha W,
    with derivatives by 4th-order centered differences (zero beyond the
    box) and cell volume (dk * deta)^d.
    """
    if t is None:
        t = getattr(field, "time", 0.0)
    d = field.d
    for ax in field.eta_axes:
        if params.M >= 1 and ax.size < params.M + 4:
            raise ConfigError(
                "eta axis of %d points too small for M=%d stencils"
                % (ax.size, params.M)
            )
    base_sq, extra = _bracket_sq(field, t, params.weight_mode, params.delta)
    weight_sq = base_sq**params.sigma
    if extra is not None:
        if params.weight_mode == "time_bracket":
            weight_sq = weight_sq * extra
        else:
            weight_sq = weight_sq * extra**2

    cell = (field.dk * field.deta) ** d
    total = 0.0
    for alpha in itertools.product(range(params.M + 1), repeat=d):
        if sum(alpha) > params.M:
            continue
        der = field.values
        for i, order in enumerate(alpha):
            if order:
                der = _derive(der, d + i, order, field.deta)
        total += float(np.sum(weight_sq * (der.real**2 + der.imag**2)))
    return float(np.sqrt(total * cell))


@dataclass
class MonitorSeries:
    """Accumulated bootstrap-monitor values over output times."""

    times: list = dc_field(default_factory=list)
    b1: list = dc_field(default_factory=list)
    b2: list = dc_field(default_factory=list)
    b3: list = dc_field(default_factory=list)
    b4: list = dc_field(default_factory=list)
    b5: list = dc_field(default_factory=list)
    thresholds: dict | None = None

    def append(self, row):
        for name in ("b1", "b2", "b3", "b4", "b5"):
            val = row[name]
            if not np.isfinite(val) or val < 0:
                raise DomainError("monitor %s is %r at t=%g" % (name, val, row["t"]))
        self.times.append(row["t"])
        for name in ("b1", "b2", "b3", "b4", "b5"):
            getattr(self, name).append(row[name])

    def as_arrays(self):
        return {
            "times": np.asarray(self.times),
            "b1": np.asarray(self.b1),
            "b2": np.asarray(self.b2),
            "b3": np.asarray(self.b3),
            "b4": np.asarray(self.b4),
            "b5": np.asarray(self.b5),
        }


@dataclass
class DensityHistory:
    """Density modes on the full k-grid at every output time so far."""

    k_vectors: np.ndarray
    dk: float
    times: list = dc_field(default_factory=list)
    rows: list = dc_field(default_factory=list)

    def append(self, t, values):
        values = np.asarray(values, dtype=complex)
        if values.shape != (self.k_vectors.shape[0],):
            raise DomainError("density row has wrong length")
        if self.times and t <= self.times[-1]:
            raise DomainError("history times must increase")
        self.times.append(float(t))
        self.rows.append(values)

    def arrays(self):
        return np.asarray(self.times), np.asarray(self.rows)


def bootstrap_monitors(field, history, norms, t=None):
    """One row of the five bootstrap monitors at the current time.

    The field carries the snapshot; the history carries the density modes
    needed by the two running time integrals.  Monitors follow the shapes
    propagated by the stability argument: a time-weighted derivative norm,
    two cumulative density integrals, a low-frequency-regularized norm,
    and a pointwise weighted sup.
    """
    if t is None:
        t = getattr(field, "time", 0.0)
    if not history.times or abs(history.times[-1] - t) > 1e-9 * max(1.0, t):
        raise InsufficientDataError(
            "density history does not reach the requested time"
        )
    d = field.d
    times, rows = history.arrays()
    kn = np.linalg.norm(history.k_vectors, axis=1)
    cell = history.dk**d

    b1 = weighted_norm(field, NormParams(norms.sigma4, norms.M, "time_bracket"), t) ** 2
    b3 = weighted_norm(
        field, NormParams(norms.sigma3, norms.M, "k_power", norms.delta), t
    ) ** 2

    hbar = getattr(field, "hbar", 0.0)
    hk_sq = 1.0 + (hbar * kn) ** 2
    br_sq = 1.0 + kn[None, :] ** 2 * (1.0 + times[:, None] ** 2)
    amp_sq = np.abs(rows) ** 2
    f2 = np.sum(hk_sq[None, :] * kn[None, :] * br_sq**norms.sigma4 * amp_sq, axis=1)
    b2 = float(_trapz(f2 * cell, times))
    f4 = np.max(
        np.sqrt(kn[None, :]) * br_sq ** (norms.sigma2 / 2.0) * np.abs(rows), axis=1
    )
    b4 = float(_trapz(f4**2, times))

    base_sq, _ = _bracket_sq(field, t, "plain", norms.delta)
    b5 = float(
        np.max(base_sq**norms.sigma1 * (field.values.real**2 + field.values.imag**2))
    )
    return {"t": float(t), "b1": b1, "b2": b2, "b3": b3, "b4": b4, "b5": b5}


@dataclass
class DecayFit:
    """Least-squares decay read of a trace against a bracket weight."""

    exponent: float
    residual: float
    n_used: int


def decay_fit(trace, weight="kt_bracket", floor=1e-12):
    """Fit |values| ~ bracket^(-exponent) on the usable part of a trace.

    The first 10% of samples are treated as transient and skipped; samples
    with |value| <= floor are discarded.  Needs at least 10 usable points,
    else InsufficientDataError.
    """
    times = np.asarray(trace.times, dtype=float)
    vals = np.abs(np.asarray(trace.values))
    if weight == "kt_bracket":
        kn = float(np.linalg.norm(trace.k))
        x = np.sqrt(1.0 + kn**2 + (kn * times) ** 2)
    elif weight == "t_power":
        x = np.sqrt(1.0 + times**2)
    else:
        raise DomainError("unknown weight %r" % (weight,))
    skip = int(np.ceil(0.1 * times.size))
    x, vals = x[skip:], vals[skip:]
    usable = vals > floor
    if int(np.count_nonzero(usable)) < 10:
        raise InsufficientDataError(
            "only %d usable samples above %g" % (int(np.count_nonzero(usable)), floor)
        )
    slope, _, resid = fit_loglog(x[usable], vals[usable])
    return DecayFit(exponent=-slope, residual=resid, n_used=int(np.count_nonzero(usable)))


def sup_decay_exponent(values, brackets, floor=1e-12, threshold=1.05):
    """Largest s with |values| <= max|values| * bracket^(-s) on the samples.

    A sampled sup certificate: the returned exponent makes the bound an
    equality at the binding sample and a strict bound everywhere else.
    Samples with bracket <= threshold or |value| <= floor are ignored.
    """
    vals = np.abs(np.asarray(values, dtype=complex)).reshape(-1)
    br = np.asarray(brackets, dtype=float).reshape(-1)
    if vals.shape != br.shape:
        raise DomainError("values and brackets must have the same length")
    top = float(np.max(vals)) if vals.size else 0.0
    mask = (br > threshold) & (vals > floor)
    if not np.any(mask):
        raise InsufficientDataError("no samples beyond the bracket threshold")
    ratios = np.log(top / vals[mask]) / np.log(br[mask])
    return float(np.min(ratios))


def physical_lp_density(values, k_vectors, dk, p, n, t, sigma_fit=None):
    """Hausdorff-Young upper bound for the weighted physical-space density.

    Computes (sum_k <k,kt>^(p' n) |rho_hat|^p' dk^d)^(1/p') with
    p' = p/(p-1); p may be inf (then p' = 1).  This majorizes
    the L^p norm of the n-fold mixing-derivative of the density.  When
    sigma_fit is supplied and n >= sigma_fit - d(1-1/p) the bound carries
    no decay information and a warning is emitted.
    """
    values = np.asarray(values, dtype=complex).reshape(-1)
    kv = np.asarray(k_vectors, dtype=float)
    if kv.ndim != 2 or kv.shape[0] != values.size:
        raise DomainError("k_vectors must be (n_modes, d) matching values")
    d = kv.shape[1]
    if not (p == np.inf or p >= 2):
        raise DomainError("p must be in [2, inf]")
    if n < 0:
        raise DomainError("n must be nonnegative")
    pprime = 1.0 if p == np.inf else p / (p - 1.0)
    if sigma_fit is not None:
        slack = sigma_fit - d * (1.0 - (0.0 if p == np.inf else 1.0 / p))
        if n >= slack:
            warnings.warn(
                "weight order n=%g at or beyond the decay budget %g; "
                "the bound is not meaningful" % (n, slack),
                stacklevel=2,
            )
    kn = np.linalg.norm(kv, axis=1)
    br = np.sqrt(1.0 + kn**2 * (1.0 + t**2))
    total = np.sum((br**n * np.abs(values)) ** pprime) * dk**d
    return float(total ** (1.0 / pprime))
