"""Self-consistent evolution of the transformed perturbation field.

The state is the Fourier-Wigner transform of the conjugated perturbation,
sampled on a tensor grid in (k, eta).  Free streaming is already removed
by the conjugation, so the grid field evolves only through the mean-field
coupling: a rank-one linear term driven by the instantaneous density and
a mode-coupling sum over interaction wavevectors.  The density itself is
the field read along the moving slice eta = k t.
"""

import itertools
import warnings

import numpy as np
from dataclasses import dataclass, field as dc_field

from . import _ell_kernels
from .diagnostics import (
    DensityHistory,
    MonitorSeries,
    NormParams,
    NormSet,
    bootstrap_monitors,
    default_norm_set,
    sup_decay_exponent,
    weighted_norm,
)
from .errors import (
    ConfigError,
    ConsistencyError,
    DomainError,
    InstabilityError,
    InsufficientDataError,
    NumericalError,
)
from .gridtools import cubic_weights, shifted, symmetric_axis
from .kernels import TWO_PI
from .penrose import penrose_margin

_TINY = 1e-300


class WignerField:
    """Complex field samples on a symmetric tensor grid in (k, eta).

    Axes include 0 and are uniform with an odd point count; values carry
    the conjugate-mirror symmetry values(-k,-eta) = conj(values(k,eta))
    that encodes reality of the underlying phase-space function.
    """

    def __init__(self, d, k_axis, eta_axis, values, hbar, time=0.0, validate=True):
        if d not in (1, 2, 3):
            raise DomainError("d must be 1, 2 or 3")
        if not 0.0 <= hbar <= 1.0:
            raise DomainError("hbar must lie in [0, 1]")
        self.d = int(d)
        self.hbar = float(hbar)
        self.time = float(time)
        k_axis = np.asarray(k_axis, dtype=float)
        eta_axis = np.asarray(eta_axis, dtype=float)
        for name, ax in (("k", k_axis), ("eta", eta_axis)):
            if ax.ndim != 1 or ax.size < 5 or ax.size % 2 == 0:
                raise DomainError("%s axis needs an odd count of at least 5" % name)
            steps = np.diff(ax)
            if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * steps[0]:
                raise DomainError("%s axis must increase uniformly" % name)
            if np.max(np.abs(ax + ax[::-1])) > 1e-9 * ax[-1]:
                raise DomainError("%s axis must be symmetric about 0" % name)
        self.k_axis = k_axis
        self.eta_axis = eta_axis
        self.dk = float(k_axis[1] - k_axis[0])
        self.deta = float(eta_axis[1] - eta_axis[0])
        values = np.ascontiguousarray(values, dtype=complex)
        if not values.flags.writeable:
            values = values.copy()
        shape = (k_axis.size,) * d + (eta_axis.size,) * d
        if values.shape != shape:
            raise DomainError(
                "values shape %r does not match grid %r" % (values.shape, shape)
            )
        self.values = values
        if validate:
            defect = self.symmetry_defect()
            if defect > 1e-10:
                raise DomainError(
                    "conjugate-mirror defect %.3e exceeds 1e-10" % defect
                )

    @property
    def k_axes(self):
        return [self.k_axis] * self.d

    @property
    def eta_axes(self):
        return [self.eta_axis] * self.d

    @classmethod
    def from_profile(cls, d, k_max, dk, eta_max, deta, fn, hbar, time=0.0):
        """Sample fn on the grid; fn receives sparse meshgrid coordinates."""
        k_axis = symmetric_axis(k_max, dk)
        eta_axis = symmetric_axis(eta_max, deta)
        grids = np.meshgrid(
            *([k_axis] * d + [eta_axis] * d), indexing="ij", sparse=True
        )
        shape = (k_axis.size,) * d + (eta_axis.size,) * d
        values = np.asarray(fn(*grids), dtype=complex)
        values = np.ascontiguousarray(np.broadcast_to(values, shape))
        return cls(d, k_axis, eta_axis, values, hbar, time)

    def _mirror(self, values=None):
        v = self.values if values is None else values
        return np.conj(v[(slice(None, None, -1),) * v.ndim])

    def symmetry_defect(self):
        scale = float(np.max(np.abs(self.values)))
        if scale == 0.0:
            return 0.0
        return float(np.max(np.abs(self.values - self._mirror()))) / scale

    def symmetrized(self):
        return self.copy_with(values=0.5 * (self.values + self._mirror()))

    def boundary_shell_ratio(self):
        """Largest |value| on the outermost grid shell over the global max."""
        scale = float(np.max(np.abs(self.values)))
        if scale == 0.0:
            return 0.0
        shell = 0.0
        for ax in range(self.values.ndim):
            shell = max(shell, float(np.max(np.abs(np.take(self.values, 0, ax)))))
            shell = max(shell, float(np.max(np.abs(np.take(self.values, -1, ax)))))
        return shell / scale

    def trace_mode(self):
        center = (self.k_axis.size // 2,) * self.d + (self.eta_axis.size // 2,) * self.d
        return complex(self.values[center])

    def copy_with(self, values=None, time=None, validate=False):
        return WignerField(
            self.d,
            self.k_axis,
            self.eta_axis,
            self.values.copy() if values is None else values,
            self.hbar,
            self.time if time is None else time,
            validate=validate,
        )


def _eta_stencil(axis, positions):
    """Clamped 4-tap stencil data for off-grid reads along one eta axis.

    Returns (base index, weights, inside mask); reads outside the axis
    range are flagged, their weights zeroed.
    """
    n = axis.size
    step = axis[1] - axis[0]
    p = (np.asarray(positions, dtype=float) - axis[0]) / step
    inside = (p >= -1e-9) & (p <= n - 1 + 1e-9)
    j = np.clip(np.floor(p).astype(int), 1, n - 3)
    wts = cubic_weights(p - j)
    wts[~inside] = 0.0
    return j, wts, inside


def density_slice(field, t=None):
    """Field values read along eta = k t for every grid wavevector.

    Returns (k_vectors, values, dropped): flattened C-order arrays over
    the k grid and the multi-indices of modes whose slice point left the
    eta box (their value is reported as 0).
    """
    if t is None:
        t = field.time
    d = field.d
    nk = field.k_axis.size
    j, wts, inside = _eta_stencil(field.eta_axis, field.k_axis * t)
    out = np.zeros((nk,) * d, dtype=complex)
    idx = [np.arange(nk).reshape([-1 if a == i else 1 for a in range(d)])
           for i in range(d)]
    for taps in itertools.product(range(4), repeat=d):
        gather = [j[idx[i]] - 1 + taps[i] for i in range(d)]
        weight = 1.0
        for i in range(d):
            weight = weight * wts[:, taps[i]][idx[i]]
        out += weight * field.values[tuple(idx) + tuple(gather)]
    keep = inside[idx[0]]
    for i in range(1, d):
        keep = keep & inside[idx[i]]
    out[~keep] = 0.0
    dropped = [tuple(m) for m in np.argwhere(~keep)]
    kv = np.stack(
        [np.broadcast_to(field.k_axis[idx[i]], (nk,) * d).reshape(-1)
         for i in range(d)],
        axis=1,
    )
    return kv, out.reshape(-1), dropped


def _slice_single(field, mode_index, t=None):
    """Field value at one grid wavevector and eta = k t; 0 once off-box."""
    if t is None:
        t = field.time
    d = field.d
    kvec = np.array([field.k_axis[mode_index[i]] for i in range(d)])
    j, wts, inside = _eta_stencil(field.eta_axis, kvec * t)
    if not np.all(inside):
        return 0.0 + 0.0j, True
    val = 0.0 + 0.0j
    for taps in itertools.product(range(4), repeat=d):
        weight = 1.0
        for i in range(d):
            weight *= wts[i, taps[i]]
        pos = tuple(mode_index) + tuple(j[i] - 1 + taps[i] for i in range(d))
        val += weight * field.values[pos]
    return complex(val), False


def _axis_block_shape(ndim, axis, size):
    shape = [1] * ndim
    shape[axis] = size
    return shape


def _fourier_table(profile, s_max, n=1025):
    s = np.linspace(0.0, s_max, n)
    return s, np.asarray(profile.fourier_radial(s), dtype=float)


def _linear_increment(field, interaction, profile, rho_grid, t):
    """Density-driven source term of the field equation on the full grid."""
    d = field.d
    hbar = field.hbar
    nk, ne = field.k_axis.size, field.eta_axis.size
    shape = (nk,) * d + (ne,) * d
    ndim = 2 * d

    knorm = np.zeros((nk,) * d)
    for i in range(d):
        knorm = knorm + np.reshape(field.k_axis**2, _axis_block_shape(d, i, nk))
    np.sqrt(knorm, out=knorm)
    what = np.asarray(interaction.hat_radial(knorm), dtype=float)
    cfac = 2.0 / hbar if hbar > 0 else 1.0
    coef = (-cfac / TWO_PI**d) * what * rho_grid

    # per-axis shift tables: S_i[j, e] = eta_e - k_j t
    stab = field.eta_axis[None, :] - field.k_axis[:, None] * t

    arg = np.zeros(shape)
    for i in range(d):
        block = field.k_axis[:, None] * stab
        bshape = [1] * ndim
        bshape[i] = nk
        bshape[d + i] = ne
        arg += block.reshape(bshape)
    if hbar > 0:
        arg *= 0.5 * hbar
        np.sin(arg, out=arg)

    if profile.kind == "gaussian":
        pref = profile.amplitude * TWO_PI ** (d / 2.0) * profile.beta**d
        for i in range(d):
            bshape = [1] * ndim
            bshape[i] = nk
            bshape[d + i] = ne
            arg *= np.exp(-0.5 * profile.beta**2 * stab**2).reshape(bshape)
        arg *= pref
    else:
        rsq = np.zeros(shape)
        for i in range(d):
            bshape = [1] * ndim
            bshape[i] = nk
            bshape[d + i] = ne
            rsq += (stab**2).reshape(bshape)
        np.sqrt(rsq, out=rsq)
        s_tab, g_tab = _fourier_table(profile, float(rsq.max()) + 1.0)
        arg *= np.interp(rsq, s_tab, g_tab)
        del rsq

    return arg * coef.reshape((nk,) * d + (1,) * d)


def _active_couplings(field, interaction, rho_flat, l_threshold):
    """Coupling coefficients and grid offsets of the retained modes."""
    d = field.d
    nk = field.k_axis.size
    hbar = field.hbar
    kv = np.stack(
        np.meshgrid(*([field.k_axis] * d), indexing="ij"), axis=-1
    ).reshape(-1, d)
    knorm = np.linalg.norm(kv, axis=1)
    cfac = 2.0 / hbar if hbar > 0 else 1.0
    coefs = (
        (-cfac / TWO_PI**d)
        * np.asarray(interaction.hat_radial(knorm), dtype=float)
        * rho_flat
        * field.dk**d
    )
    offsets = (
        np.stack(np.unravel_index(np.arange(nk**d), (nk,) * d), axis=1) - nk // 2
    )
    nonzero = np.any(offsets != 0, axis=1)
    mags = np.abs(coefs)
    top = float(mags[nonzero].max()) if np.any(nonzero) else 0.0
    keep = nonzero & (mags > l_threshold * top)
    return offsets[keep], kv[keep], coefs[keep], top


def _coupling_increment(field, interaction, rho_flat, t, l_threshold, row_threshold):
    """Mode-coupling sum: sum over retained l of coef * phase * shifted field."""
    d = field.d
    hbar = field.hbar
    nk, ne = field.k_axis.size, field.eta_axis.size
    out = np.zeros_like(field.values)
    offsets, lvecs, coefs, top = _active_couplings(
        field, interaction, rho_flat, l_threshold
    )
    if offsets.shape[0] == 0 or top == 0.0:
        return out, 0

    # eta resample data per mode and axis: constant-shift cubic taps
    sh = -lvecs * t / field.deta
    jsh = np.floor(sh).astype(np.int64)
    wts = cubic_weights(sh - jsh)  # (na, d, 4)
    # intersect with the mirrored window of the opposite shift so that
    # integer shifts truncate symmetrically and preserve the conjugate
    # mirror exactly (floor breaks the +-l pairing only at whole steps)
    jmr = np.floor(-sh).astype(np.int64)
    lo = np.clip(np.maximum(1 - jsh, 2 + jmr), 0, ne)
    hi = np.clip(np.minimum(ne - 2 - jsh, ne - 1 + jmr), 0, ne)
    alive = np.all(hi > lo, axis=1)
    offsets, lvecs, coefs = offsets[alive], lvecs[alive], coefs[alive]
    jsh, wts, lo, hi = jsh[alive], wts[alive], lo[alive], hi[alive]
    na = offsets.shape[0]
    if na == 0:
        return out, 0

    half_h = 0.5 * hbar
    quantum = 1 if hbar > 0 else 0
    if quantum:
        ue = half_h * lvecs[:, :, None] * field.eta_axis[None, None, :]
        se = np.sin(ue)
        ce = np.cos(ue)
        vk = half_h * t * lvecs[:, :, None] * field.k_axis[None, None, :]
    else:
        se = lvecs[:, :, None] * field.eta_axis[None, None, :]
        ce = np.zeros_like(se)
        vk = t * lvecs[:, :, None] * field.k_axis[None, None, :]

    rowmax = np.abs(field.values)
    for _ in range(d):
        rowmax = rowmax.max(axis=-1)
    row_floor = row_threshold * float(np.abs(coefs).max()) * float(rowmax.max())

    if d == 1 and _ell_kernels.HAVE_NUMBA:
        _ell_kernels.couple_1d(
            out, field.values, np.ascontiguousarray(rowmax),
            np.ascontiguousarray(offsets[:, 0]), np.ascontiguousarray(coefs),
            np.ascontiguousarray(jsh[:, 0]), np.ascontiguousarray(wts[:, 0]),
            np.ascontiguousarray(se[:, 0]), np.ascontiguousarray(ce[:, 0]),
            np.ascontiguousarray(vk[:, 0]),
            np.ascontiguousarray(lo[:, 0]), np.ascontiguousarray(hi[:, 0]),
            quantum, row_floor,
        )
    elif d == 2 and _ell_kernels.HAVE_NUMBA:
        _ell_kernels.couple_2d(
            out, field.values, np.ascontiguousarray(rowmax),
            np.ascontiguousarray(offsets[:, 0]), np.ascontiguousarray(offsets[:, 1]),
            np.ascontiguousarray(coefs),
            np.ascontiguousarray(jsh[:, 0]), np.ascontiguousarray(jsh[:, 1]),
            np.ascontiguousarray(wts[:, 0]), np.ascontiguousarray(wts[:, 1]),
            np.ascontiguousarray(se[:, 0]), np.ascontiguousarray(ce[:, 0]),
            np.ascontiguousarray(se[:, 1]), np.ascontiguousarray(ce[:, 1]),
            np.ascontiguousarray(vk[:, 0]), np.ascontiguousarray(vk[:, 1]),
            np.ascontiguousarray(lo[:, 0]), np.ascontiguousarray(hi[:, 0]),
            np.ascontiguousarray(lo[:, 1]), np.ascontiguousarray(hi[:, 1]),
            quantum, row_floor,
        )
    else:
        _couple_numpy(
            out, field, offsets, lvecs, coefs, jsh, wts, lo, hi, t, half_h, quantum
        )
    return out, na


def _couple_numpy(out, field, offsets, lvecs, coefs, jsh, wts, lo, hi, t,
                  half_h, quantum):
    """Reference whole-array path for the coupling sum (any dimension)."""
    d = field.d
    nk, ne = field.k_axis.size, field.eta_axis.size
    ndim = 2 * d
    for a in range(offsets.shape[0]):
        sw = field.values
        for i in range(d):
            sw = shifted(sw, i, -int(offsets[a, i]))
        for i in range(d):
            acc = None
            for tap in range(4):
                term = wts[a, i, tap] * shifted(sw, d + i, int(jsh[a, i]) - 1 + tap)
                acc = term if acc is None else acc + term
            sw = acc
            sl = [slice(None)] * ndim
            if lo[a, i] > 0:
                sl[d + i] = slice(0, int(lo[a, i]))
                sw[tuple(sl)] = 0.0
            if hi[a, i] < ne:
                sl[d + i] = slice(int(hi[a, i]), None)
                sw[tuple(sl)] = 0.0
        phase = np.zeros((1,) * ndim)
        for i in range(d):
            phase = phase + np.reshape(
                lvecs[a, i] * field.eta_axis, _axis_block_shape(ndim, d + i, ne)
            )
            phase = phase - np.reshape(
                t * lvecs[a, i] * field.k_axis, _axis_block_shape(ndim, i, nk)
            )
        if quantum:
            phase = np.sin(half_h * phase)
        out += coefs[a] * phase * sw


def rhs(field, interaction, profile, l_threshold=1e-12, row_threshold=1e-14,
        include_nonlinear=True, return_density=False):
    """Time derivative of the field under the self-consistent coupling.

    The density is resliced from the field itself (the system carries no
    history in these variables).  Out-of-box shifted reads are zero; the
    l sum runs over grid modes whose coupling coefficient is above
    l_threshold relative to the strongest one.
    """
    t = field.time
    if interaction.is_zero:
        zero = np.zeros_like(field.values)
        if return_density:
            kv, rho_flat, dropped = density_slice(field, t)
            return zero, (kv, rho_flat, dropped)
        return zero
    kv, rho_flat, dropped = density_slice(field, t)
    rho_grid = rho_flat.reshape((field.k_axis.size,) * field.d)
    total = _linear_increment(field, interaction, profile, rho_grid, t)
    if include_nonlinear:
        coupling, _ = _coupling_increment(
            field, interaction, rho_flat, t, l_threshold, row_threshold
        )
        total += coupling
    bad = ~np.isfinite(total)
    if np.any(bad):
        loc = np.unravel_index(int(np.argmax(bad)), total.shape)
        raise NumericalError("non-finite field increment at grid index %r" % (loc,))
    if return_density:
        return total, (kv, rho_flat, dropped)
    return total


def step_rk4(field, dt, interaction, profile, l_threshold=1e-12,
             row_threshold=1e-14, defect_tol=1e-8):
    """Classical four-stage Runge-Kutta step; re-symmetrizes afterwards."""
    if dt <= 0:
        raise DomainError("dt must be positive")
    opts = dict(l_threshold=l_threshold, row_threshold=row_threshold)
    f0 = field.values
    t = field.time
    k1 = rhs(field, interaction, profile, **opts)
    k2 = rhs(field.copy_with(values=f0 + 0.5 * dt * k1, time=t + 0.5 * dt),
             interaction, profile, **opts)
    k3 = rhs(field.copy_with(values=f0 + 0.5 * dt * k2, time=t + 0.5 * dt),
             interaction, profile, **opts)
    k4 = rhs(field.copy_with(values=f0 + dt * k3, time=t + dt),
             interaction, profile, **opts)
    new = f0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    mirror = np.conj(new[(slice(None, None, -1),) * new.ndim])
    scale = float(np.max(np.abs(new)))
    if scale > 0.0:
        defect = float(np.max(np.abs(new - mirror))) / scale
        if defect > defect_tol:
            raise ConsistencyError(
                "conjugate-mirror defect %.3e after step exceeds %g"
                % (defect, defect_tol)
            )
    new = 0.5 * (new + mirror)
    return field.copy_with(values=new, time=t + dt)


@dataclass
class SimConfig:
    """Full description of one nonlinear evolution run."""

    d: int
    hbar: float
    epsilon: float
    interaction: object
    profile: object
    k_max: float
    dk: float
    eta_max: float
    deta: float
    T: float
    dt: float | None = None
    output_interval: float | None = None
    snapshot_interval: float | None = None
    norms: NormSet | None = None
    traced_modes: tuple = ()
    l_threshold: float = 1e-12
    row_threshold: float = 1e-14
    skip_stability_check: bool = False
    abort_factor: float = 1e6
    max_snapshots: int = 64
    bootstrap_constants: dict | None = None
    data_k_rate: float = 1.0
    data_eta_rate: float = 1.0

    def __post_init__(self):
        self.warnings = []
        if self.d not in (1, 2, 3):
            raise ConfigError("d must be 1, 2 or 3")
        if not 0.0 <= self.hbar <= 1.0:
            raise DomainError("hbar must lie in [0, 1]")
        if self.epsilon < 0:
            raise ConfigError("epsilon must be nonnegative")
        if self.epsilon > 0.1:
            self.warnings.append(
                "epsilon = %g is large for a perturbative run" % self.epsilon
            )
        if self.interaction.d != self.d or self.profile.d != self.d:
            raise ConfigError("interaction/profile dimension mismatch")
        for name, extent, step in (
            ("k", self.k_max, self.dk),
            ("eta", self.eta_max, self.deta),
        ):
            if step <= 0 or extent <= 0:
                raise ConfigError("%s grid parameters must be positive" % name)
            n = round(extent / step)
            if n < 2 or abs(n * step - extent) > 1e-9 * extent:
                raise ConfigError(
                    "%s_max must be an integer multiple (>= 2) of the step" % name
                )
        if self.T <= 0:
            raise ConfigError("T must be positive")
        if self.eta_max + 1e-9 * self.eta_max < self.k_max * self.T:
            raise ConfigError(
                "eta_max = %g cannot cover the slice range k_max*T = %g"
                % (self.eta_max, self.k_max * self.T)
            )
        if self.dt is not None and not 0 < self.dt <= self.T:
            raise ConfigError("dt must lie in (0, T]")
        if self.output_interval is None:
            self.output_interval = self.T / 16.0
        if self.snapshot_interval is None:
            self.snapshot_interval = self.T / 8.0
        if self.output_interval <= 0 or self.snapshot_interval <= 0:
            raise ConfigError("output intervals must be positive")
        if self.norms is None:
            self.norms = default_norm_set(self.d)
        self.warnings.extend(self.norms.gap_violations(self.d))
        modes = []
        for kvec in self.traced_modes:
            kvec = np.atleast_1d(np.asarray(kvec, dtype=float))
            if kvec.shape != (self.d,):
                raise ConfigError("traced mode %r is not a %d-vector" % (kvec, self.d))
            idx = np.round(kvec / self.dk).astype(int)
            if np.max(np.abs(idx * self.dk - kvec)) > 1e-9 * max(1.0, self.k_max):
                raise ConfigError("traced mode %r is not on the k grid" % (kvec,))
            if np.max(np.abs(idx)) > round(self.k_max / self.dk):
                raise ConfigError("traced mode %r is outside the k box" % (kvec,))
            modes.append(tuple(int(i) + round(self.k_max / self.dk) for i in idx))
        self._traced_indices = modes

    def grid_shape(self):
        nk = 2 * round(self.k_max / self.dk) + 1
        ne = 2 * round(self.eta_max / self.deta) + 1
        return (nk,) * self.d + (ne,) * self.d


@dataclass
class ScatteringResult:
    """Late-time limit read off the snapshot sequence."""

    q_inf: WignerField
    rate_exponent: float
    cauchy_residuals: np.ndarray
    times: np.ndarray
    nonincreasing: bool
    n_used: int
    transient_time: float


def _cauchy_rate(times, residuals, t_ref):
    """Fit log residual ~ log(<t>^-p - <t_ref>^-p) over a grid of p.

    Residuals measured against a finite-time reference vanish at t_ref, so
    a plain power-law fit is biased steep near the end of the run.  The
    one-parameter model with the reference offset removes that bias and
    reduces to the plain fit as t_ref grows.
    """
    tb = np.hypot(1.0, times)
    rb = np.hypot(1.0, t_ref)
    log_r = np.log(residuals)
    best_p = float("nan")
    best_sse = np.inf
    for p in np.linspace(0.05, 8.0, 1592):
        model = tb ** (-p) - rb ** (-p)
        if np.any(model <= 0.0):
            continue
        log_m = np.log(model)
        offset = np.mean(log_r - log_m)
        sse = float(np.sum((log_r - log_m - offset) ** 2))
        if sse < best_sse:
            best_sse = sse
            best_p = p
    return best_p


def scattering_profile(snapshots, d, norms=None, transient_fraction=0.2):
    """Convergence diagnostics of the field toward its final snapshot.

    Residuals are surrogate-norm distances of each post-transient snapshot
    to the last one; the rate is a log-log fit against <t> with the
    finite-reference offset included in the model.  Requires at least 6
    snapshots past the transient window.
    """
    if norms is None:
        norms = default_norm_set(d)
    snaps = sorted(snapshots, key=lambda f: f.time)
    if len(snaps) < 2:
        raise InsufficientDataError("need at least two snapshots")
    t_last = snaps[-1].time
    cutoff = transient_fraction * t_last
    past = [f for f in snaps if f.time > cutoff + 1e-12]
    if len(past) < 6:
        raise InsufficientDataError(
            "only %d snapshots past the transient window (need 6)" % len(past)
        )
    q_inf = past[-1]
    params = NormParams(norms.sigma0, norms.M, "plain")
    times = []
    residuals = []
    for f in past[:-1]:
        diff = f.copy_with(values=f.values - q_inf.values)
        residuals.append(weighted_norm(diff, params, t=f.time))
        times.append(f.time)
    times = np.asarray(times)
    residuals = np.asarray(residuals)
    nonincreasing = bool(
        np.all(residuals[1:] <= residuals[:-1] * (1.0 + 1e-9) + _TINY)
    )
    positive = residuals > 0
    if np.count_nonzero(positive) >= 3:
        rate = _cauchy_rate(times[positive], residuals[positive], q_inf.time)
    else:
        rate = float("nan")
    return ScatteringResult(
        q_inf=q_inf,
        rate_exponent=float(rate),
        cauchy_residuals=residuals,
        times=times,
        nonincreasing=nonincreasing,
        n_used=len(past),
        transient_time=float(cutoff),
    )


@dataclass
class SimOutput:
    """Everything a run produces, including partial results on abort."""

    config: SimConfig
    times: np.ndarray
    traced: dict
    history: DensityHistory
    monitors: MonitorSeries
    snapshots: list
    scattering: ScatteringResult | None
    warnings: list
    valid: bool
    abort_reason: str | None
    stability_margin: float | None
    dt_used: float


def _initial_field(config, W0):
    if isinstance(W0, WignerField):
        base = W0
        if (
            base.d != config.d
            or base.k_axis.size != config.grid_shape()[0]
            or abs(base.dk - config.dk) > 1e-12
            or abs(base.deta - config.deta) > 1e-12
        ):
            raise ConfigError("initial field grid does not match the config")
        values = base.values * config.epsilon
        return WignerField(
            config.d, base.k_axis, base.eta_axis, values, config.hbar, 0.0,
            validate=False,
        ).symmetrized()
    if W0 is None:
        ak, ae = config.data_k_rate, config.data_eta_rate

        def fn(*grids):
            ksq = sum(g**2 for g in grids[: config.d])
            esq = sum(g**2 for g in grids[config.d:])
            return np.exp(-(ak * ksq + ae * esq))

    elif callable(W0):
        fn = W0
    elif hasattr(W0, "evaluate"):
        def fn(*grids):
            shape = np.broadcast_shapes(*(g.shape for g in grids))
            kpts = np.stack(
                [np.broadcast_to(g, shape) for g in grids[: config.d]], axis=-1
            )
            epts = np.stack(
                [np.broadcast_to(g, shape) for g in grids[config.d:]], axis=-1
            )
            return W0.evaluate(kpts, epts)

    else:
        raise ConfigError("unsupported initial data type %r" % type(W0).__name__)
    field = WignerField.from_profile(
        config.d, config.k_max, config.dk, config.eta_max, config.deta,
        fn, config.hbar, 0.0,
    )
    field.values *= config.epsilon
    if field.symmetry_defect() > 1e-8:
        raise DomainError("initial data violates conjugate-mirror symmetry")
    return field.symmetrized()


def _calibrate_dt(config, field0):
    """Halve the default step until the t=min(1,T) field settles to 1e-6."""
    guess = 0.5 * config.deta / (
        config.k_max * (1.0 + config.interaction.hat_sup() * config.epsilon)
    )
    t1 = min(1.0, config.T)
    n = max(1, int(np.ceil(t1 / guess)))

    def march(steps):
        f = field0.copy_with()
        h = t1 / steps
        for _ in range(steps):
            f = step_rk4(
                f, h, config.interaction, config.profile,
                config.l_threshold, config.row_threshold,
            )
        return f.values

    prev = march(n)
    for _ in range(5):
        cur = march(2 * n)
        scale = max(float(np.max(np.abs(cur))), _TINY)
        if float(np.max(np.abs(prev - cur))) / scale < 1e-6:
            return t1 / n
        n *= 2
        prev = cur
    raise NumericalError("time step calibration did not settle at t=%g" % t1)


def simulate(config, W0=None):
    """March the field to T, recording traces, monitors and snapshots.

    The density at every traced mode is recorded each step; the full
    density grid, bootstrap monitors and scattering snapshots follow the
    configured output strides.  An unstable blowup (any monitored norm
    beyond abort_factor times its initial size) aborts with partial
    output flagged invalid.
    """
    run_warnings = list(config.warnings)
    field = _initial_field(config, W0)

    margin = None
    if (
        not config.skip_stability_check
        and not config.interaction.is_zero
        and config.epsilon > 0
    ):
        report = penrose_margin(
            config.interaction, config.profile,
            hbar_set=(config.hbar,),
            k_max=config.k_max * np.sqrt(config.d),
            n_k=8, n_tau=65,
        )
        if report.verdict != "stable":
            raise InstabilityError(
                "stability pre-check failed (margin %.3e, verdict %s)"
                % (report.kappa, report.verdict)
            )
        margin = report.kappa

    dt = config.dt if config.dt is not None else _calibrate_dt(config, field)
    n_steps = max(1, int(round(config.T / dt)))
    dt_eff = config.T / n_steps
    if abs(dt_eff - dt) > 1e-9 * dt:
        run_warnings.append(
            "dt adjusted from %g to %g to divide T evenly" % (dt, dt_eff)
        )

    kv, _, _ = density_slice(field, 0.0)
    history = DensityHistory(k_vectors=kv, dk=config.dk)
    thresholds = None
    if config.bootstrap_constants:
        thresholds = {
            name: 4.0 * K * config.epsilon**2
            for name, K in config.bootstrap_constants.items()
        }
    monitors = MonitorSeries(thresholds=thresholds)
    traced = {idx: [] for idx in config._traced_indices}
    times = [0.0]
    snapshots = []
    dropped_warned = False
    shell_warned = False
    valid = True
    abort_reason = None

    def record_traced(t):
        for idx in traced:
            val, _ = _slice_single(field, idx, t)
            traced[idx].append(val)

    def record_output(t):
        nonlocal dropped_warned, shell_warned
        kv_t, rho_t, dropped = density_slice(field, t)
        history.append(t, rho_t)
        monitors.append(bootstrap_monitors(field, history, config.norms, t))
        if dropped and not dropped_warned:
            run_warnings.append(
                "density slice left the eta box for %d modes from t=%g"
                % (len(dropped), t)
            )
            dropped_warned = True
        ratio = field.boundary_shell_ratio()
        if ratio > 1e-6 and not shell_warned:
            run_warnings.append(
                "boundary shell magnitude %.2e of the field maximum at t=%g; "
                "grid truncation is suspect" % (ratio, t)
            )
            shell_warned = True

    record_traced(0.0)
    record_output(0.0)
    snapshots.append(field.copy_with())
    initial_sup = max(float(np.max(np.abs(field.values))), _TINY)
    initial_monitors = {
        name: max(vals[0], _TINY)
        for name, vals in monitors.as_arrays().items()
        if name != "times"
    }

    next_output = config.output_interval
    next_snap = config.snapshot_interval
    for step in range(1, n_steps + 1):
        field = step_rk4(
            field, dt_eff, config.interaction, config.profile,
            config.l_threshold, config.row_threshold,
        )
        t = step * dt_eff
        field.time = t
        times.append(t)
        record_traced(t)
        sup = float(np.max(np.abs(field.values)))
        if not np.isfinite(sup) or sup > config.abort_factor * initial_sup:
            valid = False
            abort_reason = "field magnitude %.3e at t=%g exceeds %g x initial" % (
                sup, t, config.abort_factor,
            )
            break
        if t >= next_output - 1e-9 * config.T or step == n_steps:
            record_output(t)
            while next_output <= t + 1e-9 * config.T:
                next_output += config.output_interval
            rows = monitors.as_arrays()
            # b2/b4 are cumulative integrals (start at 0); the blowup guard
            # applies to the instantaneous norms only
            blown = [
                name
                for name in ("b1", "b3", "b5")
                if rows[name][-1] > config.abort_factor * initial_monitors[name]
            ]
            if blown:
                valid = False
                abort_reason = "monitored norms %s exceeded %g x initial at t=%g" % (
                    ", ".join(blown), config.abort_factor, t,
                )
                break
        if t >= next_snap - 1e-9 * config.T or step == n_steps:
            if len(snapshots) < config.max_snapshots:
                snapshots.append(field.copy_with())
            elif not any("snapshot cap" in w for w in run_warnings):
                run_warnings.append(
                    "snapshot cap %d reached; later snapshots dropped"
                    % config.max_snapshots
                )
            while next_snap <= t + 1e-9 * config.T:
                next_snap += config.snapshot_interval

    scattering = None
    if valid:
        try:
            scattering = scattering_profile(snapshots, config.d, config.norms)
        except InsufficientDataError as exc:
            run_warnings.append("scattering profile unavailable: %s" % exc)

    return SimOutput(
        config=config,
        times=np.asarray(times),
        traced={idx: np.asarray(vals) for idx, vals in traced.items()},
        history=history,
        monitors=monitors,
        snapshots=snapshots,
        scattering=scattering,
        warnings=run_warnings,
        valid=valid,
        abort_reason=abort_reason,
        stability_margin=margin,
        dt_used=dt_eff,
    )


def free_decay_certificate(field, times, threshold=1.05, floor_ratio=1e-10):
    """Sup-certificate decay exponent of the freely transported density.

    Free transport leaves the field constant in these variables, so the
    free density is the initial field read along eta = k t.  Pools the
    slice samples over the given times and returns the largest s with
    |rho(t,k)| <= sup |rho| <k,kt>^(-s) across all of them.
    """
    vals = []
    brackets = []
    for t in times:
        kv, rho, _ = density_slice(field, t)
        kn = np.linalg.norm(kv, axis=1)
        vals.append(rho)
        brackets.append(np.sqrt(1.0 + kn**2 * (1.0 + t**2)))
    vals = np.concatenate(vals)
    brackets = np.concatenate(brackets)
    floor = floor_ratio * float(np.max(np.abs(vals)))
    return sup_decay_exponent(vals, brackets, floor=floor, threshold=threshold)
