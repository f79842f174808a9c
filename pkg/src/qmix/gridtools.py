"""Quadrature panels, cubic interpolation weights, and symmetric axes.

Small numerical helpers shared by the stability scans, the Volterra/Green
solvers, and the Wigner grids.
"""

import numpy as np

from .errors import ConfigError

_GL_CACHE = {}


def gauss_panels(edges, order=16):
    """Composite Gauss-Legendre nodes and weights.

    Parameters
    ----------
    edges : array_like, shape (m+1,)
        Increasing panel boundaries.
    order : int
        Nodes per panel.

    Returns
    -------
    nodes, weights : ndarray, shape (m*order,)
    """
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2:
        raise ValueError("need at least one panel")
    if order not in _GL_CACHE:
        _GL_CACHE[order] = np.polynomial.legendre.leggauss(order)
    x, w = _GL_CACHE[order]
    a = edges[:-1][:, None]
    b = edges[1:][:, None]
    half = 0.5 * (b - a)
    nodes = (0.5 * (a + b) + half * x[None, :]).ravel()
    weights = (half * w[None, :]).ravel()
    return nodes, weights


def panel_edges(a, b, width):
    """Panel boundaries covering [a, b] with panels no wider than `width`."""
    if not b > a:
        raise ValueError("empty interval")
    n = max(1, int(np.ceil((b - a) / width)))
    return np.linspace(a, b, n + 1)


def cubic_weights(f):
    """Four-point Lagrange weights for offset f in [0, 1] past node 0.

    The stencil sits at positions (-1, 0, 1, 2) in units of the grid
    spacing; the returned weights interpolate at position f.  Accepts
    scalars or arrays (weights land on the last axis).
    """
    f = np.asarray(f, dtype=float)
    fm = f - 1.0
    fp = f + 1.0
    f2 = f - 2.0
    w = np.stack(
        [
            -f * fm * f2 / 6.0,
            fp * fm * f2 / 2.0,
            -f * fp * f2 / 2.0,
            f * fp * fm / 6.0,
        ],
        axis=-1,
    )
    return w


def shifted(values, axis, offset):
    """values shifted by offset along axis, vacated cells filled with 0.

    Index semantics: shifted(values, axis, off)[i] == values[i + off]
    wherever i + off is in range.
    """
    if offset == 0:
        return values
    out = np.zeros_like(values)
    src = [slice(None)] * values.ndim
    dst = [slice(None)] * values.ndim
    if offset > 0:
        src[axis] = slice(offset, None)
        dst[axis] = slice(None, -offset)
    else:
        src[axis] = slice(None, offset)
        dst[axis] = slice(-offset, None)
    out[tuple(dst)] = values[tuple(src)]
    return out


def symmetric_axis(extent, step):
    """Uniform axis step*(-n..n) with n = extent/step; extent must be a multiple."""
    n = int(round(extent / step))
    if n < 1 or abs(n * step - extent) > 1e-9 * max(1.0, extent):
        raise ConfigError(
            "axis extent %g is not a positive integer multiple of step %g"
            % (extent, step)
        )
    return step * np.arange(-n, n + 1)


def fit_loglog(x, y):
    """Least-squares slope/intercept of log y against log x.

    Returns (slope, intercept, rms_residual).  Inputs must be positive.
    """
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    coeff = np.polyfit(lx, ly, 1)
    resid = ly - np.polyval(coeff, lx)
    return coeff[0], coeff[1], float(np.sqrt(np.mean(resid**2)))
