"""Batch driver: JSON run configs in, CSV/JSON artifacts out.

Exit codes: 0 success (an unstable verdict is still a successful scan),
2 configuration error, 3 numerical failure (partial outputs retained),
4 stability pre-check refusal (bypass with --force).
"""

import hashlib
import json
import os
import sys

import click
import numpy as np

from .diagnostics import NormParams, decay_fit, default_norm_set, weighted_norm
from .errors import (
    ConfigError,
    ConsistencyError,
    DomainError,
    InstabilityError,
    InsufficientDataError,
    NumericalError,
    RangeError,
)
from .gridtools import fit_loglog
from .kernels import InteractionKernel, VelocityProfile
from .linear import (
    BracketWigner,
    GaussianWigner,
    linear_density_green,
    linear_density_volterra,
)
from .nonlinear import SimConfig, simulate
from .penrose import penrose_margin


def _fail(path, message):
    raise ConfigError("%s: %s" % (path or "config", message))


def _require_keys(block, allowed, path):
    if not isinstance(block, dict):
        _fail(path, "expected an object")
    for key in block:
        if key not in allowed:
            _fail("%s.%s" % (path, key) if path else key, "unknown key")


def _number(block, key, path, default=None, lo=None, hi=None, integer=False):
    # an explicit null means the same as leaving the key out
    if key not in block or block[key] is None:
        return default
    val = block[key]
    where = "%s.%s" % (path, key) if path else key
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        _fail(where, "expected a number")
    if integer and int(val) != val:
        _fail(where, "expected an integer")
    if lo is not None and val < lo:
        _fail(where, "must be >= %g" % lo)
    if hi is not None and val > hi:
        _fail(where, "must be <= %g" % hi)
    return int(val) if integer else float(val)


def _flag(block, key, path, default=False):
    if key not in block:
        return default
    if not isinstance(block[key], bool):
        _fail("%s.%s" % (path, key), "expected true or false")
    return block[key]


_TOP_KEYS = frozenset(
    [
        "schema",
        "d",
        "hbar",
        "interaction",
        "profile",
        "data",
        "penrose",
        "linear",
        "simulate",
        "traced_modes",
        "output_dir",
        "seed",
        "hbar_sweep",
    ]
)


def load_config(path):
    """Parse and validate a run configuration file."""
    try:
        with open(path) as fh:
            raw = fh.read()
        cfg = json.loads(raw)
    except OSError as exc:
        raise ConfigError("cannot read %s: %s" % (path, exc))
    except ValueError as exc:
        raise ConfigError("%s is not valid JSON: %s" % (path, exc))
    _require_keys(cfg, _TOP_KEYS, "")
    if cfg.get("schema") != 1:
        _fail("schema", "must be 1")
    d = _number(cfg, "d", "", integer=True, lo=1, hi=3)
    if d is None:
        _fail("d", "is required")
    _number(cfg, "hbar", "", lo=0.0, hi=1.0)
    if "interaction" not in cfg:
        _fail("interaction", "is required")
    _validate_interaction(cfg["interaction"], d)
    if "profile" not in cfg:
        _fail("profile", "is required")
    _validate_profile(cfg["profile"])
    if "data" in cfg:
        _validate_data(cfg["data"])
    if "penrose" in cfg:
        _validate_penrose(cfg["penrose"])
    if "linear" in cfg:
        _validate_linear(cfg["linear"])
    if "simulate" in cfg:
        _validate_simulate(cfg["simulate"])
    _validate_traced(cfg.get("traced_modes"), d)
    if "output_dir" in cfg and not isinstance(cfg["output_dir"], str):
        _fail("output_dir", "expected a string")
    _number(cfg, "seed", "", integer=True)
    if "hbar_sweep" in cfg:
        sweep = cfg["hbar_sweep"]
        if not isinstance(sweep, list) or not sweep:
            _fail("hbar_sweep", "expected a non-empty list")
        for i, h in enumerate(sweep):
            if isinstance(h, bool) or not isinstance(h, (int, float)):
                _fail("hbar_sweep[%d]" % i, "expected a number")
            if h < 0.0 or h > 1.0:
                _fail("hbar_sweep[%d]" % i, "must lie in [0, 1]")
    return cfg


def _validate_interaction(block, d):
    path = "interaction"
    _require_keys(block, {"kind", "amplitude", "width", "alpha"}, path)
    kind = block.get("kind")
    if kind not in ("gaussian", "yukawa", "zero"):
        _fail(path + ".kind", "expected gaussian, yukawa, or zero")
    _number(block, "amplitude", path)
    if kind == "gaussian":
        _number(block, "width", path, lo=1e-12)
        if "alpha" in block:
            _fail(path + ".alpha", "only valid for the yukawa kind")
    elif kind == "yukawa":
        _number(block, "alpha", path, lo=1e-12)
        if "width" in block:
            _fail(path + ".width", "only valid for the gaussian kind")
        if d != 3:
            _fail(path + ".kind", "yukawa requires d = 3")
    else:
        for key in ("width", "alpha", "amplitude"):
            if key in block:
                _fail("%s.%s" % (path, key), "not valid for the zero kind")


def _validate_profile(block):
    path = "profile"
    _require_keys(block, {"kind", "beta", "amplitude"}, path)
    if block.get("kind") != "gaussian":
        _fail(path + ".kind", "expected gaussian")
    _number(block, "beta", path, lo=1e-12)
    _number(block, "amplitude", path, lo=1e-300)


def _validate_data(block):
    path = "data"
    _require_keys(
        block, {"kind", "amplitude", "k_rate", "eta_rate", "exponent"}, path
    )
    kind = block.get("kind")
    if kind not in ("gaussian", "bracket"):
        _fail(path + ".kind", "expected gaussian or bracket")
    _number(block, "amplitude", path)
    if kind == "gaussian":
        _number(block, "k_rate", path, lo=1e-12)
        _number(block, "eta_rate", path, lo=1e-12)
        if "exponent" in block:
            _fail(path + ".exponent", "only valid for the bracket kind")
    else:
        _number(block, "exponent", path, lo=1e-12)
        for key in ("k_rate", "eta_rate"):
            if key in block:
                _fail("%s.%s" % (path, key), "only valid for the gaussian kind")


def _validate_penrose(block):
    path = "penrose"
    _require_keys(
        block,
        {"k_max", "lam_max", "n_k", "n_tau", "hbar_set", "keep_curves"},
        path,
    )
    _number(block, "k_max", path, lo=1e-12)
    _number(block, "lam_max", path, lo=1e-12)
    _number(block, "n_k", path, integer=True, lo=2)
    _number(block, "n_tau", path, integer=True, lo=3)
    _flag(block, "keep_curves", path)
    if "hbar_set" in block:
        hs = block["hbar_set"]
        if not isinstance(hs, list) or not hs:
            _fail(path + ".hbar_set", "expected a non-empty list")
        for i, h in enumerate(hs):
            if isinstance(h, bool) or not isinstance(h, (int, float)):
                _fail(path + ".hbar_set[%d]" % i, "expected a number")
            if h < 0.0 or h > 1.0:
                _fail(path + ".hbar_set[%d]" % i, "must lie in [0, 1]")


def _validate_linear(block):
    path = "linear"
    _require_keys(block, {"dt", "T", "n_tau", "tau_max"}, path)
    _number(block, "dt", path, lo=1e-12)
    _number(block, "T", path, lo=1e-12)
    _number(block, "n_tau", path, integer=True, lo=16)
    _number(block, "tau_max", path, lo=1e-12)


_SIM_KEYS = frozenset(
    [
        "epsilon",
        "k_max",
        "dk",
        "eta_max",
        "deta",
        "T",
        "dt",
        "output_interval",
        "snapshot_interval",
        "l_threshold",
        "row_threshold",
        "skip_stability_check",
        "abort_factor",
        "max_snapshots",
    ]
)


def _validate_simulate(block):
    path = "simulate"
    _require_keys(block, _SIM_KEYS, path)
    for key in ("epsilon", "k_max", "dk", "eta_max", "deta", "T"):
        if key not in block:
            _fail("%s.%s" % (path, key), "is required")
    _number(block, "epsilon", path, lo=0.0)
    for key in ("k_max", "dk", "eta_max", "deta", "T"):
        _number(block, key, path, lo=1e-12)
    for key in ("dt", "output_interval", "snapshot_interval"):
        _number(block, key, path, lo=1e-12)
    _number(block, "l_threshold", path, lo=0.0)
    _number(block, "row_threshold", path, lo=0.0)
    _number(block, "abort_factor", path, lo=1.0)
    _number(block, "max_snapshots", path, integer=True, lo=2)
    _flag(block, "skip_stability_check", path)


def _validate_traced(modes, d):
    if modes is None:
        return
    if not isinstance(modes, list):
        _fail("traced_modes", "expected a list of %d-vectors" % d)
    for i, mode in enumerate(modes):
        if not isinstance(mode, list) or len(mode) != d:
            _fail("traced_modes[%d]" % i, "expected a %d-vector" % d)
        for j, comp in enumerate(mode):
            if isinstance(comp, bool) or not isinstance(comp, (int, float)):
                _fail("traced_modes[%d][%d]" % (i, j), "expected a number")


def config_hash(cfg):
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def build_interaction(cfg):
    block = cfg["interaction"]
    d = int(cfg["d"])
    kind = block["kind"]
    if kind == "zero":
        return InteractionKernel("zero", d)
    if kind == "gaussian":
        return InteractionKernel(
            "gaussian",
            d,
            amplitude=block.get("amplitude", 1.0),
            width=block.get("width", 1.0),
        )
    return InteractionKernel(
        "yukawa",
        d,
        amplitude=block.get("amplitude", 1.0),
        alpha=block.get("alpha", 1.0),
    )


def build_profile(cfg):
    block = cfg["profile"]
    return VelocityProfile(
        "gaussian",
        d=int(cfg["d"]),
        beta=block.get("beta", 1.0),
        amplitude=block.get("amplitude", 1.0),
    )


def build_data(cfg):
    block = cfg.get("data")
    d = int(cfg["d"])
    if block is None:
        return GaussianWigner(d)
    if block["kind"] == "gaussian":
        return GaussianWigner(
            d,
            amplitude=block.get("amplitude", 1.0),
            k_rate=block.get("k_rate", 1.0),
            eta_rate=block.get("eta_rate", 1.0),
        )
    return BracketWigner(
        d, exponent=block["exponent"], amplitude=block.get("amplitude", 1.0)
    )


def _fmt(x):
    return "%.17g" % float(x)


def write_csv(path, header, rows, digest, footers=()):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    for note in footers:
        lines.append("# " + note)
    lines.append("# meta: config_sha256=%s" % digest)
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _mode_label(mode):
    return "_".join("%g" % c for c in mode)


def _traced_vectors(cfg, required):
    modes = cfg.get("traced_modes")
    if not modes:
        if required:
            _fail("traced_modes", "at least one mode is required")
        return []
    return [tuple(float(c) for c in mode) for mode in modes]


def apply_thread_cap():
    raw = os.environ.get("QMIX_THREADS")
    if raw is None or raw == "":
        return
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError("QMIX_THREADS must be an integer, got %r" % raw)
    if n < 1:
        raise ConfigError("QMIX_THREADS must be >= 1")
    try:
        import numba

        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    except ImportError:
        pass


def _out_dir(cfg, override):
    path = override or cfg.get("output_dir") or "."
    os.makedirs(path, exist_ok=True)
    return path


def _hbar(cfg):
    if "hbar" not in cfg:
        _fail("hbar", "is required for this command")
    return float(cfg["hbar"])


def cmd_penrose(cfg, out_dir):
    block = cfg.get("penrose", {})
    report = penrose_margin(
        build_interaction(cfg),
        build_profile(cfg),
        hbar_set=tuple(block.get("hbar_set", (0.0, 0.25, 0.5, 1.0))),
        k_max=block.get("k_max", 8.0),
        lam_max=block.get("lam_max", 8.0),
        n_k=int(block.get("n_k", 32)),
        n_tau=int(block.get("n_tau", 129)),
        keep_curves=True,
    )
    digest = config_hash(cfg)
    payload = report.to_dict()
    payload["config_sha256"] = digest
    with open(os.path.join(out_dir, "penrose_report.json"), "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")
    for (k, hbar), curve in sorted(report.curves.items()):
        rows = np.column_stack(
            [curve.taus, curve.values.real, curve.values.imag]
        )
        write_csv(
            os.path.join(out_dir, "nyquist_%g_%g.csv" % (k, hbar)),
            ["tau", "re_L", "im_L"],
            rows,
            digest,
        )
    click.echo("verdict: %s (kappa=%.6g)" % (report.verdict, report.kappa))


def _stability_gate(cfg, force, k_cap):
    if force:
        return
    report = penrose_margin(
        build_interaction(cfg),
        build_profile(cfg),
        hbar_set=(_hbar(cfg),),
        k_max=k_cap,
        n_k=8,
        n_tau=65,
    )
    if report.verdict != "stable":
        raise InstabilityError(
            "stability pre-check verdict %r (kappa=%.3g); rerun with --force"
            % (report.verdict, report.kappa)
        )


def cmd_linear(cfg, out_dir, force):
    block = cfg.get("linear")
    if block is None:
        _fail("linear", "is required for this command")
    for key in ("dt", "T"):
        if key not in block:
            _fail("linear.%s" % key, "is required")
    modes = _traced_vectors(cfg, required=True)
    hbar = _hbar(cfg)
    w = build_interaction(cfg)
    g = build_profile(cfg)
    data = build_data(cfg)
    dt, T = float(block["dt"]), float(block["T"])
    _stability_gate(
        cfg, force,
        k_cap=max(0.5, 1.2 * max(np.linalg.norm(m) for m in modes)),
    )
    digest = config_hash(cfg)
    for mode in modes:
        tr_v = linear_density_volterra(data, w, g, hbar, mode, dt, T)
        tr_g = linear_density_green(
            data,
            w,
            g,
            hbar,
            mode,
            dt,
            T,
            tau_max=block.get("tau_max"),
            n_tau=int(block.get("n_tau", 2**14)),
        )
        kv = np.asarray(mode, dtype=float)
        free = data.evaluate(kv[None, :], kv[None, :] * tr_v.times[:, None])
        scale = float(np.max(np.abs(tr_v.values)))
        gap = float(np.max(np.abs(tr_v.values - tr_g.values)))
        gap = gap / scale if scale > 0 else 0.0
        try:
            exponent = decay_fit(tr_v).exponent
        except InsufficientDataError:
            exponent = float("nan")
        rows = np.column_stack(
            [
                tr_v.times,
                tr_v.values.real,
                tr_v.values.imag,
                tr_g.values.real,
                tr_g.values.imag,
                np.abs(free),
            ]
        )
        write_csv(
            os.path.join(out_dir, "linear_%s.csv" % _mode_label(mode)),
            ["t", "re_volterra", "im_volterra", "re_green", "im_green",
             "abs_free"],
            rows,
            digest,
            footers=[
                "max_rel_gap: %s" % _fmt(gap),
                "decay_exponent: %s" % _fmt(exponent),
            ],
        )
    click.echo("wrote %d linear trace files" % len(modes))


def _sim_config(cfg, force):
    block = cfg.get("simulate")
    if block is None:
        _fail("simulate", "is required for this command")
    return SimConfig(
        d=int(cfg["d"]),
        hbar=_hbar(cfg),
        epsilon=float(block["epsilon"]),
        interaction=build_interaction(cfg),
        profile=build_profile(cfg),
        k_max=float(block["k_max"]),
        dk=float(block["dk"]),
        eta_max=float(block["eta_max"]),
        deta=float(block["deta"]),
        T=float(block["T"]),
        dt=block.get("dt"),
        output_interval=block.get("output_interval"),
        snapshot_interval=block.get("snapshot_interval"),
        traced_modes=tuple(_traced_vectors(cfg, required=False)),
        l_threshold=block.get("l_threshold", 1e-12),
        row_threshold=block.get("row_threshold", 1e-14),
        skip_stability_check=force
        or _flag(block, "skip_stability_check", "simulate"),
        abort_factor=block.get("abort_factor", 1e6),
        max_snapshots=int(block.get("max_snapshots", 64)),
    )


def _write_sim_artifacts(cfg, out, out_dir):
    digest = config_hash(cfg)
    labels = [_mode_label(m) for m in out.config.traced_modes]
    series = [
        np.asarray(out.traced[idx])
        for idx in out.config._traced_indices
    ]
    header = ["t"]
    for label in labels:
        header += ["re_rho_%s" % label, "im_rho_%s" % label]
    rows = []
    for i, t in enumerate(out.times):
        row = [t]
        for vals in series:
            row += [vals[i].real, vals[i].imag]
        rows.append(row)
    write_csv(os.path.join(out_dir, "density.csv"), header, rows, digest)

    mon = out.monitors.as_arrays()
    rows = np.column_stack(
        [mon["times"], mon["b1"], mon["b2"], mon["b3"], mon["b4"], mon["b5"]]
    )
    write_csv(
        os.path.join(out_dir, "monitors.csv"),
        ["t", "B1", "B2", "B3", "B4", "B5"],
        rows,
        digest,
    )

    payload = {"config_sha256": digest, "valid": out.valid}
    if out.abort_reason:
        payload["abort_reason"] = out.abort_reason
    if out.scattering is not None:
        sc = out.scattering
        payload.update(
            {
                "rate_exponent": sc.rate_exponent,
                "residuals": [float(x) for x in sc.cauchy_residuals],
                "times": [float(x) for x in sc.times],
                "nonincreasing": sc.nonincreasing,
                "transient_time": sc.transient_time,
                "n_used": sc.n_used,
            }
        )
    if out.config.d < 3:
        payload["note"] = (
            "empirical rate: the scattering guarantee assumes d >= 3"
        )
    with open(os.path.join(out_dir, "scattering.json"), "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")

    with open(os.path.join(out_dir, "warnings.log"), "w", newline="\n") as fh:
        for line in out.warnings:
            fh.write(line + "\n")


def cmd_simulate(cfg, out_dir, force):
    sim_cfg = _sim_config(cfg, force)
    out = simulate(sim_cfg, build_data(cfg))
    _write_sim_artifacts(cfg, out, out_dir)
    if not out.valid:
        raise NumericalError(
            "run aborted at t=%.6g: %s" % (out.times[-1], out.abort_reason)
        )
    click.echo("simulation complete: %d recorded steps" % len(out.times))


def cmd_sweep_hbar(cfg, out_dir, force):
    sweep = cfg.get("hbar_sweep")
    if not sweep:
        _fail("hbar_sweep", "is required for this command")
    if not any(h == 0.0 for h in sweep):
        _fail("hbar_sweep", "must include 0 as the comparison point")
    sim_block = cfg.get("simulate")
    if sim_block is None:
        _fail("simulate", "is required for this command")
    if not cfg.get("traced_modes"):
        _fail("traced_modes", "at least one mode is required")
    data = build_data(cfg)
    outputs = {}
    for h in sweep:
        local = dict(cfg)
        local["hbar"] = float(h)
        out = simulate(_sim_config(local, force), data)
        if not out.valid:
            raise NumericalError(
                "sweep run at hbar=%g aborted: %s" % (h, out.abort_reason)
            )
        outputs[float(h)] = out
    base = outputs[0.0]
    norms = default_norm_set(int(cfg["d"]))
    params = NormParams(sigma=norms.sigma0, M=norms.M, weight_mode="plain")

    def profile_distance(out):
        if out.scattering is None or base.scattering is None:
            return float("nan")
        q_a = out.scattering.q_inf
        q_b = base.scattering.q_inf
        diff = q_a.copy_with(values=q_a.values - q_b.values)
        return weighted_norm(diff, params, t=0.0)

    rows = []
    for h in sweep:
        out = outputs[float(h)]
        dens = 0.0
        for idx in out.config._traced_indices:
            a = np.asarray(out.traced[idx])
            b = np.asarray(base.traced[idx])
            dens = max(dens, float(np.max(np.abs(a - b))))
        prof = 0.0 if h == 0.0 else float(profile_distance(out))
        rows.append([float(h), dens, prof])
    pos = [(h, v) for h, v, _ in rows if h > 0 and v > 0]
    if len(pos) >= 2:
        slope, _, _ = fit_loglog(
            np.array([p[0] for p in pos]), np.array([p[1] for p in pos])
        )
        order = float(slope)
    else:
        order = float("nan")
    write_csv(
        os.path.join(out_dir, "sweep.csv"),
        ["hbar", "density_distance", "profile_distance"],
        rows,
        config_hash(cfg),
        footers=["fitted_order: %s" % _fmt(order)],
    )
    click.echo("sweep complete: fitted order %s" % _fmt(order))


def _dispatch(worker):
    try:
        worker()
    except ConfigError as exc:
        click.echo("config error: %s" % exc, err=True)
        sys.exit(2)
    except (DomainError, RangeError) as exc:
        click.echo("config error: %s" % exc, err=True)
        sys.exit(2)
    except InstabilityError as exc:
        click.echo("stability refusal: %s" % exc, err=True)
        sys.exit(4)
    except (NumericalError, InsufficientDataError, ConsistencyError) as exc:
        click.echo("numerical failure: %s" % exc, err=True)
        sys.exit(3)


def _common(fn):
    fn = click.option(
        "--output", default=None, type=click.Path(), help="output directory"
    )(fn)
    fn = click.option(
        "--force", is_flag=True, help="bypass the stability pre-check"
    )(fn)
    fn = click.option(
        "--config", "config_path", required=True, type=click.Path(), help="JSON run config"
    )(fn)
    return fn


@click.group()
def main():
    """Quantum Landau damping toolkit."""


@main.command("penrose")
@_common
def penrose_command(config_path, force, output):
    def worker():
        apply_thread_cap()
        cfg = load_config(config_path)
        cmd_penrose(cfg, _out_dir(cfg, output))

    _dispatch(worker)


@main.command("linear")
@_common
def linear_command(config_path, force, output):
    def worker():
        apply_thread_cap()
        cfg = load_config(config_path)
        cmd_linear(cfg, _out_dir(cfg, output), force)

    _dispatch(worker)


@main.command("simulate")
@_common
def simulate_command(config_path, force, output):
    def worker():
        apply_thread_cap()
        cfg = load_config(config_path)
        cmd_simulate(cfg, _out_dir(cfg, output), force)

    _dispatch(worker)


@main.command("sweep-hbar")
@_common
def sweep_command(config_path, force, output):
    def worker():
        apply_thread_cap()
        cfg = load_config(config_path)
        cmd_sweep_hbar(cfg, _out_dir(cfg, output), force)

    _dispatch(worker)


if __name__ == "__main__":
    main()
