"""Parameter sweeps behind the CLI commands.

Every sweep is split into row tasks that do not depend on the number of
workers, and the rows are reassembled in grid order, so the output is the
same whichever way the work is scheduled.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from scbell.bcs import OperatingPoint, _gap_table, gap_at_temperature
from scbell.config import RunConfig
from scbell.errors import ConfigurationError
from scbell.optics import conversion_table
from scbell.rates import FLAG_RESONANCE, _threshold_flags, detection_purity_grid, psi_rate
from scbell.spectral import SpectralKernel, broadened_single_photon, dp_with_bandwidth, two_photon_peak


@dataclass(frozen=True)
class Table:
    """Column names (with units), row data and free-form metadata."""

    columns: tuple
    rows: list
    meta: dict


def run_tasks(fn, tasks, jobs: int = 1, order=None):
    """``[fn(t) for t in tasks]`` on up to ``jobs`` processes.

    ``order`` permutes the execution order only; results always come back
    in task order.
    """
    order = list(range(len(tasks))) if order is None else list(order)
    if sorted(order) != list(range(len(tasks))):
        raise ValueError("order must be a permutation of the task indices")
    if jobs <= 1 or len(tasks) <= 1:
        results = {i: fn(tasks[i]) for i in order}
    else:
        _gap_table()  # build once before forking
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            futures = {i: pool.submit(fn, tasks[i]) for i in order}
            results = {i: f.result() for i, f in futures.items()}
    return [results[i] for i in range(len(tasks))]


# --------------------------------------------------------------------------
# Detection-purity maps
# --------------------------------------------------------------------------


def _apply_axes(cfg: RunConfig, values: dict):
    """Material and operating-point arrays for one set of axis values.

    ``values`` maps axis names to arrays of equal shape (or scalars); the
    splitting must be a scalar since it changes the material.
    """
    mat, sc = cfg.material, cfg.superconductor
    if "splitting_over_mun" in values:
        mat = mat.replace(dw_p=float(values["splitting_over_mun"]) * mat.mu_n)
    t = values.get("temperature_over_tc", cfg.temperature_over_tc)
    T = np.asarray(t, dtype=float) * sc.Tc
    if "detuning_over_mun" in values:
        detuning = np.asarray(values["detuning_over_mun"], dtype=float) * mat.mu_n
    else:
        detuning = np.asarray(values.get("detuning_over_delta0", cfg.detuning_over_delta0), dtype=float) * sc.delta0
    if "bandwidth_over_splitting" in values:
        bw = np.asarray(values["bandwidth_over_splitting"], dtype=float) * mat.dw_p
    else:
        bw = np.asarray(values.get("bandwidth_over_mun", cfg.bandwidth_over_mun), dtype=float) * mat.mu_n
    if "detuning_over_mun" in values and "detuning_over_delta0" in values:
        raise ConfigurationError("grid: only one detuning axis may be swept")
    if "bandwidth_over_mun" in values and "bandwidth_over_splitting" in values:
        raise ConfigurationError("grid: only one bandwidth axis may be swept")
    return mat, T, detuning, bw


def _segment(cfg: RunConfig, values: dict):
    """Rates and flags for cells that share one material."""
    mat, sc = cfg.material, cfg.superconductor
    mat, T, detuning, bw = _apply_axes(cfg, values)
    w_sum = cfg.pair_energy(mat)
    T, detuning, bw = np.broadcast_arrays(T, detuning, bw)
    out = np.empty((T.size, 5))
    mono = bw.ravel() == 0
    if mono.any():
        grid = detection_purity_grid(mat, sc, T.ravel()[mono], w_sum, detuning.ravel()[mono], cfg.B2)
        out[mono] = np.column_stack([grid.dp_db, grid.r1, grid.r2_psi_plus, grid.r2_phi, grid.flags])
    for i in np.flatnonzero(~mono):
        op = OperatingPoint.from_sum(T.flat[i], w_sum, detuning.flat[i], cfg.B2, bw.flat[i])
        rb = dp_with_bandwidth(mat, sc, op, cfg.n_quad, cfg.linewidth)
        flags = rb.flags | int(_threshold_flags(mat, w_sum))
        out[i] = (rb.dp_db, rb.r1, rb.r2_psi_plus, rb.r2_phi, flags)
    return out


def _map_row(task):
    cfg, y = task
    gx, gy = cfg.grid.x, cfg.grid.y
    xs = gx.values()
    if gx.axis == "splitting_over_mun":
        parts = [_segment(cfg, {gx.axis: x, gy.axis: y}) for x in xs]
        block = np.vstack(parts)
    else:
        block = _segment(cfg, {gx.axis: xs, gy.axis: y})
    return [(x, y, *cells) for x, cells in zip(xs, block)]


MAP_COLUMNS = ("dp_db (dB)", "r1 (a.u.)", "r2_psi_plus (a.u.)", "r2_phi (a.u.)", "flags (bitmask)")


def run_map(cfg: RunConfig, order=None) -> Table:
    """Detection purity on the configured grid, rows ordered by ``y`` then ``x``.

    Cells with zero bandwidth use the monochromatic rates; the others are
    averaged over the photon spectra.
    """
    if cfg.grid is None:
        raise ConfigurationError("grid: a sweep needs x and y axes")
    tasks = [(cfg, float(y)) for y in cfg.grid.y.values()]
    rows = [row for block in run_tasks(_map_row, tasks, cfg.jobs, order) for row in block]
    rows = [(x, y, dp, r1, rp, rf, int(fl)) for x, y, dp, r1, rp, rf, fl in rows]
    columns = (f"{cfg.grid.x.axis} (1)", f"{cfg.grid.y.axis} (1)") + MAP_COLUMNS
    return Table(columns, rows, {"command": cfg.command})


# --------------------------------------------------------------------------
# Spectra
# --------------------------------------------------------------------------


def _spectrum_column(task):
    cfg, broadening, w_mu, w_nu, delta, T = task
    kernel = None if broadening == 0 else SpectralKernel.from_fwhm(
        broadening, tail_level=cfg.tail_level, tail_lambda=cfg.tail_lambda
    )
    mat = cfg.material
    return broadened_single_photon(mat, delta, T, w_mu, kernel, cfg.B2) + broadened_single_photon(
        mat, delta, T, w_nu, kernel, cfg.B2
    )


def run_spectrum(cfg: RunConfig, order=None) -> Table:
    """One-photon curves for each broadening and the two-photon curve.

    All curves are divided by the peak of the two-photon curve; the pair
    energy is held fixed while the detuning runs over ``range`` in units of
    the gap at the working temperature.
    """
    mat, sc = cfg.material, cfg.superconductor
    T = cfg.temperature_over_tc * sc.Tc
    delta = float(gap_at_temperature(sc, T))
    if delta == 0:
        raise ConfigurationError("operating_point.temperature_over_tc: spectrum needs T below Tc")
    w_sum = cfg.pair_energy(mat)
    x = cfg.spectrum_range.values()
    dw = x * delta
    w_mu, w_nu = 0.5 * (w_sum + dw), 0.5 * (w_sum - dw)
    gamma = cfg.spectrum_linewidth
    two = np.atleast_1d(psi_rate(mat, delta, w_mu, w_nu, cfg.B2, gamma))
    flags = np.where(np.isfinite(two), 0, FLAG_RESONANCE) | _threshold_flags(mat, np.full_like(x, w_sum))
    if gamma > 0:
        peak = two_photon_peak(mat, delta, w_sum, gamma, cfg.B2)
    else:
        finite = two[np.isfinite(two)]
        peak = float(finite.max()) if finite.size else math.nan
    tasks = [(cfg, b, w_mu, w_nu, delta, T) for b in cfg.broadening]
    ones = run_tasks(_spectrum_column, tasks, cfg.jobs, order)
    with np.errstate(invalid="ignore"):
        cols = [x, two / peak] + [o / peak for o in ones]
    rows = [(*(float(c[i]) for c in cols), int(flags[i])) for i in range(x.size)]
    columns = (
        ("detuning_over_gap (1)", "two_photon (rel. peak)")
        + tuple(f"one_photon_dE_{b:g}meV (rel. peak)" for b in cfg.broadening)
        + ("flags (bitmask)",)
    )
    meta = {"command": cfg.command, "two_photon_peak": peak, "gap_meV": delta, "w_sum_meV": w_sum}
    return Table(columns, rows, meta)


# --------------------------------------------------------------------------
# Bell conversion
# --------------------------------------------------------------------------


def run_convert_bell(cfg: RunConfig) -> Table:
    table = conversion_table(tuple(math.radians(a) for a in cfg.qwp_degrees), cfg.arm, cfg.hwp_degrees)
    rows = [(label, deg, out, fid) for (label, deg), (out, fid) in table.items()]
    return Table(("input", "hwp_angle (deg)", "output", "fidelity (1)"), rows, {"command": cfg.command})
