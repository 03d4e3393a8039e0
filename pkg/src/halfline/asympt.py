"""Large-time asymptotics: interaction picture, final states, decay fits.

The flow map scatters: in the interaction picture w(t, k) = e^{itk^2} (F u(t))(k)
freezes the linear dynamics, so w converges to a final state w_inf as t grows.
This module extracts w along a trajectory, fits the Cauchy convergence rate,
and measures how well the field matches the dispersive decay rate, the
modified final-state profile, and the free comparison dynamics.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging

import numpy as np

from .evolve import FieldState, Trajectory, extend_E
from .jost import JostTable, ScatteringData
from .spectral import SpectralTransform

logger = logging.getLogger(__name__)

_DEFAULT_WINDOW = (5.0, 100.0)
_ASYMPTOTIC_START = 2.0


def fit_power_law(times, values, window=None):
    """Least-squares exponent of values ~ t**p on a log-log grid.

    Returns (exponent, band) where band is the one-sigma half width of the
    slope. Raises ValueError with fewer than three usable samples.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape:
        raise ValueError("times and values must have matching shapes.")
    mask = (t > 0) & (v > 0)
    if window is not None:
        lo, hi = window
        mask &= (t >= lo) & (t <= hi)
    if int(mask.sum()) < 3:
        raise ValueError("need at least 3 positive samples in the fit window.")
    lt = np.log(t[mask])
    lv = np.log(v[mask])
    design = np.column_stack([lt, np.ones_like(lt)])
    coef, rss, _, _ = np.linalg.lstsq(design, lv, rcond=None)
    slope = float(coef[0])
    n = lt.size
    spread = float(np.sum((lt - lt.mean()) ** 2))
    if n > 2 and rss.size and spread > 0:
        band = float(np.sqrt(rss[0] / (n - 2) / spread))
    else:
        band = 0.0
    return slope, band


def extract_w(
    st: SpectralTransform, sd: ScatteringData, u: FieldState
):
    """Interaction-picture state on the mirrored k grid at time u.t.

    w(k) = e^{i t k^2} (F u)(k) for k >= 0, extended to k < 0 through the
    scattering-matrix symmetry w(-k) = adj(S(k)) w(k).
    """
    coef = st.apply_forward(u.values)
    w_pos = np.exp(1j * u.t * st.kgrid.points**2)[:, None] * coef
    return extend_E(sd, w_pos)


def _l2_k(k_full, values) -> float:
    dens = np.sum(np.abs(values) ** 2, axis=tuple(range(1, values.ndim)))
    return float(np.sqrt(np.trapezoid(dens, k_full)))


def final_state(times, snapshots, k_full):
    """Final interaction-picture state plus a Cauchy convergence report.

    snapshots has one mirrored-grid function per time, shape (nt, nk, n).
    The report fits the successive-difference norms against t; with a power
    nonlinearity |u|^alpha u the expected exponent is -(alpha/2 - 1).
    """
    t = np.asarray(times, dtype=float)
    snaps = np.asarray(snapshots)
    if snaps.shape[0] != t.size:
        raise ValueError("one snapshot per time is required.")
    if t.size < 2:
        raise ValueError("need at least 2 snapshots to measure convergence.")
    residuals = np.array(
        [_l2_k(k_full, snaps[i + 1] - snaps[i]) for i in range(t.size - 1)]
    )
    cauchy = bool(residuals[-1] < residuals[0])
    if not cauchy:
        logger.warning(
            "snapshot differences do not decrease (%.3g -> %.3g); "
            "no final state reached on this window.",
            residuals[0],
            residuals[-1],
        )
    exponent = band = float("nan")
    if t.size >= 4 and np.all(residuals > 0):
        exponent, band = fit_power_law(t[:-1], residuals)
    report = {
        "times": t[:-1],
        "residuals": residuals,
        "exponent": exponent,
        "band": band,
        "cauchy": cauchy,
    }
    return snaps[-1], report


def verify_decay(traj: Trajectory, window=_DEFAULT_WINDOW):
    """Fitted exponent and band of the sup norm over the time window."""
    return fit_power_law(traj.times, traj.sup_norms, window=window)


def _interp_rows(k_pos, table, karg):
    """Row-wise complex interpolation of table (nk, n) at karg, 0 beyond."""
    n = table.shape[1]
    out = np.zeros((karg.size, n), dtype=complex)
    for j in range(n):
        out[:, j] = np.interp(karg, k_pos, table[:, j].real, right=0.0) + 1j * (
            np.interp(karg, k_pos, table[:, j].imag, right=0.0)
        )
    return out


def modified_profile(jt: JostTable, k_pos, w_pos, t: float, x):
    """(1/sqrt 2) M D_t (m(y/2, t y) w(y/2)) evaluated on the x grid.

    Substituting y = x/t gives m(x/(2t), x) w(x/(2t)) under the dilation, so
    the Jost dressing is sampled along the ballistic ray k = x/(2t).
    """
    x = np.asarray(x, dtype=float)
    karg = x / (2.0 * t)
    vals = _interp_rows(k_pos, w_pos, karg)
    k_bot = jt.kgrid.start
    k_top = jt.kgrid.points[-1]
    # inside the stored cut the dressing differs from the identity; rays
    # below the solved k range borrow the lowest solved wave number
    for i in np.nonzero((x < jt.x_cut) & (karg <= k_top))[0]:
        kk = max(float(karg[i]), k_bot)
        vals[i] = jt.m_value(kk, float(x[i])) @ vals[i]
    front = np.exp(1j * x**2 / (4.0 * t)) / np.sqrt(2.0 * 1j * t)
    return front[:, None] * vals


def verify_profile(traj: Trajectory, jt: JostTable, k_full, w_final, start=_ASYMPTOTIC_START):
    """Sup-norm distance between u(t) and the modified final-state profile.

    Returns a dict with the sampled times, the distances, and the fitted
    decay exponent; the underlying estimate predicts exponent <= -3/4.
    """
    nk = k_full.size // 2
    k_pos = k_full[nk:]
    w_pos = np.asarray(w_final)[nk:]
    times, errors = [], []
    for state in traj.samples:
        if state.t < start:
            continue
        prof = modified_profile(jt, k_pos, w_pos, state.t, state.xgrid.points)
        times.append(state.t)
        errors.append(float(np.max(np.abs(state.values - prof))))
    if len(times) < 2:
        raise ValueError("need at least 2 samples past the asymptotic start.")
    times = np.asarray(times)
    errors = np.asarray(errors)
    exponent = band = float("nan")
    if len(times) >= 3 and np.all(errors > 0):
        exponent, band = fit_power_law(times, errors)
    return {
        "times": times,
        "errors": errors,
        "exponent": exponent,
        "band": band,
        "first_last_ratio": float(errors[0] / errors[-1]),
    }


def verify_free_state(
    traj: Trajectory,
    free_st: SpectralTransform,
    k_full,
    w_final,
    start=_ASYMPTOTIC_START,
):
    """L2 distance between u(t) and the free flow launched from w_final.

    The comparison dynamics uses the transform with the potential removed but
    the same boundary pair, so the distance isolates the scattering content.
    """
    nk = k_full.size // 2
    w_pos = np.asarray(w_final)[nk:]
    if w_pos.shape[0] != free_st.kgrid.count:
        raise ValueError("final state and free transform must share one k grid.")
    k2 = free_st.kgrid.points**2
    times, errors = [], []
    for state in traj.samples:
        if state.t < start:
            continue
        u_free = free_st.apply_adjoint(np.exp(-1j * state.t * k2)[:, None] * w_pos)
        times.append(state.t)
        errors.append(free_st.norm_x(state.values - u_free))
    if len(times) < 2:
        raise ValueError("need at least 2 samples past the asymptotic start.")
    times = np.asarray(times)
    errors = np.asarray(errors)
    exponent = band = float("nan")
    if len(times) >= 3 and np.all(errors > 0):
        exponent, band = fit_power_law(times, errors)
    return {
        "times": times,
        "errors": errors,
        "exponent": exponent,
        "band": band,
        "first_last_ratio": float(errors[0] / errors[-1]),
    }


@dataclasses.dataclass(frozen=True, eq=False)
class AsymptoticsReport:
    """Assembled asymptotic verdicts for one trajectory."""

    times: np.ndarray
    sup_norms: np.ndarray
    decay_exponent: float
    decay_band: float
    snapshot_times: np.ndarray
    k_full: np.ndarray
    w_snapshots: np.ndarray
    w_final: np.ndarray
    cauchy_times: np.ndarray
    cauchy_residuals: np.ndarray
    cauchy_exponent: float
    profile: dict | None
    free_state: dict | None
    flags: tuple[str, ...]


def _decay_flags(report_flags, name, values):
    values = np.asarray(values)
    if values.size < 2:
        return
    if values[-1] >= values[0]:
        report_flags.append(f"{name} does not decrease over the window")
    rises = int(np.sum(np.diff(values) > 0))
    if rises > values.size // 2:
        report_flags.append(f"{name} is mostly non-monotone")


def build_report(
    traj: Trajectory,
    st: SpectralTransform,
    sd: ScatteringData,
    jt: JostTable,
    free_st: SpectralTransform | None = None,
    window=_DEFAULT_WINDOW,
    start=_ASYMPTOTIC_START,
) -> AsymptoticsReport:
    """Extract snapshots, fit every asymptotic table, and flag violations."""
    picked = [s for s in traj.samples if s.t >= start]
    if len(picked) < 2:
        raise ValueError("need at least 2 samples past the asymptotic start.")
    snap_times = np.array([s.t for s in picked])
    k_full = None
    snaps = []
    for state in picked:
        k_full, w = extract_w(st, sd, state)
        snaps.append(w)
    snaps = np.asarray(snaps)
    w_final, cauchy = final_state(snap_times, snaps, k_full)

    decay_exponent, decay_band = verify_decay(traj, window=window)
    profile = verify_profile(traj, jt, k_full, w_final, start=start)
    free = None
    if free_st is not None:
        free = verify_free_state(traj, free_st, k_full, w_final, start=start)

    flags: list[str] = []
    in_window = (traj.times >= window[0]) & (traj.times <= window[1])
    if int(in_window.sum()) >= 2:
        _decay_flags(flags, "sup norm", traj.sup_norms[in_window])
    _decay_flags(flags, "cauchy residuals", cauchy["residuals"])
    _decay_flags(flags, "profile errors", profile["errors"])
    if free is not None:
        _decay_flags(flags, "free-state errors", free["errors"])
    for flag in flags:
        logger.warning("asymptotics: %s", flag)

    return AsymptoticsReport(
        times=traj.times,
        sup_norms=traj.sup_norms,
        decay_exponent=decay_exponent,
        decay_band=decay_band,
        snapshot_times=snap_times,
        k_full=k_full,
        w_snapshots=snaps,
        w_final=w_final,
        cauchy_times=cauchy["times"],
        cauchy_residuals=cauchy["residuals"],
        cauchy_exponent=cauchy["exponent"],
        profile=profile,
        free_state=free,
        flags=tuple(flags),
    )


def save_report_json(report: AsymptoticsReport, path) -> None:
    """Scalars and tables as JSON; snapshots stay in memory only."""
    payload = {
        "decay_exponent": report.decay_exponent,
        "decay_band": report.decay_band,
        "cauchy_exponent": report.cauchy_exponent,
        "flags": list(report.flags),
        "times": report.times.tolist(),
        "sup_norms": report.sup_norms.tolist(),
        "snapshot_times": report.snapshot_times.tolist(),
        "cauchy_times": report.cauchy_times.tolist(),
        "cauchy_residuals": report.cauchy_residuals.tolist(),
        "w_final_re": report.w_final.real.tolist(),
        "w_final_im": report.w_final.imag.tolist(),
    }
    for name in ("profile", "free_state"):
        table = getattr(report, name)
        if table is not None:
            payload[name] = {
                "times": table["times"].tolist(),
                "errors": table["errors"].tolist(),
                "exponent": table["exponent"],
                "band": table["band"],
                "first_last_ratio": table["first_last_ratio"],
            }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def save_report_csv(report: AsymptoticsReport, path) -> None:
    """Decay table t, sup_norm plus aligned error columns where defined."""

    def lookup(table, t):
        if table is None:
            return ""
        hits = np.nonzero(np.abs(table["times"] - t) < 1e-9)[0]
        return f"{table['errors'][hits[0]]:.17g}" if hits.size else ""

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "sup_norm", "profile_error", "free_state_error"])
        for i, t in enumerate(report.times):
            writer.writerow(
                [
                    f"{t:.17g}",
                    f"{report.sup_norms[i]:.17g}",
                    lookup(report.profile, t),
                    lookup(report.free_state, t),
                ]
            )
