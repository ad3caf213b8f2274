"""Convergence metrics computed from a recorded run."""
from __future__ import annotations

import math

import numpy as np

from ..hydraulics import LeakSpec
from ..observer import AdaptationConfig, detection_logic

BAND_FRACTION = 0.1


def settling_time(t, series, target: float, band: float) -> float:
    """First time after which ``|series - target| <= band`` holds to the end.

    ``inf`` when the final sample lies outside the band.
    """
    inside = np.abs(np.asarray(series, dtype=float) - target) <= band
    if inside.size == 0 or not inside[-1]:
        return math.inf
    outside = np.flatnonzero(~inside)
    if outside.size == 0:
        return float(t[0])
    return float(t[outside[-1] + 1])


def exp_decay_fit(t, err, floor: float = 0.0):
    """Least-squares fit of ``log|err| = c - rate * t``; returns ``(rate, r2)``.

    Samples with ``|err| <= floor`` are dropped. Returns ``(nan, nan)`` when
    fewer than three samples remain.
    """
    t = np.asarray(t, dtype=float)
    mag = np.abs(np.asarray(err, dtype=float))
    keep = mag > floor
    if keep.sum() < 3:
        return math.nan, math.nan
    tt, ly = t[keep], np.log(mag[keep])
    slope, intercept = np.polyfit(tt, ly, 1)
    resid = ly - (slope * tt + intercept)
    ss_tot = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 1.0
    return float(-slope), float(r2)


def decay_window(record, truth: LeakSpec | None, transient: float = 1.0, floor_rel: float = 1e-12, q_scale: float = 1.0):
    """Time/error samples used for the exponential-rate fit.

    Starts ``transient`` seconds after leak onset and stops at the first sample
    whose output error has fallen to the floating-point floor.
    """
    err = np.asarray(record.y) - np.asarray(record.y_hat)
    start = (truth.onset_time if truth is not None else 0.0) + transient
    sel = np.flatnonzero(record.t >= start)
    if sel.size == 0:
        return np.array([]), np.array([])
    floor = floor_rel * q_scale
    below = np.flatnonzero(np.abs(err[sel]) <= floor)
    stop = sel[below[0]] if below.size else sel[-1] + 1
    return record.t[sel[0]:stop], err[sel[0]:stop]


def run_metrics(record, truth: LeakSpec | None, adaptation: AdaptationConfig | None = None, q_scale: float = 1.0) -> dict:
    adaptation = adaptation or AdaptationConfig()
    t = np.asarray(record.t)
    chi_true = truth.size if truth is not None else 0.0
    out = {
        "t_final": float(t[-1]),
        "chi_hat_final": float(record.chi_hat[-1]),
        "delta_hat_final": float(record.delta_hat[-1]),
        "chi_final_error": float(abs(record.chi_hat[-1] - chi_true)),
    }
    if truth is not None:
        out["delta_final_error"] = float(abs(record.delta_hat[-1] - truth.position))
        out["chi_settling_time"] = settling_time(t, record.chi_hat, chi_true, BAND_FRACTION * chi_true)
        out["delta_settling_time"] = settling_time(t, record.delta_hat, truth.position, BAND_FRACTION * truth.position)
    # the online detector sees every step; the recorded series may be strided
    event = getattr(record, "detection", None) or detection_logic(t, record.chi_hat, adaptation)
    out["detected"] = event is not None
    out["detection_time"] = event.time if event else None
    out["localization_start"] = event.localization_start if event else None
    if event is not None and truth is not None:
        # measured from the start of the exceedance that raised the alarm
        out["detection_latency"] = max(0.0, event.time - adaptation.detection_hold - truth.onset_time)
    else:
        out["detection_latency"] = None
    tw, ew = decay_window(record, truth, q_scale=q_scale)
    rate, r2 = exp_decay_fit(tw, ew)
    out["decay_rate"] = rate
    out["decay_r2"] = r2
    return out
