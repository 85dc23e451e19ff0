"""Atom-count calibration at the count-signal level.

The detector turns true atom counts into raw signals,
signal_i = conversion * detectivity_i * count_i + readout noise, and the
calibration problem is to recover the factors from data:

  - per-state detectivities from a scan in which populations oscillate while
    the total atom number stays constant (the inferred total must come out
    flat across the scan),
  - the overall conversion from the projection noise of a coherent spin
    state in an equal superposition, whose Sz variance must equal N/4 with
    N the (conversion-dependent) inferred mean total atom number.

Imaging-plane effects (regions of interest, fringes) are out of scope: their
net effect is folded into readout_sigma, so no variance is ever computed on
partial-signal subsets here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import CalibrationError


@dataclass(frozen=True)
class DetectorModel:
    """Signal chain: signal = conversion * detectivity_i * count_i + noise."""

    conversion: float
    detectivity: tuple = (1.0, 1.0, 1.0, 1.0)
    readout_sigma: float = 0.0

    def __post_init__(self):
        if self.conversion <= 0:
            raise ValueError("conversion must be positive")
        det = tuple(float(d) for d in self.detectivity)
        if len(det) != 4 or any(not 0.0 < d <= 1.2 for d in det):
            raise ValueError("detectivity must be four factors in (0, 1.2]")
        if self.readout_sigma < 0:
            raise ValueError("readout_sigma must be >= 0")
        object.__setattr__(self, "detectivity", det)


def simulate_raw_signals(true_counts, detector: DetectorModel, seed: int) -> np.ndarray:
    """Forward model: per-state signals for an (n, 4) array of true counts."""
    counts = np.asarray(true_counts, dtype=float)
    if counts.ndim != 2 or counts.shape[1] != 4:
        raise ValueError("true_counts must be an (n, 4) array")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))
    gains = detector.conversion * np.asarray(detector.detectivity)
    return counts * gains[None, :] + rng.standard_normal(counts.shape) * detector.readout_sigma


def invert_counts(signals, detector: DetectorModel) -> np.ndarray:
    """Invert raw signals back to atom counts with a calibrated detector."""
    gains = detector.conversion * np.asarray(detector.detectivity)
    return np.asarray(signals, dtype=float) / gains[None, :]


def rabi_scan_counts(n_points: int, n_atoms: float) -> np.ndarray:
    """True counts for a detectivity-calibration scan at constant total N.

    Three consecutive oscillation segments move population between state
    pairs (1,2), (3,4) and (1,3), spanning enough of the population simplex
    to identify all relative factors.
    """
    if n_points < 6:
        raise ValueError("scan needs at least 6 points")
    per = n_points // 3
    phases = [np.linspace(0.0, 2.0 * math.pi, per, endpoint=False),
              np.linspace(0.0, 2.0 * math.pi, per, endpoint=False),
              np.linspace(0.0, 2.0 * math.pi, n_points - 2 * per, endpoint=False)]
    rows = []
    for seg, ph in enumerate(phases):
        hi = n_atoms * np.cos(ph / 2.0) ** 2
        lo = n_atoms - hi
        for h, l in zip(hi, lo):
            counts = [0.0, 0.0, 0.0, 0.0]
            if seg == 0:
                counts[0], counts[1] = h, l
            elif seg == 1:
                counts[2], counts[3] = h, l
            else:
                counts[0], counts[2] = h, l
            rows.append(counts)
    return np.array(rows)


def calibrate_detectivity(rabi_scan_signals) -> np.ndarray:
    """Relative detectivities (state 1 := 1) from a constant-total scan.

    With inverse weights w_i = 1/d_i (w_1 fixed to 1) the inferred total
    s_1 + sum_i w_i s_i must not vary across the scan; minimizing its
    variance is a linear least-squares problem in (w_2, w_3, w_4).
    """
    s = np.asarray(rabi_scan_signals, dtype=float)
    if s.ndim != 2 or s.shape[1] != 4 or s.shape[0] < 4:
        raise ValueError("scan signals must be an (n >= 4, 4) array")
    centered = s - s.mean(axis=0)
    a = centered[:, 1:]
    b = -centered[:, 0]
    gram = a.T @ a
    if np.linalg.cond(gram) > 1e10:
        raise CalibrationError(
            "scan does not vary the populations enough to identify the "
            "detectivities (degenerate scan)"
        )
    w = np.linalg.solve(gram, a.T @ b)
    if np.any(w <= 0):
        raise CalibrationError(f"non-physical inverse factors fitted: {w}")
    return np.concatenate([[1.0], 1.0 / w])


def calibrate_conversion(css_shot_signals, n_nominal: float,
                         detectivity=(1.0, 1.0, 1.0, 1.0)) -> float:
    """Conversion factor from projection noise of an equal superposition.

    Solves the self-consistency Var(Sz) = N/4 where both Var(Sz) and the
    mean total N are inferred with the conversion under test; iterated as a
    fixed point to 1e-6 relative.  `n_nominal` seeds the iteration.
    """
    s = np.asarray(css_shot_signals, dtype=float)
    if s.ndim != 2 or s.shape[1] < 2 or s.shape[0] < 2:
        raise ValueError("need an (n >= 2, >= 2) signal array")
    if n_nominal <= 0:
        raise ValueError("n_nominal must be positive")
    det = np.asarray(detectivity, dtype=float)
    s1 = s[:, 0] / det[0]
    s2 = s[:, 1] / det[1]
    var_sig = (0.5 * (s1 - s2)).var(ddof=1)
    total_sig = float((s1 + s2).mean())
    if var_sig <= 0 or total_sig <= 0:
        raise CalibrationError("degenerate CSS signals (no variance or no atoms)")
    conv = total_sig / n_nominal
    for _ in range(100):
        n_inferred = total_sig / conv
        new = math.sqrt(var_sig / (n_inferred / 4.0))
        if abs(new - conv) <= 1e-6 * conv:
            return float(new)
        conv = new
    raise CalibrationError("conversion fixed point did not converge in 100 iterations")
