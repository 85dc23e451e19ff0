"""Steering, entanglement, and uncertainty-product estimators on shot records.

All spin values come from counts as S = (n1 - n2)/2 for both systems.
Variances use the unbiased (n-1) normalization throughout.  The criteria:

  E_Hei^K  = 4 Var(Sz^K) Var(Sy^K) / <Sx^K>^2          (raw, never corrected)
  E_EPR    = 4 Var_inf(Sz^T) Var_inf(Sy^T) / <Sx^T>^2  (T = inferred system)
  E_Ent    = 4 Var(g_z Sz^A + Sz^B) Var(g_y Sy^A + Sy^B)
             / (|g_z g_y| |<Sx^A>| + |<Sx^B>|)^2, minimized over (g_z, g_y)

Inferred variances use the optimal linear estimate -g x + c.  The trigger
jitter correction Sy^B -> Sy^B + g_dt * delta_t may be applied to the EPR
criterion (it is classical side information and cannot fake a violation);
it is never applied to the entanglement criterion.  <Sx> is estimated from
the sign-folded relative imbalance of the +-x shots times the mean total
atom number of the y/z shots, which makes it immune to the x-shot
detectivity drop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import IncompleteDatasetError, UndefinedValueError
from .splitter import AX, AY, AZ, BX, BY, BZ, JointMoments

ENT_TOL = 1e-6


@dataclass(frozen=True)
class CorrectionPolicy:
    """Which classical corrections the EPR evaluation may use."""

    jitter_correction: bool = True


@dataclass(frozen=True)
class GainSet:
    g_z: float
    g_y: float
    c_z: float
    c_y: float
    g_dt: float = 0.0

    def __post_init__(self):
        vals = (self.g_z, self.g_y, self.c_z, self.c_y, self.g_dt)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("gains must be finite")

    def to_json_dict(self) -> dict:
        return {"g_z": self.g_z, "g_y": self.g_y, "c_z": self.c_z,
                "c_y": self.c_y, "g_dt": self.g_dt}


def optimal_inference(x_values, y_values):
    """Best linear prediction of y from x via the estimate -g x + c.

    Returns (g, c, var_inf) with g = -Cov(x, y)/Var(x), c chosen so the
    estimate is unbiased, and var_inf = Var(y) (1 - rho^2).  A constant
    predictor degenerates to g = 0, var_inf = Var(y).
    """
    x = np.asarray(x_values, dtype=float)
    y = np.asarray(y_values, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ValueError("x and y must be equal-length 1-D arrays with >= 2 entries")
    var_x = x.var(ddof=1)
    var_y = y.var(ddof=1)
    if var_x <= 0.0:
        return 0.0, float(y.mean()), float(var_y)
    cov = float(np.cov(x, y, ddof=1)[0, 1])
    g = -cov / var_x
    c = float(y.mean() + g * x.mean())
    var_inf = float(max(var_y - cov * cov / var_x, 0.0))
    return float(g), c, var_inf


def jitter_correct(sy_b_values, delta_t_values):
    """Least-squares removal of the trigger-jitter phase from Sy^B.

    Returns (corrected values, g_dt) for the correction sy + g_dt * dt;
    the corrected variance never exceeds the uncorrected one.
    """
    sy = np.asarray(sy_b_values, dtype=float)
    dt = np.asarray(delta_t_values, dtype=float)
    if sy.shape != dt.shape:
        raise ValueError("value and delta_t arrays must have equal length")
    var_dt = dt.var(ddof=1) if len(dt) > 1 else 0.0
    if var_dt <= 0.0:
        return sy.copy(), 0.0
    g_dt = -float(np.cov(sy, dt, ddof=1)[0, 1]) / var_dt
    return sy + g_dt * dt, g_dt


def _system_counts(record, system: str):
    if system == "a":
        return record.n1a, record.n2a
    if system == "b":
        return record.n1b, record.n2b
    raise ValueError(f"system must be 'a' or 'b', got {system!r}")


def _system_basis(record, system: str) -> str:
    return record.setting.basis_a if system == "a" else record.setting.basis_b


def _spin_values(records, system: str) -> np.ndarray:
    return np.array([0.5 * (n1 - n2) for n1, n2 in
                     (_system_counts(r, system) for r in records)])


def sx_estimator(x_setting_records, yz_setting_records, system: str) -> float:
    """<Sx> from sign-folded relative imbalance times the y/z total number.

    Per x shot the imbalance (n1 - n2)/(n1 + n2) is folded by the readout
    sign (+x or -x); the mean is multiplied by half the mean total atom
    number seen in the y/z shots, where detectivity is calibrated.
    """
    if not x_setting_records or not yz_setting_records:
        raise IncompleteDatasetError("need both x-setting and y/z-setting records")
    folded = []
    for r in x_setting_records:
        n1, n2 = _system_counts(r, system)
        total = n1 + n2
        if abs(total) < 1e-12:
            raise UndefinedValueError("zero total atom number in an x shot")
        sign = -1.0 if _system_basis(r, system) == "-x" else 1.0
        folded.append(sign * (n1 - n2) / total)
    totals = [sum(_system_counts(r, system)) for r in yz_setting_records]
    mean_total = float(np.mean(totals))
    if mean_total <= 0.0:
        raise UndefinedValueError("mean total atom number is not positive")
    return float(np.mean(folded)) * mean_total / 2.0


def _setting_group(record) -> str | None:
    ba, bb = record.setting.basis_a, record.setting.basis_b
    if ba == "z" and bb == "z":
        return "z"
    if ba == "y" and bb == "y":
        return "y"
    if ba in ("x", "-x") and bb in ("x", "-x"):
        return "x"
    return None


def split_groups(records):
    """Partition records into the z, y, and x measurement groups."""
    groups = {"z": [], "y": [], "x": []}
    for r in records:
        g = _setting_group(r)
        if g is not None:
            groups[g].append(r)
    return groups


@dataclass(frozen=True)
class DatasetStats:
    """Sufficient statistics of one dataset (or block) for all criteria."""

    vz_a: float
    vz_b: float
    cz: float
    mz_a: float
    mz_b: float
    vy_a: float
    vy_b_raw: float
    cy_raw: float
    vy_b_corr: float
    cy_corr: float
    my_a: float
    my_b: float
    g_dt: float
    sx_a: float
    sx_b: float
    corr_zz: float
    n_z: int
    n_y: int
    n_x: int


def dataset_stats(records) -> DatasetStats:
    groups = split_groups(records)
    if len(groups["z"]) < 2 or len(groups["y"]) < 2 or not groups["x"]:
        raise IncompleteDatasetError(
            "dataset must contain z-, y-, and x-setting shots "
            f"(got z={len(groups['z'])}, y={len(groups['y'])}, x={len(groups['x'])})"
        )
    sz_a = _spin_values(groups["z"], "a")
    sz_b = _spin_values(groups["z"], "b")
    sy_a = _spin_values(groups["y"], "a")
    sy_b = _spin_values(groups["y"], "b")
    dt = np.array([r.delta_t for r in groups["y"]])
    sy_b_corr, g_dt = jitter_correct(sy_b, dt)
    yz = groups["y"] + groups["z"]
    vz_a = sz_a.var(ddof=1)
    vz_b = sz_b.var(ddof=1)
    cz = float(np.cov(sz_a, sz_b, ddof=1)[0, 1])
    denom = math.sqrt(vz_a * vz_b)
    return DatasetStats(
        vz_a=float(vz_a), vz_b=float(vz_b), cz=cz,
        mz_a=float(sz_a.mean()), mz_b=float(sz_b.mean()),
        vy_a=float(sy_a.var(ddof=1)),
        vy_b_raw=float(sy_b.var(ddof=1)),
        cy_raw=float(np.cov(sy_a, sy_b, ddof=1)[0, 1]),
        vy_b_corr=float(sy_b_corr.var(ddof=1)),
        cy_corr=float(np.cov(sy_a, sy_b_corr, ddof=1)[0, 1]),
        my_a=float(sy_a.mean()), my_b=float(sy_b_corr.mean()),
        g_dt=float(g_dt),
        sx_a=sx_estimator(groups["x"], yz, "a"),
        sx_b=sx_estimator(groups["x"], yz, "b"),
        corr_zz=cz / denom if denom > 0 else 0.0,
        n_z=len(groups["z"]), n_y=len(groups["y"]), n_x=len(groups["x"]),
    )


def _inferred_variance(var_target, var_pred, cov):
    if var_pred <= 0.0:
        return float(var_target), 0.0
    g = -cov / var_pred
    return float(max(var_target - cov * cov / var_pred, 0.0)), float(g)


def _epr_from_stats(stats: DatasetStats, direction: str, corrected: bool):
    if corrected:
        vy_b, cy = stats.vy_b_corr, stats.cy_corr
    else:
        vy_b, cy = stats.vy_b_raw, stats.cy_raw
    if direction == "a_to_b":
        vinf_z, g_z = _inferred_variance(stats.vz_b, stats.vz_a, stats.cz)
        vinf_y, g_y = _inferred_variance(vy_b, stats.vy_a, cy)
        sx = stats.sx_b
        c_z = stats.mz_b + g_z * stats.mz_a
        c_y = stats.my_b + g_y * stats.my_a
    elif direction == "b_to_a":
        vinf_z, g_z = _inferred_variance(stats.vz_a, stats.vz_b, stats.cz)
        vinf_y, g_y = _inferred_variance(stats.vy_a, vy_b, cy)
        sx = stats.sx_a
        c_z = stats.mz_a + g_z * stats.mz_b
        c_y = stats.my_a + g_y * stats.my_b
    else:
        raise ValueError(f"direction must be 'a_to_b' or 'b_to_a', got {direction!r}")
    if sx == 0.0:
        raise UndefinedValueError("zero mean Sx; EPR criterion undefined")
    value = 4.0 * vinf_z * vinf_y / sx ** 2
    gains = GainSet(g_z=g_z, g_y=g_y, c_z=c_z, c_y=c_y,
                    g_dt=stats.g_dt if corrected else 0.0)
    return value, gains


def epr_criterion(records, direction: str = "a_to_b",
                  policy: CorrectionPolicy = CorrectionPolicy()) -> float:
    """Reid-type steering parameter; a value below 1 signals EPR steering."""
    stats = dataset_stats(records)
    value, _ = _epr_from_stats(stats, direction, policy.jitter_correction)
    return value


def heisenberg_product(records, system: str) -> float:
    """Raw uncertainty product of one system, no corrections of any kind."""
    stats = dataset_stats(records)
    return _hei_from_stats(stats, system)


def _hei_from_stats(stats: DatasetStats, system: str) -> float:
    if system == "a":
        vz, vy, sx = stats.vz_a, stats.vy_a, stats.sx_a
    elif system == "b":
        vz, vy, sx = stats.vz_b, stats.vy_b_raw, stats.sx_b
    else:
        raise ValueError(f"system must be 'a' or 'b', got {system!r}")
    if sx == 0.0:
        raise UndefinedValueError("zero mean Sx; uncertainty product undefined")
    return 4.0 * vz * vy / sx ** 2


def _golden_min(fun, lo, hi, tol):
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = fun(d)
    x = 0.5 * (a + b)
    return x, fun(x)


def _minimize_line(fun, center, scale, tol):
    """1-D minimum over two golden brackets around +-|center| and zero."""
    span = max(abs(center) * 2.0, scale, 1e-6)
    best_x, best_f = 0.0, fun(0.0)
    for lo, hi in ((-span, 0.0), (0.0, span)):
        x, f = _golden_min(fun, lo, hi, tol * max(span, 1.0) * 1e-3)
        if f < best_f:
            best_x, best_f = x, f
    return best_x, best_f


def _ent_from_stats(stats: DatasetStats):
    """Minimize the gain-weighted variance-sum product criterion.

    Coarse candidate seeding (including the variance-minimizing gains of
    both inference directions) followed by coordinate descent with golden
    section line searches, to ENT_TOL on the criterion value.
    """
    vz_a, vz_b, cz = stats.vz_a, stats.vz_b, stats.cz
    vy_a, vy_b, cy = stats.vy_a, stats.vy_b_raw, stats.cy_raw
    sx_a, sx_b = abs(stats.sx_a), abs(stats.sx_b)
    if sx_a == 0.0 and sx_b == 0.0:
        raise UndefinedValueError("zero mean Sx on both systems")

    def objective(gz, gy):
        num_z = gz * gz * vz_a + 2.0 * gz * cz + vz_b
        num_y = gy * gy * vy_a + 2.0 * gy * cy + vy_b
        den = (abs(gz * gy) * sx_a + sx_b) ** 2
        if den == 0.0:
            return math.inf
        return 4.0 * max(num_z, 0.0) * max(num_y, 0.0) / den

    gz0 = -cz / vz_a if vz_a > 0 else 0.0
    gy0 = -cy / vy_a if vy_a > 0 else 0.0
    candidates = [(gz0, gy0), (0.0, 0.0)]
    # reciprocal of the B->A variance-minimizing gains also bounds E_EPR^(B->A)
    gz_ba = -cz / vz_b if vz_b > 0 else 0.0
    gy_ba = -cy / vy_b if vy_b > 0 else 0.0
    if gz_ba != 0.0 and gy_ba != 0.0:
        candidates.append((1.0 / gz_ba, 1.0 / gy_ba))
    gz, gy = min(candidates, key=lambda c: objective(*c))
    value = objective(gz, gy)
    for _ in range(60):
        gz, _ = _minimize_line(lambda g: objective(g, gy), gz, abs(gz0) + 1.0, ENT_TOL)
        gy, new = _minimize_line(lambda g: objective(gz, g), gy, abs(gy0) + 1.0, ENT_TOL)
        if value - new < ENT_TOL * max(1.0, abs(value)):
            value = min(value, new)
            break
        value = new
    reused = objective(gz0, gy0)
    return value, GainSet(g_z=gz, g_y=gy, c_z=0.0, c_y=0.0), reused


def ent_criterion(records, gains=None) -> float:
    """Non-separability parameter; below 1 signals entanglement.

    Gains are optimized jointly unless a fixed (g_z, g_y) pair is passed
    (forcing (0, 0) recovers the raw B-side uncertainty product).  The
    jitter correction is never applied here.
    """
    stats = dataset_stats(records)
    if gains is not None:
        gz, gy = gains
        num_z = gz * gz * stats.vz_a + 2.0 * gz * stats.cz + stats.vz_b
        num_y = gy * gy * stats.vy_a + 2.0 * gy * stats.cy_raw + stats.vy_b_raw
        den = (abs(gz * gy) * abs(stats.sx_a) + abs(stats.sx_b)) ** 2
        return 4.0 * max(num_z, 0.0) * max(num_y, 0.0) / den
    value, _, _ = _ent_from_stats(stats)
    return value


def criteria_set(stats: DatasetStats) -> dict:
    """All criteria from one set of sufficient statistics."""
    out = {}
    out["epr_a_to_b"], _ = _epr_from_stats(stats, "a_to_b", corrected=True)
    out["epr_b_to_a"], _ = _epr_from_stats(stats, "b_to_a", corrected=True)
    out["epr_a_to_b_uncorrected"], _ = _epr_from_stats(stats, "a_to_b", corrected=False)
    out["epr_b_to_a_uncorrected"], _ = _epr_from_stats(stats, "b_to_a", corrected=False)
    ent, _, reused = _ent_from_stats(stats)
    out["ent"] = ent
    out["ent_reused_gains"] = reused
    out["hei_a"] = _hei_from_stats(stats, "a")
    out["hei_b"] = _hei_from_stats(stats, "b")
    out["corr_zz"] = stats.corr_zz
    return out


CRITERIA_KEYS = ("epr_a_to_b", "epr_b_to_a", "epr_a_to_b_uncorrected",
                 "epr_b_to_a_uncorrected", "ent", "ent_reused_gains",
                 "hei_a", "hei_b", "corr_zz")


@dataclass(frozen=True)
class BlockSpec:
    """Per-block measurement composition."""

    n_z: int = 100
    n_y: int = 100
    n_x: int = 20


def partition_blocks(records, spec: BlockSpec = BlockSpec()):
    """Chronological partition into fixed-composition blocks.

    Each record joins the earliest block whose quota for its measurement
    group is open; trailing incomplete blocks are discarded, not merged.
    Returns (blocks, n_discarded) where n_discarded counts records left out.
    """
    quotas = {"z": spec.n_z, "y": spec.n_y, "x": spec.n_x}
    counters = {"z": 0, "y": 0, "x": 0}
    assigned: dict = {}
    n_foreign = 0
    for r in records:
        g = _setting_group(r)
        if g is None or quotas[g] == 0:
            n_foreign += 1
            continue
        b = counters[g] // quotas[g]
        counters[g] += 1
        assigned.setdefault(b, []).append(r)
    active = [g for g in quotas if quotas[g] > 0]
    n_complete = min(counters[g] // quotas[g] for g in active) if active else 0
    blocks = [assigned[i] for i in range(n_complete)]
    used = sum(len(b) for b in blocks)
    return blocks, len(records) - used


def block_analysis(records, spec: BlockSpec = BlockSpec()):
    """Per-block criteria plus their averages and the single-block values.

    Returns a dict with keys 'per_block' (list of criteria dicts),
    'means', 'single_block', 'n_blocks', 'n_discarded'.  Gains, including
    the jitter-correction gain, are fitted freshly within every block.
    """
    blocks, n_discarded = partition_blocks(records, spec)
    if not blocks:
        raise IncompleteDatasetError(
            f"not enough records for one full block "
            f"({spec.n_z} z + {spec.n_y} y + {spec.n_x} x)"
        )
    per_block = [criteria_set(dataset_stats(b)) for b in blocks]
    means = {k: float(np.mean([pb[k] for pb in per_block])) for k in CRITERIA_KEYS}
    single = criteria_set(dataset_stats(records))
    return {
        "per_block": per_block,
        "means": means,
        "single_block": single,
        "n_blocks": len(blocks),
        "n_discarded": n_discarded,
    }


def bootstrap_errors(records, n_resamples: int = 500, seed: int = 0,
                     spec: BlockSpec = BlockSpec()) -> dict:
    """Nonparametric bootstrap over blocks; deterministic given the seed."""
    if n_resamples < 100:
        raise ValueError("n_resamples must be >= 100")
    analysis = block_analysis(records, spec)
    return bootstrap_errors_from_blocks(analysis["per_block"], n_resamples, seed)


def bootstrap_errors_from_blocks(per_block, n_resamples: int = 500,
                                 seed: int = 0) -> dict:
    values = {k: np.array([pb[k] for pb in per_block]) for k in per_block[0]}
    n = len(per_block)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))
    idx = rng.integers(0, n, size=(n_resamples, n))
    errors = {}
    for k, v in values.items():
        resampled = v[idx].mean(axis=1)
        errors[k] = float(resampled.std(ddof=1))
    return errors


# ---------------------------------------------------------------------------
# moment-level evaluation (oracles and engine-free checks)

def _stats_from_moments(jm: JointMoments, detection_sigma: float = 0.0) -> DatasetStats:
    c = jm.covariance
    det = 0.5 * detection_sigma ** 2      # Var((d1 - d2)/2) per spin value
    return DatasetStats(
        vz_a=c[AZ, AZ] + det, vz_b=c[BZ, BZ] + det, cz=c[AZ, BZ],
        mz_a=jm.mean[AZ], mz_b=jm.mean[BZ],
        vy_a=c[AY, AY] + det,
        vy_b_raw=c[BY, BY] + det, cy_raw=c[AY, BY],
        vy_b_corr=c[BY, BY] + det, cy_corr=c[AY, BY],
        my_a=jm.mean[AY], my_b=jm.mean[BY],
        g_dt=0.0,
        sx_a=jm.mean[AX], sx_b=jm.mean[BX],
        corr_zz=c[AZ, BZ] / math.sqrt(c[AZ, AZ] * c[BZ, BZ])
        if c[AZ, AZ] > 0 and c[BZ, BZ] > 0 else 0.0,
        n_z=0, n_y=0, n_x=0,
    )


def criteria_from_moments(jm: JointMoments, detection_sigma: float = 0.0) -> dict:
    """Criteria evaluated directly on joint moments (no sampling, no jitter)."""
    return criteria_set(_stats_from_moments(jm, detection_sigma))


# ---------------------------------------------------------------------------
# report assembly

@dataclass(frozen=True)
class CriteriaReport:
    """Everything an analysis run produces, ready for serialization."""

    epr_a_to_b: float
    epr_b_to_a: float
    ent: float
    hei_a: float
    hei_b: float
    epr_a_to_b_uncorrected: float
    epr_b_to_a_uncorrected: float
    ent_reused_gains: float
    corr_zz: float
    gains: dict
    per_block: list
    single_block: dict
    errors: dict
    n_shots_used: dict
    n_blocks: int
    n_discarded: int
    jitter_correction: bool
    error_method: str = "block-bootstrap"

    def __post_init__(self):
        for name in ("epr_a_to_b", "epr_b_to_a", "ent", "hei_a", "hei_b"):
            if getattr(self, name) < 0:
                raise ValueError(f"criterion {name} must be >= 0")

    def to_json_dict(self) -> dict:
        return {
            "criteria": {
                "epr_a_to_b": self.epr_a_to_b,
                "epr_b_to_a": self.epr_b_to_a,
                "ent": self.ent,
                "hei_a": self.hei_a,
                "hei_b": self.hei_b,
                "epr_a_to_b_uncorrected": self.epr_a_to_b_uncorrected,
                "epr_b_to_a_uncorrected": self.epr_b_to_a_uncorrected,
                "ent_reused_gains": self.ent_reused_gains,
                "corr_zz": self.corr_zz,
            },
            "errors": self.errors,
            "error_method": self.error_method,
            "gains": {k: v.to_json_dict() for k, v in self.gains.items()},
            "per_block": self.per_block,
            "single_block": self.single_block,
            "n_shots_used": self.n_shots_used,
            "n_blocks": self.n_blocks,
            "n_discarded": self.n_discarded,
            "jitter_correction": self.jitter_correction,
        }


def build_report(records, policy: CorrectionPolicy = CorrectionPolicy(),
                 spec: BlockSpec = BlockSpec(), n_resamples: int = 500,
                 seed: int = 0) -> CriteriaReport:
    """Block analysis, bootstrap errors, and whole-dataset gains in one go.

    Headline criteria are the block averages; the whole-dataset single-block
    values are reported alongside.  When the policy disables the jitter
    correction the corrected fields simply repeat the uncorrected ones.
    """
    analysis = block_analysis(records, spec)
    errors = bootstrap_errors_from_blocks(analysis["per_block"], n_resamples, seed)
    means = analysis["means"]
    stats = dataset_stats(records)
    corrected = policy.jitter_correction
    gains = {
        "a_to_b": _epr_from_stats(stats, "a_to_b", corrected)[1],
        "b_to_a": _epr_from_stats(stats, "b_to_a", corrected)[1],
    }
    _, ent_gains, _ = _ent_from_stats(stats)
    gains["ent"] = ent_gains
    key_a2b = "epr_a_to_b" if corrected else "epr_a_to_b_uncorrected"
    key_b2a = "epr_b_to_a" if corrected else "epr_b_to_a_uncorrected"
    groups = split_groups(records)
    n_blocks = analysis["n_blocks"]
    return CriteriaReport(
        epr_a_to_b=means[key_a2b],
        epr_b_to_a=means[key_b2a],
        ent=means["ent"],
        hei_a=means["hei_a"],
        hei_b=means["hei_b"],
        epr_a_to_b_uncorrected=means["epr_a_to_b_uncorrected"],
        epr_b_to_a_uncorrected=means["epr_b_to_a_uncorrected"],
        ent_reused_gains=means["ent_reused_gains"],
        corr_zz=means["corr_zz"],
        gains=gains,
        per_block=analysis["per_block"],
        single_block=analysis["single_block"],
        errors=errors,
        n_shots_used={g: min(len(groups[g]),
                             n_blocks * getattr(spec, f"n_{g}"))
                      for g in ("z", "y", "x")},
        n_blocks=n_blocks,
        n_discarded=analysis["n_discarded"],
        jitter_correction=corrected,
    )
