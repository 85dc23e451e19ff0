"""Shot-record generation for chosen measurement settings and noise.

Two sampling engines mirror the two splitting engines: `sample_exact` draws
atom counts from the four-mode probabilities of a `BipartiteFockState`,
`sample_gaussian` draws jointly normal spin values from `JointMoments`.
Both are deterministic given the seed; per-shot substreams are derived with
`numpy.random.SeedSequence((seed, shot_index))`, so parallel and serial
generation produce identical records.

Measurement model: measuring component w means rotating the state so w maps
onto z and then counting atoms.  System B is additionally rotated by theta_b
about x relative to A.  Whenever B's readout needs a final rotation pulse
(basis_b != "z"), the trigger jitter delta_t of the rf source enters as an
azimuthal offset delta_phi = omega_rf * delta_t applied as an exact z-rotation
before the basis pulse.  Basis values "x" and "-x" encode readout along the
positive and negative spin direction; the sign is needed by the contrast
estimator downstream.

Per-shot draw order is fixed (doc'd so regression streams stay stable):
exact engine: [delta_t, outcome, prep-noise, 4 x detection];
gaussian engine: [6 x spin, atom number, delta_t, 4 x detection].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ExactSizeLimitError, ModelError
from . import spin_core
from .spin_core import DickeState, OATSpec, make_coherent_state, moments_from_state
from .splitter import (
    AX, AY, AZ, BX, BY, BZ,
    EXACT_ATOM_LIMIT,
    BipartiteFockState,
    JointMoments,
    moments_from_bipartite,
    rotate_subsystems,
    sector_blocks,
    split_exact,
    split_moments,
)

TWO_PI = 2.0 * math.pi

VALID_BASES = ("x", "-x", "y", "z")

# state rotation (axis, angle) that maps the requested component onto Sz
BASIS_ROTATIONS = {
    "z": None,
    "y": ((1.0, 0.0, 0.0), math.pi / 2.0),
    "x": ((0.0, 1.0, 0.0), -math.pi / 2.0),
    "-x": ((0.0, 1.0, 0.0), math.pi / 2.0),
}


@dataclass(frozen=True)
class MeasurementSetting:
    """Readout bases for both systems plus B's extra rotation about x."""

    basis_a: str
    basis_b: str
    theta_b: float = 0.0

    def __post_init__(self):
        for name, basis in (("basis_a", self.basis_a), ("basis_b", self.basis_b)):
            if basis not in VALID_BASES:
                raise ValueError(f"{name} must be one of {VALID_BASES}, got {basis!r}")
        object.__setattr__(self, "theta_b", float(self.theta_b) % TWO_PI)


@dataclass(frozen=True)
class NoiseModel:
    """All knobs of the non-ideal pipeline.

    detection_sigma        additive Gaussian count noise per state, in atoms
    jitter_sigma_dt        rms trigger jitter of the rf source, in seconds
    omega_rf               rf angular frequency converting delta_t to phase
    contrast               ceiling on |<S>| / (N/2) of the prepared state
    anti_squeeze_excess_db extra preparation noise along the anti-squeezed
                           (y) direction, as the dB increase of the pre-split
                           Var(Sy)
    detectivity_sx_drop    relative drop of detected counts on x-basis shots
    """

    detection_sigma: float = 0.0
    jitter_sigma_dt: float = 0.0
    omega_rf: float = TWO_PI * 1.79e6
    contrast: float = 1.0
    anti_squeeze_excess_db: float = 0.0
    detectivity_sx_drop: float = 0.0

    def __post_init__(self):
        fields = (self.detection_sigma, self.jitter_sigma_dt, self.omega_rf,
                  self.contrast, self.anti_squeeze_excess_db, self.detectivity_sx_drop)
        if not all(math.isfinite(v) for v in fields):
            raise ValueError("all noise model fields must be finite")
        if self.detection_sigma < 0 or self.jitter_sigma_dt < 0:
            raise ValueError("noise widths must be non-negative")
        if not 0.0 < self.contrast <= 1.0:
            raise ValueError(f"contrast must be in (0, 1], got {self.contrast}")
        if self.anti_squeeze_excess_db < 0:
            raise ValueError("anti_squeeze_excess_db must be >= 0")
        if not 0.0 <= self.detectivity_sx_drop < 1.0:
            raise ValueError("detectivity_sx_drop must be in [0, 1)")

    @classmethod
    def ideal(cls) -> "NoiseModel":
        return cls()

    @classmethod
    def paper(cls) -> "NoiseModel":
        """Noise budget of the reference experiment.

        Detection noise of 3 atoms per state, 4 ns trigger jitter at
        omega_rf = 2 pi x 1.79 MHz, 96% contrast, a 3% detectivity drop on
        x shots, and excess anti-squeezing noise sized so the raw B-side
        uncertainty product lands near 10.
        """
        return cls(
            detection_sigma=3.0,
            jitter_sigma_dt=4e-9,
            omega_rf=TWO_PI * 1.79e6,
            contrast=0.96,
            anti_squeeze_excess_db=6.9,
            detectivity_sx_drop=0.03,
        )


@dataclass(frozen=True)
class ShotRecord:
    """One simulated repetition: four detected counts plus bookkeeping."""

    n1a: float
    n2a: float
    n1b: float
    n2b: float
    setting: MeasurementSetting
    delta_t: float
    shot_id: int
    seed: int

    def spin_a(self) -> float:
        return 0.5 * (self.n1a - self.n2a)

    def spin_b(self) -> float:
        return 0.5 * (self.n1b - self.n2b)


# ---------------------------------------------------------------------------
# component maps: 3x3 matrices R such that rotating the *state* by the given
# angle turns the measured component vector (Sx, Sy, Sz) into R @ (Sx, Sy, Sz)

def rot_x_components(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y_components(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z_components(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def basis_component_map(basis: str) -> np.ndarray:
    rot = BASIS_ROTATIONS[basis]
    if rot is None:
        return np.eye(3)
    axis, angle = rot
    if axis[0] == 1.0:
        return rot_x_components(angle)
    return rot_y_components(angle)


def derive_seed(*parts) -> int:
    """Stable 64-bit sub-seed from a tuple of non-negative integers."""
    ss = np.random.SeedSequence(tuple(int(p) for p in parts))
    return int(ss.generate_state(1, np.uint64)[0])


def _shot_rng(seed: int, index: int):
    ss = np.random.SeedSequence((int(seed), int(index)))
    return np.random.Generator(np.random.PCG64(ss)), int(ss.generate_state(1, np.uint64)[0])


def apply_preparation_noise(moments: JointMoments, noise: NoiseModel) -> JointMoments:
    """Fold the preparation knobs (contrast ceiling, excess anti-squeezing)
    into post-split joint moments.

    Contrast scales the mean vector down to contrast * N/2 (never up);
    the excess anti-squeezing adds pre-split Gaussian noise on Sy, which the
    partition distributes as the rank-one term (p, q)-weighted across A and B.
    """
    mean = moments.mean.copy()
    cov = moments.covariance.copy()
    n = moments.n_mean_a + moments.n_mean_b
    s = mean[:3] + mean[3:]
    length = float(np.linalg.norm(s))
    if length > 0.0:
        mean *= min(1.0, noise.contrast * (n / 2.0) / length)
    if noise.anti_squeeze_excess_db > 0.0:
        var_pre = cov[AY, AY] + cov[BY, BY] + 2.0 * cov[AY, BY]
        sig2 = (10.0 ** (noise.anti_squeeze_excess_db / 10.0) - 1.0) * max(var_pre, 0.0)
        w = np.zeros(6)
        w[AY] = moments.n_mean_a / n
        w[BY] = moments.n_mean_b / n
        cov = cov + sig2 * np.outer(w, w)
    return JointMoments(
        mean=mean, covariance=cov,
        n_mean_a=moments.n_mean_a, n_var_a=moments.n_var_a,
        n_mean_b=moments.n_mean_b, n_var_b=moments.n_var_b,
    )


def _b_measured_row(setting: MeasurementSetting, delta_phi: float) -> np.ndarray:
    """z-row of B's full component map, including theta and jitter."""
    m = basis_component_map(setting.basis_b)
    if delta_phi != 0.0:
        m = m @ rot_z_components(delta_phi)
    if setting.theta_b != 0.0:
        m = m @ rot_x_components(setting.theta_b)
    return m[2]


def sample_exact(state: BipartiteFockState, setting: MeasurementSetting,
                 noise: NoiseModel, n_shots: int, seed: int,
                 shot_id_start: int = 0) -> list:
    """Projective sampling from the exact four-mode probabilities."""
    n = state.n_atoms_total
    if n > EXACT_ATOM_LIMIT:
        raise ExactSizeLimitError(
            f"exact sampling is limited to N <= {EXACT_ATOM_LIMIT} atoms (got {n})"
        )
    if noise.contrast < 1.0:
        raise ModelError(
            "the exact engine evolves pure states and cannot impose a reduced "
            "contrast; use the gaussian engine or contrast = 1"
        )
    jm = moments_from_bipartite(state)
    p_frac = jm.n_mean_a / n
    q_frac = 1.0 - p_frac
    var_sy_pre = (jm.covariance[AY, AY] + jm.covariance[BY, BY]
                  + 2.0 * jm.covariance[AY, BY])
    sigma_add = math.sqrt(
        (10.0 ** (noise.anti_squeeze_excess_db / 10.0) - 1.0) * max(var_sy_pre, 0.0)
    )

    rot_b_pre = ((1.0, 0.0, 0.0), setting.theta_b) if setting.theta_b != 0.0 else None
    pre = rotate_subsystems(state, rot_a=BASIS_ROTATIONS[setting.basis_a], rot_b=rot_b_pre)
    blocks = sector_blocks(pre)
    sectors = sorted(blocks)

    rot_b = BASIS_ROTATIONS[setting.basis_b]
    ub = {}
    for _, nb in sectors:
        if nb not in ub:
            ub[nb] = (spin_core.rotation_matrix(nb, *rot_b).T
                      if rot_b is not None and nb > 0 else None)

    # flattened key arrays aligned with the probability vector
    key_rows = []
    for na, nb in sectors:
        for n1a in range(na + 1):
            for n1b in range(nb + 1):
                key_rows.append((n1a, na - n1a, n1b, nb - n1b))
    key_rows = np.array(key_rows, dtype=float)

    apply_jitter = setting.basis_b != "z"

    def prob_vector(delta_phi: float) -> np.ndarray:
        parts = []
        for na, nb in sectors:
            mat = blocks[(na, nb)]
            if delta_phi != 0.0:
                phases = np.exp(-1j * delta_phi * (np.arange(nb + 1) - nb / 2.0))
                mat = mat * phases[None, :]
            if ub[nb] is not None:
                mat = mat @ ub[nb]
            parts.append(np.abs(mat) ** 2)
        return np.concatenate([p.ravel() for p in parts])

    static_probs = None
    if not (apply_jitter and noise.jitter_sigma_dt > 0.0):
        static_probs = np.cumsum(prob_vector(0.0))

    row_a = basis_component_map(setting.basis_a)[2]
    scale_a = 1.0 - noise.detectivity_sx_drop if setting.basis_a in ("x", "-x") else 1.0
    scale_b = 1.0 - noise.detectivity_sx_drop if setting.basis_b in ("x", "-x") else 1.0

    records = []
    for i in range(n_shots):
        rng, shot_seed = _shot_rng(seed, i)
        dt = rng.standard_normal() * noise.jitter_sigma_dt
        delta_phi = noise.omega_rf * dt if apply_jitter else 0.0
        if static_probs is not None:
            cum = static_probs
        else:
            cum = np.cumsum(prob_vector(delta_phi))
        idx = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
        idx = min(idx, len(key_rows) - 1)
        n1a, n2a, n1b, n2b = key_rows[idx]

        eta = rng.standard_normal() * sigma_add
        if eta != 0.0:
            shift_a = p_frac * eta * row_a[1]
            shift_b = q_frac * eta * _b_measured_row(setting, delta_phi)[1]
            n1a += shift_a
            n2a -= shift_a
            n1b += shift_b
            n2b -= shift_b

        n1a *= scale_a
        n2a *= scale_a
        n1b *= scale_b
        n2b *= scale_b
        det = rng.standard_normal(4) * noise.detection_sigma
        records.append(ShotRecord(
            n1a=n1a + det[0], n2a=n2a + det[1],
            n1b=n1b + det[2], n2b=n2b + det[3],
            setting=setting, delta_t=dt,
            shot_id=shot_id_start + i, seed=shot_seed,
        ))
    return records


def sample_gaussian(moments: JointMoments, setting: MeasurementSetting,
                    noise: NoiseModel, n_shots: int, seed: int,
                    shot_id_start: int = 0) -> list:
    """Draw shots from jointly normal spin values (large-N engine).

    The spin 6-vector is drawn from the (noise-augmented, rotated) moments;
    the subsystem atom number from a rounded normal with the binomial
    partition variance.  The per-shot jitter rotation is applied exactly to
    the sampled vector, not linearized.
    """
    in_vals = np.linalg.eigvalsh(0.5 * (moments.covariance + moments.covariance.T))
    if in_vals.min() < -1e-9 * max(1.0, in_vals.max()):
        raise ModelError(
            f"covariance is not positive semidefinite (min eig {in_vals.min()})")
    prep = apply_preparation_noise(moments, noise)
    n_total = prep.n_total
    # conditional-mean scaling: given N_A atoms end up in A, the subsystem
    # means scale as N_A * <s_single>, so the number-induced part of the
    # covariance is carried by the drawn atom number and only the residual
    # fluctuation is sampled from the Gaussian factor
    w6 = np.zeros(6)
    if prep.n_mean_a > 0:
        w6[:3] = prep.mean[:3] / prep.n_mean_a
    if prep.n_mean_b > 0:
        w6[3:] = -prep.mean[3:] / prep.n_mean_b
    residual = prep.covariance - prep.n_var_a * np.outer(w6, w6)
    t6 = np.zeros((6, 6))
    t6[:3, :3] = basis_component_map(setting.basis_a)
    t6[3:, 3:] = rot_x_components(setting.theta_b)
    mu = t6 @ prep.mean
    w_rot = t6 @ w6
    cov = t6 @ residual @ t6.T
    vals, vecs = np.linalg.eigh(0.5 * (cov + cov.T))
    factor = vecs * np.sqrt(np.clip(vals, 0.0, None))[None, :]

    map_b = basis_component_map(setting.basis_b)
    apply_jitter = setting.basis_b != "z"
    sd_na = math.sqrt(max(prep.n_var_a, 0.0))
    scale_a = 1.0 - noise.detectivity_sx_drop if setting.basis_a in ("x", "-x") else 1.0
    scale_b = 1.0 - noise.detectivity_sx_drop if setting.basis_b in ("x", "-x") else 1.0

    records = []
    for i in range(n_shots):
        rng, shot_seed = _shot_rng(seed, i)
        v = mu + factor @ rng.standard_normal(6)
        n_a = prep.n_mean_a + rng.standard_normal() * sd_na
        n_a = min(max(round(n_a), 0), n_total)
        n_b = n_total - n_a
        v = v + (n_a - prep.n_mean_a) * w_rot
        dt = rng.standard_normal() * noise.jitter_sigma_dt
        vb = v[3:]
        if apply_jitter and dt != 0.0:
            vb = rot_z_components(noise.omega_rf * dt) @ vb
        vb = map_b @ vb
        za, zb = v[2], vb[2]
        det = rng.standard_normal(4) * noise.detection_sigma
        records.append(ShotRecord(
            n1a=scale_a * (0.5 * n_a + za) + det[0],
            n2a=scale_a * (0.5 * n_a - za) + det[1],
            n1b=scale_b * (0.5 * n_b + zb) + det[2],
            n2b=scale_b * (0.5 * n_b - zb) + det[3],
            setting=setting, delta_t=dt,
            shot_id=shot_id_start + i, seed=shot_seed,
        ))
    return records


# ---------------------------------------------------------------------------
# end-to-end pipeline

def prepare_state(n_atoms: int, squeezing_db=None, chi_t=None):
    """CSS(x), twisted and rotated so the squeezed quadrature lies along z.

    Either a squeezing target in dB (negative) or an explicit twisting phase
    may be given; with neither, the plain coherent state is returned.
    Returns (DickeState, OATSpec).
    """
    if chi_t is not None and squeezing_db is not None:
        raise ValueError("give either squeezing_db or chi_t, not both")
    css = make_coherent_state(n_atoms, math.pi / 2.0, 0.0)
    if chi_t is not None:
        _, angle = spin_core._transverse_squeezing(n_atoms, chi_t)
        spec = OATSpec(chi_t=float(chi_t), post_rotation_axis=(1.0, 0.0, 0.0),
                       post_rotation_angle=angle)
        return spin_core.apply_oat(css, spec), spec
    if squeezing_db is not None and squeezing_db != 0.0:
        return spin_core.squeezed_state(n_atoms, squeezing_db)
    spec = OATSpec(chi_t=0.0)
    return css, spec


def block_setting_counts(config) -> list:
    """Per-block schedule: z, y, then x split evenly over +x and -x."""
    nx_pos = (config.block_x + 1) // 2
    nx_neg = config.block_x - nx_pos
    plan = [("z", "z", config.block_z), ("y", "y", config.block_y),
            ("x", "x", nx_pos), ("-x", "-x", nx_neg)]
    return [(a, b, c) for a, b, c in plan if c > 0]


def resolve_engine(config) -> str:
    if config.engine == "auto":
        return "exact" if config.n_atoms <= config.exact_limit else "gaussian"
    if config.engine == "exact" and config.n_atoms > config.exact_limit:
        raise ValueError(
            f"engine 'exact' supports at most {config.exact_limit} atoms but the "
            f"config asks for {config.n_atoms}; use engine 'gaussian' or 'auto'"
        )
    if config.engine not in ("exact", "gaussian"):
        raise ValueError(f"unknown engine {config.engine!r}")
    return config.engine


def run_experiment(config, seed=None) -> list:
    """Full pipeline: prepare, split, and emit shot blocks per the schedule.

    Each block holds block_z z-shots, block_y y-shots and block_x x-shots
    (half along +x, half along -x), in that order.  Identical seeds give
    bit-identical record streams.
    """
    root_seed = config.seed if seed is None else seed
    engine = resolve_engine(config)
    state, _ = prepare_state(config.n_atoms, config.squeezing_db, config.chi_t)
    if engine == "exact":
        source = split_exact(state, config.transmission)
    else:
        source = split_moments(moments_from_state(state), config.transmission)
    plan = block_setting_counts(config)
    records = []
    shot_id = 0
    for block in range(config.n_blocks):
        for si, (basis_a, basis_b, count) in enumerate(plan):
            setting = MeasurementSetting(basis_a, basis_b, config.theta_b)
            sub_seed = derive_seed(root_seed, block, si)
            if engine == "exact":
                batch = sample_exact(source, setting, config.noise, count,
                                     sub_seed, shot_id)
            else:
                batch = sample_gaussian(source, setting, config.noise, count,
                                        sub_seed, shot_id)
            records.extend(batch)
            shot_id += count
    return records
