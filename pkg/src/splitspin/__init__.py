"""Simulator and analysis toolkit for EPR steering between two split
atomic collective spins: squeezed-state preparation, coherent 50:50
splitting, noisy projective measurement sampling, and criteria estimation
from shot records."""

from .spin_core import (
    DickeState,
    OATSpec,
    SpinMoments,
    apply_oat,
    apply_rotation,
    make_coherent_state,
    moments_from_state,
    rotation_matrix,
    squeezed_state,
    twisting_phase_for_db,
    wineland_parameter,
)
from .splitter import (
    EXACT_ATOM_LIMIT,
    BipartiteFockState,
    JointMoments,
    moments_from_bipartite,
    split_exact,
    split_moments,
)
from .sampler import (
    MeasurementSetting,
    NoiseModel,
    ShotRecord,
    apply_preparation_noise,
    prepare_state,
    run_experiment,
    sample_exact,
    sample_gaussian,
)
from .criteria import (
    BlockSpec,
    CorrectionPolicy,
    CriteriaReport,
    GainSet,
    block_analysis,
    bootstrap_errors,
    build_report,
    criteria_from_moments,
    ent_criterion,
    epr_criterion,
    heisenberg_product,
    jitter_correct,
    optimal_inference,
    sx_estimator,
)
from .calibration import (
    DetectorModel,
    calibrate_conversion,
    calibrate_detectivity,
    invert_counts,
    simulate_raw_signals,
)
from .pulses import DriveScheme, Tone, rabi_transfer, selectivity_report, simulate_scheme
from .config import RunConfig, config_hash, load_config, save_config

__version__ = "0.1.0"
