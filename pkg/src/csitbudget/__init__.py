"""Training and feedback budgeting for the zero-forcing multiuser MIMO downlink."""

from .config import (
    ALL_SCHEMES,
    FeedbackScheme,
    RateResult,
    ResourceSplit,
    SchemeKind,
    SystemConfig,
    analog,
    digital_error_free,
    digital_qam,
    sum_rate_bps,
    tdd_open_loop,
)
from .rates import (
    digital_gap_from_bits,
    exp_integral_e1,
    feedback_error_prob,
    gap_g,
    gaussian_q,
    net_spectral_efficiency,
    qam_message_error,
    qam_symbol_error,
    rate_gap,
    zf_rate_perfect_csit,
)
from .optimize import (
    OptimizationResult,
    effective_gap_bound,
    inner_allocate_analog,
    inner_allocate_digital,
    net_rate_for_split,
    optimize_analog,
    optimize_digital_errorfree,
    optimize_digital_qam,
    optimize_scheme,
    optimize_tdd,
    round_split,
)
from .tradeoff import (
    ParetoPoint,
    TrainingOptimum,
    downlink_rate_bps,
    feedback_loss,
    pareto_boundary,
    tfb_of_lambda,
    uplink_rate_bps,
    w_lower_bound,
    w_of_tfb,
)
from .doppler import (
    DopplerModel,
    PredictionTrainingResult,
    TabulatedSpectrum,
    delayed_pareto,
    delayed_rate_gap,
    doppler_shift,
    filtering_mmse,
    kappa,
    optimize_training_prediction,
    prediction_mmse,
    rate_vs_speed,
)
from .montecarlo import (
    AnalogCsit,
    ChannelBatch,
    McEstimate,
    MmseCsit,
    PerfectCsit,
    RvqCsit,
    RzfCache,
    SelectionOutcome,
    ergodic_rate_mc,
    greedy_user_selection,
    mmse_estimate,
    pareto_with_users,
    r_zf_k_mc,
    rate_lower_bound,
    rvq_quantize,
    w_of_tfb_users,
    zf_beamformers,
)

__version__ = "0.1.0"
