"""Two-user MISO broadcast channel simulator.

DoF regions and ergodic achievable rates under perfect delayed plus
imperfect current transmitter CSI, with Monte Carlo evaluation of the exact
rate formulas and quadrature oracles for the analytic ingredients.
"""

__version__ = "0.1.0"

from .channel import (
    ChannelBatch,
    ChannelSample,
    CsitConfig,
    DopplerParams,
    alpha_from_doppler,
    orthogonal_complement,
    projector,
    sample_batch,
    sample_channel,
)
from .mc import McConfig, McEstimate, NonFiniteSampleError, estimate, per_sample
from .oracles import (
    BoundsCheckReport,
    QuadratureConfig,
    QuadratureError,
    conditional_log_bounds_check,
    exp_log_mean,
    rotation_mean_log_closed_form,
    rotation_mean_log_quadrature,
)
from .rates import (
    CommonMessageRates,
    PowerPolicy,
    RateResult,
    default_phase2_policy,
    default_policy,
    interference_power,
    mimo_rate,
    quantization_rate,
    rate_baseline,
    rate_common_message,
    rate_proposed,
    rate_scheme,
)
from .regions import (
    DelayedCsitQuality,
    DofRegion,
    Scheme,
    contains,
    dof_imperfect_delayed,
    dof_scheme,
    region_common_message,
    region_imperfect_delayed,
    region_main,
)
