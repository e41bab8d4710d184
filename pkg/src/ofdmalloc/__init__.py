"""Optimal rate and power allocation for multiuser OFDM channels.

Three solvers over one instance type (per-user per-carrier power gains plus
a noise power): weighted-sum-rate maximization under a power budget,
sum-power minimization under rate requirements, and the combination of
both.  Uplink and downlink allocations map onto each other through the
duality transform; all solutions come with optimality residuals and the
decode/encode orders implied by their multipliers.
"""

from ._kernels import BACKEND as kernel_backend
from .channel import (
    ChannelGains,
    ChannelTaps,
    gains_from_taps,
    generate_random_channel,
    load_instance,
    load_taps,
    save_instance,
    save_taps,
)
from .capacity import (
    DecodingOrder,
    PowerAllocation,
    RateAllocation,
    bc_rates,
    bc_to_mac_powers,
    kkt_residuals_minpower,
    kkt_residuals_wsr,
    mac_rates,
    mac_to_bc_powers,
    rates_to_powers,
)
from .errors import (
    ConvergenceError,
    InfeasibleError,
    InstanceFormatError,
    OfdmAllocError,
    UnreachableUserError,
)
from .minpower import (
    carrier_orders,
    cost_coefficients,
    effective_noise,
    extract_decoding_orders,
    solve_minpower,
    waterfill_user,
)
from .minrates import (
    MinRatesProblem,
    check_feasibility,
    rate_monotonicity_probe,
    solve_minrates_waterfill,
    solve_minrates_weights,
    tangent_normal,
)
from .oracle import GridSpec, grid_minpower, grid_wsr, sample_feasible_region
from .report import DualState, SolverReport, write_report, write_trace_csv
from .wsr import (
    CarrierSegmentation,
    check_fdma_optimality,
    check_single_user_optimality,
    fdma_waterfill,
    marginal_utility,
    rates_from_segments,
    segment_carrier,
    solve_power_price,
    solve_wsr,
    total_power_at_price,
)

__version__ = "0.1.0"
