"""cdflab: simulation and estimation laboratory for coupled counting processes.

The package generates joint trajectories of an initiating-event stream and a
two-state protection process, keeps exact cumulative-hazard accounting, and
estimates the long-run damage rate together with the bias of the
rate-times-unavailability approximation to it.
"""

from .inference import (
    DiagnosticsReport,
    EstimateReport,
    Interval,
    batch_means_ci,
    covariance_bias_curve,
    estimate,
    martingale_residual,
    pool,
    time_rescaling_test,
)
from .intensity import (
    HawkesIntensity,
    IntensityModel,
    IntensityState,
    PoissonIntensity,
    StateModulatedIntensity,
    evaluate,
    excite,
    integrate_segment,
    upper_bound,
)
from .oracles import (
    MarkovCdfResult,
    MarkovScenarioParams,
    UnsupportedScenario,
    brute_force_cdf,
    hawkes_stationary_rate,
    markov_cdf,
    markov_cdf_from_scenario,
)
from .protection import (
    ProtectionModel,
    ProtectionState,
    apply_arrival_coupling,
    initial_protection_state,
    schedule_transition,
)
from .rng import Distribution, RngStream, derive_stream, sample_duration, sample_durations
from .simulator import (
    EventRecord,
    Scenario,
    Trajectory,
    flag_segments,
    read_event_log,
    replay_compensator,
    simulate,
    write_event_log,
)

__version__ = "0.1.0"
