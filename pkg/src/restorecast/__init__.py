"""Highway restoration progress: network efficiency, Beta progress curves and
Bayesian duration forecasts."""

__version__ = "0.1.0"

from .beta import BetaRestorationModel, beta_cdf, beta_inverse_cdf, beta_pdf, betainc, betainc_inv
from .estimators import BetaProgressRegressor, NetworkEfficiencyTransformer
from .forecast import (
    DegenerateForecastError,
    ForecastDistribution,
    ForecastEnvelope,
    ForecastError,
    ForecastQuery,
    earned_schedule_duration,
    forecast_distribution,
    forecast_envelope,
)
from .ingest import (
    EdgeGeometry,
    IngestError,
    NetworkGeometry,
    parse_incidents,
    parse_network_geometry,
    snap_incident,
    snap_incidents,
)
from .mcmc import (
    McmcConfig,
    McmcError,
    PosteriorSamples,
    ProgressObservation,
    chain_diagnostics,
    effective_sample_size,
    log_likelihood,
    log_prior,
    mh_chain,
    prior_from_history,
)
from .network import (
    DamageState,
    HighwayNetwork,
    NetworkError,
    PathLengthMatrix,
    apply_damage,
    build_network,
    network_efficiency,
    shortest_path_lengths,
)
from .scenario import Scenario, ScenarioError, ScenarioSpec, generate_scenario
from .timeline import (
    ComponentRef,
    DamageTimeline,
    FunctionalitySeries,
    IncidentRecord,
    RestorationProgressCurve,
    TimelineError,
    expand_incidents,
    extract_restoration_curve,
    functionality_series,
    round_to_hour,
)
