"""Spectrum-sharing capacity under line-of-sight interference.

Fading models, optimal secondary-user power allocation, capacity
estimators, an ESPAR beamspace model and random aerial precoding.
"""

__version__ = "0.1.0"

from .capacity import CapacityResult, awgn_capacity, capacity_from_states, capacity_mc, capacity_quadrature
from .channels import (
    SCENARIOS,
    ChannelState,
    FadingSpec,
    ScenarioSpec,
    amplitude_variance,
    power_pdf,
    ratio_pdf,
    ratio_sf,
    sample_gain,
    sample_state,
)
from .numerics import (
    QuadratureSpec,
    RngStream,
    bessel_i,
    bessel_i_scaled,
    integrate,
    laguerre_half,
    sample_std_normal,
    sample_uniform,
)
from .power import ConstraintSet, PowerAllocator, PowerPolicy, allocate, fit_lambda, solve_lambda
from .espar import (
    BasisSet,
    EsparGeometry,
    ReactiveLoads,
    basis_decompose,
    basis_weights,
    circular_geometry,
    currents,
    default_geometry,
    load_geometry,
    pattern_from_currents,
    pattern_from_weights,
)
from .experiments import (
    ExperimentConfig,
    load_config,
    parse_config,
    run_basis_sweep,
    run_capacity_sweep,
    run_pdf_experiment,
    run_timeseries,
)
from .rap import (
    PhaseProfiles,
    RandomAerialPrecoder,
    TxWeights,
    equivalent_gain,
    equivalent_los,
    frozen_phase_profiles,
    ks_rayleigh,
    mrc_receive_weights,
    random_tx_weights,
    rap_link_step,
    sample_basis_channels,
)
