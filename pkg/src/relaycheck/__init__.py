"""Statistical detection of Byzantine relays in a Gaussian two-hop network.

The destination of a two-hop link (source -> relay -> destination) also hears
the source directly over a low-rate secured channel.  This package models the
Gaussian channel, quantizes both views, and detects relays whose forwarding
law deviates from honest behavior by comparing the empirical conditional law
of the relayed output against its analytic reference.
"""

from .channel import (
    ChannelParams,
    TransmissionRecord,
    cdf_y_given_v,
    pdf_u_given_s,
    pdf_u_given_x,
    pdf_u_marginal,
    posterior_s_given_x,
    sample_transmission,
    sample_u_marginal,
    sample_y,
)
from .detector import (
    DetectionOutcome,
    DetectionPolicy,
    ManipulabilityReport,
    ReferenceTable,
    TransitionKernel,
    calibrate_threshold,
    check_manipulable,
    decision_statistic,
    detect,
    lift_nesting,
    manipulation_objective,
    marginal_mimic_kernel,
    near_identity_kernel,
    policy_from_samples,
    reference_table,
)
from .errors import ConfigError, NumericError
from .harness import (
    FIGURE_PRESETS,
    ExperimentConfig,
    ExperimentReport,
    FigurePreset,
    emit_report,
    grids_for,
    honest_statistics,
    ks_distance,
    load_config,
    reproduce_figure,
    run_experiment,
    run_trial,
)
from .quantizer import (
    Grid,
    GridSchedule,
    NestedGridPair,
    build_grid,
    build_nested_pair,
    nesting_matrix,
    quantize,
    schedule,
)
from .relay import (
    AlternatingShift,
    AttackMagnitude,
    DeterministicMap,
    Honest,
    IidKernel,
    MarginalMimic,
    RelayStrategy,
    apply_strategy,
    attack_magnitude,
)
from .stats import (
    EmpiricalCdfTable,
    TransitionMatrix,
    bin_eval_points,
    convergence_residual,
    empirical_cond_cdf,
    empirical_transition,
    hop_cdf_at_points,
    p_u_bin_given_x_bin,
    x_bin_posterior,
)

__version__ = "0.1.0"
