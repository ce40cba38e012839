"""Dynamical entropies of the multi-particle quantum cat map.

A large particle driven into the Arnol'd cat map on the quantized torus is
coupled to I small free particles through an impulsive scattering phase.
The package builds the Trotterized period propagator, computes decoherence
matrices over coarse-grained quantum histories and their entropies S(J),
and compares against the classical cat map's cylinder entropies and
Kolmogorov-Sinai slope.
"""

from .classical import (
    CylinderTable,
    GridSampler,
    MonteCarloSampler,
    PhasePoint,
    cat_step,
    classical_entropy_series,
    cylinder_measures,
    ks_entropy,
)
from .errors import BudgetError, ConfigError, NumericError
from .evolution import (
    apply_cat_single,
    apply_period_multi,
    build_factors,
    free_phase,
    kick_phase,
    materialize_unitary,
    period_applier,
    scattering_counts,
    unitarity_residual,
)
from .experiments import (
    Budget,
    ExperimentPlan,
    ResultRecord,
    emit_csv,
    emit_plot_script,
    parse_config,
    parse_csv,
    run_plan,
    write_outputs,
)
from .histories import (
    DecoherenceMatrix,
    EntropySeries,
    PartitionProjectors,
    build_projectors,
    decoherence_matrix_direct,
    entropy_series,
    entropy_series_for_unitary,
    hermitian_eigenvalues,
    history_apply,
    marginalize,
    nats_to_bits,
    omega_iteration,
    saf_entropy,
)
from .kinematics import (
    LatticeSpec,
    StateVector,
    SystemConfig,
    build_lattice,
    flat_index,
    multi_index,
    random_state,
    to_momentum,
    to_position,
)

__version__ = "0.1.0"
