"""Geometric-quench and graviton dynamics of the 1/3 Laughlin state near the
thin-cylinder limit."""

__version__ = "0.1.0"

from .basis import (
    CylinderGeometry,
    FockBasis,
    NotInSqueezedSubspace,
    SqueezedBasis,
    enumerate_fock,
    enumerate_squeezed,
    momentum_of,
    orbitals_to_register,
    post_select,
    register_to_orbitals,
)
from .geometry import (
    BimetricParams,
    MetricParams,
    MetricTensor,
    MetricTrace,
    bimetric_rhs,
    fit_bimetric,
    integrate_bimetric,
    linearized_solution,
    metric_from_params,
    params_from_metric,
)
from .hamiltonian import (
    SparseHermitian,
    StateVector,
    build_full_hamiltonian,
    build_truncated_fock,
    build_truncated_hamiltonian,
    ground_state_closed_form,
    qp_decomposition,
    vkm,
)
from .dynamics import (
    EigenSystem,
    QuenchTrace,
    compare_full_truncated,
    eigendecompose,
    entanglement_entropy,
    evolve,
    extract_metric,
    graviton_energy,
    observables,
    run_quench,
    spectral_function,
)
from .variational import (
    SiteResolvedParams,
    VariationalParams,
    build_ansatz,
    build_site_resolved,
    extrapolate,
    optimal_trajectory,
    optimize,
)
from .circuits import (
    Circuit,
    Gate,
    NoiseModel,
    build_trotter_circuit,
    build_variational_circuit,
    cnot_count,
    estimate_observables_from_counts,
    sample,
    simulate_statevector,
)
