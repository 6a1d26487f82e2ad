"""Phase-space tomography simulator for atoms bound in a 1-D optical lattice.

The package simulates the full measurement chain: preparation of ground,
displaced and population-inverted vibrational states; phase-space rotation
and displacement operations in a truncated number basis; population readout
with lost-atom bookkeeping; and reconstruction of Husimi and Wigner
quasi-probability distributions with explicit upper and lower bounds, checked
against direct evaluations from the density matrix.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    FitError,
    InvalidParameterError,
    LatticeTomoError,
    NumericalError,
    QuadratureError,
)
from .fock import (
    DensityMatrix,
    FockVector,
    OscillatorSpec,
    alpha_from_phase_space,
    displacement_matrix,
    make_coherent,
    momentum_of,
    position_of,
    rotation_matrix,
    working_dimension,
)
from .lattice import (
    BoundStateBasis,
    LatticeSpec,
    PotentialShift,
    depth_from_intensity,
    evolve_in_well,
    lattice_vector,
    recoil_energy,
    shifted_hamiltonian_matrix,
    solve_bound_states,
    well_frequency,
)
from .prepare import (
    DephasingModel,
    PreparationConfig,
    dephase,
    inhomogeneous_width_ratio,
    make_inverted_reference,
    prepare_coherent,
    prepare_ground,
    prepare_inverted,
)
from .quasiprob import (
    MarginalDensity,
    WignerGrid,
    displaced_number_populations,
    hermite_functions,
    husimi_point,
    marginal_x,
    wigner_cartesian_grid,
    wigner_point_integral,
    wigner_point_parity,
)
from .tomography import (
    GaussianFit,
    NoiseSpec,
    PopulationRecord,
    QuasiDistributionSample,
    ScanGrid,
    average_records,
    estimate_wigner,
    fit_gaussian_cross_section,
    infer_xrms_from_normalization,
    normalization_report,
    run_husimi_scan,
    run_wigner_scan,
    sample_shot_noise,
    scan_parity_values,
)
from .config import (
    HUSIMI_DEFAULT_CONFIG,
    WIGNER_DEFAULT_CONFIG,
    RunConfig,
    parse_config,
    render_config,
)
from .runner import ResultBundle, compare, emit, emit_cross_sections, load_bundle, run
