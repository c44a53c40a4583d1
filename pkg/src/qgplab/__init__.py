"""qgplab: geometric potentials, Berry curvature, and interference for
time-dependent few-level quantum systems."""

from .errors import (
    AmbiguousLevelMatchError,
    ConfigError,
    DegenerateSpectrumError,
    GridTooCoarseError,
    InvalidSamplesError,
    NonHermitianError,
    NumericalError,
    PropagationError,
    QgplabError,
    StationaryPathError,
)
from .numerics import (
    TimeGrid,
    accumulate,
    hermitian_eigh,
    integrate,
    propagate,
    propagate_fixed,
    propagate_report,
    unwrap_phase,
)
from .models import (
    GaugeTransform,
    HamiltonianModel,
    RotatingFieldParams,
    SphereFieldParams,
    apply_gauge,
    custom_model,
    rotating_field,
    sphere_field,
    with_fd_derivative,
)
from .spectral import GaugeTrajectory, overlap_rate, overlap_rate_series, track
from .geometry import (
    CurvatureField,
    GeometricSeries,
    ParameterFamily,
    ThetaResult,
    berry_connection,
    berry_curvature,
    berry_phase,
    geometric_series,
    polar_cap_surface,
    qgp_compact,
    qgp_direct,
    qgp_geodesic,
    sphere_family,
    theta_winding,
)
from .dynamics import (
    AdiabaticState,
    AdiabaticityReport,
    adiabatic_report,
    adiabatic_state,
    adiabatic_states,
    exact_state,
    fidelity,
)
from .interferometer import (
    DifferentialTrace,
    InterferogramRecord,
    differential_intensity,
    differential_trace,
    intensity,
    intensity_offset_series,
    scan_and_extract_frequency,
)

__version__ = "0.1.0"
