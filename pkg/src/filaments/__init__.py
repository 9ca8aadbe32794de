"""Density ridge (filament) estimation with bootstrap uncertainty measures."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    DegenerateDataError, EigengapDegenerateError, FilamentError, InvalidInputError, NumericalFailure,
    OutOfRangeError, SingularHessianError, UncertaintyUnavailableError,
)
from .kernel_density import DensityModel, KernelProfile, kde_eval, kernel_eval, silverman_bandwidth  # noqa: E402
from .pointcloud import PointCloud  # noqa: E402
from .ridge import (  # noqa: E402
    LocalSpectrum, RidgePointSet, ScmsConfig, estimate_ridge, local_spectrum, scms_ascend, seed_grid,
    threshold_filter,
)
from .geometry import (  # noqa: E402
    FrenetFrame, NormalSpace, PolylineCurve, distance_to_set, frenet_frame, hausdorff, normal_intersection,
    order_curve,
)
from .uncertainty import (  # noqa: E402
    BootstrapEnsemble, UncertaintyField, bootstrap_ridges, confidence_radii, coverage_experiment,
    empirical_resample, local_uncertainty, smooth_resample,
)
