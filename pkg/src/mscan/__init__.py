"""Penalized multiscale likelihood-ratio scanning for exponential-family grids."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    BudgetExceededError,
    CalibrationMismatchError,
    DomainError,
    EmptyRegionError,
    EmptyScaleSetError,
    GridFormatError,
    RegionCapError,
)
from .families import (  # noqa: F401
    BernoulliModel,
    GaussianModel,
    PoissonModel,
    lrt_stat,
    lrt_stat_generic,
    make_model,
    sample,
    standardize,
)
from .regions import (  # noqa: F401
    Region,
    RegionSystem,
    count_regions,
    discretize,
    enumerate_scales,
    recommended_v,
    v_table,
    vc_v,
)
from .scan import (  # noqa: F401
    Field,
    ScanResult,
    gaussian_scan_statistic,
    local_sums_fft,
    local_sums_sat,
    penalty,
    scan_statistic,
)
from .calibrate import (  # noqa: F401
    QuantileTable,
    load_table,
    quantile,
    sample_null_statistics,
    save_table,
    simulate_null,
    simulate_null_tables,
)
from .detect import DetectionReport, detect, fwer_semantics_check  # noqa: F401
from .power import (  # noqa: F401
    AnomalySpec,
    PowerEstimate,
    boundary_gap,
    empirical_power,
    folded_normal_sf,
    oracle_power,
    power_study,
)
