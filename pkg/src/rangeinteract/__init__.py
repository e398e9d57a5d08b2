"""Home ranges and pairwise spatial interaction from animal relocation data."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    MarkedPointPattern,
    Relocation,
    Trajectory,
    Window,
    split_by_mark,
    validate_trajectory,
)
from .envelope import (  # noqa: E402
    EnvelopeResult,
    dclf_test,
    mad_test,
    pointwise_envelope,
    random_shift,
    run_interaction_test,
)
from .homerange import (  # noqa: E402
    DensityGrid,
    HomeRangeEstimate,
    akde_density,
    kde_bandwidth,
    kde_density,
    level_set,
    mcp_estimate,
)
from .ingest import parse_relocations, project_to_plane  # noqa: E402
from .ppstats import (  # noqa: E402
    IntensityModel,
    SummaryCurve,
    fhat_inhom,
    fit_intensity,
    ghat_cross,
    jhat_cross,
    khat_cross,
    lhat_cross,
)
from .semivariogram import (  # noqa: E402
    EmpiricalVariogram,
    Family,
    FitResult,
    MovementModel,
    empirical_svf,
    fit_svf_model,
    select_model,
    theoretical_svf,
)
from .simulate import SimSpec, simulate  # noqa: E402
