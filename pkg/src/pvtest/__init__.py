"""Monte Carlo tests of the Poisson-Voronoi hypothesis for planar sections."""

__version__ = "0.1.0"

from ._kernels import BACKEND
from .geometry import (BoxGeometry, Cell, CellMetrics, GeneratorSet, GeometryError, InfeasibleTargetError,
                       SectionPlane, SectionTessellation, brute_force_section_oracle, cell_metrics,
                       random_axis_plane, sample_fixed_generators, sample_poisson_generators,
                       section_tessellation, simulate_section, window_cut)
from .io import read_tessellation, write_tessellation
from .nulldist import (BootstrapCI, InfeasibleConditioningError, NullTable, bootstrap_ci_lambda,
                       build_null_table, build_null_tables, estimate_n2d_given_n3d, loo_quantiles,
                       mean_cdf_conditional, mean_landscape_conditional)
from .stereology import LambdaEstimate, SectionSummary, estimate_all, estimate_lambda, summarize_section
from .tda import (Landscape, PersistenceDiagram, alpha_filtration, diagram_from_points,
                  landscape_from_diagram, landscape_l2_distance, mean_landscape, persistence_pairs)
from .teststats import (AreaSample, ReferenceCDF, TestResult, build_reference_cdf, cv_statistic,
                        kde_boundary_corrected, ks_statistic_conditional, ks_statistic_periodic,
                        landscape_statistics)
