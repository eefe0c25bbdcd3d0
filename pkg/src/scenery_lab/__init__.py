"""Numerical analysis of fractal measures along the scenery flow."""

__version__ = "0.1.0"

from .constructions import (IfsSpec, SpliceSchedule, cantor_salli, extremal_conical, extremal_mean_porous,
                            grid_measure, ifs_measure, lebesgue_ball, plane, plane_rule, point_mass,
                            product_measure, quarter_cantor, salli_dimension, salli_ratio, splice,
                            uniform_rule, cantor_rule)
from .cones import (ConeSpec, DirectionNet, cone_constant, cone_mass_ratio, cone_scale_fraction, cone_scan,
                    min_cone_mass_ratio, rectifiability_criterion, rectifiability_net_scan)
from .dimension import (DimensionEstimate, box_dimension, density_scan, dim_functional_F, dimension_spectrum,
                        fd_dimension, local_dimension)
from .errors import (AmbiguousMass, ConfigError, DepthExceeded, InvalidParams, InvalidRadius,
                     OriginNotInSupport, PrecisionLoss, SceneryLabError, UnsupportedKind, ZeroMass)
from .measure import MassInterval, Measure, ball_mass, restrict, support_sample, translate
from .porosity import AnnularSpec, annular_pore_search, pore_search, porosity_scale_fraction, porosity_scan
from .scenery import magnify, scenery_at, scenery_statistics
from .spec_io import measure_from_spec
