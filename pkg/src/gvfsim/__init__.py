"""Guiding-vector-field path following for fixed-wing vehicles.

Two guidance laws (implicit level-set GVF and the parametric, singularity-free
p-GVF), a path expression language with second-order AD, a kinematic vehicle
model in wind, distributed coordination over a lossy bus, and a scenario runner.
"""

from .errors import (
    ConfigError,
    DegenerateHorizontal,
    DomainError,
    ExprError,
    GuidanceError,
    ParseError,
    SingularField,
    StallSpeed,
    ZeroGroundSpeed,
)
from .expr import (
    Dual2,
    compile_implicit_path,
    compile_parametric_path,
    eval_second_order,
    load_path_file,
    parse_expression,
    to_text,
)
from .gvf import GvfGains, field_2d, field_material_derivative, heading_rate_command, roll_setpoint
from .paths import (
    REGISTRY,
    ImplicitPathSpec,
    ParametricPathSpec,
    circle2d_parametric,
    circle_implicit,
    ellipse3d_parametric,
    ellipse_implicit,
    lissajous3d_parametric,
    make_path,
)
from .pgvf import PGvfGains, field_xi, parametric_errors, pgvf_guidance, step_w
from .vehicle import (
    ActuatorLimits,
    GuidanceCommand,
    VehicleState,
    WindModel,
    ground_course_and_speed,
    step_vehicle,
    wind_at,
)

__version__ = "0.1.0"
