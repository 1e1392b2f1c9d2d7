"""Design, control and state estimation for a four-link aerial robot with
tilted propellers, plus a rigid-body simulator for closed-loop experiments."""

from tiltlink.errors import (
    DegenerateConvex,
    DegenerateForce,
    NonFiniteState,
    NotStabilizable,
    RankDeficient,
    ScenarioConfigError,
    SingularForm,
    StaleMeasurement,
    UnknownFrame,
)
from tiltlink.model import (
    AllocationSet,
    InertiaModel,
    JointConfig,
    RobotSpec,
    allocation,
    forward_kinematics,
    inertia,
)

__all__ = [
    "AllocationSet",
    "DegenerateConvex",
    "DegenerateForce",
    "InertiaModel",
    "JointConfig",
    "NonFiniteState",
    "NotStabilizable",
    "RankDeficient",
    "RobotSpec",
    "ScenarioConfigError",
    "SingularForm",
    "StaleMeasurement",
    "UnknownFrame",
    "allocation",
    "forward_kinematics",
    "inertia",
]
