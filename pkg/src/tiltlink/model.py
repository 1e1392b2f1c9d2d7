"""Kinematics, inertia and thrust allocation of the four-link chain.

Conventions
-----------
All link and rotor poses are expressed in the frame of link 1. Link ``i``
starts where link ``i-1`` ends and points along its own x axis. The link
headings about z are ``[0, q1, q1, q1 - q2]``: joint 1 sits between links 1
and 2, links 2 and 3 are rigidly aligned, and joint 2 between links 3 and 4
turns in the opposite sense. ``q = (pi/2, pi/2)`` is therefore the
point-symmetric zig-zag form and ``q = (0, 0)`` is the straight line.

Rotor ``i`` is rolled about its link axis by ``(-1)**i * beta`` and thrusts
along its local z axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.typing import NDArray

from tiltlink._rot import rot_x, rot_y, rot_z
from tiltlink.config import as_float, as_floats, check_known, load_kv
from tiltlink.errors import SingularForm

N_LINKS = 4
HOVER_COND_LIMIT = 1e12


def _default_offsets() -> tuple:
    return tuple((0.3, 0.0, 0.0) for _ in range(N_LINKS))


@dataclass(frozen=True)
class RobotSpec:
    """Geometric, mass and thrust parameters of the platform.

    ``rotor_offsets`` are rotor mount positions in each link frame. Each link
    is modeled as a solid rod of radius ``link_radius`` carrying
    ``1 - rotor_mass_fraction`` of the link mass, plus a point mass at the
    rotor mount carrying the rest.
    """

    link_length: float = 0.6
    link_masses: tuple = (0.85, 0.85, 0.85, 0.85)
    tilt_angle: float = 0.1745
    u_max: float = 16.0
    prop_diameter: float = 0.3556
    rotor_offsets: tuple = field(default_factory=_default_offsets)
    gravity: float = 9.81
    link_radius: float = 0.02
    rotor_mass_fraction: float = 0.5
    spin: tuple = (1, -1, 1, -1)

    def __post_init__(self):
        object.__setattr__(self, "link_masses", tuple(float(m) for m in self.link_masses))
        object.__setattr__(
            self, "rotor_offsets", tuple(tuple(float(x) for x in r) for r in self.rotor_offsets)
        )
        object.__setattr__(self, "spin", tuple(int(s) for s in self.spin))
        if len(self.link_masses) != N_LINKS or len(self.rotor_offsets) != N_LINKS:
            raise ValueError("need exactly four link masses and rotor offsets")
        if any(len(r) != 3 for r in self.rotor_offsets):
            raise ValueError("rotor offsets are 3-vectors")
        if not self.link_length > 0:
            raise ValueError("link_length must be positive")
        if not all(m > 0 for m in self.link_masses):
            raise ValueError("link masses must be positive")
        if not self.u_max > 0 or not self.prop_diameter > 0:
            raise ValueError("u_max and prop_diameter must be positive")
        if not 0.0 <= self.tilt_angle < math.pi / 2:
            raise ValueError("tilt angle must lie in [0, pi/2)")
        if not self.gravity > 0 or self.link_radius < 0:
            raise ValueError("gravity must be positive and link_radius nonnegative")
        if not 0.0 <= self.rotor_mass_fraction <= 1.0:
            raise ValueError("rotor_mass_fraction must lie in [0, 1]")

    @property
    def mass(self) -> float:
        return float(sum(self.link_masses))

    @property
    def weight(self) -> float:
        return self.mass * self.gravity

    def with_tilt(self, beta: float) -> "RobotSpec":
        return replace(self, tilt_angle=float(beta))

    _KEYS = (
        "link_length", "link_masses", "tilt_angle", "u_max", "prop_diameter",
        "rotor_offsets", "gravity", "link_radius", "rotor_mass_fraction", "spin",
    )

    @classmethod
    def from_dict(cls, d: dict[str, str], source: str = "<spec>") -> "RobotSpec":
        check_known(d, cls._KEYS, source)
        base = cls()
        kw = {
            "link_length": as_float(d, "link_length", base.link_length),
            "link_masses": tuple(as_floats(d, "link_masses", base.link_masses, N_LINKS)),
            "tilt_angle": as_float(d, "tilt_angle", base.tilt_angle),
            "u_max": as_float(d, "u_max", base.u_max),
            "prop_diameter": as_float(d, "prop_diameter", base.prop_diameter),
            "rotor_offsets": tuple(
                map(tuple, as_floats(d, "rotor_offsets", base.rotor_offsets, 3 * N_LINKS)
                    .reshape(N_LINKS, 3))
            ),
            "gravity": as_float(d, "gravity", base.gravity),
            "link_radius": as_float(d, "link_radius", base.link_radius),
            "rotor_mass_fraction": as_float(d, "rotor_mass_fraction", base.rotor_mass_fraction),
            "spin": tuple(int(s) for s in as_floats(d, "spin", base.spin, N_LINKS)),
        }
        return cls(**kw)

    @classmethod
    def from_file(cls, path) -> "RobotSpec":
        return cls.from_dict(load_kv(path), str(path))


@dataclass(frozen=True)
class JointConfig:
    """Joint angles ``(q1, q2)`` in radians, each within [-pi/2, pi/2]."""

    q1: float
    q2: float

    def __post_init__(self):
        for v in (self.q1, self.q2):
            if not math.isfinite(v):
                raise ValueError("joint angles must be finite")
            if abs(v) > math.pi / 2 + 1e-9:
                raise ValueError(f"joint angle {v} outside [-pi/2, pi/2]")

    @property
    def q(self) -> NDArray[np.float64]:
        return np.array([self.q1, self.q2])

    @classmethod
    def of(cls, q) -> "JointConfig":
        if isinstance(q, JointConfig):
            return q
        q1, q2 = q
        return cls(float(q1), float(q2))


@dataclass(frozen=True)
class FramePose:
    """Rigid transform: maps child coordinates ``x`` to ``rotation @ x + translation``."""

    rotation: NDArray[np.float64]
    translation: NDArray[np.float64]

    def apply(self, x) -> NDArray[np.float64]:
        return self.rotation @ np.asarray(x, dtype=float) + self.translation

    def compose(self, other: "FramePose") -> "FramePose":
        return FramePose(self.rotation @ other.rotation, self.apply(other.translation))

    def inverse(self) -> "FramePose":
        Rt = self.rotation.T
        return FramePose(Rt, -Rt @ self.translation)


@dataclass(frozen=True)
class Kinematics:
    """Poses of links, rotors and frame {C}, all in link-1 coordinates."""

    links: tuple
    rotors: tuple
    c_frame: FramePose
    link_cogs: NDArray[np.float64]

    @property
    def rotor_positions(self) -> NDArray[np.float64]:
        return np.array([r.translation for r in self.rotors])

    def in_c(self, pose: FramePose) -> FramePose:
        """Re-express a link-1 pose relative to frame {C}."""
        return self.c_frame.inverse().compose(pose)


def link_headings(q) -> NDArray[np.float64]:
    q1, q2 = JointConfig.of(q).q
    return np.array([0.0, q1, q1, q1 - q2])


def forward_kinematics(spec: RobotSpec, q) -> Kinematics:
    jc = JointConfig.of(q)
    L = spec.link_length
    beta = spec.tilt_angle
    frac = spec.rotor_mass_fraction
    links, rotors, cogs = [], [], []
    origin = np.zeros(3)
    for i, h in enumerate(link_headings(jc)):
        R_l = rot_z(h)
        link = FramePose(R_l, origin.copy())
        links.append(link)
        mount = np.array(spec.rotor_offsets[i])
        rotors.append(FramePose(R_l @ rot_x((-1) ** (i + 1) * beta), link.apply(mount)))
        cogs.append(link.apply((1.0 - frac) * np.array([L / 2, 0.0, 0.0]) + frac * mount))
        origin = link.apply([L, 0.0, 0.0])
    cogs = np.array(cogs)
    m = np.array(spec.link_masses)
    c = (m[:, None] * cogs).sum(axis=0) / m.sum()
    return Kinematics(tuple(links), tuple(rotors), FramePose(np.eye(3), c), cogs)


def level_rotation(f_s) -> tuple[NDArray[np.float64], float, float]:
    """Rotation taking the hover force direction to +z, roll first then pitch.

    Returns ``(R, alpha_x, alpha_y)`` with ``R = R_y(alpha_y) @ R_x(alpha_x)``.
    """
    fx, fy, fz = f_s
    ax = math.atan2(fy, fz)
    ay = math.atan2(-fx, math.hypot(fy, fz))
    return rot_y(ay) @ rot_x(ax), ax, ay


def hover_direction(Q_tran_C, Q_rot_C) -> NDArray[np.float64]:
    """Solve ``[Q_tran_z; Q_rot] u = e1`` for the unit-z hover direction.

    When every rotor is untilted the yaw row vanishes identically; the row is
    then dropped and the minimum-norm solution of the remaining system is
    returned. A vanishing force or roll/pitch row means the form cannot hover.
    """
    A = np.vstack([Q_tran_C[2], Q_rot_C])
    b = np.array([1.0, 0.0, 0.0, 0.0])
    scale = np.abs(A).max()
    keep = np.ones(4, dtype=bool)
    if np.abs(A[3]).max() <= 1e-12 * scale:
        keep[3] = False
    Ar = A[keep]
    s = np.linalg.svd(Ar, compute_uv=False)
    if s[-1] <= 0 or s[0] / s[-1] > HOVER_COND_LIMIT:
        raise SingularForm("hover allocation system is singular for this form")
    if keep.all():
        return np.linalg.solve(Ar, b)
    return np.linalg.lstsq(Ar, b[keep], rcond=None)[0]


@dataclass(frozen=True)
class AllocationSet:
    """Allocation matrices in frames {C} and {CoG} plus the hover thrust."""

    Q_tran_C: NDArray[np.float64]
    Q_rot_C: NDArray[np.float64]
    R_CoG_C: NDArray[np.float64]
    Q_tran: NDArray[np.float64]
    Q_rot: NDArray[np.float64]
    alpha_x: float
    alpha_y: float
    u_s: NDArray[np.float64]
    kinematics: Kinematics

    @property
    def Q_rot_pinv(self) -> NDArray[np.float64]:
        return np.linalg.pinv(self.Q_rot)


def _c_frame_wrench_columns(kin: Kinematics):
    c = kin.c_frame.translation
    dirs = np.array([r.rotation[:, 2] for r in kin.rotors]).T
    pos = kin.rotor_positions - c
    torques = np.cross(pos, dirs.T).T
    return dirs, torques


def allocation(spec: RobotSpec, q) -> AllocationSet:
    kin = forward_kinematics(spec, q)
    Qt_C, Qr_C = _c_frame_wrench_columns(kin)
    u_dir = hover_direction(Qt_C, Qr_C)
    u_s = spec.weight / np.linalg.norm(Qt_C @ u_dir) * u_dir
    R, ax, ay = level_rotation(Qt_C @ u_s)
    return AllocationSet(Qt_C, Qr_C, R, R @ Qt_C, R @ Qr_C, ax, ay, u_s, kin)


@dataclass(frozen=True)
class InertiaModel:
    """Total inertia about the CoG.

    ``I`` is expressed in frame {CoG}; ``I_C`` in frame {C}. ``leveled`` is
    False for singular forms, where no hover attitude exists and {CoG} is
    taken parallel to {C}.
    """

    I: NDArray[np.float64]
    I_C: NDArray[np.float64]
    cog_offset_in_L1: NDArray[np.float64]
    leveled: bool = True

    @property
    def I_inv(self) -> NDArray[np.float64]:
        return np.linalg.inv(self.I)


def _rod_inertia(m: float, L: float, r: float) -> NDArray[np.float64]:
    ia = 0.5 * m * r * r
    it = m * (3 * r * r + L * L) / 12.0
    return np.diag([ia, it, it])


def inertia_c(spec: RobotSpec, kin: Kinematics) -> NDArray[np.float64]:
    """Inertia about the CoG expressed in frame {C}."""
    c = kin.c_frame.translation
    L = spec.link_length
    frac = spec.rotor_mass_fraction
    I = np.zeros((3, 3))
    for i, link in enumerate(kin.links):
        m = spec.link_masses[i]
        m_rod, m_pt = (1.0 - frac) * m, frac * m
        R = link.rotation
        d = link.apply([L / 2, 0.0, 0.0]) - c
        I += R @ _rod_inertia(m_rod, L, spec.link_radius) @ R.T
        I += m_rod * (d @ d * np.eye(3) - np.outer(d, d))
        p = kin.rotors[i].translation - c
        I += m_pt * (p @ p * np.eye(3) - np.outer(p, p))
    return 0.5 * (I + I.T)


def inertia(spec: RobotSpec, q, alloc: AllocationSet | None = None) -> InertiaModel:
    kin = forward_kinematics(spec, q) if alloc is None else alloc.kinematics
    I_C = inertia_c(spec, kin)
    leveled = True
    if alloc is None:
        try:
            alloc = allocation(spec, q)
        except SingularForm:
            leveled = False
    R = alloc.R_CoG_C if alloc is not None else np.eye(3)
    I = R @ I_C @ R.T
    return InertiaModel(0.5 * (I + I.T), I_C, kin.c_frame.translation.copy(), leveled)
