"""Translational EKF with a FIFO buffer for delayed, out-of-order measurements.

State ``x = [p, v, b_acc]`` (IMU origin position and velocity in the world
frame, accelerometer bias in the IMU frame). Each buffered node holds one IMU
sample; the sample at node ``k`` drives the prediction from node ``k`` to node
``k + 1``. A measurement stamped ``s`` is applied at the last node whose stamp
is ``<= s``. Measurements on the same node are applied in ``(stamp, arrival)``
order.

Covariance is propagated on demand: after a correction only the means are
re-predicted up to the newest node. Covariances stay valid up to the node of
the latest correction (the *anchor*), which is where both kinds of late
measurement restart from.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from tiltlink.errors import StaleMeasurement
from tiltlink.estimation.frames import ImuFrameMeasurement

G = 9.81
_H = {
    "gps_pos": np.eye(9)[0:2],
    "gps_vel": np.eye(9)[3:6],
    "vio_vel": np.eye(9)[3:6],
    "lidar": np.eye(9)[2:3],
}


@dataclass(frozen=True)
class EkfNoise:
    """Noise densities: accel white noise [m/s^2/sqrt(Hz)], bias walk [m/s^3/sqrt(Hz)]."""

    accel: float = 0.05
    bias_walk: float = 0.001
    g: float = G


@dataclass
class EkfState:
    x: NDArray[np.float64] = field(default_factory=lambda: np.zeros(9))
    P: NDArray[np.float64] = field(default_factory=lambda: np.eye(9))

    @property
    def p(self):
        return self.x[0:3]

    @property
    def v(self):
        return self.x[3:6]

    @property
    def b_acc(self):
        return self.x[6:9]

    def copy(self) -> "EkfState":
        return EkfState(self.x.copy(), self.P.copy())


def observation_matrix(kind: str) -> NDArray[np.float64]:
    return _H[kind]


def predict_mean(x, accel, R_W_IMU, dt: float, g: float = G) -> NDArray[np.float64]:
    p, v, b = x[0:3], x[3:6], x[6:9]
    a_w = R_W_IMU @ (np.asarray(accel, float) - b)
    a_w[2] -= g
    out = x.copy()
    out[0:3] = p + v * dt + 0.5 * a_w * dt * dt
    out[3:6] = v + a_w * dt
    return out


def transition(R_W_IMU, dt: float) -> NDArray[np.float64]:
    F = np.eye(9)
    F[0:3, 3:6] = np.eye(3) * dt
    F[0:3, 6:9] = -0.5 * R_W_IMU * dt * dt
    F[3:6, 6:9] = -R_W_IMU * dt
    return F


def process_noise(dt: float, noise: EkfNoise) -> NDArray[np.float64]:
    qa = noise.accel ** 2
    Q = np.zeros((9, 9))
    I3 = np.eye(3)
    Q[0:3, 0:3] = qa * dt ** 3 / 3 * I3
    Q[0:3, 3:6] = Q[3:6, 0:3] = qa * dt ** 2 / 2 * I3
    Q[3:6, 3:6] = qa * dt * I3
    Q[6:9, 6:9] = noise.bias_walk ** 2 * dt * I3
    return Q


def predict_cov(P, R_W_IMU, dt: float, noise: EkfNoise) -> NDArray[np.float64]:
    F = transition(R_W_IMU, dt)
    P = F @ P @ F.T + process_noise(dt, noise)
    return 0.5 * (P + P.T)


def ekf_predict(state: EkfState, accel, R_W_IMU, dt: float, noise: EkfNoise = EkfNoise(),
                with_cov: bool = True) -> EkfState:
    if not dt > 0:
        raise ValueError("dt must be positive")
    x = predict_mean(state.x, accel, R_W_IMU, dt, noise.g)
    P = predict_cov(state.P, R_W_IMU, dt, noise) if with_cov else state.P
    return EkfState(x, P)


def ekf_correct(state: EkfState, meas: ImuFrameMeasurement) -> EkfState:
    """Kalman update (Joseph form) for a linear position/velocity observation."""
    H = observation_matrix(meas.kind)
    z = np.asarray(meas.z, float)
    Rm = np.diag(np.broadcast_to(np.asarray(meas.sigma, float), z.shape) ** 2)
    P = state.P
    S = H @ P @ H.T + Rm
    K = np.linalg.solve(S, H @ P).T
    x = state.x + K @ (z - H @ state.x)
    IKH = np.eye(9) - K @ H
    P = IKH @ P @ IKH.T + K @ Rm @ K.T
    return EkfState(x, 0.5 * (P + P.T))


@dataclass
class _Node:
    stamp: float
    accel: NDArray[np.float64]
    R: NDArray[np.float64]
    x: NDArray[np.float64]              # prior mean at this node
    P: NDArray[np.float64] | None       # prior covariance; None past the anchor
    meas: list = field(default_factory=list)  # (stamp, seq, measurement)


class TimeSyncEkf:
    """FIFO-buffered EKF.

    ``add_imu`` appends a node and predicts the mean to it. ``insert`` applies
    a measurement at its acquisition stamp, re-running later corrections when
    it arrives out of order. A measurement stamped at or after the newest
    node is held until a later IMU sample fixes the node it belongs to.

    With ``keep_history`` the final corrected mean of every node leaving the
    buffer is kept in ``retired`` as ``(stamp, x)``.
    """

    def __init__(self, x0, P0, stamp: float, accel, R_W_IMU,
                 noise: EkfNoise = EkfNoise(), capacity: int = 200,
                 keep_history: bool = False):
        if capacity < 2:
            raise ValueError("capacity must be at least 2")
        self.noise = noise
        self.capacity = capacity
        self.nodes: list[_Node] = [
            _Node(float(stamp), np.array(accel, float), np.array(R_W_IMU, float),
                  np.array(x0, float), np.array(P0, float))
        ]
        self.anchor = 0
        self.stale_count = 0
        self._seq = 0
        self._pending: list = []
        self.keep_history = keep_history
        self.retired: list[tuple[float, NDArray[np.float64]]] = []

    # ------------------------------------------------------------------ access

    @property
    def head_stamp(self) -> float:
        return self.nodes[-1].stamp

    @property
    def head_mean(self) -> NDArray[np.float64]:
        return self._posterior_mean(len(self.nodes) - 1)

    @property
    def head(self) -> EkfState:
        """Corrected state at the newest node (covariance propagated on demand)."""
        P = self.nodes[self.anchor].P
        x = None
        for j in range(self.anchor, len(self.nodes)):
            post = self._posterior(j, P)
            x, P = post.x, post.P
            if j + 1 < len(self.nodes):
                P = predict_cov(P, self.nodes[j].R, self._dt(j), self.noise)
        return EkfState(x, P)

    @property
    def stamps(self) -> list[float]:
        return [n.stamp for n in self.nodes]

    @property
    def pending(self) -> int:
        return len(self._pending)

    # ---------------------------------------------------------------- internals

    def _posterior(self, k: int, P=None) -> EkfState:
        node = self.nodes[k]
        st = EkfState(node.x, node.P if P is None else P)
        for _, _, m in node.meas:
            st = ekf_correct(st, m)
        return st

    def _posterior_mean(self, k: int) -> NDArray[np.float64]:
        node = self.nodes[k]
        return self._posterior(k).x if node.meas else node.x.copy()

    def _dt(self, k: int) -> float:
        return self.nodes[k + 1].stamp - self.nodes[k].stamp

    def _recompute(self, k: int, cov_until: int) -> None:
        """Re-predict priors after node ``k``; covariances only up to ``cov_until``."""
        for j in range(k, len(self.nodes) - 1):
            node, nxt = self.nodes[j], self.nodes[j + 1]
            if j < cov_until:
                post = self._posterior(j)
                nxt.x = predict_mean(post.x, node.accel, node.R, self._dt(j), self.noise.g)
                nxt.P = predict_cov(post.P, node.R, self._dt(j), self.noise)
            else:
                nxt.x = predict_mean(self._posterior_mean(j), node.accel, node.R,
                                     self._dt(j), self.noise.g)
                nxt.P = None

    def _node_index(self, stamp: float) -> int:
        return bisect.bisect_right(self.stamps, stamp) - 1

    def _pop_oldest(self) -> None:
        if self.keep_history:
            self.retired.append((self.nodes[0].stamp, self._posterior_mean(0)))
        if self.anchor == 0:
            self._recompute_cov_only(1)
            self.anchor = 1
        self.nodes.pop(0)
        self.anchor -= 1

    def _recompute_cov_only(self, k: int) -> None:
        for j in range(self.anchor, k):
            self.nodes[j + 1].P = predict_cov(self._posterior(j).P, self.nodes[j].R,
                                              self._dt(j), self.noise)

    # ------------------------------------------------------------------ public

    def add_imu(self, stamp: float, accel, R_W_IMU) -> NDArray[np.float64]:
        last = self.nodes[-1]
        if not stamp > last.stamp:
            raise ValueError("IMU stamps must be strictly increasing")
        x = predict_mean(self._posterior_mean(len(self.nodes) - 1), last.accel, last.R,
                         stamp - last.stamp, self.noise.g)
        self.nodes.append(_Node(float(stamp), np.array(accel, float),
                                np.array(R_W_IMU, float), x, None))
        if len(self.nodes) > self.capacity:
            self._pop_oldest()
        ready = [e for e in self._pending if e[0] < stamp]
        self._pending = [e for e in self._pending if e[0] >= stamp]
        for e in ready:
            self._apply(*e)
        return self.head_mean

    def insert(self, meas: ImuFrameMeasurement) -> NDArray[np.float64]:
        """Apply ``meas`` at its stamp and return the corrected head mean."""
        s = float(meas.stamp)
        if s < self.nodes[0].stamp:
            self.stale_count += 1
            raise StaleMeasurement(f"stamp {s} predates buffer start {self.nodes[0].stamp}")
        self._seq += 1
        if s >= self.nodes[-1].stamp:
            self._pending.append((s, self._seq, meas))
            return self.head_mean
        return self._apply(s, self._seq, meas)

    def trajectory(self) -> list[tuple[float, NDArray[np.float64]]]:
        """Retired means followed by the corrected means still in the buffer."""
        return self.retired + [(n.stamp, self._posterior_mean(k)) for k, n in enumerate(self.nodes)]

    def flush(self) -> NDArray[np.float64]:
        """Apply held measurements at the newest node (end of stream)."""
        ready, self._pending = sorted(self._pending, key=lambda e: (e[0], e[1])), []
        for e in ready:
            self._apply(*e, force_head=True)
        return self.head_mean

    def _apply(self, s: float, seq: int, meas, force_head: bool = False) -> NDArray[np.float64]:
        k = len(self.nodes) - 1 if force_head else self._node_index(s)
        bisect.insort(self.nodes[k].meas, (s, seq, meas), key=lambda e: (e[0], e[1]))
        if k > self.anchor:
            # newer than the last correction: extend covariances, correct, means to head
            self._recompute_cov_only(k)
            self.anchor = k
            self._recompute(k, cov_until=k)
        else:
            # at or before the last correction: rewind and redo forward
            self._recompute(k, cov_until=self.anchor)
        return self.head_mean


def sequential_filter(x0, P0, imu, measurements, noise: EkfNoise = EkfNoise()) -> list[EkfState]:
    """Chronological filter over a complete stream.

    ``imu`` is a list of ``(stamp, accel, R)``; measurements are attached to
    the last IMU stamp not after their own stamp. Returns the corrected state
    at every IMU stamp.
    """
    stamps = [s for s, _, _ in imu]
    per_node: list[list] = [[] for _ in imu]
    for seq, m in enumerate(measurements):
        k = bisect.bisect_right(stamps, m.stamp) - 1
        if k < 0:
            continue
        per_node[k].append((m.stamp, seq, m))
    st = EkfState(np.array(x0, float), np.array(P0, float))
    out = []
    for k, (s, accel, R) in enumerate(imu):
        for _, _, m in sorted(per_node[k], key=lambda e: (e[0], e[1])):
            st = ekf_correct(st, m)
        out.append(st)
        if k + 1 < len(imu):
            st = ekf_predict(st, accel, R, imu[k + 1][0] - s, noise)
    return out
