"""Sensor conversion, attitude filtering and delay-compensating Kalman filtering."""

from tiltlink.estimation.attitude import AttitudeEstimate, ComplementaryGains, complementary_update
from tiltlink.estimation.ekf import (EkfNoise, EkfState, TimeSyncEkf, ekf_correct, ekf_predict,
                                     sequential_filter)
from tiltlink.estimation.frames import (ImuFrameMeasurement, MountRegistry, SensorMount,
                                        to_cog_frame, to_imu_frame)
from tiltlink.estimation.geo import GeoReference, enu_to_gps, gps_to_enu
from tiltlink.estimation.replay import LogRecord, ReplayResult, parse_log, replay

__all__ = ["AttitudeEstimate", "ComplementaryGains", "complementary_update",
           "EkfNoise", "EkfState", "TimeSyncEkf", "ekf_correct", "ekf_predict", "sequential_filter",
           "ImuFrameMeasurement", "MountRegistry", "SensorMount", "to_cog_frame", "to_imu_frame",
           "GeoReference", "enu_to_gps", "gps_to_enu",
           "LogRecord", "ReplayResult", "parse_log", "replay"]
