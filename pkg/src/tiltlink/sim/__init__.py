from tiltlink.sim.plant import Disturbance, Impulse, Payload, Plant, WrenchProfile, plant_step
from tiltlink.sim.runner import EstimatorConfig, EstimatorPipeline, RunLog, run_scenario
from tiltlink.sim.scenario import BUILTINS, Scenario, load_scenario, parse_scenario
from tiltlink.sim.sensors import SensorEmulator, SensorSuite, StampedMeasurement, emulate_sensors

__all__ = ["Disturbance", "Impulse", "Payload", "Plant", "WrenchProfile", "plant_step",
           "EstimatorConfig", "EstimatorPipeline", "RunLog", "run_scenario",
           "BUILTINS", "Scenario", "load_scenario", "parse_scenario",
           "SensorEmulator", "SensorSuite", "StampedMeasurement", "emulate_sensors"]
