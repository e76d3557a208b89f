"""Sample generation, target maps, experiments, verification sweeps and the command line."""

from picnet.harness.experiment import ExperimentConfig, Report, pairwise_distances, read_csv, run_experiment
from picnet.harness.samples import dumps_samples, generate_samples, loads_samples, make_rng, random_measure
from picnet.harness.targets import TARGETS, target_library
from picnet.harness.verify import SweepResult, verify_equal, verify_w1_net

__all__ = [
    "ExperimentConfig", "Report", "pairwise_distances", "read_csv", "run_experiment",
    "dumps_samples", "generate_samples", "loads_samples", "make_rng", "random_measure",
    "TARGETS", "target_library", "SweepResult", "verify_equal", "verify_w1_net",
]
