"""Simulate indel-channel sequence evolution and rebuild trees from alignment-free distances."""

from .analytics import true_distance_matrix
from .estimator import DistanceMatrix, EstimatorConfig, distance_matrix, make_partition
from .experiment import ExperimentConfig, run_experiment
from .generators import generate_bounded_rates_tree, generate_clock_tree
from .model import EdgeParams, SubstitutionModel
from .simulator import EvolvedSequence, evolve_branch, evolve_tree, sample_root_sequence
from .topology import Topology, buneman, neighbor_joining, reconstruct_topology, robinson_foulds
from .tree import Phylogeny, emit_newick, parse_newick
from .validation import validate_analytics

__version__ = "0.1.0"

__all__ = [
    "DistanceMatrix", "EdgeParams", "EstimatorConfig", "EvolvedSequence", "ExperimentConfig", "Phylogeny",
    "SubstitutionModel", "Topology", "buneman", "distance_matrix", "emit_newick", "evolve_branch", "evolve_tree",
    "generate_bounded_rates_tree", "generate_clock_tree", "make_partition", "neighbor_joining", "parse_newick",
    "reconstruct_topology", "robinson_foulds", "run_experiment", "sample_root_sequence", "true_distance_matrix",
    "validate_analytics",
]
