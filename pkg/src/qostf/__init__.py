"""Quasi-orthogonal space-time-frequency codes for 4-antenna MIMO-OFDM."""

from .constellation import Constellation, mpsk, optimal_rotation
from .codebook import LinearCode, StfCodeword, StfGrid, qostbc4, qostfbc2, qostftc8
from .metrics import PairwiseMetrics, cgd, distance_matrix, hamming_distance, mpd
from .channel import ChannelRealization, PowerDelayProfile
from .partition import PartitionTree, Trellis, build_trellis, min_path_metrics, partition
from .transceiver import FrameConfig, make_scheme
from .harness import ExperimentConfig, FerCurve, compare_curves, diversity_slope, run_sweep

__all__ = [
    "Constellation", "mpsk", "optimal_rotation",
    "LinearCode", "StfCodeword", "StfGrid", "qostbc4", "qostfbc2", "qostftc8",
    "PairwiseMetrics", "cgd", "distance_matrix", "hamming_distance", "mpd",
    "ChannelRealization", "PowerDelayProfile",
    "PartitionTree", "Trellis", "build_trellis", "min_path_metrics", "partition",
    "FrameConfig", "make_scheme",
    "ExperimentConfig", "FerCurve", "compare_curves", "diversity_slope", "run_sweep",
]
