"""Cluster Quilting: spectral clustering of patchwork-observed data.

Each observed patch is reduced to a top-``r`` SVD, the right factors are
stitched together across shared samples by least squares, and k-means runs
on the re-factorised embedding.
"""
__version__ = "0.1.0"

from .diagnostics import DiagnosticsReport, compute_gamma, diagnose, merge_factor, misclustering_bound
from .errors import (DegeneratePatchError, EmptyOverlapError, GenerationError, InvalidConfigError,
                     InvalidInputError, InvalidRankError, NoFeasibleOrderingError, PatchValidationError,
                     QuiltError, SingularTransformError, SizeCapError, SplitInfeasibleError)
from .kmeans import KMeansConfig, KMeansResult, kmeans
from .linalg import (SvdTriple, invert_square, least_squares_transform, rth_singular_value, spectral_norm,
                     truncated_svd)
from .metrics import adjusted_rand_index, align_labels, misclustering_rate
from .ordering import (OrderingResult, ScoreFunction, choose_ordering, order_exhaustive, order_greedy,
                       score_overlap_size, score_snr)
from .patches import ObservationGraph, Patch, PatchSet, build_graph, check_connected, overlap_sets
from .quilt import QuiltResult, QuiltState, cluster_quilting, impute_matrix, postprocess, quilt_factors
from .simulate import MixtureGroundTruth, SimConfig, Simulation, simulate
from .tuning import TuneGrid, TuneResult, tune

__all__ = [name for name in dir() if not name.startswith("_")]
