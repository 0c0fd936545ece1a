"""Adaptive graph convolution for attributed graph clustering."""

from .convolve import SpectralOracle, convolve_k, frequency_response, smoothness
from .datagen import SbmSpec, gen_sbm
from .driver import AgcConfig, AgcResult, AgcTrace, run_agc, sweep_k
from .errors import AgcError, DomainError, ParseError, ValidationError
from .graph import PropagationOperator, SparseGraph, degree_vector, load_edge_list, propagation_operator
from .metrics import MetricsReport, accuracy, evaluate, intra_distance, macro_f1, nmi
from .spectral import ClusterPartition, SpectralEmbedding, kmeans, linear_kernel, spectral_cluster, top_eigenvectors

__version__ = "0.1.0"
