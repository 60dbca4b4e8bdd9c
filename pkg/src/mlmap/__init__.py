"""Continuous semantic, traversability and friction mapping with Bayesian kernel inference."""

__version__ = "0.1.0"

from .config import RunConfig, load_config, parse_config
from .gaussian import FrictionBKI, GaussianLayerConfig, gaussian_to_bernoulli, update_gaussian
from .geometry import CameraIntrinsics, Pose, Raster
from .grid import VoxelGrid, beta_grid, dirichlet_grid, gaussian_grid
from .io import FormatError, deserialize_map, read_map, serialize_map, write_map
from .kernel import KernelParams, PointIndex, build_index, sparse_kernel
from .labeling import TraversabilityLabelConfig, TraversabilityLabeler, traversability_score
from .metrics import ConfusionMatrix, confusion_and_iou, mtl_delta, project_map_to_image_labels
from .pipeline import ScanRecord, evaluate, load_dataset, run_mapping
from .semantic import SemanticBKI, SemanticConfig, update_semantic
from .traversability import TraversabilityBKI, TraversabilityConfig, update_traversability

__all__ = [
    "CameraIntrinsics", "ConfusionMatrix", "FormatError", "FrictionBKI", "GaussianLayerConfig", "KernelParams",
    "PointIndex", "Pose", "Raster", "RunConfig", "ScanRecord", "SemanticBKI", "SemanticConfig",
    "TraversabilityBKI", "TraversabilityConfig", "TraversabilityLabelConfig", "TraversabilityLabeler",
    "VoxelGrid", "beta_grid", "build_index", "confusion_and_iou", "deserialize_map", "dirichlet_grid",
    "evaluate", "gaussian_grid", "gaussian_to_bernoulli", "load_config", "load_dataset", "mtl_delta",
    "parse_config", "project_map_to_image_labels", "read_map", "run_mapping", "serialize_map",
    "sparse_kernel", "traversability_score", "update_gaussian", "update_semantic", "update_traversability",
    "write_map",
]
