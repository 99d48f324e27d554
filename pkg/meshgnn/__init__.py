"""meshgnn -- multi-graph neural networks for sets of 3D surface meshes."""

from meshgnn.config import FeatureConfig, ModelConfig, TrainConfig
from meshgnn.exceptions import (
    BatchError,
    ConfigMismatchError,
    DegenerateFrameError,
    DegenerateLabelSetError,
    FeatureModeError,
    MeshFormatError,
    MeshGnnError,
    SampleAssemblyError,
    ShapeMismatchError,
    ZeroLengthPairError,
)
from meshgnn.features import darboux_angles, edge_attributes, fpfh, node_features, spfh
from meshgnn.graph import Batch, Graph, Sample, assemble_sample, augment, batch, unbatch
from meshgnn.mesh import Mesh, load_off, radius_neighbors, save_off, vertex_normals
from meshgnn.models import Metrics, Prediction, RocPoint
from meshgnn.nn.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from meshgnn.nn.model import init_parameters, model_forward, predict_proba
from meshgnn.pipeline.evaluation import compute_metrics, roc_auc

__all__ = [
    "Batch",
    "BatchError",
    "Checkpoint",
    "ConfigMismatchError",
    "DegenerateFrameError",
    "DegenerateLabelSetError",
    "FeatureConfig",
    "FeatureModeError",
    "Graph",
    "Mesh",
    "MeshFormatError",
    "MeshGnnError",
    "Metrics",
    "ModelConfig",
    "Prediction",
    "RocPoint",
    "Sample",
    "SampleAssemblyError",
    "ShapeMismatchError",
    "TrainConfig",
    "ZeroLengthPairError",
    "assemble_sample",
    "augment",
    "batch",
    "compute_metrics",
    "darboux_angles",
    "edge_attributes",
    "fpfh",
    "init_parameters",
    "load_checkpoint",
    "load_off",
    "model_forward",
    "node_features",
    "predict_proba",
    "radius_neighbors",
    "roc_auc",
    "save_checkpoint",
    "save_off",
    "spfh",
    "unbatch",
    "vertex_normals",
]
