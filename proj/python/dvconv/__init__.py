"""Point-cloud learning engine: dynamic voxelization + p4/p4m group convolution."""

from dvconv._core import (
    Dataset,
    Network,
    VoxelBatch,
    evaluate,
    farthest_point_sample,
    group_table,
    knn_search,
    train_epochs,
    transform_kernel,
    voxelize,
)

__all__ = [
    "Dataset",
    "Network",
    "VoxelBatch",
    "evaluate",
    "farthest_point_sample",
    "group_table",
    "knn_search",
    "train_epochs",
    "transform_kernel",
    "voxelize",
]
