"""scenedit: a deterministic 3D-aware scene editing engine.

The package covers the full pipeline around a (state, operation, observation)
editing loop: domain simulators and renderers, rule-based multi-round
sequence sampling, conditioning and attention numeric kernels, buffered
editing sessions, bit-exact dataset io with PSNR/SSIM metrics, and a CLI +
HTTP service front end.
"""

from . import attention, conditioning, dataset, render2d, sampler, session, sim3d, weights
from .assets import AssetStore, ObjectAsset, build_demo_store, write_demo_assets
from .scene import (
    CameraParams,
    InstanceAnnotation,
    ObjectInstance,
    Observation,
    OperationCommand,
    OperationRecord,
    SceneState,
    apply_operation,
    derive_source_region,
    derive_target_mask,
    render_state,
)

__version__ = "0.1.0"

__all__ = [
    "AssetStore",
    "ObjectAsset",
    "build_demo_store",
    "write_demo_assets",
    "CameraParams",
    "InstanceAnnotation",
    "ObjectInstance",
    "Observation",
    "OperationCommand",
    "OperationRecord",
    "SceneState",
    "apply_operation",
    "derive_source_region",
    "derive_target_mask",
    "render_state",
    "attention",
    "conditioning",
    "dataset",
    "render2d",
    "sampler",
    "session",
    "sim3d",
    "weights",
    "__version__",
]
