"""Python bindings for the inr4d library.

Volumes are numpy arrays shaped (nz, ny, nx); series add a leading time
axis. Coordinates are (n, 4) arrays of normalized (x, y, z, t).
"""

from ._inr4d import (
    AdamState,
    Config,
    Encoder,
    Error,
    Model,
    adam_step,
    dice,
    efc_slice,
    efc_volume,
    generate_phantom,
    lr_at,
    mse,
    normalize_intensity,
    pretrain,
    psnr,
    read_labels,
    read_manifest,
    read_nifti,
    reconstruct,
    refine,
    run_command,
    split_timepoints,
    tc_identity,
    tc_neighbours,
    threshold_labels,
    write_labels,
    write_manifest,
    write_nifti,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
