"""Diffusion-model speckle denoising for OCT b-scans.

Images are 2-D float32 arrays in [-1, 1]; volumes are (slices, height, width) stacks.
"""

from ._specklediff import (
    Model,
    SpeckleDiffError,
    VarianceSchedule,
    cnr,
    default_schedule,
    enl,
    fuse_volume,
    kl_gaussian,
    load_checkpoint,
    load_raw,
    make_linear_schedule,
    make_phantom,
    make_phantom_volume,
    normalize,
    paired_t_test,
    predict_mu_from_eps,
    psnr,
    q_posterior,
    q_sample,
    save_raw,
    snr,
    spearman_rho,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "Model",
    "SpeckleDiffError",
    "VarianceSchedule",
    "cnr",
    "default_schedule",
    "enl",
    "fuse_volume",
    "kl_gaussian",
    "load_checkpoint",
    "load_raw",
    "make_linear_schedule",
    "make_phantom",
    "make_phantom_volume",
    "normalize",
    "paired_t_test",
    "predict_mu_from_eps",
    "psnr",
    "q_posterior",
    "q_sample",
    "save_raw",
    "snr",
    "spearman_rho",
    "train",
]
