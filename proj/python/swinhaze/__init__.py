"""Satellite image dehazing: losses, metrics, watershed maps and the SwinRRDB U-Net."""

from ._swinhaze import (
    Error,
    canny,
    dehaze,
    guided_filter,
    guided_loss_grad,
    l2_loss_grad,
    load_image,
    loss_report,
    psnr,
    resize,
    run_cli,
    save_image,
    ssim,
    synthetic_pair,
    uqi,
    watershed_map,
)

__all__ = [
    "Error",
    "canny",
    "dehaze",
    "guided_filter",
    "guided_loss_grad",
    "l2_loss_grad",
    "load_image",
    "loss_report",
    "psnr",
    "resize",
    "run_cli",
    "save_image",
    "ssim",
    "synthetic_pair",
    "uqi",
    "watershed_map",
]
