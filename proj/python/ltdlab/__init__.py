"""Python bindings for ltdlab."""

from ._ltdlab import (
    FormatError,
    InvalidConfig,
    InvalidInput,
    InvalidShape,
    InvalidSpec,
    IoError,
    LtdError,
    NumericalError,
    alpha_bars,
    compare_peaks,
    ddim_timesteps,
    generate,
    load_tensor,
    ltd_loss,
    ltd_map,
    ltd_map_bruteforce,
    pseudo_encode,
    q_sample,
    save_tensor,
    train,
    weight_map,
)

__all__ = [
    "FormatError",
    "InvalidConfig",
    "InvalidInput",
    "InvalidShape",
    "InvalidSpec",
    "IoError",
    "LtdError",
    "NumericalError",
    "alpha_bars",
    "compare_peaks",
    "ddim_timesteps",
    "generate",
    "load_tensor",
    "ltd_loss",
    "ltd_map",
    "ltd_map_bruteforce",
    "pseudo_encode",
    "q_sample",
    "save_tensor",
    "train",
    "weight_map",
]
