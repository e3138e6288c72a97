"""Bayesian GAN: SGHMC sampling over generator and discriminator weights."""

from ._core import (
    ConfigError,
    FormatError,
    SpecMismatchError,
    check_gradients,
    check_sampler,
    cluster_count,
    default_config,
    jsd,
    mds,
    parse_config,
    pca,
    predict,
    synthetic,
    train,
)

__all__ = [
    "ConfigError",
    "FormatError",
    "SpecMismatchError",
    "check_gradients",
    "check_sampler",
    "cluster_count",
    "default_config",
    "jsd",
    "mds",
    "parse_config",
    "pca",
    "predict",
    "synthetic",
    "train",
]
