"""Tone-mapping toolkit: classical operators, a no-reference quality metric,
preference statistics, and GAN-checkpoint inference."""

from ._core import (
    DataError,
    NumericError,
    apply_tmo,
    apply_tmo_lum,
    binomial_cdf,
    describe_tmos,
    infer,
    luminance,
    preference_prob,
    read_hdr,
    read_png,
    significance_thresholds,
    tmo_names,
    tmqi,
    write_hdr,
    write_png,
)

__all__ = [
    "DataError",
    "NumericError",
    "apply_tmo",
    "apply_tmo_lum",
    "binomial_cdf",
    "describe_tmos",
    "infer",
    "luminance",
    "preference_prob",
    "read_hdr",
    "read_png",
    "significance_thresholds",
    "tmo_names",
    "tmqi",
    "write_hdr",
    "write_png",
]
