"""Partial-correlation tests between categorical alignment columns."""

from ._core import (
    Alignment,
    CatparcError,
    DataError,
    EncodedMatrix,
    NumericError,
    __version__,
    aa_pair,
    auc,
    chisq_tail,
    encode,
    gumbel_cdf,
    latent_gaussian,
    make_alignment,
    mutual_information,
    permute_groups,
    read_alignment,
    spearman,
    test_all_pairs,
    trim_rare_residues,
    weighted_chisq_tail,
)

__all__ = [
    "Alignment",
    "CatparcError",
    "DataError",
    "EncodedMatrix",
    "NumericError",
    "__version__",
    "aa_pair",
    "auc",
    "chisq_tail",
    "encode",
    "gumbel_cdf",
    "latent_gaussian",
    "make_alignment",
    "mutual_information",
    "permute_groups",
    "read_alignment",
    "spearman",
    "test_all_pairs",
    "trim_rare_residues",
    "weighted_chisq_tail",
]
