"""
Distribution of pre-activation outputs when standardized patches meet
N(0, 1/I) weights. Each patch is paired with its own weight draw, so the
outputs are i.i.d. and their mean/variance can be held to CLT bounds.
"""
import logging
from typing import Literal, Optional

import numpy as np
from scipy import stats

from ..core.nc_conv import standardize
from ..core.tensor import Rng, Tensor, randn
from ..data_types import ConvGeometry, NormalityReport

logger = logging.getLogger(__name__)

PatchDistribution = Literal["gaussian", "uniform", "heavy_tailed"]


def sample_patches(patch_size: int, n_patches: int, rng: Rng, distribution: PatchDistribution) -> Tensor:
    """I x n matrix of raw patches, one per column."""
    shape = (patch_size, n_patches)
    if distribution == "uniform":
        return rng.uniform(0.0, 1.0, size=shape)
    if distribution == "heavy_tailed":
        return rng.standard_t(3.0, size=shape)
    return rng.standard_normal(size=shape)


def check_output_normality(
        geometry: ConvGeometry,
        n_patches: int,
        rng: Rng,
        distribution: PatchDistribution = "gaussian",
        weight_std: Optional[float] = None,
        epsilon: float = 1e-5,
) -> NormalityReport:
    patch_size = geometry.patch_size
    std = 1.0 / np.sqrt(patch_size) if weight_std is None else weight_std
    xhat, _ = standardize(sample_patches(patch_size, n_patches, rng, distribution), epsilon)
    weights = randn((patch_size, n_patches), rng, std=float(std))
    outputs = np.einsum("ik,ik->k", weights, xhat)

    mean = float(outputs.mean())
    variance = float(outputs.var())
    degenerate = patch_size == 1 or variance == 0.0
    if degenerate:
        skewness = kurtosis = 0.0
        pvalue = float("nan")
    else:
        skewness = float(stats.skew(outputs))
        kurtosis = float(stats.kurtosis(outputs, fisher=True))
        pvalue = float(stats.normaltest(outputs).pvalue) if n_patches >= 20 else float("nan")

    mean_bound = 4.0 / np.sqrt(max(n_patches, 1))
    report = NormalityReport(
        patch_size=patch_size,
        n_patches=n_patches,
        distribution=distribution,
        mean=mean,
        variance=variance,
        skewness=skewness,
        excess_kurtosis=kurtosis,
        normaltest_pvalue=pvalue,
        mean_bound=float(mean_bound),
        mean_ok=abs(mean) <= mean_bound,
        variance_ok=0.9 <= variance <= 1.1,
        degenerate=degenerate,
    )
    if degenerate:
        logger.warning("patch size %d: standardized patches carry no signal, outputs are constant", patch_size)
    return report
