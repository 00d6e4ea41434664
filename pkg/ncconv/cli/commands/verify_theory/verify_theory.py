import dataclasses
import logging
import os.path
from typing import List, Tuple

from ...utils.metrics_io import write_json, write_rows_csv
from ...utils.runtime import EXIT_FAILED, EXIT_OK, build_model, input_shape_of, load_datasets, prepare_run
from ....core.tensor import make_rng
from ....data_types import ConvGeometry, ModelSection, NormalityReport, RunConfig
from ....theory.identities import run_identity_suite
from ....theory.normality import PatchDistribution, check_output_normality
from ....theory.smoothness import measure_grad_norm_reduction

logger = logging.getLogger(__name__)

DISTRIBUTIONS: Tuple[PatchDistribution, ...] = ("gaussian", "uniform", "heavy_tailed")


def baseline_section(model: ModelSection, pair: str) -> ModelSection:
    """The comparison model: same architecture, standard convs, GroupNorm when asked."""
    if pair == "gn":
        return dataclasses.replace(model, conv="standard", norm="gn")
    return dataclasses.replace(model, conv="standard", norm="none")


def run_normality(config: RunConfig) -> List[NormalityReport]:
    theory = config.theory
    geometry = ConvGeometry(
        in_channels=theory.normality_channels,
        out_channels=1,
        kernel=(theory.normality_kernel, theory.normality_kernel),
    )
    return [
        check_output_normality(geometry, theory.normality_patches, make_rng(config.seed, 11, i), distribution)
        for i, distribution in enumerate(DISTRIBUTIONS)
    ]


def cmd_verify_theory(config: RunConfig) -> int:
    prepare_run(config)
    theory = config.theory
    out = config.output_dir

    """
    Gradient-norm identities on explicit per-column Jacobians.
    """
    reports = run_identity_suite(theory.instances, theory.sizes, config.seed, theory.tolerance)
    failed = [r for r in reports if not r.passed]
    worst = {
        name: max((r.relative_gap for r in reports if r.name == name), default=0.0)
        for name in sorted({r.name for r in reports})
    }
    write_json(os.path.join(out, "identities.json"), {
        "tolerance": theory.tolerance,
        "worst_gap": worst,
        "failed": len(failed),
        "reports": [dataclasses.asdict(r) for r in reports],
    })
    for name, gap in worst.items():
        print(f"{name}: worst relative gap {gap:.3e} over {theory.instances} instances")

    """
    Output distribution of standardized patches under N(0, 1/I) weights.
    """
    normality = run_normality(config)
    write_json(os.path.join(out, "normality.json"), [dataclasses.asdict(r) for r in normality])
    for r in normality:
        print(f"normality[{r.distribution}] I={r.patch_size}: mean {r.mean:+.4f} (bound {r.mean_bound:.4f}), "
              f"variance {r.variance:.4f}, skew {r.skewness:+.3f}, excess kurtosis {r.excess_kurtosis:+.3f}")
    gaussian = normality[0]
    normality_ok = gaussian.degenerate or (gaussian.mean_ok and gaussian.variance_ok)

    """
    Training trace of NC against its baseline on identical batches.
    """
    if theory.trace_steps > 0:
        train_ds, _ = load_datasets(config)
        shape = input_shape_of(train_ds)
        nc_model = build_model(dataclasses.replace(config, model=dataclasses.replace(config.model, conv="nc", norm="none")), shape)
        baseline = build_model(dataclasses.replace(config, model=baseline_section(config.model, theory.trace_pair)), shape)
        trace = measure_grad_norm_reduction(
            (nc_model, baseline),
            train_ds,
            theory.trace_steps,
            config.train,
            labels=("nc", theory.trace_pair),
        )
        write_rows_csv(os.path.join(out, "trace.csv"), trace.rows)

    if failed or not normality_ok:
        for r in failed[:10]:
            logger.error("%s failed: gap %.3e > %.1e on %s", r.name, r.relative_gap, r.tolerance, r.instance)
        if not normality_ok:
            logger.error("gaussian normality check out of bounds: mean %.4f, variance %.4f",
                         gaussian.mean, gaussian.variance)
        return EXIT_FAILED
    return EXIT_OK
