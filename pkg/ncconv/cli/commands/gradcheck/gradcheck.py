import logging
import os.path
from typing import Any, Dict, List

from .cases import all_cases
from ...utils.metrics_io import write_json
from ...utils.runtime import EXIT_FAILED, EXIT_OK, prepare_run
from ....core.parallel import map_samples
from ....data_types import RunConfig

logger = logging.getLogger(__name__)


def cmd_gradcheck(config: RunConfig) -> int:
    prepare_run(config)
    section = config.gradcheck
    report_path = os.path.join(config.output_dir, "gradcheck.json")

    """
    Every analytic backward against central differences, in float64.
    """
    cases = all_cases(section.cases, config.seed, perturb=section.perturb_gradient)
    results = map_samples(lambda i: cases[i](section.step), len(cases))

    rows: List[Dict[str, Any]] = []
    failed = 0
    for result in results:
        passed = result.max_error < section.tolerance
        failed += 0 if passed else 1
        print(f"{'ok  ' if passed else 'FAIL'} {result.max_error:.3e}  {result.name}")
        rows.append({
            "case": result.name,
            "max_relative_error": result.max_error,
            "errors": result.errors,
            "passed": passed,
        })

    write_json(report_path, {
        "tolerance": section.tolerance,
        "step": section.step,
        "failed": failed,
        "cases": rows,
    })
    print(f"{len(results) - failed}/{len(results)} gradient checks passed (tolerance {section.tolerance:g})")
    if failed:
        logger.error("%d gradient check(s) exceeded tolerance %g", failed, section.tolerance)
        return EXIT_FAILED
    return EXIT_OK
