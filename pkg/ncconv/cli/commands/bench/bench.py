"""
Wall-time comparison of the naive loop convolution, the im2col + GEMM path
and NC forward/backward. Every geometry is cross-checked against the naive
oracle before any of its timings are recorded.
"""
import logging
import os.path
import time
from typing import Any, Callable, Dict, List

import numpy as np

from ...utils.metrics_io import write_rows_csv
from ...utils.runtime import EXIT_FAILED, EXIT_OK, prepare_run
from ....core.nc_conv import conv_forward, init_layer_state, naive_conv, nc_backward, nc_forward
from ....core.tensor import make_rng
from ....data_types import ConvGeometry, RunConfig
from ....errors import ConfigError, GeometryError

logger = logging.getLogger(__name__)


def parse_geometry(values: List[int], index: int) -> ConvGeometry:
    if len(values) != 6:
        raise ConfigError(f"bench.geometries[{index}]: expected [in, out, kernel, stride, padding, size], got {values}")
    c, o, k, s, p, size = values
    g = ConvGeometry(
        in_channels=c,
        out_channels=o,
        kernel=(k, k),
        stride=(s, s),
        padding=(p, p),
        input_size=(size, size),
    )
    try:
        g.validate()
    except GeometryError as e:
        raise ConfigError(f"bench.geometries[{index}]: {e}") from e
    return g


def median_ms(fn: Callable[[], object], repeats: int) -> float:
    times = []
    for _ in range(repeats):
        started = time.perf_counter()
        fn()
        times.append((time.perf_counter() - started) * 1000.0)
    return float(np.median(times))


def cmd_bench(config: RunConfig) -> int:
    bench = config.bench
    geometries = [parse_geometry(values, i) for i, values in enumerate(bench.geometries)]
    prepare_run(config)

    rows: List[Dict[str, Any]] = []
    for index, g in enumerate(geometries):
        rng = make_rng(config.seed, 21, index)
        x = rng.standard_normal((bench.batch, g.in_channels, *g.input_size)).astype(np.float32)
        st = init_layer_state(g, rng, np.float32, normalized=False)

        """
        Oracle check in float32 before timing.
        """
        expected = naive_conv(x, st.weights, g)
        actual = conv_forward(x, st, g)
        error = float(np.max(np.abs(actual - expected)) / max(1.0, float(np.max(np.abs(expected)))))
        if error > bench.tolerance:
            logger.error("geometry %d %s: im2col differs from the naive oracle by %.3e", index, g, error)
            return EXIT_FAILED

        nc_state = init_layer_state(g, rng, np.float32, normalized=True)
        grad_y = np.ones_like(nc_forward(x, nc_state, g))
        timings = {
            "naive": median_ms(lambda: naive_conv(x, st.weights, g), bench.repeats),
            "im2col_gemm": median_ms(lambda: conv_forward(x, st, g), bench.repeats),
            "nc_forward": median_ms(lambda: nc_forward(x, nc_state, g), bench.repeats),
            "nc_backward": median_ms(lambda: nc_backward(grad_y, nc_state, g), bench.repeats),
        }
        for method, ms in timings.items():
            rows.append({
                "geometry": index,
                "method": method,
                "in_channels": g.in_channels,
                "out_channels": g.out_channels,
                "kernel": g.kernel[0],
                "stride": g.stride[0],
                "padding": g.padding[0],
                "size": g.input_size[0],
                "batch": bench.batch,
                "repeats": bench.repeats,
                "max_oracle_error": error,
                "median_ms": ms,
                "per_image_ms": ms / bench.batch,
            })
            print(f"geometry {index} {method:12s} median {ms:9.3f} ms ({ms / bench.batch:.3f} ms/image)")

    write_rows_csv(os.path.join(config.output_dir, "bench.csv"), rows)
    return EXIT_OK
