"""Secondary acceptance: slope annotation agrees with the harness fit on a
real scaling-sweep CSV, and every figure kind renders from it.

The sweep CSV is produced through the primary component's external
interface (its console script); the primary package itself is imported
only to compute the reference slope.
"""

import math
import subprocess

from eigendebias import harness

from plots import FigureKind, PlotSpec, render

SUITE_SEED = 20260815


def test_secondary_acceptance(tmp_path):
    csv_path = tmp_path / "results.csv"
    config = tmp_path / "study.cfg"
    sweep_lines = "".join(
        f"sweep = n={n} lambda={10.0 * math.sqrt(n)!r} a=random_unit sigma=1.0\n"
        for n in (100, 200, 400, 800)
    )
    config.write_text(
        "model_kind = denoise\n"
        "trials = 10\n"
        f"seed = {SUITE_SEED}\n"
        f"output_path = {csv_path}\n" + sweep_lines
    )
    proc = subprocess.run(
        ["eigendebias", "experiment", "--config", str(config)],
        capture_output=True,
        text=True,
        timeout=300,
    )
    assert proc.returncode == 0, proc.stderr

    result = render(
        PlotSpec(str(csv_path), FigureKind.SCALING_CURVE, str(tmp_path / "scaling.png"))
    )
    reference = harness.fit_error_slope(
        harness.run_experiment(harness.load_config(config)).summaries
    )
    gap = abs(result.annotations["slope"] - reference)
    slope_ok = gap <= 1e-9

    render_ok = True
    for kind in FigureKind:
        out = tmp_path / f"{kind.value}.png"
        render(PlotSpec(str(csv_path), kind, str(out)))
        render_ok = render_ok and out.exists() and out.stat().st_size > 0

    ok = slope_ok and render_ok
    print(
        f"[{'PASS' if ok else 'FAIL'}] secondary criterion: slope annotation "
        f"{result.annotations['slope']:.6f} vs harness {reference:.6f} "
        f"(gap {gap:.2e}, need <= 1e-09); all three figure kinds rendered: "
        f"{render_ok}"
    )
    assert ok
