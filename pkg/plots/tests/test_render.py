"""CSV parsing, grouping, slope fitting, and figure rendering."""

import math

import numpy as np
import pytest

from plots import (
    RESULTS_COLUMNS,
    FigureKind,
    InvalidInput,
    IoError,
    PlotSpec,
    group_by_instance,
    loglog_slope,
    read_results,
    render,
    scaling_slope,
)

HEADER = ",".join(RESULTS_COLUMNS)


def write_csv(path, rows, header=HEADER):
    lines = [header]
    for row in rows:
        lines.append(",".join(str(x) for x in row))
    path.write_text("\n".join(lines) + "\n")


def scaling_rows():
    """Three trials per n whose median sits exactly on 2 / sqrt(n)."""
    rows = []
    for n in (100, 200, 400, 800):
        m = 2.0 / math.sqrt(n)
        for t, deb in enumerate((0.8 * m, m, 1.3 * m)):
            rows.append((n, t, repr(2.0 * deb), repr(deb), 0.01, 5.0, 4.9, 0))
    return rows


# ---------------------------------------------------------------------------
# CSV schema
# ---------------------------------------------------------------------------


def test_read_results_round_trip(tmp_path):
    path = tmp_path / "r.csv"
    write_csv(path, [("400", 0, 0.5, 0.25, 0.1, 9.0, 8.5, 0)])
    (row,) = read_results(path)
    assert row.instance == "400" and row.trial == 0
    assert row.dist_plugin == 0.5 and row.dist_debiased == 0.25
    assert row.lambda_l == 9.0 and row.wall_ms == 0.0


@pytest.mark.parametrize(
    "header,fragment",
    [
        (HEADER.replace("dist_plugin", "distance_plugin"), "'distance_plugin'"),
        (HEADER.rsplit(",", 1)[0], "'wall_ms'"),
        (HEADER + ",extra", "'extra'"),
    ],
)
def test_read_results_names_offending_column(tmp_path, header, fragment):
    path = tmp_path / "r.csv"
    path.write_text(header + "\n")
    with pytest.raises(InvalidInput, match="schema mismatch") as excinfo:
        read_results(path)
    assert fragment in str(excinfo.value)


def test_header_only_is_an_error(tmp_path):
    path = tmp_path / "r.csv"
    path.write_text(HEADER + "\n")
    with pytest.raises(InvalidInput, match="no data rows"):
        read_results(path)


@pytest.mark.parametrize(
    "line",
    [
        "400,0,0.5,0.25",                       # ragged
        "400,0,0.5,abc,0.1,9.0,8.5,0",          # non-numeric
        "400,zero,0.5,0.25,0.1,9.0,8.5,0",      # non-integer trial
    ],
)
def test_malformed_rows_name_the_line(tmp_path, line):
    path = tmp_path / "r.csv"
    path.write_text(HEADER + "\n" + line + "\n")
    with pytest.raises(InvalidInput, match="line 2"):
        read_results(path)


def test_missing_and_empty_files(tmp_path):
    with pytest.raises(IoError) as excinfo:
        read_results(tmp_path / "absent.csv")
    assert "absent.csv" in str(excinfo.value)
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(IoError, match="empty"):
        read_results(empty)


def test_instance_id_must_encode_n(tmp_path):
    path = tmp_path / "r.csv"
    write_csv(path, [("alpha", 0, 0.5, 0.25, 0.1, 9.0, 8.5, 0)])
    with pytest.raises(InvalidInput, match="'alpha'"):
        group_by_instance(read_results(path))


def test_grouping_preserves_first_appearance_and_parses_suffix(tmp_path):
    path = tmp_path / "r.csv"
    write_csv(
        path,
        [
            ("400#2", 0, 0.5, 0.25, 0.1, 9.0, 8.5, 0),
            ("100", 0, 0.9, 0.30, 0.1, 9.0, 8.5, 0),
            ("400#2", 1, 0.7, 0.35, 0.1, 9.0, 8.5, 0),
        ],
    )
    groups = group_by_instance(read_results(path))
    assert [(g.instance, g.n, len(g.rows)) for g in groups] == [
        ("400#2", 400, 2),
        ("100", 100, 1),
    ]
    assert groups[0].median_debiased == pytest.approx(0.30)


# ---------------------------------------------------------------------------
# Slope fitting
# ---------------------------------------------------------------------------


def test_loglog_slope_recovers_power_laws():
    ns = [100, 200, 400, 800]
    assert loglog_slope(ns, [2.0 / math.sqrt(n) for n in ns]) == pytest.approx(
        -0.5, abs=1e-12
    )
    assert loglog_slope(ns, [0.3] * 4) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(InvalidInput):
        loglog_slope([50, 50], [1.0, 2.0])


def test_scaling_slope_degenerate_cases(tmp_path):
    path = tmp_path / "r.csv"
    write_csv(path, scaling_rows())
    groups = group_by_instance(read_results(path))
    assert scaling_slope(groups) == pytest.approx(-0.5, abs=1e-12)
    # fewer than three distinct n, or a zero median, means no fit
    assert scaling_slope(groups[:2]) is None
    write_csv(
        path,
        [(n, 0, 0.5, 0.0, 0.1, 9.0, 8.5, 0) for n in (100, 200, 400)],
    )
    assert scaling_slope(group_by_instance(read_results(path))) is None


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def test_scaling_render_annotates_the_fitted_slope(tmp_path):
    path = tmp_path / "r.csv"
    write_csv(path, scaling_rows())
    out = tmp_path / "fig.png"
    result = render(PlotSpec(str(path), FigureKind.SCALING_CURVE, str(out)))
    assert out.exists() and out.stat().st_size > 0
    assert result.annotations["slope"] == pytest.approx(-0.5, abs=1e-12)


def test_scaling_slope_matches_harness_fit(tmp_path):
    harness = pytest.importorskip("eigendebias.harness")
    path = tmp_path / "r.csv"
    write_csv(path, scaling_rows())
    result = render(
        PlotSpec(str(path), FigureKind.SCALING_CURVE, str(tmp_path / "fig.png"))
    )
    summaries = []
    for g in group_by_instance(read_results(path)):
        summaries.append(
            harness.SummaryRow(
                instance=g.instance,
                n=g.n,
                trials=len(g.rows),
                median_plugin=g.median_plugin,
                iqr_plugin=0.0,
                median_debiased=g.median_debiased,
                iqr_debiased=0.0,
                mean_correction=0.01,
                mean_trial_ms=0.0,
            )
        )
    expected = harness.fit_error_slope(summaries)
    assert abs(result.annotations["slope"] - expected) <= 1e-9


def test_bias_render_reports_ratios(tmp_path):
    path = tmp_path / "r.csv"
    write_csv(
        path,
        [
            ("400", 0, 0.60, 0.15, 0.1, 9.0, 8.5, 0),
            ("400", 1, 0.80, 0.25, 0.1, 9.0, 8.5, 0),
            ("400", 2, 1.00, 0.20, 0.1, 9.0, 8.5, 0),
            ("800", 0, 0.50, 0.0, 0.1, 9.0, 8.5, 0),
        ],
    )
    out = tmp_path / "fig.png"
    result = render(PlotSpec(str(path), FigureKind.BIAS_DOMINANCE, str(out)))
    assert out.exists() and out.stat().st_size > 0
    assert result.annotations["ratio:400"] == pytest.approx(0.80 / 0.20)
    assert "ratio:800" not in result.annotations  # zero de-biased median


def test_overlay_render_fits_the_power_trend(tmp_path):
    path = tmp_path / "r.csv"
    rows = [
        (n, 0, 0.5, 0.25, repr(5.0 * lam**-2), repr(lam), 8.5, 0)
        for n, lam in ((100, 4.0), (200, 8.0), (400, 16.0))
    ]
    write_csv(path, rows)
    out = tmp_path / "fig.png"
    result = render(PlotSpec(str(path), FigureKind.CORRECTION_OVERLAY, str(out)))
    assert out.exists() and out.stat().st_size > 0
    assert result.annotations["power_law_exponent"] == pytest.approx(-2.0, abs=1e-12)


def test_single_point_csv_renders_all_kinds(tmp_path):
    path = tmp_path / "r.csv"
    write_csv(path, [("64", 0, 0.5, 0.25, 0.1, 9.0, 8.5, 0)])
    for kind in FigureKind:
        out = tmp_path / f"{kind.value}.png"
        result = render(PlotSpec(str(path), kind, str(out)))
        assert out.exists() and out.stat().st_size > 0
        assert "slope" not in result.annotations
        assert "power_law_exponent" not in result.annotations


def test_no_data_rows_writes_no_file(tmp_path):
    path = tmp_path / "r.csv"
    path.write_text(HEADER + "\n")
    out = tmp_path / "fig.png"
    with pytest.raises(InvalidInput):
        render(PlotSpec(str(path), FigureKind.SCALING_CURVE, str(out)))
    assert not out.exists()


def test_rendering_is_pure_in_the_csv(tmp_path):
    path = tmp_path / "r.csv"
    write_csv(path, scaling_rows())
    results = []
    payloads = []
    for tag in ("a", "b"):
        out = tmp_path / f"{tag}.png"
        results.append(
            render(PlotSpec(str(path), FigureKind.SCALING_CURVE, str(out)))
        )
        payloads.append(out.read_bytes())
    assert results[0].annotations == results[1].annotations
    assert payloads[0] == payloads[1]


def test_title_and_label_overrides(tmp_path):
    path = tmp_path / "r.csv"
    write_csv(path, scaling_rows())
    out = tmp_path / "fig.png"
    result = render(
        PlotSpec(
            str(path),
            FigureKind.SCALING_CURVE,
            str(out),
            title="study",
            xlabel="size",
            ylabel="err",
        )
    )
    assert out.exists()
    assert result.kind is FigureKind.SCALING_CURVE
