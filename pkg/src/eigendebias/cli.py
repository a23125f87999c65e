"""Command-line interface.

Subcommands:
  estimate-md    de-biased <a, u_l> from a symmetric matrix CSV
  estimate-pca   de-biased <a, u_l> from a p x n data panel CSV
  experiment     run a config-driven Monte Carlo sweep
  verify-master  randomized check of the exact overlap identities
  lowerbound     two-point pairs / plug-in exceedance experiments

Exit codes: 0 success, 2 invalid input (including file problems),
3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import sys

import numpy as np

from . import harness, lowerbounds
from .core import (
    Ordering,
    eigendecompose,
    format_float,
    read_matrix,
    read_symmetric,
    read_vector,
)
from .denoise import GroundTruthDenoising, estimate_functional_md, semicircle_b
from .errors import (
    EXIT_INVALID_INPUT,
    EXIT_NUMERICAL_FAILURE,
    EXIT_OK,
    InvalidInput,
    NumericalFailure,
)
from .master import run_master_suite
from .pca import estimate_functional_pca, estimate_noise_pca, sample_covariance


def _emit(pairs) -> None:
    for key, value in pairs:
        if isinstance(value, float):
            value = format_float(value)
        print(f"{key} = {value}")


def _cmd_estimate_md(args) -> int:
    matrix = read_symmetric(args.matrix)
    a = read_vector(args.a)
    est = estimate_functional_md(matrix, a, args.l, args.rank, args.sigma)
    correction, source = est.correction, "bulk_sum"
    if args.semicircle:
        correction = semicircle_b(est.lambda_l, args.sigma, matrix.dim)
        source = "semicircle"
    factor = math.sqrt(1.0 + correction)
    _emit(
        (
            ("lambda_l", est.lambda_l),
            ("plugin", est.plugin),
            ("correction", correction),
            ("correction_source", source),
            ("factor", factor),
            ("debiased", factor * est.plugin),
        )
    )
    return EXIT_OK


def _cmd_estimate_pca(args) -> int:
    data = read_matrix(args.data)
    a = read_vector(args.a)
    sigma2 = args.sigma2
    estimated = False
    if args.estimate_noise:
        spec = eigendecompose(sample_covariance(data), Ordering.BY_VALUE_DESC)
        sigma2 = estimate_noise_pca(spec, args.rank, data.shape[1])
        estimated = True
    est = estimate_functional_pca(data, a, args.l, args.rank, sigma2)
    rows = [
        ("lambda_l", est.lambda_l),
        ("plugin", est.plugin),
        ("correction", est.correction),
        ("factor", est.factor),
        ("debiased", est.debiased),
        ("branch", est.branch.value),
    ]
    if estimated:
        rows.append(("sigma2_estimated", sigma2))
    _emit(rows)
    return EXIT_OK


def _cmd_experiment(args) -> int:
    config = harness.load_config(args.config)
    if args.out is not None:
        config = dataclasses.replace(config, output_path=args.out)
    result = harness.run_experiment(config, workers=args.workers)
    for row in result.summaries:
        if row.error is not None:
            print(f"instance={row.instance} n={row.n} FAILED: {row.error}")
            continue
        print(
            f"instance={row.instance} n={row.n} trials={row.trials} "
            f"median_plugin={format_float(row.median_plugin)} "
            f"median_debiased={format_float(row.median_debiased)} "
            f"mean_trial_ms={row.mean_trial_ms:.1f}"
        )
    try:
        slope = harness.fit_error_slope(result.summaries)
        print(f"slope_debiased = {format_float(slope)}")
    except InvalidInput:
        pass
    print(f"wrote {config.output_path}")
    return EXIT_OK


def _cmd_verify_master(args) -> int:
    result = run_master_suite(args.trials, args.trials, args.seed, n_max=args.n)
    _emit(
        (
            ("vector_trials", result.vector_trials),
            ("general_trials", result.general_trials),
            ("worst_relative_gap", result.worst_relative_gap),
            ("failures", result.failures),
        )
    )
    return EXIT_OK if result.ok() else EXIT_NUMERICAL_FAILURE


def _parse_lambdas(raw: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in raw.split(","))
    except ValueError as exc:
        raise InvalidInput(f"bad --lambdas value {raw!r}: {exc}") from exc


def _load_or_random_unit(path, dim: int, seed: int) -> np.ndarray:
    if path is not None:
        return read_vector(path)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def _cmd_lowerbound(args) -> int:
    from .pca import SpikedModel

    if args.pair == "rotation":
        model = SpikedModel.canonical(args.p, args.n, _parse_lambdas(args.lambdas), args.sigma2)
        pair = lowerbounds.rotation_pair(model, args.l, args.k, args.cn)
        kl_generic = model.n * lowerbounds.gaussian_kl(pair.Sigma0, pair.Sigma1)
        _emit(
            (
                ("theta_n", pair.theta_n),
                ("kl", pair.kl),
                ("kl_generic", kl_generic),
                ("kl_gap", abs(pair.kl - kl_generic)),
                ("frobenius_gap", pair.frobenius_gap()),
            )
        )
        return EXIT_OK
    if args.pair == "direction":
        model = SpikedModel.canonical(args.p, args.n, _parse_lambdas(args.lambdas), args.sigma2)
        a = _load_or_random_unit(args.a, args.p, args.seed)
        pair = lowerbounds.direction_pair(model, args.l, a, args.cn)
        kl_generic = model.n * lowerbounds.gaussian_kl(pair.Sigma0, pair.Sigma1)
        _emit(
            (
                ("delta_n", pair.delta_n),
                ("kl", pair.kl),
                ("kl_generic", kl_generic),
                ("kl_gap", abs(pair.kl - kl_generic)),
                ("frobenius_gap", pair.frobenius_gap()),
            )
        )
        return EXIT_OK
    # plugin exceedance experiment (additive-noise model)
    model = GroundTruthDenoising.canonical(args.n, _parse_lambdas(args.lambdas), args.sigma)
    if args.a is not None:
        a = read_vector(args.a)
    else:
        a = model.spike_vector(args.l)
    report = lowerbounds.plugin_lower_experiment(model, a, args.l, args.trials, args.seed)
    rows = [("bias_scale", report.bias_scale), ("trials", report.trials)]
    for threshold, prob in zip(report.thresholds, report.probabilities):
        rows.append((f"p_exceed_{threshold}", prob))
    _emit(rows)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eigendebias",
        description="De-biased eigenvector functional estimation and its test harness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_md = sub.add_parser("estimate-md", help="de-biased <a, u_l> for a symmetric matrix")
    p_md.add_argument("--matrix", required=True, help="CSV of the observed symmetric matrix")
    p_md.add_argument("--a", required=True, help="CSV of the unit direction (one value per line)")
    p_md.add_argument("--l", type=int, required=True, help="spike index (1-based)")
    p_md.add_argument("--rank", type=int, required=True, help="signal rank r")
    p_md.add_argument("--sigma", type=float, required=True, help="noise standard deviation")
    p_md.add_argument(
        "--semicircle",
        action="store_true",
        help="use the semicircle-law correction instead of the bulk sum",
    )
    p_md.set_defaults(func=_cmd_estimate_md)

    p_pca = sub.add_parser("estimate-pca", help="de-biased <a, u_l> for a data panel")
    p_pca.add_argument("--data", required=True, help="CSV of the p x n data matrix")
    p_pca.add_argument("--a", required=True, help="CSV of the unit direction")
    p_pca.add_argument("--l", type=int, required=True, help="spike index (1-based)")
    p_pca.add_argument("--rank", type=int, required=True, help="signal rank r")
    noise_group = p_pca.add_mutually_exclusive_group()
    noise_group.add_argument("--sigma2", type=float, default=None, help="noise variance")
    noise_group.add_argument(
        "--estimate-noise",
        action="store_true",
        help="estimate the noise variance from the bulk spectrum",
    )
    p_pca.set_defaults(func=_cmd_estimate_pca)

    p_exp = sub.add_parser("experiment", help="run a Monte Carlo sweep from a config file")
    p_exp.add_argument("--config", required=True, help="flat key=value config file")
    p_exp.add_argument("--out", default=None, help="override the config output_path")
    p_exp.add_argument("--workers", type=int, default=1, help="worker processes")
    p_exp.set_defaults(func=_cmd_experiment)

    p_ver = sub.add_parser("verify-master", help="randomized overlap-identity verification")
    p_ver.add_argument("--n", type=int, default=40, help="max matrix dimension")
    p_ver.add_argument("--trials", type=int, default=100, help="trials per identity family")
    p_ver.add_argument("--seed", type=int, default=20260815)
    p_ver.set_defaults(func=_cmd_verify_master)

    p_lb = sub.add_parser("lowerbound", help="two-point pairs and plug-in exceedance")
    lb_sub = p_lb.add_subparsers(dest="pair", required=True)

    lb_rot = lb_sub.add_parser("rotation", help="rotate two spikes towards each other")
    lb_rot.add_argument("--p", type=int, required=True)
    lb_rot.add_argument("--n", type=int, required=True)
    lb_rot.add_argument("--lambdas", required=True, help="comma-separated spike values")
    lb_rot.add_argument("--sigma2", type=float, required=True)
    lb_rot.add_argument("--l", type=int, required=True)
    lb_rot.add_argument("--k", type=int, required=True)
    lb_rot.add_argument("--cn", type=float, required=True, help="tuning constant")
    lb_rot.set_defaults(func=_cmd_lowerbound)

    lb_dir = lb_sub.add_parser("direction", help="tilt a spike towards a probe direction")
    lb_dir.add_argument("--p", type=int, required=True)
    lb_dir.add_argument("--n", type=int, required=True)
    lb_dir.add_argument("--lambdas", required=True)
    lb_dir.add_argument("--sigma2", type=float, required=True)
    lb_dir.add_argument("--l", type=int, required=True)
    lb_dir.add_argument("--cn", type=float, required=True)
    lb_dir.add_argument("--a", default=None, help="CSV of the probe direction (default: random)")
    lb_dir.add_argument("--seed", type=int, default=20260815)
    lb_dir.set_defaults(func=_cmd_lowerbound)

    lb_plug = lb_sub.add_parser("plugin", help="plug-in bias exceedance probabilities")
    lb_plug.add_argument("--n", type=int, required=True)
    lb_plug.add_argument("--lambdas", required=True)
    lb_plug.add_argument("--sigma", type=float, required=True)
    lb_plug.add_argument("--l", type=int, required=True)
    lb_plug.add_argument("--trials", type=int, required=True)
    lb_plug.add_argument("--seed", type=int, default=20260815)
    lb_plug.add_argument("--a", default=None, help="CSV probe direction (default: the spike)")
    lb_plug.set_defaults(func=_cmd_lowerbound)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InvalidInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID_INPUT
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL_FAILURE


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
