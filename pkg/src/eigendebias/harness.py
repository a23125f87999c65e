"""Deterministic Monte Carlo harness over sweeps of planted models.

A run is fully specified by a flat key = value config file:

    model_kind = denoise              # or: pca
    trials = 200
    seed = 12345
    output_path = results.csv
    sweep = n=1000 r=2 lambda=63.2,31.6 sigma=1.0 a=aligned l=1
    sweep = n=2000 r=1 lambda=447.2 sigma=1.0 a=random_unit l=1

One ``sweep`` line per instance; PCA lines use ``p=`` and ``sigma2=``
instead of ``sigma=``.  Direction modes: ``aligned``, ``basis:<i>``,
``random_unit``, ``mix:<w>`` (overlap w with the target spike, remainder
in a random orthogonal direction).

Reproducibility contract: every random draw is a pure function of
(config seed, instance index, trial index) through named spawn keys, so
results are byte-identical regardless of worker count or scheduling.
The ``wall_ms`` CSV column is part of that contract and is therefore
written as 0; measured timings are only aggregated into the in-memory
summaries.
"""

from __future__ import annotations

import concurrent.futures
import math
import time
from dataclasses import dataclass

import numpy as np

from .core import Ordering, SymmetricMatrix, dist, eigendecompose, format_float
from .denoise import GroundTruthDenoising, debias_factor_md, observe
from .errors import InvalidInput, IoError, NumericalFailure
from .pca import SpikedModel, debias_factor_pca, sample, sample_covariance, shrink_eigenvalue

RESULTS_HEADER = (
    "instance",
    "trial",
    "dist_plugin",
    "dist_debiased",
    "correction",
    "lambda_l",
    "lambda_corrected",
    "wall_ms",
)

# Spawn-key prefixes partitioning the seed space: per-trial noise draws
# versus per-instance direction draws.
_KEY_TRIAL = 0
_KEY_DIRECTION = 1

MODEL_KINDS = ("denoise", "pca")
DIRECTION_MODES = ("aligned", "basis", "random_unit", "mix")


@dataclass(frozen=True)
class InstanceSpec:
    """One sweep point: problem size, spike values, noise, and direction."""

    n: int
    r: int
    lambdas: tuple[float, ...]
    l: int = 1
    a_mode: str = "aligned"
    p: int | None = None
    sigma: float | None = None
    sigma2: float | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    model_kind: str
    sweep: tuple[InstanceSpec, ...]
    trials: int
    seed: int
    output_path: str


@dataclass(frozen=True)
class TrialRecord:
    """One Monte Carlo draw, as persisted to the results CSV."""

    instance: str
    trial: int
    dist_plugin: float
    dist_debiased: float
    correction: float
    lambda_l: float
    lambda_corrected: float
    wall_ms: int


@dataclass(frozen=True)
class SummaryRow:
    """Per-instance aggregate; ``error`` is set (and stats are NaN) when the
    instance failed at runtime."""

    instance: str
    n: int
    trials: int
    median_plugin: float
    iqr_plugin: float
    median_debiased: float
    iqr_debiased: float
    mean_correction: float
    mean_trial_ms: float
    error: str | None = None


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    records: tuple[TrialRecord, ...]
    summaries: tuple[SummaryRow, ...]


# ---------------------------------------------------------------------------
# Config parsing
# ---------------------------------------------------------------------------


def _parse_scalar(key: str, raw: str, caster, lineno: int):
    try:
        return caster(raw)
    except ValueError as exc:
        raise InvalidInput(f"line {lineno}: bad value for {key!r}: {raw!r} ({exc})") from exc


def _parse_sweep_line(raw: str, kind: str, lineno: int) -> InstanceSpec:
    fields: dict[str, str] = {}
    for token in raw.split():
        if "=" not in token:
            raise InvalidInput(f"line {lineno}: sweep token {token!r} is not key=value")
        key, value = token.split("=", 1)
        if key in fields:
            raise InvalidInput(f"line {lineno}: duplicate sweep key {key!r}")
        fields[key] = value

    allowed = {"n", "r", "lambda", "l", "a"}
    allowed |= {"sigma"} if kind == "denoise" else {"p", "sigma2"}
    unknown = set(fields) - allowed
    if unknown:
        raise InvalidInput(f"line {lineno}: unknown sweep keys {sorted(unknown)} for {kind}")
    for required in ("n", "lambda") + (("sigma",) if kind == "denoise" else ("p", "sigma2")):
        if required not in fields:
            raise InvalidInput(f"line {lineno}: sweep is missing {required!r}")

    lambdas = tuple(
        _parse_scalar("lambda", tok, float, lineno) for tok in fields["lambda"].split(",")
    )
    r = _parse_scalar("r", fields["r"], int, lineno) if "r" in fields else len(lambdas)
    if r != len(lambdas):
        raise InvalidInput(
            f"line {lineno}: r={r} does not match {len(lambdas)} lambda value(s)"
        )
    a_mode = fields.get("a", "aligned")
    _validate_direction_mode(a_mode)
    return InstanceSpec(
        n=_parse_scalar("n", fields["n"], int, lineno),
        r=r,
        lambdas=lambdas,
        l=_parse_scalar("l", fields["l"], int, lineno) if "l" in fields else 1,
        a_mode=a_mode,
        p=_parse_scalar("p", fields["p"], int, lineno) if "p" in fields else None,
        sigma=_parse_scalar("sigma", fields["sigma"], float, lineno)
        if "sigma" in fields
        else None,
        sigma2=_parse_scalar("sigma2", fields["sigma2"], float, lineno)
        if "sigma2" in fields
        else None,
    )


def parse_config(text: str) -> ExperimentConfig:
    """Parse the flat config format; see the module docstring."""
    scalars: dict[str, str] = {}
    sweep_raw: list[tuple[str, int]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise InvalidInput(f"line {lineno}: expected key = value, got {stripped!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key == "sweep":
            sweep_raw.append((value, lineno))
        elif key in ("model_kind", "trials", "seed", "output_path"):
            if key in scalars:
                raise InvalidInput(f"line {lineno}: duplicate key {key!r}")
            scalars[key] = value
        else:
            raise InvalidInput(f"line {lineno}: unknown key {key!r}")

    for required in ("model_kind", "trials", "seed", "output_path"):
        if required not in scalars:
            raise InvalidInput(f"config is missing required key {required!r}")
    kind = scalars["model_kind"]
    if kind not in MODEL_KINDS:
        raise InvalidInput(f"model_kind must be one of {MODEL_KINDS}, got {kind!r}")
    trials = _parse_scalar("trials", scalars["trials"], int, 0)
    seed = _parse_scalar("seed", scalars["seed"], int, 0)
    if trials < 1:
        raise InvalidInput(f"trials must be >= 1, got {trials}")
    if seed < 0:
        raise InvalidInput(f"seed must be >= 0, got {seed}")
    if not sweep_raw:
        raise InvalidInput("config needs at least one sweep line")
    sweep = tuple(_parse_sweep_line(raw, kind, lineno) for raw, lineno in sweep_raw)
    config = ExperimentConfig(
        model_kind=kind,
        sweep=sweep,
        trials=trials,
        seed=seed,
        output_path=scalars["output_path"],
    )
    # Fail fast: every instance must produce a valid model before any trial.
    for j, inst in enumerate(sweep):
        build_model(kind, inst)
        if not 1 <= inst.l <= inst.r:
            raise InvalidInput(f"sweep instance {j}: l={inst.l} outside 1..{inst.r}")
    return config


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise IoError(path, exc.strerror or str(exc)) from exc
    return parse_config(text)


def build_model(kind: str, inst: InstanceSpec):
    """Instantiate the planted model for a sweep point (canonical frame:
    spikes on the leading standard basis directions)."""
    if kind == "denoise":
        if inst.sigma is None or inst.p is not None or inst.sigma2 is not None:
            raise InvalidInput("denoise instances need sigma= and take no p=/sigma2=")
        return GroundTruthDenoising.canonical(inst.n, inst.lambdas, inst.sigma)
    if kind == "pca":
        if inst.sigma2 is None or inst.p is None or inst.sigma is not None:
            raise InvalidInput("pca instances need p= and sigma2= and take no sigma=")
        return SpikedModel.canonical(inst.p, inst.n, inst.lambdas, inst.sigma2)
    raise InvalidInput(f"model_kind must be one of {MODEL_KINDS}, got {kind!r}")


# ---------------------------------------------------------------------------
# Direction vectors
# ---------------------------------------------------------------------------


def _validate_direction_mode(mode: str) -> None:
    head = mode.split(":", 1)[0]
    if head not in DIRECTION_MODES:
        raise InvalidInput(f"unknown direction mode {mode!r}")
    if head in ("basis", "mix") and ":" not in mode:
        raise InvalidInput(f"direction mode {mode!r} needs a parameter, e.g. {head}:1")
    if head in ("aligned", "random_unit") and ":" in mode:
        raise InvalidInput(f"direction mode {head!r} takes no parameter")


def resolve_direction(mode: str, model, l: int, rng: np.random.Generator) -> np.ndarray:
    """Build the probe direction ``a`` for one instance.

    ``mix:w`` yields exactly overlap w with the target spike and sqrt(1-w^2)
    along a random unit direction orthogonal to it.
    """
    _validate_direction_mode(mode)
    dim = model.U_star.shape[0]
    u_star = model.spike_vector(l)
    head, _, arg = mode.partition(":")
    if head == "aligned":
        return u_star.copy()
    if head == "basis":
        idx = _parse_scalar("basis index", arg, int, 0)
        if not 1 <= idx <= dim:
            raise InvalidInput(f"basis index {idx} outside 1..{dim}")
        out = np.zeros(dim)
        out[idx - 1] = 1.0
        return out
    if head == "random_unit":
        v = rng.standard_normal(dim)
        return v / np.linalg.norm(v)
    weight = _parse_scalar("mix weight", arg, float, 0)
    if not -1.0 <= weight <= 1.0:
        raise InvalidInput(f"mix weight must lie in [-1, 1], got {weight}")
    v = rng.standard_normal(dim)
    v -= u_star * float(u_star @ v)
    norm = float(np.linalg.norm(v))
    if norm < 1e-12:
        raise NumericalFailure("random orthogonal direction degenerated")
    return weight * u_star + math.sqrt(1.0 - weight**2) * (v / norm)


# ---------------------------------------------------------------------------
# Trial execution
# ---------------------------------------------------------------------------


def _run_single(task):
    """Execute one (instance, trial) cell.  Top-level so it pickles.

    Returns ("ok", j, TrialRecord, wall_ms) or ("err", j, message).
    """
    kind, model, a, l, instance_id, entropy, j, t = task
    seed = np.random.SeedSequence(entropy=entropy, spawn_key=(_KEY_TRIAL, j, t))
    start = time.perf_counter()
    try:
        if kind == "denoise":
            m = observe(model, seed)
            spec = eigendecompose(m, Ordering.BY_MAGNITUDE_DESC)
            correction = debias_factor_md(spec, l, model.r, model.sigma)
            lam_l = spec.eigenvalue(l)
            plugin = float(a @ spec.eigenvector(l))
            # Oracle eigenvalue correction.  The canonical frame makes the
            # complement compression a plain principal submatrix of the noise.
            noise = m.entries - model.low_rank_matrix()
            mu = np.linalg.eigvalsh((noise[model.r :, model.r :]))
            gamma = model.sigma**2 * float(np.sum(1.0 / (lam_l - mu)))
            lambda_corrected = lam_l - gamma
        else:
            s = sample(model, seed)
            spec = eigendecompose(sample_covariance(s), Ordering.BY_VALUE_DESC)
            correction, _branch = debias_factor_pca(spec, l, model.r, model.n, model.sigma2)
            lam_l = spec.eigenvalue(l)
            plugin = float(a @ spec.eigenvector(l))
            lambda_corrected = shrink_eigenvalue(spec, l, model.r, model.n)
        truth = float(a @ model.spike_vector(l))
        factor = math.sqrt(1.0 + correction)
        record = TrialRecord(
            instance=instance_id,
            trial=t,
            dist_plugin=dist(plugin, truth),
            dist_debiased=dist(factor * plugin, truth),
            correction=correction,
            lambda_l=lam_l,
            lambda_corrected=lambda_corrected,
            wall_ms=0,
        )
    except (InvalidInput, NumericalFailure) as exc:
        return ("err", j, f"{type(exc).__name__}: {exc}")
    wall_ms = (time.perf_counter() - start) * 1000.0
    return ("ok", j, record, wall_ms)


def _instance_ids(config: ExperimentConfig) -> list[str]:
    """Default instance labels: the sample count, suffixed on collision."""
    counts: dict[int, int] = {}
    for inst in config.sweep:
        counts[inst.n] = counts.get(inst.n, 0) + 1
    ids = []
    for j, inst in enumerate(config.sweep):
        ids.append(str(inst.n) if counts[inst.n] == 1 else f"{inst.n}#{j + 1}")
    return ids


def run_experiment(config: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    """Run the full sweep and write the results CSV to
    ``config.output_path``.

    An instance that fails mid-run is dropped from the records (its error
    lands in the summary row); the other instances still complete.  Output
    bytes do not depend on ``workers``.
    """
    if workers < 1:
        raise InvalidInput(f"workers must be >= 1, got {workers}")
    models = [build_model(config.model_kind, inst) for inst in config.sweep]
    for j, (inst, model) in enumerate(zip(config.sweep, models)):
        if not 1 <= inst.l <= inst.r:
            raise InvalidInput(f"sweep instance {j}: l={inst.l} outside 1..{inst.r}")
    ids = _instance_ids(config)
    directions = []
    for j, (inst, model) in enumerate(zip(config.sweep, models)):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=config.seed, spawn_key=(_KEY_DIRECTION, j))
        )
        directions.append(resolve_direction(inst.a_mode, model, inst.l, rng))

    tasks = [
        (
            config.model_kind,
            models[j],
            directions[j],
            config.sweep[j].l,
            ids[j],
            config.seed,
            j,
            t,
        )
        for j in range(len(config.sweep))
        for t in range(config.trials)
    ]

    if workers == 1:
        outcomes = [_run_single(task) for task in tasks]
    else:
        chunk = max(1, len(tasks) // (workers * 4))
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_single, tasks, chunksize=chunk))

    errors: dict[int, str] = {}
    per_instance: dict[int, list[tuple[TrialRecord, float]]] = {
        j: [] for j in range(len(config.sweep))
    }
    for outcome in outcomes:
        if outcome[0] == "err":
            _, j, message = outcome
            errors.setdefault(j, message)
        else:
            _, j, record, wall = outcome
            per_instance[j].append((record, wall))

    records: list[TrialRecord] = []
    summaries: list[SummaryRow] = []
    for j, inst in enumerate(config.sweep):
        if j in errors:
            summaries.append(
                SummaryRow(
                    instance=ids[j],
                    n=inst.n,
                    trials=0,
                    median_plugin=math.nan,
                    iqr_plugin=math.nan,
                    median_debiased=math.nan,
                    iqr_debiased=math.nan,
                    mean_correction=math.nan,
                    mean_trial_ms=math.nan,
                    error=errors[j],
                )
            )
            continue
        rows = [rec for rec, _ in per_instance[j]]
        walls = np.array([wall for _, wall in per_instance[j]])
        plugin = np.array([rec.dist_plugin for rec in rows])
        debiased = np.array([rec.dist_debiased for rec in rows])
        q25p, q75p = np.percentile(plugin, [25.0, 75.0])
        q25d, q75d = np.percentile(debiased, [25.0, 75.0])
        summaries.append(
            SummaryRow(
                instance=ids[j],
                n=inst.n,
                trials=len(rows),
                median_plugin=float(np.median(plugin)),
                iqr_plugin=float(q75p - q25p),
                median_debiased=float(np.median(debiased)),
                iqr_debiased=float(q75d - q25d),
                mean_correction=float(np.mean([rec.correction for rec in rows])),
                mean_trial_ms=float(np.mean(walls)),
            )
        )
        records.extend(rows)

    result = ExperimentResult(
        config=config, records=tuple(records), summaries=tuple(summaries)
    )
    if config.output_path:
        write_records(config.output_path, result.records)
    return result


# ---------------------------------------------------------------------------
# Results CSV
# ---------------------------------------------------------------------------


def write_records(path, records) -> None:
    """Write the pinned schema; field order and float formatting are part
    of the byte-level reproducibility contract."""
    lines = [",".join(RESULTS_HEADER)]
    for rec in records:
        if "," in rec.instance or "\n" in rec.instance:
            raise InvalidInput(f"instance id {rec.instance!r} contains a delimiter")
        lines.append(
            ",".join(
                (
                    rec.instance,
                    str(int(rec.trial)),
                    format_float(rec.dist_plugin),
                    format_float(rec.dist_debiased),
                    format_float(rec.correction),
                    format_float(rec.lambda_l),
                    format_float(rec.lambda_corrected),
                    str(int(rec.wall_ms)),
                )
            )
        )
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoError(path, exc.strerror or str(exc)) from exc


def read_records(path) -> tuple[TrialRecord, ...]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise IoError(path, exc.strerror or str(exc)) from exc
    except UnicodeDecodeError as exc:
        raise IoError(path, f"not valid UTF-8: {exc}") from exc
    if not lines or lines[0] != ",".join(RESULTS_HEADER):
        raise IoError(path, "missing or malformed results header")
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != len(RESULTS_HEADER):
            raise IoError(path, f"line {lineno}: expected {len(RESULTS_HEADER)} fields")
        try:
            records.append(
                TrialRecord(
                    instance=parts[0],
                    trial=int(parts[1]),
                    dist_plugin=float(parts[2]),
                    dist_debiased=float(parts[3]),
                    correction=float(parts[4]),
                    lambda_l=float(parts[5]),
                    lambda_corrected=float(parts[6]),
                    wall_ms=int(parts[7]),
                )
            )
        except ValueError as exc:
            raise IoError(path, f"line {lineno}: {exc}") from exc
    return tuple(records)


# ---------------------------------------------------------------------------
# Scaling fit
# ---------------------------------------------------------------------------


def slope_loglog(ns, medians) -> float:
    """Least-squares slope of log(median) against log(n)."""
    x = np.log(np.asarray(ns, dtype=float))
    y = np.log(np.asarray(medians, dtype=float))
    xc = x - x.mean()
    yc = y - y.mean()
    return float((xc @ yc) / (xc @ xc))


def fit_error_slope(summaries, field: str = "median_debiased") -> float:
    """Fit the error-vs-n scaling exponent from summary rows.

    Needs at least 3 distinct n values; all medians must be positive
    (a zero median has no log, and signals a degenerate instance anyway).
    """
    rows = [row for row in summaries if row.error is None]
    ns = [row.n for row in rows]
    meds = [getattr(row, field) for row in rows]
    if len(set(ns)) < 3:
        raise InvalidInput(f"need at least 3 distinct n values, got {sorted(set(ns))}")
    if any(not m > 0.0 for m in meds):
        raise InvalidInput("all medians must be positive to fit a log-log slope")
    return slope_loglog(ns, meds)
