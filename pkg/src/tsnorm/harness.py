"""Leave-one-dataset-out benchmark protocol: pretrain per scheme, evaluate ZS/ID.

One variant = (model kind, scheme, withheld dataset).  The variant's model is
trained on every corpus dataset except the withheld one (train rows only,
dataset-level schemes pre-normalized offline with each dataset's own train
statistics), then scored zero-shot on the withheld dataset's test rows and
in-domain on every training dataset's test rows.  All data access runs through
auditable entry points so leakage assertions can be checked after the fact.
"""

from __future__ import annotations

import hashlib
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import (
    Dataset,
    EvalEntry,
    EvalReport,
    ForecastKind,
    Setting,
    ShapeMismatchError,
    TsnormError,
)
from .data import sample_instances
from .metrics import improvement, mase, naive_mae
from .models import (
    LinearForecaster,
    LossKind,
    Scheme,
    TrainTrace,
    forecast,
    token_point_forecast,
    train,
)
from .norm import denormalize, denormalize_gaussian, fit_dataset_stats, fit_inference_stats, normalize

SCHEME_ORDER = (
    Scheme.REVIN,
    Scheme.MEANABS,
    Scheme.HYBRID,
    Scheme.STANDARDIZATION,
    Scheme.MINMAX,
    Scheme.MAXABS,
    Scheme.RAW,
)

AVERAGE_ID = "average"


class InsufficientTestDataError(TsnormError):
    """A dataset's test rows cannot fit a single evaluation window."""


class EmptyInputError(TsnormError):
    """Report assembly requires at least one entry."""


class MissingDatasetError(TsnormError):
    """A plan references a dataset that was not supplied."""


class LeakageError(TsnormError):
    """An audited data access violated the protocol."""


_FREQ_RE = re.compile(r"^\s*(\d+)\s*(min|h|d)\s*$", re.IGNORECASE)


def horizon_for_frequency(frequency: str, span_hours: int = 24) -> int:
    """Prediction length covering a fixed wall-clock span at a given frequency.

    A 24-hour span gives 24 steps for "1h", 96 for "15min", 144 for "10min".
    """
    m = _FREQ_RE.match(frequency)
    if not m:
        raise TsnormError(f"cannot parse frequency {frequency!r} (use e.g. '1h', '15min')")
    n, unit = int(m.group(1)), m.group(2).lower()
    minutes = n * {"min": 1, "h": 60, "d": 1440}[unit]
    span = span_hours * 60
    if minutes <= 0 or span % minutes:
        raise TsnormError(
            f"frequency {frequency!r} does not divide a {span_hours}h span evenly"
        )
    return span // minutes


@dataclass
class AccessLog:
    """Append-only record of every audited dataset access.

    Events are (variant_key, kind, dataset, row_lo, row_hi) with kind one of
    "fit_stats" / "sample" (training side) or "evaluate".  Row bounds are
    half-open absolute dataset row indices.
    """

    events: list = field(default_factory=list)

    def record(self, variant: str, kind: str, dataset: str, lo: int, hi: int) -> None:
        self.events.append((variant, kind, dataset, int(lo), int(hi)))

    def extend(self, other: "AccessLog") -> None:
        self.events.extend(other.events)

    def verify(self, datasets: dict) -> None:
        """Raise LeakageError if any training-side access saw test rows or a
        withheld dataset (the variant key's last component) was touched outside
        its evaluation."""
        for variant, kind, name, lo, hi in self.events:
            withheld = variant.rsplit("|", 1)[-1]
            if kind != "evaluate":
                if name == withheld:
                    raise LeakageError(
                        f"variant {variant}: training-side access to withheld {name!r}"
                    )
                split = datasets[name].split_index
                if hi > split or lo < 0:
                    raise LeakageError(
                        f"variant {variant}: {kind} on {name!r} rows [{lo}, {hi}) "
                        f"crosses the split at {split}"
                    )


@dataclass(frozen=True)
class ExperimentPlan:
    """Full description of a benchmark run.

    ``horizons`` maps each corpus dataset to its evaluation prediction length
    (a consistent wall-clock span when frequencies differ); models are trained
    with the longest horizon and truncated per dataset at evaluation.
    ``naive_lag`` overrides the per-dataset seasonal period for the MASE
    denominator when set.
    """

    corpus: tuple
    schemes: tuple
    model_kinds: tuple
    context_len: int
    horizons: dict
    withheld: tuple
    steps: int
    lr: float
    seed: int
    instances_per_dataset: int = 256
    naive_lag: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "corpus", tuple(self.corpus))
        object.__setattr__(self, "schemes", tuple(self.schemes))
        object.__setattr__(self, "model_kinds", tuple(self.model_kinds))
        object.__setattr__(self, "withheld", tuple(self.withheld))
        if not self.corpus or not self.schemes or not self.model_kinds or not self.withheld:
            raise TsnormError("corpus, schemes, model_kinds, and withheld must be non-empty")
        for label, seq in (("corpus", self.corpus), ("withheld", self.withheld),
                           ("schemes", self.schemes), ("model_kinds", self.model_kinds)):
            if len(set(seq)) != len(seq):
                raise TsnormError(f"{label} contains duplicates")
        missing = [n for n in self.withheld if n not in self.corpus]
        if missing:
            raise MissingDatasetError(f"withheld {missing} not in corpus")
        if len(self.corpus) - 1 < 1:
            raise TsnormError("need at least two corpus datasets to withhold one")
        for name in self.corpus:
            if name not in self.horizons:
                raise TsnormError(f"no horizon configured for dataset {name!r}")
        if self.context_len < 1 or self.steps < 0 or self.instances_per_dataset < 1:
            raise TsnormError("context_len, steps, instances_per_dataset out of range")

    @property
    def train_horizon(self) -> int:
        return max(self.horizons[n] for n in self.corpus)

    def variants(self) -> list:
        """All (model_kind, scheme, withheld) runs, in canonical order."""
        return [
            (mk, sc, wh)
            for mk in self.model_kinds
            for sc in self.schemes
            for wh in self.withheld
        ]

    @classmethod
    def from_datasets(
        cls,
        datasets,
        schemes,
        model_kinds,
        context_len: int,
        withheld,
        steps: int,
        lr: float,
        seed: int,
        instances_per_dataset: int = 256,
        naive_lag: int | None = None,
        horizon_overrides: dict | None = None,
    ) -> "ExperimentPlan":
        overrides = horizon_overrides or {}
        horizons = {
            d.name: overrides.get(d.name, horizon_for_frequency(d.frequency))
            for d in datasets
        }
        return cls(
            corpus=tuple(d.name for d in datasets),
            schemes=tuple(schemes),
            model_kinds=tuple(model_kinds),
            context_len=context_len,
            horizons=horizons,
            withheld=tuple(withheld),
            steps=steps,
            lr=lr,
            seed=seed,
            instances_per_dataset=instances_per_dataset,
            naive_lag=naive_lag,
        )

    def validate_against(self, datasets: dict) -> list:
        """Collect every plan/data inconsistency (empty list when runnable)."""
        problems = []
        for name in self.corpus:
            if name not in datasets:
                problems.append(f"dataset {name!r} missing")
                continue
            d = datasets[name]
            h = self.horizons[name]
            lag = self.naive_lag or d.seasonal_period
            if self.context_len <= lag:
                problems.append(
                    f"{name}: context_len {self.context_len} must exceed naive lag {lag}"
                )
            if d.length - d.split_index < self.context_len + h:
                problems.append(
                    f"{name}: test rows {d.length - d.split_index} cannot fit one "
                    f"evaluation window of {self.context_len}+{h}"
                )
            if self.context_len + self.train_horizon > d.split_index:
                problems.append(
                    f"{name}: train rows {d.split_index} cannot fit one training "
                    f"window of {self.context_len}+{self.train_horizon}"
                )
        return problems


def variant_key(model_kind: LossKind, scheme: Scheme, withheld: str) -> str:
    return f"{model_kind.value}|{scheme.value}|{withheld}"


def variant_seed(plan_seed: int, model_kind: LossKind, scheme: Scheme, withheld: str) -> int:
    """Order-independent per-variant seed, stable across processes and runs."""
    key = f"{plan_seed}|{variant_key(model_kind, scheme, withheld)}"
    digest = hashlib.sha256(key.encode()).digest()
    return int.from_bytes(digest[:8], "big")


def evaluate(
    model: LinearForecaster,
    scheme: Scheme,
    dataset: Dataset,
    context_len: int,
    horizon: int,
    naive_lag: int | None = None,
    audit: AccessLog | None = None,
    variant: str = "",
) -> list:
    """Score non-overlapping windows over a dataset's test rows.

    Windows start at offsets 0, H, 2H, ... into the test rows.  Per window the
    scheme's statistic family is fitted on the raw context, the context is
    normalized, the model forecast is de-normalized with the same statistics,
    and MASE is computed in raw scale against the context's naive MAE.
    Returns [(offset, mase), ...].
    """
    if horizon > model.horizon:
        raise ShapeMismatchError(
            f"dataset horizon {horizon} exceeds model horizon {model.horizon}"
        )
    test = dataset.test_values
    window = context_len + horizon
    if test.shape[0] < window:
        raise InsufficientTestDataError(
            f"{dataset.name}: {test.shape[0]} test rows < one window of {window}"
        )
    lag = naive_lag or dataset.seasonal_period
    scores = []
    for offset in range(0, test.shape[0] - window + 1, horizon):
        ctx = test[offset : offset + context_len]
        actual = test[offset + context_len : offset + window]
        if audit is not None:
            audit.record(
                variant,
                "evaluate",
                dataset.name,
                dataset.split_index + offset,
                dataset.split_index + offset + window,
            )
        stats = fit_inference_stats(ctx, scheme.inference_method)
        f = forecast(model, normalize(ctx, stats))
        if f.kind is ForecastKind.POINT:
            pred = denormalize(f.point[:horizon], stats)
        elif f.kind is ForecastKind.GAUSSIAN:
            pred = denormalize_gaussian(f, stats).gauss_mean[:horizon]
        else:
            pred = denormalize(token_point_forecast(f)[:horizon], stats)
        scores.append((offset, mase(pred, actual, naive_mae(ctx, lag))))
    return scores


def _prenormalize(d: Dataset, method, variant: str, audit: AccessLog | None) -> Dataset:
    """Replace a training dataset by its offline-normalized copy.

    Statistics come from the train rows only; the whole matrix is transformed
    so row indexing is unchanged (the transformed test rows are never read).
    """
    stats = fit_dataset_stats(d, method)
    if audit is not None:
        audit.record(variant, "fit_stats", d.name, 0, d.split_index)
    return Dataset(
        name=d.name,
        values=normalize(d.values, stats),
        frequency=d.frequency,
        seasonal_period=d.seasonal_period,
        split_index=d.split_index,
    )


def run_variant(
    plan: ExperimentPlan,
    datasets: dict,
    scheme: Scheme,
    model_kind: LossKind,
    withheld: str,
    audit: AccessLog | None = None,
) -> tuple[LinearForecaster, TrainTrace, list]:
    """Train one variant and produce its ZS and ID report entries."""
    if withheld not in plan.corpus:
        raise MissingDatasetError(f"withheld {withheld!r} not in plan corpus")
    for name in plan.corpus:
        if name not in datasets:
            raise MissingDatasetError(f"dataset {name!r} not supplied")
    variant = variant_key(model_kind, scheme, withheld)
    seed = variant_seed(plan.seed, model_kind, scheme, withheld)
    train_names = [n for n in plan.corpus if n != withheld]

    ds_method = scheme.dataset_method
    instances = []
    for i, name in enumerate(train_names):
        d = datasets[name]
        if ds_method is not None:
            d = _prenormalize(d, ds_method, variant, audit)
        drawn = sample_instances(
            d, plan.context_len, plan.train_horizon, plan.instances_per_dataset, seed + i
        )
        if audit is not None:
            span = plan.context_len + plan.train_horizon
            for inst in drawn:
                audit.record(variant, "sample", name, inst.origin[1], inst.origin[1] + span)
        instances.extend(drawn)

    model = LinearForecaster.create(
        model_kind, plan.context_len, plan.train_horizon, seed=seed
    )
    trained, trace = train(model, instances, scheme, plan.steps, plan.lr, seed)

    rows = []
    zs = evaluate(
        trained, scheme, datasets[withheld], plan.context_len,
        plan.horizons[withheld], plan.naive_lag, audit, variant,
    )
    rows.append(
        EvalEntry(
            model_id=model_kind.value,
            method=scheme.value,
            dataset=withheld,
            setting=Setting.ZS,
            mase=float(np.mean([s for _, s in zs])),
            withheld=withheld,
        )
    )
    for name in train_names:
        scores = evaluate(
            trained, scheme, datasets[name], plan.context_len,
            plan.horizons[name], plan.naive_lag, audit, variant,
        )
        rows.append(
            EvalEntry(
                model_id=model_kind.value,
                method=scheme.value,
                dataset=name,
                setting=Setting.ID,
                mase=float(np.mean([s for _, s in scores])),
                withheld=withheld,
            )
        )
    return trained, trace, rows


def assemble_report(rows) -> EvalReport:
    """Aggregate variant entries into per-(model, method, setting) statistics.

    ZS aggregates are mean +- std over the leave-one-out variants (one value
    per withheld dataset); ID values are first averaged over each variant's
    training datasets with equal weight, then aggregated the same way.  An
    ``average`` pseudo-model row holds the unweighted mean over models, and
    the improvement matrix is the percentage MASE drop between every ordered
    pair of methods on that row.
    """
    rows = list(rows)
    if not rows:
        raise EmptyInputError("no evaluation entries to aggregate")
    entries = tuple(
        sorted(rows, key=lambda e: (e.model_id, e.method, e.setting.value, e.dataset, e.withheld))
    )
    models = sorted({e.model_id for e in entries})
    methods = [s.value for s in SCHEME_ORDER if s.value in {e.method for e in entries}]

    aggregates = {}
    for model in models:
        for method in methods:
            for setting in (Setting.ZS, Setting.ID):
                sub = [
                    e for e in entries
                    if e.model_id == model and e.method == method and e.setting == setting
                ]
                if not sub:
                    continue
                variants = sorted({e.withheld for e in sub})
                per_variant = [
                    float(np.mean([e.mase for e in sub if e.withheld == w]))
                    for w in variants
                ]
                aggregates[(model, method, setting.value)] = (
                    float(np.mean(per_variant)),
                    float(np.std(per_variant)),
                )
    for method in methods:
        for setting in (Setting.ZS, Setting.ID):
            means = [
                aggregates[(m, method, setting.value)][0]
                for m in models
                if (m, method, setting.value) in aggregates
            ]
            if means:
                aggregates[(AVERAGE_ID, method, setting.value)] = (
                    float(np.mean(means)),
                    float(np.std(means)),
                )

    improvements = {}
    for setting in (Setting.ZS, Setting.ID):
        for ref in methods:
            key_r = (AVERAGE_ID, ref, setting.value)
            if key_r not in aggregates:
                continue
            for method in methods:
                key_m = (AVERAGE_ID, method, setting.value)
                if key_m not in aggregates:
                    continue
                improvements[(setting.value, ref, method)] = (
                    0.0
                    if ref == method
                    else improvement(aggregates[key_r][0], aggregates[key_m][0])
                )
    return EvalReport(entries=entries, aggregates=aggregates, improvements=improvements)


def _run_variant_worker(args):
    plan, datasets, scheme, model_kind, withheld = args
    audit = AccessLog()
    trained, trace, rows = run_variant(plan, datasets, scheme, model_kind, withheld, audit)
    return variant_key(model_kind, scheme, withheld), trained, trace, rows, audit


@dataclass
class PlanResult:
    report: EvalReport
    models: dict
    traces: dict
    audit: AccessLog


def run_plan(
    plan: ExperimentPlan,
    datasets: dict,
    jobs: int = 1,
    completed: dict | None = None,
    on_variant=None,
) -> PlanResult:
    """Execute every variant of a plan and assemble the report.

    ``completed`` maps variant keys to previously computed row lists; those
    variants are skipped (resume support).  With jobs > 1 variants run in
    parallel processes; results are collected and ordered deterministically,
    so the report is identical to a serial run.
    """
    problems = plan.validate_against(datasets)
    if problems:
        raise TsnormError("invalid plan: " + "; ".join(problems))
    completed = dict(completed or {})
    pending = [
        (mk, sc, wh)
        for mk, sc, wh in plan.variants()
        if variant_key(mk, sc, wh) not in completed
    ]
    models: dict = {}
    traces: dict = {}
    audit = AccessLog()
    results = []
    if jobs > 1 and len(pending) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            args = [(plan, datasets, sc, mk, wh) for mk, sc, wh in pending]
            results = list(pool.map(_run_variant_worker, args))
    else:
        for mk, sc, wh in pending:
            results.append(_run_variant_worker((plan, datasets, sc, mk, wh)))
    all_rows = []
    for key, rows in completed.items():
        all_rows.extend(rows)
    for key, trained, trace, rows, variant_audit in results:
        models[key] = trained
        traces[key] = trace
        audit.extend(variant_audit)
        all_rows.extend(rows)
        if on_variant is not None:
            on_variant(key, trained, trace, rows)
    audit.verify(datasets)
    return PlanResult(
        report=assemble_report(all_rows),
        models=models,
        traces=traces,
        audit=audit,
    )
