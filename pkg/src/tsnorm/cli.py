"""Command-line entry point: synthesize corpora, run benchmark plans, render reports.

Configuration is JSON (plans are unwieldy as flags); a handful of flags
override scalars.  Exit codes: 0 success, 2 validation error, 3 training
divergence, 4 I/O error.  The TSNORM_SEED environment variable overrides the
plan seed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

from . import __version__
from .core import Setting, TsnormError
from .data import SyntheticSpec, export_csv, generate_synthetic, load_csv
from .harness import (
    AVERAGE_ID,
    SCHEME_ORDER,
    ExperimentPlan,
    run_plan,
    variant_key,
    variant_seed,
)
from .core import EvalEntry
from .models import DivergedError, LossKind, Scheme

SCHEMA_VERSION = 1


class SchemaVersionMismatchError(TsnormError):
    """The report file was written by an incompatible schema version."""


def _read_json(path: Path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _prepare_out_dir(out: Path, force: bool) -> None:
    if out.exists() and any(out.iterdir()) and not force:
        raise TsnormError(f"output directory {out} is not empty (use --force)")
    out.mkdir(parents=True, exist_ok=True)


def cmd_synth(args) -> int:
    spec = SyntheticSpec.from_dict(_read_json(Path(args.spec))) if args.spec else SyntheticSpec()
    out = Path(args.out)
    _prepare_out_dir(out, args.force)
    datasets = generate_synthetic(spec)
    files = {}
    for d in datasets:
        filename = f"{d.name}.csv"
        export_csv(d, out / filename)
        files[d.name] = {
            "path": filename,
            "frequency": d.frequency,
            "seasonal_period": d.seasonal_period,
            "split_index": d.split_index,
        }
    _write_json(out / "manifest.json", {
        "kind": "synthetic-corpus",
        "spec": spec.to_dict(),
        "seed": spec.seed,
        "files": files,
        "version": __version__,
    })
    print(f"wrote {len(datasets)} datasets to {out}")
    return 0


def _load_plan_file(path: Path, seed_override: int | None):
    """Resolve a plan JSON file into (ExperimentPlan, datasets, raw dict)."""
    raw = _read_json(path)
    seed = seed_override if seed_override is not None else raw.get("seed", 0)
    raw["seed"] = seed
    if "synthetic" in raw:
        datasets = generate_synthetic(SyntheticSpec.from_dict(raw["synthetic"]))
    elif "datasets" in raw:
        datasets = []
        for entry in raw["datasets"]:
            csv_path = Path(entry["path"])
            if not csv_path.is_absolute():
                csv_path = path.parent / csv_path
            datasets.append(load_csv(
                csv_path,
                name=entry["name"],
                frequency=entry["frequency"],
                seasonal_period=entry["seasonal_period"],
                split_fraction=entry.get("split_fraction", 0.8),
                split_index=entry.get("split_index"),
            ))
    else:
        raise TsnormError("plan must declare either 'synthetic' or 'datasets'")
    plan = ExperimentPlan.from_datasets(
        datasets,
        schemes=[Scheme(s) for s in raw["schemes"]],
        model_kinds=[LossKind(m) for m in raw["models"]],
        context_len=raw.get("context_len", 96),
        withheld=raw["withheld"],
        steps=raw.get("steps", 3000),
        lr=raw.get("lr", 1e-4),
        seed=seed,
        instances_per_dataset=raw.get("instances_per_dataset", 256),
        naive_lag=raw.get("naive_lag"),
        horizon_overrides=raw.get("horizon_overrides"),
    )
    return plan, {d.name: d for d in datasets}, raw


def _plan_to_dict(plan: ExperimentPlan) -> dict:
    return {
        "corpus": list(plan.corpus),
        "schemes": [s.value for s in plan.schemes],
        "models": [m.value for m in plan.model_kinds],
        "context_len": plan.context_len,
        "horizons": dict(sorted(plan.horizons.items())),
        "withheld": list(plan.withheld),
        "steps": plan.steps,
        "lr": plan.lr,
        "seed": plan.seed,
        "instances_per_dataset": plan.instances_per_dataset,
        "naive_lag": plan.naive_lag,
    }


def _rows_to_json(entries) -> list:
    return [
        {
            "model": e.model_id,
            "method": e.method,
            "dataset": e.dataset,
            "setting": e.setting.value,
            "mase": e.mase,
            "withheld": e.withheld,
        }
        for e in entries
    ]


def _rows_from_json(rows) -> list:
    return [
        EvalEntry(
            model_id=r["model"],
            method=r["method"],
            dataset=r["dataset"],
            setting=Setting(r["setting"]),
            mase=r["mase"],
            withheld=r["withheld"],
        )
        for r in rows
    ]


def _report_to_json(report, plan: ExperimentPlan) -> dict:
    aggregates: dict = {}
    for (model, method, setting), (mean, std) in sorted(report.aggregates.items()):
        aggregates.setdefault(model, {}).setdefault(method, {})[setting] = {
            "mean": mean,
            "std": std,
        }
    improvements: dict = {}
    for (setting, ref, method), delta in sorted(report.improvements.items()):
        improvements.setdefault(setting, {}).setdefault(ref, {})[method] = delta
    return {
        "schema_version": SCHEMA_VERSION,
        "plan": _plan_to_dict(plan),
        "rows": _rows_to_json(report.entries),
        "aggregates": aggregates,
        "improvements": improvements,
        "metadata": {
            "id_weighting": "equal-per-dataset",
            "version": __version__,
        },
    }


def _variant_filename(key: str) -> str:
    return key.replace("|", "__") + ".json"


def cmd_run(args) -> int:
    seed_override = None
    env_seed = os.environ.get("TSNORM_SEED")
    if env_seed is not None:
        seed_override = int(env_seed)
    if args.seed is not None:
        seed_override = args.seed
    plan, datasets, _raw = _load_plan_file(Path(args.plan), seed_override)

    problems = plan.validate_against(datasets)
    if problems:
        for p in problems:
            print(f"plan error: {p}", file=sys.stderr)
        return 2

    if args.dry_run:
        print(f"{len(plan.variants())} runs:")
        for mk, sc, wh in plan.variants():
            print(f"  {variant_key(mk, sc, wh)}")
        return 0

    out = Path(args.out)
    variants_dir = out / "variants"
    checkpoints_dir = out / "checkpoints"
    traces_dir = out / "traces"
    for p in (out, variants_dir, checkpoints_dir, traces_dir):
        p.mkdir(parents=True, exist_ok=True)

    # resume: variants already persisted are not re-trained
    completed = {}
    for mk, sc, wh in plan.variants():
        key = variant_key(mk, sc, wh)
        path = variants_dir / _variant_filename(key)
        if path.exists():
            completed[key] = _rows_from_json(_read_json(path)["rows"])

    def collect(key, trained, trace, rows):
        _write_json(variants_dir / _variant_filename(key), {"rows": _rows_to_json(rows)})
        _write_json(checkpoints_dir / _variant_filename(key), trained.to_dict())
        trace.to_csv(traces_dir / (key.replace("|", "__") + ".csv"))

    result = run_plan(plan, datasets, jobs=args.jobs, completed=completed, on_variant=collect)

    _write_json(out / "report.json", _report_to_json(result.report, plan))
    _write_json(out / "manifest.json", {
        "kind": "benchmark-run",
        "plan": _plan_to_dict(plan),
        "variant_seeds": {
            variant_key(mk, sc, wh): variant_seed(plan.seed, mk, sc, wh)
            for mk, sc, wh in plan.variants()
        },
        "version": __version__,
    })
    skipped = len(completed)
    print(
        f"completed {len(plan.variants()) - skipped} runs"
        + (f" (resumed past {skipped})" if skipped else "")
        + f"; report at {out / 'report.json'}"
    )
    return 0


def _format_mase(mean: float, std: float) -> str:
    return f"{mean:.3f} ± {std:.3f}"


def _render_markdown(doc: dict) -> str:
    aggregates = doc["aggregates"]
    methods = [s.value for s in SCHEME_ORDER if any(s.value in by_m for by_m in aggregates.values())]
    non_raw = [m for m in methods if m != "raw"]
    columns = non_raw + (["raw"] if "raw" in methods else [])
    models = [m for m in sorted(aggregates) if m != AVERAGE_ID]
    if AVERAGE_ID in aggregates:
        models.append(AVERAGE_ID)

    lines = []
    header = ["model", "setting"] + non_raw
    if "raw" in methods:
        header += ["", "raw"]
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "---|" * len(header))
    for model in models:
        for setting in ("zs", "id"):
            cells = {}
            for method in columns:
                agg = aggregates.get(model, {}).get(method, {}).get(setting)
                if agg is not None:
                    cells[method] = agg
            if not cells:
                continue
            ranked = sorted(cells, key=lambda m: cells[m]["mean"])
            row = [model, setting.upper()]
            for method in non_raw:
                row.append(_mark(cells, ranked, method))
            if "raw" in methods:
                row += ["", _mark(cells, ranked, "raw")]
            lines.append("| " + " | ".join(row) + " |")

    improvements = doc.get("improvements") or {}
    for setting in ("zs", "id"):
        if setting not in improvements:
            continue
        lines.append("")
        lines.append(f"Improvement Δ(reference → method), {setting.upper()}, % MASE drop:")
        lines.append("")
        lines.append("| reference \\ method | " + " | ".join(columns) + " |")
        lines.append("|" + "---|" * (len(columns) + 1))
        for ref in columns:
            deltas = improvements[setting].get(ref, {})
            row = [ref] + [
                f"{deltas[m]:.1f}" if m in deltas else "" for m in columns
            ]
            lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"


def _mark(cells: dict, ranked: list, method: str) -> str:
    if method not in cells:
        return ""
    text = _format_mase(cells[method]["mean"], cells[method]["std"])
    if ranked and method == ranked[0]:
        return f"**{text}**"
    if len(ranked) > 1 and method == ranked[1]:
        return f"<u>{text}</u>"
    return text


def _render_csv(doc: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["model", "setting", "method", "mean", "std"])
    for model in sorted(doc["aggregates"]):
        by_method = doc["aggregates"][model]
        for method in sorted(by_method):
            for setting in sorted(by_method[method]):
                agg = by_method[method][setting]
                writer.writerow([model, setting, method, repr(agg["mean"]), repr(agg["std"])])
    return buf.getvalue()


def cmd_report(args) -> int:
    doc = _read_json(Path(args.infile))
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise SchemaVersionMismatchError(
            f"report schema {doc.get('schema_version')!r} != supported {SCHEMA_VERSION}"
        )
    rendered = _render_markdown(doc) if args.format == "md" else _render_csv(doc)
    if args.out:
        Path(args.out).write_text(rendered)
    else:
        sys.stdout.write(rendered)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tsnorm",
        description="Time-series normalization benchmark harness",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic corpus as CSV files")
    p_synth.add_argument("--spec", help="synthetic spec JSON (defaults built in)")
    p_synth.add_argument("--out", required=True, help="output directory")
    p_synth.add_argument("--force", action="store_true", help="allow non-empty --out")
    p_synth.set_defaults(func=cmd_synth)

    p_run = sub.add_parser("run", help="execute a benchmark plan")
    p_run.add_argument("--plan", required=True, help="plan JSON file")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--jobs", type=int, default=1, help="parallel variant processes")
    p_run.add_argument("--seed", type=int, default=None, help="override plan seed")
    p_run.add_argument("--dry-run", action="store_true", help="print the run matrix and exit")
    p_run.set_defaults(func=cmd_run)

    p_report = sub.add_parser("report", help="render a report.json")
    p_report.add_argument("--in", dest="infile", required=True, help="report.json path")
    p_report.add_argument("--format", choices=("md", "csv"), default="md")
    p_report.add_argument("--out", help="write to file instead of stdout")
    p_report.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (TsnormError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
