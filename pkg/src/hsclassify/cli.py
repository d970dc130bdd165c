"""Command-line surface: ingest, train, classify, eval, serve, plus
inspection helpers (``schedule validate``, ``model inspect``, ``kg export``).

A bundle is one directory that accumulates artifacts: ``ingest`` writes the
parsed schedule and cleaned dataset, ``train`` adds the engine files and the
manifest, and the remaining commands load from it.  Every failure exits
nonzero with one structured JSON line on stderr so scripts can branch on the
stable error code.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click
import uvicorn

from . import __version__
from .api import create_app
from .classify import SoftmaxModel, TrainConfig, model_from_parts
from .embed import EmbedderConfig
from .ensemble import (
    BundleFormatError,
    ClassificationRequest,
    EngineConfig,
    build_engine,
    evaluate,
    load_engine,
    save_engine,
)
from .ensemble import classify as run_classify
from .errors import HsClassifyError
from .kgraph import score, to_annotated_graph
from .nomenclature import HsCode, TariffSchedule, UnknownCodeError, load_schedule
from .preprocess import Dataset, Lexicon, load_records, prepare_dataset


def _structured_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except HsClassifyError as exc:
            click.echo(json.dumps({"error": exc.code, "detail": exc.detail}), err=True)
            sys.exit(1)
        except ValueError as exc:
            click.echo(json.dumps({"error": "BadRequest", "detail": str(exc)}), err=True)
            sys.exit(1)

    return wrapper


@click.group()
@click.version_option(__version__)
def main():
    """Hierarchical HS-code classification with knowledge-graph explanations."""


# ---------------------------------------------------------------------------
# ingest / train
# ---------------------------------------------------------------------------


@main.command()
@click.option("--schedule", "schedule_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Tariff schedule text or JSON.")
@click.option("--data", "data_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Training rows (CSV or JSON lines).")
@click.option("--out", "out_dir", required=True,
              type=click.Path(file_okay=False, path_type=Path),
              help="Bundle directory to create or update.")
@click.option("--delimiter", default=",", show_default=True)
@click.option("--abbrev", "abbrev_path", default=None,
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="JSON object mapping abbreviations to expansions.")
@_structured_errors
def ingest(schedule_path: Path, data_path: Path, out_dir: Path, delimiter: str,
           abbrev_path: Path | None):
    """Parse the schedule and preprocess training data into a bundle."""
    schedule = load_schedule(schedule_path.read_text(encoding="utf-8"))
    rows = load_records(data_path.read_text(encoding="utf-8"), delimiter=delimiter)
    abbreviations = None
    if abbrev_path is not None:
        abbreviations = json.loads(abbrev_path.read_text(encoding="utf-8"))
        if not isinstance(abbreviations, dict):
            raise ValueError(f"{abbrev_path} must hold a JSON object")
    dataset, lexicon = prepare_dataset(rows, abbreviations=abbreviations)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "schedule.json").write_text(schedule.to_json(), encoding="utf-8")
    (out_dir / "dataset.json").write_text(
        json.dumps(dataset.to_dict(), sort_keys=True), encoding="utf-8"
    )
    (out_dir / "lexicon.json").write_text(
        json.dumps(lexicon.to_dict(), sort_keys=True), encoding="utf-8"
    )
    click.echo(json.dumps({
        "records": len(dataset.records),
        "classes": len(dataset.class_stats),
        "out": str(out_dir),
    }))


def _read_ingested(bundle: Path) -> tuple[TariffSchedule, Dataset, Lexicon]:
    try:
        schedule = TariffSchedule.from_json((bundle / "schedule.json").read_text(encoding="utf-8"))
        dataset = Dataset.from_dict(json.loads((bundle / "dataset.json").read_text(encoding="utf-8")))
        lexicon = Lexicon.from_dict(json.loads((bundle / "lexicon.json").read_text(encoding="utf-8")))
    except FileNotFoundError as exc:
        raise BundleFormatError(f"{bundle} is not an ingested bundle: {exc.filename} missing") from None
    return schedule, dataset, lexicon


@main.command("train")
@click.option("--bundle", required=True,
              type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--mode", type=click.Choice(["per-branch", "conditional"]),
              default="per-branch", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@_structured_errors
def train_engine(bundle: Path, mode: str, seed: int):
    """Build every model from an ingested bundle and persist the engine."""
    schedule, dataset, lexicon = _read_ingested(bundle)
    config = EngineConfig(
        embedder=EmbedderConfig(seed=seed),
        train=TrainConfig(seed=seed),
        mode=mode.replace("-", "_"),
    )
    engine = build_engine(schedule, dataset, lexicon, config)
    manifest_path = save_engine(engine, bundle)
    click.echo(json.dumps({
        "fingerprint": engine.fingerprint,
        "manifest": str(manifest_path),
    }))


# ---------------------------------------------------------------------------
# classify / eval / serve
# ---------------------------------------------------------------------------


@main.command("classify")
@click.option("--bundle", required=True,
              type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--text", required=True, help="Free-text goods description.")
@click.option("--weight", type=float, default=None)
@click.option("--value", type=float, default=None)
@click.option("--top-k", type=int, default=3, show_default=True)
@click.option("--mode", type=click.Choice(["per-branch", "conditional"]), default=None,
              help="Override the trained composition mode.")
@click.option("--explain", type=click.Choice(["dot", "json"]), default=None,
              help="Also emit the knowledge-graph evidence.")
@_structured_errors
def classify_text(bundle: Path, text: str, weight: float | None, value: float | None,
                  top_k: int, mode: str | None, explain: str | None):
    """Print ranked candidate codes for one description."""
    engine = load_engine(bundle)
    request = ClassificationRequest(
        description=text,
        weight=weight,
        value=value,
        k=top_k,
        mode=mode.replace("-", "_") if mode else None,
    )
    candidates, trail = run_classify(request, engine)
    for candidate in candidates:
        click.echo(f"{candidate.rank}\t{candidate.code}\t{candidate.source}\t{candidate.score:.6f}")
    if explain == "json":
        click.echo(json.dumps(trail.to_dict(), indent=2, sort_keys=True))
    elif explain == "dot":
        query = engine.embedder.embed(trail.cleaned_text)
        for entry in trail.kg:
            graph = engine.graphs[entry["code"]]
            click.echo(to_annotated_graph(graph, score(query, graph)))


@main.command("eval")
@click.option("--bundle", required=True,
              type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--test", "test_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--delimiter", default=",", show_default=True)
@_structured_errors
def eval_engine(bundle: Path, test_path: Path, delimiter: str):
    """Score both pipelines on a labeled test file."""
    engine = load_engine(bundle)
    rows = load_records(test_path.read_text(encoding="utf-8"), delimiter=delimiter)
    report = evaluate(rows, engine)
    click.echo(f"rows: {report.rows} (skipped empty: {report.skipped_empty})")
    click.echo(f"{'metric':<14}{'hierarchical':>14}{'flat':>10}")
    hier, flat = report.hierarchical, report.flat

    def cell(value: float | None) -> str:
        return "-" if value is None else f"{value:.3f}"

    table = [
        ("accuracy@1", hier["accuracy_at_1"], flat["accuracy_at_1"]),
        ("accuracy@3", hier["accuracy_at_3"], flat["accuracy_at_3"]),
        ("coverage", hier["coverage"], flat["coverage"]),
        ("others-rate", None, flat["others_rate"]),
        ("hs2-accuracy", hier["hs2_accuracy"], None),
        ("hs4-accuracy", hier["hs4_accuracy"], None),
    ]
    for name, hier_value, flat_value in table:
        click.echo(f"{name:<14}{cell(hier_value):>14}{cell(flat_value):>10}")


# ---------------------------------------------------------------------------
# inspection helpers
# ---------------------------------------------------------------------------


@main.group()
def schedule():
    """Tariff schedule utilities."""


@schedule.command("validate")
@click.argument("path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@_structured_errors
def schedule_validate(path: Path):
    """Parse a schedule file; exit 0 if valid, 1 with the parse error."""
    parsed = load_schedule(path.read_text(encoding="utf-8"))
    click.echo(json.dumps({"roots": len(parsed.roots), "codes": len(parsed.index)}))


@main.group()
def model():
    """Trained model utilities."""


@model.command("inspect")
@click.argument("path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@_structured_errors
def model_inspect(path: Path):
    """Print shape and class list of one model file (the .json part)."""
    name = path.stem
    parts = {path.name: path.read_bytes()}
    weights_file = path.with_suffix(".weights")
    if weights_file.exists():
        parts[weights_file.name] = weights_file.read_bytes()
    loaded = model_from_parts(parts, name)
    info = {
        "name": name,
        "type": "softmax" if isinstance(loaded, SoftmaxModel) else "constant",
        "level": loaded.level,
        "parent": loaded.parent,
        "classes": list(loaded.classes),
    }
    if isinstance(loaded, SoftmaxModel):
        info["shape"] = list(loaded.weights.shape)
    click.echo(json.dumps(info, indent=2, sort_keys=True))


@main.group()
def kg():
    """Knowledge graph utilities."""


@kg.command("export")
@click.option("--bundle", required=True,
              type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--code", required=True, help="Six-digit subheading code.")
@click.option("--dot", "as_dot", is_flag=True, help="Emit DOT instead of JSON.")
@_structured_errors
def kg_export(bundle: Path, code: str, as_dot: bool):
    """Print one stored knowledge graph as JSON or annotated DOT."""
    engine = load_engine(bundle)
    digits = HsCode.parse(code).digits
    graph = engine.graphs.get(digits)
    if graph is None:
        raise UnknownCodeError(f"no knowledge graph for code {digits}")
    click.echo((to_annotated_graph(graph) if as_dot else graph.to_json()).rstrip("\n"))


@main.command()
@click.option("--bundle", required=True,
              type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--audit-log", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Audit trail JSON-lines file (defaults to <bundle>/audit.jsonl).")
@_structured_errors
def serve(bundle: Path, host: str, port: int, audit_log: Path | None):
    """Serve the HTTP API over a trained bundle."""
    app = create_app(bundle=bundle, audit_path=audit_log or bundle / "audit.jsonl")
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
