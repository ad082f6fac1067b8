"""Command-line entry points; each subcommand wraps one library operation.

Exit codes: 0 success, 1 validation error (malformed input, bad flags),
2 internal error.
"""

from __future__ import annotations

import json
import sys

import click
import numpy as np

from . import __version__
from .decompose import (
    BatemanParams,
    DecomposeConfig,
    cda,
    dda,
    decomposition_to_json,
    discrete_decomposition_to_json,
)
from .errors import HydramonError
from .features import (
    FeaturizeConfig,
    dataset_from_csv,
    dataset_to_csv,
    featurize_session,
    manifest_to_json,
)
from .learn import ModelSpec, cross_validate, load_model, render_report, save_model
from .preprocess import PreprocessConfig, preprocess_pipeline
from .signal_core import (
    SessionRecording,
    load_annotations,
    parse_e4_csv,
    serialize_e4_csv,
)
from .stream import StdoutSink, StreamConfig, replay

EXIT_VALIDATION = 1
EXIT_INTERNAL = 2


def _fail(message: str, code: int = EXIT_VALIDATION):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _run(fn):
    try:
        fn()
    except HydramonError as exc:
        _fail(str(exc))
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        _fail(str(exc))
    except Exception as exc:  # anything else is an internal error
        _fail(f"internal: {exc}", EXIT_INTERNAL)


def _load_recording(session_path: str, annotations_path: str | None
                    ) -> SessionRecording:
    with open(session_path) as fh:
        series = parse_e4_csv(fh.read())
    rec = SessionRecording(session_path, "cli", series)
    if annotations_path:
        with open(annotations_path) as fh:
            track, spans = load_annotations(fh.read())
        rec = SessionRecording(session_path, "cli", series,
                               artifact_spans=tuple(spans), annotations=track)
    return rec


def _parse_tau(text: str) -> BatemanParams:
    parts = text.split(",")
    if len(parts) != 2:
        raise HydramonError("--tau must be 'rise,decay'")
    return BatemanParams(float(parts[0]), float(parts[1]))


@click.group()
@click.version_option(__version__)
def main():
    """Hydration monitoring toolkit."""


@main.command()
@click.option("--csv", "csv_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
def ingest(csv_path, out):
    """Validate a wristband CSV export and normalize it."""
    def go():
        with open(csv_path) as fh:
            series = parse_e4_csv(fh.read())
        with open(out, "w") as fh:
            fh.write(serialize_e4_csv(series))
        click.echo(f"{len(series)} samples at {series.rate} Hz", err=True)
    _run(go)


@main.command("annotate-validate")
@click.option("--annotations", "ann_path", required=True,
              type=click.Path(exists=True))
def annotate_validate(ann_path):
    """Check an annotation document against the schema."""
    def go():
        with open(ann_path) as fh:
            track, spans = load_annotations(fh.read())
        click.echo(f"valid: {len(track.transitions)} transitions, "
                   f"{len(spans)} artifact spans", err=True)
    _run(go)


@main.command()
@click.option("--session", "session_path", required=True,
              type=click.Path(exists=True))
@click.option("--annotations", "ann_path", type=click.Path(exists=True))
@click.option("--cutoff", default=1.0, show_default=True)
@click.option("--order", default=1, show_default=True)
@click.option("--width", default=4, show_default=True)
@click.option("--out", required=True, type=click.Path())
def preprocess(session_path, ann_path, cutoff, order, width, out):
    """Artifact correction, low-pass filter, and smoothing."""
    def go():
        rec = _load_recording(session_path, ann_path)
        config = PreprocessConfig(cutoff_hz=cutoff, filter_order=order,
                                  hanning_width=width)
        series = preprocess_pipeline(rec, config)
        with open(out, "w") as fh:
            fh.write(serialize_e4_csv(series))
    _run(go)


@main.command()
@click.option("--session", "session_path", required=True,
              type=click.Path(exists=True))
@click.option("--annotations", "ann_path", type=click.Path(exists=True))
@click.option("--method", type=click.Choice(["cda", "dda"]), default="cda",
              show_default=True)
@click.option("--tau", default="0.75,2.0", show_default=True)
@click.option("--out", required=True, type=click.Path())
def decompose(session_path, ann_path, method, tau, out):
    """Tonic/phasic decomposition preview as JSON."""
    def go():
        rec = _load_recording(session_path, ann_path)
        series = preprocess_pipeline(rec)
        params = _parse_tau(tau)
        if method == "cda":
            doc = decomposition_to_json(cda(series, params))
        else:
            doc = discrete_decomposition_to_json(dda(series, params))
        with open(out, "w") as fh:
            json.dump(doc, fh)
    _run(go)


@main.command()
@click.option("--session", "session_path", required=True,
              type=click.Path(exists=True))
@click.option("--annotations", "ann_path", required=True,
              type=click.Path(exists=True))
@click.option("--tau", default="0.75,2.0", show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--manifest", "manifest_path", type=click.Path())
def featurize(session_path, ann_path, tau, out, manifest_path):
    """Windowed 36-feature dataset CSV (plus optional manifest)."""
    def go():
        rec = _load_recording(session_path, ann_path)
        series = preprocess_pipeline(rec)
        prepped = SessionRecording(rec.id, rec.subject, series,
                                   artifact_spans=rec.artifact_spans,
                                   annotations=rec.annotations)
        config = FeaturizeConfig(params=_parse_tau(tau))
        dataset = featurize_session(prepped, config)
        with open(out, "w") as fh:
            fh.write(dataset_to_csv(dataset))
        if manifest_path:
            with open(manifest_path, "w") as fh:
                fh.write(manifest_to_json(config))
        click.echo(f"{len(dataset)} rows", err=True)
    _run(go)


@main.command()
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--model", "kind", type=click.Choice(["tree", "forest", "nbayes"]),
              default="tree", show_default=True)
@click.option("--out", required=True, type=click.Path())
def train(data_path, kind, out):
    """Train one classifier on a dataset CSV."""
    def go():
        with open(data_path) as fh:
            data = dataset_from_csv(fh.read())
        model = ModelSpec(kind=kind).train(data)
        save_model(model, out)
        click.echo(f"trained {kind} on {len(data)} rows", err=True)
    _run(go)


@main.command()
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--model", "kinds", multiple=True,
              type=click.Choice(["tree", "forest", "nbayes"]))
@click.option("--k", default=10, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", type=click.Path())
def evaluate(data_path, kinds, k, seed, out):
    """Stratified k-fold comparison table (and report JSON via --out)."""
    def go():
        with open(data_path) as fh:
            data = dataset_from_csv(fh.read())
        selected = list(kinds) or ["tree", "forest", "nbayes"]
        reports = {kind: cross_validate(data, ModelSpec(kind=kind), k=k,
                                        seed=seed)
                   for kind in selected}
        click.echo(render_report(reports), nl=False)
        if out:
            with open(out, "w") as fh:
                json.dump({kind: rep.to_json() for kind, rep in reports.items()},
                          fh, indent=2)
    _run(go)


@main.command()
@click.option("--session", "session_path", required=True,
              type=click.Path(exists=True))
@click.option("--annotations", "ann_path", type=click.Path(exists=True))
@click.option("--model", "model_path", required=True,
              type=click.Path(exists=True))
@click.option("--speed", default="inf", show_default=True)
@click.option("--debounce", default=3, show_default=True)
def simulate(session_path, ann_path, model_path, speed, debounce):
    """Replay a session through the live engine; events as JSON lines."""
    def go():
        rec = _load_recording(session_path, ann_path)
        model = load_model(model_path)
        config = StreamConfig(rate=rec.series.rate, debounce_n=debounce)
        summary = replay(rec, model, config, speed=float(speed),
                         sinks=[StdoutSink()])
        click.echo(f"{len(summary.predictions)} predictions, "
                   f"{len(summary.alerts)} alerts", err=True)
    _run(go)


@main.command()
@click.option("--data-dir", envvar="HYDRA_DATA_DIR", default=None)
@click.option("--bind", envvar="HYDRA_BIND_ADDR", default="127.0.0.1:8764",
              show_default=True)
def serve(data_dir, bind):
    """Run the local HTTP service."""
    def go():
        import uvicorn

        from .service import SessionStore, create_app

        host, _, port = bind.partition(":")
        app = create_app(SessionStore(data_dir))
        uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8764),
                    log_level="warning")
    _run(go)


if __name__ == "__main__":
    main()
