"""Command-line front door: generate data, run pipelines, sweep, serve.

Exit codes: 0 success, 2 invalid synthetic spec, 3 budget-infeasible config
(total budget below the initial labeled count), 1 any other error. Reports
are written atomically (write to a temp file, then rename).
"""

from __future__ import annotations

import csv
import io
import json
import os
import sys
from pathlib import Path

import click

from .config import RunConfig
from .discovery import run_mnid
from .errors import BudgetExhausted, InvalidSpec, MnidError
from .evaluation import report_csv_rows, report_json
from .ingest import (
    SyntheticSpec,
    generate_synthetic,
    load_corpus,
    load_embeddings,
    write_corpus,
    write_embeddings,
)

EXIT_INVALID_SPEC = 2
EXIT_BUDGET_INFEASIBLE = 3


def _fail(message: str, code: int) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _write_atomic(path: Path, content: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(content, encoding="utf-8")
    os.replace(tmp, path)


@click.group()
def main() -> None:
    """Budgeted novel-intent discovery over fixed embeddings."""


@main.command("gen-synth")
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
def cmd_gen_synth(spec_path: str, out_dir: str) -> None:
    """Generate a synthetic corpus + embeddings into OUT/."""
    try:
        with open(spec_path, "r", encoding="utf-8") as handle:
            spec = SyntheticSpec.from_dict(json.load(handle))
        corpus, matrix = generate_synthetic(spec)
    except (InvalidSpec, json.JSONDecodeError, OSError) as exc:
        _fail(str(exc), EXIT_INVALID_SPEC)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_corpus(out / "corpus.jsonl", corpus)
    write_embeddings(out / "embeddings.bin", matrix.values)
    known = len(corpus.vocabulary.known_at_start)
    click.echo(
        f"wrote {len(corpus)} records ({len(corpus.vocabulary)} classes, "
        f"{known} known at start) to {out}/corpus.jsonl and {out}/embeddings.bin"
    )


def _load_inputs(config_path: str, corpus_path: str, embeddings_path: str):
    cfg = RunConfig.from_file(config_path)
    corpus = load_corpus(corpus_path)
    matrix = load_embeddings(embeddings_path, corpus, normalize=False)
    return cfg, corpus, matrix


@main.command("run")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--embeddings", "embeddings_path", required=True, type=click.Path(exists=True))
@click.option("--report", "report_path", required=True, type=click.Path())
@click.option(
    "--baseline",
    type=click.Choice(["gold-few", "random-few"]),
    default=None,
    help="Override the config's baseline selector.",
)
def cmd_run(
    config_path: str,
    corpus_path: str,
    embeddings_path: str,
    report_path: str,
    baseline: str | None,
) -> None:
    """Run the pipeline (or a baseline) and write the JSON report."""
    try:
        cfg, corpus, matrix = _load_inputs(config_path, corpus_path, embeddings_path)
        if baseline is not None:
            cfg.baseline = baseline.replace("-", "_")
        if cfg.oracle_backend != "simulated-gold":
            _fail("live-queue runs are hosted by `mnid serve`", 1)
        report = run_mnid(corpus, matrix, cfg)
    except BudgetExhausted as exc:
        _fail(str(exc), EXIT_BUDGET_INFEASIBLE)
    except (MnidError, ValueError, OSError) as exc:
        _fail(f"{type(exc).__name__}: {exc}", 1)
    _write_atomic(Path(report_path), report_json(report))
    csv_path = Path(report_path).with_suffix(Path(report_path).suffix + ".csv")
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(["metric", "value"])
    writer.writerows(report_csv_rows(report))
    _write_atomic(csv_path, buffer.getvalue())
    m = report.metrics or {}
    click.echo(
        f"run complete: discovered {report.discovery['found']}/"
        f"{report.discovery['total_unknown']} new classes, "
        f"accuracy {m.get('accuracy', float('nan')):.4f}, "
        f"spent {report.budget['spent']}/{report.budget['total']}"
    )


def _parse_variant_tokens(spec: str) -> list[dict]:
    """Sweep tokens: integers, ranges (1..9), baselines, and pNqM pairs."""
    jobs: list[dict] = []
    for token in spec.split(","):
        token = token.strip()
        if not token:
            continue
        if token in ("gold-few", "random-few"):
            jobs.append({"label": token, "baseline": token.replace("-", "_")})
        elif ".." in token:
            lo, hi = token.split("..", 1)
            for v in range(int(lo), int(hi) + 1):
                jobs.append({"label": str(v), "variant": v})
        elif token.startswith("p") and "q" in token:
            p_part, q_part = token[1:].split("q", 1)
            jobs.append({"label": token, "p": int(p_part), "q": int(q_part)})
        else:
            jobs.append({"label": token, "variant": int(token)})
    if not jobs:
        raise ValueError("no variant tokens given")
    return jobs


_SWEEP_COLUMNS = [
    "label",
    "seed",
    "variant",
    "p",
    "q",
    "status",
    "accuracy",
    "macro_f1",
    "discovered",
    "total_unknown",
    "discovery_rate",
    "budget_total",
    "gold_spent",
    "silver_count",
    "silver_precision",
    "message",
]


@main.command("sweep")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option(
    "--variants",
    required=True,
    help="Comma list of variants (3), ranges (1..9), baselines "
    "(gold-few, random-few) or probe sizes (p3q2).",
)
@click.option("--seeds", required=True, type=int, help="Number of consecutive seeds.")
@click.option("--out", "out_path", required=True, type=click.Path())
def cmd_sweep(config_path: str, variants: str, seeds: int, out_path: str) -> None:
    """Run a variant/seed grid; one CSV row per run, failures included."""
    try:
        data = json.loads(Path(config_path).read_text())
        settings = {k: v for k, v in data.items() if k != "data"}
        base = RunConfig.from_dict(settings)
        jobs = _parse_variant_tokens(variants)
        if seeds < 1:
            raise ValueError("--seeds must be >= 1")
        corpus_file = data["data"]["corpus"]
        embeddings_file = data["data"]["embeddings"]
    except (KeyError, TypeError):
        _fail('sweep config needs a "data": {"corpus": ..., "embeddings": ...} block', 1)
    except (MnidError, ValueError, json.JSONDecodeError) as exc:
        _fail(str(exc), 1)
    corpus = load_corpus(corpus_file)
    matrix = load_embeddings(embeddings_file, corpus, normalize=False)

    rows = []
    for job in jobs:
        for offset in range(seeds):
            cfg = RunConfig.from_dict(settings)
            cfg.seed = base.seed + offset
            if "variant" in job:
                cfg.variant = job["variant"]
            if "baseline" in job:
                cfg.baseline = job["baseline"]
            if "p" in job:
                cfg.p, cfg.q = job["p"], job["q"]
            row = {
                "label": job["label"],
                "seed": cfg.seed,
                "variant": cfg.variant,
                "p": cfg.p,
                "q": cfg.q,
            }
            try:
                cfg.validate()
                report = run_mnid(corpus, matrix, cfg)
                m = report.metrics or {}
                silver = report.silver or {}
                row.update(
                    status="ok",
                    accuracy=m.get("accuracy"),
                    macro_f1=m.get("macro_f1"),
                    discovered=report.discovery["found"],
                    total_unknown=report.discovery["total_unknown"],
                    discovery_rate=report.discovery["rate"],
                    budget_total=report.budget["total"],
                    gold_spent=report.budget["spent"],
                    silver_count=silver.get("count", 0),
                    silver_precision=silver.get("precision"),
                    message="",
                )
            except (MnidError, ValueError) as exc:
                row.update(status="error", message=f"{type(exc).__name__}: {exc}")
            rows.append(row)

    with open(out_path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=_SWEEP_COLUMNS, restval="")
        writer.writeheader()
        writer.writerows(rows)
    click.echo(f"wrote {len(rows)} rows to {out_path}")


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8400, show_default=True, type=int)
def cmd_serve(host: str, port: int) -> None:
    """Host the live annotation service (and console, if built)."""
    import uvicorn

    from .service import create_app

    console = Path("frontend/dist")
    static_dir = console if (console / "index.html").is_file() else None
    if static_dir is not None:
        click.echo(f"serving console from {static_dir.resolve()}")
    uvicorn.run(create_app(static_dir=static_dir), host=host, port=port, log_level="info")


if __name__ == "__main__":
    main()
