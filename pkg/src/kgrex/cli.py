"""Command-line pipeline: mine, select, explain, judge, evaluate, report, serve."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import pipeline
from .aggregate import AggregationError, aggregate_by_category, aggregate_phase1
from .gateway import Cassette, Gateway, GatewayError
from .mining import MinerConfig, MinerError, mine
from .prompts import PromptError, Strategy
from .records import (
    RecordError,
    read_annotations,
    read_explanations,
    read_judge_scores,
    write_explanations,
    write_judge_scores,
)
from .reports import (
    aggregate_rows_csv,
    aggregate_rows_markdown,
    correlations_csv,
    correlations_markdown,
)
from .rules import RuleParseError, read_rules_file, write_rules_file
from .store import StoreError, load_triples, load_type_catalog

_ERRORS = (
    StoreError,
    MinerError,
    RuleParseError,
    RecordError,
    GatewayError,
    PromptError,
    AggregationError,
    pipeline.PipelineError,
    ValueError,
    OSError,
)


def read_config(path: str) -> dict:
    """Key=value config lines; '#' starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise click.ClickException(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="Key=value config file; command flags override it.")
@click.pass_context
def main(ctx, config_path):
    """Mine Horn rules from triple dumps, explain them with LLM prompt
    strategies, and evaluate explanation quality."""
    if config_path:
        values = read_config(config_path)
        default_map = {}
        for cmd_name, cmd in main.commands.items():
            defaults = {}
            for param in cmd.params:
                for opt in getattr(param, "opts", ()):
                    key = opt.lstrip("-").replace("-", "_")
                    if key in values:
                        defaults[param.name] = values[key]
                if param.name in values:
                    defaults[param.name] = values[param.name]
            if defaults:
                default_map[cmd_name] = defaults
        ctx.default_map = default_map


def _fail(exc: Exception) -> "click.ClickException":
    return click.ClickException(str(exc))


def _load_store_catalog(triples, types_path, mediators_path):
    store = load_triples(triples)
    catalog = load_type_catalog(store, types_path, mediators_path)
    return store, catalog


@main.command("mine")
@click.option("--triples", required=True, type=click.Path())
@click.option("--out", "out_path", default="rules.tsv", type=click.Path())
@click.option("--min-hc", default="0.1", show_default=True,
              help="Minimum head coverage (decimal, exact).")
@click.option("--min-conf", default="0.1", show_default=True,
              help="Minimum standard confidence (decimal, exact).")
@click.option("--max-atoms", default=3, show_default=True, type=int)
@click.option("--constants/--no-constants", "allow_constants", default=True,
              show_default=True)
@click.option("--max-rules", default=None, type=int)
@click.option("--workers", default=1, show_default=True, type=int)
@click.option("--summary", "summary_path", default=None, type=click.Path(),
              help="Write a JSON mining summary here.")
@click.option("--timings/--no-timings", default=True, show_default=True,
              help="Include wall-time in the summary (disable for byte-stable output).")
def cmd_mine(triples, out_path, min_hc, min_conf, max_atoms, allow_constants,
             max_rules, workers, summary_path, timings):
    """Mine closed Horn rules that meet the coverage/confidence thresholds."""
    try:
        store = load_triples(triples)
        config = MinerConfig(
            min_head_coverage=min_hc,
            min_confidence=min_conf,
            max_atoms=max_atoms,
            allow_constants=allow_constants,
            max_rules=max_rules,
            worker_count=workers,
        )
        report = mine(store, config)
        write_rules_file(out_path, report.rules, store)
        if summary_path:
            Path(summary_path).write_text(
                json.dumps(report.summary(include_timings=timings), sort_keys=True) + "\n",
                encoding="utf-8",
            )
    except _ERRORS as exc:
        raise _fail(exc)
    click.echo(f"mined {len(report.rules)} rules -> {out_path}")


_METRIC_KEYS = {
    "head_coverage": lambda r: r.head_coverage,
    "std_confidence": lambda r: r.std_confidence,
    "support": lambda r: r.support,
}


@main.command("select")
@click.option("--rules", "rules_path", required=True, type=click.Path())
@click.option("--triples", required=True, type=click.Path())
@click.option("--k", required=True, type=int)
@click.option("--by", "metric", default="head_coverage", show_default=True,
              type=click.Choice(sorted(_METRIC_KEYS)))
@click.option("--out", "out_path", required=True, type=click.Path())
def cmd_select(rules_path, triples, k, metric, out_path):
    """Keep the top-k rules by a quality metric (ties break on rule text)."""
    try:
        store = load_triples(triples)
        rules = read_rules_file(rules_path, store)
        if k < 0:
            raise ValueError("k must be non-negative")
        if k > len(rules):
            raise ValueError(f"k={k} exceeds rule count {len(rules)}")
        key = _METRIC_KEYS[metric]
        for rule in rules:
            if key(rule) is None:
                raise ValueError("rules file lacks metric columns; re-run mine")
        from .rules import format_rule, rule_text

        ranked = sorted(rules, key=lambda r: (-key(r), rule_text(r, store)))
        write_rules_file(out_path, ranked[:k], store)
    except _ERRORS as exc:
        raise _fail(exc)
    click.echo(f"selected {min(k, len(rules))} rules -> {out_path}")


def _gateway(cassette_path, cassette_mode, rpm):
    return Gateway(Cassette(cassette_path, mode=cassette_mode), requests_per_minute=rpm)


@main.command("explain")
@click.option("--rules", "rules_path", required=True, type=click.Path())
@click.option("--triples", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--strategies", default="all", show_default=True,
              help="Comma list of strategies, or 'all'.")
@click.option("--model", "models", multiple=True, required=True,
              help="provider:model-name (repeatable).")
@click.option("--cassette", "cassette_path", default=None, type=click.Path())
@click.option("--cassette-mode", default="replay", show_default=True,
              type=click.Choice(["record", "replay", "passthrough"]))
@click.option("--dataset-tag", default="fb15k237", show_default=True)
@click.option("--types", "types_path", default=None, type=click.Path())
@click.option("--mediators", "mediators_path", default=None, type=click.Path())
@click.option("--type-threshold", default=0.5, show_default=True, type=float)
@click.option("--exemplars", "exemplars_path", default=None, type=click.Path())
@click.option("--cot-exemplars", "cot_exemplars_path", default=None, type=click.Path())
@click.option("--base-url", default=None, help="Override provider endpoint (stub testing).")
@click.option("--rpm", default=60, show_default=True, type=int)
def cmd_explain(rules_path, triples, out_path, strategies, models, cassette_path,
                cassette_mode, dataset_tag, types_path, mediators_path,
                type_threshold, exemplars_path, cot_exemplars_path, base_url, rpm):
    """Generate one explanation per (rule, strategy, model)."""
    try:
        store, catalog = _load_store_catalog(triples, types_path, mediators_path)
        rules = read_rules_file(rules_path, store)
        strategy_list = pipeline.parse_strategies(strategies)
        model_specs = [pipeline.parse_model_spec(m, base_url=base_url) for m in models]
        from .prompts import load_exemplars

        exemplars = load_exemplars(exemplars_path) if exemplars_path else None
        cot = load_exemplars(cot_exemplars_path, cot=True) if cot_exemplars_path else None
        gateway = _gateway(cassette_path, cassette_mode, rpm)
        records = pipeline.explain_rules(
            store, rules, strategy_list, model_specs, gateway, dataset_tag,
            catalog=catalog, threshold=type_threshold,
            exemplars=exemplars, cot_exemplars=cot,
        )
        write_explanations(out_path, records)
    except _ERRORS as exc:
        raise _fail(exc)
    click.echo(f"wrote {len(records)} explanations -> {out_path}")


def _safe_name(label: str) -> str:
    return label.replace("/", "_").replace(":", "_")


@main.command("judge")
@click.option("--explanations", "explanations_path", required=True, type=click.Path())
@click.option("--rules", "rules_path", required=True, type=click.Path())
@click.option("--triples", required=True, type=click.Path())
@click.option("--judges", required=True, help="Comma list of provider:model judges.")
@click.option("--generators", required=True,
              help="Comma list of generator model labels as stored in explanations.")
@click.option("--strategy", default="chain_of_thought", show_default=True)
@click.option("--cassette", "cassette_path", default=None, type=click.Path())
@click.option("--cassette-mode", default="replay", show_default=True,
              type=click.Choice(["record", "replay", "passthrough"]))
@click.option("--dataset-tag", default="fb15k237", show_default=True)
@click.option("--types", "types_path", default=None, type=click.Path())
@click.option("--mediators", "mediators_path", default=None, type=click.Path())
@click.option("--type-threshold", default=0.5, show_default=True, type=float)
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--base-url", default=None)
@click.option("--rpm", default=60, show_default=True, type=int)
def cmd_judge(explanations_path, rules_path, triples, judges, generators, strategy,
              cassette_path, cassette_mode, dataset_tag, types_path, mediators_path,
              type_threshold, out_dir, base_url, rpm):
    """Score explanations with judge models: one file per judge x generator."""
    try:
        store, catalog = _load_store_catalog(triples, types_path, mediators_path)
        rules = read_rules_file(rules_path, store)
        explanations = read_explanations(explanations_path)
        judge_specs = [
            pipeline.parse_model_spec(j.strip(), base_url=base_url)
            for j in judges.split(",") if j.strip()
        ]
        generator_labels = [g.strip() for g in generators.split(",") if g.strip()]
        gateway = _gateway(cassette_path, cassette_mode, rpm)
        results = pipeline.judge_explanations(
            store, rules, explanations, judge_specs, generator_labels,
            Strategy(strategy), gateway, dataset_tag, catalog, type_threshold,
        )
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for (judge_label, generator_label), scores in sorted(results.items()):
            path = out / f"scores__{_safe_name(judge_label)}__{_safe_name(generator_label)}.jsonl"
            write_judge_scores(path, scores)
            written.append(path.name)
    except _ERRORS as exc:
        raise _fail(exc)
    click.echo(f"wrote {len(written)} score files -> {out_dir}")


@main.command("evaluate")
@click.option("--explanations", "explanations_path", required=True, type=click.Path())
@click.option("--rules", "rules_path", required=True, type=click.Path())
@click.option("--triples", required=True, type=click.Path())
@click.option("--scorer", default="uniform:5000", show_default=True,
              help="Perplexity scorer: uniform:N, unigram:PATH, or service:URL.")
@click.option("--gloss-fraction", default=0.5, show_default=True, type=float)
@click.option("--out", "out_path", required=True, type=click.Path())
def cmd_evaluate(explanations_path, rules_path, triples, scorer, gloss_fraction, out_path):
    """Compute automatic metrics (mention counts + perplexity) per explanation."""
    try:
        store = load_triples(triples)
        rules = read_rules_file(rules_path, store)
        explanations = read_explanations(explanations_path)
        evaluated = pipeline.evaluate_explanations(
            store, rules, explanations, pipeline.make_scorer(scorer), gloss_fraction
        )
        write_explanations(out_path, evaluated)
    except _ERRORS as exc:
        raise _fail(exc)
    click.echo(f"evaluated {len(evaluated)} explanations -> {out_path}")


@main.command("report")
@click.option("--annotations", "annotations_path", required=True, type=click.Path())
@click.option("--rules", "rules_path", required=True, type=click.Path())
@click.option("--triples", required=True, type=click.Path())
@click.option("--phase", default=2, show_default=True, type=click.Choice(["1", "2"]),
              callback=lambda ctx, p, v: int(v))
@click.option("--explanations", "explanations_path", default=None, type=click.Path(),
              help="Evaluated explanations JSONL, for perplexity columns.")
@click.option("--scores-dir", default=None, type=click.Path(),
              help="Judge score files, for the correlation table.")
@click.option("--strategy", default="chain_of_thought", show_default=True,
              help="Strategy the judge scores refer to.")
@click.option("--types", "types_path", default=None, type=click.Path())
@click.option("--mediators", "mediators_path", default=None, type=click.Path())
@click.option("--type-threshold", default=0.5, show_default=True, type=float)
@click.option("--out-dir", required=True, type=click.Path())
def cmd_report(annotations_path, rules_path, triples, phase, explanations_path,
               scores_dir, strategy, types_path, mediators_path, type_threshold,
               out_dir):
    """Render aggregate tables (CSV + Markdown) and judge correlations."""
    try:
        store, catalog = _load_store_catalog(triples, types_path, mediators_path)
        rules = read_rules_file(rules_path, store)
        annotations = read_annotations(annotations_path)
        if not annotations:
            raise ValueError("no annotations to report on")
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)

        ppl = None
        if explanations_path:
            ppl = pipeline.perplexity_by_target(read_explanations(explanations_path))

        written = []
        if phase == 1:
            rows = aggregate_phase1(annotations, perplexity_by_target=ppl)
            (out / "phase1.csv").write_text(aggregate_rows_csv(rows), encoding="utf-8")
            (out / "phase1.md").write_text(
                aggregate_rows_markdown(
                    rows, "Majority-vote results",
                    note="mediator classification is type-based and best-effort",
                ),
                encoding="utf-8",
            )
            written += ["phase1.csv", "phase1.md"]
        else:
            categories = pipeline.compute_categories(store, rules, catalog, type_threshold)
            targets = sorted({a.target for a in annotations})
            for target in targets:
                subset = [a for a in annotations if a.target == target]
                rows = aggregate_by_category(subset, categories, perplexity_by_target=ppl)
                stem = f"categories__{_safe_name(target)}"
                (out / f"{stem}.csv").write_text(aggregate_rows_csv(rows), encoding="utf-8")
                (out / f"{stem}.md").write_text(
                    aggregate_rows_markdown(
                        rows, f"Results by category: {target}",
                        note="mediator classification is type-based and best-effort",
                    ),
                    encoding="utf-8",
                )
                written += [f"{stem}.csv", f"{stem}.md"]

        if scores_dir:
            scores_by_pair = {}
            for path in sorted(Path(scores_dir).glob("scores__*.jsonl")):
                scores = read_judge_scores(path)
                if scores:
                    key = (scores[0].judge_model, scores[0].generator_model)
                    scores_by_pair[key] = scores
            results = pipeline.judge_correlations(annotations, scores_by_pair, strategy)
            if results:
                (out / "correlations.csv").write_text(
                    correlations_csv(results), encoding="utf-8"
                )
                (out / "correlations.md").write_text(
                    correlations_markdown(results), encoding="utf-8"
                )
                written += ["correlations.csv", "correlations.md"]
    except _ERRORS as exc:
        raise _fail(exc)
    click.echo(f"wrote {', '.join(written)} -> {out_dir}")


@main.command("serve")
@click.option("--rules", "rules_path", required=True, type=click.Path())
@click.option("--triples", required=True, type=click.Path())
@click.option("--explanations", "explanations_path", required=True, type=click.Path())
@click.option("--phase", default=2, show_default=True, type=click.Choice(["1", "2"]),
              callback=lambda ctx, p, v: int(v))
@click.option("--annotations-out", required=True, type=click.Path())
@click.option("--types", "types_path", default=None, type=click.Path())
@click.option("--mediators", "mediators_path", default=None, type=click.Path())
@click.option("--type-threshold", default=0.5, show_default=True, type=float)
@click.option("--seed", default=0, show_default=True, type=int,
              help="Work-queue shuffle seed, shared by all annotators.")
@click.option("--tokens", default=None,
              help="Comma list annotator:token pairs enabling auth.")
@click.option("--static-dir", default="frontend/dist", show_default=True,
              type=click.Path())
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8321, show_default=True, type=int)
def cmd_serve(rules_path, triples, explanations_path, phase, annotations_out,
              types_path, mediators_path, type_threshold, seed, tokens,
              static_dir, host, port):
    """Serve the annotation API (and UI bundle, when built)."""
    try:
        from .server import build_app, build_work_items

        store, catalog = _load_store_catalog(triples, types_path, mediators_path)
        rules = read_rules_file(rules_path, store)
        explanations = read_explanations(explanations_path)
        items = build_work_items(
            store, rules, explanations, phase, catalog, type_threshold, seed
        )
        annotator_tokens = None
        if tokens:
            annotator_tokens = dict(
                pair.split(":", 1) for pair in tokens.split(",") if pair.strip()
            )
        app = build_app(
            items,
            annotations_out,
            annotator_tokens=annotator_tokens,
            static_dir=static_dir if Path(static_dir).exists() else None,
        )
    except _ERRORS as exc:
        raise _fail(exc)
    click.echo(f"serving {len(items)} work items on http://{host}:{port}")
    import uvicorn

    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    sys.exit(main())
