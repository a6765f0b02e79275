"""Shared orchestration between the CLI commands.

Everything here is deterministic given a replay cassette: rules and
records are processed in sorted order and written in sorted order, so a
full pipeline run is byte-reproducible.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Mapping, Sequence

from .aggregate import (
    CorrelationResult,
    HumanAnnotation,
    aggregate_by_category,
    aggregate_phase1,
    judge_correlation,
)
from .gateway import Gateway, ModelSpec
from .metrics import (
    EntityLexicon,
    ScoringServiceClient,
    UnigramScorer,
    UniformScorer,
    auto_metrics,
)
from .model import Rule
from .prompts import (
    PromptContext,
    Strategy,
    build_explanation_prompt,
    build_judge_prompt,
    load_exemplars,
)
from .records import ExplanationRecord, JudgeScore
from .rules import categorize, instantiate, rule_id
from .signatures import variable_types
from .store import TripleStore, TypeCatalog

log = logging.getLogger(__name__)


class PipelineError(ValueError):
    pass


def parse_model_spec(text: str, temperature: float = 0.0,
                     base_url: str | None = None) -> ModelSpec:
    """Parse 'provider:model-name' into a ModelSpec."""
    if ":" not in text:
        raise PipelineError(f"model spec {text!r} must look like provider:model-name")
    provider, model_name = text.split(":", 1)
    return ModelSpec(
        provider=provider,
        model_name=model_name,
        temperature=temperature,
        base_url=base_url,
    )


def model_label(spec: ModelSpec) -> str:
    return f"{spec.provider}:{spec.model_name}"


def parse_strategies(text: str) -> list[Strategy]:
    if text.strip().lower() == "all":
        return list(Strategy)
    out = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        try:
            out.append(Strategy(token))
        except ValueError:
            raise PipelineError(
                f"unknown strategy {token!r}; valid: {', '.join(s.value for s in Strategy)}"
            ) from None
    if not out:
        raise PipelineError("no strategies selected")
    return out


def rules_with_ids(store: TripleStore, rules: Sequence[Rule]) -> list[tuple[str, Rule]]:
    pairs = [(rule_id(rule, store), rule) for rule in rules]
    seen = {}
    for rid, rule in pairs:
        if rid in seen:
            raise PipelineError(f"duplicate rule id {rid}; rules file repeats a rule")
        seen[rid] = rule
    return pairs


def _context_for(store: TripleStore, rule: Rule, strategy: Strategy,
                 catalog: TypeCatalog, threshold: float,
                 exemplars, cot_exemplars) -> PromptContext:
    grounding = None
    types = None
    chosen_exemplars = ()
    if strategy is Strategy.INSTANTIATED:
        grounding = instantiate(rule, store)
        if grounding is None:
            raise PipelineError("rule has no grounding; cannot build instantiated prompt")
    if strategy in (Strategy.TYPED_ZERO_SHOT, Strategy.CHAIN_OF_THOUGHT):
        types = tuple(variable_types(rule, store, catalog, threshold))
    if strategy is Strategy.FEW_SHOT:
        chosen_exemplars = exemplars
    elif strategy is Strategy.CHAIN_OF_THOUGHT:
        chosen_exemplars = cot_exemplars
    return PromptContext(
        store=store,
        rule=rule,
        grounding=grounding,
        variable_types=types,
        exemplars=chosen_exemplars,
    )


def explain_rules(store: TripleStore, rules: Sequence[Rule],
                  strategies: Sequence[Strategy], models: Sequence[ModelSpec],
                  gateway: Gateway, dataset_tag: str,
                  catalog: TypeCatalog | None = None, threshold: float = 0.5,
                  exemplars=None, cot_exemplars=None) -> list[ExplanationRecord]:
    """One explanation per (rule, strategy, model)."""
    catalog = catalog or TypeCatalog({})
    exemplars = tuple(exemplars) if exemplars is not None else load_exemplars()
    cot_exemplars = (
        tuple(cot_exemplars) if cot_exemplars is not None else load_exemplars(cot=True)
    )
    records: list[ExplanationRecord] = []
    for rid, rule in rules_with_ids(store, rules):
        for strategy in strategies:
            ctx = _context_for(
                store, rule, strategy, catalog, threshold, exemplars, cot_exemplars
            )
            prompt = build_explanation_prompt(strategy, ctx, dataset_tag)
            for model in models:
                transcript = gateway.complete(prompt, model)
                records.append(
                    ExplanationRecord(
                        rule_id=rid,
                        strategy=strategy.value,
                        model=model_label(model),
                        text=transcript.response_text,
                    )
                )
    return records


def judge_explanations(store: TripleStore, rules: Sequence[Rule],
                       explanations: Sequence[ExplanationRecord],
                       judges: Sequence[ModelSpec], generators: Sequence[str],
                       strategy: Strategy, gateway: Gateway,
                       dataset_tag: str = "fb15k237",
                       catalog: TypeCatalog | None = None,
                       threshold: float = 0.5) -> dict[tuple[str, str], list[JudgeScore]]:
    """Score every (judge model x generator model) pairing."""
    catalog = catalog or TypeCatalog({})
    by_key = {(e.rule_id, e.strategy, e.model): e for e in explanations}
    results: dict[tuple[str, str], list[JudgeScore]] = {}
    id_rules = rules_with_ids(store, rules)
    for judge in judges:
        for generator in generators:
            scores: list[JudgeScore] = []
            for rid, rule in id_rules:
                record = by_key.get((rid, strategy.value, generator))
                if record is None:
                    continue
                grounding = instantiate(rule, store)
                if grounding is None:
                    log.warning("rule %s has no grounding; skipped in judging", rid)
                    continue
                types = tuple(variable_types(rule, store, catalog, threshold))
                prompt = build_judge_prompt(
                    rule, grounding, types, record.text, store, dataset_tag
                )
                scores.append(
                    JudgeScore(
                        rule_id=rid,
                        judge_model=model_label(judge),
                        generator_model=generator,
                        strategy=strategy.value,
                        score=gateway.judge_score(prompt, judge),
                    )
                )
            results[(model_label(judge), generator)] = scores
    return results


def make_scorer(text: str):
    """Parse a scorer spec: uniform:N, unigram:PATH, or service:URL."""
    kind, _, arg = text.partition(":")
    if kind == "uniform":
        return UniformScorer(int(arg))
    if kind == "unigram":
        return UnigramScorer(Path(arg).read_text(encoding="utf-8"))
    if kind == "service":
        return ScoringServiceClient(arg)
    raise PipelineError(f"unknown scorer spec {text!r}")


def evaluate_explanations(store: TripleStore, rules: Sequence[Rule],
                          explanations: Sequence[ExplanationRecord], scorer,
                          gloss_fraction: float = 0.5) -> list[ExplanationRecord]:
    """Attach automatic metrics to every explanation record."""
    rules_by_id = dict(rules_with_ids(store, rules))
    lexicon = EntityLexicon(store)
    out = []
    for record in explanations:
        rule = rules_by_id.get(record.rule_id)
        if rule is None:
            raise PipelineError(f"explanation references unknown rule {record.rule_id}")
        metrics = auto_metrics(
            rule, record.text, store, lexicon, scorer=scorer, gloss_fraction=gloss_fraction
        )
        out.append(
            ExplanationRecord(
                rule_id=record.rule_id,
                strategy=record.strategy,
                model=record.model,
                text=record.text,
                auto_metrics=metrics,
            )
        )
    return out


def compute_categories(store: TripleStore, rules: Sequence[Rule],
                       catalog: TypeCatalog | None = None,
                       threshold: float = 0.5) -> dict[str, "RuleCategory"]:
    from .rules import RuleCategory  # noqa: F401  (return type)

    catalog = catalog or TypeCatalog({})
    out = {}
    for rid, rule in rules_with_ids(store, rules):
        types = None
        if catalog.mediator_types:
            types = {
                vt.variable: list(vt.candidates)
                for vt in variable_types(rule, store, catalog, threshold)
            }
        out[rid] = categorize(rule, store, catalog, types)
    return out


def perplexity_by_target(
    explanations: Sequence[ExplanationRecord],
) -> dict[tuple[str, str], float]:
    out = {}
    for record in explanations:
        if record.auto_metrics is not None and record.auto_metrics.perplexity is not None:
            out[(record.rule_id, f"{record.strategy}@{record.model}")] = (
                record.auto_metrics.perplexity
            )
    return out


def annotator_correctness_means(
    annotations: Sequence[HumanAnnotation], target: str
) -> dict[str, float]:
    sums: dict[str, list[int]] = {}
    for ann in annotations:
        if ann.target == target:
            sums.setdefault(ann.rule_id, []).append(ann.correctness)
    return {rid: sum(v) / len(v) for rid, v in sums.items()}


def judge_correlations(
    annotations: Sequence[HumanAnnotation],
    scores_by_pair: Mapping[tuple[str, str], Sequence[JudgeScore]],
    strategy: str,
) -> list[CorrelationResult]:
    results = []
    for (judge, generator), scores in sorted(scores_by_pair.items()):
        if not scores:
            continue
        target = f"{strategy}@{generator}"
        means = annotator_correctness_means(annotations, target)
        judge_by_rule = {s.rule_id: s.score for s in scores}
        results.append(judge_correlation(judge, generator, judge_by_rule, means))
    return results
