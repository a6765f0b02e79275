"""Deterministic prompt rendering for every generation strategy and the judge.

Templates live as versioned data files with $placeholders; a rendered
prompt's hash is a pure function of (strategy, context, template version),
which is what record/replay keys on. The exact wording shipped here is a
reconstruction; exemplars are data files so they can be swapped without
touching code.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from string import Template
from typing import Sequence

from .model import Constant, Grounding, Rule, Variable
from .rules import rule_text
from .signatures import VariableTypes
from .store import TripleStore

TEMPLATE_VERSION = "v1"


class PromptError(ValueError):
    pass


class Strategy(str, Enum):
    ZERO_SHOT = "zero_shot"
    FEW_SHOT = "few_shot"
    INSTANTIATED = "instantiated"
    TYPED_ZERO_SHOT = "typed_zero_shot"
    CHAIN_OF_THOUGHT = "chain_of_thought"


DATASET_TAGS = {
    "fb15k237": "background_fb15k237.txt",
    "fb-cvt-rev": "background_fb_cvt_rev.txt",
    "fb+cvt-rev": "background_fb_plus_cvt_rev.txt",
}

_STRATEGY_TEMPLATES = {
    Strategy.ZERO_SHOT: "zero_shot.txt",
    Strategy.FEW_SHOT: "few_shot.txt",
    Strategy.INSTANTIATED: "instantiated.txt",
    Strategy.TYPED_ZERO_SHOT: "typed_zero_shot.txt",
    Strategy.CHAIN_OF_THOUGHT: "chain_of_thought.txt",
}


def _read_template(name: str) -> str:
    return resources.files("kgrex.templates").joinpath(name).read_text(encoding="utf-8")


@dataclass(frozen=True)
class Exemplar:
    rule: str
    explanation: str
    reasoning: str | None = None


def load_exemplars(path=None, *, cot: bool = False) -> tuple[Exemplar, ...]:
    """Read exemplar (rule, explanation[, reasoning]) records from JSONL."""
    if path is None:
        name = "chain_of_thought.jsonl" if cot else "few_shot.jsonl"
        raw = resources.files("kgrex.exemplars").joinpath(name).read_text(encoding="utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            raw = fh.read()
    out = []
    for line in raw.splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        out.append(
            Exemplar(
                rule=record["rule"],
                explanation=record["explanation"],
                reasoning=record.get("reasoning"),
            )
        )
    return tuple(out)


@dataclass(frozen=True)
class PromptContext:
    """Everything a strategy template may draw on for one rule."""

    store: TripleStore
    rule: Rule
    grounding: Grounding | None = None
    variable_types: tuple[VariableTypes, ...] | None = None
    exemplars: tuple[Exemplar, ...] = ()


@dataclass(frozen=True)
class PromptBundle:
    template_id: str
    background: str
    user_message: str
    render_hash: str


@dataclass(frozen=True)
class JudgePrompt:
    template_id: str
    background: str
    user_message: str
    render_hash: str
    output_contract: str = "single integer 1-5"


def _digest(template_id: str, background: str, user_message: str) -> str:
    h = hashlib.sha256()
    for part in (template_id, background, user_message):
        h.update(part.encode("utf-8"))
        h.update(b"\x00")
    return h.hexdigest()


def build_background(dataset_tag: str) -> str:
    """Fixed dataset preamble; byte-stable per template version."""
    filename = DATASET_TAGS.get(dataset_tag)
    if filename is None:
        raise PromptError(
            f"unknown dataset tag {dataset_tag!r}; expected one of {sorted(DATASET_TAGS)}"
        )
    return _read_template(filename)


def render_grounding(rule: Rule, grounding: Grounding, store: TripleStore) -> str:
    """The rule text with every variable replaced by its bound entity."""
    binding = grounding.as_dict()

    def subst(term):
        if isinstance(term, Variable):
            return Constant(binding[term.name])
        return term

    from .model import Atom

    body = tuple(Atom(a.relation, subst(a.subject), subst(a.object)) for a in rule.body)
    head = Atom(rule.head.relation, subst(rule.head.subject), subst(rule.head.object))
    parts = [
        " ".join(
            (
                store.entity_name(atom.subject.entity),
                store.relation_name(atom.relation),
                store.entity_name(atom.object.entity),
            )
        )
        for atom in (*body, head)
    ]
    return " ".join(parts[:-1]) + " => " + parts[-1]


def render_types(variable_types: Sequence[VariableTypes]) -> str:
    lines = []
    for vt in variable_types:
        if vt.candidates:
            lines.append(f"{vt.variable}: " + ", ".join(vt.candidates))
        else:
            lines.append(f"{vt.variable}: (no type information)")
    return "\n".join(lines)


def _render_exemplars(exemplars: Sequence[Exemplar], with_reasoning: bool) -> str:
    blocks = []
    for i, ex in enumerate(exemplars, start=1):
        lines = [f"Example {i}:", f"Rule: {ex.rule}"]
        if with_reasoning:
            if not ex.reasoning:
                raise PromptError(f"exemplar {i} lacks the worked reasoning text")
            lines.append(f"Reasoning: {ex.reasoning}")
        lines.append(f"Explanation: {ex.explanation}")
        blocks.append("\n".join(lines) + "\n")
    return "\n".join(blocks)


def estimate_tokens(text: str) -> int:
    return len(text) // 4 + 1


def _check_budget(text: str, max_tokens_estimate: int) -> None:
    est = estimate_tokens(text)
    if est > max_tokens_estimate:
        raise PromptError(
            f"rendered prompt estimates {est} tokens, over the {max_tokens_estimate} budget"
        )


def build_explanation_prompt(strategy: Strategy, ctx: PromptContext, dataset_tag: str,
                             max_tokens_estimate: int = 8000) -> PromptBundle:
    """Render one strategy's prompt for one rule.

    Context requirements: INSTANTIATED needs a grounding; TYPED_ZERO_SHOT
    and CHAIN_OF_THOUGHT need variable types; FEW_SHOT and
    CHAIN_OF_THOUGHT need exactly 2 exemplars.
    """
    strategy = Strategy(strategy)
    background = build_background(dataset_tag)
    fields: dict[str, str] = {
        "background": background.rstrip("\n"),
        "rule": rule_text(ctx.rule, ctx.store),
    }

    if strategy is Strategy.INSTANTIATED:
        if ctx.grounding is None:
            raise PromptError("instantiated strategy requires field: grounding")
        fields["grounding"] = render_grounding(ctx.rule, ctx.grounding, ctx.store)

    if strategy in (Strategy.TYPED_ZERO_SHOT, Strategy.CHAIN_OF_THOUGHT):
        if ctx.variable_types is None:
            raise PromptError(f"{strategy.value} strategy requires field: variable_types")
        fields["types"] = render_types(ctx.variable_types)

    if strategy in (Strategy.FEW_SHOT, Strategy.CHAIN_OF_THOUGHT):
        if len(ctx.exemplars) != 2:
            raise PromptError(
                f"{strategy.value} strategy requires exactly 2 exemplars, got {len(ctx.exemplars)}"
            )
        fields["exemplars"] = _render_exemplars(
            ctx.exemplars, with_reasoning=strategy is Strategy.CHAIN_OF_THOUGHT
        )

    template_id = f"{strategy.value}/{TEMPLATE_VERSION}"
    text = Template(_read_template(_STRATEGY_TEMPLATES[strategy])).substitute(fields)
    _check_budget(text, max_tokens_estimate)
    return PromptBundle(
        template_id=template_id,
        background=background,
        user_message=text,
        render_hash=_digest(template_id, background, text),
    )


def build_judge_prompt(rule: Rule, grounding: Grounding,
                       variable_types: Sequence[VariableTypes], explanation: str,
                       store: TripleStore, dataset_tag: str = "fb15k237",
                       max_tokens_estimate: int = 8000) -> JudgePrompt:
    """Judge prompt carrying the same four blocks human annotators saw."""
    if grounding is None:
        raise PromptError("judge prompt requires field: grounding")
    if variable_types is None:
        raise PromptError("judge prompt requires field: variable_types")
    if not explanation or not explanation.strip():
        raise PromptError("judge prompt requires a non-empty explanation")
    background = build_background(dataset_tag)
    template_id = f"judge/{TEMPLATE_VERSION}"
    text = Template(_read_template("judge.txt")).substitute(
        background=background.rstrip("\n"),
        rule=rule_text(rule, store),
        grounding=render_grounding(rule, grounding, store),
        types=render_types(variable_types),
        explanation=explanation.strip(),
    )
    _check_budget(text, max_tokens_estimate)
    return JudgePrompt(
        template_id=template_id,
        background=background,
        user_message=text,
        render_hash=_digest(template_id, background, text),
    )
