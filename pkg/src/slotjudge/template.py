"""Template assembly: answer slots, reason spans, supervision masks.

Layout per requirement: requirement words, <|auth_start|>, <unknown>,
<|auth_end|>, then (training with reasons only) <|reason_start|>, reason
words, <|reason_end|>. The scene block precedes all requirements. Logits for
requirement i are read at answer_positions[i] - 1, i.e. at <|auth_start|>.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .vocab import Vocabulary
from .world import DEPENDENCY_TEXT, GeneratedSample

NO_TARGET = -1


class TemplateError(ValueError):
    pass


@dataclass(frozen=True)
class Requirement:
    text: tuple[str, ...]
    gold_answer: Optional[str] = None  # "yes" | "no"
    gold_reason: Optional[tuple[str, ...]] = None
    kind: str = "literal"  # "literal" | "dependency"


@dataclass(frozen=True)
class AssembledTemplate:
    token_ids: np.ndarray  # int64, shape (T,)
    answer_positions: tuple[int, ...]
    reason_spans: tuple[tuple[int, int], ...]  # half-open (start, end) word spans
    supervision_mask: Optional[np.ndarray]  # int64 (T,), NO_TARGET where unsupervised
    n_requirements: int
    kinds: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.token_ids)


def negate(answer: str) -> str:
    if answer == "yes":
        return "no"
    if answer == "no":
        return "yes"
    raise TemplateError(f"not a yes/no answer: {answer!r}")


def make_dependency_pair(r1: Requirement) -> list[Requirement]:
    if r1.kind != "literal":
        raise TemplateError("dependency pair needs a literal first requirement")
    if r1.gold_answer is None:
        raise TemplateError("dependency pair needs a labeled first requirement")
    r2 = Requirement(
        text=tuple(DEPENDENCY_TEXT),
        gold_answer=negate(r1.gold_answer),
        gold_reason=("the", "opposite", "of", "the", "previous", "answer"),
        kind="dependency",
    )
    return [r1, r2]


def assemble(
    reqs: Sequence[Requirement],
    scene_tokens: Sequence[int],
    with_reasons: bool,
    v: Vocabulary,
    labeled: Optional[bool] = None,
) -> AssembledTemplate:
    """Build the judging template.

    `labeled` controls whether a supervision mask is produced; it defaults to
    with_reasons or the presence of gold answers on every requirement.
    """
    if not reqs:
        raise TemplateError("at least one requirement is required")
    if labeled is None:
        labeled = all(r.gold_answer is not None for r in reqs)
    if with_reasons and not labeled:
        raise TemplateError("reason spans require labeled requirements")

    ids: list[int] = list(scene_tokens)
    mask: list[int] = [NO_TARGET] * len(ids)
    answer_positions: list[int] = []
    reason_spans: list[tuple[int, int]] = []

    for r in reqs:
        if labeled and r.gold_answer is None:
            raise TemplateError("missing gold answer in training mode")
        if with_reasons and r.gold_reason is None:
            raise TemplateError("with_reasons requires gold_reason on every requirement")
        for w in r.text:
            ids.append(v.id(w))
            mask.append(NO_TARGET)
        ids.append(v.auth_start_id)
        mask.append(NO_TARGET)
        answer_positions.append(len(ids))
        ids.append(v.unknown_id)  # answer slot; never the gold answer
        mask.append(
            (v.yes_id if r.gold_answer == "yes" else v.no_id)
            if labeled
            else NO_TARGET
        )
        ids.append(v.auth_end_id)
        mask.append(NO_TARGET)
        if with_reasons:
            ids.append(v.reason_start_id)
            mask.append(NO_TARGET)
            start = len(ids)
            for w in r.gold_reason:
                tok = v.id(w)
                ids.append(tok)
                mask.append(tok)  # next-token target inside the reason span
            reason_spans.append((start, len(ids)))
            ids.append(v.reason_end_id)
            mask.append(NO_TARGET)

    return AssembledTemplate(
        token_ids=np.asarray(ids, dtype=np.int64),
        answer_positions=tuple(answer_positions),
        reason_spans=tuple(reason_spans),
        supervision_mask=np.asarray(mask, dtype=np.int64) if labeled else None,
        n_requirements=len(reqs),
        kinds=tuple(r.kind for r in reqs),
    )


def assemble_with_visible_answers(
    reqs: Sequence[Requirement],
    scene_tokens: Sequence[int],
    v: Vocabulary,
) -> AssembledTemplate:
    """Autoregressive-pretraining variant: the gold answer token sits in the
    slot instead of <unknown>, so each answer is predicted with all previous
    answers observed. Baseline-only; judging templates never contain answers.
    """
    base = assemble(reqs, scene_tokens, with_reasons=False, v=v, labeled=True)
    ids = base.token_ids.copy()
    for pos in base.answer_positions:
        ids[pos] = base.supervision_mask[pos]
    return AssembledTemplate(
        token_ids=ids,
        answer_positions=base.answer_positions,
        reason_spans=(),
        supervision_mask=base.supervision_mask,
        n_requirements=base.n_requirements,
        kinds=base.kinds,
    )


def requirements_from_sample(sample: GeneratedSample) -> list[Requirement]:
    return [
        Requirement(
            text=p.text,
            gold_answer=p.answer,
            gold_reason=p.reason or None,
            kind=p.kind,
        )
        for p in sample.properties
    ]


def assemble_sample(
    sample: GeneratedSample,
    v: Vocabulary,
    with_reasons: bool = False,
    labeled: bool = True,
    visible_answers: bool = False,
) -> AssembledTemplate:
    scene_tokens = v.encode(sample.scene.to_words())
    reqs = requirements_from_sample(sample)
    if visible_answers:
        return assemble_with_visible_answers(reqs, scene_tokens, v)
    return assemble(reqs, scene_tokens, with_reasons=with_reasons, v=v, labeled=labeled)
