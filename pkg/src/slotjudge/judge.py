"""Inference engines: single-pass readout, autoregressive baseline with a
KV cache, and a per-requirement isolated baseline.

The binarized decision compares the yes/no token probabilities at each
readout position; ties resolve to "no".
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Sequence

import torch

from .model import CausalTransformer
from .template import AssembledTemplate, Requirement, assemble
from .vocab import Vocabulary


class JudgeError(ValueError):
    pass


@dataclass
class JudgmentSet:
    decisions: list[str]  # "yes" | "no" per requirement
    p_yes: list[float]
    p_no: list[float]
    raw_argmax_tokens: list[int]  # unrestricted argmax over the vocabulary
    readout_positions: list[int]  # pos_i - 1
    n_forward_passes: int
    wall_time_s: float


def binarize(p_yes: float, p_no: float) -> str:
    """Yes iff p(yes) strictly exceeds p(no); the tie goes to "no"."""
    return "yes" if p_yes > p_no else "no"


def _read_positions(
    grid: torch.Tensor, positions: Sequence[int], vocab: Vocabulary
) -> tuple[list[str], list[float], list[float], list[int]]:
    decisions, p_yes, p_no, argmaxes = [], [], [], []
    for pos in positions:
        probs = torch.softmax(grid[pos - 1], dim=-1)
        py = float(probs[vocab.yes_id])
        pn = float(probs[vocab.no_id])
        decisions.append(binarize(py, pn))
        p_yes.append(py)
        p_no.append(pn)
        argmaxes.append(int(torch.argmax(probs)))
    return decisions, p_yes, p_no, argmaxes


def judge_single_pass(
    model: CausalTransformer, t: AssembledTemplate, vocab: Vocabulary
) -> JudgmentSet:
    """All N decisions from exactly one forward pass."""
    if not t.answer_positions:
        raise JudgeError("template has no answer positions")
    start = time.perf_counter()
    with torch.no_grad():
        grid = model(torch.from_numpy(t.token_ids))
    decisions, p_yes, p_no, argmaxes = _read_positions(
        grid, t.answer_positions, vocab
    )
    return JudgmentSet(
        decisions=decisions,
        p_yes=p_yes,
        p_no=p_no,
        raw_argmax_tokens=argmaxes,
        readout_positions=[p - 1 for p in t.answer_positions],
        n_forward_passes=1,
        wall_time_s=time.perf_counter() - start,
    )


def judge_autoregressive_baseline(
    model: CausalTransformer, t: AssembledTemplate, vocab: Vocabulary
) -> JudgmentSet:
    """Sequential comparator: prefill to the first slot, decode its answer,
    substitute the decoded token for <unknown>, continue incrementally.
    Forward passes = 1 prefill + N incremental steps."""
    if not t.answer_positions:
        raise JudgeError("template has no answer positions")
    ids = torch.from_numpy(t.token_ids)
    positions = list(t.answer_positions)
    start = time.perf_counter()
    cache = model.new_cache()
    logits = model.decode(cache, ids[: positions[0]])  # prefill through pos_1 - 1
    passes = 1
    decisions, p_yes, p_no, argmaxes = [], [], [], []
    for i, pos in enumerate(positions):
        probs = torch.softmax(logits[-1], dim=-1)
        py = float(probs[vocab.yes_id])
        pn = float(probs[vocab.no_id])
        decision = binarize(py, pn)
        decisions.append(decision)
        p_yes.append(py)
        p_no.append(pn)
        argmaxes.append(int(torch.argmax(probs)))
        decoded = vocab.yes_id if decision == "yes" else vocab.no_id
        next_pos = positions[i + 1] if i + 1 < len(positions) else len(ids)
        # decoded answer replaces <unknown>, then the input tokens up to the
        # next readout position, all in one incremental step
        chunk = torch.cat(
            [torch.tensor([decoded]), ids[pos + 1 : next_pos]]
        )
        logits = model.decode(cache, chunk)
        passes += 1
    return JudgmentSet(
        decisions=decisions,
        p_yes=p_yes,
        p_no=p_no,
        raw_argmax_tokens=argmaxes,
        readout_positions=[p - 1 for p in positions],
        n_forward_passes=passes,
        wall_time_s=time.perf_counter() - start,
    )


def judge_isolated_baseline(
    model: CausalTransformer,
    reqs: Sequence[Requirement],
    scene_tokens: Sequence[int],
    vocab: Vocabulary,
) -> JudgmentSet:
    """One single-requirement template (and one forward pass) per requirement."""
    if not reqs:
        raise JudgeError("no requirements")
    start = time.perf_counter()
    decisions, p_yes, p_no, argmaxes, readouts = [], [], [], [], []
    for r in reqs:
        t = assemble([r], scene_tokens, with_reasons=False, v=vocab, labeled=False)
        js = judge_single_pass(model, t, vocab)
        decisions.extend(js.decisions)
        p_yes.extend(js.p_yes)
        p_no.extend(js.p_no)
        argmaxes.extend(js.raw_argmax_tokens)
        readouts.extend(js.readout_positions)
    return JudgmentSet(
        decisions=decisions,
        p_yes=p_yes,
        p_no=p_no,
        raw_argmax_tokens=argmaxes,
        readout_positions=readouts,
        n_forward_passes=len(reqs),
        wall_time_s=time.perf_counter() - start,
    )


def judge_batch(
    model: CausalTransformer,
    templates: Sequence[AssembledTemplate],
    vocab: Vocabulary,
) -> list[list[str]]:
    """Single-pass decisions for a batch of templates (padded jointly)."""
    batch = collate_unlabeled(templates, vocab.pad_id)
    with torch.no_grad():
        grid = model(batch[0], pad_mask=batch[1])
    out = []
    for i, t in enumerate(templates):
        decisions, _, _, _ = _read_positions(grid[i], t.answer_positions, vocab)
        out.append(decisions)
    return out


def collate_unlabeled(templates, pad_id: int):
    import numpy as np

    maxlen = max(len(t) for t in templates)
    ids = np.full((len(templates), maxlen), pad_id, dtype=np.int64)
    pad = np.ones((len(templates), maxlen), dtype=bool)
    for i, t in enumerate(templates):
        ids[i, : len(t)] = t.token_ids
        pad[i, : len(t)] = False
    return torch.from_numpy(ids), torch.from_numpy(pad)


def decision_flip_rate(
    model: CausalTransformer,
    reqs: Sequence[Requirement],
    scene_tokens: Sequence[int],
    vocab: Vocabulary,
    permutation: Sequence[int],
) -> float:
    """Fraction of literal requirements whose decision changes when the
    requirement order is permuted. Measured, not assumed."""
    base = assemble(
        list(reqs), scene_tokens, with_reasons=False, v=vocab, labeled=False
    )
    permuted_reqs = [reqs[i] for i in permutation]
    perm = assemble(
        permuted_reqs, scene_tokens, with_reasons=False, v=vocab, labeled=False
    )
    d0 = judge_single_pass(model, base, vocab).decisions
    d1 = judge_single_pass(model, perm, vocab).decisions
    flips = total = 0
    for slot, orig in enumerate(permutation):
        if reqs[orig].kind != "literal":
            continue
        total += 1
        flips += d0[orig] != d1[slot]
    return flips / total if total else 0.0
