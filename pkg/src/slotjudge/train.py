"""Masked answer/reason losses and the optimization loop.

Answer loss: mean over requirements of cross-entropy at the readout position
(pos_i - 1) against the gold yes/no token. Reason loss: mean next-token
cross-entropy over reason-span positions only. Total = answer + lambda *
reason. All other positions carry no gradient.
"""

from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass, field, asdict
from typing import Optional, Sequence

import numpy as np
import torch

from .model import CausalTransformer
from .template import AssembledTemplate, NO_TARGET, assemble_sample
from .vocab import Vocabulary
from .world import GeneratedSample


class TrainError(RuntimeError):
    pass


class TrainingDiverged(TrainError):
    pass


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    warmup_ratio: float = 0.05
    epochs: int = 1
    batch_size: int = 16
    weight_decay: float = 0.01
    reason_weight: float = 0.55  # lambda on the reason loss
    with_cot: bool = False
    seed: int = 0
    drop_last_incomplete_batch: bool = True
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    eval_interval: int = 200
    eval_subset: int = 512
    visible_answers: bool = False  # autoregressive-pretraining baseline mode
    # Fraction of training samples assembled with reason spans when with_cot
    # is on. Inference templates carry no reason tokens, so mixing in
    # reason-free layouts keeps the reason-supervised model in-distribution
    # at evaluation time.
    cot_fraction: float = 0.5

    def __post_init__(self):
        if not 0 <= self.warmup_ratio < 1:
            raise TrainError("warmup_ratio must be in [0, 1)")
        if self.reason_weight < 0:
            raise TrainError("reason weight must be >= 0")
        if not 0 <= self.cot_fraction <= 1:
            raise TrainError("cot_fraction must be in [0, 1]")


@dataclass
class LossReport:
    answer_loss: float
    reason_loss: float
    total_loss: float
    n_answer_targets: int
    n_reason_targets: int


@dataclass
class TrainHistory:
    steps: list[int] = field(default_factory=list)
    lrs: list[float] = field(default_factory=list)
    answer_losses: list[float] = field(default_factory=list)
    reason_losses: list[float] = field(default_factory=list)
    total_losses: list[float] = field(default_factory=list)
    eval_steps: list[int] = field(default_factory=list)
    eval_acc_property: list[float] = field(default_factory=list)
    eval_acc_sample: list[float] = field(default_factory=list)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["step", "lr", "answer_loss", "reason_loss", "total_loss"])
            for row in zip(
                self.steps, self.lrs, self.answer_losses,
                self.reason_losses, self.total_losses,
            ):
                w.writerow(row)


# ---------------------------------------------------------------------------
# Losses on a single template


def answer_loss(grid: torch.Tensor, t: AssembledTemplate) -> torch.Tensor:
    """Eq-style mean cross-entropy over the N readout positions."""
    if t.supervision_mask is None:
        raise TrainError("template carries no labels")
    positions = torch.tensor([p - 1 for p in t.answer_positions])
    targets = torch.tensor(
        [int(t.supervision_mask[p]) for p in t.answer_positions]
    )
    if (targets == NO_TARGET).any():
        raise TrainError("missing gold answer at an answer slot")
    return torch.nn.functional.cross_entropy(grid[positions], targets)


def reason_loss(grid: torch.Tensor, t: AssembledTemplate) -> torch.Tensor:
    """Mean next-token cross-entropy over reason-span positions; 0 if the
    template has no reason spans."""
    positions = [
        i for start, end in t.reason_spans for i in range(start, end)
    ]
    if not positions:
        return grid.sum() * 0.0
    idx = torch.tensor(positions)
    targets = torch.tensor([int(t.supervision_mask[i]) for i in idx])
    return torch.nn.functional.cross_entropy(grid[idx - 1], targets)


def total_loss(
    grid: torch.Tensor, t: AssembledTemplate, reason_weight: float
) -> tuple[torch.Tensor, LossReport]:
    a = answer_loss(grid, t)
    r = reason_loss(grid, t)
    tot = a + reason_weight * r
    report = LossReport(
        answer_loss=float(a.detach()),
        reason_loss=float(r.detach()),
        total_loss=float(tot.detach()),
        n_answer_targets=t.n_requirements,
        n_reason_targets=sum(e - s for s, e in t.reason_spans),
    )
    return tot, report


# ---------------------------------------------------------------------------
# Batched path (same math as the single-template functions)


@dataclass
class Batch:
    ids: torch.Tensor  # (B, T) padded
    pad_mask: torch.Tensor  # (B, T) bool, True at padding
    answer_pos: list[list[int]]
    answer_tgt: list[list[int]]
    reason_pos: list[list[int]]
    reason_tgt: list[list[int]]
    templates: list[AssembledTemplate]


def collate(templates: Sequence[AssembledTemplate], pad_id: int) -> Batch:
    maxlen = max(len(t) for t in templates)
    b = len(templates)
    ids = np.full((b, maxlen), pad_id, dtype=np.int64)
    pad = np.ones((b, maxlen), dtype=bool)
    a_pos, a_tgt, r_pos, r_tgt = [], [], [], []
    for i, t in enumerate(templates):
        n = len(t)
        ids[i, :n] = t.token_ids
        pad[i, :n] = False
        a_pos.append([p - 1 for p in t.answer_positions])
        a_tgt.append([int(t.supervision_mask[p]) for p in t.answer_positions])
        spans = [j for s, e in t.reason_spans for j in range(s, e)]
        r_pos.append([j - 1 for j in spans])
        r_tgt.append([int(t.supervision_mask[j]) for j in spans])
    return Batch(
        ids=torch.from_numpy(ids),
        pad_mask=torch.from_numpy(pad),
        answer_pos=a_pos,
        answer_tgt=a_tgt,
        reason_pos=r_pos,
        reason_tgt=r_tgt,
        templates=list(templates),
    )


def batch_loss(
    model: CausalTransformer, batch: Batch, reason_weight: float
) -> tuple[torch.Tensor, LossReport]:
    grid = model(batch.ids, pad_mask=batch.pad_mask)
    logp = torch.log_softmax(grid, dim=-1)
    a_terms, r_terms = [], []
    n_ans = n_rsn = 0
    for i in range(len(batch.templates)):
        pos = torch.tensor(batch.answer_pos[i])
        tgt = torch.tensor(batch.answer_tgt[i])
        a_terms.append(-logp[i, pos, tgt].mean())
        n_ans += len(pos)
        if batch.reason_pos[i]:
            rp = torch.tensor(batch.reason_pos[i])
            rt = torch.tensor(batch.reason_tgt[i])
            r_terms.append(-logp[i, rp, rt].mean())
            n_rsn += len(rp)
    a = torch.stack(a_terms).mean()
    r = torch.stack(r_terms).mean() if r_terms else grid.sum() * 0.0
    tot = a + reason_weight * r
    return tot, LossReport(
        float(a.detach()), float(r.detach()), float(tot.detach()), n_ans, n_rsn
    )


# ---------------------------------------------------------------------------
# Schedule


def lr_at(step: int, total_steps: int, cfg: TrainConfig) -> float:
    """Linear warmup to the peak rate, then cosine decay to 0. 1-indexed."""
    warmup = max(1, round(cfg.warmup_ratio * total_steps))
    if step <= warmup:
        return cfg.learning_rate * step / warmup
    progress = (step - warmup) / max(1, total_steps - warmup)
    return cfg.learning_rate * 0.5 * (1.0 + math.cos(math.pi * progress))


# ---------------------------------------------------------------------------
# Training loop


def split_dataset(
    samples: Sequence[GeneratedSample], ratio: tuple[int, int] = (6, 1), seed: int = 0
) -> tuple[list[GeneratedSample], list[GeneratedSample]]:
    """Deterministic train/validation split, default 6:1."""
    order = list(samples)
    random.Random(seed).shuffle(order)
    n_val = len(order) * ratio[1] // (ratio[0] + ratio[1])
    return order[n_val:], order[:n_val]


def _assemble_all(
    samples: Sequence[GeneratedSample], vocab: Vocabulary, cfg: TrainConfig
) -> list[AssembledTemplate]:
    use_reasons = cfg.with_cot and not cfg.visible_answers
    layout_rng = random.Random(cfg.seed + 0x5EED)
    return [
        assemble_sample(
            s, vocab,
            with_reasons=use_reasons and layout_rng.random() < cfg.cot_fraction,
            visible_answers=cfg.visible_answers,
        )
        for s in samples
    ]


def evaluate_accuracy(
    model: CausalTransformer,
    samples: Sequence[GeneratedSample],
    vocab: Vocabulary,
    batch_size: int = 32,
) -> "EvalReport":
    from .judge import judge_batch
    from .metrics import compute_accuracies

    preds, golds, kinds = [], [], []
    for start in range(0, len(samples), batch_size):
        chunk = samples[start : start + batch_size]
        templates = [
            assemble_sample(s, vocab, with_reasons=False, labeled=False)
            for s in chunk
        ]
        decisions = judge_batch(model, templates, vocab)
        for s, dec in zip(chunk, decisions):
            preds.append(dec)
            golds.append([p.answer for p in s.properties])
            kinds.append([p.kind for p in s.properties])
    return compute_accuracies(preds, golds, kinds)


def train_epochs(
    samples: Sequence[GeneratedSample],
    model: CausalTransformer,
    cfg: TrainConfig,
    vocab: Vocabulary,
    val_samples: Optional[Sequence[GeneratedSample]] = None,
    quiet: bool = True,
) -> TrainHistory:
    """Train in place; returns the metrics history.

    `samples` is the training split; pass `val_samples` for periodic
    validation accuracy (a subset of cfg.eval_subset samples is used).
    """
    if not samples:
        raise TrainError("empty dataset")
    rng = random.Random(cfg.seed)
    torch.manual_seed(cfg.seed)
    templates = _assemble_all(samples, vocab, cfg)
    if not cfg.visible_answers:
        for t in templates:
            assert all(
                t.token_ids[p] == vocab.unknown_id for p in t.answer_positions
            ), "gold answer leaked into an answer slot"

    steps_per_epoch = len(templates) // cfg.batch_size
    if not cfg.drop_last_incomplete_batch and len(templates) % cfg.batch_size:
        steps_per_epoch += 1
    total_steps = steps_per_epoch * cfg.epochs
    if total_steps == 0:
        raise TrainError("dataset smaller than one batch")

    opt = torch.optim.AdamW(
        model.parameters(),
        lr=cfg.learning_rate,
        betas=(cfg.beta1, cfg.beta2),
        eps=cfg.eps,
        weight_decay=cfg.weight_decay,
    )
    history = TrainHistory()
    val_subset = None
    if val_samples:
        val_subset = list(val_samples)[: cfg.eval_subset]

    step = 0
    for _ in range(cfg.epochs):
        order = list(range(len(templates)))
        rng.shuffle(order)
        for b in range(steps_per_epoch):
            idx = order[b * cfg.batch_size : (b + 1) * cfg.batch_size]
            if not idx:
                continue
            step += 1
            lr = lr_at(step, total_steps, cfg)
            for group in opt.param_groups:
                group["lr"] = lr
            batch = collate([templates[i] for i in idx], vocab.pad_id)
            loss, report = batch_loss(model, batch, cfg.reason_weight if cfg.with_cot else 0.0)
            if not math.isfinite(report.total_loss):
                raise TrainingDiverged(
                    f"non-finite loss at step {step}: answer={report.answer_loss} "
                    f"reason={report.reason_loss} lr={lr}"
                )
            opt.zero_grad()
            loss.backward()
            opt.step()
            history.steps.append(step)
            history.lrs.append(lr)
            history.answer_losses.append(report.answer_loss)
            history.reason_losses.append(report.reason_loss)
            history.total_losses.append(report.total_loss)
            if val_subset and step % cfg.eval_interval == 0:
                ev = evaluate_accuracy(model, val_subset, vocab)
                history.eval_steps.append(step)
                history.eval_acc_property.append(ev.acc_property)
                history.eval_acc_sample.append(ev.acc_sample)
                if not quiet:
                    print(
                        f"step {step}/{total_steps} loss {report.total_loss:.4f} "
                        f"acc_property {ev.acc_property:.3f}"
                    )
    return history


def resolved_config_dict(cfg: TrainConfig) -> dict:
    return asdict(cfg)
