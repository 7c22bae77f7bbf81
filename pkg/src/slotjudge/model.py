"""Toy decoder-only causal transformer.

Pre-norm blocks, learned positional embeddings, GELU feed-forward. Attention
is written out explicitly (no fused kernels) so causality is exact: masked
key columns get weight exactly 0.0 and a suffix perturbation leaves prefix
logits bitwise unchanged.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, asdict
from typing import Optional

import torch
import torch.nn as nn
import torch.nn.functional as F

from .vocab import Vocabulary


class ModelError(ValueError):
    pass


class CheckpointError(RuntimeError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    d_model: int = 128
    n_layers: int = 4
    n_heads: int = 4
    d_ff: int = 512
    context_len: int = 512
    vocab_size: int = 512
    seed: int = 0

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ModelError("d_model must be divisible by n_heads")


class Block(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.n_heads = cfg.n_heads
        self.d_head = cfg.d_model // cfg.n_heads
        self.ln1 = nn.LayerNorm(cfg.d_model)
        self.ln2 = nn.LayerNorm(cfg.d_model)
        self.wq = nn.Linear(cfg.d_model, cfg.d_model)
        self.wk = nn.Linear(cfg.d_model, cfg.d_model)
        self.wv = nn.Linear(cfg.d_model, cfg.d_model)
        self.wo = nn.Linear(cfg.d_model, cfg.d_model)
        self.ff1 = nn.Linear(cfg.d_model, cfg.d_ff)
        self.ff2 = nn.Linear(cfg.d_ff, cfg.d_model)

    def _heads(self, x: torch.Tensor) -> torch.Tensor:
        b, t, _ = x.shape
        return x.view(b, t, self.n_heads, self.d_head).transpose(1, 2)

    def attend(
        self,
        q: torch.Tensor,
        k: torch.Tensor,
        v: torch.Tensor,
        mask: Optional[torch.Tensor],
    ) -> torch.Tensor:
        scores = q @ k.transpose(-1, -2) / math.sqrt(self.d_head)
        if mask is not None:
            scores = scores.masked_fill(mask, float("-inf"))
        weights = scores.softmax(dim=-1)
        out = weights @ v
        b, h, t, d = out.shape
        return self.wo(out.transpose(1, 2).reshape(b, t, h * d))

    def forward(self, x: torch.Tensor, mask: Optional[torch.Tensor]) -> torch.Tensor:
        h = self.ln1(x)
        x = x + self.attend(self._heads(self.wq(h)), self._heads(self.wk(h)),
                            self._heads(self.wv(h)), mask)
        return x + self.ff2(F.gelu(self.ff1(self.ln2(x))))


class DecodeCache:
    """Per-layer key/value tensors for incremental decoding."""

    def __init__(self, n_layers: int):
        self.keys: list[Optional[torch.Tensor]] = [None] * n_layers
        self.values: list[Optional[torch.Tensor]] = [None] * n_layers

    @property
    def length(self) -> int:
        return 0 if self.keys[0] is None else self.keys[0].shape[2]

    def append(self, layer: int, k: torch.Tensor, v: torch.Tensor):
        if self.keys[layer] is None:
            self.keys[layer] = k
            self.values[layer] = v
        else:
            self.keys[layer] = torch.cat([self.keys[layer], k], dim=2)
            self.values[layer] = torch.cat([self.values[layer], v], dim=2)


class CausalTransformer(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        gen = torch.Generator().manual_seed(cfg.seed)
        self.tok_emb = nn.Embedding(cfg.vocab_size, cfg.d_model)
        self.pos_emb = nn.Embedding(cfg.context_len, cfg.d_model)
        self.blocks = nn.ModuleList(Block(cfg) for _ in range(cfg.n_layers))
        self.ln_f = nn.LayerNorm(cfg.d_model)
        self.head = nn.Linear(cfg.d_model, cfg.vocab_size)
        self._init_weights(gen)

    def _init_weights(self, gen: torch.Generator):
        # normal(0, 0.02) for embeddings/projections, ones for norm scales,
        # zeros for biases
        for name, p in self.named_parameters():
            with torch.no_grad():
                if p.dim() >= 2 or "emb" in name:
                    p.copy_(torch.empty_like(p).normal_(0.0, 0.02, generator=gen))
                elif "weight" in name:  # LayerNorm scale
                    p.fill_(1.0)
                else:
                    p.zero_()

    def _check_ids(self, ids: torch.Tensor, extra: int = 0):
        if ids.numel() and int(ids.max()) >= self.cfg.vocab_size:
            raise ModelError("token id out of range for vocabulary")
        if ids.numel() and int(ids.min()) < 0:
            raise ModelError("negative token id")
        if ids.shape[-1] + extra > self.cfg.context_len:
            raise ModelError(
                f"sequence length {ids.shape[-1] + extra} exceeds "
                f"context_len {self.cfg.context_len}"
            )

    def forward(
        self, ids: torch.Tensor, pad_mask: Optional[torch.Tensor] = None
    ) -> torch.Tensor:
        """Next-token logits at every position.

        ids: (T,) or (B, T); pad_mask: (B, T) bool, True where the token is
        padding (excluded as an attention key).
        """
        squeeze = ids.dim() == 1
        if squeeze:
            ids = ids.unsqueeze(0)
        self._check_ids(ids)
        b, t = ids.shape
        x = self.tok_emb(ids) + self.pos_emb(torch.arange(t, device=ids.device))
        causal = torch.triu(torch.ones(t, t, dtype=torch.bool, device=ids.device), 1)
        mask = causal[None, None]
        if pad_mask is not None:
            mask = mask | pad_mask[:, None, None, :]
            # keep at least the diagonal unmasked so softmax stays finite
            diag = torch.eye(t, dtype=torch.bool, device=ids.device)[None, None]
            mask = mask & ~diag
        for block in self.blocks:
            x = block(x, mask)
        logits = self.head(self.ln_f(x))
        return logits.squeeze(0) if squeeze else logits

    # -- incremental decoding ------------------------------------------------

    def new_cache(self) -> DecodeCache:
        return DecodeCache(self.cfg.n_layers)

    @torch.no_grad()
    def decode(self, cache: DecodeCache, ids: torch.Tensor) -> torch.Tensor:
        """Extend the cached prefix with `ids` (1-D chunk); returns logits for
        the chunk positions. Matches a full forward within 1e-5 relative."""
        if ids.dim() != 1:
            raise ModelError("decode expects a 1-D token chunk")
        self._check_ids(ids, extra=cache.length)
        start = cache.length
        t = ids.shape[0]
        x = self.tok_emb(ids) + self.pos_emb(torch.arange(start, start + t))
        x = x.unsqueeze(0)
        for li, block in enumerate(self.blocks):
            h = block.ln1(x)
            q = block._heads(block.wq(h))
            k = block._heads(block.wk(h))
            v = block._heads(block.wv(h))
            cache.append(li, k, v)
            total = cache.keys[li].shape[2]
            # query j (absolute start+j) may attend keys <= start+j
            mask = torch.arange(total)[None, :] > (
                start + torch.arange(t)[:, None]
            )
            x = x + block.attend(q, cache.keys[li], cache.values[li], mask[None, None])
            x = x + block.ff2(F.gelu(block.ff1(block.ln2(x))))
        return self.head(self.ln_f(x)).squeeze(0)

    # -- explicit backward ---------------------------------------------------

    def backward_from_logit_grad(
        self, ids: torch.Tensor, logit_grad: torch.Tensor
    ) -> dict[str, torch.Tensor]:
        """Weight gradients for an upstream gradient on the logits grid."""
        logits = self.forward(ids)
        if logit_grad.shape != logits.shape:
            raise ModelError(
                f"logit gradient shape {tuple(logit_grad.shape)} does not match "
                f"grid shape {tuple(logits.shape)}"
            )
        params = dict(self.named_parameters())
        grads = torch.autograd.grad(
            logits, list(params.values()), grad_outputs=logit_grad,
            allow_unused=True,
        )
        return {
            name: (g if g is not None else torch.zeros_like(p))
            for (name, p), g in zip(params.items(), grads)
        }


# ---------------------------------------------------------------------------
# Checkpoints


def save_checkpoint(path, model: CausalTransformer, vocab: Vocabulary) -> None:
    torch.save(
        {
            "format": "slotjudge-ckpt-v1",
            "config": asdict(model.cfg),
            "vocab_hash": vocab.content_hash(),
            "state": model.state_dict(),
        },
        path,
    )


def load_checkpoint(path, vocab: Vocabulary) -> CausalTransformer:
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e
    if not isinstance(payload, dict) or payload.get("format") != "slotjudge-ckpt-v1":
        raise CheckpointError(f"not a recognized checkpoint: {path}")
    if payload["vocab_hash"] != vocab.content_hash():
        raise CheckpointError("checkpoint was trained with a different vocabulary")
    cfg = ModelConfig(**payload["config"])
    model = CausalTransformer(cfg)
    try:
        model.load_state_dict(payload["state"])
    except Exception as e:
        raise CheckpointError(f"tensor shapes do not match config: {e}") from e
    return model


def weights_fingerprint(model: CausalTransformer) -> str:
    h = hashlib.sha256()
    for name, p in sorted(model.state_dict().items()):
        h.update(name.encode())
        h.update(p.detach().cpu().numpy().tobytes())
    return h.hexdigest()
