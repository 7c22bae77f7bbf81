"""Pairwise reranking evaluation. Judges both scenes of each generated pair
in single-pass mode, scores them with the pair's expression, and reports the
misranking rate; also checks that oracle judgments rank every pair correctly."""

import argparse
import sys
from pathlib import Path

import torch

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from slotjudge.metrics import compute_error_rank
from slotjudge.model import load_checkpoint
from slotjudge.rankexpr import evaluate, parse, rerank_pair
from slotjudge.vocab import build_vocabulary
from slotjudge.world import WorldConfig, generate_pair_set, oracle_eval


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--ckpt", default="runs/main.ckpt")
    ap.add_argument("--n-pairs", type=int, default=500)
    ap.add_argument("--seed", type=int, default=17)
    args = ap.parse_args()

    torch.set_num_threads(1)
    world = WorldConfig()
    vocab = build_vocabulary(world)
    model = load_checkpoint(args.ckpt, vocab)

    pairs = list(generate_pair_set(world, args.n_pairs, args.seed))
    model_preds, oracle_preds = [], []
    for pair in pairs:
        model_preds.append(rerank_pair(model, pair, vocab).prediction)
        expr = parse(pair.expression)
        scores = [
            evaluate(expr, [oracle_eval(scene, r, world) for r in pair.requirements])
            for scene in (pair.scene_1, pair.scene_2)
        ]
        oracle_preds.append("first" if scores[0] > scores[1] else "second")

    labels = [p.label for p in pairs]
    print(f"model  error_rank={compute_error_rank(model_preds, labels):.4f}")
    print(f"oracle error_rank={compute_error_rank(oracle_preds, labels):.4f}")


if __name__ == "__main__":
    main()
