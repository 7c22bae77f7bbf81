"""Dependency-aware judging experiment: train one model on a 50/50 mixture of
dependency samples and one on plain samples, then compare dependency-slot
accuracy on a held-out dependency set."""

import argparse
import sys
from pathlib import Path

import torch

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from slotjudge.model import CausalTransformer, ModelConfig
from slotjudge.train import TrainConfig, evaluate_accuracy, split_dataset, train_epochs
from slotjudge.vocab import build_vocabulary
from slotjudge.world import WorldConfig, generate_dependency_set, generate_training_set


def train_on(samples, vocab, lr, epochs, seed):
    model = CausalTransformer(ModelConfig(vocab_size=vocab.size, seed=seed))
    cfg = TrainConfig(learning_rate=lr, epochs=epochs, seed=seed,
                      eval_interval=10_000)
    train_split, _ = split_dataset(samples, seed=seed)
    train_epochs(train_split, model, cfg, vocab)
    return model


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-samples", type=int, default=150_000)
    ap.add_argument("--learning-rate", type=float, default=7e-4)
    ap.add_argument("--epochs", type=int, default=1)
    args = ap.parse_args()

    torch.set_num_threads(1)
    world = WorldConfig()
    vocab = build_vocabulary(world)

    eval_set = list(generate_dependency_set(world, 1_000, 99, dep_fraction=1.0))

    with_dep = train_on(
        list(generate_dependency_set(world, args.n_samples, 11, dep_fraction=0.5)),
        vocab, args.learning_rate, args.epochs, seed=1,
    )
    without_dep = train_on(
        list(generate_training_set(world, args.n_samples, 5)),
        vocab, args.learning_rate, args.epochs, seed=2,
    )

    for name, model in (("with dependency mix", with_dep),
                        ("plain training set ", without_dep)):
        report = evaluate_accuracy(model, eval_set, vocab)
        print(f"{name}  acc_dep={report.acc_dep:.4f} "
              f"acc_property={report.acc_property:.4f}")


if __name__ == "__main__":
    main()
