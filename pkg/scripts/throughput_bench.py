"""Wall-clock and forward-pass comparison of the single-pass judge against the
autoregressive (KV-cache) and isolated per-requirement baselines."""

import argparse
import sys
from pathlib import Path

import torch

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from slotjudge.cli import bench_rows
from slotjudge.model import CausalTransformer, ModelConfig
from slotjudge.vocab import build_vocabulary
from slotjudge.world import WorldConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-requirements", default="2,5,10,20")
    ap.add_argument("--repeats", type=int, default=10)
    args = ap.parse_args()

    torch.set_num_threads(1)
    world = WorldConfig()
    vocab = build_vocabulary(world)
    model = CausalTransformer(ModelConfig(vocab_size=vocab.size, seed=0))

    n_list = [int(x) for x in args.n_requirements.split(",")]
    rows = bench_rows(model, vocab, world, n_list, args.repeats)
    print(f"{'N':>4} {'single':>12} {'auto':>12} {'isolated':>12} "
          f"{'passes(s/a/i)':>14} {'speedup':>8}")
    for r in rows:
        print(f"{r['n_requirements']:>4} "
              f"{r['single_ms_median']:>10.2f}ms "
              f"{r['auto_ms_median']:>10.2f}ms "
              f"{r['isolated_ms_median']:>10.2f}ms "
              f"{r['single_passes']:>4}/{r['auto_passes']}/{r['isolated_passes']:>3} "
              f"{r['speedup_vs_auto']:>7.2f}x")


if __name__ == "__main__":
    main()
