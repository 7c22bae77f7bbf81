import sys
from pathlib import Path

import pytest
import torch

from slotjudge.model import CausalTransformer, ModelConfig, load_checkpoint, save_checkpoint
from slotjudge.train import TrainConfig, split_dataset, train_epochs
from slotjudge.vocab import build_vocabulary
from slotjudge.world import WorldConfig, generate_dependency_set, generate_training_set

sys.path.insert(0, str(Path(__file__).parent))

torch.set_num_threads(1)

CACHE_DIR = Path(__file__).parent / ".cache"


@pytest.fixture(scope="session")
def world_cfg():
    return WorldConfig()


@pytest.fixture(scope="session")
def vocab(world_cfg):
    return build_vocabulary(world_cfg)


@pytest.fixture(scope="session")
def small_model_cfg(vocab):
    return ModelConfig(
        d_model=64, n_layers=2, n_heads=4, d_ff=256, context_len=512,
        vocab_size=vocab.size, seed=0,
    )


@pytest.fixture(scope="session")
def tiny_samples(world_cfg):
    return list(generate_training_set(world_cfg, 64, 7))


def _cached_train(name, vocab, build_samples, model_cfg, train_cfg, quiet=True):
    """Train once per configuration; cache the checkpoint across sessions."""
    CACHE_DIR.mkdir(exist_ok=True)
    path = CACHE_DIR / f"{name}.ckpt"
    if path.exists():
        try:
            return load_checkpoint(path, vocab)
        except Exception:
            path.unlink()
    samples = build_samples()
    model = CausalTransformer(model_cfg)
    train_split, val_split = split_dataset(samples, seed=train_cfg.seed)
    train_epochs(train_split, model, train_cfg, vocab, val_samples=val_split,
                 quiet=quiet)
    save_checkpoint(path, model, vocab)
    return model


# -- session-scoped trained models used by the acceptance suite --------------

MAIN_SEED = 42
MAIN_N_SAMPLES = 150_000
# The one-epoch learning rate for the desk-scale runs. The answer-readout
# task has a sharp phase transition (~1.5k steps at this rate); 1e-4 needs
# far more than one epoch to reach it.
MAIN_LR = 7e-4


@pytest.fixture(scope="session")
def main_dataset(world_cfg):
    return list(generate_training_set(world_cfg, MAIN_N_SAMPLES, MAIN_SEED))


@pytest.fixture(scope="session")
def main_split(main_dataset):
    return split_dataset(main_dataset, seed=0)


@pytest.fixture(scope="session")
def default_model_cfg(vocab):
    return ModelConfig(vocab_size=vocab.size, seed=0)


@pytest.fixture(scope="session")
def trained_main(vocab, main_split, default_model_cfg):
    """Default model, one epoch on the synthetic training split."""
    train_split, val_split = main_split
    CACHE_DIR.mkdir(exist_ok=True)
    path = CACHE_DIR / "main.ckpt"
    if path.exists():
        try:
            return load_checkpoint(path, vocab)
        except Exception:
            path.unlink()
    model = CausalTransformer(default_model_cfg)
    cfg = TrainConfig(learning_rate=MAIN_LR, seed=0, eval_interval=500,
                      eval_subset=256)
    train_epochs(train_split, model, cfg, vocab, val_samples=val_split)
    save_checkpoint(path, model, vocab)
    return model


@pytest.fixture(scope="session")
def trained_dep(vocab, world_cfg, default_model_cfg):
    """Model trained on the dependency mixture (50% dependency samples)."""
    return _cached_train(
        "dep",
        vocab,
        lambda: list(generate_dependency_set(world_cfg, MAIN_N_SAMPLES, 11,
                                             dep_fraction=0.5)),
        default_model_cfg,
        TrainConfig(learning_rate=MAIN_LR, seed=1, eval_interval=10_000),
    )


@pytest.fixture(scope="session")
def short_base(vocab, default_model_cfg):
    """Baseline not adapted to the full template: trained only on short
    two-requirement templates, then evaluated on full-length ones.  Later
    slots fall outside its training distribution (unseen token positions),
    so accuracy decays after the first slot."""
    short_cfg = WorldConfig(properties_low=2, properties_high=2)
    return _cached_train(
        "short_base",
        vocab,
        lambda: list(generate_training_set(short_cfg, 200_000, 5)),
        default_model_cfg,
        TrainConfig(learning_rate=MAIN_LR, seed=2, eval_interval=2_000),
    )


COT_N_SAMPLES = MAIN_N_SAMPLES
COT_SEED = 9
# The reason-supervised run converges on the answer task more slowly than
# the lambda=0 run; compare the pair at convergence rather than mid-climb.
COT_EPOCHS = 2


@pytest.fixture(scope="session")
def cot_dataset(world_cfg):
    return list(generate_training_set(world_cfg, COT_N_SAMPLES, COT_SEED))


@pytest.fixture(scope="session")
def trained_without_cot(vocab, cot_dataset, default_model_cfg):
    return _cached_train(
        "nocot",
        vocab,
        lambda: cot_dataset,
        default_model_cfg,
        TrainConfig(learning_rate=MAIN_LR, seed=3, with_cot=False,
                    epochs=COT_EPOCHS, eval_interval=10_000),
    )


@pytest.fixture(scope="session")
def cot_history(vocab, cot_dataset, default_model_cfg):
    """Trains the post-hoc CoT run once, caching both the checkpoint and the
    reason-loss trajectory (the history is not part of the checkpoint)."""
    import json

    CACHE_DIR.mkdir(exist_ok=True)
    hist_path = CACHE_DIR / "cot_history.json"
    if hist_path.exists() and (CACHE_DIR / "cot.ckpt").exists():
        return json.loads(hist_path.read_text())
    model = CausalTransformer(default_model_cfg)
    cfg = TrainConfig(learning_rate=MAIN_LR, seed=3, with_cot=True,
                      reason_weight=0.55, epochs=COT_EPOCHS,
                      eval_interval=10_000)
    train_split, _ = split_dataset(cot_dataset, seed=cfg.seed)
    history = train_epochs(train_split, model, cfg, vocab, val_samples=None)
    payload = {"reason_losses": history.reason_losses,
               "total_losses": history.total_losses}
    save_checkpoint(CACHE_DIR / "cot.ckpt", model, vocab)
    hist_path.write_text(json.dumps(payload))
    return payload


@pytest.fixture(scope="session")
def trained_with_cot(vocab, cot_history):
    return load_checkpoint(CACHE_DIR / "cot.ckpt", vocab)
