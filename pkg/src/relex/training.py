"""Mini-batch Adam training with seeded shuffling, gradient clipping,
best-dev checkpoint retention, and a binary checkpoint format.

A batch is processed as independent per-instance tapes whose gradients are
averaged, so batch loss is the mean over instances and instance order within
a batch only matters up to float reassociation. ``jobs > 1`` computes the
per-instance passes in a thread pool; accumulation stays in instance order.
"""

from __future__ import annotations

import json
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .data import Corpus, EmbeddingTable
from .evaluation import score
from .model import (
    ModelConfig,
    Vocab,
    config_from_dict,
    config_to_dict,
    forward_instance,
    init_params,
    predict_labels,
)
from .synthetic import NONE_LABEL, derive_seed


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    # 0.3 is the documented default learning rate; synthetic-scale runs use 1e-3
    lr: float = 0.3
    batch_size: int = 50
    epochs: int = 30
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float = 5.0
    jobs: int = 1

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def like(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
        )


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    cfg: TrainConfig,
) -> None:
    """One bias-corrected Adam update, in place."""
    state.t += 1
    bc1 = 1.0 - cfg.beta1**state.t
    bc2 = 1.0 - cfg.beta2**state.t
    for name, p in params.items():
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient for parameter {name!r}")
        m = state.m[name]
        v = state.v[name]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * g * g
        p -= cfg.lr * (m / bc1) / (np.sqrt(v / bc2) + cfg.eps)


def clip_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most max_norm."""
    total = float(np.sqrt(sum(float((g.astype(np.float64) ** 2).sum()) for g in grads.values())))
    if max_norm > 0 and total > max_norm:
        factor = max_norm / total
        for g in grads.values():
            g *= factor
    return total


@dataclass
class EpochRecord:
    epoch: int
    loss_label: float
    loss_dep: float
    loss_total: float
    dev_f1: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "epoch": self.epoch,
                "loss_label": self.loss_label,
                "loss_dep": self.loss_dep,
                "loss_total": self.loss_total,
                "dev_f1": self.dev_f1,
            }
        )


@dataclass
class TrainResult:
    params: dict[str, np.ndarray]
    config: ModelConfig
    vocab: Vocab
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_f1: float = 0.0


def _instance_pass(inst, params, config, vocab):
    tape = ad.Tape()
    tensors = {k: ad.Tensor(v, tape) for k, v in params.items()}
    trace = forward_instance(inst, tensors, config, vocab)
    total = float(trace.loss_total.data)
    grads = ad.backward(trace.loss_total, tensors.values())
    by_name = {k: grads[t] for k, t in tensors.items()}
    dep = float(trace.loss_dep.data) if trace.loss_dep is not None else 0.0
    return by_name, float(trace.loss_label.data), dep, total


def train(
    train_corpus: Corpus,
    dev_corpus: Corpus,
    config: ModelConfig,
    tcfg: TrainConfig,
    vocab: Vocab | None = None,
    pretrained: EmbeddingTable | None = None,
    on_epoch=None,
) -> TrainResult:
    """Seeded epochs of shuffled mini-batches; keeps the best dev-micro-F1
    parameters. ``on_epoch`` (if given) receives each EpochRecord as it is
    produced."""
    if train_corpus.size < 1:
        raise TrainingError("empty training corpus")
    if vocab is None:
        vocab = Vocab.from_corpus(train_corpus, pretrained)
    params = init_params(config, vocab, seed=derive_seed(tcfg.seed, "init"), pretrained=pretrained)
    state = AdamState.like(params)
    result = TrainResult(params={k: v.copy() for k, v in params.items()}, config=config, vocab=vocab)
    golds = [inst.label for inst in dev_corpus.instances]

    pool = ThreadPoolExecutor(max_workers=tcfg.jobs) if tcfg.jobs > 1 else None
    try:
        for epoch in range(1, tcfg.epochs + 1):
            rng = np.random.Generator(np.random.PCG64(derive_seed(tcfg.seed, f"shuffle-{epoch}")))
            order = rng.permutation(train_corpus.size)
            sums = np.zeros(3)
            for start in range(0, len(order), tcfg.batch_size):
                batch = [train_corpus.instances[i] for i in order[start : start + tcfg.batch_size]]
                if pool is not None:
                    passes = list(
                        pool.map(lambda i: _instance_pass(i, params, config, vocab), batch)
                    )
                else:
                    passes = [_instance_pass(i, params, config, vocab) for i in batch]
                acc: dict[str, np.ndarray] = {k: np.zeros_like(v) for k, v in params.items()}
                for k_inst, (by_name, l_lab, l_dep, l_tot) in enumerate(passes):
                    if not np.isfinite(l_tot):
                        raise TrainingError(
                            f"non-finite loss at epoch {epoch}, "
                            f"batch {start // tcfg.batch_size}, instance {k_inst}"
                        )
                    for name, g in by_name.items():
                        acc[name] += g
                    sums += (l_lab, l_dep, l_tot)
                inv = 1.0 / len(batch)
                for g in acc.values():
                    g *= inv
                clip_global_norm(acc, tcfg.clip_norm)
                adam_step(params, acc, state, tcfg)

            preds = predict_labels(dev_corpus.instances, params, config, vocab)
            dev_f1 = score(preds, golds, none_label=NONE_LABEL).micro_f1
            rec = EpochRecord(
                epoch=epoch,
                loss_label=sums[0] / train_corpus.size,
                loss_dep=sums[1] / train_corpus.size,
                loss_total=sums[2] / train_corpus.size,
                dev_f1=dev_f1,
            )
            result.records.append(rec)
            if on_epoch is not None:
                on_epoch(rec)
            if dev_f1 > result.best_f1 or result.best_epoch == 0:
                result.best_f1 = dev_f1
                result.best_epoch = epoch
                result.params = {k: v.copy() for k, v in params.items()}
    finally:
        if pool is not None:
            pool.shutdown()
    return result


# ---------------------------------------------------------------------------
# checkpoint container: magic, u64 manifest length, JSON manifest, raw
# little-endian parameter blocks in manifest order


_MAGIC = b"RLXCKPT1"


@dataclass
class Checkpoint:
    params: dict[str, np.ndarray]
    config: ModelConfig
    vocab: Vocab
    meta: dict


def save_checkpoint(path, params, config: ModelConfig, vocab: Vocab, meta: dict | None = None) -> None:
    entries = [
        {"name": k, "shape": list(v.shape), "dtype": str(v.dtype)} for k, v in params.items()
    ]
    manifest = {
        "format_version": 1,
        "params": entries,
        "config": config_to_dict(config),
        "vocab": vocab.to_dict(),
        "meta": meta or {},
    }
    blob = json.dumps(manifest, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for entry in entries:
            arr = params[entry["name"]]
            fh.write(arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes())


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise TrainingError(f"not a checkpoint file (bad magic {magic!r})")
        (length,) = struct.unpack("<Q", fh.read(8))
        manifest = json.loads(fh.read(length).decode("utf-8"))
        params = {}
        for entry in manifest["params"]:
            dtype = np.dtype(entry["dtype"]).newbyteorder("<")
            count = int(np.prod(entry["shape"])) if entry["shape"] else 1
            raw = fh.read(count * dtype.itemsize)
            arr = np.frombuffer(raw, dtype=dtype).reshape(entry["shape"])
            params[entry["name"]] = arr.astype(np.dtype(entry["dtype"]))
    return Checkpoint(
        params=params,
        config=config_from_dict(manifest["config"]),
        vocab=Vocab.from_dict(manifest["vocab"]),
        meta=manifest["meta"],
    )
