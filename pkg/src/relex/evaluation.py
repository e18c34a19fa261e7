"""Scoring, the sample-complexity sweep, and cross-domain representation
similarity analysis.

The primary metric is micro-F1 with the None label excluded from credit:
precision counts correct non-None predictions over predicted non-None,
recall over gold non-None. A plain macro-F1 over non-None labels is also
reported as a documented approximation of directed-macro scorers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ModelConfig, Vocab, forward_instance


@dataclass
class LabelScore:
    precision: float
    recall: float
    f1: float
    gold: int
    predicted: int
    correct: int


@dataclass
class ScoreReport:
    micro_precision: float
    micro_recall: float
    micro_f1: float
    macro_f1: float
    none_label: str
    per_label: dict[str, LabelScore] = field(default_factory=dict)
    confusion: dict[tuple[str, str], int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "micro_precision": self.micro_precision,
            "micro_recall": self.micro_recall,
            "micro_f1": self.micro_f1,
            "macro_f1": self.macro_f1,
            "none_label": self.none_label,
            "per_label": {
                k: {
                    "precision": v.precision,
                    "recall": v.recall,
                    "f1": v.f1,
                    "gold": v.gold,
                    "predicted": v.predicted,
                    "correct": v.correct,
                }
                for k, v in sorted(self.per_label.items())
            },
            "confusion": {f"{g}->{p}": c for (g, p), c in sorted(self.confusion.items())},
        }


def _prf(correct: int, predicted: int, gold: int) -> tuple[float, float, float]:
    p = correct / predicted if predicted > 0 else 0.0
    r = correct / gold if gold > 0 else 0.0
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f


def score(preds, golds, none_label: str = "None", label_set=None) -> ScoreReport:
    """Micro/macro P/R/F1 with ``none_label`` excluded from credit."""
    if len(preds) != len(golds):
        raise ValueError(f"{len(preds)} predictions vs {len(golds)} golds")
    if label_set is not None:
        known = set(label_set)
        for lab in list(preds) + list(golds):
            if lab not in known:
                raise ValueError(f"label {lab!r} outside the label set")
    confusion: dict[tuple[str, str], int] = {}
    for p, g in zip(preds, golds):
        confusion[(g, p)] = confusion.get((g, p), 0) + 1

    labels = sorted({l for l in list(preds) + list(golds) if l != none_label})
    per_label = {}
    total_correct = total_pred = total_gold = 0
    macro_sum = 0.0
    for lab in labels:
        gold = sum(1 for g in golds if g == lab)
        predicted = sum(1 for p in preds if p == lab)
        correct = confusion.get((lab, lab), 0)
        p, r, f = _prf(correct, predicted, gold)
        per_label[lab] = LabelScore(p, r, f, gold, predicted, correct)
        total_correct += correct
        total_pred += predicted
        total_gold += gold
        macro_sum += f
    micro_p, micro_r, micro_f = _prf(total_correct, total_pred, total_gold)
    return ScoreReport(
        micro_precision=micro_p,
        micro_recall=micro_r,
        micro_f1=micro_f,
        macro_f1=macro_sum / len(labels) if labels else 0.0,
        none_label=none_label,
        per_label=per_label,
        confusion=confusion,
    )


# ---------------------------------------------------------------------------
# sample-complexity sweep


def subset_for_ratio(corpus, ratio: float, seed: int):
    """Seeded prefix of a one-time shuffle; subsets nest across ratios.

    Selected instances come back in original corpus order, so ratio 1.0 is
    the corpus itself and a sweep at 1.0 reproduces a plain training run.
    """
    if not (0.0 < ratio <= 1.0):
        raise ValueError(f"ratio {ratio} outside (0, 1]")
    count = int(np.floor(ratio * corpus.size))
    if count < 1:
        raise ValueError(f"ratio {ratio} yields zero instances")
    rng = np.random.Generator(np.random.PCG64(seed))
    order = rng.permutation(corpus.size)
    chosen = np.sort(order[:count])
    return [corpus.instances[i] for i in chosen]


def sample_complexity_sweep(
    corpus,
    dev,
    config: ModelConfig,
    tcfg,
    ratios,
    vocab: Vocab | None = None,
    pretrained=None,
) -> list[tuple[float, float]]:
    """Train one model per ratio on nested seeded subsets; report dev F1."""
    from .data import Corpus
    from .synthetic import derive_seed
    from .training import train

    if not ratios:
        raise ValueError("empty ratio list")
    if vocab is None:
        vocab = Vocab.from_corpus(corpus, pretrained)
    rows = []
    for ratio in ratios:
        subset = subset_for_ratio(corpus, ratio, derive_seed(tcfg.seed, "sweep-subset"))
        sub_corpus = Corpus(subset, corpus.labels, corpus.deprels, corpus.entity_tags, corpus.chunk_tags)
        result = train(sub_corpus, dev, config, tcfg, vocab=vocab, pretrained=pretrained)
        rows.append((float(ratio), result.best_f1))
    return rows


# ---------------------------------------------------------------------------
# representation similarity


@dataclass
class DomainSimilarity:
    mean_cosine: float
    pairs_used: int
    pairs_total: int
    excluded_zero_norm: int


@dataclass
class SimilarityReport:
    per_domain: dict[str, DomainSimilarity]
    sample_cap: int

    def to_dict(self) -> dict:
        return {
            "sample_cap": self.sample_cap,
            "per_domain": {
                d: {
                    "mean_cosine": s.mean_cosine,
                    "pairs_used": s.pairs_used,
                    "pairs_total": s.pairs_total,
                    "excluded_zero_norm": s.excluded_zero_norm,
                }
                for d, s in sorted(self.per_domain.items())
            },
        }


def aggregation_vectors(instances, params, config: ModelConfig, vocab: Vocab) -> np.ndarray:
    """Final feature vectors o, one row per instance (inference mode)."""
    rows = [
        forward_instance(inst, params, config, vocab).o_vec.data[0]
        for inst in instances
    ]
    return np.array(rows, dtype=np.float64)


def _normalize(mat: np.ndarray) -> tuple[np.ndarray, int]:
    norms = np.linalg.norm(mat, axis=1)
    keep = norms > 0.0
    excluded = int((~keep).sum())
    return mat[keep] / norms[keep, None], excluded


def mean_cross_cosine(a: np.ndarray, b: np.ndarray, sample_cap: int = 1_000_000, seed: int = 0):
    """Mean cosine over all cross pairs of two row-vector sets.

    Zero-norm rows are excluded (their count is returned); above the cap a
    seeded uniform sample of pairs (with replacement) estimates the mean.
    Returns (mean, pairs_used, pairs_total, excluded).
    """
    a, dropped_a = _normalize(np.asarray(a, dtype=np.float64))
    b, dropped_b = _normalize(np.asarray(b, dtype=np.float64))
    total = a.shape[0] * b.shape[0]
    if total == 0:
        raise ValueError("no usable vectors after zero-norm exclusion")
    if total <= sample_cap:
        return float((a @ b.T).mean()), total, total, dropped_a + dropped_b
    rng = np.random.Generator(np.random.PCG64(seed))
    ai = rng.integers(0, a.shape[0], size=sample_cap)
    bi = rng.integers(0, b.shape[0], size=sample_cap)
    mean = float((a[ai] * b[bi]).sum(axis=1).mean())
    return mean, sample_cap, total, dropped_a + dropped_b


def representation_similarity(
    params,
    config: ModelConfig,
    vocab: Vocab,
    train_instances,
    test_instances,
    sample_cap: int = 1_000_000,
    seed: int = 0,
) -> SimilarityReport:
    """Mean cosine similarity between train-side and test-side aggregation
    vectors over all cross pairs, grouped by test-instance domain. When a
    group exceeds ``sample_cap`` pairs, a seeded uniform sample (with
    replacement) of that many pairs is used instead."""
    if not train_instances or not test_instances:
        raise ValueError("both instance sets must be nonempty")
    train_vecs = aggregation_vectors(train_instances, params, config, vocab)
    by_domain: dict[str, list] = {}
    for inst in test_instances:
        by_domain.setdefault(inst.domain, []).append(inst)

    per_domain = {}
    for domain, insts in sorted(by_domain.items()):
        test_vecs = aggregation_vectors(insts, params, config, vocab)
        mean, used, total, excluded = mean_cross_cosine(
            train_vecs, test_vecs, sample_cap=sample_cap, seed=seed
        )
        per_domain[domain] = DomainSimilarity(
            mean_cosine=mean,
            pairs_used=used,
            pairs_total=total,
            excluded_zero_norm=excluded,
        )
    return SimilarityReport(per_domain=per_domain, sample_cap=sample_cap)
