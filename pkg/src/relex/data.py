"""Data model for relation instances, corpus JSONL IO, dependency-tree
features, and embedding-table text IO.

Token indexing is 0-based everywhere, including the file format; the ROOT
head sentinel is -1. Dependency edges are treated as undirected both for the
adjacency target and for the per-token relation multi-hot.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

ROOT = -1

__all__ = [
    "ROOT",
    "CorpusError",
    "Token",
    "DependencyTree",
    "Sentence",
    "RelationInstance",
    "Corpus",
    "EmbeddingTable",
    "adjacency_from_tree",
    "path_flags",
    "dep_relation_multihot",
    "load_corpus",
    "write_corpus",
    "load_embeddings",
    "write_embeddings",
]


class CorpusError(ValueError):
    """Raised for malformed or invariant-violating corpus/embedding data."""


def _check_bio(tags, kind: str) -> None:
    prev = "O"
    for i, tag in enumerate(tags):
        if tag == "O":
            prev = tag
            continue
        if len(tag) < 3 or tag[1] != "-" or tag[0] not in "BI":
            raise CorpusError(f"bad {kind} BIO tag {tag!r} at token {i}")
        if tag[0] == "I":
            if prev == "O" or prev[2:] != tag[2:]:
                raise CorpusError(
                    f"{kind} tag {tag!r} at token {i} does not continue {prev!r}"
                )
        prev = tag


@dataclass(frozen=True)
class Token:
    form: str
    entity_tag: str = "O"
    chunk_tag: str = "O"


@dataclass(frozen=True)
class DependencyTree:
    """Per-token head indices (ROOT = -1) and relation labels."""

    heads: tuple[int, ...]
    rel_labels: tuple[str, ...]

    def __post_init__(self):
        n = len(self.heads)
        if len(self.rel_labels) != n:
            raise CorpusError("heads and rel_labels length mismatch")
        roots = [i for i, h in enumerate(self.heads) if h == ROOT]
        if len(roots) != 1:
            raise CorpusError(f"tree must have exactly one ROOT, got {len(roots)}")
        for i, h in enumerate(self.heads):
            if h == ROOT:
                continue
            if not (0 <= h < n) or h == i:
                raise CorpusError(f"token {i} has invalid head {h}")
        # acyclic + connected: every token must reach ROOT
        for i in range(n):
            seen = 0
            j = i
            while self.heads[j] != ROOT:
                j = self.heads[j]
                seen += 1
                if seen > n:
                    raise CorpusError(f"cycle in dependency tree at token {i}")

    def __len__(self) -> int:
        return len(self.heads)

    @property
    def root(self) -> int:
        return self.heads.index(ROOT)

    def edges(self):
        """Undirected edges as (child, head) pairs with their labels."""
        return [
            (i, h, self.rel_labels[i])
            for i, h in enumerate(self.heads)
            if h != ROOT
        ]


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[Token, ...]
    tree: DependencyTree

    def __post_init__(self):
        if len(self.tokens) < 1:
            raise CorpusError("empty sentence")
        if len(self.tree) != len(self.tokens):
            raise CorpusError(
                f"tree covers {len(self.tree)} tokens, sentence has {len(self.tokens)}"
            )
        _check_bio([t.entity_tag for t in self.tokens], "entity")
        _check_bio([t.chunk_tag for t in self.tokens], "chunk")

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class RelationInstance:
    sentence: Sentence
    s: int
    o: int
    label: str
    domain: str = "generic"

    def __post_init__(self):
        n = len(self.sentence)
        if not (0 <= self.s < n and 0 <= self.o < n):
            raise CorpusError(f"entity index out of range: s={self.s}, o={self.o}, n={n}")
        if self.s == self.o:
            raise CorpusError(f"entity indexes must differ, both are {self.s}")


@dataclass
class Corpus:
    instances: list[RelationInstance]
    labels: tuple[str, ...] = ()
    deprels: tuple[str, ...] = ()
    entity_tags: tuple[str, ...] = ()
    chunk_tags: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.labels:
            self._collect()
        else:
            known = set(self.labels)
            for inst in self.instances:
                if inst.label not in known:
                    raise CorpusError(f"instance label {inst.label!r} not in label set")

    def _collect(self):
        labels, deprels, ents, chunks = set(), set(), set(), set()
        for inst in self.instances:
            labels.add(inst.label)
            deprels.update(inst.sentence.tree.rel_labels)
            for tok in inst.sentence.tokens:
                ents.add(tok.entity_tag)
                chunks.add(tok.chunk_tag)
        self.labels = tuple(sorted(labels))
        self.deprels = tuple(sorted(deprels))
        self.entity_tags = tuple(sorted(ents))
        self.chunk_tags = tuple(sorted(chunks))

    @property
    def size(self) -> int:
        return len(self.instances)

    def domains(self) -> tuple[str, ...]:
        return tuple(sorted({inst.domain for inst in self.instances}))


# ---------------------------------------------------------------------------
# tree-derived features


def adjacency_from_tree(tree: DependencyTree) -> np.ndarray:
    """Symmetric 0/1 edge matrix with zero diagonal; 2(n-1) ones for n >= 2."""
    n = len(tree)
    a = np.zeros((n, n), dtype=np.float64)
    for child, head, _ in tree.edges():
        a[child, head] = 1.0
        a[head, child] = 1.0
    return a


def _neighbors(tree: DependencyTree) -> list[list[int]]:
    adj: list[list[int]] = [[] for _ in range(len(tree))]
    for child, head, _ in tree.edges():
        adj[child].append(head)
        adj[head].append(child)
    return adj


def path_flags(tree: DependencyTree, s: int, o: int) -> np.ndarray:
    """1 for tokens on the undirected tree path from s to o, endpoints included."""
    if s == o:
        raise CorpusError("path endpoints must differ")
    n = len(tree)
    adj = _neighbors(tree)
    parent = [-2] * n
    parent[s] = s
    queue = [s]
    while queue:
        cur = queue.pop(0)
        if cur == o:
            break
        for nxt in adj[cur]:
            if parent[nxt] == -2:
                parent[nxt] = cur
                queue.append(nxt)
    flags = np.zeros(n, dtype=np.float64)
    cur = o
    while True:
        flags[cur] = 1.0
        if cur == s:
            break
        cur = parent[cur]
    return flags


def dep_relation_multihot(tree: DependencyTree, deprel_index: dict[str, int]) -> np.ndarray:
    """Row i is 1 at relation r iff token i is an endpoint of an edge labeled r."""
    n = len(tree)
    out = np.zeros((n, len(deprel_index)), dtype=np.float64)
    for child, head, label in tree.edges():
        if label not in deprel_index:
            raise CorpusError(f"unknown dependency relation label {label!r}")
        col = deprel_index[label]
        out[child, col] = 1.0
        out[head, col] = 1.0
    return out


# ---------------------------------------------------------------------------
# corpus JSONL


_FIELDS = ("tokens", "entity_bio", "chunk_bio", "heads", "deprels", "s", "o", "label")


def _index_from(value, what: str, lineno: int) -> int:
    # an [start, end] span reduces to its last token
    if isinstance(value, list):
        if len(value) != 2 or not all(isinstance(v, int) for v in value):
            raise CorpusError(f"line {lineno}: {what} span must be [start, end]")
        return value[1]
    if isinstance(value, int):
        return value
    raise CorpusError(f"line {lineno}: {what} must be an int or [start, end]")


def instance_from_record(rec: dict, lineno: int = 0) -> RelationInstance:
    for key in _FIELDS:
        if key not in rec:
            raise CorpusError(f"line {lineno}: missing field {key!r}")
    tokens = rec["tokens"]
    n = len(tokens)
    for key in ("entity_bio", "chunk_bio", "heads", "deprels"):
        if len(rec[key]) != n:
            raise CorpusError(
                f"line {lineno}: field {key!r} has length {len(rec[key])}, expected {n}"
            )
    try:
        sent = Sentence(
            tokens=tuple(
                Token(form=f, entity_tag=e, chunk_tag=c)
                for f, e, c in zip(tokens, rec["entity_bio"], rec["chunk_bio"])
            ),
            tree=DependencyTree(tuple(rec["heads"]), tuple(rec["deprels"])),
        )
        return RelationInstance(
            sentence=sent,
            s=_index_from(rec["s"], "s", lineno),
            o=_index_from(rec["o"], "o", lineno),
            label=rec["label"],
            domain=rec.get("domain", "generic"),
        )
    except CorpusError as err:
        raise CorpusError(f"line {lineno}: {err}") from None


def instance_to_record(inst: RelationInstance) -> dict:
    sent = inst.sentence
    return {
        "tokens": [t.form for t in sent.tokens],
        "entity_bio": [t.entity_tag for t in sent.tokens],
        "chunk_bio": [t.chunk_tag for t in sent.tokens],
        "heads": list(sent.tree.heads),
        "deprels": list(sent.tree.rel_labels),
        "s": inst.s,
        "o": inst.o,
        "label": inst.label,
        "domain": inst.domain,
    }


def load_corpus(path) -> Corpus:
    instances = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as err:
                raise CorpusError(f"line {lineno}: invalid JSON ({err.msg})") from None
            instances.append(instance_from_record(rec, lineno))
    return Corpus(instances)


def write_corpus(corpus: Corpus, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for inst in corpus.instances:
            fh.write(json.dumps(instance_to_record(inst)) + "\n")


# ---------------------------------------------------------------------------
# embeddings


@dataclass
class EmbeddingTable:
    vocab: dict[str, int]
    matrix: np.ndarray
    unk: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.unk is None:
            self.unk = np.zeros(self.matrix.shape[1], dtype=self.matrix.dtype)

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def lookup(self, word: str) -> np.ndarray:
        i = self.vocab.get(word)
        return self.matrix[i] if i is not None else self.unk


def load_embeddings(path) -> EmbeddingTable:
    """Text format: header "<count> <dim>", then "<word> v1 ... vdim" lines."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise CorpusError("embedding header must be '<count> <dim>'")
        count, dim = int(header[0]), int(header[1])
        vocab: dict[str, int] = {}
        rows = []
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                raise CorpusError(
                    f"line {lineno}: expected {dim} values, found {len(parts) - 1}"
                )
            word = parts[0]
            if word in vocab:
                raise CorpusError(f"line {lineno}: duplicate word {word!r}")
            vocab[word] = len(rows)
            rows.append([float(v) for v in parts[1:]])
    if len(rows) != count:
        raise CorpusError(f"header declares {count} rows, file has {len(rows)}")
    return EmbeddingTable(vocab=vocab, matrix=np.array(rows, dtype=np.float64))


def write_embeddings(table: EmbeddingTable, path) -> None:
    order = sorted(table.vocab, key=table.vocab.get)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(order)} {table.dim}\n")
        for word in order:
            row = table.matrix[table.vocab[word]]
            fh.write(word + " " + " ".join(repr(float(v)) for v in row) + "\n")
