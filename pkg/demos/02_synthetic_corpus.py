"""Generate a synthetic corpus and inspect its structure and features.

Run:  python demos/02_synthetic_corpus.py
"""

from collections import Counter

import numpy as np

from relex.data import adjacency_from_tree, dep_relation_multihot, path_flags
from relex.synthetic import SynthSpec, generate_synthetic, oracle_label

spec = SynthSpec(n_instances=500)
corpus = generate_synthetic(spec, seed=7)

print("labels:", Counter(i.label for i in corpus.instances))
print("domains:", corpus.domains())
print("deprel inventory:", corpus.deprels)

inst = corpus.instances[0]
print("\nfirst instance:")
print("  tokens:", [t.form for t in inst.sentence.tokens])
print("  entity BIO:", [t.entity_tag for t in inst.sentence.tokens])
print("  heads:", inst.sentence.tree.heads)
print("  s/o/label:", inst.s, inst.o, inst.label)

flags = path_flags(inst.sentence.tree, inst.s, inst.o)
print("  path flags:", flags.astype(int).tolist())
print("  adjacency:\n", adjacency_from_tree(inst.sentence.tree).astype(int))
idx = {r: k for k, r in enumerate(corpus.deprels)}
print("  relation multi-hot row sums:", dep_relation_multihot(inst.sentence.tree, idx).sum(1).astype(int).tolist())

acc = np.mean([oracle_label(i) == i.label for i in corpus.instances])
print("\nrule-oracle accuracy (should be 1.0):", acc)

shifted = generate_synthetic(spec.shifted(), seed=7)
print("shifted-domain sample lengths:", sorted({len(i.sentence) for i in shifted.instances}))
