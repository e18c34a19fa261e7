"""Compare the cumulative ablations and the reduced-feature configuration.

Run:  python demos/04_ablations_and_features.py     (a few minutes)
"""

import numpy as np

from relex import FeatureConfig, ModelConfig, TrainConfig
from relex.synthetic import SynthSpec, derive_seed, generate_synthetic
from relex.training import train

spec = SynthSpec(n_instances=600, len_min=5, len_max=9, trigger_rate=0.85)
train_corpus = generate_synthetic(spec, derive_seed(11, "train"))
dev_corpus = generate_synthetic(
    SynthSpec(n_instances=200, len_min=5, len_max=9, trigger_rate=0.85),
    derive_seed(11, "dev"),
)

features = FeatureConfig(word_dim=24, pos_dim=12, tag_dim=6, chunk_dim=6, clip_window=10)
base = ModelConfig(
    features=features, hidden=24, attn_dim=32, dep_hidden=64, ff_dim=32,
    dtype="float32", lambda_dep=0.05,
)
tcfg = lambda seed: TrainConfig(lr=3e-3, batch_size=25, epochs=16, seed=seed)

print("cumulative ablations (mean dev F1 over seeds 1-3):")
for ablation in ("full", "no_CM", "no_DP_CM", "no_SA_DP_CM"):
    config = base.with_ablation(ablation)
    f1s = [train(train_corpus, dev_corpus, config, tcfg(s)).best_f1 for s in (1, 2, 3)]
    print(f"  {ablation:12s} {np.mean(f1s):.3f}  (seeds: {[round(f, 3) for f in f1s]})")

print("\nwords + positions only (no linguistic features):")
bare = ModelConfig(
    features=features.no_linguistic(), hidden=24, attn_dim=32, dep_hidden=64, ff_dim=32,
    dtype="float32", lambda_dep=0.05,
)
res = train(train_corpus, dev_corpus, bare, tcfg(1))
print(f"  full model, reduced features: dev F1 {res.best_f1:.3f}")
print("  (the on-path flag and relation multi-hot are gone, so the label's")
print("   off-path-marker bit must be inferred; expect a visible drop)")
