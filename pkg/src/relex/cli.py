"""Command-line surface: train, eval, gradcheck, synth, analyze.

Every command takes one --seed that drives all randomness through named
sub-seeds, so reruns with identical flags produce byte-identical primary
outputs; wall-clock time appears only in the run manifest written alongside
each artifact. Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .data import Corpus, load_corpus, load_embeddings, write_corpus
from .diagnostics import model_grad_check, toy_setup
from .encoder import FeatureConfig
from .evaluation import representation_similarity, sample_complexity_sweep, score
from .model import ModelConfig, Vocab, config_from_dict, config_to_dict
from .synthetic import NONE_LABEL, SynthSpec, derive_seed, generate_synthetic
from .training import TrainConfig, load_checkpoint, save_checkpoint, train
from .model import predict_labels


def _write_manifest(path: Path, command: str, args: argparse.Namespace, inputs, outputs, started: float):
    manifest = {
        "command": command,
        "resolved_config": {
            k: v for k, v in sorted(vars(args).items()) if k != "func" and not callable(v)
        },
        "seed": getattr(args, "seed", None),
        "inputs": {k: str(v) for k, v in inputs.items()},
        "outputs": {k: str(v) for k, v in outputs.items()},
        "wall_time_s": time.time() - started,
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")


# ---------------------------------------------------------------------------
# config assembly


def _add_model_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="JSON model config; explicit flags override it")
    p.add_argument("--word-dim", type=int)
    p.add_argument("--pos-dim", type=int)
    p.add_argument("--tag-dim", type=int)
    p.add_argument("--chunk-dim", type=int)
    p.add_argument("--clip-window", type=int)
    p.add_argument("--hidden", type=int)
    p.add_argument("--attn-dim", type=int)
    p.add_argument("--dep-hidden", type=int)
    p.add_argument("--ff-dim", type=int)
    p.add_argument("--lambda", dest="lambda_dep", type=float)
    p.add_argument("--ablation", choices=("full", "no_CM", "no_DP_CM", "no_SA_DP_CM"))
    p.add_argument("--dtype", choices=("float32", "float64"))
    p.add_argument("--dep-nonlinearity", choices=("tanh", "relu"))
    p.add_argument("--scale-attention", action="store_true", default=None)
    p.add_argument("--inner-relu", action="store_true", default=None)
    p.add_argument("--pool-filtered", action="store_true", default=None)
    p.add_argument("--no-entity-tags", action="store_true", default=None)
    p.add_argument("--no-chunk-tags", action="store_true", default=None)
    p.add_argument("--no-path-flag", action="store_true", default=None)
    p.add_argument("--no-deprel", action="store_true", default=None)
    p.add_argument(
        "--no-linguistic",
        action="store_true",
        default=None,
        help="drop entity/chunk tags and both dependency features",
    )


def _model_config(args: argparse.Namespace) -> ModelConfig:
    if args.config is not None:
        config = config_from_dict(json.loads(Path(args.config).read_text()))
    else:
        config = ModelConfig()
    feats = config.features
    f_over = {}
    for flag, name in (
        ("word_dim", "word_dim"),
        ("pos_dim", "pos_dim"),
        ("tag_dim", "tag_dim"),
        ("chunk_dim", "chunk_dim"),
        ("clip_window", "clip_window"),
    ):
        if getattr(args, flag) is not None:
            f_over[name] = getattr(args, flag)
    if args.no_linguistic:
        f_over.update(
            use_entity_tag=False, use_chunk_tag=False, use_path_flag=False, use_deprel=False
        )
    if args.no_entity_tags:
        f_over["use_entity_tag"] = False
    if args.no_chunk_tags:
        f_over["use_chunk_tag"] = False
    if args.no_path_flag:
        f_over["use_path_flag"] = False
    if args.no_deprel:
        f_over["use_deprel"] = False
    if f_over:
        base = {k: getattr(feats, k) for k in feats.__dataclass_fields__}
        base.update(f_over)
        feats = FeatureConfig(**base)

    over = {"features": feats}
    for flag, name in (
        ("hidden", "hidden"),
        ("attn_dim", "attn_dim"),
        ("dep_hidden", "dep_hidden"),
        ("ff_dim", "ff_dim"),
        ("lambda_dep", "lambda_dep"),
        ("dtype", "dtype"),
        ("dep_nonlinearity", "dep_nonlinearity"),
    ):
        if getattr(args, flag) is not None:
            over[name] = getattr(args, flag)
    if args.scale_attention:
        over["scale_attention"] = True
    if args.inner_relu:
        over["classifier_inner_relu"] = True
    if args.pool_filtered:
        over["control_pool_filtered"] = True
    base = {k: getattr(config, k) for k in config.__dataclass_fields__}
    base.update(over)
    config = ModelConfig(**base)
    if args.ablation is not None:
        config = config.with_ablation(args.ablation)
    return config


def _add_train_flags(p: argparse.ArgumentParser):
    p.add_argument("--lr", type=float, default=0.3)
    p.add_argument("--batch", type=int, default=50)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--clip-norm", type=float, default=5.0)
    p.add_argument("--jobs", type=int, default=1)


def _train_config(args: argparse.Namespace) -> TrainConfig:
    return TrainConfig(
        lr=args.lr,
        batch_size=args.batch,
        epochs=args.epochs,
        seed=args.seed,
        clip_norm=args.clip_norm,
        jobs=args.jobs,
    )


# ---------------------------------------------------------------------------
# commands


def cmd_train(args) -> int:
    started = time.time()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    corpus = load_corpus(args.corpus)
    dev = load_corpus(args.dev)
    pretrained = load_embeddings(args.embeddings) if args.embeddings else None
    config = _model_config(args)
    tcfg = _train_config(args)
    vocab = Vocab.from_corpus(corpus, pretrained)

    log_path = out / "log.jsonl"
    ckpt_path = out / "checkpoint.bin"
    with open(log_path, "w", encoding="utf-8") as fh:
        result = train(
            corpus,
            dev,
            config,
            tcfg,
            vocab=vocab,
            pretrained=pretrained,
            on_epoch=lambda rec: fh.write(rec.to_json() + "\n"),
        )
    meta = {
        "epoch": result.best_epoch,
        "dev_f1": result.best_f1,
        "train_config": {
            "lr": tcfg.lr,
            "batch_size": tcfg.batch_size,
            "epochs": tcfg.epochs,
            "seed": tcfg.seed,
            "clip_norm": tcfg.clip_norm,
        },
    }
    save_checkpoint(ckpt_path, result.params, config, vocab, meta)
    _write_manifest(
        out / "manifest.json",
        "train",
        args,
        inputs={"corpus": args.corpus, "dev": args.dev, "embeddings": args.embeddings or ""},
        outputs={"checkpoint": ckpt_path, "log": log_path},
        started=started,
    )
    print(f"best dev F1 {result.best_f1:.4f} at epoch {result.best_epoch}; wrote {ckpt_path}")
    return 0


def _check_compatible(corpus: Corpus, vocab: Vocab):
    problems = []
    for fieldname, have, known in (
        ("labels", corpus.labels, set(vocab.labels)),
        ("entity_tags", corpus.entity_tags, set(vocab.entity_tags)),
        ("chunk_tags", corpus.chunk_tags, set(vocab.chunk_tags)),
        ("deprels", corpus.deprels, set(vocab.deprels)),
    ):
        missing = sorted(set(have) - known)
        if missing:
            problems.append(f"{fieldname}: corpus has {missing} unknown to the checkpoint")
    if problems:
        raise ValueError("checkpoint/corpus mismatch: " + "; ".join(problems))


def cmd_eval(args) -> int:
    started = time.time()
    ckpt = load_checkpoint(args.ckpt)
    corpus = load_corpus(args.corpus)
    instances = corpus.instances
    if args.domain:
        instances = [i for i in instances if i.domain == args.domain]
        if not instances:
            raise ValueError(f"no instances with domain {args.domain!r}")
    _check_compatible(corpus, ckpt.vocab)
    preds = predict_labels(instances, ckpt.params, ckpt.config, ckpt.vocab)
    golds = [i.label for i in instances]
    report = score(preds, golds, none_label=args.none_label, label_set=ckpt.vocab.labels)
    text = json.dumps(report.to_dict(), indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
        _write_manifest(
            Path(args.out).with_suffix(".manifest.json"),
            "eval",
            args,
            inputs={"ckpt": args.ckpt, "corpus": args.corpus},
            outputs={"report": args.out},
            started=started,
        )
    else:
        print(text)
    return 0


def cmd_gradcheck(args) -> int:
    config = None
    if args.ablation is not None:
        _, _, config = toy_setup()
        config = config.with_ablation(args.ablation)
    report = model_grad_check(config=config, seed=args.seed, tol=args.tol, step=args.step)
    for line in report.lines():
        print(line)
    n_fail = sum(0 if g.passed(report.tol) else 1 for g in report.groups.values())
    print(
        f"{'PASS' if report.passed else 'FAIL'}: {len(report.groups) - n_fail}"
        f"/{len(report.groups)} parameter groups within tol {report.tol:g}"
    )
    return 0 if report.passed else 1


def cmd_synth(args) -> int:
    started = time.time()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    base = SynthSpec(
        n_instances=args.n,
        len_min=args.len_min,
        len_max=args.len_max,
        n_fillers=args.vocab,
        label_mode=args.label_mode,
    )
    splits = {
        "train": (base, derive_seed(args.seed, "train")),
        "dev": (
            SynthSpec(**{**_spec_dict(base), "n_instances": args.n_dev}),
            derive_seed(args.seed, "dev"),
        ),
    }
    test_spec = SynthSpec(**{**_spec_dict(base), "n_instances": args.n_test})
    if args.shift:
        test_spec = test_spec.shifted()
    splits["test"] = (test_spec, derive_seed(args.seed, "test"))

    outputs = {}
    for name, (spec, seed) in splits.items():
        corpus = generate_synthetic(spec, seed)
        path = out / f"{name}.jsonl"
        write_corpus(corpus, path)
        outputs[name] = path
    _write_manifest(
        out / "manifest.json",
        "synth",
        args,
        inputs={},
        outputs={**outputs, "specs": json.dumps({k: _spec_dict(v[0]) for k, v in splits.items()}, sort_keys=True)},
        started=started,
    )
    print(f"wrote {', '.join(str(p) for p in outputs.values())}")
    return 0


def _spec_dict(spec: SynthSpec) -> dict:
    return {k: getattr(spec, k) for k in spec.__dataclass_fields__}


def cmd_analyze(args) -> int:
    started = time.time()
    if args.mode == "similarity":
        ckpt = load_checkpoint(args.ckpt)
        train_corpus = load_corpus(args.train)
        test_corpus = load_corpus(args.test)
        report = representation_similarity(
            ckpt.params,
            ckpt.config,
            ckpt.vocab,
            train_corpus.instances,
            test_corpus.instances,
            sample_cap=args.cap,
            seed=args.seed,
        )
        text = json.dumps(report.to_dict(), indent=2, sort_keys=True)
        if args.out:
            Path(args.out).write_text(text + "\n")
            _write_manifest(
                Path(args.out).with_suffix(".manifest.json"),
                "analyze similarity",
                args,
                inputs={"ckpt": args.ckpt, "train": args.train, "test": args.test},
                outputs={"report": args.out},
                started=started,
            )
        else:
            print(text)
        return 0

    # sweep
    ratios = args.ratios
    corpus = load_corpus(args.corpus)
    dev = load_corpus(args.dev)
    config = _model_config(args)
    tcfg = _train_config(args)
    rows = sample_complexity_sweep(corpus, dev, config, tcfg, ratios)
    lines = ["ratio,f1"] + [f"{r},{f1}" for r, f1 in rows]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        _write_manifest(
            Path(args.out).with_suffix(".manifest.json"),
            "analyze sweep",
            args,
            inputs={"corpus": args.corpus, "dev": args.dev},
            outputs={"csv": args.out},
            started=started,
        )
    else:
        print(text, end="")
    return 0


# ---------------------------------------------------------------------------


def _ratio_list(text: str) -> list[float]:
    ratios = [float(r) for r in text.split(",") if r.strip()]
    if not ratios:
        raise argparse.ArgumentTypeError("empty ratio list")
    return ratios


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relex",
        description="Relation extraction with joint dependency-edge prediction "
        "and entity-conditioned gating.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and write checkpoint + log")
    p.add_argument("--corpus", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--embeddings")
    _add_train_flags(p)
    _add_model_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on a corpus")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--domain", help="restrict to instances with this domain field")
    p.add_argument("--none-label", default=NONE_LABEL)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference check of every parameter group")
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--step", type=float, default=1e-5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ablation", choices=("full", "no_CM", "no_DP_CM", "no_SA_DP_CM"))
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("synth", help="generate synthetic train/dev/test corpora")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=2000, help="training instances")
    p.add_argument("--n-dev", type=int, default=500)
    p.add_argument("--n-test", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--len-min", type=int, default=6)
    p.add_argument("--len-max", type=int, default=10)
    p.add_argument("--vocab", type=int, default=60, help="filler vocabulary size")
    p.add_argument(
        "--label-mode", choices=("subject", "pair"), default="subject",
        help="label rule: subject-mention type, or type agreement of the pair",
    )
    p.add_argument("--shift", action="store_true", help="domain-shifted test split")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("analyze", help="representation similarity / sample-complexity sweep")
    asub = p.add_subparsers(dest="mode", required=True)

    ps = asub.add_parser("similarity")
    ps.add_argument("--ckpt", required=True)
    ps.add_argument("--train", required=True)
    ps.add_argument("--test", required=True)
    ps.add_argument("--cap", type=int, default=1_000_000)
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--out")
    ps.set_defaults(func=cmd_analyze, mode="similarity")

    pw = asub.add_parser("sweep")
    pw.add_argument("--corpus", required=True)
    pw.add_argument("--dev", required=True)
    pw.add_argument(
        "--ratios", required=True, type=_ratio_list,
        help="comma-separated, e.g. 0.1,0.5,1.0",
    )
    pw.add_argument("--out")
    _add_train_flags(pw)
    _add_model_flags(pw)
    pw.set_defaults(func=cmd_analyze, mode="sweep")

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        return 1
    except Exception as err:  # runtime failure -> exit 1 with a message
        print(f"relex: error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
