"""Command-line entry points.

Subcommands: ``noise`` (fivefold corpus augmentation), ``attack``
(adversarial test-set construction), ``train`` (pretrain or fine-tune),
``distill`` (teacher-student fine-tuning), ``translate`` (beam decoding),
``score`` (edit-based P/R/F0.5), ``experiment`` (the full pipeline).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from .attacker import AttackConfig, build_attack_set
from .distill import DistillConfig, distill_train
from .model import (
    BeamConfig,
    TrainConfig,
    TransformerModel,
    decode_corpus,
    encode_corpus,
    fit,
    load_checkpoint,
    save_checkpoint,
)
from .noiser import NoiseResources, augment_fivefold
from .pipeline import (
    ArchSpec,
    ExperimentConfig,
    StageError,
    count_parameters,
    run_pipeline,
)
from .scorer import corpus_score, parse_m2, write_m2
from .textcore import EOS_ID, Vocab, load_corpus, load_sentences, write_corpus, write_sentences


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--peak-lr", type=float, default=1e-3)
    p.add_argument("--warmup-steps", type=int, default=400)
    p.add_argument("--lr-schedule", choices=("warmup_isqrt", "flat"), default="warmup_isqrt")
    p.add_argument("--flat-lr", type=float, default=1e-7)
    p.add_argument("--seed", type=int, default=0)


def _train_config(args: argparse.Namespace) -> TrainConfig:
    return TrainConfig(
        batch_size=args.batch_size,
        epochs=args.epochs,
        lr_schedule=args.lr_schedule,
        peak_lr=args.peak_lr,
        warmup_steps=args.warmup_steps,
        flat_lr=args.flat_lr,
    )


def _load_model_and_vocab(path: str) -> tuple[TransformerModel, Vocab]:
    model, _ = load_checkpoint(path)
    return model, Vocab.load(Path(path) / "vocab.txt")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geckit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("noise", help="fivefold-replicate a corpus with injected errors")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--rate", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resources", required=True)
    p.add_argument("--audit", help="write a JSON-lines audit log here")

    p = sub.add_parser("attack", help="build an adversarial test set")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--gold-out", required=True)
    p.add_argument("--proportion", type=float, default=0.3)
    p.add_argument("--granularity-mix", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resources", required=True)
    p.add_argument("--records", help="write attack records (JSON lines) here")

    p = sub.add_parser("train", help="train a model on a parallel corpus")
    p.add_argument("--train", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--init", help="checkpoint to fine-tune from")
    p.add_argument("--vocab", help="vocab file (defaults to the init checkpoint's)")
    p.add_argument("--d-model", type=int, default=64)
    p.add_argument("--n-heads", type=int, default=4)
    p.add_argument("--d-ff", type=int, default=256)
    p.add_argument("--n-layers", type=int, default=2)
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--max-seq-len", type=int, default=64)
    p.add_argument("--dtype", choices=("float32", "float64"), default="float32")
    _add_train_flags(p)

    p = sub.add_parser("distill", help="fine-tune a student against a frozen teacher")
    p.add_argument("--teacher", required=True)
    p.add_argument("--student", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--dev")
    p.add_argument("--out", required=True)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--temperature", type=float, default=4.0)
    p.add_argument("--soft-scale", type=float, default=1.0)
    p.add_argument("--delta-epoch", type=int, default=10)
    p.add_argument("--beam", type=int, default=1, help="beam width for dev evaluation")
    p.add_argument("--max-decode-len", type=int, default=32)
    _add_train_flags(p)

    p = sub.add_parser("translate", help="decode sources with beam search")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--beam", type=int, default=5)
    p.add_argument("--max-decode-len", type=int, default=32)
    p.add_argument("--length-penalty", type=float, default=0.0)

    p = sub.add_parser("score", help="edit-based P/R/F0.5 of hypotheses")
    p.add_argument("--src", required=True)
    p.add_argument("--hyp", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--report", help="write the JSON report here")

    p = sub.add_parser("experiment", help="run the full pipeline")
    p.add_argument("--config", help="JSON experiment configuration")
    p.add_argument("--out-dir", help="overrides the configured output directory")
    p.add_argument("--seeds", help="comma-separated run seeds, overriding the config")
    p.add_argument("--resume", action="store_true")
    p.add_argument("--no-attack", action="store_true")
    return parser


def _cmd_noise(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.input)
    resources = NoiseResources.load(args.resources)
    noised, audit = augment_fivefold(corpus, args.rate, args.seed, resources)
    write_corpus(noised, args.out)
    if args.audit:
        with open(args.audit, "w", encoding="utf-8") as fh:
            for record in audit:
                fh.write(json.dumps(record, sort_keys=True) + "\n")
    print(f"wrote {len(noised)} pairs to {args.out}")
    return 0


def _cmd_attack(args: argparse.Namespace) -> int:
    pairs = load_corpus(args.input)
    _, gold = parse_m2(args.gold)
    cfg = AttackConfig(
        proportion=args.proportion, granularity_mix=args.granularity_mix, seed=args.seed
    )
    attacked, projected, records = build_attack_set(
        pairs, gold, cfg, NoiseResources.load(args.resources)
    )
    write_corpus(attacked, args.out)
    write_m2([list(p.source) for p in attacked], projected, args.gold_out)
    if args.records:
        with open(args.records, "w", encoding="utf-8") as fh:
            for record in records:
                fh.write(json.dumps(record.as_dict(), sort_keys=True) + "\n")
    print(f"attacked {len(records)} of {len(pairs)} sentences")
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    pairs = load_corpus(args.train)
    if args.init:
        model, _ = load_checkpoint(args.init)
        vocab = Vocab.load(args.vocab) if args.vocab else Vocab.load(Path(args.init) / "vocab.txt")
    else:
        vocab = Vocab.load(args.vocab) if args.vocab else Vocab.build(pairs)
        arch = ArchSpec(
            d_model=args.d_model, n_heads=args.n_heads, d_ff=args.d_ff,
            n_layers=args.n_layers, dropout_rate=args.dropout,
            max_seq_len=args.max_seq_len, param_dtype=args.dtype,
        )
        model = TransformerModel(arch.model_config(len(vocab)), rng=np.random.default_rng(args.seed))
    losses = fit(model, encode_corpus(pairs, vocab), _train_config(args), args.seed)
    save_checkpoint(model, args.out, seed=args.seed, step=len(losses))
    vocab.save(Path(args.out) / "vocab.txt")
    print(
        f"trained {count_parameters(model):,} parameters for {len(losses)} steps; "
        f"final loss {losses[-1]:.4f}" if losses else "no training steps ran"
    )
    return 0


def _cmd_distill(args: argparse.Namespace) -> int:
    teacher, teacher_vocab = _load_model_and_vocab(args.teacher)
    student, vocab = _load_model_and_vocab(args.student)
    if teacher_vocab.tokens != vocab.tokens:
        print("error: teacher and student vocabularies differ", file=sys.stderr)
        return 2
    pairs = load_corpus(args.train)
    evaluator = None
    if args.dev:
        dev_pairs = load_corpus(args.dev)
        dev_sources = [list(p.source) for p in dev_pairs]
        from .toytask import derive_gold_edits

        dev_gold = derive_gold_edits(dev_pairs)
        beam = BeamConfig(beam_size=args.beam, max_decode_len=args.max_decode_len)

        def evaluator(model: TransformerModel) -> float:
            ids = [vocab.encode(src) + [EOS_ID] for src in dev_sources]
            hyps = [vocab.decode(seq) for seq in decode_corpus(model, ids, beam)]
            return corpus_score(dev_sources, hyps, dev_gold).f05

    distill_cfg = DistillConfig(
        alpha=args.alpha, temperature=args.temperature, soft_scale=args.soft_scale
    )
    losses, series = distill_train(
        teacher, student, encode_corpus(pairs, vocab), _train_config(args),
        distill_cfg, args.seed, evaluator=evaluator, delta_epoch=args.delta_epoch,
    )
    save_checkpoint(student, args.out, seed=args.seed, step=len(losses))
    vocab.save(Path(args.out) / "vocab.txt")
    if series.checkpoints:
        (Path(args.out) / "convergence.csv").write_text(series.to_csv(), encoding="utf-8")
    print(f"distilled for {len(losses)} steps; final loss {losses[-1]:.4f}")
    return 0


def _cmd_translate(args: argparse.Namespace) -> int:
    model, vocab = _load_model_and_vocab(args.model)
    sources = load_sentences(args.input)
    if any(not s for s in sources):
        print("error: empty source line in input", file=sys.stderr)
        return 2
    cfg = BeamConfig(
        beam_size=args.beam, max_decode_len=args.max_decode_len,
        length_penalty=args.length_penalty,
    )
    ids = [vocab.encode(src) + [EOS_ID] for src in sources]
    hyps = [vocab.decode(seq) for seq in decode_corpus(model, ids, cfg)]
    write_sentences(hyps, args.out)
    print(f"decoded {len(hyps)} sentences to {args.out}")
    return 0


def _cmd_score(args: argparse.Namespace) -> int:
    gold_sources, gold_sets = parse_m2(args.gold)
    src_path = Path(args.src)
    if src_path.suffix == ".tsv":
        sources = [list(p.source) for p in load_corpus(src_path)]
    else:
        sources = load_sentences(src_path)
    if sources != gold_sources:
        print("warning: source file differs from gold sources; using gold", file=sys.stderr)
        sources = gold_sources
    hypotheses = load_sentences(args.hyp)
    report = corpus_score(sources, hypotheses, gold_sets)
    print(report.format_table())
    if args.report:
        Path(args.report).write_text(
            json.dumps(report.as_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    return 0


def _cmd_experiment(args: argparse.Namespace) -> int:
    if args.config:
        cfg = ExperimentConfig.load(args.config)
    else:
        if not args.out_dir:
            print("error: --out-dir is required without --config", file=sys.stderr)
            return 2
        cfg = ExperimentConfig(out_dir=args.out_dir)
    overrides = {}
    if args.out_dir:
        overrides["out_dir"] = args.out_dir
    if args.seeds:
        overrides["seeds"] = tuple(int(s) for s in args.seeds.split(","))
    if args.resume:
        overrides["resume"] = True
    if args.no_attack:
        overrides["run_attack_stage"] = False
    if overrides:
        cfg = replace(cfg, **overrides)
    report = run_pipeline(cfg)
    print(report.format_tables())
    print(f"report written to {Path(cfg.out_dir) / 'report.json'}")
    return 0


_COMMANDS = {
    "noise": _cmd_noise,
    "attack": _cmd_attack,
    "train": _cmd_train,
    "distill": _cmd_distill,
    "translate": _cmd_translate,
    "score": _cmd_score,
    "experiment": _cmd_experiment,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
