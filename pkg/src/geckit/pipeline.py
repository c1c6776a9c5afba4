"""End-to-end experiment driver.

Stages: generate (or load) corpora -> fivefold-noise the external corpus
-> pretrain teacher and student -> fine-tune the teacher, fine-tune a
baseline student, and distill a student from the teacher -> build a
per-seed attack test set -> decode and score every model on the standard
and attacked sets -> average over seeds and render report tables.

Every stage writes a ``stage.json`` manifest recording its parameters
and the content hashes of inputs and outputs; reruns with ``resume``
skip stages whose manifests still match. All randomness derives from
the configured seeds, so identical configurations produce byte-identical
reports.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import textcore
from .attacker import AttackConfig, build_attack_set
from .distill import ConvergenceSeries, DistillConfig, convergence_rate, distill_train
from .model import (
    BeamConfig,
    ModelConfig,
    TrainConfig,
    TransformerModel,
    decode_corpus,
    encode_corpus,
    fit,
    load_checkpoint,
    save_checkpoint,
)
from .noiser import NoiseResources, augment_fivefold
from .scorer import GoldEditSet, ScoreReport, corpus_score, parse_m2, write_m2
from .textcore import ParallelPair, Vocab, load_corpus, write_corpus
from .toytask import ToyTaskConfig, build_corpora, derive_gold_edits, toy_resources

MODEL_ROLES = ("teacher", "student-baseline", "student-distilled")


# ---------------------------------------------------------------------------
# Parameter accounting
# ---------------------------------------------------------------------------

def count_parameters(model: TransformerModel) -> int:
    """Exact number of trainable scalar parameters in a model."""
    return int(sum(t.data.size for t in model.params.values()))


def config_parameter_count(cfg: ModelConfig) -> int:
    """Closed-form parameter count for a configuration (no tensors built)."""
    return _non_embedding_parameters(cfg) + cfg.vocab_size * _vocab_coefficient(cfg)


def _non_embedding_parameters(cfg: ModelConfig) -> int:
    d, dff = cfg.d_model, cfg.d_ff
    attention = 4 * d * d + 4 * d
    layer_norm = 2 * d
    ffn = 2 * d * dff + dff + d
    encoder_layer = attention + 2 * layer_norm + ffn
    decoder_layer = 2 * attention + 3 * layer_norm + ffn
    return cfg.n_layers * (encoder_layer + decoder_layer)


def _vocab_coefficient(cfg: ModelConfig) -> int:
    # shared embedding table, plus an untied output projection with bias
    return cfg.d_model if cfg.tie_embeddings else 2 * cfg.d_model + 1


def solve_vocab_size(cfg: ModelConfig, target_total: int) -> int:
    """Back-solve the vocabulary size that makes a configuration hit an
    exact total parameter count; raises when no integer solution exists."""
    remainder = target_total - _non_embedding_parameters(cfg)
    coeff = _vocab_coefficient(cfg)
    if remainder <= 0 or remainder % coeff:
        raise ValueError(
            f"no integer vocabulary reaches {target_total} with this configuration"
        )
    return remainder // coeff


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ArchSpec:
    """Architecture knobs; the vocabulary size is filled in at train time."""

    d_model: int
    n_heads: int
    d_ff: int
    n_layers: int
    dropout_rate: float = 0.1
    max_seq_len: int = 24
    tie_embeddings: bool = False
    param_dtype: str = "float32"

    def model_config(self, vocab_size: int) -> ModelConfig:
        return ModelConfig(vocab_size=vocab_size, **asdict(self))


STUDENT_ARCH = ArchSpec(d_model=64, n_heads=4, d_ff=256, n_layers=2)
TEACHER_ARCH = ArchSpec(d_model=128, n_heads=4, d_ff=512, n_layers=2)


@dataclass(frozen=True)
class ExperimentConfig:
    out_dir: str
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    data_dir: str | None = None  # pre-existing corpora; None generates the toy task
    toy: ToyTaskConfig = field(default_factory=ToyTaskConfig)
    teacher_arch: ArchSpec = TEACHER_ARCH
    student_arch: ArchSpec = STUDENT_ARCH
    pretrain: TrainConfig = TrainConfig(batch_size=32, epochs=3, peak_lr=1e-3, warmup_steps=120)
    finetune: TrainConfig = TrainConfig(batch_size=32, epochs=20, peak_lr=7e-4, warmup_steps=80)
    distill: DistillConfig = field(default_factory=DistillConfig)
    delta_epoch: int = 10
    augment_noise_rate: float = 0.1
    augment_seed: int = 777
    attack_proportion: float = 0.3
    attack_granularity_mix: float = 0.5
    beam_size: int = 5
    max_decode_len: int = 16
    run_attack_stage: bool = True
    resume: bool = False

    def __post_init__(self) -> None:
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.data_dir is not None and not Path(self.data_dir).is_dir():
            raise ValueError(f"data_dir {self.data_dir} does not exist")
        if self.finetune.epochs % self.delta_epoch:
            raise ValueError("finetune epochs must be a multiple of delta_epoch")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        kwargs = dict(raw)
        for key, sub in (
            ("toy", ToyTaskConfig),
            ("teacher_arch", ArchSpec),
            ("student_arch", ArchSpec),
            ("pretrain", TrainConfig),
            ("finetune", TrainConfig),
            ("distill", DistillConfig),
        ):
            if key in kwargs and isinstance(kwargs[key], dict):
                kwargs[key] = sub(**kwargs[key])
        if "seeds" in kwargs:
            kwargs["seeds"] = tuple(kwargs["seeds"])
        return cls(**kwargs)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def derive_seed(master: int, tag: int) -> int:
    """Stable per-stage seed derivation."""
    return int(np.random.SeedSequence(master, spawn_key=(tag,)).generate_state(1)[0])


_ATTACK_TAG = 11


# ---------------------------------------------------------------------------
# Stage bookkeeping
# ---------------------------------------------------------------------------

class StageError(RuntimeError):
    def __init__(self, stage: str, manifest: Path, cause: BaseException):
        super().__init__(f"stage {stage!r} failed ({cause}); manifest: {manifest}")
        self.stage = stage
        self.manifest = manifest


def file_sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _hash_tree(paths: Sequence[Path], root: Path) -> dict[str, str]:
    out = {}
    for p in sorted(paths):
        files = sorted(q for q in p.rglob("*") if q.is_file()) if p.is_dir() else [p]
        for f in files:
            out[str(f.relative_to(root))] = file_sha256(f)
    return out


class StageRunner:
    """Runs stages under a root directory, skipping satisfied ones."""

    def __init__(self, root: Path, resume: bool):
        self.root = root
        self.resume = resume

    def run(
        self,
        name: str,
        params: dict,
        inputs: Sequence[Path],
        outputs: Sequence[Path],
        action: Callable[[], None],
    ) -> None:
        stage_dir = self.root / name
        manifest_path = stage_dir / "stage.json"
        try:
            input_hashes = _hash_tree(inputs, self.root)
            if self.resume and manifest_path.exists():
                recorded = json.loads(manifest_path.read_text(encoding="utf-8"))
                if (
                    recorded.get("params") == json.loads(json.dumps(params))
                    and recorded.get("inputs") == input_hashes
                    and all(Path(self.root / rel).exists() for rel in recorded.get("outputs", {}))
                    and recorded.get("outputs")
                    == _hash_tree([self.root / rel for rel in recorded.get("outputs", {})], self.root)
                ):
                    return
            stage_dir.mkdir(parents=True, exist_ok=True)
            action()
            manifest = {
                "stage": name,
                "params": params,
                "inputs": input_hashes,
                "outputs": _hash_tree(outputs, self.root),
            }
            manifest_path.write_text(
                json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
            )
        except StageError:
            raise
        except BaseException as exc:
            raise StageError(name, manifest_path, exc) from exc


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------

@dataclass
class ExperimentReport:
    """Seed-averaged scores plus per-seed detail for three model roles."""

    models: dict
    convergence: dict
    seeds: list[int]
    config: dict

    def as_dict(self) -> dict:
        return {
            "models": self.models,
            "convergence": self.convergence,
            "seeds": self.seeds,
            "config": self.config,
        }

    def format_tables(self) -> str:
        lines = ["== Performance (standard test set, x100) =="]
        header = f"{'model':<20}{'params':>12}{'P':>8}{'R':>8}{'F0.5':>8}"
        lines.append(header)
        for role in MODEL_ROLES:
            m = self.models[role]
            s = m["mean"]
            lines.append(
                f"{role:<20}{m['parameters']:>12,}"
                f"{100 * s['precision']:>8.2f}{100 * s['recall']:>8.2f}{100 * s['f05']:>8.2f}"
            )
        if all("attack_f05" in self.models[r]["mean"] for r in MODEL_ROLES):
            lines.append("")
            lines.append("== Robustness (x100) ==")
            lines.append(
                f"{'model':<20}{'standard':>10}{'attacked':>10}{'delta':>8}"
            )
            for role in MODEL_ROLES:
                s = self.models[role]["mean"]
                lines.append(
                    f"{role:<20}{100 * s['f05']:>10.2f}"
                    f"{100 * s['attack_f05']:>10.2f}{100 * s['delta_f05']:>8.2f}"
                )
        lines.append("")
        lines.append("== Convergence rate (dev F0.5 x100 per epoch) ==")
        windows = self.convergence["windows"]
        lines.append(f"{'model':<20}" + "".join(f"{w:>10}" for w in windows))
        for role in MODEL_ROLES:
            vs = self.convergence["models"][role]["mean_v"]
            lines.append(f"{role:<20}" + "".join(f"{100 * v:>10.2f}" for v in vs))
        lines.append("")
        return "\n".join(lines)


def _write_gold(pairs: list[ParallelPair], path: Path) -> None:
    write_m2([list(p.source) for p in pairs], derive_gold_edits(pairs), path)


def _stage_data(cfg: ExperimentConfig, runner: StageRunner, root: Path) -> None:
    data_dir = root / "data"

    def action() -> None:
        data_dir.mkdir(parents=True, exist_ok=True)
        if cfg.data_dir is not None:
            src = Path(cfg.data_dir)
            for name in ("external.tsv", "train.tsv", "dev.tsv", "test.tsv"):
                (data_dir / name).write_bytes((src / name).read_bytes())
            resources = NoiseResources.load(src / "resources")
            resources.save(data_dir / "resources")
            for split in ("dev", "test"):
                given = src / f"{split}.m2"
                if given.exists():
                    (data_dir / f"{split}.m2").write_bytes(given.read_bytes())
                else:
                    _write_gold(load_corpus(data_dir / f"{split}.tsv"), data_dir / f"{split}.m2")
            return
        data = build_corpora(cfg.toy)
        toy_resources().save(data_dir / "resources")
        write_corpus(data.external, data_dir / "external.tsv")
        write_corpus(data.train, data_dir / "train.tsv")
        write_corpus(data.dev, data_dir / "dev.tsv")
        write_corpus(data.test, data_dir / "test.tsv")
        _write_gold(data.dev, data_dir / "dev.m2")
        _write_gold(data.test, data_dir / "test.m2")

    outputs = [data_dir / n for n in (
        "external.tsv", "train.tsv", "dev.tsv", "test.tsv", "dev.m2", "test.m2", "resources",
    )]
    runner.run(
        "data",
        {"toy": asdict(cfg.toy), "data_dir": cfg.data_dir},
        inputs=[],
        outputs=outputs,
        action=action,
    )


def _stage_augment(cfg: ExperimentConfig, runner: StageRunner, root: Path) -> None:
    data_dir = root / "data"
    aug_dir = root / "augment"

    def action() -> None:
        external = load_corpus(data_dir / "external.tsv")
        resources = NoiseResources.load(data_dir / "resources")
        noised, audit = augment_fivefold(external, cfg.augment_noise_rate, cfg.augment_seed, resources)
        write_corpus(noised, aug_dir / "pretrain.tsv")
        with open(aug_dir / "audit.jsonl", "w", encoding="utf-8") as fh:
            for record in audit:
                fh.write(json.dumps(record, sort_keys=True) + "\n")
        vocab = Vocab.build(noised + load_corpus(data_dir / "train.tsv"))
        vocab.save(aug_dir / "vocab.txt")

    runner.run(
        "augment",
        {"rate": cfg.augment_noise_rate, "seed": cfg.augment_seed},
        inputs=[data_dir / "external.tsv", data_dir / "train.tsv", data_dir / "resources"],
        outputs=[aug_dir / "pretrain.tsv", aug_dir / "audit.jsonl", aug_dir / "vocab.txt"],
        action=action,
    )


class _SeedContext:
    """Everything one seed's stages share: corpora, vocab, evaluators."""

    def __init__(self, cfg: ExperimentConfig, root: Path, seed: int):
        self.cfg = cfg
        self.root = root
        self.seed = seed
        self.dir = root / f"seed_{seed}"
        data = root / "data"
        self.vocab = Vocab.load(root / "augment" / "vocab.txt")
        self.pretrain_corpus = encode_corpus(load_corpus(root / "augment" / "pretrain.tsv"), self.vocab)
        self.train_corpus = encode_corpus(load_corpus(data / "train.tsv"), self.vocab)
        self.dev_pairs = load_corpus(data / "dev.tsv")
        dev_sources, self.dev_gold = parse_m2(data / "dev.m2")
        self.dev_sources = dev_sources
        self.test_pairs = load_corpus(data / "test.tsv")
        test_sources, self.test_gold = parse_m2(data / "test.m2")
        self.test_sources = test_sources

    def dev_evaluator(self) -> Callable[[TransformerModel], float]:
        ids = [self.vocab.encode(src) + [textcore.EOS_ID] for src in self.dev_sources]
        greedy = BeamConfig(beam_size=1, max_decode_len=self.cfg.max_decode_len)

        def evaluate(model: TransformerModel) -> float:
            decoded = decode_corpus(model, ids, greedy)
            hyps = [self.vocab.decode(seq) for seq in decoded]
            return corpus_score(self.dev_sources, hyps, self.dev_gold).f05

        return evaluate

    def score_model(
        self, model: TransformerModel, sources: list[list[str]], gold: list[GoldEditSet]
    ) -> ScoreReport:
        ids = [self.vocab.encode(src) + [textcore.EOS_ID] for src in sources]
        beam = BeamConfig(beam_size=self.cfg.beam_size, max_decode_len=self.cfg.max_decode_len)
        decoded = decode_corpus(model, ids, beam)
        hyps = [self.vocab.decode(seq) for seq in decoded]
        return corpus_score(sources, hyps, gold)


def _train_stage(
    ctx: _SeedContext,
    runner: StageRunner,
    name: str,
    arch: ArchSpec,
    corpus,
    train_cfg: TrainConfig,
    seed_tag: int,
    init_from: Path | None = None,
    teacher_from: Path | None = None,
    with_convergence: bool = False,
) -> Path:
    cfg = ctx.cfg
    out = ctx.dir / name
    stage_name = f"seed_{ctx.seed}/{name}"
    inputs = [p for p in (init_from, teacher_from) if p is not None]
    inputs.append(ctx.root / "augment" / "vocab.txt")

    def action() -> None:
        seed = derive_seed(ctx.seed, seed_tag)
        if init_from is not None:
            model, _ = load_checkpoint(init_from)
        else:
            model = TransformerModel(
                arch.model_config(len(ctx.vocab)), rng=np.random.default_rng(seed)
            )
        evaluator = ctx.dev_evaluator() if with_convergence else None
        if teacher_from is not None:
            teacher, _ = load_checkpoint(teacher_from)
            _, series = distill_train(
                teacher, model, corpus, train_cfg, cfg.distill, seed,
                evaluator=evaluator, delta_epoch=cfg.delta_epoch,
            )
        elif with_convergence:
            series = ConvergenceSeries(delta_epoch=cfg.delta_epoch)

            def callback(epoch: int, m: TransformerModel) -> None:
                if epoch % cfg.delta_epoch == 0:
                    series.append(epoch, evaluator(m))

            fit(model, corpus, train_cfg, seed, epoch_callback=callback)
        else:
            series = None
            fit(model, corpus, train_cfg, seed)
        save_checkpoint(model, out, seed=seed, step=train_cfg.epochs)
        ctx.vocab.save(out / "vocab.txt")
        if series is not None:
            (out / "convergence.csv").write_text(series.to_csv(), encoding="utf-8")

    outputs = [out / "manifest.json", out / "params.bin", out / "vocab.txt"]
    if with_convergence:
        outputs.append(out / "convergence.csv")
    runner.run(
        stage_name,
        {
            "arch": asdict(arch),
            "train": asdict(train_cfg),
            "distill": asdict(cfg.distill) if teacher_from is not None else None,
            "seed": ctx.seed,
            "tag": seed_tag,
        },
        inputs=inputs,
        outputs=outputs,
        action=action,
    )
    return out


def _stage_attack(ctx: _SeedContext, runner: StageRunner) -> Path:
    cfg = ctx.cfg
    out = ctx.dir / "attack"
    data_dir = ctx.root / "data"

    def action() -> None:
        resources = NoiseResources.load(data_dir / "resources")
        attack_cfg = AttackConfig(
            proportion=cfg.attack_proportion,
            granularity_mix=cfg.attack_granularity_mix,
            seed=derive_seed(ctx.seed, _ATTACK_TAG),
        )
        attacked, projected, records = build_attack_set(
            ctx.test_pairs, ctx.test_gold, attack_cfg, resources
        )
        write_corpus(attacked, out / "test.atk.tsv")
        write_m2([list(p.source) for p in attacked], projected, out / "test.atk.m2")
        with open(out / "records.jsonl", "w", encoding="utf-8") as fh:
            for record in records:
                fh.write(json.dumps(record.as_dict(), sort_keys=True) + "\n")

    runner.run(
        f"seed_{ctx.seed}/attack",
        {"proportion": cfg.attack_proportion, "mix": cfg.attack_granularity_mix, "seed": ctx.seed},
        inputs=[data_dir / "test.tsv", data_dir / "test.m2", data_dir / "resources"],
        outputs=[out / "test.atk.tsv", out / "test.atk.m2", out / "records.jsonl"],
        action=action,
    )
    return out


def _stage_score(ctx: _SeedContext, runner: StageRunner, checkpoints: dict[str, Path]) -> Path:
    cfg = ctx.cfg
    out = ctx.dir / "scores"
    attack_dir = ctx.dir / "attack"
    inputs = [p / "params.bin" for p in checkpoints.values()]
    testsets: dict[str, tuple[list[list[str]], list[GoldEditSet]]] = {}

    def action() -> None:
        testsets["standard"] = (ctx.test_sources, ctx.test_gold)
        if cfg.run_attack_stage:
            atk_sources, atk_gold = parse_m2(attack_dir / "test.atk.m2")
            testsets["attack"] = (atk_sources, atk_gold)
        result: dict[str, dict] = {}
        for role, ckpt in checkpoints.items():
            model, _ = load_checkpoint(ckpt)
            result[role] = {"parameters": count_parameters(model)}
            for split, (sources, gold) in testsets.items():
                report = ctx.score_model(model, sources, gold)
                result[role][split] = report.as_dict()
        (out / "scores.json").write_text(
            json.dumps(result, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )

    if cfg.run_attack_stage:
        inputs.extend([attack_dir / "test.atk.tsv", attack_dir / "test.atk.m2"])
    runner.run(
        f"seed_{ctx.seed}/scores",
        {"beam": cfg.beam_size, "attack": cfg.run_attack_stage, "seed": ctx.seed},
        inputs=inputs,
        outputs=[out / "scores.json"],
        action=action,
    )
    return out


def run_pipeline(cfg: ExperimentConfig) -> ExperimentReport:
    """Execute every enabled stage for every seed and write the report."""
    root = Path(cfg.out_dir)
    root.mkdir(parents=True, exist_ok=True)
    runner = StageRunner(root, cfg.resume)
    (root / "config.json").write_text(cfg.to_json() + "\n", encoding="utf-8")

    _stage_data(cfg, runner, root)
    _stage_augment(cfg, runner, root)

    per_seed_scores: dict[int, dict] = {}
    per_seed_convergence: dict[int, dict[str, list[tuple[int, float]]]] = {}
    for seed in cfg.seeds:
        ctx = _SeedContext(cfg, root, seed)
        teacher_pre = _train_stage(
            ctx, runner, "pretrain_teacher", cfg.teacher_arch,
            ctx.pretrain_corpus, cfg.pretrain, seed_tag=1,
        )
        student_pre = _train_stage(
            ctx, runner, "pretrain_student", cfg.student_arch,
            ctx.pretrain_corpus, cfg.pretrain, seed_tag=2,
        )
        teacher_ft = _train_stage(
            ctx, runner, "finetune_teacher", cfg.teacher_arch,
            ctx.train_corpus, cfg.finetune, seed_tag=3,
            init_from=teacher_pre, with_convergence=True,
        )
        baseline = _train_stage(
            ctx, runner, "finetune_baseline", cfg.student_arch,
            ctx.train_corpus, cfg.finetune, seed_tag=4,
            init_from=student_pre, with_convergence=True,
        )
        distilled = _train_stage(
            ctx, runner, "distill_student", cfg.student_arch,
            ctx.train_corpus, cfg.finetune, seed_tag=5,
            init_from=student_pre, teacher_from=teacher_ft, with_convergence=True,
        )
        if cfg.run_attack_stage:
            _stage_attack(ctx, runner)
        checkpoints = {
            "teacher": teacher_ft,
            "student-baseline": baseline,
            "student-distilled": distilled,
        }
        scores_dir = _stage_score(ctx, runner, checkpoints)
        per_seed_scores[seed] = json.loads((scores_dir / "scores.json").read_text(encoding="utf-8"))
        per_seed_convergence[seed] = {
            role: _read_convergence(path / "convergence.csv")
            for role, path in checkpoints.items()
        }

    report = _aggregate(cfg, per_seed_scores, per_seed_convergence)
    (root / "report.json").write_text(
        json.dumps(report.as_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    (root / "report.txt").write_text(report.format_tables(), encoding="utf-8")
    return report


def _read_convergence(path: Path) -> list[tuple[int, float]]:
    rows = path.read_text(encoding="utf-8").splitlines()[1:]
    return [(int(e), float(f)) for e, f in (row.split(",") for row in rows if row)]


def _aggregate(
    cfg: ExperimentConfig,
    per_seed_scores: dict[int, dict],
    per_seed_convergence: dict[int, dict[str, list[tuple[int, float]]]],
) -> ExperimentReport:
    seeds = list(cfg.seeds)
    models: dict[str, dict] = {}
    for role in MODEL_ROLES:
        per_seed: dict[str, dict] = {}
        for seed in seeds:
            entry = per_seed_scores[seed][role]
            row = {
                "precision": entry["standard"]["P"],
                "recall": entry["standard"]["R"],
                "f05": entry["standard"]["F05"],
            }
            if cfg.run_attack_stage:
                row["attack_f05"] = entry["attack"]["F05"]
                row["delta_f05"] = entry["attack"]["F05"] - entry["standard"]["F05"]
            per_seed[str(seed)] = row
        mean = {
            key: sum(per_seed[str(s)][key] for s in seeds) / len(seeds)
            for key in next(iter(per_seed.values()))
        }
        models[role] = {
            "parameters": per_seed_scores[seeds[0]][role]["parameters"],
            "mean": mean,
            "per_seed": per_seed,
        }

    first = per_seed_convergence[seeds[0]][MODEL_ROLES[0]]
    windows = [f"{e0}-{e1}" for (e0, _), (e1, _) in zip(first, first[1:])]
    convergence: dict = {"windows": windows, "models": {}}
    for role in MODEL_ROLES:
        per_seed_v = {}
        for seed in seeds:
            series = ConvergenceSeries(per_seed_convergence[seed][role], cfg.delta_epoch)
            per_seed_v[str(seed)] = convergence_rate(series)
        mean_v = [
            sum(per_seed_v[str(s)][k] for s in seeds) / len(seeds)
            for k in range(len(windows))
        ]
        convergence["models"][role] = {"mean_v": mean_v, "per_seed_v": per_seed_v}

    return ExperimentReport(
        models=models,
        convergence=convergence,
        seeds=seeds,
        config=json.loads(cfg.to_json()),
    )
