"""Experiment orchestration: the grid of training regimes x source sizes x
target sizes x seeds, with per-cell reports and models on disk and a
rendered result matrix."""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from . import tnt
from .conll import Corpus, convert_corpus_iob1_to_bio2, read_conll, take_first_tokens
from .embeddings import (
    EmbeddingTable,
    align_tables,
    apply_mapping,
    load_embeddings,
)
from .evaluation import (
    AggregateReport,
    EvalReport,
    aggregate,
    evaluate,
    majority_baseline,
)
from .tagger import Tagger, TaggerConfig, build_vocab, save_model, tag_corpus, train

REGIMES = (
    "zero_shot",
    "in_language_plain",
    "in_language_pretrained",
    "joint",
    "fine_tune",
    "tnt_baseline",
    "majority",
)
SOURCE_SIZES = ("none", "medium", "large")
TARGET_SIZES = ("none", "tiny", "small")

# Sentence budgets used when slicing a Danish training file into the two
# few-shot sizes (first 5k / 10k tokens, whole sentences).
TINY_TOKENS = 5000
SMALL_TOKENS = 10000


class ExperimentError(Exception):
    pass


@dataclass
class ExperimentConfig:
    regime: str
    source_size: str = "none"
    target_size: str = "none"
    seeds: tuple[int, ...] = (1, 2, 3)
    tagger: TaggerConfig = field(default_factory=TaggerConfig)
    # mapping direction: "tgt_to_src" rotates target vectors into the
    # source space; "src_to_tgt" the reverse
    alignment_direction: str = "tgt_to_src"
    data_dir: Optional[str] = None
    src_train_path: Optional[str] = None
    src_dev_path: Optional[str] = None
    tgt_train_path: Optional[str] = None
    tgt_dev_path: Optional[str] = None
    src_emb_path: Optional[str] = None
    tgt_emb_path: Optional[str] = None

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ExperimentError(f"unknown regime {self.regime!r}")
        if self.source_size not in SOURCE_SIZES or self.target_size not in TARGET_SIZES:
            raise ExperimentError("bad source/target size")
        if self.alignment_direction not in ("tgt_to_src", "src_to_tgt"):
            raise ExperimentError(f"bad alignment direction {self.alignment_direction!r}")
        if self.regime == "zero_shot" and self.target_size != "none":
            raise ExperimentError("zero_shot requires target_size = none")
        if self.regime.startswith("in_language") and self.source_size != "none":
            raise ExperimentError("in_language regimes require source_size = none")

    @property
    def cell(self) -> tuple[str, str, str]:
        return (self.regime, self.source_size, self.target_size)


@dataclass
class Resources:
    src_train: Optional[Corpus] = None
    src_dev: Optional[Corpus] = None
    tgt_train: Optional[Corpus] = None
    tgt_dev: Optional[Corpus] = None
    src_emb: Optional[EmbeddingTable] = None
    tgt_emb: Optional[EmbeddingTable] = None


def prepare_sources(config: ExperimentConfig, data_dir: Optional[str] = None) -> tuple[Corpus, Corpus]:
    """English source corpora in BIO2. Large trains on eng.train with
    eng.testa for early stopping; Medium trains on the first 90% of
    eng.testa sentences and holds out the last 10% for early stopping."""
    root = Path(data_dir or config.data_dir or os.environ.get("XLNER_DATA_DIR", "."))
    if config.source_size == "large":
        train_path, dev_path = root / "eng.train", root / "eng.testa"
        for p in (train_path, dev_path):
            if not p.exists():
                raise ExperimentError(f"missing source corpus: {p}")
        train_c = convert_corpus_iob1_to_bio2(read_conll(train_path, "en"))
        dev_c = convert_corpus_iob1_to_bio2(read_conll(dev_path, "en"))
        return train_c, dev_c
    if config.source_size == "medium":
        path = root / "eng.testa"
        if not path.exists():
            raise ExperimentError(f"missing source corpus: {path}")
        corpus = convert_corpus_iob1_to_bio2(read_conll(path, "en"))
        cut = len(corpus) - max(1, len(corpus) // 10)
        return Corpus(corpus.sentences[:cut], "en"), Corpus(corpus.sentences[cut:], "en")
    raise ExperimentError("prepare_sources needs source_size medium or large")


def _slice_target(corpus: Corpus, size: str) -> Corpus:
    if size == "none":
        return Corpus((), corpus.language)
    if size == "tiny":
        return take_first_tokens(corpus, TINY_TOKENS)
    if size == "small":
        return take_first_tokens(corpus, SMALL_TOKENS)
    return corpus


def load_resources(config: ExperimentConfig) -> Resources:
    root = Path(config.data_dir or os.environ.get("XLNER_DATA_DIR", "."))

    def corpus(path, language):
        if path is None:
            return None
        p = Path(path) if Path(path).is_absolute() else root / path
        if not p.exists():
            raise ExperimentError(f"missing corpus file: {p}")
        return read_conll(p, language)

    def table(path):
        if path is None:
            return None
        p = Path(path) if Path(path).is_absolute() else root / path
        if not p.exists():
            raise ExperimentError(f"missing embedding file: {p}")
        return load_embeddings(p)

    res = Resources(
        tgt_train=corpus(config.tgt_train_path, "da"),
        tgt_dev=corpus(config.tgt_dev_path, "da"),
        src_emb=table(config.src_emb_path),
        tgt_emb=table(config.tgt_emb_path),
    )
    if config.src_train_path or config.src_dev_path:
        res.src_train = corpus(config.src_train_path, "en")
        res.src_dev = corpus(config.src_dev_path, "en")
    elif config.source_size in ("medium", "large"):
        res.src_train, res.src_dev = prepare_sources(config)
    return res


def _merge_tables(primary: EmbeddingTable, secondary: EmbeddingTable) -> EmbeddingTable:
    """Union of two same-dimension tables; primary wins on shared words."""
    vectors = dict(secondary.vectors)
    vectors.update(primary.vectors)
    return EmbeddingTable(primary.dim, vectors, primary.unk_vector)


def bilingual_table(config: ExperimentConfig, res: Resources) -> EmbeddingTable:
    """Source and target embeddings in one shared space via identical-seed
    Procrustes alignment."""
    if res.src_emb is None or res.tgt_emb is None:
        raise ExperimentError("bilingual regimes need both embedding tables")
    if config.alignment_direction == "tgt_to_src":
        mapped = apply_mapping(res.tgt_emb, align_tables(res.src_emb, res.tgt_emb))
        return _merge_tables(res.src_emb, mapped)
    mapped = apply_mapping(res.src_emb, align_tables(res.tgt_emb, res.src_emb))
    return _merge_tables(mapped, res.tgt_emb)


def _concat(a: Corpus, b: Corpus) -> Corpus:
    return Corpus(a.sentences + b.sentences, f"{a.language}+{b.language}")


def _require(res: Resources, *names: str) -> None:
    for name in names:
        if getattr(res, name) is None:
            raise ExperimentError(f"regime needs resource {name!r}")


def run_seed(config: ExperimentConfig, res: Resources, seed: int) -> tuple[EvalReport, Optional[Tagger]]:
    """One training/evaluation run; the report scores the target dev set."""
    tagger_config = replace(config.tagger, seed=seed)
    regime = config.regime

    if regime == "majority":
        _require(res, "tgt_train", "tgt_dev")
        tgt_train = _slice_target(res.tgt_train, config.target_size)
        return evaluate(res.tgt_dev, majority_baseline(tgt_train, res.tgt_dev)), None

    if regime == "tnt_baseline":
        _require(res, "tgt_train", "tgt_dev")
        tgt_train = _slice_target(res.tgt_train, config.target_size)
        model = tnt.estimate(tgt_train)
        return evaluate(res.tgt_dev, tnt.tag_corpus(model, res.tgt_dev)), None

    if regime in ("in_language_plain", "in_language_pretrained"):
        _require(res, "tgt_train", "tgt_dev")
        tgt_train = _slice_target(res.tgt_train, config.target_size)
        pretrained = res.tgt_emb if regime == "in_language_pretrained" else None
        if regime == "in_language_pretrained":
            _require(res, "tgt_emb")
        tagger, _ = train(tagger_config, tgt_train, res.tgt_dev, pretrained=pretrained)
        return evaluate(res.tgt_dev, tag_corpus(tagger, res.tgt_dev)), tagger

    _require(res, "src_train", "src_dev", "tgt_dev")
    shared = bilingual_table(config, res)

    if regime == "zero_shot":
        tagger, _ = train(
            tagger_config,
            res.src_train,
            res.src_dev,
            pretrained=shared,
            extra_vocab_corpora=[res.tgt_dev],
        )
        return evaluate(res.tgt_dev, tag_corpus(tagger, res.tgt_dev)), tagger

    _require(res, "tgt_train")
    tgt_train = _slice_target(res.tgt_train, config.target_size)

    if regime == "joint":
        # Early stopping on the target dev set (the reporting target).
        tagger, _ = train(
            tagger_config,
            _concat(res.src_train, tgt_train),
            res.tgt_dev,
            pretrained=shared,
            extra_vocab_corpora=[res.src_dev],
        )
        return evaluate(res.tgt_dev, tag_corpus(tagger, res.tgt_dev)), tagger

    if regime == "fine_tune":
        stage1, _ = train(
            tagger_config,
            res.src_train,
            res.src_dev,
            pretrained=shared,
            extra_vocab_corpora=[res.tgt_dev, tgt_train],
        )
        # Same learning rate, fresh early stopping on the target dev set.
        tagger, _ = train(tagger_config, tgt_train, res.tgt_dev, initial=stage1)
        return evaluate(res.tgt_dev, tag_corpus(tagger, res.tgt_dev)), tagger

    raise ExperimentError(f"unhandled regime {regime!r}")


def run_regime(
    config: ExperimentConfig,
    resources: Optional[Resources] = None,
    out_dir: Optional[Path] = None,
) -> AggregateReport:
    """Run the configured cell once per seed and aggregate. With out_dir
    set, per-seed models/reports land under <regime>/<src>/<tgt>/<seed>/."""
    res = resources if resources is not None else load_resources(config)
    reports = []
    for seed in config.seeds:
        report, tagger = run_seed(config, res, seed)
        reports.append(report)
        if out_dir is not None:
            cell_dir = Path(out_dir) / config.regime / config.source_size / config.target_size / str(seed)
            cell_dir.mkdir(parents=True, exist_ok=True)
            (cell_dir / "report.json").write_text(
                json.dumps(report.to_dict(), indent=2), encoding="utf-8"
            )
            (cell_dir / "log").write_text(
                f"regime={config.regime} source={config.source_size} "
                f"target={config.target_size} seed={seed} f1={report.f1:.2f}\n",
                encoding="utf-8",
            )
            if tagger is not None:
                save_model(tagger, cell_dir / "model")
    return aggregate(reports)


@dataclass
class ResultMatrix:
    cells: dict[tuple[str, str, str], AggregateReport] = field(default_factory=dict)

    def add(self, key: tuple[str, str, str], report: AggregateReport) -> None:
        if key in self.cells:
            raise ExperimentError(f"duplicate cell {key}")
        self.cells[key] = report

    def to_dict(self) -> dict:
        return {
            "/".join(key): report.to_dict() for key, report in sorted(self.cells.items())
        }


_MATRIX_COLUMNS = ("TnT", "plain", "+Poly", "+Medium", "+Large", "FineTune")
_ROW_SIZES = (("zero-shot", "none"), ("Tiny", "tiny"), ("Small", "small"))


def _matrix_cell(matrix: ResultMatrix, column: str, target_size: str) -> Optional[AggregateReport]:
    if column == "TnT":
        return matrix.cells.get(("tnt_baseline", "none", target_size))
    if column == "plain":
        return matrix.cells.get(("in_language_plain", "none", target_size))
    if column == "+Poly":
        return matrix.cells.get(("in_language_pretrained", "none", target_size))
    if column in ("+Medium", "+Large"):
        source = "medium" if column == "+Medium" else "large"
        regime = "zero_shot" if target_size == "none" else "joint"
        return matrix.cells.get((regime, source, target_size))
    if column == "FineTune":
        for source in ("medium", "large"):
            cell = matrix.cells.get(("fine_tune", source, target_size))
            if cell is not None:
                return cell
    return None


def render_matrix(matrix: ResultMatrix) -> str:
    """Text table: transfer columns by training-size rows, mean dev F1;
    absent cells render as ---."""
    width = 10
    lines = ["".ljust(width) + "".join(c.rjust(width) for c in _MATRIX_COLUMNS)]
    for row_name, target_size in _ROW_SIZES:
        cells = []
        for column in _MATRIX_COLUMNS:
            report = _matrix_cell(matrix, column, target_size)
            cells.append(f"{report.f1.mean:.2f}".rjust(width) if report else "---".rjust(width))
        lines.append(row_name.ljust(width) + "".join(cells))
    return "\n".join(lines) + "\n"


def run_grid(
    configs: list[ExperimentConfig],
    resources: Optional[Resources] = None,
    out_dir: Optional[Path] = None,
    jobs: int = 1,
) -> ResultMatrix:
    keys = [c.cell for c in configs]
    if len(set(keys)) != len(keys):
        raise ExperimentError("duplicate cell keys in grid")
    matrix = ResultMatrix()
    if jobs > 1 and resources is None:
        import concurrent.futures

        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {
                pool.submit(run_regime, config, None, out_dir): config for config in configs
            }
            for future, config in futures.items():
                matrix.add(config.cell, future.result())
    else:
        for config in configs:
            matrix.add(config.cell, run_regime(config, resources, out_dir))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "matrix.json").write_text(json.dumps(matrix.to_dict(), indent=2), encoding="utf-8")
        (out / "matrix.txt").write_text(render_matrix(matrix), encoding="utf-8")
    return matrix


def parse_experiment_config(text: str) -> list[ExperimentConfig]:
    """Flat key-value grammar: `key = value` lines, `#` comments. Shared
    keys apply to every cell; each `cell = regime:source:target` line adds
    one grid cell. A file with no cell lines but a `regime` key defines a
    single cell."""
    shared: dict[str, str] = {}
    cells: list[tuple[str, str, str]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ExperimentError(f"line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key == "cell":
            parts = value.split(":")
            if len(parts) != 3:
                raise ExperimentError(f"line {lineno}: cell must be regime:source:target")
            cells.append((parts[0], parts[1], parts[2]))
        else:
            shared[key] = value

    tagger_kwargs = {}
    config_kwargs = {}
    tagger_fields = {f.name: f.type for f in dataclasses.fields(TaggerConfig)}
    for key, value in shared.items():
        if key.startswith("tagger."):
            name = key[len("tagger.") :]
            if name not in tagger_fields:
                raise ExperimentError(f"unknown tagger option {name!r}")
            current = getattr(TaggerConfig(), name)
            if isinstance(current, bool):
                tagger_kwargs[name] = value.lower() in ("1", "true", "yes")
            elif isinstance(current, int):
                tagger_kwargs[name] = int(value)
            else:
                tagger_kwargs[name] = float(value)
        elif key == "seeds":
            config_kwargs["seeds"] = tuple(int(s) for s in value.split(",") if s.strip())
        elif key in (
            "regime",
            "source_size",
            "target_size",
            "alignment_direction",
            "data_dir",
            "src_train_path",
            "src_dev_path",
            "tgt_train_path",
            "tgt_dev_path",
            "src_emb_path",
            "tgt_emb_path",
        ):
            config_kwargs[key] = value
        else:
            raise ExperimentError(f"unknown option {key!r}")

    tagger_config = TaggerConfig(**tagger_kwargs)
    if not cells:
        if "regime" not in config_kwargs:
            raise ExperimentError("config defines no cells and no regime")
        return [ExperimentConfig(tagger=tagger_config, **config_kwargs)]
    base = {k: v for k, v in config_kwargs.items() if k not in ("regime", "source_size", "target_size")}
    return [
        ExperimentConfig(
            regime=regime,
            source_size=source,
            target_size=target,
            tagger=tagger_config,
            **base,
        )
        for regime, source, target in cells
    ]
