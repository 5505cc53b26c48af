"""BiLSTM-CRF tagger: character and word BiLSTM encoders over trainable
embeddings, CRF training via the differentiable forward algorithm, Viterbi
decoding with optional BIO2 transition constraints, SGD with early stopping."""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .conll import TAGS, Corpus, Sentence, _split_tag
from .crf import tape_crf_nll, viterbi_decode
from .embeddings import EmbeddingTable, _DIGITS
from .serialize import read_container, write_container

UNK = "<unk>"
MODEL_MAGIC = b"XLNMDL1\x00"


class TrainingError(Exception):
    pass


@dataclass
class TaggerConfig:
    word_emb_dim: int = 64
    word_lstm_dim: int = 50
    char_emb_dim: int = 50
    char_lstm_dim: int = 50  # per direction
    dropout: float = 0.25
    learning_rate: float = 0.1
    max_epochs: int = 50
    patience: int = 5
    seed: int = 1
    batch_size: int = 1
    constrain_decode: bool = True
    unk_word_dropout: bool = False  # singleton words -> UNK with p=0.5 in training

    def __post_init__(self):
        for name in ("word_emb_dim", "word_lstm_dim", "char_emb_dim", "char_lstm_dim"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.max_epochs < 0 or self.patience < 0 or self.batch_size < 1:
            raise ValueError("bad training schedule")


@dataclass(frozen=True)
class Vocab:
    words: dict[str, int]  # UNK at index 0
    chars: dict[str, int]  # UNK at index 0
    tags: tuple[str, ...] = TAGS

    @property
    def num_words(self) -> int:
        return len(self.words)

    @property
    def num_chars(self) -> int:
        return len(self.chars)

    @property
    def num_tags(self) -> int:
        return len(self.tags)

    def word_id(self, word: str) -> int:
        for candidate in (word, word.lower(), _DIGITS.sub("#", word)):
            idx = self.words.get(candidate)
            if idx is not None:
                return idx
        return self.words[UNK]

    def char_id(self, char: str) -> int:
        return self.chars.get(char, self.chars[UNK])

    def tag_id(self, tag: str) -> int:
        return self.tags.index(tag)


def _embedding_form(table: EmbeddingTable, word: str) -> Optional[str]:
    for candidate in (word, word.lower(), _DIGITS.sub("#", word)):
        if candidate in table.vectors:
            return candidate
    return None


def build_vocab(corpora: Sequence[Corpus], embeddings: Optional[EmbeddingTable] = None) -> Vocab:
    """Word vocab: all training words (first corpus) plus words from the
    remaining corpora that the embedding table covers. Char vocab from
    training characters. Tag vocab is the fixed 9-label BIO2 set."""
    if not corpora:
        raise ValueError("need at least one corpus")
    words = set()
    chars = set()
    for sentence in corpora[0]:
        for token in sentence:
            words.add(token.text)
            chars.update(token.text)
    if embeddings is not None and len(embeddings):
        for corpus in corpora[1:]:
            for sentence in corpus:
                for token in sentence:
                    if _embedding_form(embeddings, token.text) is not None:
                        words.add(token.text)
    word_map = {UNK: 0}
    for w in sorted(words):
        word_map.setdefault(w, len(word_map))
    char_map = {UNK: 0}
    for c in sorted(chars):
        char_map.setdefault(c, len(char_map))
    return Vocab(word_map, char_map)


def _uniform(rng: np.random.Generator, shape: tuple, fan_in: int) -> np.ndarray:
    limit = np.sqrt(3.0 / fan_in)
    return rng.uniform(-limit, limit, shape)


def init_params(
    config: TaggerConfig,
    vocab: Vocab,
    pretrained: Optional[EmbeddingTable] = None,
) -> dict[str, np.ndarray]:
    """Seeded uniform(-sqrt(3/fan_in), +sqrt(3/fan_in)) weights, zero
    biases; pretrained rows overwrite matching word embedding rows."""
    if pretrained is not None and len(pretrained) and pretrained.dim != config.word_emb_dim:
        raise ValueError(
            f"pretrained dim {pretrained.dim} != word_emb_dim {config.word_emb_dim}"
        )
    rng = np.random.default_rng(config.seed)
    dw, dc = config.word_emb_dim, config.char_emb_dim
    hc, hw = config.char_lstm_dim, config.word_lstm_dim
    rep = dw + 2 * hc
    k = vocab.num_tags

    params = {
        "word_emb": _uniform(rng, (vocab.num_words, dw), dw),
        "char_emb": _uniform(rng, (vocab.num_chars, dc), dc),
    }
    for direction in ("fwd", "bwd"):
        params[f"char_{direction}_wx"] = _uniform(rng, (dc, 4 * hc), dc)
        params[f"char_{direction}_wh"] = _uniform(rng, (hc, 4 * hc), hc)
        params[f"char_{direction}_b"] = np.zeros(4 * hc)
    for direction in ("fwd", "bwd"):
        params[f"word_{direction}_wx"] = _uniform(rng, (rep, 4 * hw), rep)
        params[f"word_{direction}_wh"] = _uniform(rng, (hw, 4 * hw), hw)
        params[f"word_{direction}_b"] = np.zeros(4 * hw)
    params["proj_w"] = _uniform(rng, (2 * hw, k), 2 * hw)
    params["proj_b"] = np.zeros(k)
    params["transitions"] = _uniform(rng, (k + 2, k + 2), k + 2)

    if pretrained is not None and len(pretrained):
        for word, idx in vocab.words.items():
            if word == UNK:
                continue
            form = _embedding_form(pretrained, word)
            if form is not None:
                params["word_emb"][idx] = pretrained.vectors[form]
    return params


@dataclass
class Tagger:
    config: TaggerConfig
    vocab: Vocab
    params: dict[str, np.ndarray]


def _lstm_states(
    xs: list[Tensor], wx: Tensor, wh: Tensor, b: Tensor, hidden: int
) -> list[Tensor]:
    h = Tensor(np.zeros(hidden))
    c = Tensor(np.zeros(hidden))
    states = []
    for x in xs:
        gates = x @ wx + h @ wh + b
        i = ad.sigmoid(gates[0:hidden])
        f = ad.sigmoid(gates[hidden : 2 * hidden])
        g = ad.tanh(gates[2 * hidden : 3 * hidden])
        o = ad.sigmoid(gates[3 * hidden : 4 * hidden])
        c = f * c + i * g
        h = o * ad.tanh(c)
        states.append(h)
    return states


def _encode(
    params_t: dict[str, Tensor],
    config: TaggerConfig,
    vocab: Vocab,
    sentence: Sentence,
    word_ids: Sequence[int],
    train_mode: bool,
    rng: Optional[np.random.Generator],
) -> Tensor:
    hc, hw = config.char_lstm_dim, config.word_lstm_dim
    reps = []
    for token, wid in zip(sentence, word_ids):
        char_ids = np.array([vocab.char_id(c) for c in token.text], dtype=np.intp)
        char_rows = params_t["char_emb"][char_ids]
        xs = [char_rows[i] for i in range(len(char_ids))]
        fwd = _lstm_states(xs, params_t["char_fwd_wx"], params_t["char_fwd_wh"], params_t["char_fwd_b"], hc)
        bwd = _lstm_states(xs[::-1], params_t["char_bwd_wx"], params_t["char_bwd_wh"], params_t["char_bwd_b"], hc)
        rep = ad.concat([params_t["word_emb"][wid], fwd[-1], bwd[-1]])
        if train_mode and config.dropout > 0.0:
            keep = 1.0 - config.dropout
            mask = (rng.random(rep.shape[0]) < keep) / keep
            rep = rep * mask
        reps.append(rep)

    fwd = _lstm_states(reps, params_t["word_fwd_wx"], params_t["word_fwd_wh"], params_t["word_fwd_b"], hw)
    bwd = _lstm_states(reps[::-1], params_t["word_bwd_wx"], params_t["word_bwd_wh"], params_t["word_bwd_b"], hw)
    bwd = bwd[::-1]
    rows = [
        ad.concat([f, b]) @ params_t["proj_w"] + params_t["proj_b"]
        for f, b in zip(fwd, bwd)
    ]
    return ad.stack(rows)


def encode_sentence(
    tagger: Tagger,
    sentence: Sentence,
    train_mode: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Per-token unnormalized tag scores, shape (len(sentence), 9)."""
    if train_mode and rng is None:
        rng = np.random.default_rng(tagger.config.seed)
    params_t = {name: Tensor(arr) for name, arr in tagger.params.items()}
    word_ids = [tagger.vocab.word_id(t.text) for t in sentence]
    return _encode(params_t, tagger.config, tagger.vocab, sentence, word_ids, train_mode, rng).value


def batch_gradients(
    tagger: Tagger,
    batch: Sequence[Sentence],
    rng: Optional[np.random.Generator] = None,
    train_mode: bool = True,
    word_id_fn=None,
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean CRF negative log-likelihood over the batch and its gradient
    with respect to every parameter tensor."""
    if rng is None:
        rng = np.random.default_rng(tagger.config.seed)
    params_t = {name: Tensor(arr) for name, arr in tagger.params.items()}
    total = None
    for sentence in batch:
        word_ids = (
            word_id_fn(sentence, rng)
            if word_id_fn is not None
            else [tagger.vocab.word_id(t.text) for t in sentence]
        )
        emissions = _encode(params_t, tagger.config, tagger.vocab, sentence, word_ids, train_mode, rng)
        tag_ids = [tagger.vocab.tag_id(t.tag) for t in sentence]
        nll = tape_crf_nll(emissions, params_t["transitions"], tag_ids)
        total = nll if total is None else total + nll
    loss = total / float(len(batch))
    ad.backward(loss)
    grads = {
        name: (t.grad if t.grad is not None else np.zeros_like(t.value))
        for name, t in params_t.items()
    }
    return float(loss.value), grads


def constrained_transitions(transitions: np.ndarray, tags: Sequence[str] = TAGS) -> np.ndarray:
    """Clamp transitions into I-X from anything but B-X/I-X (start state
    included) to -1e4, making decoded sequences BIO2-valid."""
    k = len(tags)
    out = transitions.copy()
    for j, tag in enumerate(tags):
        prefix, etype = _split_tag(tag)
        if prefix != "I":
            continue
        for i in range(k + 2):
            if i < k:
                p_prefix, p_type = _split_tag(tags[i])
                legal = p_prefix in ("B", "I") and p_type == etype
            else:
                legal = False  # start/stop states never precede an I tag
            if not legal:
                out[i, j] = min(out[i, j], -1e4)
    return out


def decode_sentence(tagger: Tagger, sentence: Sentence) -> list[str]:
    emissions = encode_sentence(tagger, sentence)
    transitions = tagger.params["transitions"]
    if tagger.config.constrain_decode:
        transitions = constrained_transitions(transitions, tagger.vocab.tags)
    path = viterbi_decode(emissions, transitions)
    return [tagger.vocab.tags[i] for i in path]


def tag_corpus(tagger: Tagger, corpus: Corpus) -> Corpus:
    """Viterbi-tag every sentence; token texts are untouched."""
    return Corpus(
        tuple(s.with_tags(decode_sentence(tagger, s)) for s in corpus),
        corpus.language,
    )


@dataclass
class TrainHistory:
    dev_f1: list[float] = field(default_factory=list)
    best_epoch: Optional[int] = None  # 1-based
    stopped_early: bool = False


def _singleton_words(corpus: Corpus) -> set[str]:
    counts: dict[str, int] = {}
    for sentence in corpus:
        for token in sentence:
            counts[token.text] = counts.get(token.text, 0) + 1
    return {w for w, c in counts.items() if c == 1}


def train(
    config: TaggerConfig,
    train_corpus: Corpus,
    dev_corpus: Corpus,
    pretrained: Optional[EmbeddingTable] = None,
    vocab: Optional[Vocab] = None,
    initial: Optional[Tagger] = None,
    extra_vocab_corpora: Sequence[Corpus] = (),
    log=None,
) -> tuple[Tagger, TrainHistory]:
    """Epochs of seeded, shuffled SGD; keeps the parameters of the best
    dev span-F1 epoch and stops once `patience` epochs pass without
    improvement. Fully deterministic given (config, data, pretrained)."""
    from .evaluation import evaluate  # local import: evaluation is a leaf

    if not len(train_corpus):
        raise ValueError("train corpus is empty")
    if not len(dev_corpus):
        raise ValueError("dev corpus is empty")

    if initial is not None:
        tagger = Tagger(config, initial.vocab, {n: a.copy() for n, a in initial.params.items()})
    else:
        if vocab is None:
            vocab = build_vocab([train_corpus, dev_corpus, *extra_vocab_corpora], pretrained)
        tagger = Tagger(config, vocab, init_params(config, vocab, pretrained))

    rng = np.random.default_rng(config.seed)
    singletons = _singleton_words(train_corpus) if config.unk_word_dropout else set()

    def word_ids_for(sentence: Sentence, step_rng: np.random.Generator) -> list[int]:
        ids = []
        for token in sentence:
            if token.text in singletons and step_rng.random() < 0.5:
                ids.append(tagger.vocab.words[UNK])
            else:
                ids.append(tagger.vocab.word_id(token.text))
        return ids

    history = TrainHistory()
    best_f1 = -1.0
    best_params = {n: a.copy() for n, a in tagger.params.items()}
    bad_epochs = 0
    sentences = list(train_corpus)

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(sentences))
        for start in range(0, len(order), config.batch_size):
            batch = [sentences[i] for i in order[start : start + config.batch_size]]
            loss, grads = batch_gradients(tagger, batch, rng=rng, word_id_fn=word_ids_for)
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss {loss} at epoch {epoch}")
            for name, grad in grads.items():
                tagger.params[name] -= config.learning_rate * grad
        report = evaluate(dev_corpus, tag_corpus(tagger, dev_corpus))
        history.dev_f1.append(report.f1)
        if log is not None:
            log(f"epoch {epoch}: dev F1 {report.f1:.2f}")
        if report.f1 > best_f1:
            best_f1 = report.f1
            best_params = {n: a.copy() for n, a in tagger.params.items()}
            history.best_epoch = epoch
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= config.patience:
                history.stopped_early = True
                break

    tagger.params = best_params
    return tagger, history


def save_model(tagger: Tagger, path) -> None:
    header = {
        "config": asdict(tagger.config),
        "vocab": {
            "words": sorted(tagger.vocab.words, key=tagger.vocab.words.get),
            "chars": sorted(tagger.vocab.chars, key=tagger.vocab.chars.get),
            "tags": list(tagger.vocab.tags),
        },
    }
    write_container(path, MODEL_MAGIC, header, tagger.params)


def load_model(path) -> Tagger:
    header, tensors = read_container(path, MODEL_MAGIC)
    config = TaggerConfig(**header["config"])
    v = header["vocab"]
    vocab = Vocab(
        {w: i for i, w in enumerate(v["words"])},
        {c: i for i, c in enumerate(v["chars"])},
        tuple(v["tags"]),
    )
    return Tagger(config, vocab, tensors)
