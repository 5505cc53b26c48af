import json

import numpy as np
import pytest

from xlner.cli import main
from xlner.conll import parse_conll, write_conll
from xlner.embeddings import EmbeddingTable, load_embeddings, save_embeddings

from conftest import TABLE_FIXTURE, make_corpus


@pytest.fixture
def sample(tmp_path):
    path = tmp_path / "sample.conll"
    path.write_text(TABLE_FIXTURE, encoding="utf-8")
    return path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# --------------------------------------------------------------------- stats


def test_stats_text(capsys, sample):
    code, out, err = run(capsys, "stats", sample)
    assert code == 0
    assert "sentences: 2" in out
    assert "# xlner stats" in err  # effective config goes to stderr


def test_stats_json(capsys, sample):
    code, out, _ = run(capsys, "stats", sample, "--format", "json")
    assert code == 0
    payload = json.loads(out)
    assert payload["sentences"] == 2
    assert payload["entities"] == 3


def test_stats_missing_file(capsys, tmp_path):
    code, _, err = run(capsys, "stats", tmp_path / "nope.conll")
    assert code == 1
    assert "error:" in err


def test_data_dir_resolution(capsys, tmp_path, sample, monkeypatch):
    monkeypatch.setenv("XLNER_DATA_DIR", str(sample.parent))
    elsewhere = tmp_path / "elsewhere"
    elsewhere.mkdir()
    monkeypatch.chdir(elsewhere)
    code, out, _ = run(capsys, "stats", "sample.conll")
    assert code == 0
    assert "sentences: 2" in out


# ------------------------------------------------------------------ validate


def test_validate_clean(capsys, sample):
    code, out, err = run(capsys, "validate", sample)
    assert code == 0
    assert "valid" in err


def test_validate_violations(capsys, tmp_path):
    path = tmp_path / "bad.conll"
    path.write_text("a O\nb I-PER\n", encoding="utf-8")
    code, out, err = run(capsys, "validate", path)
    assert code == 1
    assert "token 1" in out
    assert "1 BIO violations" in err


# ------------------------------------------------------------------- convert


def test_convert_writes_bio2(capsys, tmp_path):
    src = tmp_path / "iob1.conll"
    src.write_text("Hans I-PER\nJensen I-PER\n\nEU I-ORG\n", encoding="utf-8")
    out_path = tmp_path / "bio2.conll"
    code, _, _ = run(capsys, "convert", src, "--out", out_path)
    assert code == 0
    corpus = parse_conll(out_path.read_text())
    assert corpus.sentences[0].tags == ("B-PER", "I-PER")
    assert corpus.sentences[1].tags == ("B-ORG",)


def test_convert_stdout(capsys, tmp_path):
    src = tmp_path / "iob1.conll"
    src.write_text("EU I-ORG\n", encoding="utf-8")
    code, out, _ = run(capsys, "convert", src)
    assert code == 0
    assert "EU B-ORG" in out


# --------------------------------------------------------------------- kappa


def test_kappa_identical_annotators(capsys, sample):
    code, out, _ = run(capsys, "kappa", sample, sample, "--format", "json")
    assert code == 0
    payload = json.loads(out)
    assert payload["kappa"] == 1.0


def test_kappa_disagreement(capsys, tmp_path, sample):
    other = tmp_path / "other.conll"
    corpus = parse_conll(TABLE_FIXTURE)
    flipped = corpus.sentences[0].with_tags(
        ["B-PER" if t == "B-LOC" else t for t in corpus.sentences[0].tags]
    )
    other.write_text(
        write_conll(type(corpus)((flipped,) + corpus.sentences[1:], corpus.language))
    )
    code, out, _ = run(capsys, "kappa", sample, other, "--format", "json")
    assert code == 0
    assert json.loads(out)["kappa"] < 1.0


# --------------------------------------------------------------------- align


def test_align_round_trip(capsys, tmp_path):
    rng = np.random.default_rng(0)
    words = ["fælles1", "fælles2", "fælles3", "fælles4", "kilde"]
    src_vecs = {w: rng.standard_normal(4) for w in words}
    rotation = np.linalg.qr(rng.standard_normal((4, 4)))[0]
    tgt_vecs = {w: v @ rotation for w, v in src_vecs.items() if w != "kilde"}
    tgt_vecs["mål"] = rng.standard_normal(4) @ rotation
    src_path, tgt_path, out_path = (
        tmp_path / "src.vec",
        tmp_path / "tgt.vec",
        tmp_path / "mapped.vec",
    )
    save_embeddings(EmbeddingTable(4, src_vecs), src_path)
    save_embeddings(EmbeddingTable(4, tgt_vecs), tgt_path)
    code, _, err = run(
        capsys, "align", "--src", src_path, "--tgt", tgt_path, "--out", out_path
    )
    assert code == 0
    assert "seeds: 4" in err
    mapped = load_embeddings(out_path)
    for w in tgt_vecs:
        if w in src_vecs:
            assert np.allclose(mapped.vectors[w], src_vecs[w], atol=1e-4)


# ------------------------------------------------------- train / tag / eval


def test_train_tag_eval_pipeline(capsys, tmp_path, sample):
    config_path = tmp_path / "tagger.conf"
    config_path.write_text(
        "word_emb_dim = 8\nword_lstm_dim = 4\nchar_emb_dim = 3\n"
        "char_lstm_dim = 3\ndropout = 0.0\nmax_epochs = 3\n"
    )
    model_path = tmp_path / "model.bin"
    code, _, err = run(
        capsys,
        "train",
        "--train", sample,
        "--dev", sample,
        "--out", model_path,
        "--config", config_path,
        "--seed", 7,
    )
    assert code == 0
    assert model_path.exists()

    tagged_path = tmp_path / "tagged.conll"
    code, _, _ = run(capsys, "tag", "--model", model_path, str(sample), "--out", tagged_path)
    assert code == 0
    tagged = parse_conll(tagged_path.read_text())
    assert len(tagged) == 2

    code, out, _ = run(
        capsys, "eval", "--gold", sample, "--pred", tagged_path, "--format", "json"
    )
    assert code == 0
    payload = json.loads(out)
    assert 0.0 <= payload["f1"] <= 100.0


def test_eval_identical_is_perfect(capsys, sample):
    code, out, _ = run(capsys, "eval", "--gold", sample, "--pred", sample)
    assert code == 0
    assert "F1 100.00" in out


def test_train_rejects_unknown_config_key(capsys, tmp_path, sample):
    config_path = tmp_path / "bad.conf"
    config_path.write_text("nonsense = 1\n")
    code, _, err = run(
        capsys,
        "train",
        "--train", sample,
        "--dev", sample,
        "--out", tmp_path / "m.bin",
        "--config", config_path,
    )
    assert code == 1
    assert "unknown tagger option" in err


# ------------------------------------------------------------------ baseline


def test_baseline_majority(capsys, tmp_path, sample):
    out_path = tmp_path / "pred.conll"
    code, _, _ = run(
        capsys,
        "baseline", "--method", "majority",
        "--train", sample, "--input", sample, "--out", out_path,
    )
    assert code == 0
    pred = parse_conll(out_path.read_text())
    assert len(pred) == 2


def test_baseline_tnt_with_model(capsys, tmp_path, sample):
    out_path = tmp_path / "pred.conll"
    model_path = tmp_path / "tnt.bin"
    code, _, _ = run(
        capsys,
        "baseline", "--method", "tnt",
        "--train", sample, "--input", sample,
        "--out", out_path, "--model-out", model_path,
    )
    assert code == 0
    assert model_path.exists()
    assert len(parse_conll(out_path.read_text())) == 2


# ---------------------------------------------------------------- experiment


def test_experiment_grid(capsys, tmp_path):
    train_rows = [
        [("Elvis", "B-PER"), ("sang", "O")],
        [("Rom", "B-LOC"), ("faldt", "O")],
    ] * 6
    dev_rows = [[("Elvis", "B-PER"), ("sang", "O")]] * 3
    (tmp_path / "da.train").write_text(write_conll(make_corpus(*train_rows)))
    (tmp_path / "da.dev").write_text(write_conll(make_corpus(*dev_rows)))
    config_path = tmp_path / "grid.conf"
    config_path.write_text(
        f"data_dir = {tmp_path}\n"
        "tgt_train_path = da.train\n"
        "tgt_dev_path = da.dev\n"
        "seeds = 1\n"
        "cell = majority:none:tiny\n"
        "cell = tnt_baseline:none:tiny\n"
    )
    results = tmp_path / "results"
    code, out, err = run(capsys, "experiment", "--config", config_path, "--out", results)
    assert code == 0
    assert (results / "matrix.txt").exists()
    assert (results / "matrix.json").exists()
    assert "TnT" in out  # rendered matrix on stdout
    payload = json.loads((results / "matrix.json").read_text())
    assert "majority/none/tiny" in payload


def test_experiment_seed_override(capsys, tmp_path):
    (tmp_path / "da.train").write_text(
        write_conll(make_corpus([("Elvis", "B-PER"), ("sang", "O")]))
    )
    (tmp_path / "da.dev").write_text(
        write_conll(make_corpus([("Elvis", "B-PER"), ("sang", "O")]))
    )
    config_path = tmp_path / "one.conf"
    config_path.write_text(
        f"data_dir = {tmp_path}\n"
        "tgt_train_path = da.train\n"
        "tgt_dev_path = da.dev\n"
        "regime = majority\n"
        "target_size = tiny\n"
        "seeds = 1, 2, 3\n"
    )
    results = tmp_path / "results"
    code, _, _ = run(
        capsys, "experiment", "--config", config_path, "--out", results, "--seed", 9
    )
    assert code == 0
    assert (results / "majority" / "none" / "tiny" / "9").exists()
    assert not (results / "majority" / "none" / "tiny" / "1").exists()


# ----------------------------------------------------------------- exit codes


def test_unknown_subcommand_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_missing_required_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["align", "--src", "a.vec"])
    assert exc.value.code == 2
