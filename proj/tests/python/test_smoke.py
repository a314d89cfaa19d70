import json
import os
from pathlib import Path

import pytest

import scenestat

FIXTURES = Path(os.environ.get("SCENESTAT_FIXTURE_DIR", Path(__file__).resolve().parents[1] / "fixtures"))


@pytest.fixture(scope="module")
def corpus():
    return scenestat.load_dataset(FIXTURES / "graphs.jsonl", FIXTURES / "vocab.json", FIXTURES / "splits.json")


def test_geometry():
    a = scenestat.Box(0, 0, 10, 10)
    b = scenestat.Box(5, 0, 15, 10)
    assert abs(scenestat.iou(a, b) - 50 / 150) < 1e-12
    assert scenestat.union_box(a, b) == scenestat.Box(0, 0, 15, 10)
    assert not scenestat.boxes_overlap(a, scenestat.Box(10, 0, 20, 10))
    with pytest.raises(ValueError):
        scenestat.Box(5, 0, 1, 10)


def test_dataset_and_frequency(corpus):
    assert len(corpus) == 61
    assert corpus.vocab.predicates[0] == "bg"
    train = corpus.subset("train")
    table = scenestat.build_frequency_table(train)
    total = sum(table.probability("man", "street", p) for p in corpus.vocab.predicates)
    assert abs(total - 1.0) < 1e-9


def test_statistics(corpus):
    curve = scenestat.guess_curve(corpus.subset("train"), corpus.subset("test"), "edge", ["head", "tail"], 5)
    assert len(curve) == 5
    assert all(x <= y for x, y in zip(curve, curve[1:]))
    assert 0.0 <= scenestat.overlap_recall_ceiling(corpus) <= 1.0


def test_mining(corpus):
    motifs = scenestat.mine_motifs(corpus, min_count=5, min_lift=2.0)
    assert all(m["lift"] >= 2.0 for m in motifs)
    assert all(m["length"] >= 2 for m in motifs)


def test_cli_pipeline(tmp_path):
    data = ["--corpus", str(FIXTURES / "graphs.jsonl"), "--vocab", str(FIXTURES / "vocab.json"),
            "--splits", str(FIXTURES / "splits.json")]
    code, _, err = scenestat.run_cli(["build-freq", *data, "--out", str(tmp_path / "freq.json")])
    assert code == 0, err
    code, _, err = scenestat.run_cli(["predict", *data, "--mode", "predcls", "--freq", str(tmp_path / "freq.json"),
                                      "--out", str(tmp_path / "p.jsonl")])
    assert code == 0, err
    code, out, err = scenestat.run_cli(["eval", *data, "--mode", "predcls", "--predictions", str(tmp_path / "p.jsonl")])
    assert code == 0, err
    report = json.loads(out)
    assert 0.0 < report["modes"][0]["recall"]["50"] <= 1.0

    corpus = scenestat.load_dataset(FIXTURES / "graphs.jsonl", FIXTURES / "vocab.json", FIXTURES / "splits.json")
    recall = scenestat.evaluate(tmp_path / "p.jsonl", corpus.subset("test"), "predcls")
    assert recall[50] == pytest.approx(report["modes"][0]["recall"]["50"])


def test_errors(tmp_path):
    assert scenestat.run_cli(["stats", "--bogus"])[0] == 2
    bad = tmp_path / "freq.json"
    bad.write_text('{"kind": "frequency_table"')
    with pytest.raises(scenestat.PersistError):
        scenestat.load_frequency_table(bad)
    graphs = tmp_path / "graphs.jsonl"
    graphs.write_text('{"image_id": "a", "boxes": [[0, 0, 1]]}\n')
    with pytest.raises(scenestat.SchemaError):
        scenestat.load_dataset(graphs, FIXTURES / "vocab.json", FIXTURES / "splits.json")
