import csv
import json

import numpy as np
import pytest

from pgbj.artifacts import parse_points, read_result
from pgbj.cli import BENCH_FIELDS, main
from pgbj.oracle import brute_force_knn_join


@pytest.fixture
def data(tmp_path):
    r = tmp_path / "r.csv"
    s = tmp_path / "s.csv"
    assert main(["generate", "--kind", "gaussian_mixture", "--dim", "3", "--count", "400", "--seed", "2",
                 "--out", str(r)]) == 0
    assert main(["generate", "--dim", "3", "--count", "300", "--seed", "3", "--out", str(s)]) == 0
    return r, s


def test_join_end_to_end(data, tmp_path, capsys):
    r, s = data
    out, met = tmp_path / "out.csv", tmp_path / "m.json"
    code = main(["join", "--r", str(r), "--s", str(s), "--k", "5", "--num-pivots", "20", "--num-groups", "3",
                 "--grouping", "greedy", "--out", str(out), "--metrics", str(met)])
    assert code == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["config"]["grouping"] == "GREEDY"
    res = read_result(out)
    oracle = brute_force_knn_join(parse_points(r, "R"), parse_points(s, "S"), 5)
    assert np.array_equal(res.nn_ids, oracle.nn_ids)
    doc = json.loads(met.read_text())
    assert doc["shuffle_records_S"] == doc["predicted_replication"]


def test_staged_jobs_match_end_to_end(data, tmp_path, capsys):
    r, s = data
    piv, art = tmp_path / "piv.csv", tmp_path / "art"
    assert main(["pivots", "--r", str(r), "--strategy", "farthest", "--num-pivots", "15", "--out", str(piv)]) == 0
    assert main(["partition", "--r", str(r), "--s", str(s), "--pivots", str(piv), "--k", "4",
                 "--artifacts", str(art)]) == 0
    assert main(["group", "--artifacts", str(art), "--num-groups", "4"]) == 0
    grouped = json.loads(capsys.readouterr().out)
    assert grouped["num_groups"] == 4
    assert main(["join", "--artifacts", str(art), "--out", str(tmp_path / "a.csv")]) == 0
    staged = json.loads(capsys.readouterr().out)
    assert staged["predicted_replication"] == grouped["predicted_replication"]
    assert main(["join", "--r", str(r), "--s", str(s), "--pivots", str(piv), "--k", "4", "--num-groups", "4",
                 "--out", str(tmp_path / "b.csv")]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_oracle_and_baseline_agree(data, tmp_path):
    r, _ = data
    assert main(["oracle", "--r", str(r), "--k", "3", "--out", str(tmp_path / "o.csv")]) == 0
    assert main(["join", "--r", str(r), "--k", "3", "--engine", "block_baseline", "--num-groups", "4",
                 "--out", str(tmp_path / "b.csv")]) == 0
    assert (tmp_path / "o.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_expand(tmp_path):
    src = tmp_path / "o.csv"
    src.write_text("id,x\n0,1.0\n1,2.0\n2,2.0\n")
    assert main(["expand", "--input", str(src), "--factor", "2", "--out", str(tmp_path / "e.csv")]) == 0
    out = parse_points(tmp_path / "e.csv")
    assert out.coords[:, 0].tolist() == [1.0, 2.0, 2.0, 2.0, 2.0, 2.0]


def test_bench_writes_every_column(tmp_path):
    out = tmp_path / "bench.csv"
    assert main(["bench", "--count", "300", "--dim", "2", "--ks", "2,4", "--num-pivots", "10",
                 "--num-groups", "4", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert list(rows[0]) == BENCH_FIELDS
    assert [r["engine"] for r in rows] == ["PGBJ", "PGBJ", "BLOCK_BASELINE", "BLOCK_BASELINE"]


class TestErrors:
    def test_k_too_large(self, tmp_path, capsys):
        f = tmp_path / "p.csv"
        f.write_text("0,1.0\n1,2.0\n")
        assert main(["join", "--r", str(f), "--k", "5", "--num-pivots", "1", "--num-groups", "1"]) == 1
        assert "cross join" in capsys.readouterr().err

    def test_malformed_input(self, tmp_path, capsys):
        f = tmp_path / "p.csv"
        f.write_text("0,1.0,2.0\n1,2.0\n")
        assert main(["oracle", "--r", str(f), "--k", "1"]) == 1
        assert ":2:" in capsys.readouterr().err

    def test_join_without_input(self):
        assert main(["join"]) == 2

    def test_missing_file(self, tmp_path):
        assert main(["oracle", "--r", str(tmp_path / "nope.csv")]) == 1


def test_artifact_join_warns_only_on_conflicting_k(data, tmp_path, capsys, caplog):
    r, _ = data
    piv, art = tmp_path / "piv.csv", tmp_path / "art"
    assert main(["pivots", "--r", str(r), "--num-pivots", "10", "--out", str(piv)]) == 0
    assert main(["partition", "--r", str(r), "--pivots", str(piv), "--k", "3", "--artifacts", str(art)]) == 0
    capsys.readouterr()
    assert main(["join", "--artifacts", str(art)]) == 0
    assert "ignored" not in caplog.text
    capsys.readouterr()
    assert main(["join", "--artifacts", str(art), "--k", "7"]) == 0
    assert "ignored" in caplog.text
    assert json.loads(capsys.readouterr().out)["k"] == 3
