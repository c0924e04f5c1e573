import json

import numpy as np
import pandas as pd
import pytest

from pairrank.cli import build_parser, main


@pytest.fixture
def ingested(tmp_path, fixtures_dir):
    out = tmp_path / "ingest"
    code = main([
        "ingest", str(fixtures_dir / "matches_small.csv"), "--input-format", "matches",
        "--labels", str(fixtures_dir / "players_small.txt"), "--out-dir", str(out),
    ])
    assert code == 0
    return out / "dataset.json"


class TestIngest:
    def test_citations(self, tmp_path, fixtures_dir):
        assert main(["ingest", str(fixtures_dir / "citations_small.csv"), "--out-dir", str(tmp_path)]) == 0
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["players"] == 4
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["command"] == "ingest"
        assert len(manifest["input_digests"]) == 1

    def test_unknown_label_exits_2(self, tmp_path, fixtures_dir, capsys):
        labels = tmp_path / "players.txt"
        labels.write_text("alice\nbob\ncarol\n")
        code = main([
            "ingest", str(fixtures_dir / "matches_small.csv"), "--input-format", "matches",
            "--labels", str(labels), "--out-dir", str(tmp_path / "out"),
        ])
        assert code == 2
        err = capsys.readouterr().err
        assert "'dave'" in err
        assert "line 6" in err
        assert not (tmp_path / "out" / "dataset.json").exists()


class TestRank:
    def test_all_methods(self, tmp_path, ingested):
        out = tmp_path / "rank"
        assert main(["rank", str(ingested), "--threads", "1", "--out-dir", str(out)]) == 0
        rankings = pd.read_csv(out / "rankings.csv")
        assert len(rankings) == 7 * 4
        assert set(rankings["method"]) == {"MLE", "KWPM", "KWPMs", "KWPR", "RMLE", "B", "WB"}
        posterior = pd.read_csv(out / "posterior.csv")
        assert posterior["label"].tolist() == ["alice", "bob", "carol", "dave"]
        assert (out / "mixing.csv").exists()
        fit = json.loads((out / "fit.json").read_text())
        assert fit["labels"] == ["alice", "bob", "carol", "dave"]
        assert fit["theta"][0] == 0.0
        assert fit["converged"] is True
        assert not (out / "errors.json").exists()

    def test_json_output(self, tmp_path, ingested):
        out = tmp_path / "rank"
        assert main(["rank", str(ingested), "--methods", "B,WB", "--format", "json", "--out-dir", str(out)]) == 0
        rows = json.loads((out / "rankings.json").read_text())
        borda = {r["label"]: r["score"] for r in rows if r["method"] == "B"}
        # alice wins 4 of her 5 matches
        assert borda["alice"] == 4
        assert not (out / "posterior.json").exists()
        assert not (out / "fit.json").exists()

    def test_failed_method_exits_3_and_keeps_others(self, tmp_path, capsys):
        dataset = tmp_path / "split.json"
        dataset.write_text(json.dumps({
            "p_plus_1": 4, "labels": ["a", "b", "c", "d"],
            "pairs": [[0, 1, 4, 2], [2, 3, 4, 1]],
        }))
        out = tmp_path / "rank"
        code = main(["rank", str(dataset), "--methods", "MLE,B", "--out-dir", str(out)])
        assert code == 3
        rankings = pd.read_csv(out / "rankings.csv")
        assert set(rankings["method"]) == {"B"}
        errors = json.loads((out / "errors.json").read_text())
        assert list(errors) == ["MLE"]

    def test_unknown_method(self, ingested, tmp_path):
        assert main(["rank", str(ingested), "--methods", "MLE,XYZ", "--out-dir", str(tmp_path)]) == 2


class TestPath:
    def test_zero_lambda_reproduces_mle(self, tmp_path, ingested):
        assert main(["path", str(ingested), "--lambdas", "0", "--out-dir", str(tmp_path / "p")]) == 0
        assert main(["rank", str(ingested), "--methods", "MLE", "--out-dir", str(tmp_path / "r")]) == 0
        players = pd.read_csv(tmp_path / "p" / "path_players.csv")
        mle = pd.read_csv(tmp_path / "r" / "rankings.csv").set_index("label")["score"]
        np.testing.assert_allclose(
            np.log(players["alpha"].to_numpy()), mle.loc[players["player_label"]].to_numpy(), atol=1e-5
        )
        manifest = json.loads((tmp_path / "p" / "manifest.json").read_text())
        assert manifest["metadata"]["selected_k"] == "4"

    def test_default_grid(self, tmp_path, ingested):
        assert main(["path", str(ingested), "--grid-size", "6", "--out-dir", str(tmp_path)]) == 0
        summary = pd.read_csv(tmp_path / "path_summary.csv")
        assert len(summary) == 6
        assert summary["k"].iloc[-1] == 1

    def test_bad_lambdas(self, tmp_path, ingested):
        assert main(["path", str(ingested), "--lambdas", "0,abc", "--out-dir", str(tmp_path)]) == 2
        assert main(["path", str(ingested), "--lambdas", "1,0.5", "--out-dir", str(tmp_path)]) == 2


class TestSimulate:
    def test_smoke_preset_is_reproducible(self, tmp_path):
        runs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(["simulate", "--preset", "smoke", "--seed", "3", "--threads", "1", "--out-dir", str(out)]) == 0
            runs.append(out)
        for table in ("sim_results.csv", "sim_summary.csv", "sim_failures.csv"):
            assert (runs[0] / table).read_bytes() == (runs[1] / table).read_bytes()
        results = pd.read_csv(runs[0] / "sim_results.csv")
        assert len(results) == 2 * 7 * 2
        manifest = json.loads((runs[0] / "manifest.json").read_text())
        assert manifest["seed"] == 3
        assert manifest["metadata"]["preset"] == "smoke"

    def test_bad_config_keys_exit_2(self, tmp_path, capsys):
        config = tmp_path / "sim.json"
        config.write_text(json.dumps({"p_plus_1": 10, "replicatons": 3}))
        assert main(["simulate", str(config), "--out-dir", str(tmp_path / "out")]) == 2
        assert "replicatons" in capsys.readouterr().err

    def test_unknown_preset(self, tmp_path, capsys):
        assert main(["simulate", "--preset", "nope", "--out-dir", str(tmp_path)]) == 2
        assert "smoke" in capsys.readouterr().err


def test_parser_requires_a_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])
