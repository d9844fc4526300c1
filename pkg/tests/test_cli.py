import hashlib
import json

import pytest

from dgslow.cli import main

ATTACK_FLAGS = ["--candidates", "8", "--query-budget", "200", "--limit", "6", "--seed", "3"]


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    corpus = root / "corpus.jsonl"
    victim = root / "victim.json"
    assert main(["gen-corpus", "--seed", "11", "--n", "25", "--turns", "2", "--out", str(corpus)]) == 0
    assert main(
        ["train-victim", "--corpus", str(corpus), "--out", str(victim), "--epochs", "8", "--seed", "0"]
    ) == 0
    return root, corpus, victim


class TestGenCorpus:
    def test_rerun_same_hash(self, tmp_path):
        digests = []
        for name in ("a.jsonl", "b.jsonl"):
            out = tmp_path / name
            assert main(["gen-corpus", "--seed", "5", "--n", "10", "--out", str(out)]) == 0
            digests.append(hashlib.sha256(out.read_bytes()).hexdigest())
        assert digests[0] == digests[1]

    def test_line_count(self, tmp_path):
        out = tmp_path / "c.jsonl"
        main(["gen-corpus", "--seed", "1", "--n", "7", "--turns", "3", "--out", str(out)])
        assert len(out.read_text().splitlines()) == 21

    def test_n_zero_is_usage_error(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["gen-corpus", "--seed", "1", "--n", "0", "--out", str(tmp_path / "x")])
        assert exc.value.code == 1

    def test_out_dir_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("DGSLOW_OUT_DIR", str(tmp_path))
        assert main(["gen-corpus", "--seed", "1", "--n", "2"]) == 0
        assert (tmp_path / "corpus.jsonl").exists()


class TestTrainVictim:
    def test_too_small_corpus(self, tmp_path):
        corpus = tmp_path / "tiny.jsonl"
        main(["gen-corpus", "--seed", "1", "--n", "2", "--turns", "1", "--out", str(corpus)])
        code = main(["train-victim", "--corpus", str(corpus), "--out", str(tmp_path / "v.json")])
        assert code == 2

    def test_missing_corpus(self, tmp_path):
        code = main(["train-victim", "--corpus", str(tmp_path / "nope.jsonl"), "--out", str(tmp_path / "v")])
        assert code == 2

    def test_deterministic_checkpoints(self, workdir, tmp_path):
        _, corpus, _ = workdir
        blobs = []
        for name in ("v1.json", "v2.json"):
            out = tmp_path / name
            assert main(["train-victim", "--corpus", str(corpus), "--out", str(out),
                         "--epochs", "3", "--seed", "4"]) == 0
            blobs.append(out.read_bytes())
        assert blobs[0] == blobs[1]


class TestAttack:
    def _attack(self, workdir, out, extra=()):
        root, corpus, victim = workdir
        args = ["attack", "--corpus", str(corpus), "--victim", str(victim), "--out", str(out),
                *ATTACK_FLAGS, *extra]
        return main(args)

    def test_writes_all_outputs(self, workdir, tmp_path):
        out = tmp_path / "run"
        assert self._attack(workdir, out) == 0
        for name in ("report.json", "report.csv", "records.csv", "manifest.json", "traces.jsonl"):
            assert (out / name).exists(), name
        report = json.loads((out / "report.json").read_text())
        assert report["n"] == 6
        assert set(report) >= {"asr", "mean_gl", "mean_bleu", "mean_rouge_l", "mean_meteor_lite", "mean_cosine"}
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["query_budget"] == 200
        traces = [json.loads(l) for l in (out / "traces.jsonl").read_text().splitlines()]
        assert len(traces) == 6

    def test_byte_identical_reports(self, workdir, tmp_path):
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        assert self._attack(workdir, out1) == 0
        assert self._attack(workdir, out2) == 0
        assert (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()

    def test_manifest_rerun_reproduces_report(self, workdir, tmp_path):
        out = tmp_path / "run"
        assert self._attack(workdir, out) == 0
        before = (out / "report.json").read_bytes()
        assert main(["attack", "--manifest", str(out / "manifest.json")]) == 0
        assert (out / "report.json").read_bytes() == before

    def test_strategy_flags_force_modes(self, workdir, tmp_path):
        for strategy, allowed in (("rs", {"random"}), ("gs", {"greedy"})):
            out = tmp_path / f"run-{strategy}"
            assert self._attack(workdir, out, extra=["--strategy", strategy]) == 0
            for line in (out / "traces.jsonl").read_text().splitlines():
                modes = {step["mode"] for step in json.loads(line)["trace"]}
                assert modes <= allowed

    def test_requires_corpus_and_victim(self):
        with pytest.raises(SystemExit) as exc:
            main(["attack", "--strategy", "rs"])
        assert exc.value.code == 1

    def test_missing_victim_is_runtime_error(self, workdir, tmp_path):
        root, corpus, _ = workdir
        code = main(["attack", "--corpus", str(corpus), "--victim", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path / "r")])
        assert code == 2


class TestEvaluate:
    def test_table_from_two_reports(self, workdir, tmp_path, capsys):
        out1, out2 = tmp_path / "e1", tmp_path / "e2"
        root, corpus, victim = workdir
        for out, strategy in ((out1, "dgslow"), (out2, "rs")):
            main(["attack", "--corpus", str(corpus), "--victim", str(victim), "--out", str(out),
                  *ATTACK_FLAGS, "--strategy", strategy])
        capsys.readouterr()
        csv_path = tmp_path / "table.csv"
        code = main(["evaluate", str(out1 / "report.json"), str(out2 / "report.json"), "--csv", str(csv_path)])
        assert code == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 3  # header + two rows
        assert "ASR" in lines[0]
        assert csv_path.exists()

    def test_single_report_passthrough(self, workdir, tmp_path, capsys):
        out = tmp_path / "e3"
        self_attack = TestAttack()
        assert self_attack._attack(workdir, out) == 0
        capsys.readouterr()
        assert main(["evaluate", str(out / "report.json")]) == 0
        assert len(capsys.readouterr().out.strip().splitlines()) == 2

    def test_schema_mismatch(self, workdir, tmp_path):
        out = tmp_path / "e4"
        TestAttack()._attack(workdir, out)
        report = json.loads((out / "report.json").read_text())
        report["schema_version"] = 99
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(report))
        assert main(["evaluate", str(bad)]) == 2
