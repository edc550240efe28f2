import json

import pytest
from click.testing import CliRunner

from graphforge.cli import main
from graphforge.errors import GraphForgeError, VerificationFailure
from graphforge.pipeline import run_pipeline, verify_bundle


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


PIPE_CONFIG = {
    "preset": "fin-mini",
    "nodes": 220,
    "seed": 5,
    "profile": {"seed": 0},
    "workload": {"noagg": 16, "agg": 10, "management": 4},
    "answerer": "oracle",
    "tasks": [1, 2],
}


@pytest.fixture(scope="module")
def bundle(tmp_path_factory):
    out = tmp_path_factory.mktemp("bundle")
    manifest = run_pipeline(dict(PIPE_CONFIG), out)
    return out, manifest


def test_synth_and_ingest_roundtrip(runner, tmp_path):
    out = tmp_path / "g"
    result = runner.invoke(main, ["synth", "--preset", "fin-mini", "--nodes", "120", "--seed", "3", "--out", str(out)])
    assert result.exit_code == 0, result.output
    manifest = json.loads(result.output)
    assert manifest["node_count"] == 120

    out2 = tmp_path / "g2"
    result = runner.invoke(
        main,
        ["ingest", "--nodes", str(out / "nodes.jsonl"), "--edges", str(out / "edges.jsonl"), "--out", str(out2)],
    )
    assert result.exit_code == 0, result.output
    assert json.loads(result.output)["digest"] == manifest["digest"]


def test_perturb_and_templates_cli(runner, tmp_path):
    g = tmp_path / "g"
    runner.invoke(main, ["synth", "--preset", "fin-mini", "--nodes", "120", "--seed", "3", "--out", str(g)])
    noisy = tmp_path / "noisy"
    result = runner.invoke(main, ["perturb", "--graph", str(g), "--seed", "5", "--out", str(noisy)])
    assert result.exit_code == 0, result.output
    assert (noisy / "perturbation_log.jsonl").exists()

    tpl = tmp_path / "templates.jsonl"
    result = runner.invoke(main, ["templates", "--graph", str(g), "--out", str(tpl)])
    assert result.exit_code == 0, result.output
    assert json.loads(result.output)["operator_tags"] == 29


def test_exec_cli(runner, tmp_path):
    g = tmp_path / "g"
    runner.invoke(main, ["synth", "--preset", "fin-mini", "--nodes", "80", "--seed", "3", "--out", str(g)])
    result = runner.invoke(main, ["exec", "--graph", str(g), "--query", "MATCH (n:Person) RETURN count(n) AS c"])
    assert result.exit_code == 0, result.output
    lines = result.output.strip().splitlines()
    assert json.loads(lines[0]) == {"columns": ["c"]}
    engine_count = json.loads(lines[1])["row"][0]

    result = runner.invoke(
        main, ["exec", "--graph", str(g), "--query", "MATCH (n:Person) RETURN count(n) AS c", "--reference"]
    )
    assert result.exit_code == 0
    assert json.loads(result.output.strip().splitlines()[1])["row"][0] == engine_count


def test_pipeline_bundle_layout(bundle):
    out, manifest = bundle
    for rel in (
        "clean/nodes.jsonl",
        "clean/edges.jsonl",
        "noisy/nodes.jsonl",
        "perturbation_log.jsonl",
        "profile.json",
        "templates.jsonl",
        "workload/manifest.json",
        "reports/task1.json",
        "reports/task1.txt",
        "reports/task2.json",
        "pipeline_manifest.json",
    ):
        assert (out / rel).exists(), rel
    assert manifest["bundle_digest"]
    assert len(manifest["stages"]) == 5


def test_pipeline_deterministic(bundle, tmp_path):
    out, manifest = bundle
    rerun = run_pipeline(dict(PIPE_CONFIG), tmp_path / "again")
    assert rerun["bundle_digest"] == manifest["bundle_digest"]
    # stage isolation: per-stage digests identical too
    for a, b in zip(manifest["stages"], rerun["stages"]):
        assert a["output_digests"] == b["output_digests"]


def test_pipeline_missing_profile(tmp_path):
    config = dict(PIPE_CONFIG)
    del config["profile"]
    with pytest.raises(GraphForgeError) as err:
        run_pipeline(config, tmp_path / "x")
    assert "profile" in str(err.value)


def test_pipeline_failed_stage_named_and_retained(tmp_path):
    config = dict(PIPE_CONFIG)
    del config["preset"]
    config["graph"] = str(tmp_path / "missing-graph")
    with pytest.raises(GraphForgeError) as err:
        run_pipeline(config, tmp_path / "x")
    assert "stage synth failed" in str(err.value)


def test_verify_fresh_bundle(bundle):
    out, _ = bundle
    summary = verify_bundle(out, reference_cap=250)
    assert summary["checks"]["ground_truth_recheck"] > 0
    assert summary["skipped_reference"] == 0


def test_verify_detects_injected_corruption(bundle, tmp_path):
    import shutil

    out, _ = bundle
    copy = tmp_path / "tampered"
    shutil.copytree(out, copy)
    # hand-edit one ground truth
    target = copy / "workload/queries/agg/instances.jsonl"
    lines = target.read_text().splitlines()
    record = json.loads(lines[0])
    record["ground_truth"]["value"] = (record["ground_truth"]["value"] or 0) + 999
    lines[0] = json.dumps(record, sort_keys=True, separators=(",", ":"))
    target.write_text("\n".join(lines) + "\n")
    with pytest.raises(VerificationFailure) as err:
        verify_bundle(copy, reference_cap=250)
    truth_mismatches = [m for m in err.value.mismatches if "ground truth" in m]
    assert len(truth_mismatches) == 1


def test_verify_over_cap_skips_recheck(bundle):
    out, _ = bundle
    summary = verify_bundle(out, reference_cap=10)
    assert summary["skipped_reference"] > 0


def test_eval_cli(runner, bundle, tmp_path):
    out, _ = bundle
    report_path = tmp_path / "report.json"
    result = runner.invoke(
        main,
        [
            "eval",
            "--task",
            "1",
            "--workload",
            str(out / "workload"),
            "--clean",
            str(out / "clean"),
            "--noisy",
            str(out / "noisy"),
            "--answerer",
            "echo",
            "--report",
            str(report_path),
        ],
    )
    assert result.exit_code == 0, result.output
    assert "task 1 report" in result.output
    stored = json.loads(report_path.read_text())
    assert stored["failures"] == 0


def test_verify_cli(runner, bundle):
    out, _ = bundle
    result = runner.invoke(main, ["verify", "--bundle", str(out)])
    assert result.exit_code == 0, result.output


def test_pipeline_cli(runner, tmp_path):
    config_path = tmp_path / "cfg.json"
    config = dict(PIPE_CONFIG)
    config["nodes"] = 120
    config["workload"] = {"noagg": 6, "agg": 4, "management": 2}
    config_path.write_text(json.dumps(config))
    result = runner.invoke(main, ["pipeline", "--config", str(config_path), "--out", str(tmp_path / "b")])
    assert result.exit_code == 0, result.output
    assert "bundle_digest" in result.output
