"""End-to-end orchestration: synth -> perturb -> templates -> sample -> eval.

Every stage derives its seed from the root seed and the stage name, so a
stage can be rerun in isolation and reproduce identical bytes. The bundle
digest covers only deterministic artifacts; wall-clock fields (latencies,
timestamps) live outside it.
"""

from __future__ import annotations

import json
import os
import shutil
import time
from pathlib import Path

from . import __version__
from .cypher import execute, execute_mutation, parse, reference_execute
from .errors import GraphForgeError, VerificationFailure
from .graph import open_mutation_session
from .harness import make_answerer, render_report, run_task1, run_task2, save_report, stratify
from .io import export_graph, load_graph, load_graph_dir
from .perturb import NoiseProfile, PerturbationLog, apply_log, perturb
from . import payload as payload_mod
from .sampler import WorkloadConfig, build_workload, emit_workload, load_workload
from .synth import spec_from_preset, synthesize
from .templates import build_library, save_library
from .values import canonical_dumps, canonicalize_key, derive_seed, sha256_hex

REFERENCE_CAP = 200


def _file_digest(path: Path) -> str:
    return sha256_hex(path.read_bytes())


def run_pipeline(config: dict, out_dir) -> dict:
    """Execute all stages; returns the pipeline manifest."""
    out = Path(out_dir)
    os.makedirs(out, exist_ok=True)
    root_seed = int(config.get("seed", 0))
    stages = []
    started = time.time()

    def record(stage, args, outputs, seed=None):
        stages.append(
            {
                "stage": stage,
                "args": args,
                "seed": seed,
                "output_digests": outputs,
            }
        )

    def guard(stage, path):
        def fail(exc):
            target = out / "failed" / stage
            if Path(path).exists():
                os.makedirs(target.parent, exist_ok=True)
                if target.exists():
                    shutil.rmtree(target)
                shutil.move(str(path), str(target))
            raise GraphForgeError(f"stage {stage} failed: {exc}") from exc

        return fail

    # -- stage: clean graph
    stage_seed = derive_seed(root_seed, "synth")
    clean_dir = out / "clean"
    try:
        if "preset" in config:
            spec = spec_from_preset(config["preset"], int(config.get("nodes", 1000)), stage_seed)
            clean = synthesize(spec)
        elif "graph" in config:
            clean = load_graph_dir(config["graph"])
        else:
            raise GraphForgeError("config needs either 'preset' or 'graph'")
        export_graph(clean, clean_dir, seed_lineage=[root_seed, stage_seed])
    except GraphForgeError:
        raise
    except Exception as exc:
        guard("synth", clean_dir)(exc)
    record(
        "synth",
        {"preset": config.get("preset"), "nodes": config.get("nodes")},
        {"clean": clean.digest()},
        stage_seed,
    )

    # -- stage: perturb
    if "profile" not in config:
        raise GraphForgeError("config is missing the noise profile field 'profile'")
    profile_obj = config["profile"]
    if isinstance(profile_obj, str):
        profile = NoiseProfile.from_file(profile_obj)
    else:
        profile = NoiseProfile(**profile_obj)
    profile = NoiseProfile(**{**json.loads(profile.to_json()), "seed": derive_seed(root_seed, "perturb")})
    profile.validate()
    noisy_dir = out / "noisy"
    try:
        noisy, log = perturb(clean, profile)
        export_graph(noisy, noisy_dir, seed_lineage=[root_seed, profile.seed])
        (out / "perturbation_log.jsonl").write_text(log.to_jsonl(), encoding="utf-8")
        (out / "profile.json").write_text(profile.to_json() + "\n", encoding="utf-8")
    except GraphForgeError:
        raise
    except Exception as exc:
        guard("perturb", noisy_dir)(exc)
    record("perturb", {"profile": json.loads(profile.to_json())}, {"noisy": noisy.digest()}, profile.seed)

    # -- stage: templates
    library = build_library(clean.schema)
    save_library(library, out / "templates.jsonl")
    record("templates", {}, {"templates": _file_digest(out / "templates.jsonl")})

    # -- stage: sample
    wl_conf = config.get("workload", {})
    sample_seed = derive_seed(root_seed, "sample")
    wl = WorkloadConfig(
        noagg=int(wl_conf.get("noagg", 400)),
        agg=int(wl_conf.get("agg", 300)),
        management=int(wl_conf.get("management", 40)),
        perturbed_share=float(wl_conf.get("perturbed_share", 0.5)),
        seed=sample_seed,
    )
    workload_dir = out / "workload"
    try:
        instances = build_workload(clean, log, library, wl)
        manifest = emit_workload(instances, workload_dir)
    except GraphForgeError:
        raise
    except Exception as exc:
        guard("sample", workload_dir)(exc)
    record("sample", {"workload": wl_conf}, {"workload": manifest["digest"]}, sample_seed)

    # -- stage: eval
    reports_dir = out / "reports"
    os.makedirs(reports_dir, exist_ok=True)
    answer_desc = config.get("answerer", "oracle")
    eval_seed = derive_seed(root_seed, "eval")
    report_digests = {}
    tasks = config.get("tasks", [1, 2])
    if 1 in tasks:
        answerer = make_answerer(answer_desc, noisy, instances)
        report1 = run_task1(instances, clean, noisy, answerer, seed=eval_seed)
        answerer.close()
        save_report(report1, reports_dir / "task1.json")
        (reports_dir / "task1.txt").write_text(render_report(report1, "text"), encoding="utf-8")
        report_digests["task1"] = sha256_hex(_canonical_report(report1).encode("utf-8"))
        (reports_dir / "task1.canonical.json").write_text(_canonical_report(report1), encoding="utf-8")
    if 2 in tasks:
        answerer = make_answerer(answer_desc, noisy, instances)
        report2 = run_task2(instances, clean, answerer, seed=eval_seed, expected_k=config.get("k", 5))
        answerer.close()
        save_report(report2, reports_dir / "task2.json")
        (reports_dir / "task2.txt").write_text(render_report(report2, "text"), encoding="utf-8")
        report_digests["task2"] = sha256_hex(_canonical_report(report2).encode("utf-8"))
        (reports_dir / "task2.canonical.json").write_text(_canonical_report(report2), encoding="utf-8")
    record("eval", {"answerer": answer_desc, "tasks": tasks}, report_digests, eval_seed)

    bundle_digest = sha256_hex(
        canonical_dumps([s["output_digests"] for s in stages]).encode("utf-8")
    )
    manifest = {
        "tool_version": __version__,
        "root_seed": root_seed,
        "config": config,
        "stages": stages,
        "bundle_digest": bundle_digest,
        "wall_seconds": round(time.time() - started, 3),
        "finished_at": int(time.time()),
    }
    (out / "pipeline_manifest.json").write_text(canonical_dumps(manifest) + "\n", encoding="utf-8")
    return manifest


def _canonical_report(report) -> str:
    """Report serialization with wall-clock fields removed."""
    obj = report.to_jsonable()
    for record in obj.get("records", []):
        record.pop("latency_ms", None)
    return canonical_dumps(obj) + "\n"


# -- verification -------------------------------------------------------------------


def verify_bundle(bundle_dir, reference_cap: int = REFERENCE_CAP) -> dict:
    """Recompute digests, ground truths, labels, and stratification.

    Raises VerificationFailure listing every mismatch; returns a summary
    record when everything checks out.
    """
    bundle = Path(bundle_dir)
    mismatches: list = []
    summary = {"checks": {}, "skipped_reference": 0}

    manifest_path = bundle / "pipeline_manifest.json"
    manifest = json.loads(manifest_path.read_text(encoding="utf-8")) if manifest_path.exists() else None

    clean = load_graph_dir(bundle / "clean")
    noisy = load_graph_dir(bundle / "noisy")
    for name, snapshot in (("clean", clean), ("noisy", noisy)):
        stored = json.loads((bundle / name / "manifest.json").read_text(encoding="utf-8"))
        if stored["digest"] != snapshot.digest():
            mismatches.append(f"{name} graph digest mismatch")
        summary["checks"][f"{name}_digest"] = True

    log_path = bundle / "perturbation_log.jsonl"
    if log_path.exists():
        log = PerturbationLog.from_jsonl(log_path.read_text(encoding="utf-8"))
        replay = apply_log(clean, log)
        if replay.digest() != noisy.digest():
            mismatches.append("perturbation log replay does not reproduce the noisy graph")
        summary["checks"]["log_replay"] = True

    workload_dir = bundle / "workload"
    instances = load_workload(workload_dir)
    wl_manifest = json.loads((workload_dir / "manifest.json").read_text(encoding="utf-8"))
    for rel, meta in wl_manifest["files"].items():
        actual = sha256_hex((workload_dir / rel).read_bytes())
        if actual != meta["sha256"]:
            mismatches.append(f"workload file digest mismatch: {rel}")
    summary["checks"]["workload_digests"] = True

    within_cap = clean.node_count() <= reference_cap
    recheck = 0
    for instance in instances:
        if instance.category == "Management":
            state = clean
            for step in instance.steps:
                session = open_mutation_session(state)
                execute_mutation(parse(step["op"]), session)
                state = session.commit()
                table = execute(parse(step["validation"]), state)
                value = table.rows[0][0] if table.rows else None
                expected = step["expected"]["value"]
                if not payload_mod.scalars_close(value, expected):
                    mismatches.append(f"{instance.id}: step validation mismatch ({value} != {expected})")
            continue
        if not within_cap:
            summary["skipped_reference"] += 1
            continue
        recheck += 1
        truth = instance.ground_truth
        if instance.category == "NoAggBoolean":
            table = reference_execute(parse(instance.cypher), clean, cap=reference_cap)
            answers = {canonicalize_key(str(r[0])) for r in table.rows if r[0] is not None}
            labels = {c: canonicalize_key(c) in answers for c in instance.candidates}
            if payload_mod.boolean_labels(labels) != truth:
                mismatches.append(f"{instance.id}: boolean labels disagree with the reference evaluator")
            continue
        table = reference_execute(parse(instance.cypher), clean, cap=reference_cap)
        from .harness import table_to_payload

        recomputed = table_to_payload(table, truth["kind"])
        if not payload_mod.payload_equal(recomputed, truth):
            mismatches.append(f"{instance.id}: ground truth disagrees with the reference evaluator")
    summary["checks"]["ground_truth_recheck"] = recheck

    # stratification labels embedded in reports
    report_path = bundle / "reports" / "task1.json"
    if report_path.exists():
        report = json.loads(report_path.read_text(encoding="utf-8"))
        labeled = {i.id: i for i in stratify([i for i in instances if i.category != "Management"], clean, noisy)}
        for record in report.get("records", []):
            expected = labeled.get(record["id"])
            if expected is not None and record.get("stratum") != expected.stratum:
                mismatches.append(f"{record['id']}: stratification label mismatch")
        summary["checks"]["stratification"] = True

    if manifest is not None:
        summary["checks"]["bundle_digest"] = manifest.get("bundle_digest")

    if mismatches:
        raise VerificationFailure(mismatches)
    return summary
