"""The `forge` command line: one subcommand per pipeline stage."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import __version__
from .cypher import execute, execute_mutation, parse, reference_execute
from .errors import GraphForgeError
from .graph import open_mutation_session
from .harness import make_answerer, render_report, run_task1, run_task2, save_report
from .io import export_graph, load_graph, load_graph_dir
from .perturb import NoiseProfile, perturb
from .pipeline import run_pipeline, verify_bundle
from .sampler import WorkloadConfig, build_workload, emit_workload, load_workload
from .synth import spec_from_preset, spec_from_file, synthesize
from .templates import build_library, save_library
from .values import canonical_dumps


@click.group()
@click.version_option(__version__, prog_name="forge")
def main():
    """Forge paired clean/noisy graph benchmarks and evaluate answerers."""


@main.command()
@click.option("--preset", type=str, default=None, help="Built-in preset name (fin-mini, bi-mini, prime-mini).")
@click.option("--spec", "spec_path", type=click.Path(exists=True), default=None, help="Synthesis spec file.")
@click.option("--nodes", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def synth(preset, spec_path, nodes, seed, out):
    """Synthesize a desk-scale graph from a preset or spec file."""
    if (preset is None) == (spec_path is None):
        raise click.UsageError("provide exactly one of --preset or --spec")
    spec = spec_from_preset(preset, nodes, seed) if preset else spec_from_file(spec_path, seed)
    snapshot = synthesize(spec)
    manifest = export_graph(snapshot, out, seed_lineage=[seed])
    click.echo(canonical_dumps(manifest))


@main.command()
@click.option("--nodes", "nodes_path", type=click.Path(exists=True), required=True)
@click.option("--edges", "edges_path", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True)
def ingest(nodes_path, edges_path, out):
    """Load a graph from canonical jsonl files and re-export it."""
    snapshot = load_graph(nodes_path, edges_path)
    manifest = export_graph(snapshot, out)
    click.echo(canonical_dumps(manifest))


@main.command("perturb")
@click.option("--graph", "graph_dir", type=click.Path(exists=True), required=True)
@click.option("--profile", "profile_path", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=None, help="Overrides the profile seed.")
@click.option("--out", type=click.Path(), required=True)
def perturb_cmd(graph_dir, profile_path, seed, out):
    """Apply the noise profile; writes the noisy graph and its log."""
    clean = load_graph_dir(graph_dir)
    profile = NoiseProfile.from_file(profile_path) if profile_path else NoiseProfile()
    if seed is not None:
        profile = NoiseProfile(**{**json.loads(profile.to_json()), "seed": seed})
    profile.validate()
    noisy, log = perturb(clean, profile)
    export_graph(noisy, out)
    out_path = Path(out)
    (out_path / "perturbation_log.jsonl").write_text(log.to_jsonl(), encoding="utf-8")
    (out_path / "profile.json").write_text(profile.to_json() + "\n", encoding="utf-8")
    click.echo(canonical_dumps({"noisy_digest": noisy.digest(), "records": log.counts()}))


@main.command("templates")
@click.option("--graph", "graph_dir", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True)
def templates_cmd(graph_dir, out):
    """Build the template library from the graph's schema."""
    snapshot = load_graph_dir(graph_dir)
    library = build_library(snapshot.schema)
    save_library(library, out)
    click.echo(
        canonical_dumps(
            {
                "basic": len(library.basic),
                "noagg": len(library.noagg),
                "agg": len(library.agg),
                "boolean_pairs": len(library.boolean_pairs),
                "management": len(library.management),
                "operator_tags": len(library.all_tags()),
            }
        )
    )


@main.command()
@click.option("--clean", "clean_dir", type=click.Path(exists=True), required=True)
@click.option("--log", "log_path", type=click.Path(exists=True), default=None)
@click.option("--noagg", type=int, default=400, show_default=True)
@click.option("--agg", type=int, default=300, show_default=True)
@click.option("--management", type=int, default=40, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def sample(clean_dir, log_path, noagg, agg, management, seed, out):
    """Instantiate templates into a workload bundle."""
    from .perturb import PerturbationLog

    clean = load_graph_dir(clean_dir)
    log = PerturbationLog.from_jsonl(Path(log_path).read_text(encoding="utf-8")) if log_path else None
    library = build_library(clean.schema)
    config = WorkloadConfig(noagg=noagg, agg=agg, management=management, seed=seed)
    instances = build_workload(clean, log, library, config)
    manifest = emit_workload(instances, out)
    click.echo(canonical_dumps(manifest))


@main.command("exec")
@click.option("--graph", "graph_dir", type=click.Path(exists=True), required=True)
@click.option("--query", type=str, required=True)
@click.option("--reference", is_flag=True, help="Use the brute-force reference evaluator.")
def exec_cmd(graph_dir, query, reference):
    """Run one Cypher statement and print the result table."""
    snapshot = load_graph_dir(graph_dir)
    plan = parse(query)
    if not plan.read_only:
        session = open_mutation_session(snapshot)
        summary = execute_mutation(plan, session)
        session.commit()
        click.echo(canonical_dumps(summary.as_dict()))
        return
    table = reference_execute(plan, snapshot) if reference else execute(plan, snapshot)
    click.echo(table.serialize(), nl=False)


@main.command("eval")
@click.option("--task", type=click.Choice(["1", "2"]), required=True)
@click.option("--workload", "workload_dir", type=click.Path(exists=True), required=True)
@click.option("--clean", "clean_dir", type=click.Path(exists=True), required=True)
@click.option("--noisy", "noisy_dir", type=click.Path(exists=True), default=None)
@click.option("--answerer", type=str, default="oracle", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--report", "report_path", type=click.Path(), required=True)
def eval_cmd(task, workload_dir, clean_dir, noisy_dir, answerer, seed, report_path):
    """Evaluate an answerer on a workload; writes the report file."""
    clean = load_graph_dir(clean_dir)
    noisy = load_graph_dir(noisy_dir) if noisy_dir else clean
    workload = load_workload(workload_dir)
    answerer_obj = make_answerer(answerer, noisy, workload)
    try:
        if task == "1":
            report = run_task1(workload, clean, noisy, answerer_obj, seed=seed)
        else:
            report = run_task2(workload, clean, answerer_obj, seed=seed)
    finally:
        answerer_obj.close()
    save_report(report, report_path)
    click.echo(render_report(report, "text"), nl=False)


@main.command()
@click.option("--bundle", "bundle_dir", type=click.Path(exists=True), required=True)
def verify(bundle_dir):
    """Re-derive digests, ground truths, and labels for a bundle."""
    summary = verify_bundle(bundle_dir)
    click.echo(canonical_dumps(summary))


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), default=None, help="Overrides the config's out directory.")
def pipeline(config_path, out):
    """Run every stage end to end and write the bundle + manifest."""
    config = json.loads(Path(config_path).read_text(encoding="utf-8"))
    out_dir = out or config.get("out")
    if not out_dir:
        raise click.UsageError("config is missing 'out' (or pass --out)")
    manifest = run_pipeline(config, out_dir)
    click.echo(canonical_dumps({"bundle_digest": manifest["bundle_digest"], "stages": len(manifest["stages"])}))


def run():  # pragma: no cover - console-script shim
    try:
        main(standalone_mode=True)
    except GraphForgeError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":  # pragma: no cover
    run()
