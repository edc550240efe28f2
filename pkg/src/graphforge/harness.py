"""Task runners: robust analytical QA (Task I) and sequential graph
editing (Task II), with pluggable black-box answerers.

Answerers see one request record per query — ``{id, task, nl, cypher?,
category, candidates?, history?}`` — and reply ``{id, payload}`` with an
answer payload, or ``{id, cypher}`` to have the harness execute their
query text against the noisy graph (the text-to-Cypher loop). Failures are
recorded and scored as worst case; nothing is silently dropped.
"""

from __future__ import annotations

import json
import os
import queue
import subprocess
import threading
import time
import urllib.request
from dataclasses import dataclass, field

from . import __version__
from . import payload as payload_mod
from .cypher import execute, execute_mutation, parse
from .errors import AnswererProtocolError, AnswererTimeout, EngineError, GraphForgeError
from .graph import GraphSnapshot, open_mutation_session
from .metrics import MetricAccumulator, ScalarPrediction, SetPrediction, StepTrace, step_score
from .sampler import QueryInstance
from .values import canonical_dumps, canonicalize_key

CONSISTENT = "Consistent"
INCONSISTENT = "Inconsistent"


def default_timeout_ms() -> int:
    return int(os.environ.get("FORGE_TIMEOUT_MS", "10000"))


# -- answer extraction helpers --------------------------------------------------


def table_to_payload(table, kind: str) -> dict:
    if kind == payload_mod.SCALAR:
        value = table.rows[0][0] if table.rows else None
        return payload_mod.scalar(value if isinstance(value, (int, float)) and not isinstance(value, bool) else None)
    if kind == payload_mod.ENTITY_SET:
        return payload_mod.entity_set({str(r[0]) for r in table.rows if r[0] is not None})
    from .cypher.table import cell_to_jsonable

    return payload_mod.rows([[cell_to_jsonable(c) for c in row] for row in table.rows])


class Answerer:
    """Base class; subclasses implement answer(request) -> response dict."""

    kind = "abstract"

    def answer(self, request: dict) -> dict:
        raise NotImplementedError

    def start_batch(self, instance: QueryInstance, base: GraphSnapshot):
        """Hook for Task II state reset at the start of each batch."""

    def close(self):
        pass


class OracleCypherAnswerer(Answerer):
    """Executes each query's ground-truth Cypher on the noisy graph."""

    kind = "oracle"

    def __init__(self, noisy: GraphSnapshot):
        self.noisy = noisy
        self._session_state = None
        self._cache: dict = {}

    def _execute(self, cypher: str):
        key = cypher
        if key not in self._cache:
            self._cache[key] = execute(parse(cypher), self.noisy)
        return self._cache[key]

    def answer(self, request: dict) -> dict:
        if request.get("task") == 2:
            return self._answer_step(request)
        kind = request["truth_kind"]
        table = self._execute(request["cypher"])
        if request["category"] == "NoAggBoolean":
            answers = {canonicalize_key(str(r[0])) for r in table.rows if r[0] is not None}
            labels = {c: canonicalize_key(c) in answers for c in request["candidates"]}
            return {"id": request["id"], "payload": payload_mod.boolean_labels(labels)}
        return {"id": request["id"], "payload": table_to_payload(table, kind)}

    def start_batch(self, instance: QueryInstance, base: GraphSnapshot):
        self._session_state = base

    def _answer_step(self, request: dict) -> dict:
        session = open_mutation_session(self._session_state)
        execute_mutation(parse(request["op"]), session)
        self._session_state = session.commit()
        table = execute(parse(request["validation"]), self._session_state)
        return {"id": request["id"], "payload": table_to_payload(table, payload_mod.SCALAR)}


ReplayAnswerer = OracleCypherAnswerer  # Task II alias: applies each step itself


class EchoGroundTruthAnswerer(Answerer):
    """Returns the stored ground truth; the harness upper-bound self-test."""

    kind = "echo"

    def __init__(self, workload):
        self.by_id = {i.id: i for i in workload}
        self._step_truths: list = []

    def start_batch(self, instance: QueryInstance, base: GraphSnapshot):
        self._step_truths = [step["expected"] for step in instance.steps]

    def answer(self, request: dict) -> dict:
        if request.get("task") == 2:
            return {"id": request["id"], "payload": self._step_truths[request["step"]]}
        return {"id": request["id"], "payload": self.by_id[request["id"]].ground_truth}


class SkipStepAnswerer(OracleCypherAnswerer):
    """Replay answerer that ignores one modification step (divergence probe)."""

    kind = "skip-step"

    def __init__(self, noisy: GraphSnapshot, skip_step: int):
        super().__init__(noisy)
        self.skip_step = skip_step

    def _answer_step(self, request: dict) -> dict:
        if request["step"] == self.skip_step:
            table = execute(parse(request["validation"]), self._session_state)
            return {"id": request["id"], "payload": table_to_payload(table, payload_mod.SCALAR)}
        return super()._answer_step(request)


class ExternalProcessAnswerer(Answerer):
    """Line-delimited JSON over a child process's stdin/stdout."""

    kind = "proc"

    def __init__(self, command: str, timeout_ms: int | None = None):
        self.command = command
        self.timeout = (timeout_ms or default_timeout_ms()) / 1000.0
        self.proc = subprocess.Popen(
            command,
            shell=True,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        self._lines: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self):
        for line in self.proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def answer(self, request: dict) -> dict:
        try:
            self.proc.stdin.write(canonical_dumps(request) + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, ValueError) as exc:
            raise AnswererProtocolError(f"answerer process closed stdin: {exc}") from None
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            raise AnswererTimeout(f"no response within {self.timeout:.1f}s") from None
        if line is None:
            raise AnswererProtocolError("answerer process ended its output")
        try:
            return json.loads(line)
        except json.JSONDecodeError as exc:
            raise AnswererProtocolError(f"malformed response line: {exc}") from None

    def close(self):
        try:
            self.proc.stdin.close()
            self.proc.wait(timeout=5)
        except Exception:
            self.proc.kill()


class ExternalHttpAnswerer(Answerer):
    """One POST per request; expects the response record as JSON."""

    kind = "http"

    def __init__(self, url: str, timeout_ms: int | None = None):
        self.url = url
        self.timeout = (timeout_ms or default_timeout_ms()) / 1000.0

    def answer(self, request: dict) -> dict:
        data = canonical_dumps(request).encode("utf-8")
        req = urllib.request.Request(self.url, data=data, headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return json.loads(resp.read().decode("utf-8"))
        except TimeoutError:
            raise AnswererTimeout(f"no response within {self.timeout:.1f}s") from None
        except Exception as exc:
            raise AnswererProtocolError(str(exc)) from None


def make_answerer(descriptor: str, noisy: GraphSnapshot, workload) -> Answerer:
    """Parse an answerer descriptor: oracle | echo | proc:CMD | http:URL."""
    if descriptor == "oracle" or descriptor == "replay":
        return OracleCypherAnswerer(noisy)
    if descriptor == "echo":
        return EchoGroundTruthAnswerer(workload)
    if descriptor.startswith("proc:"):
        return ExternalProcessAnswerer(descriptor[5:])
    if descriptor.startswith("http:"):
        return ExternalHttpAnswerer(descriptor[5:])
    raise GraphForgeError(f"unknown answerer descriptor {descriptor!r}")


# -- stratification ---------------------------------------------------------------


def stratify(workload, clean: GraphSnapshot, noisy: GraphSnapshot) -> list:
    """Label analytical queries Consistent/Inconsistent by result agreement.

    The clean-side result is the stored ground truth (it was produced by
    executing on the clean graph); only the noisy side is recomputed.
    """
    if set(clean.nodes) != set(noisy.nodes):
        raise GraphForgeError("stratification requires matching node id sets")
    out = []
    cache: dict = {}
    for instance in workload:
        if instance.category == "Management":
            out.append(instance)
            continue
        try:
            noisy_payload = _noisy_payload(instance, noisy, cache)
        except GraphForgeError as exc:
            raise EngineError(instance.id, exc) from exc
        consistent = payload_mod.payload_equal(instance.ground_truth, noisy_payload)
        labeled = QueryInstance(**{**instance.__dict__})
        labeled.stratum = CONSISTENT if consistent else INCONSISTENT
        out.append(labeled)
    return out


def _noisy_payload(instance: QueryInstance, noisy: GraphSnapshot, cache: dict) -> dict:
    key = (instance.cypher, instance.ground_truth["kind"], tuple(instance.candidates))
    if key in cache:
        return cache[key]
    table = execute(parse(instance.cypher), noisy)
    if instance.category == "NoAggBoolean":
        answers = {canonicalize_key(str(r[0])) for r in table.rows if r[0] is not None}
        payload = payload_mod.boolean_labels({c: canonicalize_key(c) in answers for c in instance.candidates})
    else:
        payload = table_to_payload(table, instance.ground_truth["kind"])
    cache[key] = payload
    return payload


# -- reports ------------------------------------------------------------------------


@dataclass
class EvalReport:
    task: int
    fingerprint: dict
    records: list = field(default_factory=list)
    aggregates: dict = field(default_factory=dict)
    strata: dict = field(default_factory=dict)
    divergence: list = field(default_factory=list)
    failures: int = 0

    def to_jsonable(self):
        return {
            "task": self.task,
            "fingerprint": self.fingerprint,
            "aggregates": self.aggregates,
            "strata": self.strata,
            "divergence": self.divergence,
            "failures": self.failures,
            "query_count": len(self.records),
            "records": self.records,
        }


def _fingerprint(clean, noisy, answerer, extra=None) -> dict:
    fp = {
        "tool_version": __version__,
        "clean_digest": clean.digest() if clean is not None else None,
        "noisy_digest": noisy.digest() if noisy is not None else None,
        "answerer": getattr(answerer, "kind", str(answerer)),
    }
    fp.update(extra or {})
    return fp


def _truth_as_set(truth: dict) -> frozenset:
    if truth["kind"] == payload_mod.ENTITY_SET:
        return frozenset(truth["value"])
    # row payloads compare as sets of canonical row strings
    return frozenset(canonical_dumps(row) for row in truth["value"])


def _payload_as_set(payload: dict) -> frozenset:
    if payload["kind"] == payload_mod.ENTITY_SET:
        return frozenset(payload["value"])
    if payload["kind"] == payload_mod.ROWS:
        return frozenset(canonical_dumps(row) for row in payload["value"])
    return frozenset()


# -- task I --------------------------------------------------------------------------


def run_task1(
    workload,
    clean: GraphSnapshot,
    noisy: GraphSnapshot,
    answerer: Answerer,
    seed: int = 0,
) -> EvalReport:
    analytical = [i for i in workload if i.category != "Management"]
    labeled = stratify(analytical, clean, noisy)
    report = EvalReport(task=1, fingerprint=_fingerprint(clean, noisy, answerer, {"seed": seed}))
    accumulators: dict = {}

    def acc(category, stratum=None) -> MetricAccumulator:
        key = category if stratum is None else f"{category}/{stratum}"
        return accumulators.setdefault(key, MetricAccumulator())

    for instance in labeled:
        request = {
            "id": instance.id,
            "task": 1,
            "nl": instance.nl,
            "cypher": instance.cypher,
            "category": instance.category,
            "truth_kind": instance.ground_truth["kind"],
        }
        if instance.candidates:
            request["candidates"] = list(instance.candidates)
        started = time.perf_counter()
        failure = None
        prediction = None
        try:
            response = answerer.answer(request)
            prediction = _extract_payload(response, instance, noisy)
        except (AnswererTimeout, AnswererProtocolError, GraphForgeError) as exc:
            failure = f"{type(exc).__name__}: {exc}"
        latency_ms = (time.perf_counter() - started) * 1000.0
        scores, flagged = _score_task1(instance, prediction, acc, failure)
        if failure:
            report.failures += 1
        report.records.append(
            {
                "id": instance.id,
                "category": instance.category,
                "targeting": instance.targeting,
                "stratum": instance.stratum,
                "truth": instance.ground_truth,
                "prediction": prediction,
                "scores": scores,
                "latency_ms": round(latency_ms, 3),
                "failed": failure,
                "flagged": flagged,
            }
        )
    report.aggregates = {
        key: accumulators[key].aggregate() for key in sorted(accumulators) if "/" not in key
    }
    report.strata = {key: accumulators[key].aggregate() for key in sorted(accumulators) if "/" in key}
    return report


def _extract_payload(response: dict, instance: QueryInstance, noisy: GraphSnapshot):
    if not isinstance(response, dict):
        raise AnswererProtocolError(f"response must be an object, got {type(response).__name__}")
    if "cypher" in response and "payload" not in response:
        table = execute(parse(response["cypher"]), noisy)
        if instance.category == "NoAggBoolean":
            answers = {canonicalize_key(str(r[0])) for r in table.rows if r[0] is not None}
            return payload_mod.boolean_labels({c: canonicalize_key(c) in answers for c in instance.candidates})
        return table_to_payload(table, instance.ground_truth["kind"])
    if "payload" not in response:
        raise AnswererProtocolError("response carries neither payload nor cypher")
    return payload_mod.normalize(response["payload"])


def _score_task1(instance: QueryInstance, prediction, acc, failure) -> tuple:
    category = instance.category
    truth = instance.ground_truth
    flagged = False
    scores: dict = {}
    if category == "NoAggBoolean":
        truth_labels = truth["value"]
        if failure or prediction is None or prediction.get("kind") != payload_mod.BOOLEAN_LABELS:
            decisions = [(not v, v) for v in truth_labels.values()]  # worst case
            flagged = True
        else:
            predicted = prediction["value"]
            decisions = [(bool(predicted.get(k, not truth_labels[k])), truth_labels[k]) for k in truth_labels]
        for pair in decisions:
            acc(category).bool_labels.append(pair)
            acc(category, instance.stratum).bool_labels.append(pair)
        scores["accuracy"] = sum(1 for p, t in decisions if p == t) / len(decisions)
    elif category == "Agg":
        truth_value = truth["value"]
        pred_value = prediction["value"] if (prediction and prediction["kind"] == payload_mod.SCALAR) else None
        if failure or pred_value is None or isinstance(pred_value, bool) or not isinstance(pred_value, (int, float)):
            pred_value = 0.0  # worst case, flagged but kept in the denominators
            flagged = True
        pair = ScalarPrediction(float(pred_value), float(truth_value))
        acc(category).scalar_pairs.append(pair)
        acc(category, instance.stratum).scalar_pairs.append(pair)
        if flagged:
            acc(category).flagged += 1
            acc(category, instance.stratum).flagged += 1
        scores["abs_error"] = abs(pair.predicted - pair.truth)
    else:
        truth_set = _truth_as_set(truth)
        if failure or prediction is None:
            pred_set = frozenset()
            flagged = True
        else:
            pred_set = _payload_as_set(prediction)
        pair = SetPrediction.from_keys(pred_set, truth_set)
        acc(category).set_pairs.append(pair)
        acc(category, instance.stratum).set_pairs.append(pair)
        from .metrics import f1 as f1_fn, jaccard as jaccard_fn

        scores["jaccard"] = jaccard_fn(pair)
        scores["f1"] = f1_fn(pair)[2]
    return scores, flagged


# -- task II -------------------------------------------------------------------------


def run_task2(
    workload,
    initial: GraphSnapshot,
    answerer: Answerer,
    seed: int = 0,
    expected_k: int | None = 5,
) -> EvalReport:
    """Sequential in-context editing: truth replayed from the initial graph.

    Batches must match the standard K (5 by default; None disables the check).
    """
    batches = [i for i in workload if i.category == "Management"]
    report = EvalReport(
        task=2, fingerprint=_fingerprint(initial, None, answerer, {"seed": seed})
    )
    acc = MetricAccumulator()
    step_sums: dict = {}
    step_counts: dict = {}
    for instance in batches:
        if expected_k is not None and len(instance.steps) != expected_k:
            raise GraphForgeError(
                f"batch {instance.id} has {len(instance.steps)} steps; expected K={expected_k}"
            )
        state = initial
        history: list = []
        answerer.start_batch(instance, initial)
        pairs = []
        failure = None
        for t, step in enumerate(instance.steps):
            # ground truth from replaying the modification lineage
            session = open_mutation_session(state)
            execute_mutation(parse(step["op"]), session)
            state = session.commit()
            truth_table = execute(parse(step["validation"]), state)
            truth_value = truth_table.rows[0][0] if truth_table.rows else None
            truth = payload_mod.scalar(
                truth_value if isinstance(truth_value, (int, float)) and not isinstance(truth_value, bool) else None
            )
            request = {
                "id": instance.id,
                "task": 2,
                "step": t,
                "op": step["op"],
                "validation": step["validation"],
                "nl": instance.nl,
                "category": "Management",
                "history": list(history),
            }
            try:
                response = answerer.answer(request)
                predicted = payload_mod.normalize(response["payload"])
            except (AnswererTimeout, AnswererProtocolError, GraphForgeError, KeyError) as exc:
                failure = f"{type(exc).__name__}: {exc}"
                predicted = payload_mod.scalar(None)
            pairs.append((predicted, truth))
            history.append({"op": step["op"], "validation": step["validation"]})
            if truth["value"] is not None:
                pred_num = predicted["value"] if predicted["kind"] == payload_mod.SCALAR else None
                if pred_num is None or isinstance(pred_num, bool) or not isinstance(pred_num, (int, float)):
                    pred_num = 0.0
                    acc.flagged += 1
                acc.scalar_pairs.append(ScalarPrediction(float(pred_num), float(truth["value"])))
        trace = StepTrace(pairs)
        acc.step_traces.append(trace)
        score = step_score(trace)
        for t, (predicted, truth) in enumerate(pairs):
            step_sums[t] = step_sums.get(t, 0.0) + (1.0 if payload_mod.payload_equal(predicted, truth) else 0.0)
            step_counts[t] = step_counts.get(t, 0) + 1
        if failure:
            report.failures += 1
        report.records.append(
            {
                "id": instance.id,
                "category": "Management",
                "kind": instance.template_id,
                "step_score": score,
                "steps": [
                    {"op": s["op"], "validation": s["validation"], "truth": p[1], "prediction": p[0]}
                    for s, p in zip(instance.steps, pairs)
                ],
                "failed": failure,
            }
        )
    report.aggregates = {"Management": acc.aggregate()} if batches else {}
    report.divergence = [
        round(step_sums[t] / step_counts[t], 6) for t in sorted(step_sums)
    ]
    return report


# -- rendering -----------------------------------------------------------------------


def render_report(report: EvalReport, fmt: str = "text") -> str:
    if fmt == "structured":
        lines = [canonical_dumps({"record": "aggregate", **_agg_view(report)})]
        for record in report.records:
            lines.append(canonical_dumps({"record": "query", **record}))
        return "\n".join(lines) + "\n"
    if fmt != "text":
        raise GraphForgeError(f"unknown report format {fmt!r}")
    out = [f"task {report.task} report (tool {report.fingerprint.get('tool_version')})"]
    out.append(f"queries: {len(report.records)}  failures: {report.failures}")
    for scope_name, scope in (("category", report.aggregates), ("stratum", report.strata)):
        for key in sorted(scope):
            parts = "  ".join(f"{m}={_fmt(v)}" for m, v in sorted(scope[key].items()))
            out.append(f"[{scope_name}] {key}: {parts}")
    if report.divergence:
        out.append("divergence: " + " ".join(f"t{t + 1}={v:.3f}" for t, v in enumerate(report.divergence)))
    return "\n".join(out) + "\n"


def _agg_view(report: EvalReport) -> dict:
    return {
        "task": report.task,
        "fingerprint": report.fingerprint,
        "aggregates": report.aggregates,
        "strata": report.strata,
        "divergence": report.divergence,
        "failures": report.failures,
        "query_count": len(report.records),
    }


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def save_report(report: EvalReport, path):
    from pathlib import Path

    Path(path).write_text(canonical_dumps(report.to_jsonable()) + "\n", encoding="utf-8")
