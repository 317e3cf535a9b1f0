"""Fitness boundary: deterministic surrogate and the external-evaluator client.

The wire protocol is line-delimited JSON over the child's stdin/stdout:

    request : {"v": 1, "id": str, "arch": <arch-graph doc>, "epochs": int,
               "dataset": str, "variant": str}
    response: {"v": 1, "id": str, "status": "ok"|"failed", "error": float}

Responses may arrive out of order; they are matched by id.  A per-request
timeout (0 disables it) or a dead child marks requests failed; failures never
abort a generation — the engine assigns worst-case error instead.
"""

from __future__ import annotations

import json
import math
import subprocess
import threading
import time
from dataclasses import dataclass
from typing import Sequence

from .errors import EvaluatorError
from .phenotype import ArchitectureGraph, ComplexityReport

PROTOCOL_VERSION = 1


@dataclass(frozen=True)
class EvaluationRequest:
    id: str
    arch: dict
    epochs: int
    dataset: str
    variant: str

    def to_doc(self) -> dict:
        return {
            "v": PROTOCOL_VERSION,
            "id": self.id,
            "arch": self.arch,
            "epochs": self.epochs,
            "dataset": self.dataset,
            "variant": self.variant,
        }


@dataclass(frozen=True)
class EvaluationResult:
    id: str
    status: str
    error: float | None = None
    diagnostics: str | None = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def surrogate_evaluate(graph: ArchitectureGraph, report: ComplexityReport) -> EvaluationResult:
    """Deterministic stand-in error creating a smooth accuracy/complexity
    conflict: spending MAdds lowers the error, moderate branching and block
    diversity help.  Not a model of real accuracy.
    """
    base = 0.9 / (1.0 + 0.35 * math.log1p(report.madds / 1e6))
    penalty = 0.02 * abs(graph.branch_count - 4)
    bonus = 0.01 * graph.distinct_block_types
    error = min(max(base + penalty - bonus, 0.02), 0.95)
    return EvaluationResult(id="", status="ok", error=error)


class EvaluationCache:
    """Memo keyed by the integer genotype: one evaluator call per genome."""

    def __init__(self) -> None:
        self._store: dict = {}
        self.hits = 0
        self.misses = 0

    def get(self, key) -> EvaluationResult | None:
        result = self._store.get(key)
        if result is not None:
            self.hits += 1
        return result

    def put(self, key, result: EvaluationResult) -> None:
        self.misses += 1
        self._store[key] = result

    def items(self):
        return self._store.items()

    def restore(self, key, result: EvaluationResult) -> None:
        self._store[key] = result

    def __len__(self) -> int:
        return len(self._store)


class ExternalEvaluator:
    """Client for a child-process evaluator speaking the wire protocol."""

    def __init__(
        self,
        command: Sequence[str],
        *,
        timeout: float = 0.0,
        max_inflight: int = 1,
        epochs: int = 36,
        dataset: str = "cifar10",
        variant: str = "v2",
    ) -> None:
        self.timeout = timeout
        self.max_inflight = max(1, max_inflight)
        self.epochs = epochs
        self.dataset = dataset
        self.variant = variant
        self._counter = 0
        try:
            self._proc = subprocess.Popen(
                list(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise EvaluatorError(f"cannot spawn evaluator {command!r}: {exc}") from exc
        self._lock = threading.Condition()
        self._responses: dict[str, dict] = {}
        self._eof = False
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def _read_loop(self) -> None:
        assert self._proc.stdout is not None
        for line in self._proc.stdout:
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError:
                continue
            if not isinstance(doc, dict) or "id" not in doc:
                continue
            with self._lock:
                self._responses[str(doc["id"])] = doc
                self._lock.notify_all()
        with self._lock:
            self._eof = True
            self._lock.notify_all()

    def _next_id(self) -> str:
        self._counter += 1
        return f"r{self._counter}"

    def evaluate_graphs(self, graphs: Sequence[dict]) -> list[EvaluationResult]:
        """Send one request per graph doc; return results in request order."""
        requests = [
            EvaluationRequest(
                id=self._next_id(),
                arch=doc,
                epochs=self.epochs,
                dataset=self.dataset,
                variant=self.variant,
            )
            for doc in graphs
        ]
        results: dict[str, EvaluationResult] = {}
        pending = list(requests)
        inflight: dict[str, float] = {}

        def fail_remaining(reason: str) -> None:
            for rid in list(inflight):
                results[rid] = EvaluationResult(id=rid, status="failed", diagnostics=reason)
                del inflight[rid]
            for req in pending:
                results[req.id] = EvaluationResult(id=req.id, status="failed", diagnostics=reason)
            pending.clear()

        while pending or inflight:
            while pending and len(inflight) < self.max_inflight:
                req = pending.pop(0)
                try:
                    assert self._proc.stdin is not None
                    self._proc.stdin.write(json.dumps(req.to_doc()) + "\n")
                    self._proc.stdin.flush()
                except (BrokenPipeError, OSError):
                    inflight[req.id] = time.monotonic()
                    fail_remaining("evaluator pipe closed")
                    break
                inflight[req.id] = time.monotonic()
            with self._lock:
                matched = [rid for rid in inflight if rid in self._responses]
                for rid in matched:
                    doc = self._responses.pop(rid)
                    results[rid] = self._parse_response(rid, doc)
                    del inflight[rid]
                if not matched and inflight:
                    if self._eof:
                        fail_remaining("evaluator process ended")
                        continue
                    self._lock.wait(timeout=0.05)
            if self.timeout > 0:
                now = time.monotonic()
                for rid, sent in list(inflight.items()):
                    if now - sent > self.timeout:
                        results[rid] = EvaluationResult(id=rid, status="failed", diagnostics="timeout")
                        del inflight[rid]
        return [results[req.id] for req in requests]

    @staticmethod
    def _parse_response(rid: str, doc: dict) -> EvaluationResult:
        status = doc.get("status")
        error = doc.get("error")
        if status == "ok" and isinstance(error, (int, float)) and 0.0 <= float(error) <= 1.0:
            return EvaluationResult(id=rid, status="ok", error=float(error))
        return EvaluationResult(
            id=rid, status="failed", diagnostics=doc.get("diagnostics", "malformed response")
        )

    def close(self) -> None:
        try:
            if self._proc.stdin is not None:
                self._proc.stdin.close()
        except OSError:
            pass
        try:
            self._proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait()

    def __enter__(self) -> "ExternalEvaluator":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
