"""Passage scorers: local deterministic stand-ins and the external wire.

Every scorer maps (qid, query text, passages) to calibrated relevance
scores in [0, 1], aligned with the request order. External scorers speak
line-delimited JSON over a child process's stdio or an HTTP endpoint:
request {"qid", "query", "passages": [{"pid", "text"}]}, response
{"qid", "scores": [...]}.
"""

from __future__ import annotations

import json
import math
import os
import queue
import shlex
import subprocess
import threading
import time
from pathlib import Path

from .analysis import analyze_text
from .corpus import parent_doc_id
from .errors import ConfigError, ScorerError
from .run import ScoredRun, max_normalize

DEFAULT_BATCH_SIZE = 64
DEFAULT_TIMEOUT = 30.0
DEFAULT_RETRIES = 2
ENDPOINT_ENV = "LEEX_SCORER_ENDPOINT"

Passage = tuple[str, str]  # (pid, text)


class Scorer:
    name = "scorer"

    def score_batch(self, qid: str, query: str, passages: list[Passage]) -> list[float]:
        raise NotImplementedError

    def close(self) -> None:
        pass


def validate_scores(scores, n_expected: int, context: str) -> list[float]:
    """Reject wrong-length, non-finite, or out-of-range score lists."""
    if not isinstance(scores, list) or len(scores) != n_expected:
        raise ScorerError(f"{context}: expected {n_expected} scores, got {scores!r:.80}")
    out: list[float] = []
    for s in scores:
        try:
            val = float(s)
        except (TypeError, ValueError):
            raise ScorerError(f"{context}: non-numeric score {s!r}") from None
        if not math.isfinite(val):
            raise ScorerError(f"{context}: non-finite score {val!r}")
        if not 0.0 <= val <= 1.0:
            raise ScorerError(f"{context}: score {val} outside [0,1]")
        out.append(val)
    return out


class LexicalScorer(Scorer):
    """Stemmed-term overlap: |q ∩ p| / max(1, |unique q terms|)."""

    name = "lexical"

    def score_batch(self, qid: str, query: str, passages: list[Passage]) -> list[float]:
        q_terms = set(analyze_text(query))
        denom = max(1, len(q_terms))
        out = []
        for _pid, text in passages:
            out.append(len(q_terms & set(analyze_text(text))) / denom)
        return out


class QrelsOracleScorer(Scorer):
    """Graded relevance of the passage's parent document over the max grade.

    Unjudged documents score 0; the max grade is global across all queries
    so one scale covers the whole qrels file.
    """

    name = "oracle"

    def __init__(self, qrels: dict[str, dict[str, int]]):
        self.qrels = qrels
        self.max_grade = max(
            (g for by_doc in qrels.values() for g in by_doc.values()), default=0
        )

    def score_batch(self, qid: str, query: str, passages: list[Passage]) -> list[float]:
        if self.max_grade <= 0:
            return [0.0 for _ in passages]
        by_doc = self.qrels.get(qid, {})
        return [
            max(0, by_doc.get(parent_doc_id(pid), 0)) / self.max_grade
            for pid, _text in passages
        ]


class IdentityScorer(Scorer):
    """Echoes each parent document's max-normalized score from a prior run.

    Re-ranking with it preserves the prior ordering, which makes it the
    reference point for feedback-equivalence checks.
    """

    name = "identity"

    def __init__(self, run: ScoredRun):
        self._scores: dict[str, dict[str, float]] = {
            qid: dict(max_normalize(run.entries(qid))) for qid in run.qids
        }

    def score_batch(self, qid: str, query: str, passages: list[Passage]) -> list[float]:
        by_doc = self._scores.get(qid, {})
        return [by_doc.get(parent_doc_id(pid), 0.0) for pid, _text in passages]


def _encode_request(qid: str, query: str, passages: list[Passage]) -> str:
    return json.dumps(
        {
            "qid": qid,
            "query": query,
            "passages": [{"pid": pid, "text": text} for pid, text in passages],
        }
    )


def _decode_response(line: str, qid: str, n: int, context: str) -> list[float]:
    try:
        payload = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ScorerError(f"{context}: malformed response line: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("qid") != qid:
        raise ScorerError(f"{context}: response qid mismatch: {payload!r:.120}")
    return validate_scores(payload.get("scores"), n, context)


class SubprocessScorer(Scorer):
    """Persistent child process scored over stdin/stdout JSON lines.

    The child is restarted between retries; a still-broken protocol after
    the retry budget fails the query.
    """

    name = "subprocess"

    def __init__(
        self,
        command: list[str],
        timeout: float = DEFAULT_TIMEOUT,
        retries: int = DEFAULT_RETRIES,
    ):
        self.command = command
        self.timeout = timeout
        self.retries = retries
        self._proc: subprocess.Popen | None = None
        self._lines: queue.Queue[str | None] = queue.Queue()

    def _start(self) -> None:
        self.close()
        self._proc = subprocess.Popen(
            self.command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        self._lines = queue.Queue()

        def _pump(proc: subprocess.Popen, sink: queue.Queue) -> None:
            assert proc.stdout is not None
            for line in proc.stdout:
                sink.put(line)
            sink.put(None)

        threading.Thread(
            target=_pump, args=(self._proc, self._lines), daemon=True
        ).start()

    def _request_once(self, payload: str) -> str:
        if self._proc is None or self._proc.poll() is not None:
            self._start()
        assert self._proc is not None and self._proc.stdin is not None
        try:
            self._proc.stdin.write(payload + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ScorerError(f"scorer process write failed: {exc}") from exc
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            raise ScorerError(f"scorer process timed out after {self.timeout}s") from None
        if line is None:
            raise ScorerError("scorer process closed its stdout")
        return line

    def score_batch(self, qid: str, query: str, passages: list[Passage]) -> list[float]:
        payload = _encode_request(qid, query, passages)
        context = f"subprocess scorer, query {qid}"
        last: ScorerError | None = None
        for _attempt in range(self.retries + 1):
            try:
                line = self._request_once(payload)
                return _decode_response(line, qid, len(passages), context)
            except ScorerError as exc:
                last = exc
                self.close()
        assert last is not None
        raise last

    def close(self) -> None:
        if self._proc is not None:
            try:
                if self._proc.stdin is not None:
                    self._proc.stdin.close()
                self._proc.terminate()
                self._proc.wait(timeout=5)
            except (OSError, subprocess.TimeoutExpired):
                self._proc.kill()
            self._proc = None


class HTTPScorer(Scorer):
    """POSTs each batch to a scoring endpoint as JSON."""

    name = "http"

    def __init__(
        self,
        endpoint: str,
        timeout: float = DEFAULT_TIMEOUT,
        retries: int = DEFAULT_RETRIES,
    ):
        self.endpoint = endpoint
        self.timeout = timeout
        self.retries = retries

    def score_batch(self, qid: str, query: str, passages: list[Passage]) -> list[float]:
        import requests

        payload = _encode_request(qid, query, passages)
        context = f"http scorer {self.endpoint}, query {qid}"
        last: ScorerError | None = None
        for attempt in range(self.retries + 1):
            try:
                resp = requests.post(
                    self.endpoint,
                    data=payload,
                    headers={"Content-Type": "application/json"},
                    timeout=self.timeout,
                )
                if resp.status_code != 200:
                    raise ScorerError(f"{context}: HTTP {resp.status_code}")
                return _decode_response(resp.text, qid, len(passages), context)
            except (requests.RequestException, ScorerError) as exc:
                last = exc if isinstance(exc, ScorerError) else ScorerError(
                    f"{context}: {exc}"
                )
                if attempt < self.retries:
                    time.sleep(0.2 * (attempt + 1))
        assert last is not None
        raise last


def make_scorer(
    spec: str,
    qrels: dict[str, dict[str, int]] | None = None,
    prior_run: ScoredRun | None = None,
    timeout: float = DEFAULT_TIMEOUT,
    retries: int = DEFAULT_RETRIES,
) -> Scorer:
    """Build a scorer from a CLI-style spec string.

    Forms: "lexical"; "oracle" (qrels supplied) or "oracle:<qrels path>";
    "identity" (prior run supplied); "subprocess:<command line>";
    "http:<url>" or bare "http" with the endpoint env var set.
    """
    kind, _, arg = spec.partition(":")
    if kind == "lexical":
        return LexicalScorer()
    if kind == "oracle":
        if arg:
            from .trec import read_qrels

            qrels = read_qrels(Path(arg))
        if qrels is None:
            raise ConfigError("oracle scorer needs a qrels file: oracle:<path>")
        return QrelsOracleScorer(qrels)
    if kind == "identity":
        if prior_run is None:
            raise ConfigError("identity scorer needs a prior run")
        return IdentityScorer(prior_run)
    if kind == "subprocess":
        if not arg:
            raise ConfigError("subprocess scorer needs a command: subprocess:<cmd>")
        return SubprocessScorer(shlex.split(arg), timeout=timeout, retries=retries)
    if kind == "http":
        endpoint = arg or os.environ.get(ENDPOINT_ENV, "")
        if not endpoint:
            raise ConfigError(
                f"http scorer needs an endpoint: http:<url> or ${ENDPOINT_ENV}"
            )
        return HTTPScorer(endpoint, timeout=timeout, retries=retries)
    raise ConfigError(f"unknown scorer spec {spec!r}")
