"""Remote oracles: a staged chat client and a single-call JSON endpoint client.

Both talk through a transport, a callable taking a JSON payload and returning
a JSON object. CassetteTransport records those exchanges to disk and replays
them, which is how tests run without a live model.
"""
from __future__ import annotations

import json
import os
import re
import tempfile
import threading
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Mapping

from .base import (
    ParseFailure,
    SelectionRequest,
    SelectionResponse,
    TransportError,
    validate_response,
)

Transport = Callable[[dict], dict]

_SLOT = re.compile(r"\[(\w+)\]|<(\w+)>")
_INT = re.compile(r"-?\d+")


class CassetteMiss(TransportError):
    pass


@dataclass(frozen=True)
class PromptSet:
    """Named templates with static [slot] and dynamic <slot> substitutions."""

    templates: Mapping[str, str]
    static: Mapping[str, str] = field(default_factory=dict)

    @classmethod
    def from_json(cls, data: Mapping) -> "PromptSet":
        return cls(dict(data["templates"]), dict(data.get("static", {})))

    @classmethod
    def load(cls, path: str | Path | None = None) -> "PromptSet":
        if path is None:
            text = resources.files("motifgrammar").joinpath("prompts/default.json").read_text()
        else:
            text = Path(path).read_text()
        return cls.from_json(json.loads(text))

    def render(self, name: str, **dynamic: str) -> str:
        template = self.templates[name]

        def fill(m: re.Match) -> str:
            if m.group(1) is not None:
                key = m.group(1)
                if key not in self.static:
                    raise KeyError(f"template {name!r} needs static slot [{key}]")
                return self.static[key]
            key = m.group(2)
            if key not in dynamic:
                raise KeyError(f"template {name!r} needs dynamic slot <{key}>")
            return dynamic[key]

        # one pass, so substituted text is never re-scanned for slots
        return _SLOT.sub(fill, template)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


class HttpJsonTransport:
    """POST a JSON body, parse a JSON reply; at most max_in_flight concurrent calls."""

    def __init__(self, url: str, timeout: float = 60.0, max_in_flight: int = 4, headers=None):
        self.url = url
        self.timeout = timeout
        self.headers = {"Content-Type": "application/json", **(headers or {})}
        self._gate = threading.BoundedSemaphore(max_in_flight)

    def __call__(self, payload: dict) -> dict:
        body = json.dumps(payload).encode()
        req = urllib.request.Request(self.url, data=body, headers=self.headers, method="POST")
        with self._gate:
            try:
                with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                    raw = resp.read()
            except (urllib.error.URLError, OSError) as exc:
                raise TransportError(f"POST {self.url} failed: {exc}") from exc
        try:
            out = json.loads(raw)
        except ValueError as exc:
            raise TransportError(f"non-JSON reply from {self.url}") from exc
        if not isinstance(out, dict):
            raise TransportError(f"expected a JSON object from {self.url}")
        return out


class CassetteTransport:
    """Record/replay wrapper keyed by the canonical JSON of each request.

    mode "replay" never touches the inner transport and raises CassetteMiss
    for unknown requests; "record" forwards misses and saves them.
    """

    def __init__(self, path: str | Path, mode: str = "replay", inner: Transport | None = None):
        if mode not in ("replay", "record"):
            raise ValueError(f"unknown cassette mode {mode!r}")
        if mode == "record" and inner is None:
            raise ValueError("record mode needs an inner transport")
        self.path = Path(path)
        self.mode = mode
        self.inner = inner
        self._lock = threading.Lock()
        self._entries: dict[str, dict] = {}
        if self.path.exists():
            data = json.loads(self.path.read_text())
            for item in data.get("interactions", []):
                self._entries[canonical_json(item["request"])] = item["response"]

    def __len__(self) -> int:
        return len(self._entries)

    def __call__(self, payload: dict) -> dict:
        key = canonical_json(payload)
        with self._lock:
            if key in self._entries:
                return json.loads(json.dumps(self._entries[key]))
        if self.mode == "replay":
            raise CassetteMiss(f"no recorded response for request {payload.get('request_id', '?')!r}")
        response = self.inner(payload)
        with self._lock:
            self._entries[key] = response
            self._save()
        return response

    def _save(self) -> None:
        items = [
            {"request": json.loads(k), "response": v} for k, v in sorted(self._entries.items())
        ]
        text = json.dumps({"version": 1, "interactions": items}, indent=1, sort_keys=True)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=self.path.parent, suffix=".tmp")
        with os.fdopen(fd, "w") as fh:
            fh.write(text + "\n")
        os.chmod(tmp, 0o644)
        os.replace(tmp, self.path)


def chat_content(reply: Mapping) -> str:
    """Text of a chat reply: {"content": ...} or the OpenAI choices shape."""
    if isinstance(reply.get("content"), str):
        return reply["content"]
    try:
        return reply["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise TransportError("chat reply carries no content") from exc


def parse_motif_lines(text: str) -> dict[int, str]:
    out = {}
    for line in text.splitlines():
        m = re.match(r"\s*Motif\s+(\d+)\s*[:.\-]\s*(.+)", line)
        if m:
            out[int(m.group(1))] = m.group(2).strip()
    return out


def interpret_extraction(req: SelectionRequest, text: str) -> int | None:
    """Map an extracted answer ('none', 'a,b' or 'n') onto a choice index.

    Motifs are numbered from 1 in first-mention order over the choices.
    A single number in an edge_elim request is taken as a 1-based
    connection number.
    """
    stripped = text.strip().lower()
    numbers = [int(x) for x in _INT.findall(stripped)]
    if not numbers and re.search(r"\bnone\b|\bno merge\b|\brefuse", stripped):
        return None
    motif_ids = req.motif_ids

    def motif(n: int) -> str:
        if not 1 <= n <= len(motif_ids):
            raise ParseFailure(f"motif number {n} outside 1..{len(motif_ids)}")
        return motif_ids[n - 1]

    if req.kind == "pair" and len(numbers) == 2:
        wanted = {motif(numbers[0]), motif(numbers[1])}
        for i, choice in enumerate(req.choices):
            if set(choice) == wanted:
                return i
        raise ParseFailure(f"pair {numbers} is not among the offered choices")
    if len(numbers) == 1:
        n = numbers[0]
        if req.kind == "single":
            target = motif(n)
            return req.choices.index(target)
        if req.phase == "edge_elim":
            if not 1 <= n <= len(req.choices):
                raise ParseFailure(f"connection number {n} outside 1..{len(req.choices)}")
            return n - 1
    raise ParseFailure(f"cannot read a choice from {text!r}")


def _options(req: SelectionRequest, descriptions: Mapping[int, str]) -> str:
    number = {cid: i + 1 for i, cid in enumerate(req.motif_ids)}
    lines = []
    for i, choice in enumerate(req.choices, start=1):
        if isinstance(choice, str):
            lines.append(f"Motif {number[choice]}")
            continue
        a, b = number[choice[0]], number[choice[1]]
        label = "Connection" if req.phase == "edge_elim" else "Pair"
        text = f"{label} {i}: Motif {a} and Motif {b}"
        if a in descriptions and b in descriptions:
            text += f" ({descriptions[a]} / {descriptions[b]})"
        lines.append(text)
    return "\n".join(lines)


class RemoteOracle:
    """Chat client running describe, task, extract and summarize prompts per request."""

    def __init__(self, transport: Transport, prompts: PromptSet | None = None, model: str = ""):
        self.transport = transport
        self.prompts = prompts or PromptSet.load()
        self.model = model

    def _chat(self, req: SelectionRequest, stage: str, prompt: str) -> str:
        payload = {
            "request_id": f"{req.request_id}/{stage}",
            "stage": stage,
            "messages": [{"role": "user", "content": prompt}],
        }
        if self.model:
            payload["model"] = self.model
        return chat_content(self.transport(payload))

    def select(self, request: SelectionRequest) -> SelectionResponse:
        context = request.context
        described = self._chat(request, "describe", self.prompts.render("describe", context=context))
        descriptions = parse_motif_lines(described)
        desc_text = "\n".join(f"Motif {n}: {d}" for n, d in sorted(descriptions.items())) or described
        answer = self._chat(
            request,
            "task",
            self.prompts.render(
                f"task_{request.phase}",
                context=context,
                descriptions=desc_text,
                options=_options(request, descriptions),
            ),
        )
        refusal = " If it declines to choose, write none." if request.allow_refusal else ""
        wants_pair = request.kind == "pair"
        extracted = self._chat(
            request,
            "extract",
            self.prompts.render(
                "extract_pair" if wants_pair else "extract_single", answer=answer, refusal=refusal
            ),
        )
        chosen = interpret_extraction(request, extracted)
        summary = self._chat(request, "summarize", self.prompts.render("summarize", answer=answer))
        return validate_response(request, SelectionResponse(chosen, answer, summary.strip()))


class EndpointOracle:
    """One POST per request carrying the structured selection."""

    def __init__(self, transport: Transport):
        self.transport = transport

    def select(self, request: SelectionRequest) -> SelectionResponse:
        payload = {
            "request_id": request.request_id,
            "phase": request.phase,
            "kind": request.kind,
            "encoded_context": request.context,
            "choices": [c if isinstance(c, str) else list(c) for c in request.choices],
            "allow_refusal": request.allow_refusal,
        }
        reply = self.transport(payload)
        if "chosen" not in reply:
            raise ParseFailure("endpoint reply lacks 'chosen'")
        return validate_response(request, SelectionResponse.from_json(reply))
