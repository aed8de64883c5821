"""Selection requests/responses shared by every oracle family."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Protocol, Sequence, Union

from ..molecule import MolecularGraph

PHASES = ("triangulate", "merge", "edge_elim", "root")
KINDS = ("single", "pair")

Choice = Union[str, tuple[str, str]]


class OracleFailure(RuntimeError):
    pass


class ParseFailure(OracleFailure):
    pass


class TransportError(OracleFailure):
    pass


class RefusalNotAllowed(OracleFailure):
    pass


@dataclass(frozen=True)
class SelectionRequest:
    kind: str
    phase: str
    choices: tuple[Choice, ...]
    allow_refusal: bool
    cliques: Mapping[str, frozenset[int]] = field(repr=False)
    molecule: MolecularGraph | None = field(default=None, repr=False, compare=False)
    step: int = 0
    request_id: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.phase not in PHASES:
            raise ValueError(f"unknown phase {self.phase!r}")
        if not self.choices:
            raise ValueError("a selection needs at least one choice")
        if self.allow_refusal and self.phase not in ("merge", "root"):
            raise ValueError(f"refusal is not allowed in phase {self.phase!r}")
        if not self.request_id:
            object.__setattr__(self, "request_id", f"{self.phase}-{self.step}")

    @property
    def motif_ids(self) -> list[str]:
        """Distinct cliques mentioned by the choices, in first-mention order."""
        seen: list[str] = []
        for choice in self.choices:
            for cid in (choice,) if isinstance(choice, str) else choice:
                if cid not in seen:
                    seen.append(cid)
        return seen

    @cached_property
    def context(self) -> str:
        from .text import encode_text

        if self.molecule is None:
            return ""
        return encode_text(self.molecule, [self.cliques[c] for c in self.motif_ids])

    def to_json(self) -> dict:
        return {
            "request_id": self.request_id,
            "kind": self.kind,
            "phase": self.phase,
            "step": self.step,
            "choices": [c if isinstance(c, str) else list(c) for c in self.choices],
            "allow_refusal": self.allow_refusal,
        }


@dataclass(frozen=True)
class SelectionResponse:
    chosen: int | None
    reasoning: str = ""
    summarized: str = ""

    @property
    def refused(self) -> bool:
        return self.chosen is None

    def to_json(self) -> dict:
        return {
            "chosen": "REFUSE" if self.chosen is None else self.chosen,
            "reasoning": self.reasoning,
            "summarized": self.summarized,
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "SelectionResponse":
        chosen = data.get("chosen")
        if chosen in (None, "REFUSE", "refuse"):
            chosen = None
        elif isinstance(chosen, bool):
            raise ParseFailure(f"chosen must be an index or REFUSE, got {chosen!r}")
        elif not isinstance(chosen, int):
            try:
                chosen = int(chosen)
            except (TypeError, ValueError) as exc:
                raise ParseFailure(f"chosen must be an index or REFUSE, got {chosen!r}") from exc
        return cls(chosen, str(data.get("reasoning", "")), str(data.get("summarized", "")))


def validate_response(req: SelectionRequest, resp: SelectionResponse) -> SelectionResponse:
    if resp.chosen is None:
        if not req.allow_refusal:
            raise RefusalNotAllowed(f"{req.phase} selection may not be refused")
        return resp
    if not 0 <= resp.chosen < len(req.choices):
        raise ParseFailure(f"index {resp.chosen} outside [0, {len(req.choices)})")
    return resp


class Oracle(Protocol):
    def select(self, request: SelectionRequest) -> SelectionResponse: ...


class ScriptedOracle:
    """Replays recorded responses in order (used to replay decomposition logs)."""

    def __init__(self, responses: Sequence[SelectionResponse], phases: Sequence[str] | None = None):
        self._responses = list(responses)
        self._phases = list(phases) if phases is not None else None
        self._next = 0

    def select(self, request: SelectionRequest) -> SelectionResponse:
        if self._next >= len(self._responses):
            raise OracleFailure("scripted oracle ran out of responses")
        if self._phases is not None and self._phases[self._next] != request.phase:
            raise OracleFailure(
                f"script expected phase {self._phases[self._next]!r}, got {request.phase!r}"
            )
        resp = self._responses[self._next]
        self._next += 1
        return resp
