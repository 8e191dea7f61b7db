"""Shared diagnosis graph and the audit of broadcast-phase claims.

Edges start out ``g`` (good) and may only turn ``f`` (faulty). An ``f`` edge
always has at least one faulty endpoint, so a node with more than ``t``
accusations is faulty for sure and gets isolated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from mvba import codec
from mvba.codec import CodeSpec
from mvba.schedule import SOURCE, STAGE_SOURCE, STAGE_Z, GenerationPlan, Slot, plan_generation

GOOD = "g"
FAULTY = "f"


class DiagnosisGraph:
    def __init__(self, n: int, t: int):
        self.n = n
        self.t = t
        self._f = np.zeros((n, n), dtype=bool)
        self.isolated: set[int] = set()

    def copy(self) -> DiagnosisGraph:
        g = DiagnosisGraph(self.n, self.t)
        g._f = self._f.copy()
        g.isolated = set(self.isolated)
        return g

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, DiagnosisGraph)
            and self.n == other.n
            and np.array_equal(self._f, other._f)
            and self.isolated == other.isolated
        )

    def __repr__(self) -> str:
        return f"DiagnosisGraph(n={self.n}, f={sorted(self.f_edges())}, isolated={sorted(self.isolated)})"

    def label(self, i: int, j: int) -> str:
        return FAULTY if self._f[i, j] else GOOD

    def is_f(self, i: int, j: int) -> bool:
        return bool(self._f[i, j])

    def mark_f(self, i: int, j: int) -> bool:
        """Label edge ij ``f``; returns True if it was ``g`` before."""
        if i == j:
            raise ValueError("no self edges")
        was = self._f[i, j]
        self._f[i, j] = self._f[j, i] = True
        return not was

    def f_edges(self) -> set[tuple[int, int]]:
        ii, jj = np.nonzero(np.triu(self._f, 1))
        return {(int(a), int(b)) for a, b in zip(ii, jj)}

    def num_f_edges(self) -> int:
        return int(np.triu(self._f, 1).sum())

    def accusation_count(self, i: int) -> int:
        """f edges at i whose other end is not isolated."""
        return sum(1 for j in range(self.n) if j != i and self._f[i, j] and j not in self.isolated)

    def is_confirmed_faulty(self, i: int) -> bool:
        return i in self.isolated or self.accusation_count(i) > self.t

    def isolate(self, i: int) -> None:
        for j in range(self.n):
            if j != i:
                self.mark_f(i, j)
        self.isolated.add(i)

    def confirm_and_isolate(self) -> set[int]:
        """Isolate every node with more than t accusations; counts taken before any isolation."""
        confirmed = {i for i in range(self.n) if i not in self.isolated and self.accusation_count(i) > self.t}
        for i in sorted(confirmed):
            self.isolate(i)
        return confirmed

    def trusted_peers(self, i: int) -> set[int]:
        if i in self.isolated:
            return set()
        return {j for j in range(self.n) if j != i and not self._f[i, j] and j not in self.isolated}

    def to_edge_list(self) -> list[dict]:
        return [
            {"u": i, "v": j, "label": self.label(i, j)}
            for i in range(self.n)
            for j in range(i + 1, self.n)
        ]


def accusation_count(graph: DiagnosisGraph, i: int) -> int:
    return graph.accusation_count(i)


def is_confirmed_faulty(graph: DiagnosisGraph, i: int) -> bool:
    return graph.is_confirmed_faulty(i)


def trusted_peers(graph: DiagnosisGraph, i: int) -> set[int]:
    return graph.trusted_peers(i)


def edge(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


@dataclass
class ClaimTranscript:
    """What every node says it sent and received in the failed generation.

    Peers only claim receptions; what a peer sent follows from them by the
    protocol rules. The source claims what it sent in round 1. ``detection``
    holds the agreed notification bits.
    """

    sent: dict = field(default_factory=dict)  # Slot -> lane values, source only
    received: dict = field(default_factory=dict)  # node -> {Slot -> lane values}
    detection: dict = field(default_factory=dict)  # peer -> 0/1


@dataclass
class AuditResult:
    new_f: set[tuple[int, int]]
    source_inconsistent: bool = False
    mismatched: set[tuple[int, int]] = field(default_factory=set)
    bogus_detection: set[int] = field(default_factory=set)


def audit(transcript: ClaimTranscript, graph: DiagnosisGraph, spec: CodeSpec) -> AuditResult:
    """Edges to relabel ``f`` given agreed claims; pure, graph is not modified.

    Rules: the source's claimed round-1 packets must form one codeword; on
    every expected link the sender's (claimed or implied) packet must equal
    the receiver's claimed packet; each peer's agreed detection bit must equal
    what its own claimed receptions imply. A rule broken by one node alone
    accuses all its edges; a link mismatch accuses that link.
    """
    plan = plan_generation(graph, spec)
    new_f: set[tuple[int, int]] = set()
    result = AuditResult(new_f)

    def accuse_all(x: int) -> None:
        for y in range(graph.n):
            if y != x and not graph.is_f(x, y):
                new_f.add(edge(x, y))

    src_slots = plan.stage_slots(STAGE_SOURCE)
    if src_slots:
        pts = [spec.point_of(s.kind, s.index) for s in src_slots]
        order = np.argsort(pts)
        vals = np.stack([transcript.sent[s] for s in src_slots])[order]
        _, ok = codec.lanes_consistent(spec, [pts[o] for o in order], vals)
        if not ok.all():
            result.source_inconsistent = True
            accuse_all(SOURCE)

    for slot in plan.slots:
        sent = implied_sent(transcript, plan, slot)
        got = transcript.received.get(slot.receiver, {}).get(slot)
        if got is None or not np.array_equal(sent, got):
            e = edge(slot.sender, slot.receiver)
            result.mismatched.add(e)
            if not graph.is_f(*e):
                new_f.add(e)

    for x in plan.active:
        implied = implied_detection(transcript.received.get(x, {}), plan, x)
        if int(transcript.detection.get(x, 0)) != int(implied):
            result.bogus_detection.add(x)
            accuse_all(x)
    return result


def slot_set_consistent(spec: CodeSpec, slots: list[Slot], received: dict) -> tuple[bool, np.ndarray | None]:
    """Consistency of the values held for ``slots``, plus the decoded coefficients."""
    if len(slots) < spec.k:
        return False, None
    pairs = sorted(((spec.point_of(s.kind, s.index), received[s]) for s in slots), key=lambda p: p[0])
    pts = [p for p, _ in pairs]
    vals = np.stack([v for _, v in pairs])
    coeffs, ok = codec.lanes_consistent(spec, pts, vals)
    return bool(ok.all()), coeffs


def z_value(spec: CodeSpec, plan: GenerationPlan, node: int, received: dict) -> np.ndarray:
    """The z packet ``node`` sends, derived from its stage-2 receptions; zeros if it detects instead."""
    ok, coeffs = slot_set_consistent(spec, plan.z_inputs(node), received)
    if not ok:
        return np.zeros(spec.num_lanes, dtype=np.int64)
    return codec.evaluate(spec, coeffs, [spec.z_point(node)])[0]


def implied_sent(transcript: ClaimTranscript, plan: GenerationPlan, slot: Slot) -> np.ndarray:
    """What the sender of ``slot`` put on the wire, according to its own claims."""
    if slot.sender == SOURCE:
        return transcript.sent[slot]
    own = transcript.received.get(slot.sender, {})
    if slot.stage == STAGE_Z:
        return z_value(plan.spec, plan, slot.sender, own)
    # forwards and supplements relay the packet received from the source unchanged
    return own[plan.source_slot(slot.sender, slot.index)]


def implied_detection(received: dict, plan: GenerationPlan, node: int) -> bool:
    ok, _ = slot_set_consistent(plan.spec, plan.received_by(node), received)
    return not ok
