"""Who sends which packet to whom in one generation, given the diagnosis graph.

Every fault-free node derives the same plan from the same graph, so the plan
doubles as the list of messages each node is expected to send and receive.
That is what lets the audit check claims slot by slot.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, NamedTuple

from mvba.codec import CodeSpec

if TYPE_CHECKING:
    from mvba.diagnosis import DiagnosisGraph

SOURCE = 0

STAGE_SOURCE = "r1"
STAGE_FORWARD = "r2"
STAGE_SUPPLEMENT = "supp"
STAGE_Z = "z"
STAGES = (STAGE_SOURCE, STAGE_FORWARD, STAGE_SUPPLEMENT, STAGE_Z)


class Slot(NamedTuple):
    """One expected point-to-point packet."""

    stage: str
    sender: int
    receiver: int
    kind: str
    index: int


class ImpossibleSupplyError(RuntimeError):
    """Trusted peers cannot bring a source-accused peer up to n - t packets.

    With at most t faults this only happens to a faulty peer, so callers may
    isolate ``peer`` and plan again.
    """

    def __init__(self, peer: int, message: str):
        super().__init__(message)
        self.peer = peer


@dataclass
class GenerationPlan:
    spec: CodeSpec
    active: tuple[int, ...]  # non-isolated peers
    source_trusted: tuple[int, ...]
    source_accused: tuple[int, ...]  # active peers with an f edge to the source
    accusers: frozenset[int]  # every peer with an f edge to the source, isolated or not
    post_failure: bool = False
    slots: list[Slot] = field(default_factory=list)
    suppliers: dict[int, tuple[int, ...]] = field(default_factory=dict)

    def stage_slots(self, stage: str) -> list[Slot]:
        return [s for s in self.slots if s.stage == stage]

    def received_by(self, node: int) -> list[Slot]:
        return [s for s in self.slots if s.receiver == node]

    def sent_by(self, node: int) -> list[Slot]:
        return [s for s in self.slots if s.sender == node]

    def source_slot(self, peer: int, index: int) -> Slot:
        return Slot(STAGE_SOURCE, SOURCE, peer, "Y", index)

    def z_inputs(self, node: int) -> list[Slot]:
        return [s for s in self.slots if s.receiver == node and s.stage in (STAGE_FORWARD, STAGE_SUPPLEMENT)]


def plan_generation(graph: DiagnosisGraph, spec: CodeSpec) -> GenerationPlan:
    n, k = spec.n, spec.k
    active = tuple(j for j in range(1, n) if j not in graph.isolated)
    accusers = frozenset(j for j in range(1, n) if graph.is_f(SOURCE, j))
    trusted = tuple(j for j in active if j not in accusers)
    accused = tuple(j for j in active if j in accusers)
    plan = GenerationPlan(spec, active, trusted, accused, accusers, post_failure=graph.num_f_edges() > 0)

    slots = plan.slots
    for j in trusted:
        slots.append(Slot(STAGE_SOURCE, SOURCE, j, "Y", j))
        slots.append(Slot(STAGE_SOURCE, SOURCE, j, "Y", n - 1 + j))
    for j in trusted:
        for i in active:
            if i != j and not graph.is_f(i, j):
                slots.append(Slot(STAGE_FORWARD, j, i, "Y", j))
    for i in accused:
        eligible = [j for j in trusted if not graph.is_f(i, j)]
        need = k - len(eligible)
        if need > 0:
            if need > len(eligible):
                raise ImpossibleSupplyError(
                    i,
                    f"peer {i} can reach only {2 * len(eligible)} of the {k} packets it needs"
                )
            chosen = tuple(eligible[:need])
            plan.suppliers[i] = chosen
            for j in chosen:
                slots.append(Slot(STAGE_SUPPLEMENT, j, i, "Y", n - 1 + j))
    for i in accused:
        for j in active:
            if j != i and not graph.is_f(i, j):
                slots.append(Slot(STAGE_Z, i, j, "Z", i))
    return plan
