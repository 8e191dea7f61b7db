"""Node state machines and the generation loop.

One generation agrees on ``(n - t) c`` bits:

1. the source sends two coded packets to every peer it trusts;
2. peers trusted by the source forward their first packet to the peers they trust;
3. (after a failure) source-accused peers get topped up to ``n - t`` packets,
   regenerate their own z packet and send it to the peers they trust;
4. every peer checks that everything it holds lies on one polynomial and the
   1-bit verdicts are agreed through the broadcast subprotocol;
5. on any alarm, every node broadcasts its claims, the diagnosis graph is
   updated by the audit and the generation's value is taken from the
   source's agreed claims.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from mvba import codec
from mvba.bcast import measure_bit_cost
from mvba.codec import CodeSpec, DataVector, encode_subset, make_code_spec, symbols_to_bits
from mvba.diagnosis import (
    AuditResult,
    ClaimTranscript,
    DiagnosisGraph,
    audit,
    implied_detection,
    slot_set_consistent,
    z_value,
)
from mvba.net import (
    InvariantViolation,
    Message,
    Network,
    RunConfig,
    RunReport,
    Transcript,
    generations_for,
)
from mvba.schedule import (
    SOURCE,
    STAGE_FORWARD,
    STAGE_SOURCE,
    STAGE_SUPPLEMENT,
    STAGE_Z,
    GenerationPlan,
    ImpossibleSupplyError,
    plan_generation,
)

NORMAL = "normal"
POST_FAILURE = "post_failure"


@dataclass
class NodeState:
    id: int
    spec: CodeSpec
    graph: DiagnosisGraph
    generation_index: int = 0
    received: dict = field(default_factory=dict)
    missing: set = field(default_factory=set)
    sent: dict = field(default_factory=dict)
    data: DataVector | None = None
    detection: int = 0
    output: list = field(default_factory=list)  # one DataVector (or None) per generation

    @property
    def role(self) -> str:
        return "source" if self.id == SOURCE else "peer"

    @property
    def mode(self) -> str:
        return POST_FAILURE if self.graph.num_f_edges() else NORMAL

    def begin_generation(self, index: int) -> None:
        self.generation_index = index
        self.received = {}
        self.missing = set()
        self.sent = {}
        self.data = None
        self.detection = 0


@dataclass
class GenerationResult:
    agreed: DataVector | None  # None means the default value
    had_broadcast_phase: bool = False
    bits_data: int = 0
    bits_broadcast_subprotocol: int = 0
    new_f_edges: set = field(default_factory=set)
    notifications: dict = field(default_factory=dict)

    @property
    def default(self) -> bool:
        return self.agreed is None


# per-node steps


def source_round1(state: NodeState, data: DataVector, plan: GenerationPlan) -> list[Message]:
    state.data = data
    slots = plan.stage_slots(STAGE_SOURCE)
    if not slots:
        return []
    by_index = {p.index: p.value for p in encode_subset(data, state.spec, accusers=plan.accusers)}
    msgs = []
    for slot in slots:
        state.sent[slot] = by_index[slot.index]
        msgs.append(Message(STAGE_SOURCE, slot, by_index[slot.index]))
    return msgs


def _relay(state: NodeState, plan: GenerationPlan, stage: str) -> list[Message]:
    msgs = []
    for slot in plan.sent_by(state.id):
        if slot.stage == stage:
            value = state.received[plan.source_slot(state.id, slot.index)]
            state.sent[slot] = value
            msgs.append(Message(stage, slot, value))
    return msgs


def peer_round2(state: NodeState, plan: GenerationPlan) -> list[Message]:
    """Forward y_i to every trusted peer; peers accused by the source send nothing."""
    return _relay(state, plan, STAGE_FORWARD)


def supplement_sends(state: NodeState, plan: GenerationPlan) -> list[Message]:
    """Second packets y_{n-1+j} for source-accused peers that are short of n - t."""
    return _relay(state, plan, STAGE_SUPPLEMENT)


def peer_round3(state: NodeState, plan: GenerationPlan) -> list[Message]:
    """z packet of a source-accused peer; withheld (value None) if its inputs are inconsistent."""
    slots = [s for s in plan.sent_by(state.id) if s.stage == STAGE_Z]
    if not slots:
        return []
    ok, _ = slot_set_consistent(state.spec, plan.z_inputs(state.id), state.received)
    value = z_value(state.spec, plan, state.id, state.received) if ok else None
    msgs = []
    for slot in slots:
        if value is not None:
            state.sent[slot] = value
        msgs.append(Message(STAGE_Z, slot, value))
    return msgs


def detection_bit(state: NodeState, plan: GenerationPlan) -> int:
    state.detection = int(implied_detection(state.received, plan, state.id))
    return state.detection


def decode_held(state: NodeState, plan: GenerationPlan) -> DataVector | None:
    ok, coeffs = slot_set_consistent(state.spec, plan.received_by(state.id), state.received)
    return DataVector(coeffs) if ok else None


def settle_plan(graphs: list[DiagnosisGraph], spec: CodeSpec) -> tuple[GenerationPlan, list[int]]:
    """Plan the next generation, isolating peers that cannot be supplied.

    A fault-free peer accused by the source always has enough trusted
    suppliers, so a peer short of them is faulty. ``graphs`` are the
    (identical) copies held by all nodes; every one is updated.
    """
    cut = []
    while True:
        try:
            return plan_generation(graphs[0], spec), cut
        except ImpossibleSupplyError as exc:
            cut.append(exc.peer)
            for g in graphs:
                g.isolate(exc.peer)


# cluster-level orchestration


class Cluster:
    """All node states plus the network and adversary of one run."""

    def __init__(self, config: RunConfig, spec: CodeSpec, strategy, rng: np.random.Generator):
        self.config = config
        self.spec = spec
        self.n, self.t = spec.n, spec.t
        self.network = Network(spec, spec.t, record=config.record_transcript)
        self.strategy = strategy
        self.rng = rng
        self.states = [NodeState(i, spec, DiagnosisGraph(spec.n, spec.t)) for i in range(spec.n)]
        self.markers: set[str] = set()
        self.broadcast_phases = 0
        self.phase_new_edges: list[int] = []
        self.soundness_ok = True
        self.generation = 0
        self.current_data: DataVector | None = None
        self.current_plan: GenerationPlan | None = None
        self.current_notes: dict[int, int] = {}
        self._plan_key = None
        self.elapsed_rounds = 0

    @property
    def graph(self) -> DiagnosisGraph:
        return self.states[SOURCE].graph

    def fault_free(self) -> list[int]:
        return [i for i in range(self.n) if not self.network.is_corrupted(i)]

    def plan(self) -> GenerationPlan:
        g = self.graph
        key = (g.num_f_edges(), frozenset(g.isolated))
        if key != self._plan_key:
            self._plan, cut = settle_plan([st.graph for st in self.states], self.spec)
            if cut:
                self.markers.add("unsuppliable_isolated")
                self._check_soundness()
            g = self.graph
            self._plan_key = (g.num_f_edges(), frozenset(g.isolated))
        return self._plan

    def corrupt(self, node: int) -> bool:
        if self.network.corrupt(node):
            self.markers.add("corrupt")
            return True
        return False

    def byzantine_behaviour(self, participants) -> dict[int, str]:
        return {
            v: self.strategy.subprotocol(v, self)
            for v in participants
            if self.network.is_corrupted(v)
        }

    def sub_t(self) -> int:
        return max(self.t - len(self.graph.isolated), 0)

    def deliver(self, plan: GenerationPlan, stage: str, msgs: list[Message]) -> None:
        slots = plan.stage_slots(stage)
        if not slots:
            return
        self.strategy.before_stage(self, stage)
        self.network.next_round()
        self.elapsed_rounds += 1
        delivered = {}
        for m in msgs:
            if self.network.is_corrupted(m.sender):
                m = self.strategy.rewrite(m, self)
                if m is None:
                    continue
            if m.value is None:
                continue
            self.network.log_packet(m)
            delivered[m.slot] = m.value
        zero = np.zeros(self.spec.num_lanes, dtype=np.int64)
        for slot in slots:
            st = self.states[slot.receiver]
            value = delivered.get(slot)
            if value is None:
                st.received[slot] = zero
                st.missing.add(slot)
                self.markers.add("missing_packet")
            else:
                st.received[slot] = value

    # phases

    def notification_phase(self, plan: GenerationPlan) -> dict[int, int]:
        """Agree on every active peer's detection bit."""
        participants = [SOURCE, *plan.active]
        bits = []
        for j in plan.active:
            b = self.states[j].detection
            if self.network.is_corrupted(j):
                b = int(self.strategy.rewrite_detection(j, b, self))
            bits.append(np.array([b], dtype=np.int8))
        outs = self.network.broadcast(
            "notify",
            list(plan.active),
            bits,
            participants,
            self.sub_t(),
            self.byzantine_behaviour(participants),
            self.rng,
        )
        self.elapsed_rounds += 1
        agreed = {}
        honest = [v for v in participants if not self.network.is_corrupted(v)]
        for j, o in zip(plan.active, outs):
            self._check_agreement(o, honest)
            agreed[j] = int(o.agreed_value[0])
        return agreed

    def _check_agreement(self, outcome, honest) -> None:
        if not self.config.check_invariants or not honest:
            return
        ref = outcome.outputs[honest[0]]
        for v in honest[1:]:
            if not np.array_equal(outcome.outputs[v], ref):
                raise InvariantViolation("broadcast subprotocol outputs differ between fault-free nodes")

    def claims_of(self, node: int, plan: GenerationPlan) -> dict:
        st = self.states[node]
        if node == SOURCE:
            claims = {s: st.sent[s] for s in plan.stage_slots(STAGE_SOURCE)}
        else:
            claims = {s: st.received[s] for s in plan.received_by(node)}
        if self.network.is_corrupted(node):
            claims = self.strategy.rewrite_claim(node, claims, self)
        return claims

    def broadcast_phase(self, plan: GenerationPlan, notifications: dict[int, int]) -> tuple[DataVector | None, AuditResult]:
        self.broadcast_phases += 1
        self.markers.add("broadcast_phase")
        spec = self.spec
        nodes = [SOURCE, *plan.active]
        order = {v: (plan.stage_slots(STAGE_SOURCE) if v == SOURCE else plan.received_by(v)) for v in nodes}
        payloads = []
        for v in nodes:
            claims = self.claims_of(v, plan)
            slots = order[v]
            if slots:
                payloads.append(symbols_to_bits(np.stack([claims[s] for s in slots]), spec).reshape(-1))
            else:
                payloads.append(np.zeros(0, dtype=np.int8))
        outs = self.network.broadcast(
            "claims", nodes, payloads, nodes, self.sub_t(), self.byzantine_behaviour(nodes), self.rng
        )
        self.elapsed_rounds += 1
        honest = [v for v in nodes if not self.network.is_corrupted(v)]
        transcript = ClaimTranscript(detection=dict(notifications))
        for v, o in zip(nodes, outs):
            self._check_agreement(o, honest)
            slots = order[v]
            if not slots:
                continue
            values = codec.bits_to_symbols(o.agreed_value.reshape(len(slots), spec.c), spec)
            table = dict(zip(slots, values))
            if v == SOURCE:
                transcript.sent = table
            else:
                transcript.received[v] = table

        result = None
        for st in self.states:
            res = audit(transcript, st.graph, spec)
            if result is None:
                result = res
            elif self.config.check_invariants and res.new_f != result.new_f:
                raise InvariantViolation("audit results differ between nodes")
            for e in res.new_f:
                st.graph.mark_f(*e)
        assert result is not None
        if result.source_inconsistent:
            self.markers.add("source_inconsistent")
        if result.mismatched:
            self.markers.add("mismatch")
        if result.bogus_detection:
            self.markers.add("bogus_detection")
        self.phase_new_edges.append(len(result.new_f))
        if self.config.check_invariants and not result.new_f:
            raise InvariantViolation("broadcast phase added no f edge")
        for st in self.states:
            newly = st.graph.confirm_and_isolate()
            if newly:
                self.markers.add("isolation")
        self._check_soundness()

        if self.graph.is_confirmed_faulty(SOURCE):
            return None, result
        src_slots = plan.stage_slots(STAGE_SOURCE)
        ok, coeffs = slot_set_consistent(spec, src_slots, transcript.sent)
        if not ok:  # unreachable: an inconsistent source is fully accused above
            raise InvariantViolation("inconsistent source claims survived the audit")
        return DataVector(coeffs), result

    def _check_soundness(self) -> None:
        good = set(self.fault_free())
        for v in good:
            if self.states[v].graph != self.graph and self.config.check_invariants:
                raise InvariantViolation("diagnosis graphs of fault-free nodes differ")
        for a, b in self.graph.f_edges():
            if a in good and b in good:
                self.soundness_ok = False
                if self.config.check_invariants:
                    raise InvariantViolation(f"f edge between fault-free nodes {a} and {b}")

    def run_generation(self, data: DataVector) -> GenerationResult:
        plan = self.plan()
        self.current_data = data
        self.current_plan = plan
        data_before = self.network.bits_data
        sub_before = self.network.bits_subprotocol
        for st in self.states:
            st.begin_generation(self.generation)
        if plan.post_failure:
            self.markers.add("post_failure")

        self.deliver(plan, STAGE_SOURCE, source_round1(self.states[SOURCE], data, plan))
        msgs = [m for j in plan.source_trusted for m in peer_round2(self.states[j], plan)]
        self.deliver(plan, STAGE_FORWARD, msgs)
        if plan.suppliers:
            self.markers.add("supplement")
            msgs = [m for j in plan.active for m in supplement_sends(self.states[j], plan)]
            self.deliver(plan, STAGE_SUPPLEMENT, msgs)
        if plan.source_accused:
            self.markers.add("z_packet")
            msgs = [m for j in plan.source_accused for m in peer_round3(self.states[j], plan)]
            self.deliver(plan, STAGE_Z, msgs)
        for j in plan.active:
            if detection_bit(self.states[j], plan):
                self.markers.add("detect")

        notes = self.notification_phase(plan)
        self.current_notes = notes
        result = GenerationResult(agreed=data, notifications=notes)
        if any(notes.values()):
            result.had_broadcast_phase = True
            recovered, res = self.broadcast_phase(plan, notes)
            result.new_f_edges = res.new_f
            result.agreed = recovered
            for st in self.states:
                st.output.append(recovered)
        else:
            for st in self.states:
                if st.id == SOURCE:
                    st.output.append(data)
                elif st.id in plan.active:
                    st.output.append(decode_held(st, plan))
                else:
                    st.output.append(None)
        result.bits_data = self.network.bits_data - data_before
        result.bits_broadcast_subprotocol = self.network.bits_subprotocol - sub_before
        self.generation += 1
        return result


def simulate(config: RunConfig) -> tuple[RunReport, Transcript]:
    from mvba.adversary import make_strategy

    spec = make_code_spec(config.n, config.t, config.c)
    data_ss, adv_ss, sub_ss = np.random.SeedSequence(config.seed).spawn(3)
    strategy = make_strategy(config.adversary, config.adversary_params, np.random.default_rng(adv_ss))
    cluster = Cluster(config, spec, strategy, np.random.default_rng(sub_ss))
    k, c = spec.k, spec.c
    G = generations_for(config.n, config.t, c, config.l)
    bits = np.zeros(G * k * c, dtype=np.uint8)
    bits[: config.l] = np.random.default_rng(data_ss).integers(0, 2, size=config.l, dtype=np.uint8)

    report = RunReport(config.n, config.t, c, config.l, config.adversary, config.seed)
    report.b_measured = measure_bit_cost(range(config.n), config.t)
    inputs = []
    for g in range(G):
        strategy.before_generation(cluster, g)
        data = codec.bits_to_data(bits[g * k * c : (g + 1) * k * c], spec)
        inputs.append(data)
        res = cluster.run_generation(data)
        report.generation_bits.append((res.bits_data, res.bits_broadcast_subprotocol))
        if res.default:
            cluster.markers.add("default_termination")
            report.default_terminated = True
            report.default_from_generation = g
            for st in cluster.states:
                st.output.extend([None] * (G - g - 1))
            break
    report.generations = cluster.generation

    _score_outputs(cluster, inputs, G, report)
    net = cluster.network
    report.bits_data = net.bits_data
    report.bits_notification = net.bits_notification
    report.bits_claims = net.bits_claims
    report.bits_subprotocol = net.bits_subprotocol
    report.bits_total = net.bits_total
    report.bits_per_link = dict(net.link_bits)
    if sum(report.bits_per_link.values()) != report.bits_total:
        raise InvariantViolation("per-link bits do not add up to the total")
    report.broadcast_phases = cluster.broadcast_phases
    report.phase_new_edges = cluster.phase_new_edges
    report.elapsed_rounds = cluster.elapsed_rounds
    report.sub_rounds = net.sub_rounds
    report.agreed_bits = config.l
    report.throughput_proxy = report.agreed_bits / max(report.elapsed_rounds, 1)
    report.overhead = report.bits_total / config.l
    report.corrupted = sorted(net.corrupted)
    report.f_edges = sorted(cluster.graph.f_edges())
    report.isolated = sorted(cluster.graph.isolated)
    report.graph = cluster.graph.to_edge_list()
    report.soundness_ok = cluster.soundness_ok
    report.markers = set(cluster.markers)
    if config.check_invariants:
        bound = config.t * (config.t + 1)
        if report.broadcast_phases > bound:
            raise InvariantViolation(f"{report.broadcast_phases} broadcast phases exceed t(t+1) = {bound}")
        if report.disagreements or not report.validity_ok:
            raise InvariantViolation("fault-free nodes disagree or validity failed")
    return report, net.transcript


def _score_outputs(cluster: Cluster, inputs: list[DataVector], G: int, report: RunReport) -> None:
    spec = cluster.spec
    zero = np.zeros((spec.k, spec.num_lanes), dtype=np.int64)

    def stacked(node: int) -> np.ndarray:
        out = cluster.states[node].output
        return np.stack([zero if d is None else d.symbols for d in out[:G]])

    good = cluster.fault_free()
    peers = [v for v in good if v != SOURCE]
    if not peers:
        return
    ref = stacked(peers[0])
    report.disagreements = sum(0 if np.array_equal(stacked(v), ref) else 1 for v in peers[1:])
    if SOURCE in good:
        expected = np.stack([d.symbols for d in inputs] + [zero] * (G - len(inputs)))
        report.validity_ok = all(np.array_equal(stacked(v), expected) for v in peers)


def agreed_bits(cluster: Cluster, node: int) -> np.ndarray:
    """Output bit sequence of ``node`` truncated to l."""
    spec = cluster.spec
    parts = [
        np.zeros(spec.k * spec.c, dtype=np.uint8) if d is None else codec.data_to_bits(d, spec)
        for d in cluster.states[node].output
    ]
    return np.concatenate(parts)[: cluster.config.l]
