"""Scripted Byzantine strategies.

A strategy decides which nodes to corrupt (at generation boundaries or
between rounds, never more than t) and then controls their outgoing packets,
their detection bits, their claims and how they act inside the broadcast
subprotocol. All randomness comes from the generator handed in at
construction, so runs are reproducible from the seed.
"""

from __future__ import annotations

import ast
import dataclasses
from typing import Any

import numpy as np

from mvba.codec import CodeSpec, make_code_spec
from mvba.net import ConfigError, Message
from mvba.schedule import SOURCE, STAGE_FORWARD, STAGE_SOURCE


def parse_params(text: str | None) -> dict[str, Any]:
    """``"a=1,b=x,c=0.5"`` -> ``{"a": 1, "b": "x", "c": 0.5}``."""
    out: dict[str, Any] = {}
    if not text:
        return out
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"adversary parameter {item!r} is not key=value")
        try:
            out[key.strip()] = ast.literal_eval(raw.strip())
        except (ValueError, SyntaxError):
            out[key.strip()] = raw.strip()
    return out


def _random_other(rng: np.random.Generator, value: np.ndarray, spec: CodeSpec) -> np.ndarray:
    """A lane vector different from ``value`` in at least one lane."""
    out = value.copy()
    lane = int(rng.integers(spec.num_lanes))
    size = 1 << spec.lanes[lane]
    out[lane] = (value[lane] + 1 + int(rng.integers(size - 1))) % size
    return out


class Strategy:
    name = "base"
    sub_behaviour = "random"
    defaults: dict[str, Any] = {}

    def __init__(self, params: dict[str, Any] | None = None, rng: np.random.Generator | None = None):
        self.params = {**self.defaults, **(params or {})}
        unknown = set(self.params) - set(self.defaults) - {"sub"}
        if unknown:
            raise ConfigError(f"{self.name}: unknown parameters {sorted(unknown)}")
        self.rng = rng if rng is not None else np.random.default_rng(0)

    def p(self, key: str) -> Any:
        return self.params[key]

    # hooks, all no-ops by default

    def before_generation(self, cluster, g: int) -> None:
        pass

    def before_stage(self, cluster, stage: str) -> None:
        pass

    def rewrite(self, msg: Message, cluster) -> Message | None:
        return msg

    def rewrite_detection(self, node: int, bit: int, cluster) -> int:
        return bit

    def rewrite_claim(self, node: int, claims: dict, cluster) -> dict:
        return claims

    def subprotocol(self, node: int, cluster) -> str:
        return self.params.get("sub", self.sub_behaviour)

    # helpers

    def corrupt_upto(self, cluster, nodes) -> None:
        for v in nodes:
            if len(cluster.network.corrupted) >= cluster.t:
                break
            cluster.corrupt(v)

    def tamper(self, msg: Message, cluster) -> Message:
        cluster.markers.add(f"{self.name}:tamper")
        return Message(msg.stage, msg.slot, _random_other(self.rng, msg.value, cluster.spec))


class Honest(Strategy):
    name = "honest"


class EquivocatingSource(Strategy):
    """The source sends packets off its codeword to some peers.

    ``claims``: ``"codeword"`` claims the honest encoding (blames the links),
    ``"actual"`` claims what it really sent (caught as inconsistent).
    """

    name = "equivocating_source"
    sub_behaviour = "honest"
    defaults = {"at": 0, "rate": 0.5, "claims": "codeword", "victims": 1}

    def before_generation(self, cluster, g):
        if g >= self.p("at"):
            self.corrupt_upto(cluster, [SOURCE])
        self._victims = None

    def _pick_victims(self, cluster) -> set[int]:
        if self._victims is None:
            trusted = list(cluster.current_plan.source_trusted)
            self._victims = set()
            if trusted and self.rng.random() < self.p("rate"):
                k = min(int(self.p("victims")), len(trusted))
                self._victims = set(self.rng.choice(trusted, size=k, replace=False).tolist())
        return self._victims

    def rewrite(self, msg, cluster):
        if msg.stage == STAGE_SOURCE and msg.receiver in self._pick_victims(cluster):
            out = self.tamper(msg, cluster)
            self._actual = getattr(self, "_actual", {})
            self._actual[msg.slot] = out.value
            return out
        return msg

    def rewrite_claim(self, node, claims, cluster):
        if node == SOURCE and self.p("claims") == "actual":
            cluster.markers.add(f"{self.name}:claims_actual")
            actual = getattr(self, "_actual", {})
            claims = {s: actual.get(s, v) for s, v in claims.items()}
        self._actual = {}
        return claims


class TamperingPeer(Strategy):
    """A peer corrupts the packets it relays to a random subset of receivers."""

    name = "tampering_peer"
    defaults = {"at": 0, "node": -1, "rate": 0.5}

    def _node(self, cluster) -> int:
        v = int(self.p("node"))
        return v if v > 0 else cluster.n - 1

    def before_generation(self, cluster, g):
        if g >= self.p("at"):
            self.corrupt_upto(cluster, [self._node(cluster)])

    def rewrite(self, msg, cluster):
        if msg.stage != STAGE_SOURCE and msg.value is not None and self.rng.random() < self.p("rate"):
            return self.tamper(msg, cluster)
        return msg


class FalseAlarm(Strategy):
    """Corrupted peers raise the alarm on clean generations."""

    name = "false_alarm"
    defaults = {"at": 0, "count": 1, "rate": 1.0}

    def before_generation(self, cluster, g):
        if g >= self.p("at"):
            peers = list(range(cluster.n - 1, 0, -1))[: int(self.p("count"))]
            self.corrupt_upto(cluster, peers)

    def subprotocol(self, node, cluster):
        return self.params.get("sub", "honest")

    def rewrite_detection(self, node, bit, cluster):
        if not bit and self.rng.random() < self.p("rate"):
            cluster.markers.add(f"{self.name}:raise")
            return 1
        return bit


class LyingClaims(Strategy):
    """Corrupted peers raise the alarm and back it with a forged reception.

    Each phase the liar blames one link it still shares a ``g`` edge with,
    so the audit can only charge that one link. This stretches the number of
    broadcast phases as far as the accusation threshold allows.
    """

    name = "lying_claims"
    sub_behaviour = "honest"
    defaults = {"at": 0, "count": -1, "rate": 1.0, "stagger": True}

    def before_generation(self, cluster, g):
        if g < self.p("at"):
            return
        count = int(self.p("count"))
        count = cluster.t if count < 0 else count
        self.corrupt_upto(cluster, list(range(cluster.n - 1, 0, -1))[:count])

    def _blame(self, node, cluster):
        plan = cluster.current_plan
        g = cluster.graph
        # a forged relay reception costs one link; a forged source packet would
        # also contradict every forward the liar made
        slots = sorted(plan.received_by(node), key=lambda s: s.stage == STAGE_SOURCE)
        for s in slots:
            if not g.is_f(s.sender, node) and not cluster.network.is_corrupted(s.sender):
                return s
        return None

    def _turn(self, node, cluster) -> bool:
        # one liar per generation, so every phase yields a single new f edge
        if not self.p("stagger"):
            return True
        liars = [v for v in sorted(cluster.network.corrupted) if v != SOURCE and v not in cluster.graph.isolated]
        return bool(liars) and liars[0] == node

    def rewrite_detection(self, node, bit, cluster):
        if not self._turn(node, cluster):
            return bit
        if self._blame(node, cluster) is not None and self.rng.random() < self.p("rate"):
            cluster.markers.add(f"{self.name}:raise")
            return 1
        return bit

    def rewrite_claim(self, node, claims, cluster):
        if node == SOURCE:
            return claims
        if not cluster.current_notes.get(node):
            return claims
        slot = self._blame(node, cluster)
        if slot is None:
            return claims
        cluster.markers.add(f"{self.name}:forge")
        claims = dict(claims)
        claims[slot] = _random_other(self.rng, claims[slot], cluster.spec)
        return claims


class Crash(Strategy):
    """Nodes stop sending from a given generation on."""

    name = "crash"
    sub_behaviour = "silent"
    defaults = {"at": 1, "node": -1, "count": 1}

    def before_generation(self, cluster, g):
        if g >= self.p("at"):
            v = int(self.p("node"))
            nodes = [v] if v >= 0 else list(range(cluster.n - 1, 0, -1))[: int(self.p("count"))]
            self.corrupt_upto(cluster, nodes)

    def rewrite(self, msg, cluster):
        cluster.markers.add(f"{self.name}:drop")
        return None


class ColludingSourcePlusPeer(Strategy):
    """The source equivocates towards one honest peer and a corrupted peer
    relays values that agree with the forged view."""

    name = "colluding_source_plus_peer"
    sub_behaviour = "honest"
    defaults = {"at": 0, "rate": 0.5}

    def before_generation(self, cluster, g):
        self._forged = None
        if g >= self.p("at"):
            self.corrupt_upto(cluster, [SOURCE, cluster.n - 1])

    def _setup(self, cluster):
        if self._forged is not None:
            return self._forged
        self._forged = {}
        plan = cluster.current_plan
        honest = [j for j in plan.source_trusted if not cluster.network.is_corrupted(j)]
        if not honest or self.rng.random() >= self.p("rate"):
            return self._forged
        victim = int(self.rng.choice(honest))
        spec = cluster.spec
        from mvba.codec import evaluate

        fake = cluster.current_data.symbols.copy()
        fake[0] = _random_other(self.rng, fake[0], spec)
        pts = [spec.y_point(i) for i in range(1, 2 * (spec.n - 1) + 1)]
        vals = evaluate(spec, fake, pts)
        self._forged = {"victim": victim, "values": {i: vals[i - 1] for i in range(1, 2 * (spec.n - 1) + 1)}}
        cluster.markers.add(f"{self.name}:forge")
        return self._forged

    def rewrite(self, msg, cluster):
        forged = self._setup(cluster)
        if not forged:
            return msg
        if msg.receiver == forged["victim"] and msg.slot.kind == "Y":
            return Message(msg.stage, msg.slot, forged["values"][msg.slot.index])
        return msg


class AdaptiveTakeover(Strategy):
    """Watches the run and takes over nodes mid-generation.

    The first takeover happens after round 1 of generation ``at``; the node
    picked is the peer holding the fewest f edges, which is the one whose
    corruption is least likely to be caught quickly. Later takeovers follow
    every ``every`` generations until the budget is spent.
    """

    name = "adaptive_takeover"
    defaults = {"at": 1, "every": 2, "rate": 0.7}

    def before_generation(self, cluster, g):
        self._g = g

    def before_stage(self, cluster, stage):
        g = self._g
        if stage != STAGE_FORWARD or g < self.p("at") or (g - self.p("at")) % max(int(self.p("every")), 1):
            return
        if len(cluster.network.corrupted) >= cluster.t:
            return
        graph = cluster.graph
        candidates = [
            v for v in range(cluster.n)
            if not cluster.network.is_corrupted(v) and v not in graph.isolated
        ]
        if not candidates:
            return
        v = min(candidates, key=lambda x: (sum(graph.is_f(x, y) for y in range(cluster.n) if y != x), -x))
        if cluster.corrupt(v):
            cluster.markers.add(f"{self.name}:takeover")
            cluster.markers.add(f"{self.name}:takeover_mid_generation")

    def rewrite(self, msg, cluster):
        if msg.value is not None and self.rng.random() < self.p("rate"):
            return self.tamper(msg, cluster)
        return msg


STRATEGIES: dict[str, type[Strategy]] = {
    cls.name: cls
    for cls in (
        Honest,
        EquivocatingSource,
        TamperingPeer,
        FalseAlarm,
        LyingClaims,
        Crash,
        ColludingSourcePlusPeer,
        AdaptiveTakeover,
    )
}


def make_strategy(name: str, params: dict[str, Any] | str | None, rng: np.random.Generator) -> Strategy:
    if name not in STRATEGIES:
        raise ConfigError(f"unknown adversary {name!r}")
    if isinstance(params, str):
        params = parse_params(params)
    return STRATEGIES[name](params, rng)


# single-generation harness for exhaustive tampering checks


@dataclasses.dataclass
class GenerationOutcome:
    detect: np.ndarray  # (T, n-1) per peer
    decoded: np.ndarray  # (T, n-1, k) per peer, meaningful where detect is False


def normal_generation(n: int, t: int, width: int, source_sends: np.ndarray, forwards: np.ndarray) -> GenerationOutcome:
    """Replay a fault-free-graph generation for T independent trials at once.

    ``source_sends[T, i-1, 0|1]`` are the packets the source put on the link
    to peer ``i`` (slots ``y_i`` and ``y_{n-1+i}``); ``forwards[T, j-1, i-1]``
    is the copy of ``y_j`` that peer ``j`` put on the link to peer ``i``.
    Each trial rides in its own lane of GF(2^width).
    """
    from mvba.codec import lanes_consistent

    T = source_sends.shape[0]
    base = make_code_spec(n, t, width)
    spec = dataclasses.replace(base, lanes=(width,) * T)
    k = spec.k
    detect = np.zeros((T, n - 1), dtype=bool)
    decoded = np.zeros((T, n - 1, k), dtype=np.int64)
    for i in range(1, n):
        rows = []
        for j in range(1, n):
            rows.append(source_sends[:, i - 1, 0] if j == i else forwards[:, j - 1, i - 1])
        rows.append(source_sends[:, i - 1, 1])
        pts = list(range(1, n)) + [n - 1 + i]
        coeffs, ok = lanes_consistent(spec, pts, np.stack(rows))
        detect[:, i - 1] = ~ok
        decoded[:, i - 1, :] = coeffs.T
    return GenerationOutcome(detect, decoded)


def single_and_pair_tamperings(n: int, width: int):
    """Every way of changing one or two of the source's 2(n-1) packets.

    Yields ``(positions, deltas)`` with positions indexing the flattened
    (peer, which) packet array and nonzero XOR deltas.
    """
    from itertools import combinations, product

    m = 2 * (n - 1)
    q = 1 << width
    for p in range(m):
        for d in range(1, q):
            yield (p,), (d,)
    for a, b in combinations(range(m), 2):
        for da, db in product(range(1, q), repeat=2):
            yield (a, b), (da, db)
