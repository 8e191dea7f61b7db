"""Lockstep synchronous network: bit ledger, transcript, corruption budget, and ``run``."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any, TextIO

import numpy as np

from mvba import bcast
from mvba.codec import CodeSpec, make_code_spec, symbols_to_bits


class ConfigError(ValueError):
    """Invalid run configuration."""


class BudgetExceeded(RuntimeError):
    """The adversary asked to corrupt more than t nodes."""


class InvariantViolation(AssertionError):
    """A safety or accounting invariant failed during a run."""


@dataclass
class RunConfig:
    n: int
    t: int
    c: int
    l: int
    adversary: str = "honest"
    adversary_params: dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    record_transcript: bool = True
    check_invariants: bool = True

    def validate(self) -> None:
        from mvba.adversary import STRATEGIES

        if self.t < 1:
            raise ConfigError("t must be at least 1")
        if self.n <= 3 * self.t:
            raise ConfigError(f"need t < n/3, got n={self.n}, t={self.t}")
        if self.l < 1:
            raise ConfigError("l must be at least 1")
        if self.adversary not in STRATEGIES:
            raise ConfigError(f"unknown adversary {self.adversary!r}; choose from {sorted(STRATEGIES)}")
        try:
            make_code_spec(self.n, self.t, self.c)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass
class Message:
    """A data-plane packet on one link. ``value`` is None when withheld."""

    stage: str
    slot: Any
    value: np.ndarray | None

    @property
    def sender(self) -> int:
        return self.slot.sender

    @property
    def receiver(self) -> int:
        return self.slot.receiver


def count_bits(message: Message | None, spec: CodeSpec) -> int:
    """Payload bits only: c per packet, nothing for a withheld message."""
    if message is None or message.value is None:
        return 0
    return spec.c


@dataclass
class TranscriptEntry:
    round: int
    sender: int
    receiver: int
    kind: str
    payload: str  # hex

    def line(self) -> str:
        return f"{self.round} {self.sender} {self.receiver} {self.kind} {self.payload}"


@dataclass
class Transcript:
    entries: list[TranscriptEntry] = field(default_factory=list)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Transcript) and self.entries == other.entries

    def __len__(self) -> int:
        return len(self.entries)

    def to_text(self) -> str:
        return "".join(e.line() + "\n" for e in self.entries)

    def write(self, fh: TextIO) -> None:
        for e in self.entries:
            fh.write(e.line() + "\n")

    def kinds(self) -> set[str]:
        return {e.kind for e in self.entries}


def bits_hex(bits: np.ndarray) -> str:
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size == 0:
        return "-"
    return np.packbits(bits).tobytes().hex()


@dataclass
class RunReport:
    n: int
    t: int
    c: int
    l: int
    adversary: str
    seed: int
    bits_total: int = 0
    bits_data: int = 0
    bits_subprotocol: int = 0
    bits_notification: int = 0
    bits_claims: int = 0
    bits_per_link: dict[tuple[int, int], int] = field(default_factory=dict)
    broadcast_phases: int = 0
    generations: int = 0
    agreed_bits: int = 0
    elapsed_rounds: int = 0
    sub_rounds: int = 0
    throughput_proxy: float = 0.0
    overhead: float = 0.0
    default_terminated: bool = False
    default_from_generation: int | None = None
    corrupted: list[int] = field(default_factory=list)
    disagreements: int = 0
    validity_ok: bool = True
    f_edges: list[tuple[int, int]] = field(default_factory=list)
    isolated: list[int] = field(default_factory=list)
    graph: list[dict] = field(default_factory=list)
    generation_bits: list[tuple[int, int]] = field(default_factory=list)
    phase_new_edges: list[int] = field(default_factory=list)
    soundness_ok: bool = True
    markers: set[str] = field(default_factory=set)
    b_measured: int = 0

    def summary(self) -> dict[str, Any]:
        d = asdict(self)
        d["bits_per_link"] = {f"{s}->{r}": v for (s, r), v in sorted(self.bits_per_link.items())}
        d["markers"] = sorted(self.markers)
        d.pop("generation_bits")
        return d


class Network:
    """Bit accounting, transcripts and the corruption budget for one run."""

    def __init__(self, spec: CodeSpec, t: int, record: bool = True):
        self.spec = spec
        self.t = t
        self.record = record
        self.round = 0
        self.sub_rounds = 0
        self.corrupted: dict[int, int] = {}  # node -> round of takeover
        self.transcript = Transcript()
        self.link_bits: dict[tuple[int, int], int] = {}
        self.bits_data = 0
        self.bits_notification = 0
        self.bits_claims = 0

    def corrupt(self, node: int) -> bool:
        """Hand ``node`` to the adversary from the next message on."""
        if node in self.corrupted:
            return False
        if len(self.corrupted) >= self.t:
            raise BudgetExceeded(f"cannot corrupt node {node}: budget of {self.t} already used")
        self.corrupted[node] = self.round
        return True

    def is_corrupted(self, node: int) -> bool:
        return node in self.corrupted

    def next_round(self) -> int:
        self.round += 1
        return self.round

    def _add_link(self, s: int, r: int, bits: int) -> None:
        if bits:
            self.link_bits[(s, r)] = self.link_bits.get((s, r), 0) + bits

    def log_packet(self, msg: Message) -> None:
        bits = count_bits(msg, self.spec)
        self.bits_data += bits
        self._add_link(msg.sender, msg.receiver, bits)
        if self.record and msg.value is not None:
            payload = bits_hex(symbols_to_bits(msg.value[None, :], self.spec)[0])
            kind = f"{msg.slot.kind}{msg.slot.index}"
            self.transcript.entries.append(TranscriptEntry(self.round, msg.sender, msg.receiver, kind, payload))

    def broadcast(
        self,
        purpose: str,
        sources: list[int],
        payloads: list[np.ndarray],
        participants: list[int],
        t: int,
        byzantine: dict[int, str],
        rng: np.random.Generator,
    ) -> list[bcast.BroadcastOutcome]:
        """Run the broadcast subprotocol for ``purpose`` ("notify" or "claims") and book its bits."""
        rnd = self.next_round()
        entries = self.transcript.entries

        def hook(label: str, s: int, r: int, bits: np.ndarray) -> None:
            entries.append(TranscriptEntry(rnd, s, r, f"{purpose}:{label}", bits_hex(bits)))

        outs = bcast.broadcast_many(
            sources, payloads, participants, t, byzantine, rng, on_message=hook if self.record else None
        )
        total = 0
        for o in outs:
            total += o.bits_transmitted
            for (s, r), b in o.link_bits.items():
                self._add_link(s, r, b)
        if outs:
            self.sub_rounds += outs[0].sub_rounds
        if purpose == "notify":
            self.bits_notification += total
        else:
            self.bits_claims += total
        return outs

    @property
    def bits_subprotocol(self) -> int:
        return self.bits_notification + self.bits_claims

    @property
    def bits_total(self) -> int:
        return self.bits_data + self.bits_subprotocol


def generations_for(n: int, t: int, c: int, l: int) -> int:
    return -(-l // ((n - t) * c))


def run(config: RunConfig) -> tuple[RunReport, Transcript]:
    """Execute a whole run; see :func:`mvba.protocol.simulate`."""
    from mvba.protocol import simulate

    config.validate()
    return simulate(config)


def c_star(n: int, t: int, l: int) -> float:
    """Symbol size balancing per-generation notification cost against broadcast-phase cost."""
    return math.sqrt((n - 1) * l / ((n - t) * (t + 1) * t * (n + 2) * (n - 1)))


def bits_bound(n: int, t: int, l: int, b: int) -> float:
    """Upper bound on total bits for l agreed bits, with B = b bits per broadcast bit."""
    return n * (n - 1) / (n - t) * l + 2 * b * math.sqrt(l * (t + 1) * t * (n + 2) * (n - 1) ** 2 / (n - t))
