"""Unauthenticated Byzantine broadcast of bit strings for n > 3t.

The source first sends its payload to every participant; the participants
then run phase-king consensus (Berman-Garay-Perry, three rounds per phase,
t + 1 phases) on every bit. All bits of all concurrently running instances
are simulated together with numpy, but the bit ledger is kept per instance
and per directed link exactly as if each instance ran alone.

Per payload bit and per instance with P participants this costs

    (P - 1) + (t + 1) * (P(P - 1) + 2 P(P - 1) + (P - 1))

bits: dissemination, one all-to-all round of 1-bit values, one all-to-all
round of ternary proposals (2 bits each), and the king's 1-bit value.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

HONEST = "honest"
RANDOM = "random"
SILENT = "silent"
BEHAVIOURS = (HONEST, RANDOM, SILENT)

_UNDECIDED = 2

MessageHook = Callable[[str, int, int, np.ndarray], None]


@dataclass
class BroadcastOutcome:
    agreed_value: np.ndarray
    bits_transmitted: int
    outputs: dict[int, np.ndarray] = field(default_factory=dict)
    link_bits: dict[tuple[int, int], int] = field(default_factory=dict)
    sub_rounds: int = 0


def bit_cost(participants: int, t: int) -> int:
    """Closed-form bits to broadcast one bit among ``participants`` nodes."""
    p = participants
    return (p - 1) + (t + 1) * (3 * p * (p - 1) + (p - 1))


def default_t(participants: int) -> int:
    return (participants - 1) // 3


def broadcast_bit(
    source: int,
    value: int,
    participants: Sequence[int],
    t: int | None = None,
    byzantine: Mapping[int, str] | None = None,
    rng: np.random.Generator | None = None,
) -> BroadcastOutcome:
    return broadcast_many([source], [np.array([value], dtype=np.int8)], participants, t, byzantine, rng)[0]


def broadcast_blob(
    source: int,
    payload: np.ndarray,
    participants: Sequence[int],
    t: int | None = None,
    byzantine: Mapping[int, str] | None = None,
    rng: np.random.Generator | None = None,
) -> BroadcastOutcome:
    return broadcast_many([source], [np.asarray(payload, dtype=np.int8)], participants, t, byzantine, rng)[0]


def measure_bit_cost(participants: Sequence[int], t: int | None = None) -> int:
    """B as measured by running one fault-free single-bit broadcast."""
    participants = list(participants)
    return broadcast_bit(participants[0], 1, participants, t).bits_transmitted


def broadcast_many(
    sources: Sequence[int],
    payloads: Sequence[np.ndarray],
    participants: Sequence[int],
    t: int | None = None,
    byzantine: Mapping[int, str] | None = None,
    rng: np.random.Generator | None = None,
    on_message: MessageHook | None = None,
) -> list[BroadcastOutcome]:
    """Run independent broadcasts, one per (source, payload), in lockstep.

    ``byzantine`` maps corrupted participants to how they behave inside the
    subprotocol: ``"random"`` sends independent random symbols to every
    receiver, ``"silent"`` sends nothing (receivers read zeros), ``"honest"``
    follows the rules. Absent entries are fault-free. A callable
    ``f(label, shape) -> array`` scripts the sender exactly: it returns the
    symbol sent to every receiver, shape ``(instances, participants, Lmax)``.
    """
    if len(sources) == 0:
        return []
    res = run_phase_king(sources, payloads, participants, t, byzantine, rng, on_message)
    parts, pref, per_link = res.participants, res.outputs, res.per_link
    byzantine = byzantine or {}
    honest_rows = [r for r in range(len(parts)) if parts[r] not in byzantine]
    ref_row = honest_rows[0] if honest_rows else 0
    out: list[BroadcastOutcome] = []
    for i in range(len(sources)):
        L = int(res.lengths[i])
        nz = np.argwhere(per_link[i])
        out.append(
            BroadcastOutcome(
                agreed_value=pref[i, ref_row, :L].copy(),
                bits_transmitted=int(per_link[i].sum()),
                outputs={parts[r]: pref[i, r, :L].copy() for r in range(len(parts))},
                link_bits={(parts[s], parts[r]): int(per_link[i, s, r]) for s, r in nz},
                sub_rounds=res.sub_rounds,
            )
        )
    return out


@dataclass
class PhaseKingRun:
    """Raw arrays of a batch: outputs (I, P, Lmax), per_link (I, P, P)."""

    participants: list[int]
    lengths: np.ndarray
    outputs: np.ndarray
    per_link: np.ndarray
    sub_rounds: int


def run_phase_king(
    sources: Sequence[int],
    payloads: Sequence[np.ndarray],
    participants: Sequence[int],
    t: int | None = None,
    byzantine: Mapping[int, str] | None = None,
    rng: np.random.Generator | None = None,
    on_message: MessageHook | None = None,
) -> PhaseKingRun:
    parts = sorted(participants)
    P = len(parts)
    t = default_t(P) if t is None else t
    if P <= 3 * t:
        raise ValueError(f"phase king needs more than 3t participants, got {P} with t={t}")
    byzantine = dict(byzantine or {})
    for node, how in byzantine.items():
        if not callable(how) and how not in BEHAVIOURS:
            raise ValueError(f"unknown subprotocol behaviour {how!r}")
    if rng is None:
        rng = np.random.default_rng(0)
    pos = {node: i for i, node in enumerate(parts)}
    if any(s not in pos for s in sources):
        raise ValueError("every source must be a participant")

    I = len(sources)
    lengths = np.array([len(p) for p in payloads], dtype=np.int64)
    Lmax = int(lengths.max(initial=0))
    mask = np.arange(Lmax)[None, :] < lengths[:, None]  # (I, Lmax)
    per_link = np.zeros((I, P, P), dtype=np.int64)

    rand_rows = [pos[v] for v, how in byzantine.items() if how == RANDOM and v in pos]
    silent_rows = [pos[v] for v, how in byzantine.items() if how == SILENT and v in pos]
    scripted = [(pos[v], how) for v, how in byzantine.items() if callable(how) and v in pos]
    live = np.ones(P, dtype=bool)
    live[silent_rows] = False

    def deliver(label: str, values: np.ndarray, senders: np.ndarray, sym_bits: int, alphabet: int) -> np.ndarray:
        """values: (I, P, Lmax) intended by each sender; senders: (I, P) bool who sends.

        Returns received (I, receiver, sender, Lmax).
        """
        recv = np.broadcast_to(values[:, None, :, :], (I, P, P, Lmax)).copy()
        for s in rand_rows:
            recv[:, :, s, :] = rng.integers(0, alphabet, size=(I, P, Lmax), dtype=np.int8)
        for s in silent_rows:
            recv[:, :, s, :] = 0
        for s, script in scripted:
            recv[:, :, s, :] = np.asarray(script(label, (I, P, Lmax)), dtype=np.int8) % alphabet
        inactive = ~senders
        recv[np.broadcast_to(inactive[:, None, :, None], recv.shape)] = 0
        # own value is known locally; it is never sent
        idx = np.arange(P)
        recv[:, idx, idx, :] = values[:, idx, :]
        recv *= mask[:, None, None, :]
        active = senders & live[None, :]
        cnt = active[:, :, None] * (lengths[:, None, None] * sym_bits)  # (I, sender, 1)
        link = np.broadcast_to(cnt, (I, P, P)).copy()
        link[:, idx, idx] = 0
        per_link[:] += link
        if on_message is not None:
            for s in range(P):
                for r in range(P):
                    if r == s or not active[:, s].any():
                        continue
                    bits = np.concatenate([recv[i, r, s, : lengths[i]] for i in range(I) if active[i, s]])
                    on_message(label, parts[s], parts[r], bits)
        return recv

    # dissemination
    src_rows = np.array([pos[s] for s in sources])
    values = np.zeros((I, P, Lmax), dtype=np.int8)
    for i, p in enumerate(payloads):
        values[i, src_rows[i], : lengths[i]] = p
    senders = np.zeros((I, P), dtype=bool)
    senders[np.arange(I), src_rows] = True
    recv = deliver("dissemination", values, senders, 1, 2)
    pref = recv[np.arange(I), :, src_rows, :]  # (I, P, Lmax)
    sub_rounds = 1

    everyone = np.ones((I, P), dtype=bool)
    for phase in range(t + 1):
        king = phase
        recv = deliver(f"phase{phase}.value", pref, everyone, 1, 2)
        ones = (recv == 1).sum(axis=2)
        zeros = P - ones
        propose = np.full_like(pref, _UNDECIDED)
        propose[zeros >= P - t] = 0
        propose[ones >= P - t] = 1
        recv = deliver(f"phase{phase}.propose", propose, everyone, 2, 3)
        d1 = (recv == 1).sum(axis=2)
        d0 = (recv == 0).sum(axis=2)
        pref = np.where(d1 > t, 1, np.where(d0 > t, 0, pref)).astype(np.int8)
        strong = np.maximum(d0, d1) >= P - t
        king_senders = np.zeros((I, P), dtype=bool)
        king_senders[:, king] = True
        recv = deliver(f"phase{phase}.king", pref, king_senders, 1, 2)
        king_val = recv[:, :, king, :]
        pref = np.where(strong, pref, king_val).astype(np.int8)
        sub_rounds += 3

    return PhaseKingRun(parts, lengths, pref, per_link, sub_rounds)
