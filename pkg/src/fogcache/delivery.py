"""Bit-exact execution of the five-stage coded delivery for two ENs.

Every transmitted payload is built from the sender's actual store (cloud
library, EN cache, or fronthaul-received fragments) and every user decodes
from received payloads plus its own cache only. Transmissions are ideal
DoF-rate pipes; only bit counts feed the latency model.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .core import (
    STAGES,
    DemandVector,
    FragmentKey,
    NdtBreakdown,
    StageNdt,
    SystemConfig,
    subsets_of_size,
    validate_config,
)
from .formulas import FRONTHAUL_DOF, edge_dof
from .placement import CacheState, FragmentPartition

log = logging.getLogger(__name__)

EN1, EN2, BOTH_ENS = 0b01, 0b10, 0b11


class DecodeError(RuntimeError):
    """A user failed to reconstruct its demand; always an implementation bug."""

    def __init__(self, user: int, key: FragmentKey | None, message: str):
        super().__init__(message)
        self.user = user
        self.key = key


class DeliveryInvariantError(RuntimeError):
    pass


@dataclass(frozen=True)
class Operand:
    user: int  # user the operand is meant for
    file: int
    key: FragmentKey
    bits: int


@dataclass(frozen=True)
class Message:
    stage: str
    link: str  # "fronthaul" or "edge"
    sender: str  # "cloud", "EN1", "EN2", "EN12"
    operands: tuple[Operand, ...]
    bits: int

    def label(self, file_names=None) -> str:
        name = (lambda j: file_names[j]) if file_names else (lambda j: f"W{j + 1}")
        return "+".join(f"{name(op.file)}_{{{op.key.label()}}}" for op in self.operands)


@dataclass
class StageReport:
    stage: str
    fronthaul_bits: int = 0
    edge_bits: int = 0
    messages: int = 0


@dataclass(frozen=True)
class UserReport:
    user: int
    demand: int
    decode_ok: bool
    missing_bits: int
    wrong_bits: int


@dataclass
class DeliveryReport:
    kr: int
    file_bits: int
    stage5: str
    stages: dict[str, StageReport]
    users: list[UserReport]
    log: list[Message] = field(default_factory=list)
    worst_case_demands: bool = True

    @property
    def all_decoded(self) -> bool:
        return all(u.decode_ok for u in self.users)

    def messages(self, stage: str, link: str = "edge") -> list[Message]:
        return [m for m in self.log if m.stage == stage and m.link == link]

    def to_dict(self, cfg: SystemConfig | None = None) -> dict:
        out = {
            "stage5": self.stage5,
            "worst_case_demands": self.worst_case_demands,
            "stages": [
                {"id": s.stage, "fronthaul_bits": s.fronthaul_bits,
                 "edge_bits": s.edge_bits, "messages": s.messages}
                for s in self.stages.values()
            ],
            "users": [
                {"user": u.user + 1, "demand": u.demand + 1, "decode_ok": u.decode_ok,
                 "missing_bits": u.missing_bits}
                for u in self.users
            ],
        }
        if cfg is not None:
            out["ndt"] = latency_from_report(self, cfg).to_dict()
        return out

    def to_json(self, cfg: SystemConfig | None = None) -> str:
        return json.dumps(self.to_dict(cfg), indent=2, sort_keys=False)


def _xor_padded(chunks: list[np.ndarray], length: int) -> np.ndarray:
    out = np.zeros(length, dtype=np.uint8)
    for c in chunks:
        out[: len(c)] ^= c
    return out


class _Run:
    """Mutable state of one delivery execution."""

    def __init__(self, state, partition, demands, stage5):
        self.state = state
        self.part = partition
        self.d = demands.demands
        self.kr = state.kr
        F = state.file_bits
        self.stages = {s: StageReport(s) for s in STAGES if s in ("1", "2", "3", "4", "5" + stage5)}
        self.log: list[Message] = []
        # fragments each EN received over fronthaul: EN index -> {(file, key)}
        self.en_received: list[set] = [set(), set()]
        # per user: reconstruction buffer and known-bit mask, seeded from own cache
        self.buf = np.zeros((self.kr, F), dtype=np.uint8)
        self.known = np.zeros((self.kr, F), dtype=bool)
        for k, dk in enumerate(self.d):
            own = state.user_caches[k, dk]
            self.known[k] = own
            self.buf[k, own] = state.library[dk, own]
        self.delivered: list[dict[FragmentKey, str]] = [dict() for _ in range(self.kr)]

    # -- stores --------------------------------------------------------------

    def idx(self, file, key):
        return self.part.get(file, key)

    def cloud_read(self, file, key):
        return self.state.library[file, self.idx(file, key)]

    def en_read(self, en_mask, file, key):
        idx = self.idx(file, key)
        for i in (0, 1):
            if en_mask >> i & 1:
                cached = self.state.en_caches[i, file, idx].all()
                if not (cached or (file, key) in self.en_received[i]):
                    raise DeliveryInvariantError(
                        f"EN{i + 1} asked to send W{file + 1}_{{{key}}} it does not hold")
        return self.state.library[file, idx]

    def user_cache_read(self, user, file, key):
        idx = self.idx(file, key)
        if not self.state.user_caches[user, file, idx].all():
            raise DeliveryInvariantError(
                f"user {user + 1} lacks side information W{file + 1}_{{{key}}}")
        return self.state.library[file, idx]

    # -- bookkeeping ---------------------------------------------------------

    def mark(self, user, key, stage):
        prev = self.delivered[user].get(key)
        if prev is not None:
            raise DeliveryInvariantError(
                f"fragment {key} for user {user + 1} sent in stage {prev} and {stage}")
        self.delivered[user][key] = stage

    def send(self, stage, link, sender, operands, bits):
        if bits == 0:
            return
        rep = self.stages[stage]
        if link == "fronthaul":
            rep.fronthaul_bits += bits
        else:
            rep.edge_bits += bits
            rep.messages += 1
        self.log.append(Message(stage, link, sender, tuple(operands), bits))

    def receive_plain(self, user, key, payload):
        idx = self.idx(self.d[user], key)
        self.buf[user, idx] = payload
        self.known[user, idx] = True

    # -- stages --------------------------------------------------------------

    def unicast_stage(self, stage, en_set, fronthaul):
        """Stages 1, 4: each user's W_{dk,St,0} over a two-EN ZF broadcast."""
        for k, dk in enumerate(self.d):
            key = FragmentKey(en_set, 0)
            self.mark(k, key, stage)
            if fronthaul:
                payload = self.cloud_read(dk, key)
                op = Operand(k, dk, key, len(payload))
                # soft-transfer: the precoded signal feeds both ENs
                self.send(stage, "fronthaul", "cloud", [op], len(payload))
            else:
                payload = self.en_read(BOTH_ENS, dk, key)
                op = Operand(k, dk, key, len(payload))
            self.send(stage, "edge", "EN12", [op], len(payload))
            self.receive_plain(k, key, payload)

    def multicast_stage(self, stage, en_set):
        """Stages 2 (en_set=0, via cloud) and 3: XOR over user subsets |Sr|>=2."""
        for size in range(2, self.kr + 1):
            for sr in subsets_of_size(self.kr, size):
                members = [k for k in range(self.kr) if sr >> k & 1]
                ops, chunks = [], []
                for k in members:
                    key = FragmentKey(en_set, sr & ~(1 << k))
                    self.mark(k, key, stage)
                    dk = self.d[k]
                    chunk = self.cloud_read(dk, key) if en_set == 0 else self.en_read(en_set, dk, key)
                    ops.append(Operand(k, dk, key, len(chunk)))
                    chunks.append(chunk)
                length = max(len(c) for c in chunks)
                if length == 0:
                    continue
                payload = _xor_padded(chunks, length)
                if en_set == 0:
                    self.send(stage, "fronthaul", "cloud", ops, length)
                    sender = "EN1"
                else:
                    sender = "EN" + "".join(str(i + 1) for i in (0, 1) if en_set >> i & 1)
                self.send(stage, "edge", sender, ops, length)
                for k, op in zip(members, ops):
                    side = [self.user_cache_read(k, o.file, o.key) for o in ops if o.user != k]
                    mine = _xor_padded([payload] + side, length)[: op.bits]
                    self.receive_plain(k, op.key, mine)

    def stage5a(self):
        for en in (EN1, EN2):
            for k, dk in enumerate(self.d):
                key = FragmentKey(en, 0)
                self.mark(k, key, "5a")
                payload = self.en_read(en, dk, key)
                self.send("5a", "edge", f"EN{en}", [Operand(k, dk, key, len(payload))], len(payload))
                self.receive_plain(k, key, payload)

    def stage5b(self):
        # cross-ship: fragments cached only at EN1 go to EN2 and vice versa
        for en, other in ((EN1, 1), (EN2, 0)):
            for k, dk in enumerate(self.d):
                key = FragmentKey(en, 0)
                payload = self.cloud_read(dk, key)
                self.send("5b", "fronthaul", "cloud", [Operand(k, dk, key, len(payload))], len(payload))
                self.en_received[other].add((dk, key))
        for en in (EN1, EN2):
            for k, dk in enumerate(self.d):
                key = FragmentKey(en, 0)
                self.mark(k, key, "5b")
                payload = self.en_read(BOTH_ENS, dk, key)
                self.send("5b", "edge", "EN12", [Operand(k, dk, key, len(payload))], len(payload))
                self.receive_plain(k, key, payload)

    def check_conservation(self):
        for k in range(self.kr):
            needed = {
                key for key in self.part.fragments[self.d[k]] if not key.user_set >> k & 1
            }
            got = set(self.delivered[k])
            if got != needed:
                raise DeliveryInvariantError(
                    f"user {k + 1}: undelivered {sorted(map(str, needed - got))}, "
                    f"unexpected {sorted(map(str, got - needed))}")

    def verdicts(self):
        out = []
        for k, dk in enumerate(self.d):
            missing = int((~self.known[k]).sum())
            wrong = int((self.buf[k] != self.state.library[dk]).sum()) if missing == 0 else 0
            ok = missing == 0 and wrong == 0
            if not ok:
                bad = np.flatnonzero(~self.known[k] if missing else self.buf[k] != self.state.library[dk])
                key = next(key for key, idx in self.part.fragments[dk].items() if np.isin(bad[0], idx))
                raise DecodeError(
                    k, key,
                    f"user {k + 1} failed to decode W{dk + 1}: {missing} missing, {wrong} wrong bits "
                    f"(first in fragment {key})")
            out.append(UserReport(k, dk, ok, missing, wrong))
        return out


def run_delivery(
    state: CacheState,
    partition: FragmentPartition,
    demands: DemandVector,
    stage5: str = "a",
) -> DeliveryReport:
    validate_config(SystemConfig(kt=state.kt, kr=state.kr, n_files=state.n_files), delivery=True)
    if stage5 not in ("a", "b"):
        raise ValueError(f"stage5 must be 'a' or 'b', got {stage5!r}")
    demands.validate(SystemConfig(kt=2, kr=state.kr, n_files=state.n_files))
    if not demands.distinct:
        log.warning("repeated demands %s: not the worst case", demands.demands)

    run = _Run(state, partition, demands, stage5)
    run.unicast_stage("1", 0, fronthaul=True)
    run.multicast_stage("2", 0)
    for en_set in (EN1, EN2, BOTH_ENS):
        run.multicast_stage("3", en_set)
    run.unicast_stage("4", BOTH_ENS, fronthaul=False)
    run.stage5a() if stage5 == "a" else run.stage5b()
    run.check_conservation()
    users = run.verdicts()
    return DeliveryReport(
        kr=state.kr,
        file_bits=state.file_bits,
        stage5=stage5,
        stages=run.stages,
        users=users,
        log=run.log,
        worst_case_demands=demands.distinct,
    )


def latency_from_report(report: DeliveryReport, cfg: SystemConfig) -> NdtBreakdown:
    """Convert bit counts into per-stage NDTs.

    Stage 5a and 5b move the same fragments ``W_{dk,{i},0}`` and differ only
    in transport, so the variant that was not executed is accounted from the
    executed one's fragment bits: 5b ships each over one fronthaul link and
    both variants send all of them on the edge.
    """
    F, r, kr = report.file_bits, cfg.r, report.kr
    stage_bits = {s: (rep.fronthaul_bits, rep.edge_bits) for s, rep in report.stages.items()}
    executed = "5" + report.stage5
    other = "5b" if executed == "5a" else "5a"
    frag_bits = stage_bits[executed][1]
    stage_bits[other] = (frag_bits if other == "5b" else 0, frag_bits)

    stages = []
    for s in STAGES:
        fh_bits, edge_bits = stage_bits[s]
        fh_dof = FRONTHAUL_DOF.get(s)
        fronthaul = fh_bits / (fh_dof * r * F) if fh_bits else 0.0
        stages.append(StageNdt(s, fronthaul, edge_bits / (edge_dof(s, kr) * F)))
    return NdtBreakdown.from_stages(stages)
