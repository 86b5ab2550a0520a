"""Alice and Bob endpoint state machines and the drivers that connect them.

Alice leads every exchange.  The message sequence of a successful session::

    A->B HELLO, B->A HELLO, A->B PARAMS, B->A PARAMS
    (oracle stream: Bob's settings to Alice's channel, detections back)
    B->A INDEX_LIST [+ BASIS_LIST], A->B INDEX_LIST
    per pass: A->B PERMUTATION_SEED, A->B PARITY_REPORT, B->A PARITY_REPORT,
              A->B VERIFY_PARITY, B->A VERIFY_PARITY
    A->B HASH_SEED, A->B REPLENISH, B->A REPLENISH

Either side may send ABORT instead of its next message.
"""
from __future__ import annotations

import math
import socket
import threading
from dataclasses import dataclass, field

import numpy as np

from ..encoding import ProtocolKind
from ..postprocessing.amplify import privacy_amplify
from ..postprocessing.auth import BITS_PER_MESSAGE, AuthKeyPool, PoolExhausted, stage7_replenish
from ..postprocessing.estimate import eve_knowledge_fraction
from ..postprocessing.keys import KeyMaterial, KeyRole, key_digest
from ..postprocessing.reconcile import (
    ParityBlockReport,
    apply_pass,
    block_parities,
    plan_pass,
    resolve,
    syndrome_ber,
    verification_parities,
)
from ..protocol import (
    BobRecords,
    BobReport,
    Detections,
    PartySettings,
    QuantumRun,
    SiftedKey,
    alice_kept_indices,
    alice_sift,
    bob_records,
    bob_report,
    bob_sift,
    prepare_party,
    public_counters,
    run_channel,
    sifted_oracle,
)
from .channel import ProtocolAbort, PublicChannel, pool_seed
from .transcript import SessionTranscript
from .transport import (
    SocketTransport,
    TransportClosed,
    TransportError,
    connect,
    loopback_pair,
    pack_blob,
    unpack_blob,
)
from .wire import SUPPORTED_VERSIONS, LoggedFrame, MsgType, payload_contains_key, frame_decode


# ------------------------------------------------------------------ oracle stream

class StreamOracleLink:
    """Simulation-oracle stream standing in for Bob's detector cable.

    Waits on this stream are unbounded: the far end is busy simulating the
    quantum channel, which for long runs outlasts the public-channel timeout.
    A dead peer still ends the wait through the closed pipe or socket.
    """

    def __init__(self, transport):
        self.transport = transport
        transport.set_timeout(None)

    def send_settings(self, s: PartySettings) -> None:
        bases = s.bases_packed if s.bases_packed is not None else np.zeros(0, np.uint8)
        self.transport.send(
            pack_blob({"n": np.array([s.n_pulses]), "bits": s.bits_packed, "bases": bases,
                       "has_bases": np.array([s.bases_packed is not None])})
        )

    def receive_settings(self, kind: ProtocolKind) -> PartySettings:
        d = unpack_blob(self.transport.recv())
        return PartySettings(kind, int(d["n"][0]), d["bits"], d["bases"] if bool(d["has_bases"][0]) else None)

    def send_detections(self, det: Detections) -> None:
        self.transport.send(pack_blob({"n": np.array([det.n_pulses]), "clocks": det.clocks, "masks": det.masks}))

    def receive_detections(self) -> Detections:
        d = unpack_blob(self.transport.recv())
        return Detections(int(d["n"][0]), d["clocks"], d["masks"])

    def close(self) -> None:
        self.transport.close()


class LocalAliceOracle:
    """Replay stand-in: regenerates Bob's settings from his seed."""

    def __init__(self, cfg):
        self.cfg = cfg

    def receive_settings(self, kind):
        return prepare_party(kind, self.cfg.n_pulses, self.cfg.seeds.bob, "bob")

    def send_detections(self, det):
        pass

    def close(self):
        pass


class LocalBobOracle:
    """Replay stand-in: re-runs Alice's channel simulation locally."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.settings = None

    def send_settings(self, s):
        self.settings = s

    def receive_detections(self):
        cfg = self.cfg
        alice = prepare_party(cfg.kind, cfg.n_pulses, cfg.seeds.alice, "alice")
        det, _ = run_channel(cfg.kind, alice, self.settings, cfg.optics, cfg.seeds.channel, cfg.attack,
                             cfg.seeds.eve, cfg.batch_size)
        return det

    def close(self):
        pass


# ------------------------------------------------------------------ results

@dataclass
class Accounting:
    sifted: int = 0
    dropped: int = 0
    disclosed: int = 0
    eve_estimate: int = 0
    margin: int = 0
    refill: int = 0
    final: int = 0
    pad_bits: int = 0  # pool bits spent encrypting parities (not part of the identity)

    def identity_holds(self) -> bool:
        return self.final + self.refill + self.margin + self.eve_estimate + self.disclosed + self.dropped == self.sifted

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class EndpointResult:
    role: str
    status: str = "ok"  # ok | empty | aborted | transport-error
    reason: str | None = None
    log: list[LoggedFrame] = field(default_factory=list)
    settings: PartySettings | None = None
    sifted: SiftedKey | None = None
    final: KeyMaterial | None = None
    accounting: Accounting = field(default_factory=Accounting)
    ber_estimate: float | None = None
    passes: int = 0
    pools: dict = field(default_factory=dict)
    records: BobRecords | None = None  # Bob only
    detections: Detections | None = None  # Alice only (oracle)
    channel_oracle: object = None  # Alice only (oracle)
    abort_origin: bool = False

    @property
    def digest(self) -> str | None:
        return self.final.digest() if self.final is not None and self.status == "ok" else None


def _pools(cfg):
    n = cfg.post.initial_pool_bits
    return (AuthKeyPool.from_seed(pool_seed(cfg.seeds.auth, "a2b"), n),
            AuthKeyPool.from_seed(pool_seed(cfg.seeds.auth, "b2a"), n))


def _guard(res: EndpointResult, ch: PublicChannel, oracle, body) -> EndpointResult:
    try:
        body()
    except (ProtocolAbort, PoolExhausted) as exc:
        if isinstance(exc, PoolExhausted):
            exc = ProtocolAbort("authentication pool exhausted")
        res.status, res.reason, res.final = "aborted", exc.reason, None
        res.abort_origin = not exc.remote
        if not exc.remote:
            try:
                ch.send(MsgType.ABORT, reason=exc.reason)
            except (TransportError, PoolExhausted):
                pass
        oracle.close()
    except TransportError as exc:
        res.status, res.reason, res.final = "transport-error", str(exc), None
        oracle.close()
    res.pools = {"a2b": ch.send_pool.remaining if ch.role == "alice" else ch.recv_pool.remaining,
                 "b2a": ch.recv_pool.remaining if ch.role == "alice" else ch.send_pool.remaining}
    return res


def _leak(cfg, n_rec: int, ber_est: float, parity_bits: int, verify_bits: int) -> tuple[int, int, int]:
    disclosed = (0 if cfg.post.encrypt_parities else parity_bits) + verify_bits
    eve = math.ceil(eve_knowledge_fraction(ber_est) * n_rec)
    return disclosed, eve, n_rec - disclosed - eve - cfg.post.security_margin


def _refill_plan(cfg, a2b: AuthKeyPool, b2a: AuthKeyPool) -> tuple[int, int]:
    if cfg.post.refill_bits is None:
        # what the session used, including the two REPLENISH messages themselves
        return a2b.consumed + BITS_PER_MESSAGE, b2a.consumed + BITS_PER_MESSAGE
    half = cfg.post.refill_bits // 2
    return half, cfg.post.refill_bits - half


def _finish(res, cfg, key_bits, hseed, n_out, a2b, b2a, r_a2b, r_b2a, acct):
    rec = KeyMaterial(key_bits, KeyRole.RECONCILED, session_id=cfg.session_id)
    rec.disclose(acct.disclosed)
    amplified = privacy_amplify(rec, key_bits.size - n_out - cfg.post.security_margin, cfg.post.security_margin, hseed)
    final, _ = stage7_replenish(amplified, a2b, r_a2b)
    final, _ = stage7_replenish(final, b2a, r_b2a)
    acct.refill = r_a2b + r_b2a
    acct.final = len(final)
    res.final = final


# ------------------------------------------------------------------ Alice

def run_alice(cfg, transport, oracle, versions=SUPPORTED_VERSIONS) -> EndpointResult:
    a2b, b2a = _pools(cfg)
    ch = PublicChannel(transport, "alice", cfg.session_id, send_pool=a2b, recv_pool=b2a)
    res = EndpointResult("alice", log=ch.log)
    rng = np.random.default_rng([int(cfg.seeds.alice), 0x5EED])
    post = cfg.post
    enc = ("row_parities", "col_parities") if post.encrypt_parities else ()

    def body():
        ch.send(MsgType.HELLO, role="alice", versions=list(versions))
        hello = ch.receive(MsgType.HELLO)
        if not set(versions) & set(hello["versions"]):
            raise ProtocolAbort("version mismatch")
        ch.send(MsgType.PARAMS, config_digest=cfg.public_digest(), kind=cfg.kind.value, n_pulses=cfg.n_pulses, ack=0)
        ch.receive(MsgType.PARAMS)

        alice = prepare_party(cfg.kind, cfg.n_pulses, cfg.seeds.alice, "alice")
        res.settings = alice
        bob_settings = oracle.receive_settings(cfg.kind)
        if bob_settings.n_pulses != cfg.n_pulses:
            raise ProtocolAbort("oracle stream carries the wrong number of pulses")
        det, chan = run_channel(cfg.kind, alice, bob_settings, cfg.optics, cfg.seeds.channel, cfg.attack,
                                cfg.seeds.eve, cfg.batch_size)
        res.detections, res.channel_oracle = det, chan
        oracle.send_detections(det)

        got = ch.receive(MsgType.INDEX_LIST)
        bases = ch.receive(MsgType.BASIS_LIST)["bases"] if cfg.kind == ProtocolKind.BB84 else None
        try:
            kept = alice_kept_indices(alice, BobReport(got["indices"], bases))
        except (ValueError, IndexError) as exc:
            raise ProtocolAbort(f"bad sifting report: {exc}") from None
        ch.send(MsgType.INDEX_LIST, purpose="kept", indices=kept)
        res.sifted = alice_sift(alice, kept)
        acct = res.accounting
        acct.sifted = len(res.sifted)
        if acct.sifted == 0:
            res.status = "empty"
            return

        key = res.sifted.bits
        parity_bits = verify_bits = 0
        for p in range(post.max_passes):
            seed = int(rng.integers(2**63))
            ch.send(MsgType.PERMUTATION_SEED, pass_index=p, seed=seed)
            plan = plan_pass(key.size, post.block_dims, seed, p)
            ra = block_parities(key, plan)
            ch.send(MsgType.PARITY_REPORT, encrypt=enc, pass_index=p, encrypted=int(bool(enc)),
                    row_parities=ra.row_parities, col_parities=ra.col_parities)
            f = ch.receive(MsgType.PARITY_REPORT, decrypt=enc)
            rb = ParityBlockReport(plan.rows, plan.cols, f["row_parities"], f["col_parities"], p)
            if rb.row_parities.size != ra.row_parities.size or rb.col_parities.size != ra.col_parities.size:
                raise ProtocolAbort("parity report size mismatch")
            parity_bits += ra.size
            acct.pad_bits += (ra.size + rb.size) if enc else 0
            if p == 0:
                res.ber_estimate = syndrome_ber(ra, rb)
                if res.ber_estimate > post.ber_threshold:
                    raise ProtocolAbort("error rate exceeds threshold")
            actions = resolve(ra, rb, plan)
            acct.dropped += int(np.count_nonzero(~actions.keep))
            key = apply_pass(key, actions)
            vseed = int(rng.integers(2**63))
            va = verification_parities(key, vseed, post.verify_count)
            ch.send(MsgType.VERIFY_PARITY, pass_index=p, seed=vseed, parities=va, agree=0)
            verify_bits += post.verify_count
            if ch.receive(MsgType.VERIFY_PARITY)["agree"]:
                res.passes = p + 1
                break
        else:
            raise ProtocolAbort("reconciliation failed")

        acct.disclosed, acct.eve_estimate, n_out = _leak(cfg, key.size, res.ber_estimate, parity_bits, verify_bits)
        acct.margin = post.security_margin
        if n_out <= 0:
            raise ProtocolAbort("no secret key remains")
        hseed = int(rng.integers(2**63))
        ch.send(MsgType.HASH_SEED, seed=hseed, n_in=key.size, n_out=n_out)
        r_a2b, r_b2a = _refill_plan(cfg, a2b, b2a)
        if r_a2b + r_b2a > n_out:
            raise ProtocolAbort("insufficient key for replenishment")
        ch.send(MsgType.REPLENISH, to_a2b=r_a2b, to_b2a=r_b2a)
        echo = ch.receive(MsgType.REPLENISH)
        if (echo["to_a2b"], echo["to_b2a"]) != (r_a2b, r_b2a):
            raise ProtocolAbort("replenishment disagreement")
        _finish(res, cfg, key, hseed, n_out, a2b, b2a, r_a2b, r_b2a, acct)

    return _guard(res, ch, oracle, body)


# ------------------------------------------------------------------ Bob

def run_bob(cfg, transport, oracle, versions=SUPPORTED_VERSIONS) -> EndpointResult:
    a2b, b2a = _pools(cfg)
    ch = PublicChannel(transport, "bob", cfg.session_id, send_pool=b2a, recv_pool=a2b)
    res = EndpointResult("bob", log=ch.log)
    post = cfg.post
    enc = ("row_parities", "col_parities") if post.encrypt_parities else ()

    def body():
        hello = ch.receive(MsgType.HELLO)
        if not set(versions) & set(hello["versions"]):
            raise ProtocolAbort("version mismatch")
        ch.send(MsgType.HELLO, role="bob", versions=list(versions))
        params = ch.receive(MsgType.PARAMS)
        if (params["config_digest"] != cfg.public_digest() or params["kind"] != cfg.kind.value
                or params["n_pulses"] != cfg.n_pulses):
            raise ProtocolAbort("negotiation mismatch")
        ch.send(MsgType.PARAMS, config_digest=cfg.public_digest(), kind=cfg.kind.value, n_pulses=cfg.n_pulses, ack=1)

        settings = prepare_party(cfg.kind, cfg.n_pulses, cfg.seeds.bob, "bob")
        res.settings = settings
        oracle.send_settings(settings)
        records = bob_records(settings, oracle.receive_detections())
        res.records = records
        report = bob_report(records)
        ch.send(MsgType.INDEX_LIST, purpose="detected", indices=report.indices)
        if cfg.kind == ProtocolKind.BB84:
            ch.send(MsgType.BASIS_LIST, bases=report.bases)
        kept = ch.receive(MsgType.INDEX_LIST)["indices"]
        try:
            if not np.all(np.isin(kept, report.indices)):
                raise ValueError("kept index that was never reported")
            res.sifted = bob_sift(records, kept)
        except (ValueError, IndexError) as exc:
            raise ProtocolAbort(f"bad sifting reply: {exc}") from None
        acct = res.accounting
        acct.sifted = len(res.sifted)
        if acct.sifted == 0:
            res.status = "empty"
            return

        key = res.sifted.bits
        parity_bits = verify_bits = 0
        agreed = False
        for p in range(post.max_passes):
            f = ch.receive(MsgType.PERMUTATION_SEED)
            if f["pass_index"] != p:
                raise ProtocolAbort("pass index out of step")
            plan = plan_pass(key.size, post.block_dims, f["seed"], p)
            fa = ch.receive(MsgType.PARITY_REPORT, decrypt=enc)
            ra = ParityBlockReport(plan.rows, plan.cols, fa["row_parities"], fa["col_parities"], p)
            rb = block_parities(key, plan)
            if rb.row_parities.size != ra.row_parities.size or rb.col_parities.size != ra.col_parities.size:
                raise ProtocolAbort("parity report size mismatch")
            ch.send(MsgType.PARITY_REPORT, encrypt=enc, pass_index=p, encrypted=int(bool(enc)),
                    row_parities=rb.row_parities, col_parities=rb.col_parities)
            parity_bits += ra.size
            acct.pad_bits += (ra.size + rb.size) if enc else 0
            if p == 0:
                res.ber_estimate = syndrome_ber(ra, rb)
            actions = resolve(ra, rb, plan)
            acct.dropped += int(np.count_nonzero(~actions.keep))
            key = apply_pass(key, actions, correct=True)
            v = ch.receive(MsgType.VERIFY_PARITY)
            vb = verification_parities(key, v["seed"], post.verify_count)
            agreed = bool(np.array_equal(vb, v["parities"]))
            ch.send(MsgType.VERIFY_PARITY, pass_index=p, seed=v["seed"], parities=np.zeros(0, np.uint8),
                    agree=int(agreed))
            verify_bits += post.verify_count
            if agreed:
                res.passes = p + 1
                break
        if not agreed:
            ch.receive()  # Alice's ABORT ends the session
            raise ProtocolAbort("reconciliation failed")

        h = ch.receive(MsgType.HASH_SEED)
        acct.disclosed, acct.eve_estimate, n_out = _leak(cfg, key.size, res.ber_estimate, parity_bits, verify_bits)
        acct.margin = post.security_margin
        if h["n_in"] != key.size or h["n_out"] != n_out:
            raise ProtocolAbort("hash parameters disagree")
        rep = ch.receive(MsgType.REPLENISH)
        r_a2b, r_b2a = rep["to_a2b"], rep["to_b2a"]
        if r_a2b + r_b2a > n_out:
            raise ProtocolAbort("insufficient key for replenishment")
        ch.send(MsgType.REPLENISH, to_a2b=r_a2b, to_b2a=r_b2a)
        _finish(res, cfg, key, h["seed"], n_out, a2b, b2a, r_a2b, r_b2a, acct)

    return _guard(res, ch, oracle, body)


# ------------------------------------------------------------------ assembly

def _overall_status(alice: EndpointResult, bob: EndpointResult) -> tuple[str, str | None]:
    if alice.status == bob.status == "ok":
        if alice.digest != bob.digest:
            return "aborted", "final keys differ"
        return "ok", None
    if alice.status == bob.status == "empty":
        return "empty", None
    for r in (alice, bob):
        if r.status == "aborted" and r.abort_origin:
            return "aborted", r.reason
    for r in (alice, bob):
        if r.status != "ok":
            return r.status, r.reason
    return "aborted", None


def hygiene_check(frames: list[LoggedFrame], keys: list) -> bool:
    """No frame payload carries a run of sifted key bytes."""
    for lf in frames:
        payload = frame_decode(lf.frame).payload
        for k in keys:
            if k is not None and len(k) >= 64 and payload_contains_key(payload, k.bits):
                return False
    return True


def assemble(cfg, alice: EndpointResult, bob: EndpointResult) -> SessionTranscript:
    status, reason = _overall_status(alice, bob)
    keys = {}
    for name, r in (("alice", alice), ("bob", bob)):
        if r.sifted is not None:
            keys[f"{name}_sifted"] = r.sifted
        if r.final is not None and r.status == "ok":
            keys[f"{name}_final"] = r.final
    oracle: dict = {}
    counters: dict = {"pulses": cfg.n_pulses}
    run = None
    if alice.detections is not None and bob.records is not None:
        run = QuantumRun(cfg.kind, alice.settings, bob.records, alice.detections, alice.channel_oracle)
        counters.update(public_counters(run))
        if alice.sifted is not None and bob.sifted is not None:
            oracle.update(sifted_oracle(run, alice.sifted, bob.sifted, cfg.optics.source.pulse_rate))
            oracle["hygiene_ok"] = hygiene_check(alice.log, [alice.sifted, bob.sifted])
        oracle["clicks"] = alice.channel_oracle.counters["clicks"].tolist()
        oracle["dark_clicks"] = alice.channel_oracle.counters["dark_clicks"].tolist()
    counters.update({
        "sifted_bits": alice.accounting.sifted,
        "passes": alice.passes,
        "ber_estimate": alice.ber_estimate,
        "accounting": alice.accounting.as_dict(),
        "pool_remaining": alice.pools,
    })
    if status == "ok":
        oracle["final_keys_equal"] = bool(np.array_equal(alice.final.bits, bob.final.bits))
    return SessionTranscript(
        config=cfg.to_dict(),
        messages=list(alice.log),
        counters=counters,
        digests={"alice": alice.digest, "bob": bob.digest},
        status=status,
        reason=reason,
        keys=keys,
        oracle=oracle,
        run=run,
    )


def run_loopback(cfg, bob_cfg=None, alice_versions=SUPPORTED_VERSIONS, bob_versions=SUPPORTED_VERSIONS):
    """Both endpoints in one process, each on its own thread."""
    ta, tb = loopback_pair(cfg.timeout)
    oa, ob = loopback_pair(cfg.timeout)
    box: dict = {}

    def bob_main():
        try:
            box["bob"] = run_bob(bob_cfg or cfg, tb, StreamOracleLink(ob), bob_versions)
        except BaseException as exc:  # surfaced in the caller's thread
            box["error"] = exc
            tb.close()
            ob.close()

    thread = threading.Thread(target=bob_main, name="bob", daemon=True)
    thread.start()
    alice = run_alice(cfg, ta, StreamOracleLink(oa), alice_versions)
    thread.join()
    if "error" in box:
        raise box["error"]
    return assemble(cfg, alice, box["bob"])


# ------------------------------------------------------------------ replay

class ReplayDivergence(TransportError):
    pass


class ReplayTransport:
    def __init__(self, incoming: list[bytes], outgoing: list[bytes]):
        self.incoming = list(incoming)
        self.outgoing = list(outgoing)
        self.n_in = self.n_out = 0

    def send(self, frame: bytes) -> None:
        if self.n_out >= len(self.outgoing) or self.outgoing[self.n_out] != frame:
            raise ReplayDivergence(f"outgoing frame {self.n_out} differs from the log")
        self.n_out += 1

    def recv(self) -> bytes:
        if self.n_in >= len(self.incoming):
            raise TransportClosed("transcript exhausted")
        self.n_in += 1
        return self.incoming[self.n_in - 1]

    def close(self) -> None:
        pass

    @property
    def consumed(self) -> bool:
        return self.n_in == len(self.incoming) and self.n_out == len(self.outgoing)


@dataclass
class ReplayReport:
    ok: bool
    reason: str
    alice_digest: str | None = None
    bob_digest: str | None = None
    alice_status: str | None = None
    bob_status: str | None = None


def replay(transcript: SessionTranscript) -> ReplayReport:
    """Re-run both state machines against the logged frames and compare outcomes."""
    from ..config import RunConfig

    if not transcript.messages:
        return ReplayReport(False, "no session")
    cfg = RunConfig.from_dict(transcript.config)
    a2b = transcript.frames("a2b")
    b2a = transcript.frames("b2a")
    ta = ReplayTransport(incoming=b2a, outgoing=a2b)
    tb = ReplayTransport(incoming=a2b, outgoing=b2a)
    alice = run_alice(cfg, ta, LocalAliceOracle(cfg))
    bob = run_bob(cfg, tb, LocalBobOracle(cfg))
    problems = []
    for r in (alice, bob):
        if r.status == "transport-error":
            problems.append(f"{r.role}: {r.reason}")
        elif r.status != transcript.status:
            problems.append(f"{r.role} ended '{r.status}' ({r.reason}), log says '{transcript.status}'")
    for r in (alice, bob):
        if r.role in transcript.digests and r.digest != transcript.digests[r.role]:
            problems.append(f"{r.role}'s final key digest differs from the log")
    if alice.digest != bob.digest:
        problems.append("replayed endpoints disagree on the final key")
    if not problems and not (ta.consumed and tb.consumed):
        problems.append("log holds frames the endpoints never exchanged")
    return ReplayReport(
        ok=not problems,
        reason="; ".join(problems) if problems else "digests reproduced",
        alice_digest=alice.digest,
        bob_digest=bob.digest,
        alice_status=alice.status,
        bob_status=bob.status,
    )


# ------------------------------------------------------------------ two-process mode

def serve_alice(cfg, host: str = "127.0.0.1", port: int = 0, on_listen=None) -> EndpointResult:
    """Listen, accept Bob's public connection then his oracle-stream connection."""
    with socket.create_server((host, port)) as srv:
        srv.settimeout(cfg.timeout)
        if on_listen is not None:
            on_listen(srv.getsockname()[1])
        try:
            pub, _ = srv.accept()
            orc, _ = srv.accept()
        except socket.timeout:
            raise TransportError("no peer connected before the timeout") from None
    public = SocketTransport(pub, cfg.timeout)
    oracle = StreamOracleLink(SocketTransport(orc, cfg.timeout))
    try:
        return run_alice(cfg, public, oracle)
    finally:
        public.close()
        oracle.close()


def connect_bob(cfg, host: str, port: int) -> EndpointResult:
    public = connect(host, port, cfg.timeout)
    oracle = StreamOracleLink(connect(host, port, cfg.timeout))
    try:
        return run_bob(cfg, public, oracle)
    finally:
        public.close()
        oracle.close()


def endpoint_summary(res: EndpointResult) -> dict:
    return {
        "role": res.role,
        "status": res.status,
        "reason": res.reason,
        "digest": res.digest,
        "sifted_bits": res.accounting.sifted,
        "final_bits": res.accounting.final if res.status == "ok" else 0,
        "passes": res.passes,
        "ber_estimate": res.ber_estimate,
        "accounting": res.accounting.as_dict(),
        "frames": len(res.log),
    }


__all__ = [
    "Accounting",
    "EndpointResult",
    "ReplayReport",
    "assemble",
    "connect_bob",
    "key_digest",
    "replay",
    "run_alice",
    "run_bob",
    "run_loopback",
    "serve_alice",
]
