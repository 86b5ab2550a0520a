"""Command-line entry point: ``fiberqkd run | reproduce | serve | connect | replay``.

Exit codes: 0 success, 2 protocol abort, 3 configuration error, 4 transport error.
"""
from __future__ import annotations

import argparse
import csv
import json
import secrets
import sys
from pathlib import Path

import numpy as np

from . import reproduce as repro
from .config import ConfigError, RunConfig, apply_overrides
from .postprocessing.estimate import estimate_ber
from .protocol import Seeds
from .session.transcript import SessionTranscript, dumps
from .session.transport import TransportError, parse_address

EXIT_OK = 0
EXIT_ABORT = 2
EXIT_CONFIG = 3
EXIT_TRANSPORT = 4

STATUS_EXIT = {"ok": EXIT_OK, "empty": EXIT_OK, "aborted": EXIT_ABORT, "transport-error": EXIT_TRANSPORT}


def seeds_from_master(master: int) -> Seeds:
    state = np.random.SeedSequence(master).generate_state(5, dtype=np.uint64)
    return Seeds(*(int(s) >> 1 for s in state))


def _config_from_args(args, require_seeds: bool = False) -> tuple[RunConfig, int | None]:
    data = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
    data = apply_overrides(data, {
        "protocol": getattr(args, "protocol", None),
        "pulses": getattr(args, "pulses", None),
        "duration_s": getattr(args, "duration", None),
        "attack.kind": getattr(args, "attack", None),
        "attack.fraction": getattr(args, "fraction", None),
        "attack.resend_multiplicity": getattr(args, "multiplicity", None),
        "postprocessing.ber_threshold": getattr(args, "ber_threshold", None),
        "postprocessing.security_margin": getattr(args, "margin", None),
        "output.transcript": getattr(args, "transcript", None),
        "output.report": getattr(args, "report", None),
        "run.timeout": getattr(args, "timeout", None),
    })
    if getattr(args, "pulses", None) is not None:
        data.pop("duration_s", None)
    master = getattr(args, "seed", None)
    if master is None and "seeds" not in data and not require_seeds:
        master = secrets.randbits(63)
    cfg = RunConfig.from_dict(data)
    if master is not None:
        cfg = cfg.replace(seeds=seeds_from_master(master))
    return cfg, master


def _flatten(report: dict, prefix: str = "") -> list[tuple[str, object]]:
    out = []
    for k, v in report.items():
        if isinstance(v, dict):
            out += _flatten(v, f"{prefix}{k}.")
        else:
            out.append((prefix + k, v))
    return out


def _emit(report: dict, path: str | None, as_json: bool, text: str, table: list[dict] | None = None) -> None:
    """Print the report; optionally write it as JSON, or as CSV when ``path`` ends in ``.csv``."""
    print(dumps(report) if as_json else text)
    if not path:
        return
    if path.endswith(".csv"):
        with open(path, "w", newline="") as fh:
            if table:
                w = csv.DictWriter(fh, fieldnames=list(table[0]))
                w.writeheader()
                w.writerows(table)
            else:
                w = csv.writer(fh)
                w.writerow(["field", "value"])
                w.writerows(_flatten(report))
    else:
        Path(path).write_text(json.dumps(json.loads(dumps(report)), indent=2) + "\n")


def run_report(cfg: RunConfig, transcript: SessionTranscript, master: int | None) -> dict:
    o = transcript.oracle
    c = transcript.counters
    acct = c.get("accounting", {})
    report = {
        "status": transcript.status,
        "reason": transcript.reason,
        "exit_code": STATUS_EXIT[transcript.status],
        "seed": master,
        "protocol": cfg.kind.value,
        "pulses": cfg.n_pulses,
        "duration_s": cfg.duration_s,
        "attack": cfg.attack.kind.value,
        "sifted_bits": acct.get("sifted", 0),
        "reconciled_bits": acct.get("sifted", 0) - acct.get("dropped", 0) if transcript.status == "ok" else 0,
        "amplified_bits": acct.get("final", 0) + acct.get("refill", 0) if transcript.status == "ok" else 0,
        "final_bits": acct.get("final", 0) if transcript.status == "ok" else 0,
        "passes": c.get("passes"),
        "ber_oracle": o.get("ber"),
        "ber_estimate": c.get("ber_estimate"),
        "ber_sampled": None,
        "dark_error_fraction": o.get("dark_error_fraction"),
        "sifted_rate_hz": o.get("sifted_rate_hz"),
        "final_rate_hz": (acct.get("final", 0) / cfg.duration_s) if transcript.status == "ok" and cfg.duration_s else 0.0,
        "eve_info_fraction": o.get("eve_info_fraction") if cfg.attack.active else None,
        "accounting": acct,
        "digests": transcript.digests,
    }
    a = transcript.keys.get("alice_sifted")
    b = transcript.keys.get("bob_sifted")
    if a is not None and len(a) >= 20:
        report["ber_sampled"] = estimate_ber(a.bits, b.bits, "sampled", 0.1, rng=cfg.seeds.channel).rate
    return report


def _format_run(report: dict) -> str:
    keys = ("status", "reason", "seed", "protocol", "pulses", "duration_s", "attack", "sifted_bits", "reconciled_bits",
            "final_bits", "passes", "ber_oracle", "ber_estimate", "ber_sampled", "dark_error_fraction",
            "sifted_rate_hz", "final_rate_hz", "eve_info_fraction")
    lines = []
    for k in keys:
        v = report.get(k)
        if isinstance(v, float):
            v = f"{v:.6g}"
        lines.append(f"{k:<22} {v}")
    return "\n".join(lines)


def cmd_run(args) -> int:
    from .session.endpoint import run_loopback

    cfg, master = _config_from_args(args)
    transcript = run_loopback(cfg)
    report = run_report(cfg, transcript, master)
    if cfg.transcript_path:
        transcript.save(cfg.transcript_path)
    _emit(report, cfg.report_path, args.json, _format_run(report))
    return report["exit_code"]


def cmd_reproduce(args) -> int:
    kwargs = {}
    if args.target == "fig6":
        kwargs = {"mode": "montecarlo" if args.montecarlo else "analytic"}
        if args.pulses is not None:
            kwargs["n_pulses"] = args.pulses
        if args.seed is not None:
            kwargs["seed"] = args.seed
    rep = repro.run_target(args.target, **kwargs)
    _emit(rep.as_dict(), args.report, args.json, rep.format(), [r.as_dict() for r in rep.rows])
    return EXIT_OK


def _endpoint_exit(res) -> int:
    from .session.endpoint import endpoint_summary

    print(dumps(endpoint_summary(res)))
    return STATUS_EXIT[res.status]


def cmd_serve(args) -> int:
    from .session.endpoint import serve_alice

    cfg, _ = _config_from_args(args, require_seeds=True)

    def announce(port):
        print(f"listening on {args.host}:{port}", flush=True)

    res = serve_alice(cfg, args.host, args.port, on_listen=announce)
    if cfg.transcript_path:
        SessionTranscript(
            config=cfg.to_dict(),
            messages=list(res.log),
            counters={"accounting": res.accounting.as_dict(), "passes": res.passes},
            digests={"alice": res.digest},
            status=res.status,
            reason=res.reason,
        ).save(cfg.transcript_path)
    return _endpoint_exit(res)


def cmd_connect(args) -> int:
    from .session.endpoint import connect_bob

    cfg, _ = _config_from_args(args, require_seeds=True)
    try:
        host, port = parse_address(args.address)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return _endpoint_exit(connect_bob(cfg, host, port))


def cmd_replay(args) -> int:
    from .session.endpoint import replay

    path = Path(args.transcript)
    if not path.exists():
        raise ConfigError(f"no transcript at {path}")
    rep = replay(SessionTranscript.load(path))
    print(dumps(rep.__dict__) if args.json else f"{'PASS' if rep.ok else 'FAIL'}: {rep.reason}")
    return EXIT_OK if rep.ok else EXIT_ABORT


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fiberqkd", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def session_flags(sp):
        sp.add_argument("--config", help="JSON run configuration")
        sp.add_argument("--protocol", choices=["b92", "bb84"])
        sp.add_argument("--pulses", type=int)
        sp.add_argument("--duration", type=float, help="seconds at the configured pulse rate")
        sp.add_argument("--seed", type=int, help="master seed; omitted means OS entropy (echoed)")
        sp.add_argument("--attack", choices=["none", "intercept-alice", "intercept-bob", "beamsplit"])
        sp.add_argument("--fraction", type=float)
        sp.add_argument("--multiplicity", type=int)
        sp.add_argument("--ber-threshold", type=float)
        sp.add_argument("--margin", type=int, help="privacy amplification security margin (bits)")
        sp.add_argument("--transcript", help="write the JSONL transcript here")
        sp.add_argument("--report", help="write the JSON report here")
        sp.add_argument("--timeout", type=float)
        sp.add_argument("--json", action="store_true", help="machine-readable stdout")

    run = sub.add_parser("run", help="full session in one process")
    session_flags(run)
    run.set_defaults(func=cmd_run)

    rp = sub.add_parser("reproduce", help="reproduce a figure or derived quantity")
    rp.add_argument("target", choices=repro.TARGETS)
    mode = rp.add_mutually_exclusive_group()
    mode.add_argument("--analytic", action="store_true", help="expectation formulas (default)")
    mode.add_argument("--montecarlo", action="store_true", help="full photon-level simulation")
    rp.add_argument("--pulses", type=int)
    rp.add_argument("--seed", type=int)
    rp.add_argument("--report")
    rp.add_argument("--json", action="store_true")
    rp.set_defaults(func=cmd_reproduce)

    sv = sub.add_parser("serve", help="run Alice, listening for Bob")
    session_flags(sv)
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--port", type=int, default=0)
    sv.set_defaults(func=cmd_serve)

    cn = sub.add_parser("connect", help="run Bob against a serving Alice")
    session_flags(cn)
    cn.add_argument("--address", required=True, help="host:port")
    cn.set_defaults(func=cmd_connect)

    rl = sub.add_parser("replay", help="re-execute a saved transcript")
    rl.add_argument("transcript")
    rl.add_argument("--json", action="store_true")
    rl.set_defaults(func=cmd_replay)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TransportError as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
