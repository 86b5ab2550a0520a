"""What each attack costs Eve, and what it leaves behind for Alice and Bob.

Runs over an ideal single-photon link, then a lossy Poisson one.
"""
from __future__ import annotations

from fiberqkd import optics
from fiberqkd.adversary import AttackKind, AttackModel, tappable_fraction
from fiberqkd.encoding import ProtocolKind
from fiberqkd.optics import ChannelConfig, OpticsConfig
from fiberqkd.protocol import Seeds, sift, sifted_oracle, transmit

N = 400_000
SEEDS = Seeds(1, 2, 3, 4, 5)


def measure(cfg, attack):
    run = transmit(ProtocolKind.B92, N, cfg, attack, SEEDS)
    a, b = sift(ProtocolKind.B92, run.alice, run.bob)
    o = sifted_oracle(run, a, b, N / cfg.source.pulse_rate)
    return len(a), o["ber"], o.get("eve_info_fraction")


def main() -> None:
    ideal = optics.ideal_config("simple")
    base, _, _ = measure(ideal, None)
    print(f"ideal link, no attack: {base} sifted bits")
    for label, attack in (("intercept in Alice's states", AttackModel(AttackKind.INTERCEPT_ALICE, 1.0)),
                          ("intercept in Bob's states", AttackModel(AttackKind.INTERCEPT_BOB, 1.0, 1))):
        n, ber, eve = measure(ideal, attack)
        print(f"  {label:<28} sifted x{n / base:.3f}  BER {ber:.3f}  Eve knows {eve:.3f}")

    lossy = OpticsConfig(channel=ChannelConfig(48.0, 0.3, 8.5))
    n, ber, eve = measure(lossy, AttackModel(AttackKind.BEAMSPLIT, 1.0))
    print(f"48 km Poisson link, beamsplitting: BER {ber:.3f}, Eve holds {eve:.3f} of the sifted bits")
    print(f"  (multi-photon share of non-empty pulses: {tappable_fraction(lossy.source.mu_central):.3f})")


if __name__ == "__main__":
    main()
