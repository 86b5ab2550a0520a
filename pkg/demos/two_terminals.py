"""Alice and Bob as separate processes talking over TCP on localhost.

Equivalent shell session:

    fiberqkd serve   --config configs/short_link.json --seed 1 --port 5050
    fiberqkd connect --config configs/short_link.json --seed 1 --address 127.0.0.1:5050
"""
from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
COMMON = ["--config", str(ROOT / "configs" / "short_link.json"), "--seed", "1"]


def spawn(*args):
    return subprocess.Popen([sys.executable, "-m", "fiberqkd", *args, *COMMON],
                            stdout=subprocess.PIPE, text=True)


def main() -> None:
    alice = spawn("serve", "--port", "0")
    banner = alice.stdout.readline().strip()
    print(f"alice: {banner}")
    bob = spawn("connect", "--address", banner.split()[-1])
    b_out, _ = bob.communicate(timeout=300)
    a_out, _ = alice.communicate(timeout=300)
    a, b = json.loads(a_out), json.loads(b_out)
    print(f"alice exit {alice.returncode}, bob exit {bob.returncode}")
    print(f"digests agree: {a['digest'] == b['digest']}")


if __name__ == "__main__":
    main()
