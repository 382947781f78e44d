#!/usr/bin/env python3
"""Smoke test for the mqss_py extension module.

Locates the compiled library (``python/mqss_py.so`` if you copied it here,
otherwise the freshest cdylib under ``target/``), imports it, and exercises
the state algebra, the probability oracles, and full protocol runs.
"""

import math
import shutil
import sys
from pathlib import Path

HERE = Path(__file__).resolve().parent
REPO = HERE.parent


def locate_module():
    if (HERE / "mqss_py.so").exists():
        return
    candidates = [
        REPO / "target" / profile / "libmqss_py.so"
        for profile in ("release", "debug")
    ]
    built = [p for p in candidates if p.exists()]
    if not built:
        sys.exit(
            "mqss_py.so not found; build it first:\n"
            "  cargo build --release -p mqss-py\n"
            "  cp target/release/libmqss_py.so python/mqss_py.so"
        )
    newest = max(built, key=lambda p: p.stat().st_mtime)
    shutil.copy2(newest, HERE / "mqss_py.so")


locate_module()
sys.path.insert(0, str(HERE))

import mqss_py  # noqa: E402


def close(a, b, tol=1e-12):
    assert abs(a - b) <= tol, f"{a} vs {b}"


def main():
    # State algebra: the four preparation states and the six unitaries.
    u_state = mqss_py.PureState.of_label("u")
    close(u_state.prob_of("z", 0), 0.5)
    close(u_state.prob_of("x", 0), 1.0)
    zero = mqss_py.PureState.of_label("zero")
    close(zero.apply("u").prob_of("z", 1), 1.0)          # U flips both bases
    close(zero.apply("hbar").prob_of("x", 1), 1.0)       # Hbar sends |0> to |d>
    close(zero.apply("h").fidelity(u_state), 1.0)

    m = mqss_py.gate_matrix("u")
    close(m[0][1].real, 1.0)
    close(m[1][0].real, -1.0)

    assert mqss_py.basis_after("zero", "h") == "x"
    assert mqss_py.expected_bit("zero", "h", "u") == 1

    # Seeded measurement is reproducible.
    bits_a = [zero.apply("h").measure("z", mqss_py.RandomStream(7).child(i))[0] for i in range(32)]
    bits_b = [zero.apply("h").measure("z", mqss_py.RandomStream(7).child(i))[0] for i in range(32)]
    assert bits_a == bits_b

    # Probability oracles.
    close(mqss_py.pe_paper(4), 1.0 / 48.0, 1e-15)
    close(mqss_py.pe_exact(4, "three", 4), 1.0 / 24.0)
    close(mqss_py.pe_exact(10, "three", 10), (1.0 / 3.0) * 2.0 ** -9)
    close(mqss_py.bunching_flag_probability(4, 1), 7.0 / 8.0)

    rows = mqss_py.sweep([2, 4], trials=20_000, seed=9)
    for row in rows:
        sigma = math.sqrt(row["pe_exact"] * (1 - row["pe_exact"]) / row["trials"])
        assert abs(row["monte_carlo"] - row["pe_exact"]) <= 4 * sigma, row

    # Honest run decodes the message exactly.
    honest = mqss_py.run_experiment(protocol="original", attack="none", signals=128, msg_len=32, seed=11)
    assert not honest["aborted"]
    assert honest["decoded"] == honest["message"]
    assert honest["alice_check"]["error_rate"] == 0.0

    # The Trojan reads the message through the original protocol unseen.
    stolen = mqss_py.run_experiment(protocol="original", attack="trojan", photons=4, signals=200, msg_len=64, seed=12)
    assert stolen["alice_check"]["error_rate"] == 0.0
    assert stolen["attacker"]["recovery_rate"] >= 0.85

    # The improved protocol flags the same attack.
    caught = mqss_py.run_experiment(protocol="improved", attack="trojan", photons=4, signals=400, msg_len=16, seed=13)
    assert caught["aborted"]
    assert caught["verdict"] == "abort_multiphoton"
    assert caught["charlie_check"]["multiphoton_rate"] > 0.5

    # And the outsider trips the error-rate check.
    eve = mqss_py.run_experiment(protocol="original", attack="eve", signals=400, msg_len=16, seed=14)
    assert eve["aborted"]
    assert eve["verdict"] == "abort_error_rate"

    print("smoke test passed")


if __name__ == "__main__":
    main()
