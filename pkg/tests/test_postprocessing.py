from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fiberqkd.postprocessing import amplify, auth, estimate, keys, reconcile
from fiberqkd.postprocessing.keys import KeyMaterial, KeyRole
from fiberqkd.postprocessing.reconcile import ReconciliationError

bit_lists = st.lists(st.integers(0, 1), max_size=300)


# ---------------------------------------------------------------- keys


@given(bit_lists)
def test_hex_round_trip(bits):
    arr = np.array(bits, dtype=np.uint8)
    assert np.array_equal(keys.bits_from_hex(keys.bits_to_hex(arr)), arr)


def test_hex_format_and_digest():
    assert keys.bits_to_hex([1, 0, 1, 0, 0, 1, 0, 1, 1]) == "9:a580"
    assert keys.key_digest([0, 1]) != keys.key_digest([0, 1, 0])


def test_as_bits_validation():
    with pytest.raises(ValueError):
        keys.as_bits([0, 2])
    with pytest.raises(ValueError):
        keys.as_bits([[0, 1]])


def test_key_material_rules():
    k = KeyMaterial([0, 1, 1])
    k.disclose(5)
    k.disclose(0)
    assert k.disclosed_parity_count == 5
    with pytest.raises(ValueError):
        k.disclose(-1)
    with pytest.raises(ValueError):
        KeyMaterial([1], KeyRole.AMPLIFIED)
    back = KeyMaterial.from_record(k.to_record())
    assert np.array_equal(back.bits, k.bits) and back.disclosed_parity_count == 5 and back.role is KeyRole.SIFTED


# ---------------------------------------------------------------- estimation


def test_estimate_identical_keys(rng):
    a = rng.integers(0, 2, 500)
    assert estimate.estimate_ber(a, a).rate == 0.0


@given(st.integers(1, 400), st.data())
def test_estimate_k_flips_exact(n, data):
    k = data.draw(st.integers(0, n))
    rng = np.random.default_rng(n)
    a = rng.integers(0, 2, n).astype(np.uint8)
    b = a.copy()
    b[rng.choice(n, k, replace=False)] ^= 1
    assert estimate.estimate_ber(a, b).rate == k / n


def test_estimate_sampled_mode(rng):
    a = rng.integers(0, 2, 1000).astype(np.uint8)
    b = a.copy()
    b[::10] ^= 1
    est = estimate.estimate_ber(a, b, "sampled", 0.2, rng=3)
    assert est.compared == est.disclosed == 200
    assert est.alice_remaining.size == est.bob_remaining.size == 800
    assert est.errors + int(np.count_nonzero(est.alice_remaining != est.bob_remaining)) == 100
    assert est.rate == est.errors / 200


def test_estimate_errors():
    with pytest.raises(ValueError):
        estimate.estimate_ber([0, 1], [0])
    with pytest.raises(ValueError):
        estimate.estimate_ber([0], [0], "guess")
    with pytest.raises(ValueError):
        estimate.estimate_ber([0], [0], "sampled", 0.0)


# inversion is well conditioned away from saturated parities
@given(st.floats(0.0, 0.15), st.integers(2, 16))
def test_parity_mismatch_inversion(e, length):
    rho = (1 - (1 - 2 * e) ** length) / 2
    assert estimate.ber_from_parity_mismatch(rho, length) == pytest.approx(e, abs=1e-8)


def test_eve_knowledge_model():
    assert estimate.eve_knowledge_fraction(0.25) == 0.75
    assert estimate.eve_knowledge_fraction(0.5) == 1.0
    assert estimate.eve_knowledge_fraction(0.0) == 0.0


# ---------------------------------------------------------------- reconciliation


def _one_pass(a, b, dims, seed=0, pass_index=0):
    plan = reconcile.plan_pass(a.size, dims, seed, pass_index)
    acts = reconcile.resolve(reconcile.block_parities(a, plan), reconcile.block_parities(b, plan), plan)
    return plan, acts


def test_plan_validation():
    with pytest.raises(ValueError):
        reconcile.plan_pass(10, (1, 8), 0, 0)
    assert reconcile.plan_pass(0, (8, 8), 0, 0).n_blocks == 0


@pytest.mark.parametrize("pos", range(64))
def test_single_flip_located_in_first_pass(pos):
    a = np.random.default_rng(pos).integers(0, 2, 64).astype(np.uint8)
    b = a.copy()
    b[pos] ^= 1
    plan, acts = _one_pass(a, b, (8, 8), seed=pos)
    assert acts.flips.tolist() == [pos]
    assert acts.row_mismatch == acts.col_mismatch == 1
    fixed = reconcile.apply_pass(b, acts, correct=True)
    assert np.array_equal(fixed, reconcile.apply_pass(a, acts))


def test_two_flips_exhaustive_4x4():
    a = np.zeros(16, dtype=np.uint8)
    for i, j in itertools.combinations(range(16), 2):
        b = a.copy()
        b[[i, j]] = 1
        _, acts = _one_pass(a, b, (4, 4), seed=i * 16 + j)
        # a pair never yields a unique intersection, so nothing is flipped
        assert acts.flips.size == 0
        same_line = i // 4 == j // 4 or i % 4 == j % 4
        if not same_line:
            # every intersection is ambiguous and both errors are discarded
            assert not acts.keep[i] and not acts.keep[j]


def _second_pass_oracle() -> float:
    """P(no error survives a 4x4 pass) for two errors at a uniform random cell pair.

    Enumerates every cell pair and every dropped row and column.
    """
    good = total = 0
    for (r1, c1), (r2, c2) in itertools.permutations(itertools.product(range(4), repeat=2), 2):
        for dr, dc in itertools.product(range(4), repeat=2):
            total += 1
            if r1 != r2 and c1 != c2:
                good += 1
            elif (r1 == dr or c1 == dc) and (r2 == dr or c2 == dc):
                good += 1
    return good / total


def test_same_row_pair_resolved_by_permuted_pass():
    p = _second_pass_oracle()
    # 3/5 of pairs share no line; a shared line is cleared only when it is dropped
    assert p == pytest.approx(3 / 5 + 2 / 5 * 1 / 4)
    # two errors that survived pass 1 sit among the 9 kept bits
    trials = 4000
    hits = 0
    for seed in range(trials):
        a = np.zeros(9, dtype=np.uint8)
        b = a.copy()
        b[[0, 1]] = 1
        plan, acts = _one_pass(a, b, (4, 4), seed=seed, pass_index=1)
        hits += not np.any(reconcile.apply_pass(a, acts) != reconcile.apply_pass(b, acts, correct=True))
    se = np.sqrt(p * (1 - p) / trials)
    assert abs(hits / trials - p) < 4 * se


def test_same_row_pair_undetected_in_first_pass():
    a = np.zeros(16, dtype=np.uint8)
    b = a.copy()
    b[[4, 6]] = 1
    _, acts = _one_pass(a, b, (4, 4))
    assert acts.row_mismatch == 0 and acts.col_mismatch == 2 and acts.flips.size == 0


def test_zero_error_input(rng):
    a = rng.integers(0, 2, 64 * 5).astype(np.uint8)
    res = reconcile.reconcile_block_parity(a, a.copy(), (8, 8), rng=4)
    assert res.passes == 1 and res.corrected == 0
    assert res.parity_disclosed == 5 * (8 + 8)
    assert res.verification_disclosed == reconcile.VERIFY_SUBSETS
    assert len(res.alice) == 5 * 7 * 7
    assert res.dropped == 5 * (8 + 8 - 1)
    assert np.array_equal(res.alice.bits, res.bob.bits)
    assert res.alice.role is KeyRole.RECONCILED and res.alice.disclosed_parity_count == res.disclosed


def test_zero_error_keeps_original_bits_in_order():
    a = np.arange(64, dtype=np.int64) % 2
    rng = np.random.default_rng(9)
    seed = int(rng.integers(2**63))
    plan = reconcile.plan_pass(64, (8, 8), seed, 0)
    keep = np.ones((8, 8), dtype=bool)
    keep[plan.drop_rows[0], :] = False
    keep[:, plan.drop_cols[0]] = False
    res = reconcile.reconcile_block_parity(a, a, (8, 8), rng=9)
    assert np.array_equal(res.alice.bits, a[keep.ravel()])


def test_length_mismatch_rejected():
    with pytest.raises(ValueError):
        reconcile.reconcile_block_parity(np.zeros(4), np.zeros(5))


def test_l_shaped_triple_misleads_a_single_pass():
    # three errors in an L make the parities point at a correct bit
    a = np.zeros(64, dtype=np.uint8)
    b = a.copy()
    b[[0, 1, 8]] = 1
    _, acts = _one_pass(a, b, (8, 8))
    assert acts.flips.tolist() == [9]


def _random_pair(seed, n, ber):
    r = np.random.default_rng(seed)
    a = r.integers(0, 2, n, dtype=np.uint8)
    return a, a ^ (r.random(n) < ber).astype(np.uint8)


def test_reconciliation_converges_and_never_adds_errors():
    converged = 0
    for seed in range(1000):
        a, b = _random_pair(seed, 1024, 0.08)
        try:
            res = reconcile.reconcile_block_parity(a, b, (8, 8), 6, rng=seed)
        except ReconciliationError as exc:
            assert exc.passes == 6
            continue
        h = res.error_history
        assert all(y <= x for x, y in zip(h, h[1:]))
        # agreement on the verification subsets must mean agreement
        assert h[-1] == 0 and np.array_equal(res.alice.bits, res.bob.bits)
        converged += 1
    assert converged >= 990


def test_exhausted_passes_raise():
    a, b = _random_pair(1, 1024, 0.3)
    with pytest.raises(ReconciliationError) as info:
        reconcile.reconcile_block_parity(a, b, (8, 8), 2, rng=1)
    assert info.value.disclosed > 0


def test_channel_sees_every_disclosure():
    a, b = _random_pair(2, 512, 0.03)
    seen = []
    res = reconcile.reconcile_block_parity(a, b, (8, 8), rng=2, channel=lambda who, rep: seen.append((who, rep)))
    parity = sum(r.size for who, r in seen if isinstance(r, reconcile.ParityBlockReport) and who == "alice")
    verify = sum(r.size for who, r in seen if isinstance(r, np.ndarray))
    assert parity == res.parity_disclosed and verify == res.verification_disclosed


def test_syndrome_estimate_tracks_ber():
    a, b = _random_pair(3, 64 * 400, 0.09)
    res = reconcile.reconcile_block_parity(a, b, (8, 8), rng=3)
    assert res.ber_estimate == pytest.approx(0.09, abs=0.01)


# ---------------------------------------------------------------- privacy amplification


def test_amplify_length_and_determinism(rng):
    key = rng.integers(0, 2, 500)
    out = amplify.privacy_amplify(key, 100, 20, 7)
    assert len(out) == 380 and out.role is KeyRole.AMPLIFIED
    assert out.hash_descriptor == {"family": "toeplitz", "seed": 7, "n_in": 500, "n_out": 380}
    assert np.array_equal(out.bits, amplify.privacy_amplify(key, 100, 20, 7).bits)
    assert len(amplify.privacy_amplify(key, 0, 0, 7)) == 500


def test_amplify_rejects_empty_output():
    with pytest.raises(ValueError):
        amplify.privacy_amplify(np.zeros(10), 8, 2, 0)
    with pytest.raises(ValueError):
        amplify.privacy_amplify(np.zeros(10), -1, 0, 0)


def test_amplify_keeps_key_metadata():
    k = KeyMaterial(np.ones(64), KeyRole.RECONCILED, session_id=5)
    k.disclose(12)
    out = amplify.privacy_amplify(k, 12, 4, 1)
    assert out.session_id == 5 and out.disclosed_parity_count == 12


def test_toeplitz_structure_and_fft_path(rng):
    t = amplify.toeplitz_matrix(6, 4, 3)
    assert all(np.array_equal(t[i + 1, 1:], t[i, :-1]) for i in range(3))
    x = rng.integers(0, 2, 5000).astype(np.uint8)
    fast = amplify.toeplitz_hash(x, 1200, 11)  # above the explicit-matrix size
    direct = (amplify.toeplitz_matrix(5000, 1200, 11).astype(np.int64) @ x) & 1
    assert np.array_equal(fast, direct)


def test_different_seeds_decorrelate(rng):
    key = rng.integers(0, 2, 10_000)
    x = amplify.privacy_amplify(key, 0, 0, 1).bits.astype(float)
    y = amplify.privacy_amplify(key, 0, 0, 2).bits.astype(float)
    assert abs(np.corrcoef(x, y)[0, 1]) < 0.05


def test_single_input_flip_changes_parity_half_the_time():
    n = 8
    x = np.zeros(n, dtype=np.uint8)
    flips = total = 0
    for seed in range(500):
        row = amplify.toeplitz_matrix(n, 1, seed)[0]
        base = amplify.toeplitz_hash(x, 1, seed)[0]
        for i in range(n):
            y = x.copy()
            y[i] ^= 1
            changed = amplify.toeplitz_hash(y, 1, seed)[0] != base
            assert changed == bool(row[i])
            flips += changed
            total += 1
    assert flips / total == pytest.approx(0.5, abs=0.03)


def test_partial_knowledge_is_squeezed_out():
    n, k, ell = 12, 4, 2
    keys_all = ((np.arange(2**n)[:, None] >> np.arange(n)[::-1]) & 1).astype(np.int64)
    known = keys_all[:, :k] @ (1 << np.arange(k)[::-1])
    distances = []
    for seed in range(400):
        t = amplify.toeplitz_matrix(n, ell, seed).astype(np.int64)
        out = ((keys_all @ t.T) & 1) @ (1 << np.arange(ell)[::-1])
        worst = 0.0
        for v in range(2**k):
            hist = np.bincount(out[known == v], minlength=2**ell) / 2 ** (n - k)
            worst = max(worst, 0.5 * np.abs(hist - 2.0**-ell).sum())
        distances.append(worst)
    assert np.mean(distances) <= 2.0 ** -(n - k - ell)


# ---------------------------------------------------------------- authentication


def test_authenticate_and_verify():
    alice = auth.AuthKeyPool.from_seed(1, 1000)
    bob = auth.AuthKeyPool.from_seed(1, 1000)
    tag = auth.authenticate(b"parity report", alice)
    assert auth.verify(b"parity report", tag, bob)
    assert alice.consumed == bob.consumed == auth.BITS_PER_MESSAGE == 192


def test_bit_flips_rejected(rng):
    key = auth.AuthKeyPool.from_seed(2, 192).bits
    msg = bytes(rng.integers(0, 256, 64, dtype=np.uint8))
    tag = auth.tag_with_key(msg, key)
    arr = bytearray(msg)
    for _ in range(10_000):
        pos = int(rng.integers(len(arr) * 8))
        arr[pos // 8] ^= 1 << (pos % 8)
        assert auth.tag_with_key(bytes(arr), key) != tag
        arr[pos // 8] ^= 1 << (pos % 8)
    assert auth.forgery_bound(64) <= 2 * 64 / auth.FIELD_PRIME


def test_consumption_ledger_and_exhaustion():
    pool = auth.AuthKeyPool.from_seed(3, 192 * 3 + 10)
    for i in range(3):
        auth.authenticate(b"m%d" % i, pool)
    assert pool.consumed == 3 * 192 and pool.remaining == 10
    assert pool.ledger == [("auth", 192)] * 3
    with pytest.raises(auth.PoolExhausted):
        auth.authenticate(b"late", pool)


def test_tag_replay_under_fresh_key_fails():
    alice = auth.AuthKeyPool.from_seed(4, 192 * 2)
    bob = auth.AuthKeyPool.from_seed(4, 192 * 2)
    tag = auth.authenticate(b"hello", alice)
    assert auth.verify(b"hello", tag, bob)
    assert not auth.verify(b"hello", tag, bob)


def test_stage7_replenish():
    pool = auth.AuthKeyPool.from_seed(5, 0)
    key = np.array([1, 0, 1, 1, 0], dtype=np.uint8)
    same, pool = auth.stage7_replenish(key, pool, 0)
    assert np.array_equal(same, key) and pool.remaining == 0
    rest, pool = auth.stage7_replenish(key, pool, 3)
    assert rest.tolist() == [1, 0] and pool.bits.tolist() == [1, 0, 1]
    assert pool.consumed == 0
    with pytest.raises(ValueError):
        auth.stage7_replenish(key, pool, 6)
    km = KeyMaterial(key, KeyRole.AMPLIFIED, hash_descriptor={"family": "toeplitz"})
    short, _ = auth.stage7_replenish(km, pool, 2)
    assert isinstance(short, KeyMaterial) and len(short) == 3 and short.notes["refilled"] == 2
