import numpy as np
import pytest

from svdmimo import (
    ConfigError,
    FeatureBlock,
    ImportanceScheduler,
    ShapeError,
    mu_assignment,
    resort,
    select,
    sort_by_importance,
    su_assignment,
    to_complex_symbols,
    to_real_features,
)


def block(importance, d=4, rng=None):
    rng = np.random.default_rng(0) if rng is None else rng
    w = np.asarray(importance, dtype=float)
    return FeatureBlock(features=rng.standard_normal((w.size, d)), importance=w)


class TestFeatureBlock:
    def test_odd_dimension_rejected(self):
        with pytest.raises(ShapeError):
            FeatureBlock(features=np.zeros((2, 3)), importance=np.zeros(2))

    def test_importance_length_checked(self):
        with pytest.raises(ShapeError):
            FeatureBlock(features=np.zeros((2, 4)), importance=np.zeros(3))


class TestSelect:
    def test_mu_one_is_identity(self):
        fb = block(np.arange(10.0))
        out = select(fb, 1.0)
        assert np.array_equal(out.features, fb.features)

    def test_top_30_percent_decreasing(self):
        fb = block(np.linspace(1.0, 0.1, 10))
        out = select(fb, 0.3)
        assert np.array_equal(out.features[:3], fb.features[:3])
        assert np.all(out.features[3:] == 0)

    def test_top_30_percent_increasing(self):
        # rank oracle: full sort says the last three rows win
        fb = block(np.linspace(0.1, 1.0, 10))
        out = select(fb, 0.3)
        order = np.argsort(-fb.importance, kind="stable")
        survivors = set(order[:3])
        for idx in range(10):
            if idx in survivors:
                assert np.array_equal(out.features[idx], fb.features[idx])
            else:
                assert np.all(out.features[idx] == 0)
        assert survivors == {7, 8, 9}

    def test_keeps_at_least_one_for_positive_mu(self):
        fb = block(np.arange(8.0))
        out = select(fb, 0.01)
        assert np.count_nonzero(np.any(out.features != 0, axis=1)) == 1

    def test_mu_zero_masks_everything(self):
        fb = block(np.arange(4.0))
        assert np.all(select(fb, 0.0).features == 0)

    def test_idempotence(self):
        fb = block(np.random.default_rng(1).standard_normal(12))
        once = select(fb, 0.4)
        twice = select(once, 0.4)
        assert np.array_equal(once.features, twice.features)

    def test_mu_out_of_range(self):
        with pytest.raises(ConfigError):
            select(block([1.0, 2.0]), 1.5)


class TestSortResort:
    def test_sorted_input_identity_permutation(self):
        fb = block([3.0, 2.0, 1.0])
        _, smap = sort_by_importance(fb)
        assert np.array_equal(smap.permutation, [0, 1, 2])

    def test_three_element_order(self):
        fb = block([0.2, 0.9, 0.5])
        out, smap = sort_by_importance(fb)
        assert np.array_equal(smap.permutation, [1, 2, 0])
        assert np.array_equal(out.importance, [0.9, 0.5, 0.2])

    def test_ties_break_by_original_index(self):
        fb = block([1.0, 1.0, 2.0, 1.0])
        _, smap = sort_by_importance(fb)
        assert np.array_equal(smap.permutation, [2, 0, 1, 3])

    def test_round_trip_is_exact(self):
        rng = np.random.default_rng(2)
        fb = block(rng.standard_normal(32), d=6, rng=rng)
        sorted_fb, smap = sort_by_importance(fb)
        back = resort(sorted_fb, smap)
        assert np.array_equal(back.features, fb.features)
        assert np.array_equal(back.importance, fb.importance)

    def test_permutation_composes_to_identity(self):
        fb = block(np.random.default_rng(3).standard_normal(17))
        _, smap = sort_by_importance(fb)
        assert np.array_equal(smap.permutation[smap.inverse], np.arange(17))
        assert np.array_equal(smap.inverse[smap.permutation], np.arange(17))

    def test_resort_size_mismatch(self):
        fb = block(np.arange(4.0))
        _, smap = sort_by_importance(fb)
        with pytest.raises(ShapeError):
            resort(block(np.arange(6.0)), smap)


class TestSuAssignment:
    def test_first_slot_layout(self):
        smap = su_assignment(8, 4)
        # slot 0 carries sorted features 0, 2, 4, 6 on subchannels 0..3
        slot0 = [b for b in range(8) if smap.assignment[b, 0] == 0]
        assert slot0 == [0, 2, 4, 6]
        assert [smap.assignment[b, 1] for b in slot0] == [0, 1, 2, 3]

    def test_single_antenna_identity(self):
        smap = su_assignment(5, 1)
        assert np.array_equal(smap.assignment[:, 0], np.arange(5))
        assert np.all(smap.assignment[:, 1] == 0)

    def test_top_block_rides_best_subchannel(self):
        smap = su_assignment(16, 4)
        assert np.all(smap.assignment[:4, 1] == 0)

    def test_monotone_subchannel_in_rank(self):
        smap = su_assignment(24, 4)
        subchannels = smap.assignment[:, 1]
        assert np.all(np.diff(subchannels) >= 0)

    def test_exhaustive_bijection(self):
        for n in range(1, 17):
            for b in range(n, 65, n):
                smap = su_assignment(b, n)
                cells = {tuple(c) for c in smap.assignment.tolist()}
                assert len(cells) == b
                spp = b // n
                assert cells == {(i, j) for i in range(spp) for j in range(n)}

    def test_divisibility_enforced(self):
        with pytest.raises(ConfigError):
            su_assignment(10, 4)


class TestMuAssignment:
    def test_k1_reduces_to_su(self):
        mu = mu_assignment(12, 4, 1)
        su = su_assignment(12, 4)
        assert np.array_equal(mu.assignment[0], su.assignment)

    def test_reference_configuration_fairness(self):
        b, n, k = 16, 16, 4
        smap = mu_assignment(b, n, k)
        slots = k * b // n
        for user in range(k):
            target_slots = {
                int(slot)
                for slot, _ in smap.assignment[user].tolist()
                if slot % k == user
            }
            assert len(target_slots) == b // n

    def test_exhaustive_per_user_bijection_and_fairness(self):
        for k in range(1, 5):
            for n in range(k, 17):
                if n % k:
                    continue
                for b in range(n, 65, n):
                    smap = mu_assignment(b, n, k)
                    slots = k * b // n
                    streams = n // k
                    for user in range(k):
                        cells = {tuple(c) for c in smap.assignment[user].tolist()}
                        assert len(cells) == b
                        assert cells == {
                            (i, j) for i in range(slots) for j in range(streams)
                        }
                        target = [c for c in cells if c[0] % k == user]
                        assert len(target) == (b // n) * streams

    def test_target_slots_carry_block_heads(self):
        # while a user is the target, its streams carry the most important
        # entries of their per-stream blocks
        b, n, k = 32, 8, 2
        smap = mu_assignment(b, n, k)
        slots = k * b // n
        for user in range(k):
            for sorted_idx, (slot, stream) in enumerate(smap.assignment[user].tolist()):
                offset = sorted_idx - stream * slots
                if slot % k == user:
                    assert offset < b // n
                else:
                    assert offset >= b // n

    def test_divisibility_enforced(self):
        with pytest.raises(ConfigError):
            mu_assignment(16, 6, 4)
        with pytest.raises(ConfigError):
            mu_assignment(12, 8, 2)


class TestSymbolPacking:
    def test_round_trip(self):
        rng = np.random.default_rng(4)
        f = rng.standard_normal((6, 8))
        assert np.array_equal(to_real_features(to_complex_symbols(f)), f)

    def test_pairing_convention(self):
        f = np.array([[1.0, 2.0, 3.0, 4.0]])
        c = to_complex_symbols(f)
        assert c[0, 0] == 1.0 + 2.0j
        assert c[0, 1] == 3.0 + 4.0j


class TestImportanceScheduler:
    def test_transform_sorts_and_masks(self):
        rng = np.random.default_rng(5)
        f = rng.standard_normal((8, 4))
        w = np.arange(8.0)
        sched = ImportanceScheduler(select_fraction=0.5).fit(w)
        out = sched.transform(f)
        assert np.array_equal(out[0], f[7])
        assert np.all(out[4:] == 0)

    def test_inverse_transform_round_trip(self):
        rng = np.random.default_rng(6)
        f = rng.standard_normal((10, 4))
        w = rng.standard_normal(10)
        sched = ImportanceScheduler().fit(w)
        assert np.array_equal(sched.inverse_transform(sched.transform(f)), f)

    def test_get_params_protocol(self):
        sched = ImportanceScheduler(select_fraction=0.3, n_subchannels=4)
        params = sched.get_params()
        assert params["select_fraction"] == 0.3
        assert params["n_subchannels"] == 4
