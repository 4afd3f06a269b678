import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spoofcl.data import (
    CommitteeVote,
    FeatureSample,
    TaskSpec,
    build_task,
    committee_entropy,
    committee_votes,
    default_task_specs,
    generate_synthetic_pool,
    generate_synthetic_task,
    informative_select,
    load_feature_file,
    random_split_select,
    train_committee,
    write_feature_file,
)
from spoofcl.errors import DataError
from spoofcl.metrics import compute_eer, score_dataset
from spoofcl.nn import init_model
from spoofcl.rng import derive_rng
from spoofcl.training import TrainConfig, fit


def make_pool(n_real, n_fake, dim=3, seed=0):
    rng = np.random.default_rng(seed)
    pool = [FeatureSample(f"r{i:05d}", 0, rng.standard_normal(dim)) for i in range(n_real)]
    pool += [FeatureSample(f"f{i:05d}", 1, rng.standard_normal(dim)) for i in range(n_fake)]
    return pool


def assert_balanced_disjoint(ds):
    for split, count in (("train", ds.spec.train_count), ("eval", ds.spec.eval_count)):
        samples = getattr(ds, split)
        labels = [s.label for s in samples]
        assert len(samples) == count
        assert labels.count(0) == labels.count(1) == count // 2
    assert not {s.id for s in ds.train} & {s.id for s in ds.eval}


class TestSynthetic:
    def test_default_sizes(self):
        spec = default_task_specs()[0]
        ds = generate_synthetic_task(spec, seed=0, dim=16)
        assert_balanced_disjoint(ds)
        assert (len(ds.train), len(ds.eval)) == (2000, 5000)

    def test_default_sequence_metadata(self):
        specs = default_task_specs()
        assert [s.task_id for s in specs] == list(range(1, 9))
        assert [s.language_tag for s in specs] == ["Chinese", "English", "Chinese", "English",
                                                  "English", "English", "English", "Chinese"]
        assert all((s.train_count, s.eval_count) == (2000, 5000) for s in specs)

    def test_deterministic(self):
        spec = default_task_specs(200, 100)[2]
        a = generate_synthetic_task(spec, seed=4, dim=8)
        b = generate_synthetic_task(spec, seed=4, dim=8)
        assert a.train == b.train and a.eval == b.eval
        c = generate_synthetic_task(spec, seed=5, dim=8)
        assert a.train != c.train

    def test_finite_features(self):
        ds = generate_synthetic_task(default_task_specs(200, 100)[1], seed=0, dim=8)
        assert np.all(np.isfinite(ds.train_arrays()[0]))

    @pytest.mark.parametrize("train,eval_", [(0, 100), (101, 100), (100, -2)])
    def test_invalid_counts(self, train, eval_):
        with pytest.raises(DataError):
            TaskSpec(1, "bad", train_count=train, eval_count=eval_)

    def test_zero_shift_transfers(self):
        """Identical distributions: EER on task B tracks EER on task A."""
        base = default_task_specs(400, 1000)[1]
        spec_a = base
        spec_b = replace(base, task_id=9, name="copy")
        cfg = TrainConfig(epochs=10)
        gaps = []
        for seed in range(5):
            a = generate_synthetic_task(spec_a, seed, dim=32)
            b = generate_synthetic_task(spec_b, seed, dim=32)
            model = fit(init_model(32, 64, seed), *a.train_arrays(), cfg, derive_rng(seed, "t"))
            eer_a = compute_eer(score_dataset(model, a.eval_arrays()))
            eer_b = compute_eer(score_dataset(model, b.eval_arrays()))
            gaps.append(eer_b - eer_a)
        assert abs(np.mean(gaps)) <= 2.0


class TestFeatureFile:
    def test_three_rows(self, tmp_path):
        p = tmp_path / "f.txt"
        p.write_text("# header comment\ndim=2\na,bonafide,0.5,1\n\n# mid\nb,spoof,-1e-3,2.5\nc,spoof,0,0\n")
        samples = load_feature_file(p)
        assert [s.id for s in samples] == ["a", "b", "c"]
        assert [s.label for s in samples] == [0, 1, 1]
        np.testing.assert_array_equal(samples[1].features, [-1e-3, 2.5])

    def test_short_row_names_line(self, tmp_path):
        p = tmp_path / "f.txt"
        p.write_text("dim=3\na,bonafide,1,2,3\nb,spoof,1,2\n")
        with pytest.raises(DataError, match=r"f\.txt:3"):
            load_feature_file(p)

    @pytest.mark.parametrize("body,match", [
        ("dim=2\na,fake,1,2\n", "unknown label"),
        ("dim=2\na,spoof,1,x\n", "malformed"),
        ("dim=2\na,spoof,1,nan\n", "non-finite"),
        ("dim=2\na,spoof,1,2\na,bonafide,1,2\n", "duplicate"),
        ("a,spoof,1,2\n", "header"),
        ("# nothing\n", "missing"),
        ("dim=0\n", "positive"),
    ])
    def test_validation(self, tmp_path, body, match):
        p = tmp_path / "f.txt"
        p.write_text(body)
        with pytest.raises(DataError, match=match):
            load_feature_file(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_feature_file(tmp_path / "nope.txt")

    def test_round_trip(self, tmp_path):
        ds = generate_synthetic_task(default_task_specs(40, 20)[0], seed=1, dim=6)
        p = tmp_path / "rt.txt"
        write_feature_file(p, ds.train + ds.eval, comment="generated")
        assert load_feature_file(p) == ds.train + ds.eval


class TestRandomSelection:
    def test_default_quota(self):
        spec = TaskSpec(1, "t")
        ds = random_split_select(make_pool(4000, 4000), spec, seed=0)
        assert_balanced_disjoint(ds)
        assert (len(ds.train), len(ds.eval)) == (2000, 5000)

    def test_exact_pool_exhausted(self):
        spec = TaskSpec(1, "t", train_count=20, eval_count=30)
        pool = make_pool(25, 25)
        ds = random_split_select(pool, spec, seed=3)
        assert {s.id for s in ds.train + ds.eval} == {s.id for s in pool}

    def test_one_short(self):
        with pytest.raises(DataError, match="bonafide"):
            random_split_select(make_pool(3499, 4000), TaskSpec(1, "t"), seed=0)

    def test_deterministic(self):
        spec = TaskSpec(1, "t", train_count=10, eval_count=10)
        pool = make_pool(30, 30)
        a = random_split_select(pool, spec, 5)
        b = random_split_select(pool, spec, 5)
        assert [s.id for s in a.train] == [s.id for s in b.train]


class TestCommitteeEntropy:
    def test_split_vote_is_ln2(self):
        assert committee_entropy(CommitteeVote("x", 2, 2)) == pytest.approx(math.log(2), abs=1e-12)

    def test_unanimous_is_zero(self):
        assert committee_entropy(CommitteeVote("x", 4, 0)) == 0.0
        assert committee_entropy(CommitteeVote("x", 0, 1)) == 0.0

    def test_three_to_one(self):
        expected = -(0.75 * math.log(0.75) + 0.25 * math.log(0.25))
        assert committee_entropy(CommitteeVote("x", 3, 1)) == pytest.approx(expected, abs=1e-15)
        assert expected == pytest.approx(0.5623, abs=1e-4)

    def test_empty_committee(self):
        with pytest.raises(DataError):
            committee_entropy(CommitteeVote("x", 0, 0))

    @given(st.integers(1, 40))
    def test_bounds_and_monotone_in_minority(self, n):
        values = [committee_entropy(CommitteeVote("x", k, n - k)) for k in range(n + 1)]
        assert all(0.0 <= v <= math.log(2) + 1e-15 for v in values)
        by_minority = [committee_entropy(CommitteeVote("x", m, n - m)) for m in range(n // 2 + 1)]
        assert all(b > a for a, b in zip(by_minority, by_minority[1:]))


def brute_force_informative(pool, votes, spec):
    """Selection sort on (minority vote count desc, id asc); for a fixed
    committee size entropy is strictly increasing in the minority count."""
    out = {"train": [], "eval": []}
    for cls in (0, 1):
        remaining = [s for s in pool if s.label == cls]
        ranked = []
        while remaining:
            best = remaining[0]
            for s in remaining[1:]:
                ks, kb = min(votes[s.id].n_real, votes[s.id].n_fake), min(votes[best.id].n_real, votes[best.id].n_fake)
                if ks > kb or (ks == kb and s.id < best.id):
                    best = s
            ranked.append(best)
            remaining.remove(best)
        out["eval"] += [s.id for s in ranked[:spec.eval_count // 2]]
        out["train"] += [s.id for s in ranked[spec.eval_count // 2:][:spec.train_count // 2]]
    return out


def random_votes(pool, n, rng):
    votes = {}
    for s in pool:
        k = int(rng.integers(0, n + 1))
        votes[s.id] = CommitteeVote(s.id, k, n - k)
    return votes


class TestInformativeSelection:
    def test_split_votes_fill_eval(self):
        spec = TaskSpec(1, "t")
        pool = make_pool(4000, 3500, dim=1)
        rng = np.random.default_rng(0)
        split_ids = {pool[i].id for i in rng.choice(4000, size=2500, replace=False)}
        votes = {s.id: CommitteeVote(s.id, 2, 2) if s.id in split_ids else CommitteeVote(s.id, 4, 0)
                 for s in pool}
        ds = informative_select(pool, votes, spec)
        assert {s.id for s in ds.eval if s.label == 0} == split_ids
        assert_balanced_disjoint(ds)

    def test_unanimous_degenerates_to_id_order(self):
        spec = TaskSpec(1, "t", train_count=4, eval_count=6)
        pool = make_pool(7, 6)[::-1]
        votes = {s.id: CommitteeVote(s.id, 5, 0) for s in pool}
        ds = informative_select(pool, votes, spec)
        assert [s.id for s in ds.eval] == ["r00000", "r00001", "r00002", "f00000", "f00001", "f00002"]
        assert [s.id for s in ds.train] == ["r00003", "r00004", "f00003", "f00004"]
        assert_balanced_disjoint(ds)

    def test_small_pool_matches_oracle(self):
        rng = np.random.default_rng(40)
        pool = make_pool(20, 20)
        votes = random_votes(pool, 5, rng)
        spec = TaskSpec(1, "t", train_count=12, eval_count=16)
        ds = informative_select(pool, votes, spec)
        oracle = brute_force_informative(pool, votes, spec)
        assert [s.id for s in ds.eval] == oracle["eval"]
        assert [s.id for s in ds.train] == oracle["train"]

    def test_missing_vote(self):
        pool = make_pool(5, 5)
        votes = {s.id: CommitteeVote(s.id, 1, 0) for s in pool[1:]}
        with pytest.raises(DataError, match="no committee vote"):
            informative_select(pool, votes, TaskSpec(1, "t", train_count=2, eval_count=2))

    def test_insufficient_pool(self):
        pool = make_pool(3, 5)
        votes = {s.id: CommitteeVote(s.id, 1, 0) for s in pool}
        with pytest.raises(DataError):
            informative_select(pool, votes, TaskSpec(1, "t", train_count=4, eval_count=4))

    def test_log_base_invariance(self):
        rng = np.random.default_rng(9)
        pool = make_pool(30, 30)
        votes = random_votes(pool, 7, rng)
        spec = TaskSpec(1, "t", train_count=20, eval_count=30)
        ref = informative_select(pool, votes, spec)
        for log in (math.log2, math.log10, lambda p: math.log(p, 3.7)):
            other = informative_select(pool, votes, spec, log=log)
            assert [s.id for s in other.eval] == [s.id for s in ref.eval]
            assert [s.id for s in other.train] == [s.id for s in ref.train]


class TestCommittee:
    def separable_pool(self, seed, n=200):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((n, 4))
        y = (x @ np.array([1.0, -2.0, 0.5, 1.0]) > 0).astype(int)
        return [FeatureSample(f"s{i}", int(y[i]), x[i]) for i in range(n)]

    def test_experts_fit_separable_pools(self):
        pools = [self.separable_pool(s) for s in range(2)]
        experts = train_committee(pools, 5, seed=0, cfg=TrainConfig(lr=0.05, batch_size=16, epochs=80))
        assert len(experts) == 5
        for i, e in enumerate(experts):
            assert e.accuracy(pools[i % 2]) > 0.99

    def test_single_expert_is_unanimous(self):
        pool = self.separable_pool(1, 60)
        experts = train_committee([pool], 1, seed=0, cfg=TrainConfig(epochs=2))
        votes = committee_votes(experts, pool)
        assert all(committee_entropy(v) == 0.0 for v in votes.values())

    def test_deterministic(self):
        pool = self.separable_pool(2, 80)
        cfg = TrainConfig(epochs=3)
        v1 = committee_votes(train_committee([pool], 3, seed=7, cfg=cfg), pool)
        v2 = committee_votes(train_committee([pool], 3, seed=7, cfg=cfg), pool)
        assert v1 == v2

    def test_rejects_bad_inputs(self):
        with pytest.raises(DataError):
            train_committee([self.separable_pool(0, 10)], 0, seed=0)
        with pytest.raises(DataError):
            train_committee([[]], 2, seed=0)


class TestBuildTask:
    def test_informative_synthetic(self):
        spec = default_task_specs(40, 60)[1]
        ds = build_task(spec, seed=0, dim=8, selection="informative", committee_size=3)
        assert_balanced_disjoint(ds)

    def test_file_random(self, tmp_path):
        pool_spec = default_task_specs(100, 100)[0]
        pool = generate_synthetic_pool(pool_spec, 5, 60, np.random.default_rng(0), "p")
        path = tmp_path / "pool.txt"
        write_feature_file(path, pool)
        spec = TaskSpec(1, "filetask", train_count=40, eval_count=60, shift=None, path=str(path))
        ds = build_task(spec, seed=1, selection="random")
        assert_balanced_disjoint(ds)

    def test_file_informative_needs_committee_pool(self, tmp_path):
        path = tmp_path / "pool.txt"
        write_feature_file(path, make_pool(10, 10))
        spec = TaskSpec(1, "filetask", train_count=4, eval_count=4, shift=None, path=str(path))
        with pytest.raises(DataError, match="committee_path"):
            build_task(spec, seed=1, selection="informative")


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_selection_always_balanced_and_disjoint(seed):
    rng = np.random.default_rng(seed)
    n_real, n_fake = int(rng.integers(10, 40)), int(rng.integers(10, 40))
    pool = make_pool(n_real, n_fake, seed=seed)
    spec = TaskSpec(1, "t", train_count=8, eval_count=12)
    assert_balanced_disjoint(random_split_select(pool, spec, seed))
    assert_balanced_disjoint(informative_select(pool, random_votes(pool, 4, rng), spec))


def test_informative_oracle_equivalence_50_pools():
    rng = np.random.default_rng(2024)
    for _ in range(50):
        n_real, n_fake = int(rng.integers(10, 51)), int(rng.integers(10, 51))
        pool = make_pool(n_real, n_fake, seed=int(rng.integers(1000)))
        n = int(rng.integers(1, 8))
        votes = random_votes(pool, n, rng)
        half = min(n_real, n_fake)
        ev = 2 * int(rng.integers(1, half // 2 + 1))
        tr = 2 * int(rng.integers(1, (half - ev // 2) + 1))
        spec = TaskSpec(1, "t", train_count=tr, eval_count=ev)
        ds = informative_select(pool, votes, spec)
        oracle = brute_force_informative(pool, votes, spec)
        assert [s.id for s in ds.eval] == oracle["eval"]
        assert [s.id for s in ds.train] == oracle["train"]
