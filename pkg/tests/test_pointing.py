import numpy as np
import pytest

from factqa.errors import CoverageMismatchError, ExhaustedRetriesError
from factqa.explain import RelevanceVector, explain_random
from factqa.model.network import QAModel
from factqa.model.params import ModelConfig
from factqa.model.training import train
from factqa.pointing import (
    HybridInstance,
    binomial_significance,
    build_hybrid,
    build_hybrid_instances,
    expected_random_accuracy,
    hit,
    make_fake_facts,
    pointing_game,
)
from factqa.store import FAKE_PREFIX, FactSet, retrieve_facts
from factqa.synth import SynthConfig, generate_synthetic_corpus


def _instance(n_real, n_fake):
    real = FactSet([f"kb:{i:02d}" for i in range(n_real)])
    fake = FactSet([f"fake:kb:{i:02d}" for i in range(n_fake)])
    return HybridInstance("q", real, fake, real.union(fake), "e", db=None)


def test_hit_real_and_fake():
    inst = _instance(2, 2)
    ids = inst.combined.ids
    real_top = RelevanceVector(ids, (0.0, 0.0, 1.0, 0.5), "t")  # kb:00 wins
    fake_top = RelevanceVector(ids, (1.0, 0.5, 0.1, 0.0), "t")  # fake:kb:00 wins
    assert hit(real_top, inst) == 1
    assert hit(fake_top, inst) == 0


def test_hit_tie_breaks_by_ascending_fact_id():
    inst = _instance(1, 1)
    ids = inst.combined.ids  # ("fake:kb:00", "kb:00")
    rv = RelevanceVector(ids, (0.7, 0.7), "t")
    assert hit(rv, inst) == 0  # "fake:..." sorts first and is fake


def test_hit_coverage_mismatch():
    inst = _instance(2, 1)
    rv = RelevanceVector(("kb:00",), (1.0,), "t")
    with pytest.raises(CoverageMismatchError):
        hit(rv, inst)


def test_expected_random_accuracy():
    instances = [_instance(3, 1), _instance(1, 3)]
    mean, sigma = expected_random_accuracy(instances)
    assert mean == pytest.approx(0.5)
    assert sigma == pytest.approx(np.sqrt(2 * 0.75 * 0.25) / 2)


def test_random_explainer_converges_to_real_fraction():
    rng = np.random.default_rng(0)
    instances = [_instance(int(rng.integers(1, 8)), int(rng.integers(1, 8)))
                 for _ in range(2500)]
    hits = []
    for i, inst in enumerate(instances):
        rv = explain_random(None, "e", inst.combined, None, seed=i)
        hits.append(hit(rv, inst))
    mean, sigma = expected_random_accuracy(instances)
    observed = np.mean(hits)
    assert abs(observed - mean) < 3 * sigma


def test_binomial_significance_all_favoring_a():
    hits_a = [1] * 10 + [1, 0] * 5
    hits_b = [0] * 10 + [1, 0] * 5  # 10 discordant, all favoring A
    res = binomial_significance(hits_a, hits_b, alpha=0.05)
    assert res.n_discordant == 10
    assert res.favoring_a == 10
    assert res.p_value == pytest.approx(2 * 0.5 ** 10, abs=1e-12)
    assert abs(res.p_value - 0.00195) < 1e-5
    assert res.significant


def test_binomial_significance_balanced():
    hits_a = [1] * 5 + [0] * 5
    hits_b = [0] * 5 + [1] * 5  # 5 vs 5 discordant
    res = binomial_significance(hits_a, hits_b)
    assert res.p_value == 1.0
    assert not res.significant


def test_binomial_significance_no_discordant():
    res = binomial_significance([1, 0, 1], [1, 0, 1])
    assert res.p_value == 1.0
    assert not res.significant
    assert res.n_discordant == 0


def test_binomial_significance_alpha_default():
    # p for 7/7 discordant is 2 * 0.5^7 = 0.015625 < 0.05
    res = binomial_significance([1] * 7, [0] * 7)
    assert res.significant


class RiggedModel:
    """Always predicts the ground truth: every fake set fails validation."""

    def __init__(self, db):
        self.db = db
        self.calls = 0

    def rebind(self, db):
        return self

    def answer(self, q, facts):
        self.calls += 1

        class R:
            prediction = q.answer
        return R()


class FirstRejectModel(RiggedModel):
    """Rejects the first candidate fake set, accepts later ones."""

    def answer(self, q, facts):
        self.calls += 1

        class R:
            prediction = q.answer if self.calls == 1 else "nobody"
        return R()


@pytest.fixture(scope="module")
def small_corpus():
    return generate_synthetic_corpus(
        SynthConfig(entities=15, relations=6, facts_per_entity=3,
                    queries_per_entity=3, vocab_size=16), seed=2)


def test_make_fake_facts_exhausts_retries(small_corpus):
    db = small_corpus.db
    q = db.queries[sorted(db.queries)[0]]
    rigged = RiggedModel(db)
    with pytest.raises(ExhaustedRetriesError):
        make_fake_facts(q, db, rigged, np.random.default_rng(0), max_retries=5)
    assert rigged.calls == 5


def test_make_fake_facts_resamples_after_rejection(small_corpus):
    db = small_corpus.db
    q = db.queries[sorted(db.queries)[0]]
    model = FirstRejectModel(db)
    fake, ext = make_fake_facts(q, db, model, np.random.default_rng(0),
                                max_retries=5)
    assert model.calls == 2  # first candidate rejected, second accepted
    assert len(fake) > 0
    assert all(fid.startswith(FAKE_PREFIX) for fid in fake)


def test_make_fake_facts_deterministic(small_corpus):
    db = small_corpus.db
    q = db.queries[sorted(db.queries)[0]]
    model = FirstRejectModel(db)
    f1, _ = make_fake_facts(q, db, model, np.random.default_rng(42), max_retries=5)
    model2 = FirstRejectModel(db)
    f2, _ = make_fake_facts(q, db, model2, np.random.default_rng(42), max_retries=5)
    assert f1.ids == f2.ids


@pytest.fixture(scope="module")
def trained(small_corpus):
    cfg = ModelConfig(embed_dim=12, hops=3, learning_rate=0.2, epochs=20,
                      seed=6, batch_size=8)
    return train(small_corpus.db, cfg)


def test_build_hybrid_invariants(small_corpus, trained):
    db = small_corpus.db
    model = QAModel(trained.params, db)
    instances, skipped = build_hybrid_instances(db, model, seed=5)
    assert instances, f"no instances kept: {skipped}"
    for inst in instances:
        assert set(inst.real.ids).isdisjoint(inst.fake.ids)
        assert all(fid.startswith(FAKE_PREFIX) for fid in inst.fake)
        assert inst.combined == inst.real.union(inst.fake)
        q = inst.db.queries[inst.query_id]
        # kept instances answer correctly on the hybrid set
        assert inst.prediction == q.answer
        rebound = model.rebind(inst.db)
        assert rebound.answer(q, inst.combined).prediction == q.answer
        # post hoc validation guarantee: fake facts alone do not answer
        assert rebound.answer(q, inst.fake).prediction != q.answer


def test_build_hybrid_skips_wrong_answers(small_corpus):
    db = small_corpus.db
    # untrained-but-valid model answers most queries wrongly
    cfg = ModelConfig(embed_dim=4, hops=2, epochs=0, seed=13)
    result = train(db, cfg)
    model = QAModel(result.params, db)
    instances, skipped = build_hybrid_instances(db, model, seed=5)
    assert skipped["wrong-answer"] > 0


def test_pointing_game_hit_log_reproducible(small_corpus, trained):
    db = small_corpus.db
    model = QAModel(trained.params, db)
    instances, _ = build_hybrid_instances(db, model, seed=5)
    r1 = pointing_game(instances, model, "ip", seed=3)
    r2 = pointing_game(instances, model, "ip", seed=3)
    assert r1.hit_log == r2.hit_log
    assert r1.accuracy == r1.hits / r1.total
    r3 = pointing_game(instances, model, "random", seed=3)
    r4 = pointing_game(instances, model, "random", seed=3)
    assert r3.hit_log == r4.hit_log
