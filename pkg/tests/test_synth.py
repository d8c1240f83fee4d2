import pytest

from factqa.errors import InfeasibleConfigError
from factqa.store import save_database
from factqa.synth import SynthConfig, generate_synthetic_corpus


CFG = SynthConfig(entities=20, relations=5, facts_per_entity=4,
                  queries_per_entity=3, vocab_size=20)


def test_deterministic_byte_identical(tmp_path):
    a = generate_synthetic_corpus(CFG, seed=7)
    b = generate_synthetic_corpus(CFG, seed=7)
    pa, pb = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    save_database(a.db, pa)
    save_database(b.db, pb)
    assert pa.read_bytes() == pb.read_bytes()
    assert a.planted == b.planted


def test_different_seed_differs(tmp_path):
    a = generate_synthetic_corpus(CFG, seed=7)
    b = generate_synthetic_corpus(CFG, seed=8)
    pa, pb = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    save_database(a.db, pa)
    save_database(b.db, pb)
    assert pa.read_bytes() != pb.read_bytes()


def test_planted_fact_object_is_answer():
    corpus = generate_synthetic_corpus(CFG, seed=3)
    for qid, fid in corpus.planted.items():
        q = corpus.db.queries[qid]
        fact = corpus.db.fact(fid)
        assert fact.object == q.answer
        assert fact.subject in corpus.db.query_entities(q)


def test_provenance_covers_all_queries():
    corpus = generate_synthetic_corpus(CFG, seed=5)
    assert set(corpus.planted) == set(corpus.db.queries)


def test_distractors_have_other_objects():
    corpus = generate_synthetic_corpus(CFG, seed=9)
    db = corpus.db
    for qid, planted_id in corpus.planted.items():
        q = db.queries[qid]
        subject = db.fact(planted_id).subject
        for fid in db._by_subject[subject]:
            if fid != planted_id:
                assert db.fact(fid).object != q.answer


@pytest.mark.parametrize("seed", range(100))
def test_database_invariants_fuzz(seed):
    # FactDatabase construction enforces resolution + uniqueness invariants
    cfg = SynthConfig(entities=8, relations=4, facts_per_entity=3,
                      queries_per_entity=2, vocab_size=10,
                      text_fraction=(seed % 5) / 4.0)
    corpus = generate_synthetic_corpus(cfg, seed=seed)
    ids = list(corpus.db.fact_ids())
    assert len(ids) == len(set(ids))
    assert set(corpus.db.kb_facts).isdisjoint(corpus.db.text_facts)


@pytest.mark.parametrize("cfg", [
    SynthConfig(entities=20, relations=3, facts_per_entity=4,
                queries_per_entity=2, vocab_size=20),  # relations too few
    SynthConfig(entities=4, relations=8, facts_per_entity=4,
                queries_per_entity=2, vocab_size=20),  # entities too few
    SynthConfig(entities=20, relations=8, facts_per_entity=4,
                queries_per_entity=2, vocab_size=9),  # vocabulary too small
    SynthConfig(entities=0, relations=3, facts_per_entity=1,
                queries_per_entity=1, vocab_size=9),
])
def test_infeasible_configs(cfg):
    with pytest.raises(InfeasibleConfigError):
        generate_synthetic_corpus(cfg, seed=0)
