import json

import pytest

from factqa.errors import (
    DanglingReferenceError,
    EntityCountMismatchError,
    ParseError,
)
from factqa.store import (
    BLANK,
    OBJ_SLOT,
    SUBJ_SLOT,
    Entity,
    Fact,
    FactDatabase,
    FactSet,
    Query,
    Relation,
    load_database,
    retrieve_facts,
    save_database,
    substitute_subjects,
)


def test_fact_invariants():
    with pytest.raises(ValueError):
        Fact("f", "kb", subject="a", object="b")  # missing relation
    with pytest.raises(ValueError):
        Fact("f", "text", subject="a", object="b",
             tokens=(SUBJ_SLOT, SUBJ_SLOT, OBJ_SLOT))  # two subject slots
    with pytest.raises(ValueError):
        Fact("f", "text", subject=SUBJ_SLOT, object="b",
             tokens=(SUBJ_SLOT, OBJ_SLOT))  # subject is a slot marker
    with pytest.raises(ValueError):
        Query("q", tokens=("a", "b"), answer="c")  # no blank


def test_load_counts(tmp_path):
    path = tmp_path / "facts.jsonl"
    lines = [
        {"kind": "entity", "id": "e1", "surface": "Alpha"},
        {"kind": "entity", "id": "e2", "surface": "Bravo"},
        {"kind": "relation", "id": "r1"},
        {"kind": "kb", "id": "kb:1", "subject": "e1", "relation": "r1",
         "object": "e2"},
    ]
    path.write_text("\n".join(json.dumps(o) for o in lines) + "\n")
    db = load_database(path)
    assert db.sizes() == (2, 1, 0)


def test_load_dangling_reference(tmp_path):
    path = tmp_path / "facts.jsonl"
    lines = [
        {"kind": "entity", "id": "e1", "surface": "Alpha"},
        {"kind": "relation", "id": "r1"},
        {"kind": "kb", "id": "kb:1", "subject": "e1", "relation": "r1",
         "object": "e99"},
    ]
    path.write_text("\n".join(json.dumps(o) for o in lines) + "\n")
    with pytest.raises(DanglingReferenceError, match="e99"):
        load_database(path)


def test_load_parse_error_has_line_number(tmp_path):
    path = tmp_path / "facts.jsonl"
    path.write_text('{"kind": "entity", "id": "e1", "surface": "A"}\nnot json\n')
    with pytest.raises(ParseError, match=":2:"):
        load_database(path)


def test_save_load_round_trip(tiny_db, tmp_path):
    path = tmp_path / "db.jsonl"
    save_database(tiny_db, path)
    reloaded = load_database(path)
    path2 = tmp_path / "db2.jsonl"
    save_database(reloaded, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_retrieve_subject_match_only(tiny_db):
    q = tiny_db.queries["q1"]  # mentions e1
    facts = retrieve_facts(q, tiny_db, text_cap=500)
    assert facts.ids == ("kb:01", "kb:02", "txt:01")
    # e2's facts excluded; facts whose *object* is e1 would also be excluded
    assert "kb:03" not in facts


def test_retrieve_empty_for_factless_entities():
    entities = [Entity("e1", "A"), Entity("e2", "B")]
    relations = [Relation("r")]
    kb = [Fact("kb:1", "kb", subject="e2", object="e1", relation="r")]
    queries = [Query("q", ("e1", BLANK), answer="e2")]
    db = FactDatabase(entities, relations, kb, [], queries)
    assert len(retrieve_facts(db.queries["q"], db, 500)) == 0


def test_text_cap_500():
    entities = [Entity("e1", "A"), Entity("e2", "B")]
    text = [
        Fact(f"txt:{i:04d}", "text", subject="e1", object="e2",
             tokens=(SUBJ_SLOT, f"w{i}", OBJ_SLOT))
        for i in range(600)
    ]
    queries = [Query("q", ("e1", BLANK), answer="e2")]
    db = FactDatabase(entities, [], [], text, queries)
    facts = retrieve_facts(db.queries["q"], db, text_cap=500)
    assert len(facts) == 500
    # lowest fact ids are kept
    assert facts.ids == tuple(f"txt:{i:04d}" for i in range(500))


def test_fact_set_sorted_deduplicated(tiny_db):
    fs = FactSet(["txt:01", "kb:01", "kb:01"], tiny_db)
    assert fs.ids == ("kb:01", "txt:01")
    with pytest.raises(DanglingReferenceError):
        FactSet(["nope"], tiny_db)


def test_substitute_kb_fact(tiny_db):
    # donor q2 mentions e2, target q1 mentions e1: kb:03 (e2, r1, e5)
    # becomes a fake fact (e1, r1, e5)
    donor = retrieve_facts(tiny_db.queries["q2"], tiny_db, 500)
    fake, ext = substitute_subjects(donor, tiny_db.queries["q2"],
                                    tiny_db.queries["q1"], tiny_db)
    assert all(fid.startswith("fake:") for fid in fake)
    kb_fake = ext.fact("fake:kb:03")
    assert (kb_fake.subject, kb_fake.relation, kb_fake.object) == ("e1", "r1", "e5")


def test_substitute_text_fact_rebinds_subject_slot(tiny_db):
    donor = retrieve_facts(tiny_db.queries["q2"], tiny_db, 500)
    fake, ext = substitute_subjects(donor, tiny_db.queries["q2"],
                                    tiny_db.queries["q1"], tiny_db)
    txt_fake = ext.fact("fake:txt:02")
    assert txt_fake.subject == "e1"  # rebound
    assert txt_fake.tokens == (SUBJ_SLOT, "wc", OBJ_SLOT, "wd")  # unchanged
    assert txt_fake.object == "e3"  # unchanged


def test_substitute_entity_count_mismatch(tiny_db):
    donor = retrieve_facts(tiny_db.queries["q3"], tiny_db, 500)  # 2 entities
    with pytest.raises(EntityCountMismatchError):
        substitute_subjects(donor, tiny_db.queries["q3"],
                            tiny_db.queries["q1"], tiny_db)


def test_substitute_positional_mapping(tiny_db):
    # q3 mentions (e1, e2); map onto a two-entity target in reversed roles
    target = Query("q4", tokens=("e2", "wa", "e1", BLANK), answer="e3")
    db = FactDatabase(tiny_db.entities.values(), tiny_db.relations.values(),
                      tiny_db.kb_facts.values(), tiny_db.text_facts.values(),
                      list(tiny_db.queries.values()) + [target])
    donor = retrieve_facts(db.queries["q3"], db, 500)  # subjects e1 and e2
    fake, ext = substitute_subjects(donor, db.queries["q3"],
                                    db.queries["q4"], db)
    # first-occurrence pairing: e1 -> e2, e2 -> e1
    assert ext.fact("fake:kb:01").subject == "e2"
    assert ext.fact("fake:kb:03").subject == "e1"


def test_substitute_preserves_counts_kinds(tiny_db):
    donor = retrieve_facts(tiny_db.queries["q2"], tiny_db, 500)
    fake, ext = substitute_subjects(donor, tiny_db.queries["q2"],
                                    tiny_db.queries["q1"], tiny_db)
    assert len(fake) == len(donor)
    for fid in donor:
        orig = tiny_db.fact(fid)
        sub = ext.fact("fake:" + fid)
        assert (orig.kind, orig.relation, orig.object, orig.tokens) == \
               (sub.kind, sub.relation, sub.object, sub.tokens)
