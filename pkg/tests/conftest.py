import pytest

from factqa.store import (
    BLANK,
    OBJ_SLOT,
    SUBJ_SLOT,
    Entity,
    Fact,
    FactDatabase,
    Query,
    Relation,
)


@pytest.fixture
def tiny_db() -> FactDatabase:
    """Two subjects with KB and text facts, three queries (one entity each
    for e1/e2 plus a two-entity query for substitution tests)."""
    entities = [
        Entity("e1", "Alpha"), Entity("e2", "Bravo"), Entity("e3", "Carol"),
        Entity("e4", "Delta"), Entity("e5", "Echo"),
    ]
    relations = [Relation("r1"), Relation("r2")]
    kb = [
        Fact("kb:01", "kb", subject="e1", object="e3", relation="r1"),
        Fact("kb:02", "kb", subject="e1", object="e4", relation="r2"),
        Fact("kb:03", "kb", subject="e2", object="e5", relation="r1"),
    ]
    text = [
        Fact("txt:01", "text", subject="e1", object="e5",
             tokens=("wa", SUBJ_SLOT, "wb", OBJ_SLOT)),
        Fact("txt:02", "text", subject="e2", object="e3",
             tokens=(SUBJ_SLOT, "wc", OBJ_SLOT, "wd")),
    ]
    queries = [
        Query("q1", tokens=("wa", "e1", BLANK), answer="e3"),
        Query("q2", tokens=("e2", "wc", BLANK), answer="e5"),
        Query("q3", tokens=("e1", "wb", "e2", BLANK), answer="e4"),
    ]
    return FactDatabase(entities, relations, kb, text, queries)
