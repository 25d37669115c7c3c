from hypothesis import given
from hypothesis import strategies as st

from textsql.dialect import parse
from textsql.normalize import normalize_sql
from textsql.skeleton import (
    RETAINED_KEYWORDS,
    SLOT,
    build_target,
    extract_skeleton,
    make_sample,
    split_output,
)

TABLE1_NORMALIZED = (
    "select files.duration , files.file_size , files.formats from files "
    "join song on files.f_id = song.f_id where song.genre_is = 'pop' "
    "order by song.song_name asc"
)


def test_golden_skeletons():
    assert extract_skeleton(TABLE1_NORMALIZED).text == "select _ from _ where _ order by _ asc"
    normalized = normalize_sql("SELECT petid FROM pets WHERE pet_age = 1")
    assert extract_skeleton(normalized).text == "select _ from _ where _"


def test_clause_collapse_rules():
    normalized = normalize_sql("select a from t group by a having count ( * ) > 1 limit 3")
    assert extract_skeleton(normalized).text == "select _ from _ group by _ having _ limit _"


def test_join_on_never_surfaces():
    normalized = normalize_sql(
        "select t.a from t join u on t.id = u.id join v on u.id = v.id where v.x = 1"
    )
    skeleton = extract_skeleton(normalized).text
    assert skeleton == "select _ from _ where _"
    assert "join" not in skeleton and "on" not in skeleton


def test_subqueries_collapse_into_parent_slot():
    normalized = normalize_sql(
        "select a from t where b in ( select b from u where c = 1 order by b asc )"
    )
    assert extract_skeleton(normalized).text == "select _ from _ where _"


def test_set_operations_keep_both_sides():
    normalized = normalize_sql("select a from t union select b from u where c = 2")
    assert extract_skeleton(normalized).text == "select _ from _ union select _ from _ where _"


def _clause_keyword_walk(tree):
    seq = ["select", "from"]
    if tree.where_conjuncts:
        seq.append("where")
    if tree.group_by:
        seq.extend(["group", "by"])
    if tree.having_conjuncts:
        seq.append("having")
    if tree.order_by:
        seq.extend(["order", "by"])
        for _expr, direction in tree.order_by:
            seq.append(direction)
    if tree.limit is not None:
        seq.append("limit")
    if tree.set_op is not None:
        seq.append(tree.set_op[0])
        seq.extend(_clause_keyword_walk(tree.set_op[1]))
    return seq


def test_keyword_sequence_oracle_on_corpus(corpus):
    for instance in corpus:
        normalized = normalize_sql(instance["query"])
        skeleton = extract_skeleton(normalized)
        keywords = [tok for tok in skeleton.text.split(" ") if tok != SLOT]
        assert keywords == _clause_keyword_walk(parse(normalized.text)), instance["question_id"]


def test_skeleton_alphabet_on_corpus(corpus):
    for instance in corpus:
        skeleton = extract_skeleton(normalize_sql(instance["query"]))
        for token in skeleton.text.split(" "):
            assert token == SLOT or token in RETAINED_KEYWORDS, skeleton.text


def test_build_target_and_split():
    normalized = normalize_sql("select a from t")
    target = build_target(normalized)
    assert target == "select _ from _ | select a from t"
    assert split_output(target) == ("select _ from _", "select a from t")


def test_build_target_table1():
    skeleton, sql = split_output(build_target(normalize_sql(TABLE1_NORMALIZED)))
    assert skeleton == "select _ from _ where _ order by _ asc"
    assert sql == TABLE1_NORMALIZED


def test_split_without_delimiter_trims():
    assert split_output("  select a from t \n") == ("", "select a from t")


def test_split_uses_last_delimiter():
    assert split_output("x | y | z") == ("x | y", "z")


@given(
    skeleton=st.text(alphabet="select from where_ ", min_size=1, max_size=40),
    sql=st.text(alphabet="abcdefgh ,.'()=123", min_size=1, max_size=60),
)
def test_split_inverts_concatenation(skeleton, sql):
    decoded = skeleton + " | " + sql
    got_skeleton, got_sql = split_output(decoded)
    if " | " not in sql:
        assert (got_skeleton, got_sql) == (skeleton, sql)
    else:
        assert decoded == got_skeleton + " | " + got_sql


def test_make_sample_bundles_input_and_target():
    sample = make_sample("q1", "question | t : a", "SELECT a FROM t")
    assert sample.question_id == "q1"
    assert sample.input_sequence == "question | t : a"
    assert sample.target == "select _ from _ | select a from t"


def test_targets_on_corpus_split_back(corpus):
    for instance in corpus:
        normalized = normalize_sql(instance["query"])
        target = build_target(normalized)
        assert not target.startswith(" | ")  # every query has a select/from skeleton
        skeleton, sql = split_output(target)
        assert sql == normalized.text
        assert skeleton == extract_skeleton(normalized).text
