import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from peno.core import DomainError, NetworkSnapshot, Personalities, SnapshotSeries, SystemParams
from peno.dataio import (
    DuplicateEdgeError,
    IndexRangeError,
    MomentOrderError,
    ParseError,
    VersionError,
    VoteRecord,
    cumulative_expand,
    format_params,
    format_snapshots,
    load_params,
    load_snapshots,
    load_votes,
    parse_params,
    parse_snapshots,
    parse_votes,
    project_votes,
    save_params,
    save_snapshots,
)
from peno.simulator import SimulationConfig, run
from peno.trainer import ModelParams

# snapshot files


def test_minimal_file():
    s = parse_snapshots("peno-snapshots/1 N=2 T=1\n#t 0\n0 1\n")
    assert s.moments == 1 and s.node_count == 2
    assert s[0].edges.tolist() == [[0, 1]]


def test_labels_and_node_ids():
    text = "peno-snapshots/1 N=3 T=2\n#nodes alice bob carol\n#t 2009-01\n0 1\n\n#t 2009-02\n1 2\n"
    s = parse_snapshots(text)
    assert s.labels == ["2009-01", "2009-02"]
    assert s.node_ids == ["alice", "bob", "carol"]
    assert format_snapshots(s) == text.replace("\n\n", "\n")


@pytest.mark.parametrize("text,err,line", [
    ("peno-snapshots/2 N=2 T=1\n#t 0\n0 1\n", VersionError, 1),
    ("peno-snapshots/1 N=2 T=1\n#t 0\n0 2\n", IndexRangeError, 3),
    ("peno-snapshots/1 N=3 T=1\n#t 0\n0 1\n1 2\n1 0\n", DuplicateEdgeError, 5),
    ("peno-snapshots/1 N=2 T=2\n#t 5\n#t 3\n", MomentOrderError, 3),
    ("peno-snapshots/1 N=2 T=2\n#t b\n#t a\n", MomentOrderError, 3),
    ("peno-snapshots/1 N=2 T=1\n#t 0\n1 1\n", ParseError, 3),
    ("peno-snapshots/1 N=2 T=1\n0 1\n", ParseError, 2),
    ("peno-snapshots/1 N=2 T=2\n#t 0\n", ParseError, 0),
])
def test_located_parse_errors(text, err, line):
    with pytest.raises(err) as info:
        parse_snapshots(text, path="f.peno")
    assert info.value.line == line
    assert "f.peno" in str(info.value)


def test_parse_errors_are_distinct_types():
    kinds = {VersionError, IndexRangeError, DuplicateEdgeError, MomentOrderError}
    assert len(kinds) == 4 and all(issubclass(k, ParseError) for k in kinds)


def test_numeric_labels_order_numerically():
    s = parse_snapshots("peno-snapshots/1 N=2 T=2\n#t 9\n#t 10\n")
    assert s.labels == ["9", "10"]


def test_simulated_series_round_trip(tmp_path):
    tr = run(SimulationConfig(node_count=25, moments=6, seed=3))
    series = SnapshotSeries(tr.snapshots)
    save_snapshots(series, tmp_path / "s.peno")
    back = load_snapshots(tmp_path / "s.peno")
    assert back == series
    save_snapshots(back, tmp_path / "t.peno")
    assert (tmp_path / "s.peno").read_bytes() == (tmp_path / "t.peno").read_bytes()


@st.composite
def series_strategy(draw):
    n = draw(st.integers(2, 7))
    T = draw(st.integers(1, 4))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    snaps = [NetworkSnapshot(n, draw(st.lists(st.sampled_from(pairs), unique=True))) for _ in range(T)]
    return SnapshotSeries(snaps)


@given(series_strategy())
def test_round_trip_property(series):
    assert parse_snapshots(format_snapshots(series)) == series


def test_missing_file_is_os_error(tmp_path):
    with pytest.raises(OSError):
        load_snapshots(tmp_path / "absent.peno")


# cumulative expansion


def test_cumulative_persistence():
    out = cumulative_expand([NetworkSnapshot(2, [(0, 1)]), NetworkSnapshot(2)])
    assert out[1].has_edge(0, 1)


@given(series_strategy())
def test_cumulative_idempotent_and_monotone(series):
    once = cumulative_expand(series)
    assert cumulative_expand(once) == once
    counts = [len(s) for s in once]
    assert counts == sorted(counts)
    for a, b in zip(once.snapshots, once.snapshots[1:]):
        assert set(map(tuple, a.edges.tolist())) <= set(map(tuple, b.edges.tolist()))


def test_cumulative_keeps_labels():
    s = SnapshotSeries([NetworkSnapshot(2)], ["x"], ["a", "b"])
    out = cumulative_expand(s)
    assert out.labels == ["x"] and out.node_ids == ["a", "b"]


# vote projection


def votes(pairs):
    """``pairs`` maps bill -> (stance of u, stance of w)."""
    rows = []
    for bill, (su, sw) in pairs.items():
        rows += [VoteRecord("m1", bill, "u", su), VoteRecord("m1", bill, "w", sw)]
    return rows


def test_full_agreement_gives_edge():
    recs = votes({f"b{k}": ("yea", "yea") for k in range(5)})
    s = project_votes(recs, 1, 0.8, 3)
    assert s[0].has_edge(0, 1)


def test_low_agreement_gives_no_edge():
    stances = [("yea", "yea"), ("nay", "nay"), ("yea", "nay"), ("nay", "yea"), ("yea", "nay")]
    recs = votes({f"b{k}": s for k, s in enumerate(stances)})
    assert not project_votes(recs, 1, 0.8, 3)[0].has_edge(0, 1)
    assert project_votes(recs, 1, 0.4, 3)[0].has_edge(0, 1)


def test_support_floor():
    recs = votes({"b0": ("yea", "yea")}) + [VoteRecord("m1", "b1", "u", "yea")]
    assert not project_votes(recs, 1, 0.5, 3)[0].has_edge(0, 1)


def test_windows_and_stride():
    recs = [VoteRecord(m, "b", v, "yea") for m in ("1", "2", "3") for v in ("u", "w")]
    assert project_votes(recs, 2, 1.0, 1).labels == ["1..2"]
    assert project_votes(recs, 2, 1.0, 1, stride=1).labels == ["1..2", "2..3"]
    with pytest.raises(DomainError, match="no windows"):
        project_votes(recs, 4, 1.0, 1)
    with pytest.raises(DomainError, match="no windows"):
        project_votes([], 1, 1.0, 1)


def random_records(gen, voters=6, bills=8, moments=3):
    rows = []
    for m in range(moments):
        for b in range(bills):
            for v in range(voters):
                if gen.random() < 0.8:
                    rows.append(VoteRecord(str(m), f"b{b}", f"v{v}", "yea" if gen.random() < 0.5 else "nay"))
    return rows


def edges_by_id(series):
    ids = series.node_ids
    return [{frozenset((ids[i], ids[j])) for i, j in s.edges.tolist()} for s in series]


@settings(max_examples=40)
@given(st.integers(0, 2 ** 32 - 1))
def test_projection_invariant_under_row_order(seed):
    gen = np.random.default_rng(seed)
    recs = random_records(gen)
    shuffled = [recs[k] for k in gen.permutation(len(recs))]
    a = project_votes(recs, 1, 0.6, 2)
    b = project_votes(shuffled, 1, 0.6, 2)
    assert edges_by_id(a) == edges_by_id(b)
    assert all((s.adjacency() == s.adjacency().T).all() for s in a)


def test_vote_file_parsing(tmp_path):
    path = tmp_path / "v.csv"
    path.write_text("moment,bill,voter,stance\n2001,b1,alice,yea\n2001,b1,bob,NAY\n")
    recs = load_votes(path)
    assert recs[1] == VoteRecord("2001", "b1", "bob", "nay")
    with pytest.raises(ParseError) as info:
        parse_votes("1,b,u,maybe\n")
    assert info.value.line == 1
    with pytest.raises(ParseError) as info:
        parse_votes("1,b,u,yea\n1,b,u,nay\n")
    assert info.value.line == 2


# parameter files


def random_params(seed, n=5, T=4):
    gen = np.random.default_rng(seed)
    prof = Personalities(gen.random(n), gen.random(n) * 3, gen.random(n) + 1e-3, gen.random(n) + 1e-3)
    return ModelParams(prof, gen.normal(size=(n, 2)), gen.uniform(-math.pi, math.pi, (T, n)),
                       SystemParams(gen.random() + 0.1, gen.random() * 0.1 + 1e-3))


@settings(max_examples=30)
@given(st.integers(0, 2 ** 32 - 1))
def test_params_round_trip_is_exact(seed):
    p = random_params(seed)
    q = parse_params(format_params(p))
    assert np.array_equal(q.x0, p.x0) and np.array_equal(q.trends, p.trends)
    for name in ("r", "l", "sigma", "b"):
        assert np.array_equal(getattr(q.profiles, name), getattr(p.profiles, name))
    assert q.system == p.system
    assert format_params(q) == format_params(p)


def test_params_file_round_trip(tmp_path):
    p = random_params(1)
    save_params(p, tmp_path / "p.peno")
    assert format_params(load_params(tmp_path / "p.peno")) == format_params(p)


def test_params_errors():
    text = format_params(random_params(2))
    with pytest.raises(VersionError):
        parse_params(text.replace("peno-params/1", "peno-params/9"))
    lines = text.splitlines()
    with pytest.raises(ParseError) as info:
        parse_params("\n".join(lines[:-1]) + "\n")
    assert info.value.line == len(lines)
    with pytest.raises(ParseError):
        parse_params(text.replace("#opinions", "#views"))
