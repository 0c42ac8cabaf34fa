"""File formats and ingestion.

Snapshot series (``peno-snapshots/1``)::

    peno-snapshots/1 N=3 T=2
    #nodes alice bob carol
    #t 2009-01
    0 1
    #t 2009-02
    0 1
    1 2

The ``#nodes`` line is optional; without it node ids are ``0..N-1``.  Each
``#t`` line opens one moment and carries its label (the rest of the line).
Labels must strictly increase: numerically when both parse as numbers,
otherwise as strings.  Blank lines are ignored.

Model parameters (``peno-params/1``) are written at 17 significant digits, so
a save/load/save cycle is byte-identical.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import DomainError, NetworkSnapshot, Personalities, SnapshotSeries, SystemParams
from .trainer import ModelParams

SNAPSHOT_VERSION = "peno-snapshots/1"
PARAMS_VERSION = "peno-params/1"


class ParseError(DomainError):
    """Malformed input file; ``line`` is 1-based (0 when not tied to a line)."""

    def __init__(self, message, line=0, path=None):
        self.line = line
        self.path = path
        where = f"{path or '<input>'}:{line}: " if line else f"{path or '<input>'}: "
        super().__init__(where + message)


class VersionError(ParseError):
    pass


class IndexRangeError(ParseError):
    pass


class DuplicateEdgeError(ParseError):
    pass


class MomentOrderError(ParseError):
    pass


def _label_key(label: str):
    try:
        return (0, float(label), "")
    except ValueError:
        return (1, 0.0, label)


def _before(a: str, b: str) -> bool:
    ka, kb = _label_key(a), _label_key(b)
    if ka[0] == kb[0] == 0:
        return ka[1] < kb[1]
    return a < b


def _header(line: str, version: str, lineno: int, path, keys: Sequence[str]) -> dict:
    parts = line.split()
    if not parts or parts[0] != version:
        found = parts[0] if parts else "<empty>"
        raise VersionError(f"expected format {version}, found {found!r}", lineno, path)
    fields = {}
    for part in parts[1:]:
        key, sep, value = part.partition("=")
        if not sep:
            raise ParseError(f"bad header field {part!r}", lineno, path)
        fields[key] = value
    missing = [k for k in keys if k not in fields]
    if missing:
        raise ParseError(f"header missing {', '.join(missing)}", lineno, path)
    return fields


def _int_field(fields, key, lineno, path, low=1):
    try:
        value = int(fields[key])
    except ValueError:
        raise ParseError(f"{key} must be an integer, got {fields[key]!r}", lineno, path) from None
    if value < low:
        raise ParseError(f"{key} must be >= {low}, got {value}", lineno, path)
    return value


# ---------------------------------------------------------------------------
# snapshot series
# ---------------------------------------------------------------------------


def format_snapshots(series: SnapshotSeries) -> str:
    if "\n" in "".join(series.labels) or any(not l.strip() for l in series.labels):
        raise DomainError("moment labels must be non-empty single lines")
    if any(not nid or any(ch.isspace() for ch in nid) for nid in series.node_ids):
        raise DomainError("node ids must be non-empty and free of whitespace")
    out = [f"{SNAPSHOT_VERSION} N={series.node_count} T={series.moments}"]
    if series.node_ids != [str(k) for k in range(series.node_count)]:
        out.append("#nodes " + " ".join(series.node_ids))
    for label, snap in zip(series.labels, series.snapshots):
        out.append(f"#t {label}")
        out.extend(f"{i} {j}" for i, j in snap.edges.tolist())
    return "\n".join(out) + "\n"


def parse_snapshots(text: str, path=None) -> SnapshotSeries:
    lines = text.splitlines()
    if not lines:
        raise VersionError("empty file", 0, path)
    fields = _header(lines[0], SNAPSHOT_VERSION, 1, path, ("N", "T"))
    n = _int_field(fields, "N", 1, path)
    T = _int_field(fields, "T", 1, path)
    node_ids = None
    labels: list[str] = []
    blocks: list[list[tuple[int, int]]] = []
    seen: set[tuple[int, int]] = set()
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#nodes"):
            if node_ids is not None or labels:
                raise ParseError("#nodes must appear once, before the first moment", lineno, path)
            node_ids = line.split()[1:]
            if len(node_ids) != n or len(set(node_ids)) != n:
                raise ParseError(f"#nodes must list {n} distinct ids", lineno, path)
            continue
        if line.startswith("#t"):
            label = line[2:].strip()
            if not label or not line[2:3].isspace():
                raise ParseError("moment line needs a label: '#t <label>'", lineno, path)
            if labels and not _before(labels[-1], label):
                raise MomentOrderError(f"moment {label!r} does not follow {labels[-1]!r}",
                                       lineno, path)
            labels.append(label)
            blocks.append([])
            seen = set()
            continue
        if line.startswith("#"):
            raise ParseError(f"unknown directive {line.split()[0]!r}", lineno, path)
        if not labels:
            raise ParseError("edge row before the first '#t' line", lineno, path)
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"edge row must be 'i j', got {line!r}", lineno, path)
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(f"edge row must hold integers, got {line!r}", lineno, path) from None
        for k in (i, j):
            if not 0 <= k < n:
                raise IndexRangeError(f"node index {k} outside 0..{n - 1}", lineno, path)
        if i == j:
            raise ParseError(f"self-loop {i} {j}", lineno, path)
        key = (min(i, j), max(i, j))
        if key in seen:
            raise DuplicateEdgeError(f"duplicate edge {key[0]} {key[1]} in moment {labels[-1]!r}",
                                     lineno, path)
        seen.add(key)
        blocks[-1].append(key)
    if len(blocks) != T:
        raise ParseError(f"header declares T={T} but {len(blocks)} moments found", 0, path)
    snaps = [NetworkSnapshot(n, b) for b in blocks]
    return SnapshotSeries(snaps, labels, node_ids)


def save_snapshots(series, path) -> None:
    if not isinstance(series, SnapshotSeries):
        series = SnapshotSeries(series)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_snapshots(series))


def load_snapshots(path) -> SnapshotSeries:
    with open(path, encoding="utf-8") as fh:
        return parse_snapshots(fh.read(), path=os.fspath(path))


def cumulative_expand(series):
    """Each moment keeps every tie seen at or before it."""
    wrapped = isinstance(series, SnapshotSeries)
    snaps = list(series)
    out = []
    acc = np.zeros((snaps[0].node_count,) * 2, dtype=bool)
    for snap in snaps:
        acc |= snap.adjacency()
        out.append(NetworkSnapshot.from_adjacency(acc))
    if wrapped:
        return SnapshotSeries(out, series.labels, series.node_ids)
    return out


# ---------------------------------------------------------------------------
# vote records
# ---------------------------------------------------------------------------

_STANCES = {"yea": 1, "nay": -1}


@dataclass(frozen=True)
class VoteRecord:
    moment: str
    bill: str
    voter: str
    stance: str

    def __post_init__(self):
        if self.stance not in _STANCES:
            raise DomainError(f"stance must be 'yea' or 'nay', got {self.stance!r}")


def parse_votes(text: str, path=None) -> list[VoteRecord]:
    """Rows ``moment,bill,voter,stance``; a matching header row is skipped."""
    records = []
    seen = set()
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or all(not c.strip() for c in row):
            continue
        row = [c.strip() for c in row]
        if lineno == 1 and [c.lower() for c in row] == ["moment", "bill", "voter", "stance"]:
            continue
        if len(row) != 4:
            raise ParseError(f"expected 4 columns, got {len(row)}", lineno, path)
        moment, bill, voter, stance = row
        stance = stance.lower()
        if stance not in _STANCES:
            raise ParseError(f"stance must be yea or nay, got {row[3]!r}", lineno, path)
        key = (moment, bill, voter)
        if key in seen:
            raise ParseError(f"voter {voter!r} votes twice on bill {bill!r} in {moment!r}",
                             lineno, path)
        seen.add(key)
        records.append(VoteRecord(moment, bill, voter, stance))
    return records


def load_votes(path) -> list[VoteRecord]:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_votes(fh.read(), path=os.fspath(path))


def project_votes(records: Iterable, window: int, agreement_threshold: float,
                  min_common_bills: int, stride: int | None = None) -> SnapshotSeries:
    """Co-agreement snapshots from roll-call records.

    Moments are ordered by label and grouped into windows of ``window``
    consecutive moments, advancing by ``stride`` (default ``window``, i.e. no
    overlap).  Voters ``i`` and ``j`` are tied in a window when they voted on
    at least ``min_common_bills`` common bills there and took the same stance
    on at least ``agreement_threshold`` of them.  Nodes are indexed in order
    of first appearance.
    """
    records = [r if isinstance(r, VoteRecord) else VoteRecord(*r) for r in records]
    if window < 1:
        raise DomainError(f"window must be >= 1, got {window}")
    stride = window if stride is None else stride
    if stride < 1:
        raise DomainError(f"stride must be >= 1, got {stride}")
    if not 0 < agreement_threshold <= 1:
        raise DomainError(f"agreement_threshold must lie in (0, 1], got {agreement_threshold}")
    if min_common_bills < 1:
        raise DomainError(f"min_common_bills must be >= 1, got {min_common_bills}")
    voters: dict[str, int] = {}
    for rec in records:
        voters.setdefault(rec.voter, len(voters))
    seen = set()
    for rec in records:
        key = (rec.moment, rec.bill, rec.voter)
        if key in seen:
            raise DomainError(f"voter {rec.voter!r} votes twice on bill {rec.bill!r} "
                              f"in {rec.moment!r}")
        seen.add(key)
    moments = sorted({rec.moment for rec in records}, key=_label_key)
    starts = range(0, len(moments) - window + 1, stride)
    if not starts:
        raise DomainError(f"no windows: {len(moments)} moments, window needs {window}")
    n = len(voters)
    snaps, labels = [], []
    for s in starts:
        span = moments[s:s + window]
        inside = set(span)
        rows = [r for r in records if r.moment in inside]
        bills: dict[tuple[str, str], int] = {}
        for r in rows:
            bills.setdefault((r.moment, r.bill), len(bills))
        votes = np.zeros((n, len(bills)))
        for r in rows:
            votes[voters[r.voter], bills[(r.moment, r.bill)]] = _STANCES[r.stance]
        yea = (votes > 0).astype(float)
        nay = (votes < 0).astype(float)
        both = yea + nay
        common = both @ both.T
        agree = yea @ yea.T + nay @ nay.T
        with np.errstate(invalid="ignore", divide="ignore"):
            rate = np.where(common > 0, agree / np.maximum(common, 1), 0.0)
        adj = (common >= min_common_bills) & (rate >= agreement_threshold)
        np.fill_diagonal(adj, False)
        snaps.append(NetworkSnapshot.from_adjacency(adj))
        labels.append(span[0] if window == 1 else f"{span[0]}..{span[-1]}")
    return SnapshotSeries(snaps, labels, list(voters))


# ---------------------------------------------------------------------------
# model parameters
# ---------------------------------------------------------------------------


def _g(x: float) -> str:
    return format(float(x), ".17g")


def format_params(params: ModelParams) -> str:
    p = params
    T, N = p.trends.shape
    out = [f"{PARAMS_VERSION} N={N} T={T} xi={_g(p.system.xi)} v={_g(p.system.velocity)}",
           "#personality node r l sigma b"]
    prof = p.profiles
    for k in range(N):
        out.append(f"{k} {_g(prof.r[k])} {_g(prof.l[k])} {_g(prof.sigma[k])} {_g(prof.b[k])}")
    out.append("#opinions node z c")
    for k in range(N):
        out.append(f"{k} {_g(p.x0[k, 0])} {_g(p.x0[k, 1])}")
    out.append("#trends t theta...")
    for t in range(T):
        out.append(f"{t} " + " ".join(_g(a) for a in p.trends[t]))
    return "\n".join(out) + "\n"


def _table(lines, start, count, width, path, title):
    rows = []
    for k in range(count):
        lineno = start + k + 1
        if start + k >= len(lines):
            raise ParseError(f"{title} table ends after {k} rows, expected {count}", lineno, path)
        parts = lines[start + k].split()
        if len(parts) != width + 1:
            raise ParseError(f"{title} row needs {width + 1} fields", lineno, path)
        if parts[0] != str(k):
            raise ParseError(f"{title} row {k} labelled {parts[0]!r}", lineno, path)
        try:
            rows.append([float(v) for v in parts[1:]])
        except ValueError:
            raise ParseError(f"non-numeric value in {title} table", lineno, path) from None
    return np.array(rows, dtype=float).reshape(count, width)


def parse_params(text: str, path=None) -> ModelParams:
    lines = text.splitlines()
    if not lines:
        raise VersionError("empty file", 0, path)
    fields = _header(lines[0], PARAMS_VERSION, 1, path, ("N", "T", "xi", "v"))
    N = _int_field(fields, "N", 1, path)
    T = _int_field(fields, "T", 1, path)
    try:
        system = SystemParams(xi=float(fields["xi"]), velocity=float(fields["v"]))
    except ValueError as exc:
        raise ParseError(str(exc), 1, path) from None
    pos = 1

    def expect(prefix):
        nonlocal pos
        if pos >= len(lines) or not lines[pos].startswith(prefix):
            raise ParseError(f"expected section {prefix!r}", pos + 1, path)
        pos += 1

    expect("#personality")
    pers = _table(lines, pos, N, 4, path, "personality")
    pos += N
    expect("#opinions")
    x0 = _table(lines, pos, N, 2, path, "opinion")
    pos += N
    expect("#trends")
    trends = _table(lines, pos, T, N, path, "trend")
    pos += T
    if any(line.strip() for line in lines[pos:]):
        raise ParseError("trailing content after trend table", pos + 1, path)
    try:
        profiles = Personalities(pers[:, 0], pers[:, 1], pers[:, 2], pers[:, 3])
        return ModelParams(profiles, x0, trends, system)
    except DomainError as exc:
        raise ParseError(str(exc), 0, path) from None


def save_params(params: ModelParams, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_params(params))


def load_params(path) -> ModelParams:
    with open(path, encoding="utf-8") as fh:
        return parse_params(fh.read(), path=os.fspath(path))
