"""CSV dataset format, table writers and run metadata.

Reals are written with 17 significant digits so every double survives a
save/load cycle bit for bit.
"""
from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, OutputError
from .model import RACES, SEXES, AttributeTable, NetworkState, n_links

NODE_COLUMNS = ("school_id", "node_id", "smokes", "sex", "grade", "race", "price_cents",
                "hh_smokes", "mom_edu", "income")
EDGE_COLUMNS = ("school_id", "node_a", "node_b")


def fmt(x) -> str:
    """Text form of a table cell: 17 significant digits for reals."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if np.isnan(x):
            return "nan"
        if np.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.17g}"
    return str(x)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([fmt(x) for x in row])
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: empty file, header required")
    return rows[0], rows[1:]


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_json_default)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, Path):
        return str(o)
    if hasattr(o, "to_mapping"):
        return o.to_mapping()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def content_hash(paths: Iterable, extra: object = None) -> str:
    """sha256 over file contents (in the given order) and an optional object."""
    h = hashlib.sha256()
    for p in paths:
        p = Path(p)
        h.update(p.name.encode())
        h.update(b"\0")
        h.update(p.read_bytes())
        h.update(b"\0")
    if extra is not None:
        h.update(canonical_json(extra).encode())
    return h.hexdigest()


def write_metadata(path, seed: int, config: dict, inputs: Iterable = (), **extra) -> Path:
    """JSON sidecar recording the seed, the config and a hash of the inputs."""
    inputs = [Path(p) for p in inputs]
    meta = {"seed": int(seed), "config": config,
            "inputs": [p.name for p in inputs],
            "input_hash": content_hash(inputs, config)}
    meta.update(extra)
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(canonical_json(meta) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return Path(path)


# -------------------------------------------------------------- datasets

@dataclass(eq=False)
class School:
    school_id: str
    X: AttributeTable
    S: NetworkState
    node_ids: list = field(default_factory=list)

    def __post_init__(self):
        if not self.node_ids:
            self.node_ids = [str(i) for i in range(self.X.n)]
        self.node_ids = [str(x) for x in self.node_ids]
        if len(set(self.node_ids)) != len(self.node_ids):
            raise DataError(f"school {self.school_id}: duplicate node ids")
        if self.X.n != self.S.n or len(self.node_ids) != self.S.n:
            raise DataError(f"school {self.school_id}: attribute/state size mismatch")

    @property
    def n(self) -> int:
        return self.S.n

    def equals(self, other: "School") -> bool:
        return (self.school_id == other.school_id and self.node_ids == other.node_ids
                and self.X.equals(other.X) and self.S == other.S)


@dataclass(eq=False)
class DatasetBundle:
    schools: list
    provenance: dict = field(default_factory=dict)

    def pairs(self) -> list[tuple[NetworkState, AttributeTable]]:
        return [(s.S, s.X) for s in self.schools]

    def equals(self, other: "DatasetBundle") -> bool:
        return (len(self.schools) == len(other.schools)
                and all(a.equals(b) for a, b in zip(self.schools, other.schools))
                and self.provenance == other.provenance)

    def school(self, school_id: str) -> School:
        for s in self.schools:
            if s.school_id == school_id:
                return s
        raise KeyError(school_id)


def save_dataset(bundle: DatasetBundle, out_dir, stem: str = "") -> tuple[Path, Path]:
    out = Path(out_dir)
    nodes = out / f"{stem}nodes.csv"
    edges = out / f"{stem}edges.csv"
    node_rows, edge_rows = [], []
    for s in bundle.schools:
        X, S = s.X, s.S
        for i in range(s.n):
            node_rows.append([s.school_id, s.node_ids[i], int(S.actions[i]), SEXES[X.sex[i]],
                              int(X.grade[i]), RACES[X.race[i]], float(X.price_cents[i]),
                              int(X.hh_smokes[i]), int(X.mom_edu[i]),
                              None if X.income is None else float(X.income[i])])
        iu, ju = np.triu_indices(s.n, k=1)
        for c in np.flatnonzero(S.links):
            na, nb = s.node_ids[iu[c]], s.node_ids[ju[c]]
            edge_rows.append([s.school_id] + ([na, nb] if _id_less(na, nb) else [nb, na]))
    write_csv(nodes, NODE_COLUMNS, node_rows)
    write_csv(edges, EDGE_COLUMNS, edge_rows)
    if bundle.provenance:
        try:
            (out / f"{stem}provenance.json").write_text(
                canonical_json(bundle.provenance) + "\n", encoding="utf-8")
        except OSError as exc:
            raise OutputError(str(exc)) from exc
    return nodes, edges


def _parse(value: str, kind, where: str, column: str):
    try:
        if kind is float:
            x = float(value)
            if not np.isfinite(x):
                raise ValueError
            return x
        if kind is int:
            return int(value)
        return value
    except ValueError:
        raise DataError(f"{where}: invalid {column} value {value!r}") from None


def load_dataset(nodes_csv, edges_csv, directed: bool = False, split_by_grade=False,
                 provenance: dict | None = None) -> DatasetBundle:
    """Read the node and edge tables.

    With ``directed`` the edge file lists nominations node_a -> node_b and a
    link exists only when both directions are present.  ``split_by_grade``
    (True or a list of school ids) turns each grade of those schools into
    its own network, dropping cross-grade links.
    """
    header, rows = read_csv(nodes_csv)
    if tuple(header) != NODE_COLUMNS:
        raise DataError(f"{nodes_csv}: header must be {','.join(NODE_COLUMNS)}")
    order: list[str] = []
    recs: dict[str, list] = {}
    seen: dict[str, set] = {}
    for lineno, row in enumerate(rows, start=2):
        where = f"{nodes_csv}:{lineno}"
        if len(row) != len(NODE_COLUMNS):
            raise DataError(f"{where}: expected {len(NODE_COLUMNS)} fields, got {len(row)}")
        sid, nid = row[0], row[1]
        if sid not in recs:
            order.append(sid)
            recs[sid] = []
            seen[sid] = set()
        if nid in seen[sid]:
            raise DataError(f"{where}: duplicate node id {nid!r} in school {sid!r}")
        seen[sid].add(nid)
        smokes = _parse(row[2], int, where, "smokes")
        sex = row[3]
        grade = _parse(row[4], int, where, "grade")
        race = row[5]
        price = _parse(row[6], float, where, "price_cents")
        hh = _parse(row[7], int, where, "hh_smokes")
        mom = _parse(row[8], int, where, "mom_edu")
        income = None if row[9] == "" else _parse(row[9], float, where, "income")
        if smokes not in (0, 1):
            raise DataError(f"{where}: smokes must be 0/1")
        if sex not in SEXES:
            raise DataError(f"{where}: sex must be one of {SEXES}")
        if not 7 <= grade <= 12:
            raise DataError(f"{where}: grade must lie in 7..12, got {grade}")
        if race not in RACES:
            raise DataError(f"{where}: race must be one of {RACES}")
        if price <= 0:
            raise DataError(f"{where}: price_cents must be positive")
        if hh not in (0, 1) or mom not in (0, 1):
            raise DataError(f"{where}: hh_smokes and mom_edu must be 0/1")
        if income is not None and income <= 0:
            raise DataError(f"{where}: income must be positive")
        recs[sid].append((nid, smokes, SEXES.index(sex), grade, RACES.index(race), price,
                          hh, mom, income))

    eheader, erows = read_csv(edges_csv)
    if tuple(eheader) != EDGE_COLUMNS:
        raise DataError(f"{edges_csv}: header must be {','.join(EDGE_COLUMNS)}")
    pos = {sid: {r[0]: k for k, r in enumerate(recs[sid])} for sid in order}
    pairs: dict[str, set] = {sid: set() for sid in order}
    for lineno, row in enumerate(erows, start=2):
        where = f"{edges_csv}:{lineno}"
        if len(row) != 3:
            raise DataError(f"{where}: expected 3 fields, got {len(row)}")
        sid, na, nb = row
        if sid not in pos:
            raise DataError(f"{where}: unknown school {sid!r}")
        if na not in pos[sid] or nb not in pos[sid]:
            raise DataError(f"{where}: dangling edge endpoint in school {sid!r}")
        i, j = pos[sid][na], pos[sid][nb]
        if i == j:
            raise DataError(f"{where}: self link")
        if directed:
            pairs[sid].add((i, j))
        else:
            if not _id_less(na, nb):
                raise DataError(f"{where}: undirected edges must be stored with node_a < node_b")
            if (i, j) in pairs[sid]:
                raise DataError(f"{where}: duplicate edge")
            pairs[sid].add((i, j))

    schools = []
    for sid in order:
        r = recs[sid]
        n = len(r)
        adj = np.zeros((n, n), np.int8)
        for i, j in pairs[sid]:
            if directed:
                if (j, i) in pairs[sid]:
                    adj[i, j] = adj[j, i] = 1
            else:
                adj[i, j] = adj[j, i] = 1
        incomes = [x[8] for x in r]
        income = None if any(x is None for x in incomes) else np.array(incomes, float)
        X = AttributeTable(np.array([x[2] for x in r]), np.array([x[3] for x in r]),
                           np.array([x[4] for x in r]), np.array([x[5] for x in r], float),
                           np.array([x[6] for x in r]), np.array([x[7] for x in r]), income, sid)
        S = NetworkState.from_adjacency(np.array([x[1] for x in r], np.int8), adj)
        school = School(sid, X, S, [x[0] for x in r])
        if split_by_grade is True or (split_by_grade and sid in split_by_grade):
            schools.extend(split_school_by_grade(school))
        else:
            schools.append(school)
    if provenance is None:
        prov_path = Path(nodes_csv).with_name(Path(nodes_csv).name.replace("nodes.csv",
                                                                          "provenance.json"))
        if prov_path != Path(nodes_csv) and prov_path.exists():
            provenance = json.loads(prov_path.read_text(encoding="utf-8"))
    prov = dict(provenance or {})
    if not prov:
        prov = {"source": str(nodes_csv), "directed": bool(directed)}
    return DatasetBundle(schools, prov)


def _id_less(a: str, b: str) -> bool:
    try:
        return int(a) < int(b)
    except ValueError:
        return a < b


def split_school_by_grade(school: School) -> list[School]:
    out = []
    for grade in sorted(set(school.X.grade.tolist())):
        idx = np.flatnonzero(school.X.grade == grade)
        sid = f"{school.school_id}_g{grade}"
        adj = school.S.adjacency()[np.ix_(idx, idx)]
        S = NetworkState.from_adjacency(school.S.actions[idx], adj)
        out.append(School(sid, school.X.subset(idx, sid), S, [school.node_ids[i] for i in idx]))
    return out
