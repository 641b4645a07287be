"""Privacy-preserving fragmentation of a relation and placement of its fragments.

A privacy constraint is a set of attributes that must never be visible
together in one fragment (or at one provider). Attributes can be transformed
before fragmentation:

* ``hash`` replaces the value with a one-way digest. The digest discharges
  every constraint on the attribute and is copied into every fragment.
* ``semantic_decompose`` splits a value into parts (phone -> area code +
  number); ``additive_encode`` stores ``s + r`` and ``r``. Either satisfies
  the attribute's own singleton constraint as long as the parts are kept
  apart. In a constraint with other attributes, holding *any* part counts
  as holding the attribute.
* ``tuple_id`` swaps a sensitive primary key for a random surrogate join key;
  the original key becomes an ordinary attribute.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field
from decimal import Decimal
from itertools import combinations
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np

TUPLE_ID = "TupleId"


class FragmentError(ValueError):
    """Base class for fragmentation errors."""


class UnknownAttributeError(FragmentError):
    pass


class PrivacyInfeasibleError(FragmentError):
    pass


class OverlappingPredicatesError(FragmentError):
    pass


class PrivacyLevel(enum.Enum):
    NORMAL = "Normal"
    SENSITIVE = "Sensitive"
    CRITICAL = "Critical"


class TransformKind(enum.Enum):
    SEMANTIC_DECOMPOSE = "semantic_decompose"
    ADDITIVE_ENCODE = "additive_encode"
    HASH = "hash"
    TUPLE_ID = "tuple_id"


@dataclass(frozen=True)
class RelationSchema:
    name: str
    attributes: tuple[str, ...]
    primary_key: tuple[str, ...] = ()
    privacy_level: PrivacyLevel = PrivacyLevel.SENSITIVE

    def __post_init__(self) -> None:
        if len(set(self.attributes)) != len(self.attributes):
            raise FragmentError(f"{self.name}: attribute names must be unique")
        missing = [a for a in self.primary_key if a not in self.attributes]
        if missing:
            raise UnknownAttributeError(f"{self.name}: primary key names unknown attributes {missing}")


@dataclass(frozen=True)
class PrivacyConstraint:
    attributes: frozenset[str]

    def __post_init__(self) -> None:
        if not self.attributes:
            raise FragmentError("a privacy constraint needs at least one attribute")

    def __str__(self) -> str:
        return "{" + ", ".join(sorted(self.attributes)) + "}"


@dataclass(frozen=True)
class AttributeTransform:
    target: str
    kind: TransformKind
    parts: tuple[str, ...] = ()
    format: str | None = None

    def __post_init__(self) -> None:
        if not self.parts:
            object.__setattr__(self, "parts", _default_parts(self.target, self.kind))
        n = len(self.parts)
        if self.kind is TransformKind.SEMANTIC_DECOMPOSE and n < 2:
            raise FragmentError(f"semantic decomposition of {self.target} needs >= 2 parts")
        if self.kind is TransformKind.ADDITIVE_ENCODE and n != 2:
            raise FragmentError(f"additive encoding of {self.target} needs exactly 2 parts")
        if self.kind in (TransformKind.HASH, TransformKind.TUPLE_ID) and n != 1:
            raise FragmentError(f"{self.kind.value} of {self.target} produces exactly 1 column")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> AttributeTransform:
        return cls(
            target=data["target"],
            kind=TransformKind(data["kind"]),
            parts=tuple(data.get("parts", ())),
            format=data.get("format"),
        )

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"target": self.target, "kind": self.kind.value, "parts": list(self.parts)}
        if self.format is not None:
            out["format"] = self.format
        return out


def _default_parts(target: str, kind: TransformKind) -> tuple[str, ...]:
    if kind is TransformKind.HASH:
        return (f"{target}#",)
    if kind is TransformKind.TUPLE_ID:
        return (TUPLE_ID,)
    if kind is TransformKind.ADDITIVE_ENCODE:
        return (f"{target}_1", f"{target}_2")
    return ()


@dataclass(frozen=True)
class Fragment:
    fragment_id: str
    attributes: tuple[str, ...]


@dataclass(frozen=True)
class FragmentationPlan:
    relation: str
    fragments: tuple[Fragment, ...]
    transforms: tuple[AttributeTransform, ...]
    join_key: str

    def partition(self) -> set[frozenset[str]]:
        """Fragments as attribute sets, ignoring order and ids."""
        return {frozenset(f.attributes) for f in self.fragments}

    def to_dict(self) -> dict[str, Any]:
        return {
            "relation": self.relation,
            "join_key": self.join_key,
            "fragments": [{"fragment_id": f.fragment_id, "attributes": list(f.attributes)} for f in self.fragments],
            "transforms": [t.to_dict() for t in self.transforms],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> FragmentationPlan:
        return cls(
            relation=data["relation"],
            fragments=tuple(Fragment(f["fragment_id"], tuple(f["attributes"])) for f in data["fragments"]),
            transforms=tuple(AttributeTransform.from_dict(t) for t in data.get("transforms", ())),
            join_key=data["join_key"],
        )


@dataclass(frozen=True)
class Violation:
    property: str
    detail: str


# -- stored columns ---------------------------------------------------------


@dataclass
class _Layout:
    """Columns a relation is stored as, after transforms."""

    join_key: str
    columns: list[str]  # separable columns, schema order
    shared: list[str]  # copied into every fragment (hash digests)
    parts: dict[str, tuple[str, ...]] = field(default_factory=dict)  # attr -> its stored columns
    hashed: set[str] = field(default_factory=set)
    transforms: list[AttributeTransform] = field(default_factory=list)

    @property
    def origin(self) -> dict[str, str]:
        return {col: attr for attr, cols in self.parts.items() for col in cols}


def _constraint_attrs(constraints: Iterable[PrivacyConstraint | Iterable[str]]) -> list[frozenset[str]]:
    out = []
    for c in constraints:
        attrs = c.attributes if isinstance(c, PrivacyConstraint) else frozenset(c)
        out.append(PrivacyConstraint(frozenset(attrs)).attributes)
    return out


def _layout(
    schema: RelationSchema,
    constraints: Sequence[frozenset[str]],
    transforms: Sequence[AttributeTransform],
) -> _Layout:
    known = set(schema.attributes)
    for c in constraints:
        unknown = sorted(c - known)
        if unknown:
            raise UnknownAttributeError(f"constraint {sorted(c)} names unknown attribute(s) {unknown}")
    value_tf: dict[str, AttributeTransform] = {}
    tid: AttributeTransform | None = None
    for t in transforms:
        if t.kind is TransformKind.TUPLE_ID:
            # an empty target marks a surrogate for a relation without a single-column key
            if t.target not in schema.primary_key and (t.target or len(schema.primary_key) == 1):
                raise FragmentError(f"tuple_id transform must target the primary key, not {t.target!r}")
            tid = t
            continue
        if t.target not in known:
            raise UnknownAttributeError(f"transform targets unknown attribute {t.target!r}")
        if t.target in value_tf:
            raise FragmentError(f"attribute {t.target!r} has more than one value transform")
        value_tf[t.target] = t

    constrained = set().union(*constraints) if constraints else set()
    pk = schema.primary_key
    sensitive_key = len(pk) != 1 or pk[0] in constrained or pk[0] in value_tf
    if tid is None and sensitive_key:
        # no usable key: introduce a surrogate
        tid = AttributeTransform(pk[0] if len(pk) == 1 else "", TransformKind.TUPLE_ID)
    join_key = tid.parts[0] if tid else pk[0]
    if tid is not None and join_key in known:
        raise FragmentError(f"surrogate key name {join_key!r} collides with an attribute")

    layout = _Layout(join_key=join_key, columns=[], shared=[])
    layout.transforms = list(value_tf.values()) + ([tid] if tid else [])
    for attr in schema.attributes:
        if attr == join_key:
            layout.parts[attr] = (attr,)
            continue
        t = value_tf.get(attr)
        if t is None:
            layout.parts[attr] = (attr,)
            layout.columns.append(attr)
        elif t.kind is TransformKind.HASH:
            layout.parts[attr] = t.parts
            layout.hashed.add(attr)
            layout.shared.extend(t.parts)
        else:
            layout.parts[attr] = t.parts
            layout.columns.extend(t.parts)
    clash = {c for c in layout.columns + layout.shared if c in known and layout.origin.get(c) != c}
    if clash:
        raise FragmentError(f"transform output column(s) {sorted(clash)} collide with attributes")
    return layout


def _exposes(layout: _Layout, constraint: frozenset[str], visible: set[str]) -> bool:
    """Whether ``visible`` columns reveal every attribute of ``constraint``."""
    if len(constraint) == 1:
        (attr,) = constraint
        if attr in layout.hashed:
            return False
        return all(col in visible for col in layout.parts[attr])
    for attr in constraint:
        if attr in layout.hashed or not any(col in visible for col in layout.parts[attr]):
            return False
    return True


# -- decomposition ----------------------------------------------------------


def decompose(
    schema: RelationSchema,
    constraints: Iterable[PrivacyConstraint | Iterable[str]] = (),
    transforms: Sequence[AttributeTransform] = (),
) -> FragmentationPlan:
    """Greedy vertical fragmentation.

    Starts from one fragment per stored column and repeatedly merges the
    first safe pair, trying pairs tied together by a shared multi-attribute
    constraint before unrelated ones, then by schema position. Stops when no
    safe merge is left. Normal-level relations are returned whole.
    """
    cons = _constraint_attrs(constraints)
    if schema.privacy_level is PrivacyLevel.NORMAL:
        key = schema.primary_key[0] if len(schema.primary_key) == 1 else schema.attributes[0]
        return FragmentationPlan(schema.name, (Fragment("F1", schema.attributes),), (), key)

    layout = _layout(schema, cons, transforms)
    for c in cons:
        if len(c) == 1:
            (attr,) = c
            if attr not in layout.hashed and len(layout.parts[attr]) < 2:
                raise PrivacyInfeasibleError(
                    f"constraint {{{attr}}} cannot be met: register a hash, semantic_decompose "
                    f"or additive_encode transform for {attr}"
                )

    origin = layout.origin
    position = {col: i for i, col in enumerate(layout.columns)}
    multi = [c for c in cons if len(c) > 1]

    def safe(cols: set[str]) -> bool:
        return not any(_exposes(layout, c, cols) for c in cons)

    def related(a: list[str], b: list[str]) -> bool:
        oa = {origin[x] for x in a}
        ob = {origin[x] for x in b}
        return any(c & oa and c & ob and len(c & (oa | ob)) >= 2 for c in multi)

    groups: list[list[str]] = [[c] for c in layout.columns]
    while True:
        best = None
        for i, j in combinations(range(len(groups)), 2):
            union = set(groups[i]) | set(groups[j])
            if not safe(union):
                continue
            rank = (not related(groups[i], groups[j]), position[groups[i][0]], position[groups[j][0]])
            if best is None or rank < best[0]:
                best = (rank, i, j)
        if best is None:
            break
        _, i, j = best
        groups[i] = sorted(groups[i] + groups[j], key=position.__getitem__)
        del groups[j]

    groups.sort(key=lambda g: position[g[0]])
    if not groups:
        groups = [[]]
    fragments = tuple(
        Fragment(f"F{n}", (layout.join_key, *layout.shared, *g)) for n, g in enumerate(groups, start=1)
    )
    return FragmentationPlan(schema.name, fragments, tuple(layout.transforms), layout.join_key)


def validate_plan(
    schema: RelationSchema,
    constraints: Iterable[PrivacyConstraint | Iterable[str]],
    plan: FragmentationPlan,
) -> list[Violation]:
    """Check completeness, reconstruction, disjointness and privacy of a plan."""
    cons = _constraint_attrs(constraints)
    if schema.privacy_level is PrivacyLevel.NORMAL:
        layout = _Layout(plan.join_key, [a for a in schema.attributes if a != plan.join_key], [])
        layout.parts = {a: (a,) for a in schema.attributes}
        cons = []
    else:
        layout = _layout(schema, cons, plan.transforms)
    expected = set(layout.columns) | set(layout.shared) | {plan.join_key}
    for f in plan.fragments:
        unknown = sorted(set(f.attributes) - expected)
        if unknown:
            raise UnknownAttributeError(f"fragment {f.fragment_id} names unknown attribute(s) {unknown}")

    found: list[Violation] = []
    placed: dict[str, list[str]] = {}
    for f in plan.fragments:
        for col in f.attributes:
            placed.setdefault(col, []).append(f.fragment_id)
    for col in sorted(expected - set(placed)):
        found.append(Violation("completeness", f"{col} is not stored in any fragment"))
    for f in plan.fragments:
        if plan.join_key not in f.attributes:
            found.append(Violation("reconstruction", f"fragment {f.fragment_id} lacks join key {plan.join_key}"))
    for col in layout.columns:
        if len(placed.get(col, ())) > 1:
            found.append(Violation("disjointness", f"{col} appears in fragments {placed[col]}"))

    for f in plan.fragments:
        held = set(f.attributes)
        for c in cons:
            if _violates(layout, c, held):
                found.append(Violation("privacy", f"fragment {f.fragment_id} holds all of constraint {sorted(c)}"))
    return found


def _violates(layout: _Layout, constraint: frozenset[str], held: set[str]) -> bool:
    # Deliberately separate from _exposes: this is the auditor's reading.
    visible_attrs = set()
    for attr in constraint:
        cols = layout.parts.get(attr, (attr,))
        if attr in layout.hashed:
            continue
        count = sum(1 for col in cols if col in held)
        if len(constraint) == 1:
            if count == len(cols):
                visible_attrs.add(attr)
        elif count:
            visible_attrs.add(attr)
    return visible_attrs == set(constraint)


# -- horizontal fragmentation ------------------------------------------------


def horizontal_split(
    rows: Sequence[Any], predicates: Sequence[Callable[[Any], bool]]
) -> list[list[Any]]:
    """One group per predicate, plus a trailing remainder group when non-empty."""
    groups: list[list[Any]] = [[] for _ in predicates]
    rest: list[Any] = []
    for n, row in enumerate(rows):
        hits = [i for i, pred in enumerate(predicates) if pred(row)]
        if len(hits) > 1:
            raise OverlappingPredicatesError(f"row {n} ({row!r}) matches predicates {hits}")
        (groups[hits[0]] if hits else rest).append(row)
    if rest:
        groups.append(rest)
    return groups


# -- attribute transforms on values ------------------------------------------


SPLIT_FORMATS = {"phone": (3,), "card": (6,)}


def hash_value(value: Any) -> str:
    return hashlib.sha256(str(value).encode("utf-8")).hexdigest()


def semantic_split(value: Any, n_parts: int, fmt: str | None = None, widths: Sequence[int] = ()) -> tuple[str, ...]:
    """Split a value into ``n_parts`` strings by leading field widths.

    ``phone`` keeps the digits and splits off a 3-digit area code; ``card``
    splits off the 6-digit issuer number.
    """
    text = str(value)
    if fmt in ("phone", "card"):
        text = "".join(ch for ch in text if ch.isdigit())
    widths = tuple(widths) or SPLIT_FORMATS.get(fmt or "", ())
    if len(widths) != n_parts - 1:
        raise FragmentError(f"need {n_parts - 1} field widths to split into {n_parts} parts, got {widths}")
    out, start = [], 0
    for w in widths:
        out.append(text[start : start + w])
        start += w
    out.append(text[start:])
    return tuple(out)


def additive_encode(value: int | float | Decimal, rng: np.random.Generator) -> tuple[Any, Any]:
    """Return ``(value + r, r)`` for a fresh random ``r``. Floats are encoded as Decimal."""
    if isinstance(value, (bool, np.bool_)):
        raise TypeError("cannot additively encode a boolean")
    if isinstance(value, (int, np.integer)):
        r = int(rng.integers(-(2**62), 2**62))
        return int(value) + r, r
    d = value if isinstance(value, Decimal) else Decimal(repr(float(value)))
    r = Decimal(int(rng.integers(-(2**52), 2**52))).scaleb(-6)
    return d + r, r


def additive_decode(s1: Any, s2: Any) -> Any:
    return s1 - s2


def generate_tuple_ids(count: int, rng: np.random.Generator, existing: Iterable[int] = ()) -> list[int]:
    """Distinct random 64-bit surrogate keys, redrawn on collision."""
    seen = set(existing)
    out = []
    while len(out) < count:
        tid = int(rng.integers(0, 2**63, dtype=np.int64)) | (int(rng.integers(0, 2)) << 63)
        if tid not in seen:
            seen.add(tid)
            out.append(tid)
    return out


def materialize(
    rows: Sequence[Mapping[str, Any]], plan: FragmentationPlan, seed: int = 0
) -> dict[str, list[dict[str, Any]]]:
    """Apply the plan's transforms to ``rows`` and project them onto each fragment."""
    rng = np.random.Generator(np.random.PCG64(seed))
    tf = {t.target: t for t in plan.transforms if t.kind is not TransformKind.TUPLE_ID}
    tid = next((t for t in plan.transforms if t.kind is TransformKind.TUPLE_ID), None)
    keys = generate_tuple_ids(len(rows), rng) if tid else None
    stored = []
    for n, row in enumerate(rows):
        out: dict[str, Any] = {}
        if tid is not None:
            out[plan.join_key] = keys[n]
        for attr, value in row.items():
            t = tf.get(attr)
            if t is None:
                out[attr] = value
            elif t.kind is TransformKind.HASH:
                out[t.parts[0]] = hash_value(value)
            elif t.kind is TransformKind.ADDITIVE_ENCODE:
                out[t.parts[0]], out[t.parts[1]] = additive_encode(value, rng)
            else:
                out.update(zip(t.parts, semantic_split(value, len(t.parts), t.format)))
        stored.append(out)
    return {f.fragment_id: [{a: r[a] for a in f.attributes} for r in stored] for f in plan.fragments}


# -- placement --------------------------------------------------------------


@dataclass(frozen=True)
class MappingEntry:
    chunk_name: str
    relation: str
    fragment_id: str
    sequence_index: int
    provider_ids: tuple[int, ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "chunk_name": self.chunk_name,
            "relation": self.relation,
            "fragment_id": self.fragment_id,
            "sequence_index": self.sequence_index,
            "provider_ids": list(self.provider_ids),
        }


@dataclass(frozen=True)
class MappingTable:
    entries: tuple[MappingEntry, ...]

    def to_dict(self) -> dict[str, Any]:
        return {"entries": [e.to_dict() for e in self.entries]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> MappingTable:
        return cls(
            tuple(
                MappingEntry(
                    e["chunk_name"], e["relation"], e["fragment_id"], int(e["sequence_index"]),
                    tuple(e["provider_ids"]),
                )
                for e in data["entries"]
            )
        )

    def holdings(self) -> dict[int, set[str]]:
        """Fragment ids held by each provider."""
        out: dict[int, set[str]] = {}
        for e in self.entries:
            for pid in e.provider_ids:
                out.setdefault(pid, set()).add(e.fragment_id)
        return out


def new_chunk_name(rng: np.random.Generator) -> str:
    """A 128-bit opaque hex token."""
    return rng.bytes(16).hex()


def place_fragments(
    plan: FragmentationPlan,
    providers: Sequence[Any],
    r: int = 2,
    seed: int = 0,
    schema: RelationSchema | None = None,
    constraints: Iterable[PrivacyConstraint | Iterable[str]] = (),
    chunks_per_fragment: int = 1,
) -> MappingTable:
    """Give each fragment ``r`` distinct providers so no provider sees a whole constraint.

    Providers may be ids or objects with an ``id``. Constraints are read
    against ``schema`` (and the plan's transforms), so ``schema`` is required
    whenever constraints are given.
    """
    ids = sorted(p if isinstance(p, (int, np.integer)) else p.id for p in providers)
    ids = [int(i) for i in ids]
    if not 1 <= r <= len(ids):
        raise PrivacyInfeasibleError(f"replication factor {r} needs at least {r} providers, got {len(ids)}")
    if chunks_per_fragment < 1:
        raise ValueError("chunks_per_fragment must be >= 1")
    cons = _constraint_attrs(constraints)
    if cons and schema is None:
        raise ValueError("placing under privacy constraints needs the relation schema")
    if schema is None or schema.privacy_level is PrivacyLevel.NORMAL:
        cons = []
        layout = _Layout(plan.join_key, [], [])
    else:
        layout = _layout(schema, cons, plan.transforms)
    frag_cols = {f.fragment_id: set(f.attributes) for f in plan.fragments}

    everything = set().union(*frag_cols.values())
    spanning = [c for c in cons if _exposes(layout, c, everything)]
    if spanning and len(ids) < 3:
        raise PrivacyInfeasibleError(
            f"constraint {sorted(spanning[0])} spans several fragments; at least 3 providers are required"
        )

    rng = np.random.Generator(np.random.PCG64(seed))
    rank = {pid: int(k) for k, pid in zip(rng.permutation(len(ids)), ids)}
    held: dict[int, set[str]] = {pid: set() for pid in ids}
    load = {pid: 0 for pid in ids}
    order = [f.fragment_id for f in plan.fragments]
    chosen: dict[str, tuple[int, ...]] = {}

    def fits(pid: int, fid: str) -> bool:
        visible = held[pid] | frag_cols[fid]
        return not any(_exposes(layout, c, visible) for c in cons)

    def search(k: int) -> bool:
        if k == len(order):
            return True
        fid = order[k]
        ok = sorted((pid for pid in ids if fits(pid, fid)), key=lambda p: (load[p], rank[p]))
        for combo in combinations(ok, r):
            for pid in combo:
                held[pid] |= frag_cols[fid]
                load[pid] += 1
            chosen[fid] = tuple(sorted(combo))
            if search(k + 1):
                return True
            for pid in combo:
                load[pid] -= 1
                held[pid] = set().union(*(frag_cols[f] for f in order[:k] if pid in chosen[f]))
            del chosen[fid]
        return False

    if not search(0):
        raise PrivacyInfeasibleError(
            f"cannot place {len(order)} fragments with r={r} on {len(ids)} providers "
            "without some provider seeing a whole privacy constraint"
        )

    names: set[str] = set()
    entries = []
    for fid in order:
        for seq in range(chunks_per_fragment):
            name = new_chunk_name(rng)
            while name in names:
                name = new_chunk_name(rng)
            names.add(name)
            entries.append(MappingEntry(name, plan.relation, fid, seq, chosen[fid]))
    return MappingTable(tuple(entries))


def audit_colocation(
    table: MappingTable,
    plan: FragmentationPlan,
    schema: RelationSchema,
    constraints: Iterable[PrivacyConstraint | Iterable[str]],
) -> list[Violation]:
    """Independent check that no provider's combined holdings expose a constraint."""
    cons = _constraint_attrs(constraints)
    if schema.privacy_level is PrivacyLevel.NORMAL:
        return []
    layout = _layout(schema, cons, plan.transforms)
    attrs = {f.fragment_id: set(f.attributes) for f in plan.fragments}
    found = []
    for pid, frags in sorted(table.holdings().items()):
        visible = set().union(*(attrs[f] for f in frags))
        for c in cons:
            if _violates(layout, c, visible):
                found.append(Violation("colocation", f"provider {pid} holds all of {sorted(c)} via {sorted(frags)}"))
    return found


# -- documents --------------------------------------------------------------


@dataclass(frozen=True)
class SchemaDocument:
    schema: RelationSchema
    constraints: tuple[PrivacyConstraint, ...]
    transforms: tuple[AttributeTransform, ...]

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> SchemaDocument:
        try:
            schema = RelationSchema(
                name=data["name"],
                attributes=tuple(data["attributes"]),
                primary_key=tuple(data.get("primary_key", ())),
                privacy_level=PrivacyLevel(data.get("privacy_level", "Sensitive")),
            )
        except KeyError as exc:
            raise FragmentError(f"schema document missing field {exc.args[0]!r}") from None
        return cls(
            schema=schema,
            constraints=tuple(PrivacyConstraint(frozenset(c)) for c in data.get("constraints", ())),
            transforms=tuple(AttributeTransform.from_dict(t) for t in data.get("transforms", ())),
        )


def load_schema(path: str | Path) -> SchemaDocument:
    return SchemaDocument.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
