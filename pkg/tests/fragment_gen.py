"""Random constrained relation schemas for property tests."""

import numpy as np

from cloudplace.fragment import AttributeTransform, PrivacyConstraint, RelationSchema, TransformKind

KINDS = [TransformKind.HASH, TransformKind.SEMANTIC_DECOMPOSE, TransformKind.ADDITIVE_ENCODE]


def random_schema(rng: np.random.Generator):
    n = int(rng.integers(2, 8))
    attrs = [f"A{i}" for i in range(n)]
    schema = RelationSchema("R", ("Id", *attrs), ("Id",))
    constraints = []
    transforms = {}
    for _ in range(int(rng.integers(0, 5))):
        size = int(rng.integers(1, min(n, 4) + 1))
        picked = frozenset(str(a) for a in rng.choice(attrs, size=size, replace=False))
        constraints.append(PrivacyConstraint(picked))
        if size == 1:
            (a,) = picked
            if a not in transforms:
                kind = KINDS[int(rng.integers(0, 3))]
                parts = (f"{a}_p", f"{a}_q", f"{a}_r")[: int(rng.integers(2, 4))] if kind is TransformKind.SEMANTIC_DECOMPOSE else ()
                transforms[a] = AttributeTransform(a, kind, parts)
    if rng.random() < 0.2:
        constraints.append(PrivacyConstraint(frozenset({"Id", attrs[0]})))
    return schema, constraints, list(transforms.values())
