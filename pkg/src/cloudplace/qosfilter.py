"""QoS filtering: drop providers that miss certification or latency requirements."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Protocol, Sequence, TypeVar

from cloudplace.catalog import data_path, normalize_tag

log = logging.getLogger(__name__)

DEFAULT_REGION = "US"


class NoProvidersError(ValueError):
    """No provider survived filtering."""


class HasQos(Protocol):
    name: str
    certifications: frozenset[str]
    response_ms: Mapping[str, float]


P = TypeVar("P", bound=HasQos)


@dataclass(frozen=True)
class QosRequirements:
    region: str = DEFAULT_REGION
    max_response_ms: int | None = None
    required_certifications: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if self.max_response_ms is not None and self.max_response_ms <= 0:
            raise ValueError("max_response_ms must be > 0")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> QosRequirements:
        return cls(
            region=data.get("region", DEFAULT_REGION),
            max_response_ms=data.get("max_response_ms"),
            required_certifications=frozenset(data.get("required_certifications", ())),
        )


@dataclass(frozen=True)
class QosProfile:
    """QoS measurements for a provider that may not be in the priced catalog."""

    name: str
    certifications: frozenset[str] = frozenset()
    response_ms: Mapping[str, float] = field(default_factory=dict)


def has_certification(held: Iterable[str], required: str) -> bool:
    """True when some held tag equals ``required`` or extends it by whole words.

    "SSAE 16 Type II" satisfies "SSAE 16"; "SSAE 160" does not.
    """
    want = normalize_tag(required)
    for tag in held:
        tag = normalize_tag(tag)
        if tag == want or tag.startswith(want + " "):
            return True
    return False


def filter_providers(providers: Iterable[P], req: QosRequirements) -> list[P]:
    kept = []
    for p in providers:
        if req.max_response_ms is not None:
            ms = p.response_ms.get(req.region)
            if ms is None:
                log.warning("%s has no response time for region %s; excluded", p.name, req.region)
                continue
            if ms > req.max_response_ms:
                continue
        if not all(has_certification(p.certifications, c) for c in req.required_certifications):
            continue
        kept.append(p)
    if not kept:
        raise NoProvidersError("no provider satisfies the QoS requirements")
    return kept


def load_requirements(path: str | Path) -> QosRequirements:
    return QosRequirements.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def load_qos_profiles(table: str, path: str | Path | None = None) -> list[QosProfile]:
    """Load one of the measurement tables from the QoS data file.

    ``table`` is a response-time measurement date such as ``"2013-04-11"``
    or ``"certifications"``.
    """
    doc = json.loads(Path(path or data_path("qos_2013.json")).read_text(encoding="utf-8"))
    if table == "certifications":
        rows: Sequence[Mapping[str, Any]] = doc["certifications"]
    else:
        rows = doc["response_time"][table]
    return [
        QosProfile(
            name=r["name"],
            certifications=frozenset(r.get("certifications", ())),
            response_ms=dict(r.get("response_ms", {})),
        )
        for r in rows
    ]
