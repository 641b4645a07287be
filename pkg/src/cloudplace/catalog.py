"""Provider catalog: availability, failure index, pricing and QoS measurements."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from importlib import resources
from pathlib import Path
from typing import Any, Iterator, Mapping

SECONDS_PER_YEAR = 365 * 24 * 3600


class CatalogError(ValueError):
    """Raised for malformed or invalid catalog documents."""


@dataclass(frozen=True)
class PricingSchedule:
    """Graduated price list. The last tier of each list is open-ended."""

    storage_tiers: tuple[tuple[float, float], ...]
    egress_tiers: tuple[tuple[float, float], ...]
    put_price_per_1000_usd: float = 0.0
    get_price_per_10000_usd: float = 0.0

    def __post_init__(self) -> None:
        for label, tiers in (("storage_tiers", self.storage_tiers), ("egress_tiers", self.egress_tiers)):
            if not tiers:
                raise CatalogError(f"{label} must have at least one tier")
            for capacity, price in tiers:
                if capacity <= 0:
                    raise CatalogError(f"{label}: tier capacity must be > 0, got {capacity}")
                if price < 0:
                    raise CatalogError(f"{label}: price must be >= 0, got {price}")
        if self.put_price_per_1000_usd < 0 or self.get_price_per_10000_usd < 0:
            raise CatalogError("request prices must be >= 0")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> PricingSchedule:
        return cls(
            storage_tiers=tuple((float(c), float(p)) for c, p in data["storage_tiers"]),
            egress_tiers=tuple((float(c), float(p)) for c, p in data["egress_tiers"]),
            put_price_per_1000_usd=float(data.get("put_per_1000", 0.0)),
            get_price_per_10000_usd=float(data.get("get_per_10000", 0.0)),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "storage_tiers": [list(t) for t in self.storage_tiers],
            "egress_tiers": [list(t) for t in self.egress_tiers],
            "put_per_1000": self.put_price_per_1000_usd,
            "get_per_10000": self.get_price_per_10000_usd,
        }


def normalize_tag(tag: str) -> str:
    return " ".join(tag.lower().split())


@dataclass(frozen=True)
class Provider:
    id: int
    name: str
    availability_percent: float
    monthly_cost_usd: int
    certifications: frozenset[str] = frozenset()
    response_ms: Mapping[str, float] = field(default_factory=dict)
    pricing: PricingSchedule | None = None

    def __post_init__(self) -> None:
        where = f"provider {self.id} ({self.name})"
        if not 0 < self.availability_percent < 100:
            raise CatalogError(f"{where}: availability_percent must be in (0, 100), got {self.availability_percent}")
        if self.monthly_cost_usd < 0:
            raise CatalogError(f"{where}: monthly_cost_usd must be >= 0")
        for region, ms in self.response_ms.items():
            if ms <= 0:
                raise CatalogError(f"{where}: response_ms[{region!r}] must be > 0")

    @property
    def failure_index(self) -> float:
        return failure_index(self.availability_percent)

    @property
    def log_value(self) -> float:
        return log_value(self.failure_index)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> Provider:
        name = data.get("name", "?")
        try:
            pricing = data.get("pricing")
            return cls(
                id=int(data["id"]),
                name=str(name),
                availability_percent=float(data["availability_percent"]),
                monthly_cost_usd=round_usd(data["monthly_cost_usd"]),
                certifications=frozenset(data.get("certifications", ())),
                response_ms={str(k): float(v) for k, v in data.get("response_ms", {}).items()},
                pricing=PricingSchedule.from_dict(pricing) if pricing else None,
            )
        except KeyError as exc:
            raise CatalogError(f"provider {name!r}: missing field {exc.args[0]!r}") from None
        except CatalogError as exc:
            raise CatalogError(f"provider {data.get('id', '?')} ({name}): {exc}") from None
        except (TypeError, ValueError) as exc:
            raise CatalogError(f"provider {name!r}: {exc}") from None

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "id": self.id,
            "name": self.name,
            "availability_percent": self.availability_percent,
            "certifications": sorted(self.certifications),
            "response_ms": dict(self.response_ms),
            "monthly_cost_usd": self.monthly_cost_usd,
        }
        if self.pricing is not None:
            out["pricing"] = self.pricing.to_dict()
        return out


@dataclass(frozen=True)
class Catalog:
    providers: tuple[Provider, ...]
    source_date: str = ""

    def __post_init__(self) -> None:
        if not self.providers:
            raise CatalogError("catalog must contain ≥1 provider")
        ids = sorted(p.id for p in self.providers)
        if ids != list(range(1, len(ids) + 1)):
            raise CatalogError(f"provider ids must be unique and contiguous from 1, got {ids}")

    def __iter__(self) -> Iterator[Provider]:
        return iter(self.providers)

    def __len__(self) -> int:
        return len(self.providers)

    def by_id(self, provider_id: int) -> Provider:
        for p in self.providers:
            if p.id == provider_id:
                return p
        raise KeyError(f"unknown provider id {provider_id}")

    def to_dict(self) -> dict[str, Any]:
        return {"source_date": self.source_date, "providers": [p.to_dict() for p in self.providers]}


def round_usd(value: Any) -> int:
    """Round a dollar amount half up to an integer."""
    return int(Decimal(str(value)).quantize(Decimal(1), rounding=ROUND_HALF_UP))


def failure_index(availability_percent: float) -> float:
    """100 - availability, computed in decimal so 99.95 gives exactly 0.05."""
    return float(Decimal("100") - Decimal(repr(float(availability_percent))))


def log_value(failure_index: float) -> float:
    if failure_index <= 0:
        raise ValueError(f"failure index must be > 0, got {failure_index}")
    return -math.log10(failure_index)


def availability_to_downtime(availability_percent: float, period_seconds: int = SECONDS_PER_YEAR) -> float:
    """Seconds of downtime over ``period_seconds`` at the given availability."""
    if not 0 < availability_percent <= 100:
        raise ValueError(f"availability must be in (0, 100], got {availability_percent}")
    if period_seconds <= 0:
        raise ValueError("period_seconds must be positive")
    return period_seconds * (100 - availability_percent) / 100


def catalog_from_dict(data: Mapping[str, Any]) -> Catalog:
    if not isinstance(data, Mapping) or "providers" not in data:
        raise CatalogError("catalog document must have a top-level 'providers' array")
    providers = data["providers"]
    if not isinstance(providers, list):
        raise CatalogError("'providers' must be an array")
    return Catalog(
        providers=tuple(Provider.from_dict(p) for p in providers),
        source_date=str(data.get("source_date", "")),
    )


def load_catalog(path: str | Path) -> Catalog:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CatalogError(f"{path}: cannot parse catalog: {exc}") from None
    return catalog_from_dict(data)


def save_catalog(catalog: Catalog, path: str | Path) -> None:
    Path(path).write_text(json.dumps(catalog.to_dict(), indent=2) + "\n", encoding="utf-8")


def data_path(name: str) -> Path:
    """Path to a file shipped in the package ``data`` directory."""
    return Path(str(resources.files("cloudplace") / "data" / name))


def default_catalog() -> Catalog:
    return load_catalog(data_path("catalog_2013.json"))
