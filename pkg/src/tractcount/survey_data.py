"""Domain types and CSV ingestion for tract-level street count data.

All input files are UTF-8, comma-delimited CSVs with a required header row:

  tracts.csv       tract_id, stratum_id, latitude, longitude, area_km2, status,
                   street_count (empty = not observed), median_income, pct_vacant,
                   pct_residential, pct_industrial, pct_owner_occupied, pct_minority
  shelters.csv     stratum_id, count
  city_shares.csv  tract_id, city_id, share

Loaded tables are immutable and safe to share across threads. Counts are
integers; every derived statistic downstream is real-valued.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping

# Tract statuses.
CERTAINTY = "certainty"
SAMPLED = "sampled"
UNSAMPLED = "unsampled"
OUT_OF_FRAME = "out_of_frame"
STATUSES = (CERTAINTY, SAMPLED, UNSAMPLED, OUT_OF_FRAME)

# Ambiguity policies for a missing count on a surveyed tract.
DROP_AMBIGUOUS = "drop_ambiguous"
TREAT_AS_ZERO = "treat_as_zero"
AMBIGUITY_POLICIES = (DROP_AMBIGUOUS, TREAT_AS_ZERO)

# Count resolutions.
OBSERVED = "observed"
AMBIGUOUS_DROPPED = "ambiguous_dropped"

COVARIATE_NAMES = (
    "median_income",
    "pct_vacant",
    "pct_residential",
    "pct_industrial",
    "pct_owner_occupied",
    "pct_minority",
)
FRACTION_COVARIATES = COVARIATE_NAMES[1:]

TRACT_COLUMNS = (
    "tract_id",
    "stratum_id",
    "latitude",
    "longitude",
    "area_km2",
    "status",
    "street_count",
) + COVARIATE_NAMES

SHELTER_COLUMNS = ("stratum_id", "count")
CITY_SHARE_COLUMNS = ("tract_id", "city_id", "share")

SHARE_SUM_TOLERANCE = 1e-9


class ValidationError(ValueError):
    """An input file violates the documented schema or a data invariant."""


@dataclass(frozen=True)
class CountStatus:
    """Resolution of a raw street-count cell on a surveyed tract."""

    raw_value: int | None
    resolution: str  # OBSERVED or AMBIGUOUS_DROPPED

    @property
    def count(self) -> int | None:
        """The usable count: None when the tract was dropped as ambiguous."""
        if self.resolution == AMBIGUOUS_DROPPED:
            return None
        return self.raw_value if self.raw_value is not None else 0


def resolve_count_status(raw: int | None, policy: str = DROP_AMBIGUOUS) -> CountStatus:
    """Resolve a raw count cell under the given ambiguity policy.

    A missing cell on a surveyed tract is either dropped from all
    sample-based computation (drop_ambiguous, the default) or read as a
    zero count (treat_as_zero, for sensitivity analysis).
    """
    if policy not in AMBIGUITY_POLICIES:
        raise ValueError(f"unknown ambiguity policy {policy!r}")
    if raw is None:
        if policy == DROP_AMBIGUOUS:
            return CountStatus(raw_value=None, resolution=AMBIGUOUS_DROPPED)
        return CountStatus(raw_value=None, resolution=OBSERVED)
    if raw < 0:
        raise ValueError(f"street count must be non-negative, got {raw}")
    return CountStatus(raw_value=int(raw), resolution=OBSERVED)


@dataclass(frozen=True)
class Tract:
    """One census-tract record: geometry, covariates, and survey state.

    ``count_status`` is set only for surveyed tracts (certainty or sampled);
    the usable count is exposed as ``street_count``, which is None both for
    never-surveyed tracts and for surveyed tracts dropped as ambiguous.
    """

    tract_id: str
    stratum_id: str
    latitude: float
    longitude: float
    area_km2: float
    status: str
    covariates: Mapping[str, float]
    count_status: CountStatus | None = None

    @property
    def street_count(self) -> int | None:
        if self.count_status is None:
            return None
        return self.count_status.count

    @property
    def observed(self) -> bool:
        """True when this tract carries a usable observed count."""
        return self.street_count is not None

    def predictor(self, name: str) -> float:
        """Value of a named predictor (a covariate, or latitude/longitude)."""
        if name == "latitude":
            return self.latitude
        if name == "longitude":
            return self.longitude
        try:
            return self.covariates[name]
        except KeyError:
            raise KeyError(f"tract {self.tract_id} has no covariate {name!r}") from None


@dataclass(frozen=True)
class ShelterCount:
    stratum_id: str
    count: int


@dataclass(frozen=True)
class CityShare:
    tract_id: str
    city_id: str
    share: float


class TractTable:
    """Immutable collection of tracts with unique ids."""

    def __init__(self, tracts: Iterable[Tract]):
        rows = tuple(tracts)
        index: dict[str, Tract] = {}
        for t in rows:
            if t.tract_id in index:
                raise ValidationError(f"duplicate tract_id {t.tract_id!r}")
            index[t.tract_id] = t
        self._rows = rows
        self._index = index

    def __len__(self) -> int:
        return len(self._rows)

    def __iter__(self) -> Iterator[Tract]:
        return iter(self._rows)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TractTable):
            return NotImplemented
        return self._rows == other._rows

    def __getitem__(self, tract_id: str) -> Tract:
        return self._index[tract_id]

    def __contains__(self, tract_id: str) -> bool:
        return tract_id in self._index

    def by_status(self, *statuses: str) -> list[Tract]:
        wanted = set(statuses)
        return [t for t in self._rows if t.status in wanted]

    def observed_tracts(self) -> list[Tract]:
        """Surveyed tracts with usable counts (ambiguous drops excluded)."""
        return [t for t in self._rows if t.observed]

    def strata(self) -> list[str]:
        return sorted({t.stratum_id for t in self._rows})

    def with_observations(self, counts: Mapping[str, int]) -> "TractTable":
        """Return a copy where the given unsampled tracts become sampled
        with the given observed counts (simulated field work)."""
        rows = []
        for t in self._rows:
            if t.tract_id in counts:
                if t.status != UNSAMPLED:
                    raise ValueError(
                        f"tract {t.tract_id} has status {t.status}; only unsampled "
                        "tracts can receive new observations"
                    )
                rows.append(
                    Tract(
                        tract_id=t.tract_id,
                        stratum_id=t.stratum_id,
                        latitude=t.latitude,
                        longitude=t.longitude,
                        area_km2=t.area_km2,
                        status=SAMPLED,
                        covariates=t.covariates,
                        count_status=resolve_count_status(counts[t.tract_id]),
                    )
                )
            else:
                rows.append(t)
        return TractTable(rows)


def _open_reader(path: str | Path, expected_columns: tuple[str, ...]) -> tuple[list[dict], str]:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file, header row required") from None
        if tuple(header) != expected_columns:
            missing = [c for c in expected_columns if c not in header]
            if missing:
                raise ValidationError(f"{path}: missing required column(s) {missing}")
            raise ValidationError(
                f"{path}: header {header} does not match expected {list(expected_columns)}"
            )
        records = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected_columns):
                raise ValidationError(f"{path}:{lineno}: expected {len(expected_columns)} fields, got {len(row)}")
            records.append({"_line": lineno, **dict(zip(expected_columns, row))})
    return records, str(path)


def _parse_float(rec: dict, col: str, src: str) -> float:
    raw = rec[col]
    try:
        value = float(raw)
    except ValueError:
        raise ValidationError(f"{src}:{rec['_line']}: column {col}: not a number: {raw!r}") from None
    if not math.isfinite(value):
        raise ValidationError(f"{src}:{rec['_line']}: column {col}: non-finite value {raw!r}")
    return value


def _parse_count(rec: dict, col: str, src: str) -> int | None:
    raw = rec[col].strip()
    if raw == "":
        return None
    try:
        value = int(raw)
    except ValueError:
        raise ValidationError(f"{src}:{rec['_line']}: column {col}: not an integer: {raw!r}") from None
    if value < 0:
        raise ValidationError(f"{src}:{rec['_line']}: column {col}: negative count {value}")
    return value


def load_tracts(path: str | Path, ambiguity_policy: str = DROP_AMBIGUOUS) -> TractTable:
    """Load and validate tracts.csv.

    Counts are required to be absent on unsampled and out-of-frame tracts.
    A missing count on a surveyed tract is resolved via ``ambiguity_policy``.
    Raises ValidationError naming the offending line and column.
    """
    records, src = _open_reader(path, TRACT_COLUMNS)
    tracts = []
    seen: dict[str, int] = {}
    for rec in records:
        line = rec["_line"]
        tract_id = rec["tract_id"].strip()
        if not tract_id:
            raise ValidationError(f"{src}:{line}: empty tract_id")
        if tract_id in seen:
            raise ValidationError(
                f"{src}:{line}: duplicate tract_id {tract_id!r} (first seen on line {seen[tract_id]})"
            )
        seen[tract_id] = line
        stratum_id = rec["stratum_id"].strip()
        if not stratum_id:
            raise ValidationError(f"{src}:{line}: empty stratum_id")
        status = rec["status"].strip()
        if status not in STATUSES:
            raise ValidationError(f"{src}:{line}: column status: unknown status {status!r}")
        area = _parse_float(rec, "area_km2", src)
        if area <= 0:
            raise ValidationError(f"{src}:{line}: column area_km2: must be > 0, got {area}")
        covariates = {}
        for name in COVARIATE_NAMES:
            value = _parse_float(rec, name, src)
            if name in FRACTION_COVARIATES and not 0.0 <= value <= 1.0:
                raise ValidationError(
                    f"{src}:{line}: column {name}: fraction outside [0, 1]: {value}"
                )
            covariates[name] = value
        raw_count = _parse_count(rec, "street_count", src)
        if status in (CERTAINTY, SAMPLED):
            count_status = resolve_count_status(raw_count, ambiguity_policy)
        else:
            if raw_count is not None:
                raise ValidationError(
                    f"{src}:{line}: column street_count: count present on {status} tract {tract_id!r}"
                )
            count_status = None
        tracts.append(
            Tract(
                tract_id=tract_id,
                stratum_id=stratum_id,
                latitude=_parse_float(rec, "latitude", src),
                longitude=_parse_float(rec, "longitude", src),
                area_km2=area,
                status=status,
                covariates=covariates,
                count_status=count_status,
            )
        )
    return TractTable(tracts)


def write_tracts(table: TractTable, path: str | Path) -> None:
    """Serialize a table back to the tracts.csv schema (round-trip stable)."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACT_COLUMNS)
        for t in table:
            raw = "" if t.count_status is None or t.count_status.raw_value is None else t.count_status.raw_value
            writer.writerow(
                [
                    t.tract_id,
                    t.stratum_id,
                    repr(t.latitude),
                    repr(t.longitude),
                    repr(t.area_km2),
                    t.status,
                    raw,
                ]
                + [repr(t.covariates[name]) for name in COVARIATE_NAMES]
            )


def load_shelters(path: str | Path) -> list[ShelterCount]:
    """Load shelters.csv: at most one non-negative count per stratum."""
    records, src = _open_reader(path, SHELTER_COLUMNS)
    shelters = []
    seen: dict[str, int] = {}
    for rec in records:
        line = rec["_line"]
        stratum_id = rec["stratum_id"].strip()
        if not stratum_id:
            raise ValidationError(f"{src}:{line}: empty stratum_id")
        if stratum_id in seen:
            raise ValidationError(
                f"{src}:{line}: duplicate stratum {stratum_id!r} (first seen on line {seen[stratum_id]})"
            )
        seen[stratum_id] = line
        count = _parse_count(rec, "count", src)
        if count is None:
            raise ValidationError(f"{src}:{line}: column count: empty count")
        shelters.append(ShelterCount(stratum_id=stratum_id, count=count))
    return shelters


def write_shelters(shelters: Iterable[ShelterCount], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SHELTER_COLUMNS)
        for s in shelters:
            writer.writerow([s.stratum_id, s.count])


def load_city_shares(path: str | Path) -> list[CityShare]:
    """Load city_shares.csv; per-tract shares must sum to at most 1."""
    records, src = _open_reader(path, CITY_SHARE_COLUMNS)
    shares = []
    sums: dict[str, float] = {}
    for rec in records:
        line = rec["_line"]
        tract_id = rec["tract_id"].strip()
        city_id = rec["city_id"].strip()
        if not tract_id or not city_id:
            raise ValidationError(f"{src}:{line}: empty tract_id or city_id")
        share = _parse_float(rec, "share", src)
        if not 0.0 < share <= 1.0:
            raise ValidationError(f"{src}:{line}: column share: must be in (0, 1], got {share}")
        sums[tract_id] = sums.get(tract_id, 0.0) + share
        if sums[tract_id] > 1.0 + SHARE_SUM_TOLERANCE:
            raise ValidationError(
                f"{src}:{line}: shares for tract {tract_id!r} sum to {sums[tract_id]}, exceeding 1"
            )
        shares.append(CityShare(tract_id=tract_id, city_id=city_id, share=share))
    return shares


def write_city_shares(shares: Iterable[CityShare], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CITY_SHARE_COLUMNS)
        for s in shares:
            writer.writerow([s.tract_id, s.city_id, repr(s.share)])
