"""Panel records, CSV readers and composable data filters."""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

PANEL_HEADER = ("entity_id", "period", "size_value", "wage_value", "sector")
ACADEMIC_HEADER = ("university", "period", "usnews_rank", "median_wage_rank")

# coarse letter scale, best first
RATING_SCALE = (
    "AAA", "AA+", "AA", "AA-", "A+", "A", "A-", "BBB+", "BBB", "BBB-",
    "BB+", "BB", "BB-", "B+", "B", "B-", "CCC+", "CCC", "CCC-", "CC", "C", "D",
)


class DataError(ValueError):
    """Malformed or inconsistent panel data."""


@dataclass(frozen=True)
class PanelRecord:
    entity_id: str
    period: int
    size_value: float
    wage_value: float
    sector: str = ""


@dataclass(frozen=True)
class Panel:
    """Validated collection of records with one row per (entity, period).

    ``size_higher_better`` / ``wage_higher_better`` give the direction of
    desirability: sales and wages are better when larger, league-table and
    wage ranks when smaller.
    """

    records: tuple
    size_higher_better: bool = True
    wage_higher_better: bool = True

    def __post_init__(self):
        seen = set()
        for r in self.records:
            k = (r.entity_id, r.period)
            if k in seen:
                raise DataError(f"duplicate record for entity {r.entity_id!r} in period {r.period}")
            seen.add(k)
        ordered = tuple(sorted(self.records, key=lambda r: (r.sector, r.entity_id, r.period)))
        object.__setattr__(self, "records", ordered)

    def __len__(self):
        return len(self.records)

    @property
    def periods(self) -> list:
        return sorted({r.period for r in self.records})

    @property
    def sectors(self) -> list:
        return sorted({r.sector for r in self.records})

    @property
    def entities(self) -> list:
        return sorted({r.entity_id for r in self.records})

    def _replace(self, records) -> "Panel":
        return Panel(tuple(records), self.size_higher_better, self.wage_higher_better)

    def filter(self, *predicates: Callable[[PanelRecord], bool]) -> "Panel":
        return self._replace(r for r in self.records if all(p(r) for p in predicates))

    def sector(self, name: str) -> "Panel":
        return self.filter(lambda r: r.sector == name)

    def window(self, first: int, last: int) -> "Panel":
        return self.filter(lambda r: first <= r.period <= last)

    def by_sector(self) -> dict:
        return {s: self.sector(s) for s in self.sectors}

    def complete_entities(self, periods: Iterable[int]) -> "Panel":
        """Keep entities observed in every one of ``periods`` (restricted to them)."""
        periods = set(periods)
        have = defaultdict(set)
        for r in self.records:
            if r.period in periods:
                have[r.entity_id].add(r.period)
        keep = {e for e, ps in have.items() if ps == periods}
        return self._replace(r for r in self.records if r.entity_id in keep and r.period in periods)

    def values(self, column: str) -> np.ndarray:
        return np.array([getattr(r, column) for r in self.records], dtype=float)


def _parse_float(text, what, line):
    try:
        v = float(text)
    except (TypeError, ValueError):
        raise DataError(f"line {line}: {what} {text!r} is not a number") from None
    return v


def _parse_int(text, what, line):
    try:
        return int(text)
    except (TypeError, ValueError):
        raise DataError(f"line {line}: {what} {text!r} is not an integer") from None


def _rows(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = tuple(h.strip() for h in (reader.fieldnames or ()))
        rows = [({k.strip(): (v.strip() if isinstance(v, str) else v) for k, v in row.items()}, i + 2)
                for i, row in enumerate(reader)]
    return header, rows


def read_panel(path, missing: str = "drop") -> Panel:
    """Read ``entity_id,period,size_value,wage_value,sector`` rows.

    Empty size or wage cells are dropped (``missing="drop"``) or raise
    (``missing="error"``).
    """
    header, rows = _rows(path)
    if set(PANEL_HEADER) - set(header):
        if set(ACADEMIC_HEADER) <= set(header):
            return read_academic_panel(path, missing=missing)
        raise DataError(f"{path}: header must contain {','.join(PANEL_HEADER)}")
    out = []
    for row, line in rows:
        if row["size_value"] in ("", None) or row["wage_value"] in ("", None):
            if missing == "error":
                raise DataError(f"line {line}: missing value")
            continue
        out.append(PanelRecord(
            entity_id=row["entity_id"],
            period=_parse_int(row["period"], "period", line),
            size_value=_parse_float(row["size_value"], "size_value", line),
            wage_value=_parse_float(row["wage_value"], "wage_value", line),
            sector=row["sector"] or "",
        ))
    return Panel(tuple(out))


def read_academic_panel(path, sector: str = "academic", missing: str = "drop") -> Panel:
    """Read ``university,period,usnews_rank,median_wage_rank`` rows.

    Both columns are ranks, so smaller is better.
    """
    header, rows = _rows(path)
    if set(ACADEMIC_HEADER) - set(header):
        raise DataError(f"{path}: header must contain {','.join(ACADEMIC_HEADER)}")
    out = []
    for row, line in rows:
        if row["usnews_rank"] in ("", None) or row["median_wage_rank"] in ("", None):
            if missing == "error":
                raise DataError(f"line {line}: missing value")
            continue
        out.append(PanelRecord(
            entity_id=row["university"],
            period=_parse_int(row["period"], "period", line),
            size_value=_parse_float(row["usnews_rank"], "usnews_rank", line),
            wage_value=_parse_float(row["median_wage_rank"], "median_wage_rank", line),
            sector=row.get("sector") or sector,
        ))
    return Panel(tuple(out), size_higher_better=False, wage_higher_better=False)


def write_panel(path, panel: Panel) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PANEL_HEADER)
        for r in panel.records:
            w.writerow([r.entity_id, r.period, repr(float(r.size_value)), repr(float(r.wage_value)), r.sector])


def mean_wages(observations) -> dict:
    """Representative wage per ``(entity, period)``: mean of the listed executives' pay.

    ``observations`` yields ``(entity_id, period, compensation)``.
    """
    acc = defaultdict(list)
    for entity, period, pay in observations:
        acc[(entity, int(period))].append(float(pay))
    return {k: float(np.mean(v)) for k, v in sorted(acc.items())}


def median_wage_ranks(observations) -> dict:
    """Median wage rank per ``(university, period)``.

    ``observations`` yields ``(university, period, job_title, wage)``. Within
    each (period, job title) all wages are ranked, 1 for the highest, ties
    sharing the mid-rank. Each university-period then takes the lower median
    of its ranks.
    """
    from scipy.stats import rankdata

    groups = defaultdict(list)
    for uni, period, title, wage in observations:
        groups[(int(period), title)].append((uni, float(wage)))
    ranks = defaultdict(list)
    for (period, _), obs in sorted(groups.items()):
        r = rankdata([-w for _, w in obs], method="average")
        for (uni, _), rk in zip(obs, r):
            ranks[(uni, period)].append(float(rk))
    out = {}
    for k, v in sorted(ranks.items()):
        v = sorted(v)
        out[k] = v[(len(v) - 1) // 2]
    return out


def has_size(record: PanelRecord) -> bool:
    """Missing-sales screen: finite, positive size value."""
    return bool(np.isfinite(record.size_value) and record.size_value > 0)


def rating_screen(ratings: dict, worst_allowed: str = "B-") -> Callable[[PanelRecord], bool]:
    """Predicate keeping entities rated ``worst_allowed`` or better.

    ``ratings`` maps ``entity_id`` (or ``(entity_id, period)``) to a letter
    rating; unrated entities are removed.
    """
    if worst_allowed not in RATING_SCALE:
        raise ValueError(f"unknown rating {worst_allowed!r}")
    cut = RATING_SCALE.index(worst_allowed)

    def keep(record: PanelRecord) -> bool:
        r = ratings.get((record.entity_id, record.period), ratings.get(record.entity_id))
        return r in RATING_SCALE and RATING_SCALE.index(r) <= cut

    return keep
