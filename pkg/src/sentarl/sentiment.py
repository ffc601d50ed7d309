"""Per-hour sentiment values from headline scores, plus the lagged
correlation-pulse diagnostic.

The heavy sentiment extractor is deliberately out of this package's scope:
any object with a ``score(headline) -> float`` method plugs in, and
precomputed scores carried in the news file take precedence over the
configured scorer. The bundled lexicon is a small baseline stand-in.
"""

from __future__ import annotations

import csv
import enum
import math
import re
from collections import defaultdict
from dataclasses import dataclass
from datetime import datetime
from importlib import resources
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Protocol, Sequence

import numpy as np

from .errors import IngestError

if TYPE_CHECKING:
    from .data import AlignedSeries, HeadlineRecord

_WORD_RE = re.compile(r"[a-z']+")


class SentimentScorer(Protocol):
    """Anything that maps a headline to a score in [-1, 1]."""

    def score(self, headline: str) -> float: ...


class Grouping(enum.Enum):
    """How the scores of all headlines within one hour collapse to e_t."""

    MIN = "min"
    MEAN = "mean"
    MAX = "max"

    @classmethod
    def parse(cls, value: "Grouping | str") -> "Grouping":
        if isinstance(value, Grouping):
            return value
        try:
            return cls(value)
        except ValueError:
            raise ValueError(f"unknown grouping method {value!r}; "
                             f"expected one of {[g.value for g in cls]}") from None


class FillPolicy(enum.Enum):
    """Value given to hours with no news."""

    NEUTRAL_ZERO = "neutral-zero"
    FORWARD_FILL = "forward-fill"

    @classmethod
    def parse(cls, value: "FillPolicy | str") -> "FillPolicy":
        if isinstance(value, FillPolicy):
            return value
        try:
            return cls(value)
        except ValueError:
            raise ValueError(f"unknown fill policy {value!r}; "
                             f"expected one of {[p.value for p in cls]}") from None


def lexicon_score(headline: str, lexicon: dict[str, float]) -> float:
    """Mean weight of lexicon words found in the headline, clamped to
    [-1, 1]; 0.0 when nothing matches."""
    if not lexicon:
        raise ValueError("empty lexicon")
    hits = [lexicon[w] for w in _WORD_RE.findall(headline.lower()) if w in lexicon]
    if not hits:
        return 0.0
    return float(min(1.0, max(-1.0, sum(hits) / len(hits))))


@dataclass(frozen=True)
class LexiconScorer:
    """Deterministic word-polarity scorer backed by a word -> weight map."""

    lexicon: dict[str, float]

    def score(self, headline: str) -> float:
        return lexicon_score(headline, self.lexicon)


def load_lexicon(path: str | Path) -> dict[str, float]:
    """Read a ``word,weight`` CSV with weights in [-1, 1]."""
    path = Path(path)
    if not path.exists():
        raise IngestError(f"{path}: file does not exist")
    lexicon: dict[str, float] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["word", "weight"]:
            raise IngestError(f"{path}:1: bad header, expected word,weight")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise IngestError(f"{path}:{lineno}: expected 2 fields")
            try:
                weight = float(row[1])
            except ValueError:
                raise IngestError(f"{path}:{lineno}: bad weight {row[1]!r}") from None
            if not -1.0 <= weight <= 1.0:
                raise IngestError(f"{path}:{lineno}: weight {weight} outside [-1, 1]")
            lexicon[row[0].strip().lower()] = weight
    if not lexicon:
        raise IngestError(f"{path}: lexicon holds no words")
    return lexicon


def bundled_lexicon() -> dict[str, float]:
    """The small financial polarity list shipped with the package."""
    with resources.as_file(resources.files("sentarl").joinpath("data/lexicon.csv")) as p:
        return load_lexicon(p)


def group_hourly(scores: Iterable[float], method: Grouping | str = Grouping.MIN) -> float:
    """Collapse one hour's scores with the chosen aggregate."""
    method = Grouping.parse(method)
    values = [float(s) for s in scores]
    if not values:
        raise ValueError("empty score set; apply the fill policy instead")
    if method is Grouping.MIN:
        return min(values)
    if method is Grouping.MAX:
        return max(values)
    return sum(values) / len(values)


def score_headlines(
    records: Sequence["HeadlineRecord"],
    scorer: SentimentScorer | None = None,
) -> list[tuple[datetime, float]]:
    """Resolve each record to (timestamp, score); precomputed scores win."""
    out: list[tuple[datetime, float]] = []
    for rec in records:
        if rec.score is not None:
            value = rec.score
        elif scorer is not None:
            value = float(min(1.0, max(-1.0, scorer.score(rec.headline))))
        else:
            raise ValueError(
                f"headline at {rec.timestamp.isoformat()} has no precomputed score "
                "and no scorer is configured")
        out.append((rec.timestamp, value))
    return out


def group_by_hour(
    scored: Iterable[tuple[datetime, float]],
    method: Grouping | str = Grouping.MIN,
) -> list[tuple[datetime, float]]:
    """Bucket scored headlines into their containing hour and aggregate."""
    from .data import truncate_to_hour

    buckets: dict[datetime, list[float]] = defaultdict(list)
    for when, value in scored:
        buckets[truncate_to_hour(when)].append(value)
    return [(hour, group_hourly(vals, method)) for hour, vals in sorted(buckets.items())]


def fill_gaps(
    grouped: Sequence[float | None],
    policy: FillPolicy | str = FillPolicy.NEUTRAL_ZERO,
) -> list[float]:
    """Replace missing hours per the policy; observed hours are untouched.

    neutral-zero writes 0.0; forward-fill repeats the last observed value
    (0.0 before any news has been seen).
    """
    policy = FillPolicy.parse(policy)
    out: list[float] = []
    last = 0.0
    for value in grouped:
        if value is None:
            out.append(last if policy is FillPolicy.FORWARD_FILL else 0.0)
        else:
            out.append(float(value))
            last = float(value)
    return out


def sentiment_window(series: "AlignedSeries", t: int, l: int) -> np.ndarray:
    """Look-back window [e_t, ..., e_{t-l+1}], newest first (0-based t)."""
    if l < 1:
        raise ValueError("window size must be >= 1")
    if t - l + 1 < 0 or t >= len(series):
        raise ValueError(f"insufficient history for window of {l} ending at index {t}")
    return series.sentiment[t - l + 1: t + 1][::-1].copy()


@dataclass
class CorrelationPulse:
    """Pearson correlation of sentiment against shifted price differences.

    ``correlations[i]`` pairs with ``shifts[i]``; None marks an undefined
    value (zero variance on the overlap).
    """

    shifts: list[int]
    correlations: list[float | None]

    def peak(self) -> tuple[int, float]:
        """(shift, value) of the largest defined correlation."""
        defined = [(s, c) for s, c in zip(self.shifts, self.correlations) if c is not None]
        if not defined:
            raise ValueError("pulse has no defined correlations")
        return max(defined, key=lambda sc: sc[1])


def pearson(x: np.ndarray, y: np.ndarray) -> float | None:
    """Population-formula Pearson r, or None when either side is constant."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    xc = x - x.mean()
    yc = y - y.mean()
    denom = math.sqrt(float(np.dot(xc, xc)) * float(np.dot(yc, yc)))
    if denom == 0.0:
        return None
    return float(np.dot(xc, yc) / denom)


def correlation_pulse(
    sentiment: np.ndarray,
    diffs: np.ndarray,
    shifts: Sequence[int] = range(-10, 4),
) -> CorrelationPulse:
    """Correlate sentiment[t] against diffs[t+k] for each shift k.

    Both inputs must be indexed by the same clock; shift 0 pairs equal
    indices, and negative shifts compare sentiment with earlier price
    differences. Each overlap must keep at least 3 points.
    """
    e = np.asarray(sentiment, dtype=np.float64)
    z = np.asarray(diffs, dtype=np.float64)
    correlations: list[float | None] = []
    shift_list = list(shifts)
    for k in shift_list:
        lo = max(0, -k)
        hi = min(len(e) - 1, len(z) - 1 - k)
        if hi - lo + 1 < 3:
            raise ValueError(f"overlap for shift {k} has fewer than 3 points")
        correlations.append(pearson(e[lo:hi + 1], z[lo + k: hi + k + 1]))
    return CorrelationPulse(shift_list, correlations)


def series_pulse(series: "AlignedSeries", shifts: Sequence[int] = range(-10, 4)) -> CorrelationPulse:
    """Pulse for one aligned series.

    The grid's first row has no price difference, so e is taken from index 1
    onward and paired with the diff into the same grid row.
    """
    return correlation_pulse(series.sentiment[1:], series.diffs, shifts)


def write_pulse_csv(pulse: CorrelationPulse, path: str | Path) -> None:
    """Emit ``shift,correlation`` rows; undefined values become empty cells."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["shift", "correlation"])
        for shift, corr in zip(pulse.shifts, pulse.correlations):
            writer.writerow([shift, "" if corr is None else repr(corr)])
