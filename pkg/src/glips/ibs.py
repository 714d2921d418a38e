"""Interpolative binning: map raw metric values onto a 1-5 Likert range.

Each metric ships a table of five published value ranges, one per Likert
category. Rescaling is a two-step process: classify the raw value into a
category, then place it inside that category's fixed score span
(0.0-1.0, 1.1-2.0, 2.1-3.0, 3.1-4.0, 4.1-5.0) by linear interpolation
across the bin's published value range, oriented so the better metric
direction earns the higher score.

Two totalization rules make this well-defined for every finite input:

* Classification gaps between published ranges close downward: each
  bin's upper edge extends to the next bin's published lower edge, and
  the outermost edges extend to +/- infinity.
* Interpolation always uses the published range, clamping the input to
  it, so results never leave the category's score span. Terminal bins
  with an open published side interpolate across a saturation width
  borrowed from the adjacent bin (configurable per table), saturating
  beyond it.

Tables are immutable after load; every operation here is pure and
thread-safe.
"""

from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass
from importlib import resources

from .errors import (
    MalformedBinConfigError,
    MissingLikertSpanError,
    NonFiniteInputError,
    OverlappingBinsError,
    ScoreOutOfRangeError,
    UnknownMetricError,
)

STRONGLY_DISAGREE = "Strongly Disagree"
SOMEWHAT_DISAGREE = "Somewhat Disagree"
NEUTRAL = "Neutral"
SOMEWHAT_AGREE = "Somewhat Agree"
STRONGLY_AGREE = "Strongly Agree"

LIKERT_LABELS = (
    STRONGLY_DISAGREE,
    SOMEWHAT_DISAGREE,
    NEUTRAL,
    SOMEWHAT_AGREE,
    STRONGLY_AGREE,
)

# Fixed Likert score span per category.
SCORE_SPANS = {
    STRONGLY_DISAGREE: (0.0, 1.0),
    SOMEWHAT_DISAGREE: (1.1, 2.0),
    NEUTRAL: (2.1, 3.0),
    SOMEWHAT_AGREE: (3.1, 4.0),
    STRONGLY_AGREE: (4.1, 5.0),
}

ORIENTATIONS = ("higher_is_better", "lower_is_better")


@dataclass(frozen=True)
class Bin:
    """One Likert category of a metric table.

    ``metric_lo``/``metric_hi`` are the half-open classification bounds
    after gap-closing (infinite at the outermost edges); ``interp_lo``/
    ``interp_hi`` bound the interpolation, finite always; ``published_lo``/
    ``published_hi`` keep the raw configured range for reporting.
    """

    label: str
    metric_lo: float
    metric_hi: float
    interp_lo: float
    interp_hi: float
    score_lo: float
    score_hi: float
    published_lo: float | None
    published_hi: float | None


@dataclass(frozen=True)
class BinTable:
    """Five ordered bins tiling the real line for one metric."""

    metric_name: str
    orientation: str
    bins: tuple[Bin, ...]

    def classify(self, x: float) -> Bin:
        """Unique bin whose [metric_lo, metric_hi) interval contains x."""
        if not math.isfinite(x):
            raise NonFiniteInputError(f"cannot classify non-finite value {x!r}")
        for b in self.bins:
            if x < b.metric_hi:
                return b
        return self.bins[-1]

    def score(self, x: float) -> float:
        """Likert score in [0, 5] by interpolation within the classified bin.

        The input is clamped to the bin's interpolation range, so the
        result always lies inside the bin's score span and is monotone
        (non-strictly, because of the clamping) in the direction of the
        table's orientation.
        """
        b = self.classify(x)
        clamped = min(max(x, b.interp_lo), b.interp_hi)
        fraction = (clamped - b.interp_lo) / (b.interp_hi - b.interp_lo)
        if self.orientation == "lower_is_better":
            fraction = 1.0 - fraction
        return b.score_lo + (b.score_hi - b.score_lo) * fraction

    def explain(self, x: float) -> dict:
        """Classification plus both interpolation conventions for one value.

        ``score`` spreads the bin's 0.9-wide score span across the
        published value range (the default everywhere else); the
        ``unit_slope_score`` variant seen in some published worked
        examples advances one full Likert point per bin width and may
        leave the span.
        """
        b = self.classify(x)
        clamped = min(max(x, b.interp_lo), b.interp_hi)
        fraction = (clamped - b.interp_lo) / (b.interp_hi - b.interp_lo)
        if self.orientation == "lower_is_better":
            fraction = 1.0 - fraction
        return {
            "metric": self.metric_name,
            "value": x,
            "label": b.label,
            "published_range": [b.published_lo, b.published_hi],
            "score_span": [b.score_lo, b.score_hi],
            "score": b.score_lo + (b.score_hi - b.score_lo) * fraction,
            "unit_slope_score": b.score_lo + fraction,
        }


def classify(table: BinTable, x: float) -> Bin:
    return table.classify(x)


def ibs_score(table: BinTable, x: float) -> float:
    return table.score(x)


def likert_label(score: float) -> str:
    """Category for a 0-5 Likert score.

    Scores falling in the 0.1-wide gaps between published spans attach
    to the span above (2.04 is Neutral), matching the published
    categorization of human averages.
    """
    if not math.isfinite(score) or not 0.0 <= score <= 5.0:
        raise ScoreOutOfRangeError(f"Likert score must lie in [0, 5], got {score!r}")
    for label in LIKERT_LABELS[:-1]:
        if score <= SCORE_SPANS[label][1]:
            return label
    return STRONGLY_AGREE


def _build_table(name: str, raw: dict) -> BinTable:
    if not isinstance(raw, dict) or "bins" not in raw or "orientation" not in raw:
        raise MalformedBinConfigError(f"{name}: table needs 'orientation' and 'bins'")
    orientation = raw["orientation"]
    if orientation not in ORIENTATIONS:
        raise MalformedBinConfigError(f"{name}: unknown orientation {orientation!r}")
    entries = raw["bins"]
    if len(entries) != len(LIKERT_LABELS):
        raise MissingLikertSpanError(
            f"{name}: expected {len(LIKERT_LABELS)} bins, got {len(entries)}"
        )
    labels = [e.get("label") for e in entries]
    if sorted(labels) != sorted(LIKERT_LABELS):
        raise MissingLikertSpanError(
            f"{name}: bin labels must cover all Likert categories once, got {labels}"
        )
    expected = list(LIKERT_LABELS) if orientation == "higher_is_better" else list(LIKERT_LABELS)[::-1]
    if labels != expected:
        raise MalformedBinConfigError(
            f"{name}: ascending metric order must run {expected} for {orientation}"
        )

    lows = [None if e.get("lo") is None else float(e["lo"]) for e in entries]
    highs = [None if e.get("hi") is None else float(e["hi"]) for e in entries]
    for i in range(len(entries)):
        if lows[i] is None and i != 0:
            raise MalformedBinConfigError(f"{name}: only the lowest bin may omit 'lo'")
        if highs[i] is None and i != len(entries) - 1:
            raise MalformedBinConfigError(f"{name}: only the highest bin may omit 'hi'")
        if lows[i] is not None and highs[i] is not None and not lows[i] < highs[i]:
            raise MalformedBinConfigError(f"{name}: bin {labels[i]!r} needs lo < hi")
    for i in range(len(entries) - 1):
        upper = highs[i] if highs[i] is not None else lows[i]
        if lows[i + 1] < upper:
            raise OverlappingBinsError(
                f"{name}: bins {labels[i]!r} and {labels[i + 1]!r} overlap"
            )

    sat = raw.get("saturation_width")
    if sat is not None and (not isinstance(sat, (int, float)) or sat <= 0):
        raise MalformedBinConfigError(f"{name}: saturation_width must be positive")

    bins = []
    for i, label in enumerate(labels):
        score_lo, score_hi = SCORE_SPANS[label]
        # classification bounds: gaps close downward, outer edges open up
        metric_lo = -math.inf if i == 0 else lows[i]
        metric_hi = math.inf if i == len(entries) - 1 else lows[i + 1]
        # interpolation bounds: published range, synthesizing the open side
        # of terminal bins from the adjacent bin's published width
        interp_lo, interp_hi = lows[i], highs[i]
        if interp_lo is None:
            width = sat if sat is not None else highs[i + 1] - lows[i + 1]
            interp_lo = interp_hi - width
        if interp_hi is None:
            width = sat if sat is not None else highs[i - 1] - lows[i - 1]
            interp_hi = interp_lo + width
        bins.append(
            Bin(
                label=label,
                metric_lo=metric_lo,
                metric_hi=metric_hi,
                interp_lo=interp_lo,
                interp_hi=interp_hi,
                score_lo=score_lo,
                score_hi=score_hi,
                published_lo=lows[i],
                published_hi=highs[i],
            )
        )
    return BinTable(metric_name=name, orientation=orientation, bins=tuple(bins))


def _parse_config(text: str, suffix: str, origin: str) -> dict:
    if suffix == ".toml":
        if sys.version_info >= (3, 11):
            import tomllib as toml_reader
        else:
            import tomli as toml_reader
        try:
            return toml_reader.loads(text)
        except toml_reader.TOMLDecodeError as exc:
            raise MalformedBinConfigError(f"{origin}: invalid TOML: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedBinConfigError(f"{origin}: invalid JSON: {exc}") from exc


def load_bin_tables(path: str | None = None) -> dict[str, BinTable]:
    """Load and validate bin tables; ``None`` loads the shipped defaults.

    Accepts JSON (default) or TOML files mapping metric names to
    ``{"orientation": ..., "bins": [{"label", "lo", "hi"}, ...]}`` with
    bins listed in ascending metric order and ``lo``/``hi`` giving the
    published value range (null opens a terminal side). Custom metrics
    register by simply appearing in the file.
    """
    if path is None:
        text = resources.files("glips.data").joinpath("bin_tables.json").read_text("utf-8")
        suffix, origin = ".json", "shipped bin tables"
    else:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
        suffix = ".toml" if str(path).endswith(".toml") else ".json"
        origin = str(path)
    raw = _parse_config(text, suffix, origin)
    if not isinstance(raw, dict) or not raw:
        raise MalformedBinConfigError(f"{origin}: expected a mapping of metric tables")
    return {name: _build_table(name, table) for name, table in raw.items()}


def get_table(tables: dict[str, BinTable], metric: str) -> BinTable:
    try:
        return tables[metric]
    except KeyError:
        raise UnknownMetricError(
            f"no bin table for metric {metric!r}; available: {sorted(tables)}"
        ) from None
