"""Stint segmentation, classification, and pit-predictor training examples.

A stint is the run of laps between two consecutive pit stops of one car.
The opening run (race start to the first pit) counts as a complete stint
once the first pit closes it; the final run with no closing pit is
censored and excluded. A stint is a caution pit if its closing pit falls
on a caution lap; otherwise it splits at 23 laps into short-normal and
long-normal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import RaceFrame
from .errors import DataError

SHORT_NORMAL_MAX = 23
CAUTION_PIT = "caution-pit"
SHORT_NORMAL = "short-normal"
LONG_NORMAL = "long-normal"
CATEGORIES = (CAUTION_PIT, SHORT_NORMAL, LONG_NORMAL)


@dataclass
class StintSummary:
    race_id: str
    car_id: int
    start_lap: int   # first lap of the stint
    close_lap: int   # the pit lap ending the stint
    length: int
    category: str


def segment_stints(frame: RaceFrame) -> list[StintSummary]:
    out = []
    for i, car_id in enumerate(frame.car_ids):
        pit_laps = np.flatnonzero(frame.lap_status[i] == 1.0) + 1
        prev_pit = 0
        for close in pit_laps:
            close = int(close)
            length = close - prev_pit
            if frame.track_status[i, close - 1] == 1.0:
                category = CAUTION_PIT
            elif length <= SHORT_NORMAL_MAX:
                category = SHORT_NORMAL
            else:
                category = LONG_NORMAL
            out.append(StintSummary(frame.race_id, int(car_id), prev_pit + 1,
                                    close, length, category))
            prev_pit = close
    return out


def stint_stats(frames) -> tuple[list[StintSummary], dict]:
    """All complete stints plus a category histogram."""
    stints = []
    for race_id in sorted(frames):
        stints.extend(segment_stints(frames[race_id]))
    histogram = {cat: 0 for cat in CATEGORIES}
    for s in stints:
        histogram[s.category] += 1
    return stints, histogram


@dataclass
class PitExample:
    """One pit-predictor training example.

    Features are measured at the pit lap that opens the stint (where
    both age counters have just reset); the target is the offset in laps
    from that query lap to the closing pit, i.e. the stint length.
    """

    caution_laps: float
    pit_age: float
    offset: float


def pit_training_examples(frames, stints=None) -> list[PitExample]:
    """Long-normal stints only; the opening run from race start is
    skipped because it has no opening pit to anchor the query."""
    if stints is None:
        stints, _ = stint_stats(frames)
    examples = []
    for s in stints:
        if s.category != LONG_NORMAL or s.start_lap == 1:
            continue
        frame = frames[s.race_id]
        row = frame.car_row(s.car_id)
        query_lap = s.start_lap - 1  # the opening pit lap
        examples.append(PitExample(
            caution_laps=float(frame.caution_laps[row, query_lap - 1]),
            pit_age=float(frame.pit_age[row, query_lap - 1]),
            offset=float(s.close_lap - query_lap)))
    return examples


def require_examples(examples) -> list[PitExample]:
    if not examples:
        raise DataError(
            "no long-normal stints (length > 23) available for pit training")
    return examples
