"""Race-log records, CSV ingestion, and per-race feature derivation.

The on-disk schema is one row per (car, lap):

    race_id,car_id,lap,rank,lap_time,time_behind_leader,track_status,lap_status

with track_status 1 on caution laps and lap_status 1 on pit laps.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import GapError, IntegrityError, ParseError

CSV_HEADER = ["race_id", "car_id", "lap", "rank", "lap_time",
              "time_behind_leader", "track_status", "lap_status"]

LEADER_SET_SIZE = 5  # "leading cars" = top 5 at the reference lap


@dataclass
class LapRecord:
    race_id: str
    car_id: int
    lap: int
    rank: int
    lap_time: float
    time_behind_leader: float
    track_status: int
    lap_status: int


def _parse_binary(text, line, field):
    if text not in ("0", "1"):
        raise ParseError(f"{field} must be 0 or 1, got {text!r}", line)
    return int(text)


def ingest_csv(path) -> list[LapRecord]:
    """Read and validate a race log; raises ParseError / IntegrityError."""
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file, expected a header row", 1) from None
        if header != CSV_HEADER:
            raise ParseError(f"bad header {header!r}", 1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise ParseError(f"expected {len(CSV_HEADER)} fields, got {len(row)}",
                                 lineno)
            try:
                rec = LapRecord(
                    race_id=row[0],
                    car_id=int(row[1]),
                    lap=int(row[2]),
                    rank=int(row[3]),
                    lap_time=float(row[4]),
                    time_behind_leader=float(row[5]),
                    track_status=_parse_binary(row[6], lineno, "track_status"),
                    lap_status=_parse_binary(row[7], lineno, "lap_status"),
                )
            except ParseError:
                raise
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            if rec.lap < 1 or rec.rank < 1:
                raise ParseError("lap and rank are 1-based positive integers",
                                 lineno)
            if rec.lap_time <= 0.0:
                raise ParseError(f"lap_time must be positive, got {rec.lap_time}",
                                 lineno)
            records.append(rec)
    validate_records(records)
    return records


def write_csv(records, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in records:
            writer.writerow([r.race_id, r.car_id, r.lap, r.rank,
                             repr(r.lap_time), repr(r.time_behind_leader),
                             r.track_status, r.lap_status])


def validate_records(records) -> None:
    """Per (race, lap): ranks form a permutation and the leader has
    time_behind_leader exactly 0."""
    by_lap: dict = {}
    for rec in records:
        by_lap.setdefault((rec.race_id, rec.lap), []).append(rec)
    for (race_id, lap), group in by_lap.items():
        ranks = sorted(r.rank for r in group)
        if ranks != list(range(1, len(group) + 1)):
            raise IntegrityError(
                f"race {race_id} lap {lap}: ranks {ranks} are not a "
                f"permutation of 1..{len(group)}")
        for rec in group:
            if rec.rank == 1 and rec.time_behind_leader != 0.0:
                raise IntegrityError(
                    f"race {race_id} lap {lap}: leader has nonzero "
                    f"time_behind_leader {rec.time_behind_leader}")


@dataclass
class RaceFrame:
    """All per-(car, lap) arrays for one race, cars on rows, laps on columns
    (column l is lap l+1)."""

    race_id: str
    car_ids: np.ndarray       # sorted, shape (n_cars,)
    rank: np.ndarray          # (n_cars, n_laps) float64
    lap_time: np.ndarray
    time_behind: np.ndarray
    track_status: np.ndarray
    lap_status: np.ndarray
    caution_laps: np.ndarray
    pit_age: np.ndarray
    leader_pit_count: np.ndarray      # (n_laps,), race-level
    total_pit_count: np.ndarray       # (n_laps,), race-level
    shift_track_status: np.ndarray    # (n_cars, n_laps), value at lap+k
    shift_lap_status: np.ndarray
    shift_total_pit_count: np.ndarray  # (n_laps,)

    @property
    def n_cars(self):
        return len(self.car_ids)

    @property
    def n_laps(self):
        return self.rank.shape[1]

    def car_row(self, car_id) -> int:
        idx = int(np.searchsorted(self.car_ids, car_id))
        if idx >= len(self.car_ids) or self.car_ids[idx] != car_id:
            raise GapError(f"race {self.race_id}: unknown car {car_id}")
        return idx

    def pit_laps(self) -> np.ndarray:
        """1-based laps where at least one car pits."""
        return np.flatnonzero(self.lap_status.any(axis=0)) + 1


def derive_features(records, k=2, leader_set=LEADER_SET_SIZE) -> dict:
    """Build one RaceFrame per race, with the accumulated 'age' features,
    the race-level pit-count context features, and the +k shift features.

    caution_laps counts caution laps since the previous pit lap and
    resets to 0 on pit laps; pit_age counts laps since the previous pit
    lap (from race start before the first pit) and also resets on pit
    laps. leader_pit_count at lap A counts pitting cars among the top
    ``leader_set`` ranked at lap A-2. Shift features read lap A+k and
    are zero past the end of the race.
    """
    frames = {}
    by_race: dict = {}
    for rec in records:
        by_race.setdefault(rec.race_id, []).append(rec)

    for race_id in sorted(by_race):
        recs = by_race[race_id]
        car_ids = np.array(sorted({r.car_id for r in recs}), dtype=np.int64)
        n_cars = len(car_ids)
        n_laps = max(r.lap for r in recs)
        row_of = {cid: i for i, cid in enumerate(car_ids)}

        shape = (n_cars, n_laps)
        rank = np.full(shape, np.nan)
        lap_time = np.full(shape, np.nan)
        tbl = np.full(shape, np.nan)
        track = np.zeros(shape)
        pit = np.zeros(shape)
        for r in recs:
            i, l = row_of[r.car_id], r.lap - 1
            rank[i, l] = r.rank
            lap_time[i, l] = r.lap_time
            tbl[i, l] = r.time_behind_leader
            track[i, l] = r.track_status
            pit[i, l] = r.lap_status
        if np.isnan(rank).any():
            car = car_ids[np.isnan(rank).any(axis=1)][0]
            missing = int(np.flatnonzero(np.isnan(rank[row_of[car]]))[0]) + 1
            raise GapError(f"race {race_id}: car {car} is missing lap {missing}")

        caution = np.zeros(shape)
        age = np.zeros(shape)
        for l in range(n_laps):
            prev_caution = caution[:, l - 1] if l > 0 else 0.0
            prev_age = age[:, l - 1] if l > 0 else 0.0
            pitting = pit[:, l] == 1.0
            caution[:, l] = np.where(pitting, 0.0, prev_caution + track[:, l])
            age[:, l] = np.where(pitting, 0.0, prev_age + 1.0)

        total_pits = pit.sum(axis=0)
        leader_pits = np.zeros(n_laps)
        for l in range(2, n_laps):
            leaders = rank[:, l - 2] <= leader_set
            leader_pits[l] = float(np.sum(pit[leaders, l]))

        def shifted(arr, fill=0.0):
            out = np.full_like(arr, fill)
            if k < arr.shape[-1]:
                out[..., :arr.shape[-1] - k] = arr[..., k:]
            return out

        frames[race_id] = RaceFrame(
            race_id=race_id,
            car_ids=car_ids,
            rank=rank, lap_time=lap_time, time_behind=tbl,
            track_status=track, lap_status=pit,
            caution_laps=caution, pit_age=age,
            leader_pit_count=leader_pits,
            total_pit_count=total_pits,
            shift_track_status=shifted(track),
            shift_lap_status=shifted(pit),
            shift_total_pit_count=shifted(total_pits),
        )
    return frames


def records_from_frames(frames) -> list[LapRecord]:
    """Inverse of derive_features for round-trip tests and re-serialization."""
    out = []
    for race_id in sorted(frames):
        f = frames[race_id]
        for l in range(f.n_laps):
            for i, cid in enumerate(f.car_ids):
                out.append(LapRecord(
                    race_id=race_id, car_id=int(cid), lap=l + 1,
                    rank=int(f.rank[i, l]), lap_time=float(f.lap_time[i, l]),
                    time_behind_leader=float(f.time_behind[i, l]),
                    track_status=int(f.track_status[i, l]),
                    lap_status=int(f.lap_status[i, l])))
    return out
