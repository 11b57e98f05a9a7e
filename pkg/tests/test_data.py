import numpy as np
import pytest

from lapcast.data import (CSV_HEADER, LapRecord, derive_features, ingest_csv,
                          records_from_frames, validate_records, write_csv)
from lapcast.errors import GapError, IntegrityError, ParseError


def make_records(race_id, ranks_by_lap, track=None, pits=None):
    """ranks_by_lap: list over laps of per-car ranks (car i -> rank)."""
    n_cars = len(ranks_by_lap[0])
    track = track or [0] * len(ranks_by_lap)
    pits = pits or [[0] * n_cars for _ in ranks_by_lap]
    records = []
    for l, ranks in enumerate(ranks_by_lap, start=1):
        for car, rank in enumerate(ranks):
            records.append(LapRecord(race_id, car, l, rank, 40.0 + car,
                                     0.0 if rank == 1 else float(rank),
                                     track[l - 1], pits[l - 1][car]))
    return records


class TestCsv:
    def test_empty_file_with_header(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text(",".join(CSV_HEADER) + "\n")
        assert ingest_csv(path) == []

    def test_round_trip(self, tmp_path):
        records = make_records("r1", [[1, 2], [2, 1], [1, 2]])
        path = tmp_path / "data.csv"
        write_csv(records, path)
        assert ingest_csv(path) == records

    def test_duplicate_rank_rejected(self, tmp_path):
        records = make_records("r1", [[1, 1]])
        with pytest.raises(IntegrityError):
            validate_records(records)

    def test_parse_error_carries_line_number(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(",".join(CSV_HEADER) + "\nr1,0,1,1,abc,0,0,0\n")
        with pytest.raises(ParseError, match="line 2"):
            ingest_csv(path)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n")
        with pytest.raises(ParseError):
            ingest_csv(path)

    def test_binary_fields_validated(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(",".join(CSV_HEADER) + "\nr1,0,1,1,40.0,0,2,0\n")
        with pytest.raises(ParseError):
            ingest_csv(path)

    def test_nonzero_leader_gap_rejected(self):
        records = make_records("r1", [[1, 2]])
        records[0].time_behind_leader = 0.5
        with pytest.raises(IntegrityError):
            validate_records(records)


class TestDeriveFeatures:
    def test_pit_age_reset_rule(self):
        # lap_status [0,0,1,0,0] -> pit_age [1,2,0,1,2]
        pits = [[0, 0], [0, 0], [1, 0], [0, 0], [0, 0]]
        records = make_records("r1", [[1, 2]] * 5, pits=pits)
        frame = derive_features(records)["r1"]
        assert list(frame.pit_age[0]) == [1, 2, 0, 1, 2]
        assert list(frame.pit_age[1]) == [1, 2, 3, 4, 5]

    def test_caution_accumulation(self):
        # track [0,1,1,0], no pits -> caution_laps [0,1,2,2]
        records = make_records("r1", [[1, 2]] * 4, track=[0, 1, 1, 0])
        frame = derive_features(records)["r1"]
        assert list(frame.caution_laps[0]) == [0, 1, 2, 2]

    def test_caution_resets_at_pit(self):
        pits = [[0, 0], [0, 0], [1, 0], [0, 0]]
        records = make_records("r1", [[1, 2]] * 4, track=[1, 1, 1, 1],
                               pits=pits)
        frame = derive_features(records)["r1"]
        assert list(frame.caution_laps[0]) == [1, 2, 0, 1]

    def test_all_zero_statuses(self):
        records = make_records("r1", [[1, 2]] * 6)
        frame = derive_features(records)["r1"]
        assert list(frame.pit_age[0]) == [1, 2, 3, 4, 5, 6]
        assert np.all(frame.caution_laps == 0)
        assert np.all(frame.total_pit_count == 0)

    def test_total_and_leader_pit_counts(self):
        # 6 cars; car ranked 1 at lap 1 pits at lap 3, back-marker too
        n = 6
        ranks = [list(range(1, n + 1))] * 5
        pits = [[0] * n for _ in range(5)]
        pits[2][0] = 1   # rank 1 at lap 1 (top five)
        pits[2][5] = 1   # rank 6 at lap 1 (not a leader)
        records = make_records("r1", ranks, pits=pits)
        frame = derive_features(records)["r1"]
        assert frame.total_pit_count[2] == 2.0
        assert frame.leader_pit_count[2] == 1.0
        assert frame.leader_pit_count[0] == 0.0  # no lap A-2 yet

    def test_shift_features_read_lap_plus_k(self):
        pits = [[0, 0], [0, 0], [0, 0], [1, 0], [0, 0]]
        records = make_records("r1", [[1, 2]] * 5, track=[0, 0, 0, 0, 1],
                               pits=pits)
        frame = derive_features(records, k=2)["r1"]
        assert frame.shift_lap_status[0, 1] == 1.0   # lap 2 sees pit at lap 4
        assert frame.shift_track_status[0, 2] == 1.0  # lap 3 sees caution lap 5
        assert frame.shift_lap_status[0, 4] == 0.0   # padded past race end
        assert frame.shift_total_pit_count[1] == 1.0

    def test_missing_lap_raises_gap_error(self):
        records = make_records("r1", [[1, 2]] * 3)
        records = [r for r in records if not (r.car_id == 1 and r.lap == 2)]
        # removing one car's lap breaks the rank permutation as well, so
        # patch the other car's rank to keep lap 2 a valid 1..1 permutation
        for r in records:
            if r.lap == 2:
                r.rank = 1
                r.time_behind_leader = 0.0
        with pytest.raises(GapError):
            derive_features(records)

    def test_round_trip_via_frames(self):
        records = make_records("r1", [[1, 2], [2, 1]], track=[0, 1],
                               pits=[[0, 1], [0, 0]])
        frames = derive_features(records)
        assert records_from_frames(frames) == records
