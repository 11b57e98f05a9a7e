import numpy as np
import pytest

from lapcast.data import derive_features
from lapcast.errors import DataError
from lapcast.stints import (CAUTION_PIT, LONG_NORMAL, SHORT_NORMAL,
                            pit_training_examples, require_examples,
                            segment_stints, stint_stats)
from tests.test_data import make_records


def frame_with_pits(n_laps, pit_laps, track_laps=()):
    pits = [[1 if (l in pit_laps) else 0, 0] for l in range(1, n_laps + 1)]
    track = [1 if l in track_laps else 0 for l in range(1, n_laps + 1)]
    records = make_records("r1", [[1, 2]] * n_laps, track=track, pits=pits)
    return derive_features(records)["r1"]


class TestSegmentation:
    def test_hand_segmentation_with_censored_tail(self):
        frame = frame_with_pits(90, {30, 60})
        stints = [s for s in segment_stints(frame) if s.car_id == 0]
        assert [(s.start_lap, s.close_lap, s.length) for s in stints] == [
            (1, 30, 30), (31, 60, 30)]  # laps 61-90 censored, excluded

    def test_no_pits_no_stints(self):
        frame = frame_with_pits(50, set())
        assert segment_stints(frame) == []

    def test_caution_pit_category(self):
        frame = frame_with_pits(60, {30}, track_laps={30})
        stints = segment_stints(frame)
        assert stints[0].category == CAUTION_PIT

    def test_length_threshold_categories(self):
        frame = frame_with_pits(80, {23, 47})
        stints = [s for s in segment_stints(frame) if s.car_id == 0]
        assert stints[0].length == 23
        assert stints[0].category == SHORT_NORMAL
        assert stints[1].length == 24
        assert stints[1].category == LONG_NORMAL

    def test_histogram(self):
        frame = frame_with_pits(80, {20, 50}, track_laps={20})
        _, hist = stint_stats({"r1": frame})
        assert hist[CAUTION_PIT] == 1
        assert hist[LONG_NORMAL] == 1
        assert hist[SHORT_NORMAL] == 0


class TestPitExamples:
    def test_examples_from_pit_opened_long_stints_only(self):
        frame = frame_with_pits(90, {30, 60, 70})
        examples = pit_training_examples({"r1": frame})
        # stint 31..60 long-normal, opened by the pit at 30; 61..70 is short
        assert len(examples) == 1
        assert examples[0].offset == 30.0
        assert examples[0].pit_age == 0.0
        assert examples[0].caution_laps == 0.0

    def test_race_start_stint_skipped(self):
        frame = frame_with_pits(60, {40})
        assert pit_training_examples({"r1": frame}) == []

    def test_short_only_dataset_raises(self):
        frame = frame_with_pits(60, {10, 20, 30, 40})
        with pytest.raises(DataError):
            require_examples(pit_training_examples({"r1": frame}))
