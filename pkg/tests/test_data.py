"""
Tests for event-log parsing, splitting, batching and synthetic data.
"""

import numpy as np
import pytest

from sin_coevolve.data import chrono_split, chunk_events, interval_partition, parse, synth_generate, write
from sin_coevolve.errors import ConfigError, DataFormatError
from test_data.sample_interactions import (
    SAMPLE_EVENT_LOG,
    UNSORTED_EVENT_LOG,
    create_event_log,
    create_tiny_dataset,
)


class TestParse:
    """Test suite for event-log parsing."""

    def test_parse_sample(self, tmp_path):
        ds = parse(create_event_log(tmp_path))
        assert ds.n_events == 6
        assert ds.n_users == 3
        assert ds.n_items == 3
        assert ds.feature_dim == 2
        assert list(ds.user_ids) == ["u1", "u2", "u3"]
        assert ds.users.tolist() == [0, 1, 0, 2, 1, 2]
        assert ds.features[0].tolist() == [0.1, 0.2]

    def test_event_view(self, tmp_path):
        event = parse(create_event_log(tmp_path)).event(3)
        assert event.user == 2
        assert event.item == 2
        assert event.t == 3.0
        assert event.features == [0.7, 0.8]

    def test_numeric_ids_sorted(self, tmp_path):
        ds = parse(create_event_log(tmp_path, UNSORTED_EVENT_LOG))
        assert ds.timestamps.tolist() == [1.0, 3.0, 5.0]
        assert list(ds.user_ids) == [1, 2]
        assert ds.users.tolist() == [1, 0, 0]
        assert ds.feature_dim == 0

    def test_without_label_column(self, tmp_path):
        text = "user,item,t,x\na,b,0.5,1.5\nc,b,1.0,2.5\n"
        ds = parse(create_event_log(tmp_path, text))
        assert ds.feature_dim == 1
        assert ds.features[:, 0].tolist() == [1.5, 2.5]

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataFormatError) as exc_info:
            parse(tmp_path / "missing.csv")
        assert exc_info.value.code == "FILE_NOT_FOUND"

    def test_no_events(self, tmp_path):
        with pytest.raises(DataFormatError) as exc_info:
            parse(create_event_log(tmp_path, "user_id,item_id,timestamp,state_label\n"))
        assert exc_info.value.message == "no events"

    def test_width_mismatch_reports_line(self, tmp_path):
        text = SAMPLE_EVENT_LOG + "u1,i1,6.0,0,0.5\n"
        with pytest.raises(DataFormatError) as exc_info:
            parse(create_event_log(tmp_path, text))
        assert exc_info.value.details["line"] == 8
        assert exc_info.value.exit_code == 2

    def test_malformed_timestamp(self, tmp_path):
        text = "user_id,item_id,timestamp,state_label\n1,2,0.0,0\n1,3,soon,0\n"
        with pytest.raises(DataFormatError) as exc_info:
            parse(create_event_log(tmp_path, text))
        assert exc_info.value.code == "MALFORMED_ROW"
        assert exc_info.value.details["line"] == 3

    def test_negative_timestamp(self, tmp_path):
        text = "user_id,item_id,timestamp,state_label\n1,2,-1.0,0\n"
        with pytest.raises(DataFormatError):
            parse(create_event_log(tmp_path, text))

    def test_invalid_utf8(self, tmp_path):
        path = tmp_path / "events.csv"
        path.write_bytes(b"user_id,item_id,timestamp\n\xff,i1,0.0\n")
        with pytest.raises(DataFormatError) as exc_info:
            parse(path)
        assert exc_info.value.code == "INVALID_ENCODING"
        assert exc_info.value.details["path"] == str(path)
        assert exc_info.value.exit_code == 2

    def test_write_then_parse(self, tmp_path):
        ds = parse(create_event_log(tmp_path))
        again = parse(write(ds, tmp_path / "copy.csv"))
        assert again.users.tolist() == ds.users.tolist()
        assert list(again.item_ids) == list(ds.item_ids)
        assert np.allclose(again.features, ds.features)


class TestSplitting:
    """Test suite for chronological splits and interval batches."""

    def setup_method(self):
        """Set up test fixtures."""
        self.ds = create_tiny_dataset()

    def test_chrono_split_sizes(self):
        train, valid, test = chrono_split(synth_generate(n_events=100, seed=1))
        assert (train.n_events, valid.n_events, test.n_events) == (80, 10, 10)
        assert train.timestamps[-1] <= valid.timestamps[0] <= test.timestamps[0]

    def test_chrono_split_too_small(self):
        with pytest.raises(DataFormatError):
            chrono_split(self.ds.slice(0, 2))

    def test_chrono_split_fractions(self):
        with pytest.raises(ConfigError):
            chrono_split(self.ds, (0.5, 0.5, 0.5))

    def test_interval_partition(self):
        batches = interval_partition(self.ds, 5)
        assert [b.n_events for b in batches] == [2, 2, 2, 2, 4]
        assert sum(b.n_events for b in batches) == self.ds.n_events
        for first, second in zip(batches, batches[1:]):
            assert first.t_end <= second.t_start
            assert first.stop == second.start

    def test_interval_partition_caps_count(self):
        assert len(interval_partition(self.ds, 100)) == self.ds.n_events

    def test_interval_partition_validates(self):
        with pytest.raises(ConfigError):
            interval_partition(self.ds, 0)

    def test_chunk_events(self):
        chunks = chunk_events(self.ds, 5, first_index=7)
        assert [c.n_events for c in chunks] == [5, 5, 2]
        assert [c.index for c in chunks] == [7, 8, 9]

    def test_fingerprint_tracks_content(self):
        a, b = interval_partition(self.ds, 2)
        assert a.fingerprint() != b.fingerprint()
        assert a.fingerprint() == interval_partition(self.ds, 2)[0].fingerprint()

    def test_mean_gap(self):
        assert self.ds.mean_gap() == pytest.approx(10.0 / 11)
        assert self.ds.slice(0, 1).mean_gap() == 1.0


class TestSynthGenerate:
    """Test suite for planted-cluster synthetic data."""

    def test_shapes(self):
        ds = synth_generate(n_users=10, n_items=12, n_clusters=3, n_events=200, n_features=2, seed=0)
        assert ds.n_events == 200
        assert ds.feature_dim == 2
        assert ds.users.max() < 10
        assert ds.items.max() < 12
        assert np.all(np.diff(ds.timestamps) >= 0)

    def test_seeded(self):
        first = synth_generate(n_events=300, seed=4)
        second = synth_generate(n_events=300, seed=4)
        assert first.items.tolist() == second.items.tolist()
        assert first.timestamps.tolist() == second.timestamps.tolist()

    def test_noise_free_events_stay_in_cluster(self):
        ds = synth_generate(n_events=500, noise=0.0, seed=2)
        user_cluster = np.asarray(ds.metadata["user_cluster"])
        item_cluster = np.asarray(ds.metadata["item_cluster"])
        assert np.all(user_cluster[ds.users] == item_cluster[ds.items])

    @pytest.mark.parametrize("overrides", [
        {"n_users": 3, "n_clusters": 5},
        {"noise": 1.5},
        {"n_events": 0},
    ])
    def test_invalid_sizes(self, overrides):
        with pytest.raises(DataFormatError) as exc_info:
            synth_generate(**overrides)
        assert exc_info.value.code == "INVALID_SIZES"
        assert exc_info.value.exit_code == 2
