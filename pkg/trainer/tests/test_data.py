import numpy as np
import pytest

from imo_trainer import data as tdata
from conftest import simulate


class TestBuildDataset:
    def test_window_count_formula(self, flight_short):
        # 10 s at 100 Hz, 0.5 s window, 0.05 s stride:
        # floor((10 - 0.5) / 0.05) + 1 windows
        ws = tdata.build_dataset([flight_short])
        assert len(ws) == int((10.0 - 0.5) / 0.05) + 1 == 191

    def test_targets_equal_gt_deltas(self, flight_short):
        ws = tdata.build_dataset([flight_short])
        gt = np.loadtxt(f"{flight_short}/gt.csv", delimiter=",", skiprows=1)
        p = gt[:, 1:4]
        for n, k0 in enumerate(range(0, len(p) - 1 - 50 + 1, 5)):
            assert np.array_equal(ws.targets[n], p[k0 + 50] - p[k0])

    def test_hover_targets_near_zero(self, tmp_path):
        d = simulate(tmp_path / "hover", seed=1, duration=5.0,
                     track="hover")
        ws = tdata.build_dataset([d])
        assert np.max(np.abs(ws.targets)) < 1e-3

    def test_input_shape_and_channel_content(self, flight_short):
        ws = tdata.build_dataset([flight_short])
        assert ws.inputs.shape[1:] == (6, 50)
        # thrust channels have mean magnitude near gravity on z
        assert abs(np.mean(ws.inputs[:, 2]) - 9.81) < 2.0
        assert ws.norm_mean.shape == (6,)
        assert np.all(ws.norm_std > 0)

    def test_malformed_csv_names_file(self, tmp_path, flight_short):
        import shutil
        broken = tmp_path / "broken"
        shutil.copytree(flight_short, broken)
        (broken / "imu.csv").write_text("t,gx\n0.0,nope,3\n")
        with pytest.raises(tdata.IngestError, match="imu.csv"):
            tdata.build_dataset([broken])


class TestSplit:
    def test_split_is_by_whole_flight(self, flights_drag):
        ws = tdata.build_dataset(flights_drag[:3])
        train, val = tdata.split_by_flight(ws, val_flights=[2])
        assert set(np.unique(train.flight)) == {0, 1}
        assert set(np.unique(val.flight)) == {2}
        assert len(train) + len(val) == len(ws)
        # normalization stats are shared, computed once on the full set
        assert np.array_equal(train.norm_mean, val.norm_mean)
