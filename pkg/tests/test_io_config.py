import os

import numpy as np
import pytest
import yaml

from ntype_phd import io
from ntype_phd.config import ConfigError, config_from_dict, dump_config, load_config
from ntype_phd.frames import DetectionFrame
from ntype_phd.sim import preset_scenarios, simulate


def test_mot_row(tmp_path):
    p = tmp_path / "det.txt"
    p.write_text("1,-1,10,20,30,40,0.9\n3,-1,0,0,10,10,0.5,-1,-1,-1\n")
    frames = io.ingest_detections(p, "mot")
    assert [f[0].frame for f in frames] == [1, 2, 3]
    np.testing.assert_allclose(frames[0][0].measurements, [[25, 40, 30, 40]])
    assert len(frames[1][0]) == 0


def test_empty_files(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("")
    assert io.ingest_detections(p, "mot") == []
    assert io.ingest_detections(p, "sim_csv") == []


def test_malformed_and_nonmonotone(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("1,-1,10,20,30,40,0.9\n2,-1,x,20,30,40,0.9\n")
    with pytest.raises(io.FormatError, match="line 2"):
        io.ingest_detections(p, "mot")
    p.write_text("2,-1,10,20,30,40,0.9\n1,-1,10,20,30,40,0.9\n")
    with pytest.raises(io.FormatError, match="line 2"):
        io.ingest_detections(p, "mot")


def test_sim_csv_round_trip(tmp_path):
    scn = preset_scenarios()["football3"]
    truth, dets = simulate(scn)
    for prov in (False, True):
        io.write_detections_csv(tmp_path / "d.csv", dets, provenance=prov)
        back = io.ingest_detections(tmp_path / "d.csv", "sim_csv", n_detectors=3, n_frames=scn.frame_count)
        for a, b in zip(dets, back):
            for x, y in zip(a, b):
                np.testing.assert_array_equal(x.measurements, y.measurements)
                assert y.provenance == (x.provenance if prov else None)
    io.write_truth_csv(tmp_path / "t.csv", truth)
    tb = io.read_truth_csv(tmp_path / "t.csv")
    assert [len(f) for f in tb] == [len(f) for f in truth]
    np.testing.assert_array_equal(tb[50].objects[3].state, truth[50].objects[3].state)


def test_empty_detection_frames_survive(tmp_path):
    dets = [[DetectionFrame(k, 0, np.zeros((0, 4)))] for k in range(3)]
    dets[1] = [DetectionFrame(1, 0, np.array([[1.0, 2, 3, 4]]))]
    io.write_detections_csv(tmp_path / "d.csv", dets)
    back = io.ingest_detections(tmp_path / "d.csv", "sim_csv", n_frames=3)
    assert [len(f[0]) for f in back] == [0, 1, 0]


def test_atomic_write_leaves_old_file(tmp_path):
    p = tmp_path / "x.csv"
    io.write_csv(p, ("a",), [(1,)])

    def rows():
        yield (2,)
        raise RuntimeError("boom")

    with pytest.raises(RuntimeError):
        io.write_csv(p, ("a",), rows())
    assert p.read_text() == "a\n1\n"
    assert os.listdir(tmp_path) == ["x.csv"]


def test_preset_expands():
    cfg = config_from_dict({"preset": "football3"})
    assert cfg.model.n_types == 3
    assert cfg.model.p_D[0] == [0.93, 0.24, 0.50]
    assert cfg.model.sigma_v == [5.0, 5.0, 5.0]
    assert cfg.model.birth_weight == [1e-4] * 3
    assert cfg.model.merge_U == 4.0 and cfg.model.prune_T == 1e-5


def test_bad_probability_names_entry():
    with pytest.raises(ConfigError, match=r"model.p_D\[0\]\[1\] = 1.2"):
        config_from_dict({"preset": "football3", "model": {"p_D": [[0.9, 1.2, 0], [0, 0.9, 0], [0, 0, 0.9]]}})


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="unknown key"):
        config_from_dict({"preset": "football3", "modle": {}})
    with pytest.raises(ConfigError, match="model: unknown key"):
        config_from_dict({"preset": "football3", "model": {"sigma_q": 1}})


def test_missing_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.yaml")
    (tmp_path / "c.yaml").write_text("preset: single\ndetections: missing.csv\n")
    with pytest.raises(ConfigError, match="does not exist"):
        load_config(tmp_path / "c.yaml")


def test_round_trip(tmp_path):
    cfg = config_from_dict({"preset": "urban2", "seed": 4, "mode": "independent"})
    p = tmp_path / "c.yaml"
    p.write_text(dump_config(cfg))
    again = load_config(p)
    assert again == cfg
    assert yaml.safe_load(dump_config(again)) == yaml.safe_load(p.read_text())
