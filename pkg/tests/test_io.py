import json

import numpy as np

from dtdq_aoi.io import Provenance, Series, config_hash, to_jsonable, write_csv, write_gnuplot, write_json

PROV = Provenance("abc", 3, "unit")


def test_csv_layout(tmp_path):
    path = write_csv(tmp_path / "x.csv", ["a", "b", "c"],
                     [(1, 0.1, "t,u"), (np.int64(2), np.float64(1 / 3), True), (3, float("nan"), "q")], PROV)
    data = path.read_bytes()
    assert b"\r" not in data
    lines = data.decode().splitlines()
    assert lines[:3] == ["# tool: dtdq_aoi 0.1.0", "# config_sha256: abc", "# seed: 3"]
    assert lines[4:] == ["a,b,c", '1,0.1,"t,u"', "2,0.3333333333333333,true", "3,nan,q"]


def test_floats_round_trip(tmp_path):
    values = np.random.default_rng(0).random(20)
    path = write_csv(tmp_path / "f.csv", ["v"], [(v,) for v in values], PROV)
    rows = [line for line in path.read_text().splitlines() if not line.startswith("#")][1:]
    back = np.array([float(r) for r in rows])
    assert np.array_equal(back, values)


def test_json_meta_and_numpy(tmp_path):
    path = write_json(tmp_path / "x.json", {"arr": np.arange(3), "x": np.float32(0.5), "bad": float("inf")}, PROV)
    doc = json.loads(path.read_text())
    assert doc["meta"]["seed"] == 3 and doc["meta"]["tool"] == "dtdq_aoi"
    assert doc["arr"] == [0, 1, 2] and doc["x"] == 0.5 and doc["bad"] is None


def test_config_hash_is_key_order_free():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})
    assert to_jsonable((1, np.bool_(True))) == [1, True]


def test_gnuplot_script(tmp_path):
    cols = {"d.csv": ["mean", "k", "gain"]}
    path = write_gnuplot(tmp_path / "p.gp", [Series("d.csv", "mean", "gain", "g", "lines", "k==3")], PROV,
                         "title", "x", "y", cols)
    text = path.read_text()
    assert "set datafile separator ','" in text
    assert 'using ($2==3 ? $1 : 1/0):3 with lines title "g"' in text
    assert 'set output "p.png"' in text
