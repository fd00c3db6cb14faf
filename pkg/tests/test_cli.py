import json
import math

import numpy as np
import pytest

from wirefield.cli import run


def _manifest(capsys):
    return json.loads(capsys.readouterr().out)


def _write(tmp_path, payload, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(payload))
    return str(p)


def test_triplet_classification(capsys):
    assert run(["triplet", "--rbar", "1", "--I0", "1", "--T", "0.5"]) == 0
    res = _manifest(capsys)["result"]
    assert res["admissible"] and res["strong"] and res["spectral"]
    assert res["omega0"] == pytest.approx(math.sqrt(3))


def test_triplet_resonance_discrepancy(capsys):
    assert run(["triplet", "--rbar", "1", "--I0", "1", "--T", str(2 * math.pi / math.sqrt(3))]) == 0
    res = _manifest(capsys)["result"]
    assert res["paper_literal"] and not res["spectral"]


def test_simulate_equilibrium(tmp_path, capsys):
    cfg = _write(tmp_path, {"system": "radial", "triplet": {"rbar": 1.0},
                            "t_span": [0, 20], "n_samples": 51})
    assert run(["simulate", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    man = _manifest(capsys)
    lines = [ln for ln in open(man["artifacts"][0]) if not ln.startswith("#")]
    data = np.loadtxt(lines[1:], delimiter=",")
    np.testing.assert_allclose(data[:, 1], 1.0, atol=1e-8)
    assert data.shape == (51, 8)


def test_csv_is_reproducible(tmp_path, capsys):
    cfg = _write(tmp_path, {"system": "cylindrical", "triplet": {"rbar": 1.0}, "k": 0.01,
                            "profile": {"T": 0.5},
                            "t_span": [0, 2], "n_samples": 21})
    texts, hashes = [], []
    for d in ("a", "b"):
        assert run(["simulate", "--config", cfg, "--out", str(tmp_path / d)]) == 0
        man = _manifest(capsys)
        hashes.append(man["config_hash"])
        texts.append((tmp_path / d / "trajectory.csv").read_text())
    assert texts[0] == texts[1]
    assert f"# config_hash={hashes[0]}" in texts[0].splitlines()[1]


def test_config_hash_tracks_inputs(tmp_path, capsys):
    cfg = _write(tmp_path, {"t": [0.0], "r": [1.0]})
    run(["potential-table", "--config", cfg, "--out", str(tmp_path)])
    h1 = _manifest(capsys)["config_hash"]
    run(["potential-table", "--config", cfg, "--out", str(tmp_path), "--quad-tol", "1e-9"])
    h2 = _manifest(capsys)["config_hash"]
    assert h1 != h2


def test_missing_config_exits_2(tmp_path):
    assert run(["simulate", "--config", str(tmp_path / "nope.json")]) == 2


def test_unknown_key_exits_2(tmp_path):
    assert run(["simulate", "--config", _write(tmp_path, {"bogus": 1})]) == 2


def test_malformed_json_exits_2(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert run(["fields", "--config", str(p)]) == 2


def test_numerical_failure_exits_3(tmp_path):
    cfg = _write(tmp_path, {"triplet": {"rbar": 1.0}, "T": 2 * math.pi / math.sqrt(3),
                            "k_list": [1e-3]})
    assert run(["continue", "--config", cfg, "--out", str(tmp_path)]) == 3


def test_twist_check_at_limit(tmp_path, capsys):
    cfg = _write(tmp_path, {"triplet": {"rbar": 1.0}, "T": 0.5, "k": 0.0,
                            "profile": {"T": 0.5}})
    assert run(["twist-check", "--config", cfg, "--out", str(tmp_path)]) == 0
    res = _manifest(capsys)["result"]
    assert res["certified"]
