import json

import numpy as np
import pytest

from steerkit.cli import main
from steerkit.network import init_params, load_params, save_params
from steerkit.training import demo_network


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def strip_timestamp(text):
    report = json.loads(text)
    report.pop("timestamp")
    return json.dumps(report, sort_keys=True)


def write_net(tmp_path, layers, grid=9, name="net.json"):
    path = tmp_path / name
    path.write_text(json.dumps({"grid": grid, "layers": layers}))
    return str(path)


def fiber_json(*entries):
    return [{"capsule": cid, "mult": mult} for cid, mult in entries]


SMALL_NET = [
    {"kind": "steerable-conv", "in": fiber_json(("A1", 1)),
     "out": fiber_json(("regular", 1)), "s": 3},
    {"kind": "nonlinearity", "tag": "relu"},
    {"kind": "steerable-conv", "in": fiber_json(("regular", 1)),
     "out": fiber_json(("A1", 2)), "s": 3},
]


def test_irreps_listing(capsys):
    code, out, _ = run(capsys, "irreps", "--group", "d4")
    assert code == 0
    lines = [l for l in out.splitlines() if l and not l.startswith(" ")]
    assert len(lines) == 5
    dims = sorted(int(l.split("dim ")[1][0]) for l in lines)
    assert dims == [1, 1, 1, 1, 2]


def test_irreps_json_matrices(capsys):
    code, out, _ = run(capsys, "irreps", "--group", "d4", "--json")
    assert code == 0
    report = json.loads(out)
    mats = report["result"]["E"]["matrices"]
    assert mats["r"] == [[0, -1], [1, 0]]
    assert mats["m"] == [[-1, 0], [0, 1]]
    assert mats["mr"] == [[0, 1], [1, 0]]


def test_irreps_unknown_group(capsys):
    code, _, err = run(capsys, "irreps", "--group", "d5")
    assert code == 2
    assert "d5" in err


def test_decompose_pi0(capsys):
    code, out, _ = run(capsys, "decompose", "--rep", "pi0:3x3", "--json")
    assert code == 0
    assert json.loads(out)["result"]["type"] == [3, 0, 1, 1, 2]


def test_decompose_regular(capsys):
    code, out, _ = run(capsys, "decompose", "--rep", "builtin:regular", "--json")
    assert code == 0
    assert json.loads(out)["result"]["type"] == [1, 1, 1, 1, 2]


def test_decompose_corrupted_json(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{not valid json")
    code, _, err = run(capsys, "decompose", "--rep", str(path))
    assert code == 2
    assert "cannot load" in err


def test_decompose_missing_file(capsys):
    code, _, _ = run(capsys, "decompose", "--rep", "/nonexistent/rep.json")
    assert code == 2


def test_decompose_non_representation(tmp_path, capsys):
    from steerkit.reps import irrep

    obj = irrep("A1").to_json()
    obj["matrices"]["r"] = [[0.5]]
    path = tmp_path / "broken.json"
    path.write_text(json.dumps(obj))
    code, _, err = run(capsys, "decompose", "--rep", str(path))
    assert code == 3
    assert "homomorphism" in err


def test_homs_a1_to_regular(capsys):
    code, out, _ = run(capsys, "homs", "--in", "A1", "--out", "regular",
                       "--size", "3", "--json")
    assert code == 0
    result = json.loads(out)["result"]
    assert result["dim_hom"] == 9
    assert result["utilization"] == pytest.approx(8.0)


def test_homs_identity_pair(capsys):
    code, out, _ = run(capsys, "homs", "--in", "A1", "--out", "A1",
                       "--size", "1", "--json")
    assert code == 0
    result = json.loads(out)["result"]
    assert result["dim_hom"] == 1
    assert result["utilization"] == pytest.approx(1.0)


def test_homs_empty_space_null_utilization(capsys):
    code, out, _ = run(capsys, "homs", "--in", "E", "--out", "A1",
                       "--size", "1", "--json")
    assert code == 0
    result = json.loads(out)["result"]
    assert result["dim_hom"] == 0
    assert result["utilization"] is None


def test_homs_even_size_rejected(capsys):
    code, _, err = run(capsys, "homs", "--in", "A1", "--out", "A1", "--size", "2")
    assert code == 2
    assert "odd" in err


def test_homs_unknown_capsule(capsys):
    code, _, _ = run(capsys, "homs", "--in", "A7", "--out", "A1", "--size", "3")
    assert code == 2


def test_homs_emit_tensor(tmp_path, capsys):
    from steerkit.intertwiners import basis_for_pair
    from steerkit.tensorfile import read_tensor

    path = tmp_path / "basis.sft"
    code, _, _ = run(capsys, "homs", "--in", "A1", "--out", "regular",
                     "--size", "3", "--emit", str(path))
    assert code == 0
    emitted = read_tensor(str(path))
    expected = basis_for_pair("A1", "regular", 3).flat()
    assert emitted.shape == expected.shape
    assert np.allclose(emitted, expected, atol=1e-6)


def test_verify_passes(tmp_path, capsys):
    net = write_net(tmp_path, SMALL_NET)
    code, out, _ = run(capsys, "verify", "--net", net, "--trials", "1",
                       "--tol", "1e-4", "--json")
    assert code == 0
    assert json.loads(out)["pass"] is True


def test_verify_threshold_fail_tol_zero(tmp_path, capsys):
    net = write_net(tmp_path, SMALL_NET)
    code, out, _ = run(capsys, "verify", "--net", net, "--trials", "1",
                       "--tol", "0", "--json")
    assert code == 1
    assert json.loads(out)["pass"] is False


def test_verify_bad_residual_names_layer(tmp_path, capsys):
    layers = [
        {"kind": "steerable-conv", "in": fiber_json(("A1", 1)),
         "out": fiber_json(("regular", 3)), "s": 3},
        {"kind": "steerable-conv", "in": fiber_json(("regular", 3)),
         "out": fiber_json(("qm", 6)), "s": 1},
        {"kind": "residual-add", "from": 0},
    ]
    net = write_net(tmp_path, layers)
    code, _, err = run(capsys, "verify", "--net", net)
    assert code == 3
    assert "layer 2" in err


def test_verify_malformed_spec(tmp_path, capsys):
    path = tmp_path / "net.json"
    path.write_text("]]]")
    code, _, _ = run(capsys, "verify", "--net", str(path))
    assert code == 2


def test_verify_with_saved_params(tmp_path, capsys):
    net_spec = demo_network(9, 3)
    net = write_net(tmp_path, net_spec.to_json()["layers"])
    params = init_params(net_spec, seed=5)
    path = tmp_path / "params.sft"
    save_params(str(path), params)
    loaded = load_params(str(path))
    assert set(loaded.conv) == set(params.conv)
    for idx in params.readout:
        w, _ = params.readout[idx]
        lw, _ = loaded.readout[idx]
        assert np.allclose(w, lw, atol=1e-6)
    code, out, _ = run(capsys, "verify", "--net", net, "--params", str(path),
                       "--trials", "1", "--tol", "1e-4", "--json")
    assert code == 0
    assert json.loads(out)["pass"] is True


def test_verify_determinism(tmp_path, capsys):
    net = write_net(tmp_path, SMALL_NET)
    argv = ["verify", "--net", net, "--trials", "2", "--seed", "3",
            "--tol", "1e-6", "--json"]
    _, out1, _ = run(capsys, *argv)
    _, out2, _ = run(capsys, *argv)
    assert strip_timestamp(out1) == strip_timestamp(out2)


def test_train_demo_short_run(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"epochs": 5, "train_per_class": 5,
                               "test_per_class": 3}))
    out_path = tmp_path / "metrics.json"
    code, out, _ = run(capsys, "train-demo", "--config", str(cfg),
                       "--out", str(out_path), "--json")
    assert code == 0
    report = json.loads(out_path.read_text())
    assert report == json.loads(out)
    assert 0.0 <= report["result"]["train_accuracy"] <= 1.0


def test_train_demo_zero_epochs_chance_level(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"epochs": 0, "classes": 4,
                               "train_per_class": 25, "test_per_class": 5}))
    code, out, _ = run(capsys, "train-demo", "--config", str(cfg), "--json")
    assert code == 0
    acc = json.loads(out)["result"]["train_accuracy"]
    assert abs(acc - 0.25) < 0.2


def test_train_demo_diverges_exit_4(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"epochs": 50, "lr": 1e3,
                               "train_per_class": 5, "test_per_class": 2}))
    code, _, err = run(capsys, "train-demo", "--config", str(cfg))
    assert code == 4
    assert err


def test_train_demo_bad_config(capsys):
    code, _, _ = run(capsys, "train-demo", "--config", "/nonexistent.json")
    assert code == 2


def test_exit_code_contract_all_covered():
    # 0: test_verify_passes; 1: test_verify_threshold_fail_tol_zero;
    # 2: test_irreps_unknown_group; 3: test_verify_bad_residual_names_layer;
    # 4: test_train_demo_diverges_exit_4
    pass
