import json

import numpy as np
import pytest

import grownet


def small_config(**kw):
    c = grownet.TrainConfig()
    c.n, c.m, c.max_iters = 4, 2, 2
    c.epochs_base, c.epochs_step, c.batch = 20, 10, 64
    c.lr, c.sigma_n, c.eps_threshold, c.seed = 1e-2, 0.1, 0.0, 3
    for k, v in kw.items():
        setattr(c, k, v)
    return c


def test_activation_is_admissible():
    a = grownet.make_admissible("swish+tanh")
    assert a(0.0) == 0.0
    assert abs(a.d1(0.0)) < 1e-15
    assert a.alpha1 == pytest.approx(-2.0)
    with pytest.raises(ValueError):
        grownet.make_admissible("relu+tanh")


def test_dataset_round_trip():
    x = np.arange(6.0).reshape(3, 2)
    y = np.array([1.0, 2.0, 3.0])
    d = grownet.Dataset(x, y)
    assert len(d) == 3
    np.testing.assert_array_equal(d.inputs, x)
    np.testing.assert_array_equal(d.labels[:, 0], y)


def test_zero_insertion_keeps_predictions():
    spec = grownet.NetworkSpec(inputs=2, outputs=1, width=3, hidden=1)
    net = grownet.Network(spec, seed=1, init_std=0.5)
    x = np.random.default_rng(0).normal(size=(5, 2))
    grown = net.insert(1, [1.0] + [0.0] * 8, 0.0)
    assert grown.hidden_layers == 2
    np.testing.assert_array_equal(net.predict(x), grown.predict(x))


def test_scan_and_grow():
    data = grownet.gen_gaussian_regression(1, 200, 3, 1)
    train, val, test = data.slice(0, 120), data.slice(120, 160), data.slice(160, 200)
    res = grownet.grow("semi", small_config(), train, val, test)
    assert res["stop_reason"] in {"max-iterations", "validation-worsened", "below-threshold"}
    evs = grownet.events(res)
    for e in evs:
        assert e["loss_after"] < e["loss_before"]
    assert res["best"].loss(val) == pytest.approx(res["best_val"])
    report = grownet.scan(res["best"], train, m=2)
    assert len(report["interfaces"]) == res["best"].interface_count
    ranked = grownet.transfer_rank(res["best"], test)
    assert [l for l, _ in ranked]
    assert res["run_log_csv"].startswith("epoch,")


def test_rbf_growth():
    train, val, _ = grownet.gen_rbf_dataset(2, train=200, val=50, test=50, depth=4)
    cfg = small_config(n=1, m=1, init_layers=1, batch=200)
    res = grownet.grow_rbf("semi", cfg, train, val)
    assert res["best"].layers >= 1
    assert len(grownet.rbf_scan(res["best"], train)["interfaces"]) == res["best"].layers + 1


def test_gradient_check():
    assert grownet.max_gradient_error(seed=4, networks=5) <= 1e-6


def test_cli_in_process(tmp_path):
    code = grownet.run_cli("grow", "--out", tmp_path, "--n", 3, "--m", 1, "--max-iters", 1,
                           "--epochs-base", 5, "--gen-train", 50, "--gen-val", 10, "--gen-test", 10)
    assert code == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["command"] == "grow"
    assert grownet.run_cli("grow", "--lr", "-1") == 2
