import json
import math
import os
import subprocess

import pytest

import wlcusum as wl


@pytest.fixture
def gauss():
    return wl.Model.gaussian_mean_shift(1, 0.5)


def test_llr_and_projection(gauss):
    assert gauss.llr([0.3], [1.0]) == pytest.approx(0.3 - 0.5)
    assert gauss.project([0.1]) == [0.5]
    assert gauss.window_mle([0.2, 0.4]) == pytest.approx([0.5])


def test_info_numbers_and_calibration(gauss):
    info = wl.info_numbers(gauss, [1.0])
    assert info["I0"] == pytest.approx(0.5)
    assert info["Iinf"] == pytest.approx(0.5**2 / 2)
    assert info["thetaInf"] == pytest.approx([0.5])
    assert wl.approx_info_numbers(gauss, [1.0], 4)["Ihat0"] == pytest.approx(0.375)
    assert wl.threshold_single(1e3) == pytest.approx(math.log(1e3))
    assert wl.threshold_parallel(1e3, 15) == pytest.approx(math.log(15e3))
    report = wl.calibrate(1e4, gauss, [1.0])
    assert report["optimal_window"] == 4
    assert report["wadd_upper_bound"] == pytest.approx(62.39, rel=1e-3)
    with pytest.raises(wl.InfeasibleWindowError):
        wl.wadd_upper_bound(1e4, 1, gauss, [1.0])
    with pytest.raises(ValueError):
        wl.threshold_single(0.5)


def test_detectors_step_and_run(gauss):
    d = wl.WlcusumDetector(gauss, 2, 100.0)
    assert d.step(0.2) is False
    assert d.statistic is None
    d.step(0.4)
    d.step(1.0)
    assert d.statistic == pytest.approx(0.375)

    par = wl.ParallelWlcusumDetector(gauss, 5, 1.0)
    res = par.run([3.0, 3.0, 3.0])
    assert res["stop_time"] == 2
    assert res["which_window"] == 1
    assert not res["censored"]

    exact = wl.make_detector("exact-cusum", gauss, [1.0], 1e9)
    res = exact.run([0.0] * 10)
    assert res["censored"] and res["stop_time"] == 10


def test_cusum_and_glr_oracles(gauss):
    assert wl.cusum_maxform_oracle([1.0, -3.0, 2.0]) == pytest.approx(2.0)
    assert wl.glr_window_stat([1.0, 1.0, 1.0, 1.0], gauss) == pytest.approx(2.0)


def test_simulation_is_seeded(gauss):
    a = wl.simulate(gauss, [1.0], "wlcusum(4)", 100.0, trials=50, seed=3)
    b = wl.simulate(gauss, [1.0], "wlcusum(4)", 100.0, trials=50, seed=3, workers=2)
    assert a == b
    assert a["metric"] == "wadd" and a["trials"] == 50 and a["mean"] > 4
    cfg = json.dumps({"theta": [1.0], "methods": ["exact-cusum", "glr(10)"], "gammas": [100], "trials": 20})
    records = wl.sweep(cfg)
    assert [r["method"] for r in records] == ["exact-cusum", "glr"]
    argmin, recs = wl.window_search(cfg, 100.0, 2, 4)
    assert 2 <= argmin <= 4 and len(recs) == 3


def test_run_cli_in_process():
    code, out, _ = wl.run_cli(["calibrate", "--gamma", "1e4", "--theta", "1", "--barrier", "0.5"])
    assert code == 0
    assert "optimal_window=4" in out
    code, _, err = wl.run_cli(["calibrate", "--gamma", "0.5", "--theta", "1"])
    assert code == 2 and err


def test_cli_binary(tmp_path):
    exe = os.environ.get("WLCUSUM_CLI")
    if not exe:
        pytest.skip("WLCUSUM_CLI not set")
    data = tmp_path / "obs.txt"
    data.write_text("# header\n" + "\n".join(["2.5"] * 30) + "\n")
    proc = subprocess.run(
        [exe, "detect", "--data", str(data), "--method", "wlcusum(3)", "--gamma", "100", "--barrier", "0.5"],
        capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.strip().splitlines()[-1].startswith("ALARM t=")
