import csv
import io

import numpy as np
import pytest

from krigopt.cli import main
from krigopt.config import benchmark_config, inventory_params, parse_flat
from krigopt.datafiles import parse_dataset_csv, parse_model_summary
from krigopt.kriging import FitConfig, fit_ok
from krigopt.simulators import simulate_inventory, substream

pytestmark = pytest.mark.filterwarnings("ignore::krigopt.kriging.SingleReplicationWarning")


@pytest.fixture
def dataset_file(tmp_path):
    x = np.linspace(0.0, 1.0, 7)
    y = np.sin(4 * x)
    lines = ["x1,r1,r2"] + [f"{a!r},{b!r},{b + 0.01!r}" for a, b in zip(x.tolist(), y.tolist())]
    path = tmp_path / "data.csv"
    path.write_text("\n".join(lines) + "\n")
    return path


def test_parse_dataset_ragged():
    ds = parse_dataset_csv("x1,x2,r1,r2\n0,0,1,3\n1,0.5,2,\n")
    assert ds.points.shape == (2, 2)
    assert ds.sample_means.tolist() == [2.0, 2.0]
    with pytest.raises(ValueError):
        parse_dataset_csv("r1,r2\n1,2\n")


def test_flat_config_parsing():
    values = parse_flat("# comment\nmacroreps = 4\nalgorithms = sk_mei, poly_reg\nholding_cost = 2\n"
                        "demand_probs = 1/6, 1/3, 1/3, 1/6\n")
    cfg = benchmark_config(values, master_seed=9)
    assert cfg.macroreps == 4 and cfg.master_seed == 9
    assert [a.value for a in cfg.algorithms] == ["sk_mei", "poly_reg"]
    assert cfg.problem_options["holding_cost"] == 2.0
    assert inventory_params(values).holding_cost == 2.0
    with pytest.raises(ValueError):
        benchmark_config(parse_flat("bogus = 1\n"))


def test_fit_then_predict(dataset_file, tmp_path):
    model_path = tmp_path / "model.txt"
    assert main(["fit", "--data", str(dataset_file), "--out", str(model_path)]) == 0
    summary = parse_model_summary(model_path.read_text())
    assert summary["kernel"] == "se" and summary["noise_mode"] == "deterministic"
    assert int(summary["n_points"]) == 7

    query = tmp_path / "q.csv"
    query.write_text("x1\n0.0\n0.5\n0.9\n")
    pred_path = tmp_path / "pred.csv"
    assert main(["predict", "--model", str(model_path), "--query", str(query), "--out", str(pred_path)]) == 0
    rows = list(csv.DictReader(io.StringIO(pred_path.read_text())))
    assert len(rows) == 3

    ds = parse_dataset_csv(dataset_file.read_text())
    params = (float(summary["process_variance"]), float(summary["length_scale"]))
    model = fit_ok(ds, config=FitConfig(fixed_params=params))
    for row, q in zip(rows, (0.0, 0.5, 0.9)):
        p = model.predict([q])
        assert float(row["mean"]) == pytest.approx(p.mean, rel=1e-12, abs=1e-12)
        assert float(row["mse"]) == pytest.approx(p.mse, rel=1e-9, abs=1e-15)
    # the first query is a design point: interpolation
    assert float(rows[0]["mean"]) == pytest.approx(ds.sample_means[0], abs=1e-6)


def test_fit_stochastic_mode(dataset_file, tmp_path):
    out = tmp_path / "sk.txt"
    assert main(["fit", "--data", str(dataset_file), "--mode", "stochastic", "--kernel", "matern52",
                 "--lower", "0", "--upper", "1", "--out", str(out)]) == 0
    s = parse_model_summary(out.read_text())
    assert s["noise_mode"] == "stochastic" and s["kernel"] == "matern52"


def test_simulate(tmp_path):
    out = tmp_path / "sim.csv"
    assert main(["simulate", "--s", "20", "--S", "80", "--reps", "3", "--seed", "5", "--out", str(out)]) == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert len(rows) == 3
    for r, row in enumerate(rows):
        ref = simulate_inventory(20, 80, seed=substream(5, r))
        assert float(row["avg_monthly_total_cost"]) == ref.avg_monthly_total_cost
        parts = float(row["ordering"]) + float(row["holding"]) + float(row["backlog"])
        assert parts == pytest.approx(float(row["avg_monthly_total_cost"]), abs=1e-9)


def test_simulate_with_config(tmp_path):
    cfg = tmp_path / "inv.cfg"
    cfg.write_text("holding_cost = 0\nbacklog_cost = 0\n")
    out = tmp_path / "sim.csv"
    assert main(["simulate", "--s", "20", "--S", "80", "--reps", "2", "--config", str(cfg),
                 "--out", str(out)]) == 0
    for row in csv.DictReader(io.StringIO(out.read_text())):
        assert float(row["holding"]) == 0.0 and float(row["backlog"]) == 0.0


def test_optimize(tmp_path, capsys):
    out = tmp_path / "hist.csv"
    assert main(["optimize", "--algorithm", "poly_reg", "--n-infill", "3", "--reps", "2", "--seed", "1",
                 "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "iter,s,S,mean,var_of_mean,incumbent,seconds"
    assert len(lines) == 1 + 13
    assert "best" in capsys.readouterr().err


def test_bench(tmp_path):
    cfg = tmp_path / "bench.cfg"
    cfg.write_text("algorithms = ok_ei, poly_reg\nmacroreps = 2\nn_infill = 2\nreps = 1\nn_starts = 2\n")
    out = tmp_path / "out"
    assert main(["bench", "--config", str(cfg), "--out", str(out), "--master-seed", "3"]) == 0
    assert (out / "convergence.csv").exists() and (out / "convergence.svg").exists()
    assert len(list((out / "histories").iterdir())) == 4
    assert "master_seed = 3" in (out / "manifest.txt").read_text()


def test_bad_arguments():
    with pytest.raises(SystemExit):
        main(["fit"])
    with pytest.raises(ValueError):
        main(["simulate", "--s", "80", "--S", "20", "--reps", "1"])
