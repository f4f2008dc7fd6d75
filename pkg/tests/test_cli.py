import json

import numpy as np
import pytest

import helpers
from tensorreg import cli
from tensorreg.cli import main
from tensorreg.datagen import SynthSpec, gen_linear_synthetic
from tensorreg.regress import (
    KernelSpec,
    RegressionProblem,
    gram,
    holrr_fit,
    holrr_predict_batch,
    kholrr_fit,
    kholrr_predict_batch,
    load_model,
)
from tensorreg.tensor import read_dten, write_dten, write_matrix_csv


def make_problem_files(tmp_path, seed=0):
    spec = SynthSpec(
        input_dim=4,
        output_dims=(3, 2),
        ranks=(2, 2, 2),
        n_train=20,
        n_test=6,
        noise_std=0.05,
        seed=seed,
    )
    data = gen_linear_synthetic(spec)
    x_csv = tmp_path / "x.csv"
    y_dten = tmp_path / "y.dten"
    xt_csv = tmp_path / "xt.csv"
    write_matrix_csv(data.x_train, x_csv)
    write_dten(data.y_train, y_dten)
    write_matrix_csv(data.x_test, xt_csv)
    return data, x_csv, y_dten, xt_csv


def run_cli(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    events = [json.loads(line) for line in captured.out.splitlines() if line]
    return code, events, captured.err


def test_fit_then_predict_round_trip(tmp_path, capsys):
    data, x_csv, y_dten, xt_csv = make_problem_files(tmp_path)
    model_path = tmp_path / "model.bin"
    code, events, _ = run_cli(
        capsys,
        [
            "fit",
            "--x", str(x_csv),
            "--y", str(y_dten),
            "--ranks", "2,2,2",
            "--gamma", "0.01",
            "--out", str(model_path),
        ],
    )
    assert code == 0
    assert events[0]["event"] == "fit"
    assert events[0]["model"] == "holrr"
    assert events[0]["ranks"] == [2, 2, 2]
    assert np.isfinite(events[0]["training_rmse"])
    assert model_path.read_bytes().startswith(b"HOLRR 1\n")

    pred_path = tmp_path / "pred.dten"
    code, events, _ = run_cli(
        capsys,
        ["predict", "--model", str(model_path), "--x", str(xt_csv), "--out", str(pred_path)],
    )
    assert code == 0
    assert events[0]["event"] == "predict"
    assert events[0]["rows"] == 6

    # CSV cells are repr() of the exact doubles, so this pipeline is lossless
    prob = RegressionProblem(x=data.x_train, y=data.y_train, ranks=(2, 2, 2), gamma=0.01)
    ref = holrr_predict_batch(holrr_fit(prob), data.x_test)
    np.testing.assert_array_equal(read_dten(pred_path), ref)


def test_fit_kernel_model(tmp_path, capsys):
    data, x_csv, y_dten, xt_csv = make_problem_files(tmp_path, seed=1)
    model_path = tmp_path / "model.bin"
    code, events, _ = run_cli(
        capsys,
        [
            "fit",
            "--x", str(x_csv),
            "--y", str(y_dten),
            "--ranks", "2,2,2",
            "--gamma", "0.1",
            "--kernel", "rbf:2.0",
            "--out", str(model_path),
        ],
    )
    assert code == 0
    assert events[0]["model"] == "kholrr"
    loaded = load_model(model_path)
    assert loaded.kernel == KernelSpec(kind="rbf", sigma=2.0)

    pred_path = tmp_path / "pred.dten"
    code, events, _ = run_cli(
        capsys,
        ["predict", "--model", str(model_path), "--x", str(xt_csv), "--out", str(pred_path)],
    )
    assert code == 0
    spec = KernelSpec(kind="rbf", sigma=2.0)
    ref_model = kholrr_fit(gram(data.x_train, spec), data.y_train, (2, 2, 2), 0.1, data.x_train, spec)
    np.testing.assert_array_equal(read_dten(pred_path), kholrr_predict_batch(ref_model, data.x_test))


def test_fit_reports_clamping_on_stderr(tmp_path, capsys):
    _, x_csv, y_dten, _ = make_problem_files(tmp_path, seed=2)
    model_path = tmp_path / "model.bin"
    with pytest.warns(UserWarning):
        code, events, err = run_cli(
            capsys,
            [
                "fit",
                "--x", str(x_csv),
                "--y", str(y_dten),
                "--ranks", "9,9,9",
                "--out", str(model_path),
            ],
        )
    assert code == 0
    assert events[0]["ranks"] == [4, 3, 2]
    assert events[0]["warnings"]
    assert "tensorreg: " in err and "clamped" in err


def test_exit_code_2_argument_and_file_errors(tmp_path, capsys):
    data, x_csv, y_dten, _ = make_problem_files(tmp_path, seed=3)
    out = str(tmp_path / "m.bin")
    assert main([]) == 2
    assert main(["fit", "--x", str(x_csv), "--y", str(y_dten), "--out", out]) == 2  # no ranks
    cases = [
        ["fit", "--x", str(x_csv), "--y", str(y_dten), "--ranks", "2,x", "--out", out],
        ["fit", "--x", str(tmp_path / "missing.csv"), "--y", str(y_dten), "--ranks", "2,2,2", "--out", out],
        ["fit", "--x", str(x_csv), "--y", str(y_dten), "--ranks", "2,2,2", "--kernel", "warp", "--out", out],
        ["fit", "--x", str(x_csv), "--y", str(y_dten), "--ranks", "2,2", "--out", out],  # wrong count
        ["predict", "--model", str(tmp_path / "missing.bin"), "--x", str(x_csv), "--out", out],
        ["tensor", "to-csv", str(y_dten)],  # OUT required
        ["tensor", "to-csv", str(y_dten), str(tmp_path / "y.csv")],  # order 3
    ]
    for argv in cases:
        assert main(argv) == 2, argv
    capsys.readouterr()


def test_exit_code_2_bad_config(tmp_path, capsys):
    bad_list = tmp_path / "list.json"
    bad_list.write_text("[1, 2]")
    assert main(["experiment", "synth-linear", "--config", str(bad_list), "--out-dir", str(tmp_path / "o")]) == 2
    bad_json = tmp_path / "broken.json"
    bad_json.write_text("{nope")
    assert main(["experiment", "synth-linear", "--config", str(bad_json), "--out-dir", str(tmp_path / "o")]) == 2
    assert main(["experiment", "mystery", "--out-dir", str(tmp_path / "o")]) == 2
    capsys.readouterr()


def test_exit_code_3_numerical_failure(tmp_path, capsys, monkeypatch):
    _, x_csv, y_dten, _ = make_problem_files(tmp_path, seed=4)

    def boom(prob):
        raise np.linalg.LinAlgError("synthetic breakdown")

    monkeypatch.setattr("tensorreg.regress.holrr_fit", boom)
    code = main(
        ["fit", "--x", str(x_csv), "--y", str(y_dten), "--ranks", "2,2,2", "--out", str(tmp_path / "m.bin")]
    )
    err = capsys.readouterr().err
    assert code == 3
    assert "numerical failure" in err
    assert not (tmp_path / "m.bin").exists()  # nothing written on failure


def test_tensor_info_and_convert(tmp_path, capsys):
    m = np.random.default_rng(5).standard_normal((4, 3))
    src = tmp_path / "m.dten"
    write_dten(m, src)
    code, events, _ = run_cli(capsys, ["tensor", "info", str(src)])
    assert code == 0
    assert events[0]["order"] == 2
    assert events[0]["shape"] == [4, 3]
    assert events[0]["frobenius_norm"] == pytest.approx(np.linalg.norm(m))

    csv_path = tmp_path / "m.csv"
    assert main(["tensor", "to-csv", str(src), str(csv_path)]) == 0
    back_path = tmp_path / "back.dten"
    assert main(["tensor", "from-csv", str(csv_path), str(back_path)]) == 0
    np.testing.assert_array_equal(read_dten(back_path), m)
    ref_csv = tmp_path / "ref.csv"
    write_matrix_csv(m, ref_csv)
    assert csv_path.read_text() == ref_csv.read_text()
    capsys.readouterr()


def test_ingest_met(tmp_path, capsys):
    met = tmp_path / "met"
    stations = helpers.write_station_dir(met, helpers.STATIONS_16[:4], n_months=30)
    out = tmp_path / "ds"
    code, events, _ = run_cli(
        capsys,
        [
            "ingest-met",
            "--dir", str(met),
            "--out-dir", str(out),
            "--window", "2",
            "--horizon", "1",
            "--stations", ",".join(stations),
        ],
    )
    assert code == 0
    assert events[0]["event"] == "ingest-met"
    assert events[0]["input_dim"] == 2 * 4 * 5
    x = read_dten(out / "x.dten")
    y = read_dten(out / "y.dten")
    assert x.shape == (28, 40)
    assert y.shape == (28, 1, 4, 5)
    meta = json.loads((out / "meta.json").read_text())
    assert meta["stations"] == stations
    assert meta["window"] == 2 and meta["horizon"] == 1
    assert len(meta["target_months"]) == 28


def experiment_config(tmp_path, **kw):
    cfg = {
        "trials": 1,
        "train_sizes": [12],
        "test_size": 6,
        "input_dim": 4,
        "output_dims": [3, 2],
        "w_ranks": [2, 2, 2],
        "noise_std": 0.1,
        "gammas": [1e-2],
        "rank_candidates": [[2, 2, 2]],
        "cv_folds": 2,
        "methods": [{"method": "rls"}, {"method": "holrr"}],
    }
    cfg.update(kw)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def test_experiment_from_config_file(tmp_path, capsys):
    cfg_path = experiment_config(tmp_path, seed=5)
    out_a = tmp_path / "a"
    code, events, _ = run_cli(
        capsys,
        [
            "experiment", "synth-linear",
            "--config", str(cfg_path),
            "--out-dir", str(out_a),
            "--timing", "none",
        ],
    )
    assert code == 0
    assert events[0]["event"] == "experiment"
    assert events[0]["records"] == 2  # 1 size x 1 trial x 2 methods
    assert any(e["event"] == "aggregate" for e in events[1:])
    assert (out_a / "report.csv").exists()

    out_b = tmp_path / "b"
    assert main(
        [
            "experiment", "synth-linear",
            "--config", str(cfg_path),
            "--out-dir", str(out_b),
            "--timing", "none",
        ]
    ) == 0
    capsys.readouterr()
    assert (out_a / "report.csv").read_bytes() == (out_b / "report.csv").read_bytes()
    assert (out_a / "report.json").read_bytes() == (out_b / "report.json").read_bytes()


def test_experiment_seed_precedence(tmp_path, capsys, monkeypatch):
    cfg_path = experiment_config(tmp_path)  # no seed inside

    def run(out, extra, env=None):
        if env is None:
            monkeypatch.delenv(cli.SEED_ENV, raising=False)
        else:
            monkeypatch.setenv(cli.SEED_ENV, env)
        argv = [
            "experiment", "synth-linear",
            "--config", str(cfg_path),
            "--out-dir", str(out),
            "--timing", "none",
        ] + extra
        assert main(argv) == 0
        capsys.readouterr()
        return (out / "report.csv").read_bytes()

    via_flag = run(tmp_path / "flag", ["--seed", "123"])
    via_env = run(tmp_path / "env", [], env="123")
    assert via_flag == via_env
    flag_beats_env = run(tmp_path / "both", ["--seed", "123"], env="999")
    assert flag_beats_env == via_flag
    other = run(tmp_path / "other", ["--seed", "7"])
    assert other != via_flag

    monkeypatch.setenv(cli.SEED_ENV, "not-a-number")
    assert main(
        [
            "experiment", "synth-linear",
            "--config", str(cfg_path),
            "--out-dir", str(tmp_path / "bad"),
            "--timing", "none",
        ]
    ) == 2
    capsys.readouterr()


def test_experiment_trials_override(tmp_path, capsys):
    cfg_path = experiment_config(tmp_path, seed=6)
    out = tmp_path / "t"
    code, events, _ = run_cli(
        capsys,
        [
            "experiment", "synth-linear",
            "--config", str(cfg_path),
            "--out-dir", str(out),
            "--timing", "none",
            "--trials", "3",
        ],
    )
    assert code == 0
    assert events[0]["records"] == 6  # 1 size x 3 trials x 2 methods
