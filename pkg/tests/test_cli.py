"""End-to-end tests of the command line: artifacts, reports, exit codes."""

import json

import numpy as np
import pytest

from coopt import CootProblem, export_heatmap, solve_coot, validate_coupling
from coopt.cli import main
from coopt.fileio import (
    read_labels_csv,
    read_matrix_csv,
    write_labels_csv,
    write_matrix_csv,
)


def run(argv):
    return main([str(a) for a in argv])


def read_report(out_dir):
    return json.loads((out_dir / "report.json").read_text())


@pytest.fixture
def small_pair(tmp_path):
    rng = np.random.default_rng(90)
    x = tmp_path / "a.csv"
    y = tmp_path / "b.csv"
    write_matrix_csv(x, rng.random((4, 3)))
    write_matrix_csv(y, rng.random((5, 4)))
    return x, y


def test_coot_writes_expected_artifacts(tmp_path, small_pair):
    x, y = small_pair
    out = tmp_path / "run1"
    code = run(["coot", "--x", x, "--y", y, "--loss", "sq", "--eps1", "0",
                "--eps2", "0", "--seed", "7", "--out", out])
    assert code == 0
    for name in ("pi_s.csv", "pi_v.csv", "report.json"):
        assert (out / name).exists()
    report = read_report(out)
    assert set(report) >= {"command", "seed", "cost", "iterations", "converged",
                           "wallMillis", "outputs", "config"}
    assert report["command"] == "coot"
    assert report["seed"] == 7
    assert report["converged"] is True


def test_coot_roundtrip_coupling_is_feasible(tmp_path, small_pair):
    x, y = small_pair
    out = tmp_path / "run2"
    assert run(["coot", "--x", x, "--y", y, "--seed", "1", "--out", out]) == 0
    plan = read_matrix_csv(out / "pi_s.csv")
    n, n2 = plan.shape
    assert validate_coupling(plan, np.full(n, 1 / n), np.full(n2, 1 / n2), 1e-6)


def test_coot_restarts_report_best_cost(tmp_path, small_pair):
    x, y = small_pair
    out = tmp_path / "run3"
    assert run(["coot", "--x", x, "--y", y, "--seed", "3", "--restarts", "6",
                "--out", out]) == 0
    report = read_report(out)
    problem = CootProblem(read_matrix_csv(x), read_matrix_csv(y))
    best = min(
        solve_coot(problem, restarts=6, seed=3).cost,
        solve_coot(problem).cost,
    )
    assert report["cost"] == pytest.approx(best, abs=1e-12)


def test_coot_determinism_across_runs_and_jobs(tmp_path, small_pair):
    x, y = small_pair
    outs = [tmp_path / f"det{i}" for i in range(3)]
    for out, jobs in zip(outs, ("1", "1", "4")):
        assert run(["coot", "--x", x, "--y", y, "--seed", "11", "--restarts", "5",
                    "--jobs", jobs, "--out", out]) == 0
    ref_s = (outs[0] / "pi_s.csv").read_bytes()
    ref_v = (outs[0] / "pi_v.csv").read_bytes()
    for out in outs[1:]:
        assert (out / "pi_s.csv").read_bytes() == ref_s
        assert (out / "pi_v.csv").read_bytes() == ref_v
    costs = {read_report(out)["cost"] for out in outs}
    assert len(costs) == 1


def test_report_rerun_reproduces_cost(tmp_path, small_pair):
    x, y = small_pair
    first = tmp_path / "r1"
    second = tmp_path / "r2"
    argv = ["coot", "--x", x, "--y", y, "--seed", "5", "--restarts", "3", "--eps2", "0.5"]
    assert run(argv + ["--out", first]) == 0
    echoed = read_report(first)["config"]
    assert run(["coot", "--x", echoed["x"], "--y", echoed["y"],
                "--seed", echoed["seed"], "--restarts", echoed["restarts"],
                "--eps2", echoed["eps2"], "--out", second]) == 0
    assert abs(read_report(first)["cost"] - read_report(second)["cost"]) <= 1e-12


def test_gen_then_cocluster_with_truth(tmp_path):
    data = tmp_path / "d1"
    assert run(["gen", "--preset", "D3", "--seed", "1", "--out", data]) == 0
    for name in ("X.csv", "rows.csv", "cols.csv"):
        assert (data / name).exists()
    out = tmp_path / "cc"
    assert run(["cocluster", "--x", data / "X.csv", "-g", "2", "-m", "4",
                "--truth", data, "--seed", "1", "--out", out]) == 0
    report = read_report(out)
    assert "cce" in report
    assert 0.0 <= report["cce"] <= 1.0
    rows = read_labels_csv(out / "row_labels.csv")
    assert rows.size == 300
    assert read_matrix_csv(out / "xc.csv").shape == (2, 4)


def test_election_identical_files_cost_zero(tmp_path):
    e = tmp_path / "e1.csv"
    write_matrix_csv(e, np.array([[1, 2, 3], [3, 1, 2], [2, 3, 1]], dtype=float))
    out = tmp_path / "el"
    assert run(["election", "--x", e, "--y", e, "--seed", "0", "--restarts", "5",
                "--out", out]) == 0
    assert read_report(out)["cost"] == pytest.approx(0.0, abs=1e-12)


def test_hda_writes_one_label_per_target_row(tmp_path):
    rng = np.random.default_rng(91)
    xs = tmp_path / "xs.csv"
    xt = tmp_path / "xt.csv"
    ys = tmp_path / "ys.csv"
    ytp = tmp_path / "yt.csv"
    Xs = rng.random((4, 3))
    sigma = rng.permutation(4)
    write_matrix_csv(xs, Xs)
    write_matrix_csv(xt, Xs[sigma][:, rng.permutation(3)])
    labels = np.array([0, 1, 0, 1])
    write_labels_csv(ys, labels)
    partial = -np.ones(4, dtype=int)
    partial[0] = labels[sigma][0]
    write_labels_csv(ytp, partial)
    out = tmp_path / "hda"
    assert run(["hda", "--xs", xs, "--xt", xt, "--ys", ys, "--yt-partial", ytp,
                "--penalty", "auto", "--restarts", "20", "--seed", "2",
                "--out", out]) == 0
    got = read_labels_csv(out / "labels.csv")
    np.testing.assert_array_equal(got, labels[sigma])


def test_gw_points_mode(tmp_path):
    rng = np.random.default_rng(92)
    x = tmp_path / "p.csv"
    write_matrix_csv(x, rng.random((4, 2)))
    out = tmp_path / "gw"
    assert run(["gw", "--x", x, "--y", x, "--points", "--restarts", "3",
                "--seed", "0", "--out", out]) == 0
    assert read_report(out)["cost"] == pytest.approx(0.0, abs=1e-9)
    assert (out / "pi.csv").exists()


def test_heatmap_flag_writes_pgm(tmp_path, small_pair):
    x, y = small_pair
    out = tmp_path / "hm"
    assert run(["coot", "--x", x, "--y", y, "--seed", "1", "--out", out,
                "--heatmaps"]) == 0
    data = (out / "pi_s.pgm").read_bytes()
    assert data.startswith(b"P5\n")


def test_exit_code_usage():
    assert run(["coot", "--x", "a.csv"]) == 1  # missing required flags
    assert run(["nosuchcommand"]) == 1


def test_seed_rules(tmp_path, small_pair):
    x, y = small_pair
    # deterministic single-start runs may omit the seed (defaults to 0)
    out = tmp_path / "noseed"
    assert run(["coot", "--x", x, "--y", y, "--out", out]) == 0
    assert read_report(out)["seed"] == 0
    # stochastic modes insist on one
    assert run(["coot", "--x", x, "--y", y, "--restarts", "3", "--out", out]) == 1
    assert run(["cocluster", "--x", x, "-g", "2", "-m", "2", "--out", out]) == 1
    e = tmp_path / "e.csv"
    write_matrix_csv(e, np.array([[1.0, 2.0], [2.0, 1.0]]))
    assert run(["election", "--x", e, "--y", e, "--out", tmp_path / "el0"]) == 0


def test_exit_code_io(tmp_path):
    out = tmp_path / "x"
    assert run(["coot", "--x", tmp_path / "missing.csv", "--y", tmp_path / "m2.csv",
                "--seed", "1", "--out", out]) == 2
    ragged = tmp_path / "ragged.csv"
    ragged.write_text("1,2\n3\n")
    other = tmp_path / "ok.csv"
    write_matrix_csv(other, np.eye(2))
    assert run(["coot", "--x", ragged, "--y", other, "--seed", "1", "--out", out]) == 2


def test_exit_code_numeric(tmp_path, small_pair):
    x, y = small_pair
    out = tmp_path / "bad"
    assert run(["coot", "--x", x, "--y", y, "--seed", "1", "--eps1", "-2",
                "--out", out]) == 3
    e = tmp_path / "notranks.csv"
    write_matrix_csv(e, np.array([[1.0, 1.0], [2.0, 1.0]]))
    assert run(["election", "--x", e, "--y", e, "--seed", "0", "--out", out]) == 3


def test_exit_code_nonconvergence_and_override(tmp_path):
    rng = np.random.default_rng(93)
    x = tmp_path / "x.csv"
    y = tmp_path / "y.csv"
    write_matrix_csv(x, rng.random((6, 5)))
    write_matrix_csv(y, rng.random((7, 4)))
    out = tmp_path / "nc"
    args = ["coot", "--x", x, "--y", y, "--seed", "1", "--max-iter", "0", "--out", out]
    assert run(args) == 4
    assert run(args + ["--allow-maxiter"]) == 0


def test_heatmap_min_max_bytes(tmp_path):
    path = tmp_path / "h.pgm"
    export_heatmap(np.array([[0.0, 1.0], [1.0, 0.0]]), path)
    assert path.read_bytes() == b"P5\n2 2\n255\n" + bytes([0, 255, 255, 0])


def test_heatmap_constant_matrix_is_midgray(tmp_path):
    path = tmp_path / "c.pgm"
    export_heatmap(np.full((3, 3), 4.2), path)
    assert path.read_bytes() == b"P5\n3 3\n255\n" + bytes([128] * 9)


def test_heatmap_single_cell(tmp_path):
    path = tmp_path / "one.pgm"
    export_heatmap(np.array([[123.4]]), path)
    assert path.read_bytes() == b"P5\n1 1\n255\n" + bytes([128])


def test_matrix_csv_roundtrip_full_precision(tmp_path):
    rng = np.random.default_rng(94)
    m = rng.random((3, 4)) * np.array([1e-7, 1.0, 1e7, 123.456])
    path = tmp_path / "m.csv"
    write_matrix_csv(path, m)
    np.testing.assert_array_equal(read_matrix_csv(path), m)


def test_coot_explicit_weight_files_match_default(tmp_path, small_pair):
    x, y = small_pair
    wx = tmp_path / "wx.csv"
    wy = tmp_path / "wy.csv"
    write_matrix_csv(wx, np.full((4, 1), 0.25))
    write_matrix_csv(wy, np.full((5, 1), 0.2))
    explicit = tmp_path / "explicit"
    implied = tmp_path / "implied"
    assert run(["coot", "--x", x, "--y", y, "--wx", wx, "--wy", wy,
                "--seed", "2", "--out", explicit]) == 0
    assert run(["coot", "--x", x, "--y", y, "--seed", "2", "--out", implied]) == 0
    assert (explicit / "pi_s.csv").read_bytes() == (implied / "pi_s.csv").read_bytes()


def test_coot_column_mean_feature_weighting(tmp_path, small_pair):
    x, y = small_pair
    out = tmp_path / "meanw"
    assert run(["coot", "--x", x, "--y", y, "--vx", "mean", "--vy", "mean",
                "--seed", "2", "--out", out]) == 0
    plan = read_matrix_csv(out / "pi_v.csv")
    means = read_matrix_csv(x).mean(axis=0)
    np.testing.assert_allclose(plan.sum(axis=1), means / means.sum(), atol=1e-9)


def test_gw_accepts_similarity_matrices_directly(tmp_path):
    rng = np.random.default_rng(96)
    A = rng.random((4, 4))
    sym = tmp_path / "c.csv"
    write_matrix_csv(sym, (A + A.T) / 2)
    out = tmp_path / "gwsym"
    assert run(["gw", "--x", sym, "--y", sym, "--restarts", "3", "--seed", "0",
                "--out", out]) == 0
    assert read_report(out)["cost"] == pytest.approx(0.0, abs=1e-9)


def test_coot_kl_loss_on_positive_data(tmp_path):
    rng = np.random.default_rng(97)
    x = tmp_path / "p.csv"
    y = tmp_path / "q.csv"
    write_matrix_csv(x, rng.random((3, 3)) + 0.1)
    write_matrix_csv(y, rng.random((4, 2)) + 0.1)
    out = tmp_path / "kl"
    assert run(["coot", "--x", x, "--y", y, "--loss", "kl", "--seed", "1",
                "--out", out]) == 0
    assert read_report(out)["cost"] >= -1e-12
