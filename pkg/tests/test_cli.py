import json

import pytest

from pftrack import cli


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("seq")
    assert cli.main(["synth", "--preset", "occlusion", "--frames", "6", "--seed", "2", "--out", str(out)]) == 0
    return out


def test_no_arguments_is_usage_error(capsys):
    code, _, err = run([], capsys)
    assert code == 2
    assert "usage:" in err


def test_help_exits_zero(capsys):
    code, out, _ = run(["--help"], capsys)
    assert code == 0
    assert "ungm-bench" in out and "bench-hist" in out


def test_synth_writes_sequence(synth_dir):
    assert len(list((synth_dir / "img").glob("*.ppm"))) == 6
    assert len((synth_dir / "groundtruth_rect.txt").read_text().splitlines()) == 6


def test_synth_spec_override(tmp_path, capsys):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"width": 64, "height": 48, "target_size": [10, 12], "start": [20, 20]}))
    code, out, _ = run(["synth", "--preset", "static", "--frames", "2", "--spec", spec, "--out", tmp_path / "s"], capsys)
    assert code == 0 and "2 frames" in out
    assert (tmp_path / "s" / "groundtruth_rect.txt").read_text().splitlines()[0] == "15,14,10,12"


def test_track_and_eval(synth_dir, tmp_path, capsys):
    out = tmp_path / "run"
    code, msg, _ = run(["track", synth_dir, "--seed", "1", "--out", out, "--overlay"], capsys)
    assert code == 0 and "mean CLE" in msg
    lines = (out / "results.csv").read_text().splitlines()
    assert lines[0] == "frame,cx,cy,w,h,ess,theta_color,d_color,rho_edge,resampled"
    assert len(lines) == 7
    assert len(list((out / "overlay").glob("*.ppm"))) == 6
    code, msg, _ = run(["eval", synth_dir, "--results", out / "results.csv", "--out", out], capsys)
    assert code == 0 and "mean CLE" in msg
    assert len((out / "eval.csv").read_text().splitlines()) == 7


def test_track_is_deterministic_and_overlay_is_pure(synth_dir, tmp_path, capsys):
    run(["track", synth_dir, "--seed", "4", "--out", tmp_path / "a"], capsys)
    run(["track", synth_dir, "--seed", "4", "--out", tmp_path / "b", "--overlay", "--threads", "2"], capsys)
    assert (tmp_path / "a" / "results.csv").read_bytes() == (tmp_path / "b" / "results.csv").read_bytes()


def test_track_options(synth_dir, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"particle_count": 30, "tau_inv": 0.5}))
    code, _, _ = run(
        ["track", synth_dir, "--config", cfg, "--color-only", "--exact-histograms", "--init", "70,86,40,48",
         "--out", tmp_path / "c"],
        capsys,
    )
    assert code == 0
    rows = (tmp_path / "c" / "results.csv").read_text().splitlines()[1:]
    # colour-only keeps theta_color at 1
    assert all(r.split(",")[6] == "1.000000" for r in rows)


def test_track_without_init_or_truth_is_usage_error(synth_dir, tmp_path, capsys):
    bare = tmp_path / "bare"
    (bare / "img").mkdir(parents=True)
    for f in sorted((synth_dir / "img").glob("*.ppm"))[:2]:
        (bare / "img" / f.name).write_bytes(f.read_bytes())
    code, _, err = run(["track", bare, "--out", tmp_path / "o"], capsys)
    assert code == 2
    assert "usage:" in err and "--init" in err
    code, msg, _ = run(["track", bare, "--init", "70,86,40,48", "--out", tmp_path / "o"], capsys)
    assert code == 0 and "mean CLE" not in msg


@pytest.mark.parametrize(
    "argv",
    [
        ["track", "/nonexistent/seq"],
        ["eval", "/nonexistent/seq", "--results", "r.csv"],
        ["track", ".", "--init", "1,2,3"],
        ["bench-hist", "--size", "big"],
    ],
)
def test_errors_are_reported(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code != 0
    assert "error" in err


def test_bad_config_is_reported(synth_dir, tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"tau_inv": 3}))
    code, _, err = run(["track", synth_dir, "--config", cfg, "--out", tmp_path], capsys)
    assert code == 1 and "tau_inv" in err


def test_ungm_bench_is_deterministic(tmp_path, capsys):
    for d in ("a", "b"):
        code, out, _ = run(["ungm-bench", "--seed", "1", "--runs", "3", "--steps", "15", "--out", tmp_path / d], capsys)
        assert code == 0 and "IRPF wins" in out
    for name in ("ungm_runs.csv", "ungm_trace.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_bench_hist(tmp_path, capsys):
    code, out, _ = run(
        ["bench-hist", "--size", "64x48", "--particles", "3,6", "--region", "8x8", "--repeats", "1", "--out", tmp_path],
        capsys,
    )
    assert code == 0
    assert len((tmp_path / "bench_hist.csv").read_text().splitlines()) == 3
