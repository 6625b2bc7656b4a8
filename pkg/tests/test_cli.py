import json
import subprocess
import sys

import numpy as np
import pytest

from pointproc import Region, RngStream, simulate_hpp
from pointproc.cli import main
from pointproc.io import read_event_times, read_points_csv


def run(*argv):
    return main([str(a) for a in argv])


def read_bytes_map(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def write_pattern(tmp_path, seed=0, n=120, name="pts.csv"):
    g = np.random.default_rng(seed)
    lines = ["x,y"] + [f"{x},{y}" for x, y in g.random((n, 2))]
    p = tmp_path / name
    p.write_text("\n".join(lines) + "\n")
    return p


def write_space_time(tmp_path, seed=0, n=80, name="events.csv"):
    g = np.random.default_rng(seed)
    rows = np.column_stack([g.random(n), g.random(n), g.random(n)])
    lines = ["x,y,t"] + [f"{x},{y},{t}" for x, y, t in rows]
    p = tmp_path / name
    p.write_text("\n".join(lines) + "\n")
    return p


class TestSimulate:
    def test_hpp_writes_events_and_manifest(self, tmp_path):
        out = tmp_path / "run"
        assert run("--seed", 3, "--out", out, "simulate", "hpp",
                   "--rate", 2.0, "--horizon", 50.0) == 0
        got = read_event_times(out / "events.csv", horizon=50.0)
        want = simulate_hpp(2.0, 50.0, RngStream(3))
        assert np.array_equal(got.times, want.times)
        doc = json.loads((out / "manifest.json").read_text())
        assert doc["command"] == "simulate"
        assert doc["subcommand"] == "hpp"
        assert doc["seed"] == 3
        assert doc["params"]["rate"] == 2.0

    def test_seed_flag_after_subcommand(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        run("--seed", 7, "--out", a, "simulate", "hpp", "--rate", 1.0, "--horizon", 20.0)
        run("simulate", "hpp", "--rate", 1.0, "--horizon", 20.0, "--seed", 7, "--out", b)
        assert (a / "events.csv").read_bytes() == (b / "events.csv").read_bytes()

    def test_nhpp_piecewise(self, tmp_path):
        out = tmp_path / "run"
        code = run("--seed", 1, "--out", out, "simulate", "nhpp",
                   "--intensity", "piecewise", "--horizon", 10.0,
                   "--segments", "0:5:2,5:10:6")
        assert code == 0
        ev = read_event_times(out / "events.csv", horizon=10.0)
        assert np.all(ev.times <= 10.0)

    def test_nhpp_sinusoid(self, tmp_path):
        out = tmp_path / "run"
        assert run("--seed", 1, "--out", out, "simulate", "nhpp",
                   "--intensity", "sinusoid", "--horizon", 48.0,
                   "--base", 3.0, "--amplitude", 2.0, "--period", 24.0) == 0

    def test_nhpp_missing_params_fails_cleanly(self, tmp_path):
        out = tmp_path / "run"
        assert run("--out", out, "simulate", "nhpp",
                   "--intensity", "constant", "--horizon", 10.0) == 1
        assert not (out / "events.csv").exists()
        assert not (out / "manifest.json").exists()

    def test_hawkes_manifest_reports_regime(self, tmp_path):
        out = tmp_path / "run"
        assert run("--seed", 2, "--out", out, "simulate", "hawkes",
                   "--mu", 1.0, "--alpha", 0.5, "--beta", 1.0,
                   "--horizon", 100.0) == 0
        doc = json.loads((out / "manifest.json").read_text())
        assert doc["derived"]["n_star"] == 0.5
        assert doc["derived"]["regime"] == "subcritical"

    def test_csr_writes_points(self, tmp_path):
        out = tmp_path / "run"
        assert run("--seed", 4, "--out", out, "simulate", "csr",
                   "--rate", 100.0, "--region", "0,1,0,1") == 0
        pts = read_points_csv(out / "points.csv")
        assert pts.shape[1] == 2
        assert np.all((pts >= 0) & (pts <= 1))


class TestAnalyze:
    def test_kde(self, tmp_path):
        src = write_pattern(tmp_path)
        out = tmp_path / "run"
        assert run("--out", out, "analyze", "kde", "--in", src,
                   "--region", "0,1,0,1", "--nx", 5, "--ny", 5,
                   "--bandwidth", 0.1) == 0
        lines = (out / "kde.csv").read_text().splitlines()
        assert lines[0] == "cell_x,cell_y,value"
        assert len(lines) == 26

    def test_kde_empty_input_gives_zero_surface(self, tmp_path):
        src = tmp_path / "empty.csv"
        src.write_text("x,y\n")
        out = tmp_path / "run"
        assert run("--out", out, "analyze", "kde", "--in", src,
                   "--region", "0,1,0,1", "--nx", 3, "--ny", 3,
                   "--bandwidth", 0.1) == 0
        vals = [float(l.split(",")[2]) for l in (out / "kde.csv").read_text().splitlines()[1:]]
        assert vals == [0.0] * 9

    def test_g_plain_and_with_envelope(self, tmp_path):
        src = write_pattern(tmp_path)
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        assert run("--out", out1, "analyze", "g", "--in", src,
                   "--region", "0,1,0,1", "--radii", "0.02,0.05,0.1") == 0
        assert (out1 / "g.csv").read_text().splitlines()[0] == "r,observed"
        assert run("--seed", 9, "--out", out2, "analyze", "g", "--in", src,
                   "--region", "0,1,0,1", "--radii", "0.02,0.05,0.1",
                   "--envelope", 19) == 0
        lines = (out2 / "g.csv").read_text().splitlines()
        assert lines[0] == "r,observed,lower,upper"
        assert len(lines) == 4

    def test_f_requires_probe_grid(self, tmp_path):
        src = write_pattern(tmp_path)
        out = tmp_path / "run"
        assert run("--out", out, "analyze", "f", "--in", src,
                   "--region", "0,1,0,1", "--radii", "0.05,0.1",
                   "--probe-nx", 10, "--probe-ny", 10) == 0
        assert (out / "f.csv").exists()

    def test_k_border_correction(self, tmp_path):
        src = write_pattern(tmp_path)
        out = tmp_path / "run"
        assert run("--out", out, "analyze", "k", "--in", src,
                   "--region", "0,1,0,1", "--radii", "0.05,0.1",
                   "--correction", "border") == 0
        doc = json.loads((out / "manifest.json").read_text())
        assert doc["params"]["correction"] == "border"

    def test_nni_coincident_points_is_zero(self, tmp_path):
        src = tmp_path / "dup.csv"
        src.write_text("x,y\n0.5,0.5\n0.5,0.5\n0.5,0.5\n")
        out = tmp_path / "run"
        assert run("--out", out, "analyze", "nni", "--in", src,
                   "--region", "0,1,0,1") == 0
        rows = dict(
            l.split(",") for l in (out / "nni.csv").read_text().splitlines()[1:]
        )
        assert float(rows["nni"]) == 0.0
        assert float(rows["mean_min_distance"]) == 0.0

    def test_quadrat_outputs(self, tmp_path):
        src = write_pattern(tmp_path)
        out = tmp_path / "run"
        assert run("--out", out, "analyze", "quadrat", "--in", src,
                   "--region", "0,1,0,1", "--nx", 4, "--ny", 4) == 0
        test_rows = dict(
            l.split(",") for l in (out / "quadrat_test.csv").read_text().splitlines()[1:]
        )
        assert int(test_rows["dof"]) == 15
        assert 0.0 <= float(test_rows["p_value"]) <= 1.0
        counts = [int(l.split(",")[2]) for l in (out / "quadrat.csv").read_text().splitlines()[1:]]
        assert sum(counts) == 120

    def test_dispersion(self, tmp_path):
        src = write_pattern(tmp_path)
        out = tmp_path / "run"
        assert run("--out", out, "analyze", "dispersion", "--in", src,
                   "--region", "0,1,0,1", "--nx", 8, "--ny", 8,
                   "--blocks", "1,2") == 0
        lines = (out / "dispersion.csv").read_text().splitlines()
        assert lines[0] == "block_size,index"
        assert [l.split(",")[0] for l in lines[1:]] == ["1", "2"]

    def test_geojson_input(self, tmp_path):
        fc = {
            "type": "FeatureCollection",
            "features": [
                {
                    "type": "Feature",
                    "geometry": {"type": "Point", "coordinates": [0.2 + 0.1 * i, 0.5]},
                    "properties": {},
                }
                for i in range(5)
            ],
        }
        src = tmp_path / "pts.geojson"
        src.write_text(json.dumps(fc))
        out = tmp_path / "run"
        assert run("--out", out, "analyze", "nni", "--in", src,
                   "--region", "0,1,0,1") == 0

    def test_point_outside_region_fails(self, tmp_path):
        src = tmp_path / "pts.csv"
        src.write_text("x,y\n2.0,0.5\n0.1,0.1\n")
        out = tmp_path / "run"
        assert run("--out", out, "analyze", "nni", "--in", src,
                   "--region", "0,1,0,1") == 1

    def test_malformed_csv_reports_file_and_line(self, tmp_path, capsys):
        src = tmp_path / "pts.csv"
        src.write_text("x,y\n0.5,0.5\nnope,0.2\n")
        out = tmp_path / "run"
        assert run("--out", out, "analyze", "nni", "--in", src,
                   "--region", "0,1,0,1") == 1
        err = capsys.readouterr().err
        assert "pts.csv:3" in err


class TestDetect:
    def test_gistar(self, tmp_path):
        src = write_pattern(tmp_path, n=200)
        out = tmp_path / "run"
        assert run("--out", out, "detect", "gistar", "--in", src,
                   "--region", "0,1,0,1", "--nx", 5, "--ny", 5,
                   "--radius", 0.25) == 0
        lines = (out / "gistar.csv").read_text().splitlines()
        assert lines[0] == "cell_x,cell_y,z"
        assert len(lines) == 26

    def test_scan(self, tmp_path):
        src = write_space_time(tmp_path)
        out = tmp_path / "run"
        assert run("--seed", 5, "--out", out, "detect", "scan", "--in", src,
                   "--region", "0,1,0,1", "--horizon", 1.0,
                   "--nx", 5, "--ny", 5, "--slices", 5,
                   "--radii", "0.15,0.3", "--durations", "0.2,0.4",
                   "--nsim", 99) == 0
        lines = (out / "scan.csv").read_text().splitlines()
        assert lines[0].startswith("cx,cy,radius")
        llrs = [float(l.split(",")[7]) for l in lines[1:]]
        assert llrs == sorted(llrs, reverse=True)

    def test_scan_top_truncates(self, tmp_path):
        src = write_space_time(tmp_path)
        out = tmp_path / "run"
        assert run("--seed", 5, "--out", out, "detect", "scan", "--in", src,
                   "--region", "0,1,0,1", "--horizon", 1.0,
                   "--nx", 5, "--ny", 5, "--slices", 5,
                   "--radii", "0.15,0.3", "--durations", "0.2,0.4",
                   "--nsim", 99, "--top", 3) == 0
        assert len((out / "scan.csv").read_text().splitlines()) == 4

    def test_scan_low_nsim_fails_and_cleans_up(self, tmp_path):
        src = write_space_time(tmp_path)
        out = tmp_path / "run"
        assert run("--out", out, "detect", "scan", "--in", src,
                   "--region", "0,1,0,1", "--horizon", 1.0,
                   "--nx", 5, "--ny", 5, "--slices", 5,
                   "--radii", "0.15", "--durations", "0.2",
                   "--nsim", 98) == 1
        assert not (out / "scan.csv").exists()
        assert not (out / "manifest.json").exists()

    def test_scan_geojson_needs_time(self, tmp_path):
        fc = {
            "type": "FeatureCollection",
            "features": [
                {
                    "type": "Feature",
                    "geometry": {"type": "Point", "coordinates": [0.5, 0.5]},
                    "properties": {},
                }
            ],
        }
        src = tmp_path / "ev.geojson"
        src.write_text(json.dumps(fc))
        out = tmp_path / "run"
        assert run("--out", out, "detect", "scan", "--in", src,
                   "--region", "0,1,0,1", "--horizon", 1.0,
                   "--nx", 3, "--ny", 3, "--slices", 3,
                   "--radii", "0.2", "--durations", "0.4",
                   "--nsim", 99) == 1

    def test_scan_with_baseline_files(self, tmp_path):
        src = write_space_time(tmp_path)
        bases = []
        for s in range(3):
            b = tmp_path / f"base{s}.csv"
            lines = ["cell_x,cell_y,value"]
            lines += [f"{i},{j},2" for i in range(3) for j in range(3)]
            b.write_text("\n".join(lines) + "\n")
            bases.append(str(b))
        out = tmp_path / "run"
        assert run("--seed", 1, "--out", out, "detect", "scan", "--in", src,
                   "--region", "0,1,0,1", "--horizon", 1.0,
                   "--nx", 3, "--ny", 3, "--slices", 3,
                   "--radii", "0.2", "--durations", "0.4",
                   "--nsim", 99, "--baseline", ",".join(bases)) == 0
        assert (out / "scan.csv").exists()


class TestSeedResolution:
    def test_env_seed_used_when_flag_absent(self, tmp_path, monkeypatch):
        a, b = tmp_path / "a", tmp_path / "b"
        monkeypatch.setenv("POINTPROC_SEED", "11")
        run("--out", a, "simulate", "hpp", "--rate", 1.0, "--horizon", 30.0)
        monkeypatch.delenv("POINTPROC_SEED")
        run("--seed", 11, "--out", b, "simulate", "hpp", "--rate", 1.0, "--horizon", 30.0)
        assert (a / "events.csv").read_bytes() == (b / "events.csv").read_bytes()
        assert json.loads((a / "manifest.json").read_text())["seed"] == 11

    def test_flag_beats_env(self, tmp_path, monkeypatch):
        a, b = tmp_path / "a", tmp_path / "b"
        monkeypatch.setenv("POINTPROC_SEED", "99")
        run("--seed", 3, "--out", a, "simulate", "hpp", "--rate", 1.0, "--horizon", 30.0)
        monkeypatch.delenv("POINTPROC_SEED")
        run("--seed", 3, "--out", b, "simulate", "hpp", "--rate", 1.0, "--horizon", 30.0)
        assert (a / "events.csv").read_bytes() == (b / "events.csv").read_bytes()

    def test_default_seed_is_zero(self, tmp_path):
        out = tmp_path / "run"
        run("--out", out, "simulate", "hpp", "--rate", 1.0, "--horizon", 10.0)
        assert json.loads((out / "manifest.json").read_text())["seed"] == 0

    def test_bad_env_seed_rejected(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("POINTPROC_SEED", "pi")
        out = tmp_path / "run"
        assert run("--out", out, "simulate", "hpp", "--rate", 1.0, "--horizon", 10.0) == 2
        assert "POINTPROC_SEED" in capsys.readouterr().err


class TestManifestReplay:
    def test_simulate_replay_is_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        run("--seed", 21, "--out", a, "simulate", "hawkes",
            "--mu", 1.0, "--alpha", 0.4, "--beta", 1.2, "--horizon", 80.0)
        assert run("--manifest", a / "manifest.json", "--out", b) == 0
        assert read_bytes_map(a) == read_bytes_map(b)

    def test_analyze_replay_is_byte_identical(self, tmp_path):
        src = write_pattern(tmp_path)
        a, b = tmp_path / "a", tmp_path / "b"
        run("--seed", 13, "--out", a, "analyze", "k", "--in", src,
            "--region", "0,1,0,1", "--radii", "0.05,0.1",
            "--correction", "border", "--envelope", 19)
        assert run("--manifest", a / "manifest.json", "--out", b) == 0
        assert read_bytes_map(a) == read_bytes_map(b)

    def test_scan_replay_is_byte_identical(self, tmp_path):
        src = write_space_time(tmp_path)
        a, b = tmp_path / "a", tmp_path / "b"
        run("--seed", 17, "--out", a, "detect", "scan", "--in", src,
            "--region", "0,1,0,1", "--horizon", 1.0,
            "--nx", 4, "--ny", 4, "--slices", 4,
            "--radii", "0.2", "--durations", "0.3", "--nsim", 99)
        assert run("--manifest", a / "manifest.json", "--out", b) == 0
        assert read_bytes_map(a) == read_bytes_map(b)

    def test_threads_do_not_change_bytes(self, tmp_path):
        src = write_pattern(tmp_path)
        a, b = tmp_path / "a", tmp_path / "b"
        run("--seed", 2, "--out", a, "analyze", "g", "--in", src,
            "--region", "0,1,0,1", "--radii", "0.05,0.1", "--envelope", 19)
        run("--seed", 2, "--threads", 4, "--out", b, "analyze", "g", "--in", src,
            "--region", "0,1,0,1", "--radii", "0.05,0.1", "--envelope", 19)
        assert (a / "g.csv").read_bytes() == (b / "g.csv").read_bytes()

    def test_manifest_with_subcommand_rejected(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            run("--manifest", tmp_path / "m.json", "simulate", "hpp",
                "--rate", 1.0, "--horizon", 1.0)
        assert exc.value.code == 2

    def test_manifest_with_seed_rejected(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            run("--manifest", tmp_path / "m.json", "--seed", 4)
        assert exc.value.code == 2

    def test_missing_manifest_file(self, tmp_path, capsys):
        assert run("--manifest", tmp_path / "nope.json", "--out", tmp_path) == 2
        assert "not found" in capsys.readouterr().err

    def test_manifest_missing_field(self, tmp_path, capsys):
        m = tmp_path / "m.json"
        m.write_text(json.dumps({"command": "simulate", "subcommand": "hpp"}))
        assert run("--manifest", m, "--out", tmp_path) == 2
        assert "missing" in capsys.readouterr().err


class TestTopLevel:
    def test_no_command_prints_usage(self, capsys):
        assert run() == 2
        assert "usage" in capsys.readouterr().err

    def test_wrote_lines_listed(self, tmp_path, capsys):
        out = tmp_path / "run"
        run("--out", out, "simulate", "hpp", "--rate", 1.0, "--horizon", 5.0)
        stdout = capsys.readouterr().out
        assert "events.csv" in stdout
        assert "manifest.json" in stdout

    def test_entry_point_subprocess(self, tmp_path):
        res = subprocess.run(
            [sys.executable, "-m", "pointproc.cli", "--seed", "1",
             "--out", str(tmp_path), "simulate", "csr",
             "--rate", "50", "--region", "0,1,0,1"],
            capture_output=True, text=True,
        )
        assert res.returncode == 0
        assert (tmp_path / "points.csv").exists()
        ver = subprocess.run(
            ["pointproc", "--version"], capture_output=True, text=True
        )
        assert ver.returncode == 0
        assert ver.stdout.startswith("pointproc ")
