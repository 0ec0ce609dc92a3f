"""Figure-generation tests on synthetic CSVs matching the experiment
schemas, plus CLI plumbing."""

import numpy as np
import pytest

from rendezvous_plots import (
    ZX_PLANE_THRUSTERS,
    FigureSpec,
    SchemaError,
    read_actuation,
    read_trajectory,
    render,
)
from rendezvous_plots.cli import main as cli_main, spec_from_file


def fmt(value):
    return f"{value:.17g}"


def write_trajectory(path, times, states):
    lines = ["t,rx,ry,rz,vx,vy,vz"]
    for t, row in zip(times, states):
        lines.append(",".join([fmt(t)] + [fmt(v) for v in row]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_actuation(path, pulses, solve_times=None):
    steps, m = pulses.shape
    solve_times = solve_times if solve_times is not None else np.full(steps, 0.004)
    header = ["k"] + [f"s{i + 1}" for i in range(m)] + ["solve_time", "iterations", "status"]
    lines = [",".join(header)]
    for k in range(steps):
        cells = [str(k)] + [fmt(v) for v in pulses[k]] + [fmt(solve_times[k]), "1", "optimal"]
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


@pytest.fixture
def trajectory_csv(tmp_path):
    times = np.linspace(0.0, 100.0, 11)
    states = np.zeros((11, 6))
    states[:, 2] = np.linspace(100e3, 0.0, 11)  # z from 100 km to the origin
    states[:, 0] = np.linspace(0.0, -5e3, 11)
    path = tmp_path / "run_trajectory.csv"
    write_trajectory(path, times, states)
    return path


@pytest.fixture
def actuation_csv(tmp_path):
    rng = np.random.default_rng(1)
    pulses = np.where(rng.random((30, 6)) < 0.4, rng.uniform(5, 10, (30, 6)), 0.0)
    path = tmp_path / "run_actuation.csv"
    write_actuation(path, pulses)
    return path


class TestReaders:
    def test_trajectory_roundtrip(self, trajectory_csv):
        times, states = read_trajectory(trajectory_csv)
        assert times.shape == (11,) and states.shape == (11, 6)
        assert states[0, 2] == 100e3

    def test_trajectory_schema_mismatch(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("time,x,y,z\n0,1,2,3\n", encoding="utf-8")
        with pytest.raises(SchemaError, match="expected columns"):
            read_trajectory(bad)

    def test_empty_trajectory_rejected(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("t,rx,ry,rz,vx,vy,vz\n", encoding="utf-8")
        with pytest.raises(SchemaError, match="no data rows"):
            read_trajectory(empty)

    def test_actuation_roundtrip(self, actuation_csv):
        log = read_actuation(actuation_csv)
        assert log["pulses"].shape == (30, 6)
        assert log["solve_time"].shape == (30,)

    def test_actuation_schema_mismatch(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("k,thrust,solve_time,iterations\n", encoding="utf-8")
        with pytest.raises(SchemaError):
            read_actuation(bad)


class TestTrajectoryFigure:
    def test_render_single_series(self, trajectory_csv, tmp_path):
        out = tmp_path / "fig" / "traj.png"
        spec = FigureSpec(inputs=(str(trajectory_csv),), kind="trajectory", output=str(out))
        assert render(spec) == str(out)
        assert out.stat().st_size > 5_000

    def test_two_series_overlay(self, trajectory_csv, tmp_path):
        second = tmp_path / "other_trajectory.csv"
        times, states = read_trajectory(trajectory_csv)
        write_trajectory(second, times, states * 0.5)
        out = tmp_path / "overlay.svg"
        spec = FigureSpec(
            inputs=(str(trajectory_csv), str(second)),
            kind="trajectory",
            output=str(out),
            labels=("a", "b"),
        )
        render(spec)
        body = out.read_text()
        assert "a" in body and "b" in body  # legend entries present in the SVG

    def test_empty_input_is_error_not_empty_image(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("t,rx,ry,rz,vx,vy,vz\n", encoding="utf-8")
        out = tmp_path / "never.png"
        spec = FigureSpec(inputs=(str(empty),), kind="trajectory", output=str(out))
        with pytest.raises(SchemaError):
            render(spec)
        assert not out.exists()


class TestActuationFigure:
    def test_full_raster(self, actuation_csv, tmp_path):
        out = tmp_path / "raster.png"
        spec = FigureSpec(inputs=(str(actuation_csv),), kind="actuation", output=str(out))
        render(spec)
        assert out.stat().st_size > 5_000

    def test_plane_filtered_raster(self, actuation_csv, tmp_path):
        out = tmp_path / "raster_zx.svg"
        spec = FigureSpec(
            inputs=(str(actuation_csv),),
            kind="actuation",
            output=str(out),
            thrusters=ZX_PLANE_THRUSTERS,
        )
        render(spec)
        body = out.read_text()
        assert "thruster 1" in body and "thruster 2" not in body

    def test_bad_thruster_index(self, actuation_csv, tmp_path):
        spec = FigureSpec(
            inputs=(str(actuation_csv),),
            kind="actuation",
            output=str(tmp_path / "x.png"),
            thrusters=(9,),
        )
        with pytest.raises(SchemaError):
            render(spec)


class TestTimingFigures:
    def test_three_series_histogram(self, tmp_path):
        rng = np.random.default_rng(2)
        paths = []
        for i, scale in enumerate((0.03, 0.008, 0.004)):
            pulses = np.zeros((100, 6))
            path = tmp_path / f"series{i}_actuation.csv"
            write_actuation(path, pulses, solve_times=rng.exponential(scale, 100))
            paths.append(str(path))
        out = tmp_path / "hist.png"
        spec = FigureSpec(
            inputs=tuple(paths),
            kind="histogram",
            output=str(out),
            labels=("standard", "projected", "relaxed"),
        )
        render(spec)
        assert out.stat().st_size > 5_000

    def test_single_sample_degenerate(self, tmp_path):
        path = tmp_path / "one_actuation.csv"
        write_actuation(path, np.zeros((1, 6)), solve_times=np.array([0.005]))
        out = tmp_path / "one.png"
        render(FigureSpec(inputs=(str(path),), kind="histogram", output=str(out)))
        assert out.exists()

    def test_profile_with_markers(self, tmp_path):
        path = tmp_path / "prof_actuation.csv"
        write_actuation(path, np.zeros((50, 6)), solve_times=np.linspace(0.002, 0.01, 50))
        out = tmp_path / "profile.png"
        spec = FigureSpec(
            inputs=(str(path),),
            kind="profile",
            output=str(out),
            mission_times=(180.0,),
        )
        render(spec)
        assert out.exists()


class TestCli:
    def test_trajectory_via_flags(self, trajectory_csv, tmp_path, capsys):
        out = tmp_path / "cli.png"
        assert cli_main(["trajectory", str(out), str(trajectory_csv), "--labels", "run"]) == 0
        assert out.exists()
        assert str(out) in capsys.readouterr().out

    def test_actuation_plane_flag(self, actuation_csv, tmp_path):
        out = tmp_path / "cli_raster.png"
        assert cli_main(["actuation", str(out), str(actuation_csv), "--plane", "zx"]) == 0
        assert out.exists()

    def test_schema_error_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("nope\n", encoding="utf-8")
        assert cli_main(["trajectory", str(tmp_path / "x.png"), str(bad)]) == 2
        assert "figure error" in capsys.readouterr().err

    def test_spec_file(self, trajectory_csv, tmp_path):
        out = tmp_path / "spec.png"
        spec_file = tmp_path / "figure.spec"
        spec_file.write_text(
            "\n".join(
                [
                    "kind = trajectory",
                    f"inputs = {trajectory_csv}",
                    f"output = {out}",
                    "title = approach",
                ]
            ),
            encoding="utf-8",
        )
        assert cli_main(["spec", str(spec_file)]) == 0
        assert out.exists()

    def test_spec_file_unknown_key(self, tmp_path):
        spec_file = tmp_path / "bad.spec"
        spec_file.write_text("kind = trajectory\nwat = 1\n", encoding="utf-8")
        with pytest.raises(ValueError, match="unknown key"):
            spec_from_file(spec_file)
