import re

import pytest

from flightbench.cli import EXIT_OK, EXIT_USAGE, main
from flightbench.sim.scenario import bundled_path


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_sim_run_writes_outputs_and_is_reproducible(tmp_path, capsys):
    hashes = []
    for sub in ("a", "b"):
        code, out, _ = run(capsys, "sim", "run", "quad_triangle_roll", "--seed", "7", "--duration", "1",
                           "--out", str(tmp_path / sub))
        assert code == EXIT_OK
        hashes.append(re.search(r"csv_sha256=(\w+)", out).group(1))
        for suffix in (".csv", "_events.log", "_summary.txt"):
            assert (tmp_path / sub / f"quad_triangle_roll{suffix}").exists()
    assert hashes[0] == hashes[1]


def test_sim_run_plot(tmp_path, capsys):
    code, out, _ = run(capsys, "sim", "run", "quad_step_roll", "--duration", "0.5", "--plot", "--out", str(tmp_path))
    assert code == EXIT_OK
    for f in ("quad_step_roll_roll.dat", "quad_step_roll_roll.png", "quad_step_roll_outputs.png"):
        assert (tmp_path / f).stat().st_size > 0


def test_sim_run_malformed_scenario(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text(bundled_path("quad_triangle_roll").read_text().replace("mass: 1.5", "mass: -1"))
    code, _, err = run(capsys, "sim", "run", str(bad), "--out", str(tmp_path))
    assert code != EXIT_OK
    assert re.search(r"bad\.yaml:\d+:", err)


def test_sim_run_missing_scenario(tmp_path, capsys):
    code, _, _ = run(capsys, "sim", "run", "no_such_scenario", "--out", str(tmp_path))
    assert code == EXIT_USAGE


def test_mixer_check_quad(capsys):
    code, out, _ = run(capsys, "mixer", "check", "quadrotor_x")
    assert code == EXIT_OK
    assert "rank: 4" in out and "WARNING" not in out


def test_mixer_check_vtail(capsys):
    code, out, _ = run(capsys, "mixer", "check", "fixedwing_vtail")
    assert code == EXIT_OK
    assert "0.5" in out and "-0.5" in out


def test_mixer_check_zero_matrix(tmp_path, capsys):
    f = tmp_path / "zero.params"
    f.write_text("MIX_PRI_STORED 0\n")
    code, out, _ = run(capsys, "mixer", "check", str(f))
    assert code == EXIT_OK
    assert "rank: 0" in out and "WARNING: rank deficient" in out


def test_mixer_check_motor_file(tmp_path, capsys):
    f = tmp_path / "motors.yaml"
    f.write_text(
        "defaults: {arm: 0.25, C_T: 0.1, C_Q: 0.005, D: 0.254, R: 0.1, K_Q: 0.0104, K_V: 0.0104, i0: 0.5, V_max: 11.1}\n"
        "motors:\n"
        "  - {theta_deg: 45, d: 1}\n  - {theta_deg: 135, d: -1}\n"
        "  - {theta_deg: 225, d: 1}\n  - {theta_deg: 315, d: -1}\n")
    code, out, _ = run(capsys, "mixer", "check", "--motors", str(f))
    assert code == EXIT_OK and "rank: 4" in out


@pytest.mark.parametrize("argv", [("mixer", "check", "nonexistent"), ("mixer", "check")])
def test_mixer_check_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == EXIT_USAGE and err


def test_param_roundtrip(tmp_path, capsys):
    f = str(tmp_path / "p.txt")
    assert run(capsys, "param", "--file", f, "set", "PRIMARY_MIXER", "hexarotor_x")[0] == EXIT_OK
    code, out, _ = run(capsys, "param", "--file", f, "get", "PRIMARY_MIXER")
    assert code == EXIT_OK and out.strip() == "PRIMARY_MIXER hexarotor_x"
    code, out, _ = run(capsys, "param", "--file", f, "dump")
    assert "PRIMARY_MIXER hexarotor_x" in out
    other = tmp_path / "q.txt"
    other.write_text(out)
    assert run(capsys, "param", "--file", str(tmp_path / "r.txt"), "load", str(other))[0] == EXIT_OK
    assert (tmp_path / "r.txt").read_text() == out


@pytest.mark.parametrize("argv", [("get", "NOPE"), ("set", "NOPE", "1"), ("set", "USE_MOTOR_PARAM", "abc")])
def test_param_errors(tmp_path, capsys, argv):
    code, _, err = run(capsys, "param", "--file", str(tmp_path / "p.txt"), *argv)
    assert code == EXIT_USAGE and err.startswith("error:")


def test_benchmark_max_rate(tmp_path, capsys):
    csv = tmp_path / "rtt.csv"
    code, out, _ = run(capsys, "benchmark", "rtt", "--max-rate", "--duration", "0.3", "--csv", str(csv),
                       "--plot", "--out", str(tmp_path))
    assert code == EXIT_OK
    assert "samples=" in out and csv.exists()
    assert (tmp_path / "rtt_inproc_rtt.png").exists()


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as ei:
        main(["frobnicate"])
    assert ei.value.code == 2
