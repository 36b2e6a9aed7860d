import json

import numpy as np
import pytest

from src.config.run_config import irrelevant_options, load_config, parse_config, parse_p_values
from src.main import main
from src.runner import EXIT_NONCONVERGENCE, EXIT_PASS, EXIT_USAGE, CommandRunner, run_command
from src.utils.errors import ConfigError
from src.utils.tables import OutputError, read_field, read_table
from tests.oracles import shooting_eigenvalue


GRUSHIN_CONFIG = {
    "frame": "grushin",
    "domain": {"bounds": [[-1, 1], [-1, 1]]},
    "grid": {"resolution": 9},
    "solver": {"p": 2.0}
}


def _document(**sections):
    doc = json.loads(json.dumps(GRUSHIN_CONFIG))
    doc.update(sections)
    return json.dumps(doc, indent=2)


def _write(tmp_path, **sections):
    path = tmp_path / "run.json"
    path.write_text(_document(**sections))
    return str(path)


# configuration

def test_defaults():
    cfg = parse_config(_document())
    assert cfg.frame.name == "grushin"
    assert cfg.solver.tol_rel == 1e-10
    assert cfg.solver.tol_res == 1e-6
    assert cfg.solver.max_iter == 10000
    assert cfg.options.suite == "default"
    assert cfg.output.directory == "results"


def test_out_of_range_exponent_names_key():
    with pytest.raises(ConfigError) as info:
        parse_config(_document(solver={"p": 0.5}))
    assert info.value.key == "solver.p"
    assert info.value.line is not None


def test_unknown_key():
    with pytest.raises(ConfigError) as info:
        parse_config(_document(solver={"p": 2.0, "tolerance": 1e-3}))
    assert info.value.key == "solver.tolerance"


def test_malformed_json_reports_line():
    with pytest.raises(ConfigError) as info:
        parse_config('{\n  "frame": "grushin",\n  oops\n}')
    assert info.value.line == 3


def test_frame_dimension_mismatch():
    with pytest.raises(ConfigError) as info:
        parse_config(_document(frame="heisenberg"))
    assert info.value.key == "frame"


def test_grid_dimension_mismatch():
    with pytest.raises(ConfigError):
        parse_config(_document(grid={"resolution": [9, 9, 9]}))


def test_p_range():
    assert parse_p_values("1.5:3.0:0.5") == [1.5, 2.0, 2.5, 3.0]
    assert parse_p_values([2, 3]) == [2.0, 3.0]
    with pytest.raises(ValueError):
        parse_p_values("3:1:0.5")
    with pytest.raises(ValueError):
        parse_p_values([1.0, 2.0])

    cfg = parse_config(_document(options={"p_values": "1.5:3.0:0.5"}))
    assert len(cfg.options.p_values) == 4


def test_digest_is_stable():
    a = parse_config(_document())
    b = parse_config(json.dumps(GRUSHIN_CONFIG))
    assert a.digest() == b.digest()
    assert a.digest() != parse_config(_document(solver={"p": 3.0})).digest()


def test_irrelevant_options():
    cfg = parse_config(_document(options={"p_values": [2.0], "harnack_radius": 0.2}))
    assert irrelevant_options(cfg, "solve") == ["harnack_radius", "p_values"]
    assert irrelevant_options(cfg, "verify") == ["p_values"]


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.json")


# command line

def test_solve_command(tmp_path):
    out = tmp_path / "out"
    assert main(["solve", _write(tmp_path), "-o", str(out)]) == EXIT_PASS

    results = read_table(out / "results.csv")
    assert len(results) == 1
    assert results["lambda1"][0] > 0
    assert results["Q"][0] == 3

    coords, values = read_field(out / "u1.csv")
    assert coords.shape == (49, 2)
    assert (values > 0).all()
    assert (out / "effective_config.json").exists()
    assert (out / "results.csv").read_text().startswith("# subelliptic-eigen 1.0.0 config=")


def test_dimension_command(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["dimension", _write(tmp_path), "-o", str(out)]) == EXIT_PASS
    assert "Q = 3" in capsys.readouterr().out


def test_dimension_at_even_resolution(tmp_path, capsys):
    path = _write(tmp_path, grid={"resolution": 64})
    assert main(["dimension", path, "-o", str(tmp_path / "dim")]) == EXIT_PASS
    assert "Q = 3" in capsys.readouterr().out

    assert main(["solve", path, "-o", str(tmp_path / "solve")]) == EXIT_PASS
    assert read_table(tmp_path / "solve" / "results.csv")["Q"][0] == 3


def test_sweep_command(tmp_path):
    out = tmp_path / "out"
    path = _write(tmp_path, options={"p_values": "1.5:3.0:0.5"})
    assert main(["sweep", path, "-o", str(out)]) == EXIT_PASS

    sweep = read_table(out / "sweep.csv")
    assert list(sweep["p"]) == [1.5, 2.0, 2.5, 3.0]
    assert (sweep["lambda1"] > 0).all()


def test_distance_command(tmp_path):
    out = tmp_path / "out"
    path = _write(tmp_path, options={"source": [0.0, 0.0]})
    assert main(["distance", path, "-o", str(out)]) == EXIT_PASS

    coords, values = read_field(out / "distance.csv")
    assert values.min() == 0.0
    assert coords[values.argmin()].tolist() == [0.0, 0.0]


def test_verify_command(tmp_path):
    out = tmp_path / "out"
    path = _write(tmp_path, options={"suite": "quick", "convexity_samples": 1000, "poincare_fields": 10})
    assert main(["verify", path, "-o", str(out)]) == EXIT_PASS
    checks = read_table(out / "checks.csv")
    assert checks["passed"].all()


def test_nonconvergence_exit(tmp_path):
    out = tmp_path / "out"
    path = _write(tmp_path, solver={"p": 3.0, "max_iter": 1})
    assert main(["solve", path, "-o", str(out)]) == EXIT_NONCONVERGENCE
    assert len(read_table(out / "trajectory.csv")) >= 1


def test_usage_errors(tmp_path):
    assert main(["solve", _write(tmp_path, solver={"p": 0.5})]) == EXIT_USAGE
    assert main(["solve", str(tmp_path / "absent.json")]) == EXIT_USAGE
    with pytest.raises(SystemExit) as info:
        main(["launch", _write(tmp_path)])
    assert info.value.code == EXIT_USAGE


def test_invalid_source_exit(tmp_path):
    path = _write(tmp_path, options={"source": [0.1, 0.0]})
    assert main(["distance", path, "-o", str(tmp_path / "out")]) == EXIT_USAGE


def test_solve_unit_square(tmp_path):
    cfg = parse_config(json.dumps({
        "frame": "euclidean",
        "domain": {"bounds": [[0, 1], [0, 1]]},
        "grid": {"resolution": 64},
        "solver": {"p": 2.0}
    }))
    assert run_command("solve", cfg, str(tmp_path)) == EXIT_PASS
    results = read_table(tmp_path / "results.csv")
    assert results["lambda1"][0] == pytest.approx(2 * np.pi ** 2, rel=0.01)


def test_sweep_on_interval(tmp_path):
    cfg = parse_config(json.dumps({
        "frame": "euclidean",
        "domain": {"bounds": [[0, 1]]},
        "grid": {"resolution": 64},
        "options": {"p_values": "1.5:3.0:0.5"}
    }))
    assert run_command("sweep", cfg, str(tmp_path)) == EXIT_PASS
    assert len(read_table(tmp_path / "sweep.csv")) == 4


def test_rerun_is_byte_identical(tmp_path):
    cfg = parse_config(_document())
    run_command("solve", cfg, str(tmp_path / "a"))
    run_command("solve", cfg, str(tmp_path / "b"))
    for name in ("results.csv", "u1.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_step_limit_reaches_reported_dimension(tmp_path):
    path = _write(tmp_path, options={"s_max": 1})
    assert main(["dimension", path, "-o", str(tmp_path / "dim")]) == EXIT_USAGE

    assert main(["solve", path, "-o", str(tmp_path / "solve")]) == EXIT_PASS
    assert np.isnan(read_table(tmp_path / "solve" / "results.csv")["Q"][0])


def test_nonconvergence_survives_unwritable_trajectory(tmp_path, monkeypatch):
    def refuse(self, error):
        raise OutputError("disk full")

    monkeypatch.setattr(CommandRunner, "_write_trajectory", refuse)
    path = _write(tmp_path, solver={"p": 3.0, "max_iter": 1})
    assert main(["solve", path, "-o", str(tmp_path / "out")]) == EXIT_NONCONVERGENCE


def test_solve_sublinear_interval(tmp_path):
    cfg = parse_config(json.dumps({
        "frame": "euclidean",
        "domain": {"bounds": [[0, 1]]},
        "grid": {"resolution": 512},
        "solver": {"p": 1.5}
    }))
    assert run_command("solve", cfg, str(tmp_path)) == EXIT_PASS
    results = read_table(tmp_path / "results.csv")
    assert results["lambda1"][0] == pytest.approx(shooting_eigenvalue(1.5), rel=0.02)
