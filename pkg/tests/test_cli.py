import subprocess
import sys

import numpy as np
import pytest

from dualfb.cli import COMMANDS, build_parser, config_schema, main, parse_scalar, parse_set, resolve_options
from dualfb.errors import InputError
from dualfb.io import TRACE_HEADER, read_pgm, read_trace_csv, read_vector_csv, write_matrix_csv, write_pgm, write_vector_csv
from dualfb.prox.sets import Box, L1Ball, NonnegOrthant, WholeSpace


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


# option precedence --------------------------------------------------------------


@pytest.mark.parametrize(
    "flag,config,expected",
    [
        (None, None, 1.0),
        (None, 0.5, 1.5),
        (0.25, None, 1.75),
        (0.25, 0.5, 1.75),
    ],
)
def test_precedence_model_option(tmp_path, capsys, flag, config, expected):
    argv = ["prox-eval", "--fun", "abs", "--x", "2"]
    if config is not None:
        cfg = tmp_path / "c.toml"
        cfg.write_text(f"[prox-eval]\nalpha = {config}\n")
        argv += ["--config", str(cfg)]
    if flag is not None:
        argv += ["--alpha", str(flag)]
    code, out, _ = _run(capsys, *argv)
    assert code == 0
    assert float(out) == pytest.approx(expected)


@pytest.mark.parametrize(
    "flag,config,expected",
    [(None, None, 1000), (None, 7, 7), (3, None, 3), (3, 7, 3)],
)
def test_precedence_solver_option(tmp_path, flag, config, expected):
    parser = build_parser()
    argv = ["potter-arun"] + ([] if flag is None else ["--max-iter", str(flag)])
    args = parser.parse_args(argv)
    cfg = None if config is None else {"solver": {"max_iter": config}}
    assert resolve_options("potter-arun", args, cfg)["max_iter"] == expected


def test_precedence_io_option(tmp_path, capsys):
    vec, rho = tmp_path / "s.csv", tmp_path / "rho.csv"
    write_matrix_csv(vec, [[0.6, 0.8]])
    write_vector_csv(rho, [1.0])
    t_cfg, t_flag = tmp_path / "cfg_trace.csv", tmp_path / "flag_trace.csv"
    cfg = tmp_path / "c.toml"
    cfg.write_text(f'[io]\ntrace = "{t_cfg}"\n[solver]\nmax_iter = 4\ntol = 0.0\n')
    base = ["potter-arun", "--vectors", str(vec), "--rho", str(rho), "--config", str(cfg)]
    assert _run(capsys, *base)[0] == 2
    assert len(read_trace_csv(t_cfg)) == 4
    assert _run(capsys, *base, "--trace", str(t_flag), "--max-iter", "6")[0] == 2
    assert len(read_trace_csv(t_flag)) == 6


def test_config_schema_covers_every_option():
    schema = config_schema()
    for cmd, opts in COMMANDS.items():
        for o in opts:
            section = cmd if o.section == "model" else o.section
            assert o.dest in schema[section]


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text("[solver]\nmax_iters = 3\n")
    code, _, err = _run(capsys, "prox-eval", "--fun", "abs", "--x", "1", "--config", str(cfg))
    assert code == 1
    assert err.startswith("error:")


def test_config_type_error(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text('[prox-eval]\nalpha = "heavy"\n')
    code, _, err = _run(capsys, "prox-eval", "--fun", "abs", "--x", "1", "--config", str(cfg))
    assert code == 1 and err.startswith("error:")


# exit codes ------------------------------------------------------------------------


def test_prox_eval_soft_threshold(capsys):
    code, out, _ = _run(capsys, "prox-eval", "--fun", "power", "--p", "1", "--alpha", "1", "--x", "2")
    assert code == 0
    assert out.strip() == "1"


def test_prox_eval_set_kind(capsys):
    code, out, _ = _run(capsys, "prox-eval", "--fun", "indicator", "--set", "box:0:1", "--x", "2,-1,0.5")
    assert code == 0
    assert out.strip() == "1,0,0.5"


def test_prox_eval_conjugate_flag(capsys):
    assert _run(capsys, "prox-eval", "--fun", "abs", "--x", "0.5", "--conj")[1].strip() == "0.5"
    assert _run(capsys, "prox-eval", "--fun", "abs", "--x", "0.5", "--conj", "no")[1].strip() == "0"


@pytest.mark.parametrize(
    "argv",
    [
        ["prox-eval", "--fun", "nosuch", "--x", "1"],
        ["prox-eval", "--fun", "abs"],
        ["prox-eval", "--fun", "abs", "--x", "one"],
        ["tv", "--input", "/nonexistent.pgm", "--output", "/tmp/o.pgm"],
        ["tv", "--p", "3"],
        ["nosuchcommand"],
        [],
        ["verify", "--suite", "nosuch"],
        ["bestapprox", "--input", "/nonexistent.csv"],
    ],
)
def test_input_errors_exit_one(capsys, argv):
    code, _, err = _run(capsys, *argv)
    assert code == 1
    assert "error:" in err or argv == []


def test_non_square_image_rejected(tmp_path, capsys):
    src = tmp_path / "z.pgm"
    write_pgm(src, np.zeros((2, 3)))
    code, _, err = _run(capsys, "tv", "--input", str(src), "--output", str(tmp_path / "x.pgm"))
    assert code == 1 and err.startswith("error:")


def test_max_iter_exits_two(tmp_path, capsys):
    src = tmp_path / "z.pgm"
    write_pgm(src, np.random.default_rng(0).uniform(size=(8, 8)))
    code, _, _ = _run(capsys, "tv", "--input", str(src), "--output", str(tmp_path / "x.pgm"), "--max-iter", "3",
                      "--tol", "0")
    assert code == 2


def test_verify_exit_zero(capsys):
    code, out, _ = _run(capsys, "verify", "--suite", "adjoint")
    assert code == 0
    assert out.startswith("PASS")


# end-to-end ------------------------------------------------------------------------------


@pytest.mark.parametrize("maxval", [255, 65535])
def test_tv_constant_image_identity(tmp_path, capsys, maxval):
    src, dst = tmp_path / "z.pgm", tmp_path / "x.pgm"
    write_pgm(src, np.full((16, 16), 0.42), maxval)
    code, _, _ = _run(capsys, "tv", "--input", str(src), "--output", str(dst), "--mu", "0.1", "--p", "2", "--tol", "1e-6")
    assert code == 0
    assert dst.read_bytes() == src.read_bytes()


def test_tv_trace_format(tmp_path, capsys):
    src, dst, trace = tmp_path / "z.pgm", tmp_path / "x.pgm", tmp_path / "t.csv"
    write_pgm(src, np.random.default_rng(1).uniform(size=(8, 8)))
    code, _, _ = _run(capsys, "tv", "--input", str(src), "--output", str(dst), "--p", "inf", "--tol", "1e-6",
                      "--max-iter", "5000", "--trace", str(trace))
    assert code == 0
    assert trace.read_text().splitlines()[0] == TRACE_HEADER
    rows = read_trace_csv(trace)
    assert [r["n"] for r in rows] == list(range(len(rows)))
    assert all(r["gap"] is None or r["gap"] >= -1e-8 for r in rows)
    assert read_pgm(dst).shape == (8, 8)


def test_vector_commands(tmp_path, capsys):
    z = tmp_path / "z.csv"
    write_vector_csv(z, [3.0, 0.5])
    atoms = tmp_path / "e.csv"
    write_matrix_csv(atoms, np.eye(2))
    code, out, _ = _run(capsys, "dict", "--input", str(z), "--atoms", str(atoms), "--phi", "abs:1", "--tol", "1e-12")
    assert code == 0
    np.testing.assert_allclose([float(t) for t in out.split()], [2.0, 0.0], atol=1e-9)

    out_path = tmp_path / "x.csv"
    code, _, _ = _run(capsys, "bestapprox", "--input", str(z), "--C", "box:0:1", "--output", str(out_path), "--tol", "1e-12")
    assert code == 0
    np.testing.assert_allclose(read_vector_csv(out_path), [1.0, 0.5], atol=1e-9)

    code, out, _ = _run(capsys, "softapprox", "--input", str(z), "--C", "box:0:1", "--phi", "abs:100", "--tol", "1e-12",
                        "--max-iter", "20000")
    assert code == 0
    np.testing.assert_allclose([float(t) for t in out.split()], [1.0, 0.5], atol=1e-6)


def test_console_script_entry(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "dualfb.cli", "prox-eval", "--fun", "zero", "--x", "4"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip() == "4"


# spec strings ---------------------------------------------------------------------------


def test_parse_scalar_specs():
    assert float(parse_scalar("power:2:0.5").prox(3.0, 1.0)) == pytest.approx(1.5)
    assert float(parse_scalar("abs:1").prox(3.0, 1.0)) == pytest.approx(2.0)
    assert float(parse_scalar("interval:0:1").prox(3.0, 1.0)) == pytest.approx(1.0)
    for bad in ["power:2", "nope", "huber:1:x", "zero:1"]:
        with pytest.raises(InputError):
            parse_scalar(bad)


def test_parse_set_specs():
    assert isinstance(parse_set("whole", 3), WholeSpace)
    assert isinstance(parse_set("nonneg", 3), NonnegOrthant)
    assert isinstance(parse_set("box:0:1", 3), Box)
    assert isinstance(parse_set("l1ball:2", 3), L1Ball)
    np.testing.assert_allclose(parse_set("l2ball:1", 2).project(np.array([3.0, 4.0])), [0.6, 0.8])
    with pytest.raises(InputError):
        parse_set("sphere:1", 3)
