import json
from pathlib import Path

import numpy as np

from machclock.cli import EXPERIMENTS, build_parser, load_config, main, run


def run_cli(args):
    return main(args)


def read_summary(out_dir):
    return json.loads((Path(out_dir) / "summary.json").read_text())


def read_series(out_dir):
    lines = (Path(out_dir) / "series.csv").read_text().splitlines()
    assert lines[0].startswith("# machclock ")
    header = lines[1].split(",")
    data = np.array([[float(v) for v in line.split(",")] for line in lines[2:]])
    return header, data


class TestConfigHandling:
    def test_defaults_resolve_for_every_experiment(self):
        parser = build_parser()
        for name in EXPERIMENTS:
            args = parser.parse_args([name])
            cfg = load_config(name, args)
            assert cfg.experiment == name

    def test_flags_override_file(self, tmp_path):
        cfg_file = tmp_path / "run.ini"
        cfg_file.write_text(
            "[experiment]\nname = two-level\nmaster_seed = 5\n"
            "output_dir = fromfile\n\n[params]\ngamma = 2.0\n"
        )
        parser = build_parser()
        args = parser.parse_args(
            ["two-level", "--config", str(cfg_file), "--seed", "9",
             "--out-dir", str(tmp_path / "flag"), "--set", "nbar=0.5"]
        )
        cfg = load_config("two-level", args)
        assert cfg.master_seed == 9
        assert cfg.output_dir == str(tmp_path / "flag")
        assert cfg.params["gamma"] == 2.0
        assert cfg.params["nbar"] == 0.5

    def test_unknown_key_is_rejected(self, tmp_path):
        assert run_cli(["two-level", "--set", "bogus=1",
                        "--out-dir", str(tmp_path)]) == 2

    def test_mismatched_config_name_is_rejected(self, tmp_path):
        cfg_file = tmp_path / "run.ini"
        cfg_file.write_text("[experiment]\nname = radiocarbon\n")
        assert run_cli(["two-level", "--config", str(cfg_file),
                        "--out-dir", str(tmp_path / "o")]) == 2

    def test_out_of_range_parameter_exits_2(self, tmp_path):
        assert run_cli(["two-level", "--set", "nbar=-1",
                        "--out-dir", str(tmp_path)]) == 2

    def test_precondition_violation_exits_2(self, tmp_path):
        assert run_cli(["two-level", "--set", "dt=1.0",
                        "--out-dir", str(tmp_path)]) == 2


class TestOutputs:
    def test_two_level_series_matches_closed_form(self, tmp_path):
        out = tmp_path / "out"
        assert run_cli(["two-level", "--seed", "3", "--out-dir", str(out)]) == 0
        summary = read_summary(out)
        assert summary["invariant_checks"]["max_abs_error_vs_closed_form"] < 1e-8
        header, data = read_series(out)
        assert header == ["t", "x1", "x2", "x3", "x1_ref", "x2_ref", "x3_ref"]
        assert np.max(np.abs(data[:, 3] - data[:, 6])) < 1e-8

    def test_meta_line_carries_seed_and_params(self, tmp_path):
        out = tmp_path / "out"
        run_cli(["regime-scan", "--seed", "17", "--out-dir", str(out)])
        first = (out / "series.csv").read_text().splitlines()[0]
        meta = json.loads(first[len("# machclock "):])
        assert meta["master_seed"] == 17
        assert meta["params"]["d_value"] == 10.0

    def test_byte_identical_reruns(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert run_cli(
                ["swap-clock", "--seed", "42", "--trajectories", "40",
                 "--out-dir", str(out)]
            ) == 0
        assert (a / "series.csv").read_bytes() == (b / "series.csv").read_bytes()
        assert (a / "summary.json").read_bytes() == (b / "summary.json").read_bytes()

    def test_crlf_line_endings_and_decimal_points(self, tmp_path):
        out = tmp_path / "out"
        run_cli(["regime-scan", "--seed", "1", "--out-dir", str(out)])
        raw = (out / "series.csv").read_bytes()
        assert b"\r\n" in raw
        assert b";" not in raw.splitlines()[1]

    def test_emit_plots_writes_svg(self, tmp_path):
        out = tmp_path / "out"
        run_cli(["regime-scan", "--seed", "1", "--out-dir", str(out), "--emit-plots"])
        svgs = list(out.glob("plot_*.svg"))
        assert svgs
        text = svgs[0].read_text()
        assert text.startswith("<svg") and "polyline" in text
        assert "machclock" in text  # embedded parameter echo

    def test_jz_measure_writes_record_file(self, tmp_path):
        out = tmp_path / "out"
        assert run_cli(
            ["jz-measure", "--seed", "5", "--out-dir", str(out),
             "--set", "t_final=10"]
        ) == 0
        lines = (out / "records_n1.csv").read_text().splitlines()
        assert lines[1] == "t,dy"
        assert len(lines) > 100

    def test_optomech_jump_summary_checks(self, tmp_path):
        out = tmp_path / "out"
        assert run_cli(
            ["optomech-jump", "--seed", "5", "--out-dir", str(out),
             "--trajectories", "200", "--set", "t_final=0.3"]
        ) == 0
        summary = read_summary(out)
        assert summary["invariant_checks"]["current_identity_residual"] < 1e-8
        assert summary["invariant_checks"]["ensemble_matches_solver_3se"] is True

    def test_numeric_abort_exits_3(self, tmp_path):
        # an explicit dt violating the diffusive step rule aborts at run time
        status = run_cli(
            ["jz-measure", "--seed", "1", "--out-dir", str(tmp_path / "o"),
             "--set", "dt=1.0"]
        )
        assert status == 3

    def test_fast_swap_figure_trace_configuration(self, tmp_path):
        out = tmp_path / "out"
        assert run_cli(
            ["swap-clock", "--seed", "8", "--out-dir", str(out),
             "--trajectories", "3",
             "--set", "gamma=500", "--set", "strength=1.0",
             "--set", "z1_0=0.5", "--set", "z2_0=-0.5",
             "--set", "dt=1e-6", "--set", "t_final=5e-3"]
        ) == 0
        header, data = read_series(out)
        z_minus = data[:, header.index("zminus_sample")]
        # decays from 1.0 on the 1/(2 gamma) timescale, with noise on top
        assert abs(z_minus[0] - 1.0) < 1e-12
        assert np.abs(z_minus[data[:, 0] > 4e-3]).max() < 0.5

    def test_dicke_decay_reports_adjudication(self, tmp_path):
        out = tmp_path / "out"
        assert run_cli(
            ["dicke-decay", "--seed", "5", "--out-dir", str(out),
             "--set", "nbar_mech=50", "--set", "rate=0.01"]
        ) == 0
        summary = read_summary(out)
        adj = summary["semiclassical_adjudication"]
        assert set(adj) >= {"exact", "paper", "derived", "winner"}
        assert adj["winner"] == "derived"
