import numpy as np

from slplab.channel import load_channel_csv
from slplab.cli import main, parse_grid


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


class TestGrid:
    def test_colon_grid_inclusive(self):
        assert parse_grid("0:5:40") == tuple(float(v) for v in range(0, 45, 5))

    def test_comma_grid(self):
        assert parse_grid("1,2.5,7") == (1.0, 2.5, 7.0)


class TestBerSweep:
    ARGS = ["ber-sweep", "--k", "2", "--nt", "2", "--mod", "psk4",
            "--precoder", "zf", "--snr", "0:5:40", "--trials", "3",
            "--slots", "4", "--seed", "7"]

    def test_row_count_from_grid(self, capsys):
        code, out, _ = run(self.ARGS, capsys)
        assert code == 0
        lines = out.strip().split("\n")
        assert len(lines) == 1 + 9  # header + 9 SNR points

    def test_missing_precoder_exit_2(self, capsys):
        argv = [a for a in self.ARGS if a not in ("--precoder", "zf")]
        code, _, err = run(argv, capsys)
        assert code == 2
        assert "precoder" in err

    def test_byte_identical_reruns(self, capsys):
        _, out1, _ = run(self.ARGS, capsys)
        _, out2, _ = run(self.ARGS, capsys)
        assert out1 == out2

    def test_out_file(self, tmp_path, capsys):
        path = tmp_path / "r.csv"
        code, out, _ = run(self.ARGS + ["--out", str(path)], capsys)
        assert code == 0 and out == ""
        assert path.read_text().startswith("metric,precoder")


class TestConfigFile:
    def test_config_file_and_flag_override(self, tmp_path, capsys):
        cfg = tmp_path / "sweep.cfg"
        cfg.write_text(
            "# power sweep settings\n"
            "k=2\nnt=2\nmod=psk4\nprecoder=cpm-nonstrict\n"
            "gamma=0:10:10\ntrials=2\nslots=3\nseed=1\n")
        code, out, _ = run(["power-sweep", "--config", str(cfg)], capsys)
        assert code == 0
        assert len(out.strip().split("\n")) == 3
        # flag overrides the file value
        code, out2, _ = run(["power-sweep", "--config", str(cfg),
                             "--gamma", "5"], capsys)
        assert code == 0
        assert len(out2.strip().split("\n")) == 2

    def test_unknown_key_exit_2(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("bogus=1\n")
        code, _, err = run(["ber-sweep", "--config", str(cfg)], capsys)
        assert code == 2
        assert "config" in err

    def test_bad_value_names_field(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("k=two\n")
        code, _, err = run(["ber-sweep", "--config", str(cfg)], capsys)
        assert code == 2
        assert "k" in err


class TestDemo:
    def test_demo_prints_margins(self, capsys):
        code, out, _ = run(["demo", "--k", "2", "--nt", "3", "--mod", "psk8",
                            "--precoder", "csb-ss", "--seed", "3"], capsys)
        assert code == 0
        assert "ci margins" in out
        assert "achieved level" in out

    def test_demo_power_min(self, capsys):
        code, out, _ = run(["demo", "--k", "2", "--nt", "2", "--mod", "psk4",
                            "--precoder", "cpm-nonstrict", "--gamma0", "10"],
                           capsys)
        assert code == 0
        assert "transmit power" in out

    def test_demo_channel_dump_and_load(self, tmp_path, capsys):
        dump = tmp_path / "h.csv"
        code, _, _ = run(["demo", "--k", "2", "--nt", "2", "--mod", "psk4",
                          "--precoder", "zf", "--dump-channel", str(dump)],
                         capsys)
        assert code == 0
        H = load_channel_csv(dump)
        assert H.shape == (2, 2)
        code, out, _ = run(["demo", "--k", "2", "--nt", "2", "--mod", "psk4",
                            "--precoder", "zf", "--load-channel", str(dump)],
                           capsys)
        assert code == 0

    def test_unsupported_mod_exit_2(self, capsys):
        code, _, err = run(["demo", "--k", "2", "--nt", "2", "--mod",
                            "qam32", "--precoder", "zf"], capsys)
        assert code == 2
        assert "mod" in err
