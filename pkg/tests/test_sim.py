import numpy as np
import pytest

from slplab import sim
from slplab.errors import ConfigError


def small_ber_cfg(**kw):
    base = dict(k=3, nt=3, mod="psk4", precoder="csb-ss",
                snr_grid_db=(0.0, 10.0), trials=4, slots=6, seed=7)
    base.update(kw)
    return sim.SimConfig(**base)


def small_power_cfg(**kw):
    base = dict(k=2, nt=2, mod="psk4", precoder="cpm-nonstrict",
                gamma_grid_db=(0.0, 10.0), trials=3, slots=4, seed=5)
    base.update(kw)
    return sim.SimConfig(**base)


class TestValidation:
    def test_missing_precoder(self):
        with pytest.raises(ConfigError) as ei:
            sim.run_ber_sweep(small_ber_cfg(precoder=""))
        assert ei.value.field == "precoder"

    def test_wrong_family_rejected(self):
        with pytest.raises(ConfigError):
            sim.run_ber_sweep(small_ber_cfg(precoder="cpm-nonstrict"))
        with pytest.raises(ConfigError):
            sim.run_power_sweep(small_power_cfg(precoder="zf"))

    def test_bad_mod(self):
        with pytest.raises(ConfigError) as ei:
            sim.run_ber_sweep(small_ber_cfg(mod="psk5"))
        assert ei.value.field == "mod"

    def test_empty_grid(self):
        with pytest.raises(ConfigError):
            sim.run_ber_sweep(small_ber_cfg(snr_grid_db=()))

    def test_onebit_needs_psk(self):
        with pytest.raises(ConfigError):
            sim.run_ber_sweep(small_ber_cfg(mod="qam16", precoder="dac1-lp"))

    def test_overloaded_pm_rejected(self):
        with pytest.raises(ConfigError):
            sim.run_power_sweep(small_power_cfg(k=3, nt=2, precoder="pm-duality"))


class TestBerSweep:
    def test_noiseless_ci_precoders_error_free(self):
        # 60 dB SNR stands in for the noiseless limit; CI margins keep every
        # decision correct
        for precoder in ("csb-ss", "civp", "zf"):
            rows = sim.run_ber_sweep(small_ber_cfg(
                precoder=precoder, k=4, nt=4, snr_grid_db=(60.0,),
                trials=5, slots=20))
            assert rows[0].aggregate == 0.0

    def test_counts_are_exact(self):
        rows = sim.run_ber_sweep(small_ber_cfg())
        for row in rows:
            assert row.count_den == 3 * 6 * 4 * 2  # k slots trials bits
            assert row.aggregate == row.count_num / row.count_den

    def test_determinism(self):
        a = sim.run_ber_sweep(small_ber_cfg())
        b = sim.run_ber_sweep(small_ber_cfg())
        assert sim.rows_to_csv(a) == sim.rows_to_csv(b)

    def test_worker_count_invariance(self):
        serial = sim.run_ber_sweep(small_ber_cfg())
        parallel = sim.run_ber_sweep(small_ber_cfg(workers=2))
        assert sim.rows_to_csv(serial) == sim.rows_to_csv(parallel)

    def test_ber_decreases_with_snr(self):
        rows = sim.run_ber_sweep(small_ber_cfg(
            precoder="zf", snr_grid_db=(0.0, 30.0), trials=12, slots=30))
        assert rows[0].aggregate > rows[1].aggregate

    def test_civp_no_better_than_csb(self):
        cfg_a = small_ber_cfg(precoder="civp", k=4, nt=4,
                              snr_grid_db=(12.0,), trials=20, slots=40)
        cfg_b = small_ber_cfg(precoder="csb-ss", k=4, nt=4,
                              snr_grid_db=(12.0,), trials=20, slots=40)
        a = sim.run_ber_sweep(cfg_a)[0].aggregate
        b = sim.run_ber_sweep(cfg_b)[0].aggregate
        assert a >= b  # strict region is a subset of the sector region

    def test_qam_sweep_runs(self):
        rows = sim.run_ber_sweep(small_ber_cfg(
            mod="qam16", precoder="csb-ss", snr_grid_db=(25.0,),
            trials=4, slots=10))
        assert 0.0 <= rows[0].aggregate <= 1.0

    def test_quantized_precoders_run(self):
        for precoder in ("dac1-lp", "dacB-ccd", "cep", "cep-vga"):
            rows = sim.run_ber_sweep(small_ber_cfg(
                precoder=precoder, k=2, nt=4, snr_grid_db=(15.0,),
                trials=3, slots=5, bits=2))
            assert 0.0 <= rows[0].aggregate <= 1.0


class TestPowerSweep:
    def test_power_floor_at_tiny_targets(self):
        rows = sim.run_power_sweep(small_power_cfg(gamma_grid_db=(-130.0,)))
        assert rows[0].aggregate == sim.POWER_FLOOR_DBW

    def test_power_monotone_in_target(self):
        rows = sim.run_power_sweep(small_power_cfg(gamma_grid_db=(5.0, 10.0)))
        assert rows[1].aggregate >= rows[0].aggregate

    def test_cpm_below_pm_at_high_target(self):
        cfg = small_power_cfg(k=4, nt=4, gamma_grid_db=(25.0,),
                              trials=6, slots=10, seed=0)
        cpm_row = sim.run_power_sweep(cfg)[0]
        pm_row = sim.run_power_sweep(
            small_power_cfg(k=4, nt=4, precoder="pm-duality",
                            gamma_grid_db=(25.0,), trials=6, slots=10,
                            seed=0))[0]
        assert cpm_row.aggregate <= pm_row.aggregate

    def test_determinism_and_workers(self):
        a = sim.run_power_sweep(small_power_cfg())
        b = sim.run_power_sweep(small_power_cfg(workers=2))
        assert sim.rows_to_csv(a) == sim.rows_to_csv(b)

    def test_pm_duality_block_reuse(self):
        rows = sim.run_power_sweep(small_power_cfg(precoder="pm-duality"))
        assert len(rows) == 2
        assert all(np.isfinite(r.aggregate) for r in rows)


class TestCsvSchema:
    def test_golden_header(self):
        assert sim.CSV_HEADER == ("metric,precoder,mod,k,nt,x_value,"
                                  "aggregate,count_num,count_den,seed")

    def test_row_format_round_trip(self):
        rows = sim.run_ber_sweep(small_ber_cfg())
        text = sim.rows_to_csv(rows)
        lines = text.strip().split("\n")
        assert lines[0] == sim.CSV_HEADER
        fields = lines[1].split(",")
        assert fields[0] == "ber"
        assert float(fields[6]) == rows[0].aggregate
        assert int(fields[7]) == rows[0].count_num
