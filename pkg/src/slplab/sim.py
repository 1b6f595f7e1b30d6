"""Monte-Carlo experiment harness: BER sweeps versus SNR and transmit-power
sweeps versus SINR target, with seeded per-trial RNG streams so results are
a pure function of (config, seed) regardless of worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import ci
from . import constellations as cst
from . import precoding as pc
from . import quantized as qt
from .channel import sample_rayleigh, stream_rng, transmit
from .errors import ConfigError

CSV_HEADER = "metric,precoder,mod,k,nt,x_value,aggregate,count_num,count_den,seed"

BER_PRECODERS = ("zf", "rzf", "mrt", "csb-ss", "civp",
                 "dac1-lp", "dacB-ccd", "cep", "cep-vga")
POWER_PRECODERS = ("pm-duality", "cpm-strict", "cpm-nonstrict", "cpm-ss")
POWER_FLOOR_DBW = -100.0

_CPM_METRIC = {"cpm-strict": ci.STRICT, "cpm-nonstrict": ci.NONSTRICT,
               "cpm-ss": ci.SYMBOL_SCALING}


@dataclass(frozen=True)
class SimConfig:
    """One sweep description; see the CLI for the matching flags."""

    k: int
    nt: int
    mod: str
    precoder: str
    snr_grid_db: tuple = ()
    gamma_grid_db: tuple = ()
    p0: float = 1.0
    bits: int = 1
    trials: int = 100
    slots: int = 10
    seed: int = 0
    workers: int = 1


@dataclass(frozen=True)
class ResultRow:
    metric: str
    precoder: str
    mod: str
    k: int
    nt: int
    x_value: float
    aggregate: float
    count_num: int
    count_den: int
    seed: int

    def to_csv(self) -> str:
        return ",".join([self.metric, self.precoder, self.mod, str(self.k),
                         str(self.nt), repr(float(self.x_value)),
                         repr(float(self.aggregate)), str(self.count_num),
                         str(self.count_den), str(self.seed)])


def rows_to_csv(rows) -> str:
    return "\n".join([CSV_HEADER] + [r.to_csv() for r in rows]) + "\n"


def _validate_common(cfg: SimConfig) -> cst.Constellation:
    if cfg.k < 1:
        raise ConfigError("k", "must be >= 1")
    if cfg.nt < 1:
        raise ConfigError("nt", "must be >= 1")
    if cfg.trials < 1:
        raise ConfigError("trials", "must be >= 1")
    if cfg.slots < 1:
        raise ConfigError("slots", "must be >= 1")
    if cfg.workers < 1:
        raise ConfigError("workers", "must be >= 1")
    if cfg.p0 <= 0:
        raise ConfigError("p0", "must be > 0")
    if not cfg.mod:
        raise ConfigError("mod", "missing required field")
    try:
        return cst.from_name(cfg.mod)
    except Exception as e:
        raise ConfigError("mod", str(e)) from None


def validate_ber(cfg: SimConfig) -> None:
    const = _validate_common(cfg)
    if not cfg.precoder:
        raise ConfigError("precoder", "missing required field")
    if cfg.precoder not in BER_PRECODERS:
        raise ConfigError("precoder", f"BER sweep supports {BER_PRECODERS}")
    if not cfg.snr_grid_db:
        raise ConfigError("snr", "missing SNR grid")
    if cfg.precoder == "dac1-lp" and const.kind != cst.PSK:
        raise ConfigError("precoder", "dac1-lp requires a PSK constellation")
    if cfg.precoder == "dacB-ccd" and cfg.bits < 1:
        raise ConfigError("bits", "must be >= 1")


def validate_power(cfg: SimConfig) -> None:
    const = _validate_common(cfg)
    if not cfg.precoder:
        raise ConfigError("precoder", "missing required field")
    if cfg.precoder not in POWER_PRECODERS:
        raise ConfigError("precoder", f"power sweep supports {POWER_PRECODERS}")
    if not cfg.gamma_grid_db:
        raise ConfigError("gamma", "missing SINR-target grid")
    if cfg.precoder != "cpm-ss" and const.kind != cst.PSK:
        raise ConfigError("mod", f"{cfg.precoder} requires a PSK constellation")
    if cfg.k > cfg.nt and cfg.precoder == "pm-duality":
        raise ConfigError("k", "pm-duality requires K <= Nt")


def _slot_signals(cfg: SimConfig, const, H, G, S, sigma2):
    """Transmit batch X (Nt, slots) and detection scales T (K, slots)."""
    k, slots = S.shape
    p0 = cfg.p0
    name = cfg.precoder
    if name in ("zf", "rzf", "mrt"):
        if name == "zf":
            xt = G @ S
        elif name == "mrt":
            xt = H.conj().T @ S
        else:
            gram = H @ H.conj().T + (k * sigma2 / p0) * np.eye(k)
            xt = H.conj().T @ np.linalg.solve(gram, S)
        norms = np.linalg.norm(xt, axis=0)
        X = math.sqrt(p0) * xt / norms
        # one genie scale per slot: the mean instantaneous gain (exact for
        # ZF, where all user gains coincide)
        T = np.broadcast_to(((H @ X) / S).real.mean(axis=0, keepdims=True),
                            (k, slots))
        return X, T
    X = np.empty((cfg.nt, slots), dtype=complex)
    T = np.empty((k, slots))
    alphabet = qt.QuantAlphabet.uniform(cfg.bits, p0, cfg.nt) if name == "dacB-ccd" else None
    for i in range(slots):
        s = S[:, i]
        if name == "csb-ss":
            res = pc.csb_symbol_scaling(H, s, p0, const, G=G)
            X[:, i] = res.x
            T[:, i] = res.objective
        elif name == "civp":
            res = pc.civp_strict(H, s, p0, G=G)
            X[:, i] = res.x
            T[:, i] = res.gains.lam.real
        elif name == "dac1-lp":
            x, level = qt.onebit_lp(H, s, p0, const)
            X[:, i] = x
            T[:, i] = max(level, 1e-12)
        elif name == "dacB-ccd":
            x, beta, _ = qt.bbit_ccd(H, s, p0, sigma2, alphabet)
            X[:, i] = x
            T[:, i] = 1.0 / max(beta, qt.BETA_FLOOR)
        else:  # cep / cep-vga
            point, _ = qt.cep_descent(H, p0, s, p0, with_gain=(name == "cep-vga"))
            X[:, i] = point.signal()
            T[:, i] = math.sqrt(p0)
    return X, T


def _ber_trial(cfg: SimConfig, const, trial: int):
    """Exact (bit_errors, bits) integer counters per SNR point for one trial."""
    rng = stream_rng(cfg.seed, trial)
    H = sample_rayleigh(cfg.k, cfg.nt, rng)
    G = pc.ci_inverse(H) if cfg.precoder in ("zf", "csb-ss", "civp") else None
    n_snr = len(cfg.snr_grid_db)
    errors = np.zeros(n_snr, dtype=np.int64)
    bits = np.zeros(n_snr, dtype=np.int64)
    for i, snr_db in enumerate(cfg.snr_grid_db):
        sigma2 = cfg.p0 * 10 ** (-snr_db / 10)
        tx_idx = rng.integers(0, const.order, size=(cfg.k, cfg.slots))
        S = const.points[tx_idx]
        X, T = _slot_signals(cfg, const, H, G, S, sigma2)
        Y = transmit(H, X, sigma2, rng)
        if const.kind == cst.PSK:
            rx_idx = cst.detect(Y, const)
        else:
            rx_idx = cst.detect(Y / np.maximum(T, 1e-12), const, 1.0)
        errors[i] += cst.bit_errors(tx_idx.ravel(), rx_idx.ravel(), const)
        bits[i] += cfg.k * cfg.slots * const.bits_per_symbol
    return errors, bits


def _power_trial(cfg: SimConfig, const, trial: int):
    """Sum of per-slot transmit powers per SINR-target point for one trial."""
    rng = stream_rng(cfg.seed, trial)
    H = sample_rayleigh(cfg.k, cfg.nt, rng)
    sums = np.zeros(len(cfg.gamma_grid_db))
    for i, gamma_db in enumerate(cfg.gamma_grid_db):
        gamma = 10 ** (gamma_db / 10)
        tx_idx = rng.integers(0, const.order, size=(cfg.k, cfg.slots))
        S = const.points[tx_idx]
        if cfg.precoder == "pm-duality":
            W, _ = pc.pm_duality(H, np.full(cfg.k, gamma), 1.0)
            sums[i] = float(np.sum(np.abs(W @ S) ** 2))
        else:
            spec = ci.CiSpec.power_min(_CPM_METRIC[cfg.precoder],
                                       np.full(cfg.k, gamma), 1.0)
            sums[i] = sum(pc.cpm(H, S[:, j], spec, const).objective
                          for j in range(cfg.slots))
    return sums


def _trial_worker(args):
    """Run a chunk of trials, returning results keyed by trial index."""
    cfg_dict, kind, trials = args
    cfg = SimConfig(**cfg_dict)
    const = cst.from_name(cfg.mod)
    fn = _ber_trial if kind == "ber" else _power_trial
    return {t: fn(cfg, const, t) for t in trials}


def _run_trials(cfg: SimConfig, kind: str) -> list:
    """Per-trial results in trial order; aggregation stays bit-identical
    regardless of the worker count because summation happens here."""
    const = cst.from_name(cfg.mod)
    fn = _ber_trial if kind == "ber" else _power_trial
    if cfg.workers == 1:
        return [fn(cfg, const, t) for t in range(cfg.trials)]
    chunks = [list(range(w, cfg.trials, cfg.workers)) for w in range(cfg.workers)]
    jobs = [(asdict(cfg), kind, c) for c in chunks if c]
    results = {}
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        for part in pool.map(_trial_worker, jobs):
            results.update(part)
    return [results[t] for t in range(cfg.trials)]


def run_ber_sweep(cfg: SimConfig) -> list[ResultRow]:
    """Uncoded BER versus SNR (P0 fixed, sigma^2 = P0 * 10^(-snr/10))."""
    validate_ber(cfg)
    errors = np.zeros(len(cfg.snr_grid_db), dtype=np.int64)
    bits = np.zeros(len(cfg.snr_grid_db), dtype=np.int64)
    for e, b in _run_trials(cfg, "ber"):
        errors += e
        bits += b
    return [ResultRow("ber", cfg.precoder, cfg.mod, cfg.k, cfg.nt, snr,
                      int(errors[i]) / int(bits[i]), int(errors[i]),
                      int(bits[i]), cfg.seed)
            for i, snr in enumerate(cfg.snr_grid_db)]


def run_power_sweep(cfg: SimConfig) -> list[ResultRow]:
    """Average transmit power (dBW) versus common SINR target, sigma^2 = 1."""
    validate_power(cfg)
    sums = np.zeros(len(cfg.gamma_grid_db))
    for part in _run_trials(cfg, "power"):
        sums += part
    n_slots = cfg.trials * cfg.slots
    rows = []
    for i, gamma_db in enumerate(cfg.gamma_grid_db):
        mean = sums[i] / n_slots
        dbw = 10 * math.log10(mean) if mean > 1e-10 else POWER_FLOOR_DBW
        rows.append(ResultRow("avg_power_dbw", cfg.precoder, cfg.mod, cfg.k,
                              cfg.nt, gamma_db, dbw, n_slots, n_slots, cfg.seed))
    return rows
