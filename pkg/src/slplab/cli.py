"""Command-line interface.

Subcommands: ber-sweep, power-sweep, and demo (single-slot diagnostic).
Options can also come from a flat key=value config file via --config;
explicit flags override file values.  CSV goes to stdout or --out.

Exit codes: 0 success, 2 configuration error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import ci
from . import constellations as cst
from . import precoding as pc
from . import quantized as qt
from . import sim
from .channel import load_channel_csv, sample_rayleigh, save_channel_csv, stream_rng
from .errors import ConfigError, SlpError, UnsupportedOrder


def parse_grid(text: str) -> tuple:
    """Grid syntax: "start:step:stop" (inclusive) or "a,b,c"."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError("grid must be start:step:stop or a comma list")
        start, step, stop = (float(p) for p in parts)
        if step <= 0:
            raise ValueError("grid step must be positive")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return tuple(start + step * i for i in range(max(n, 0)))
    return tuple(float(p) for p in text.split(","))


_FIELDS = {
    "k": int, "nt": int, "mod": str, "precoder": str, "snr": str,
    "gamma": str, "p0": float, "bits": int, "trials": int, "slots": int,
    "seed": int, "workers": int, "sigma2": float,
}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--out", help="write CSV here instead of stdout")
    p.add_argument("--k", type=int)
    p.add_argument("--nt", type=int)
    p.add_argument("--mod", help="psk2/psk4/psk8/psk16/qam16/qam64/apsk16")
    p.add_argument("--precoder")
    p.add_argument("--p0", type=float)
    p.add_argument("--bits", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--slots", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)


def _merge(args: argparse.Namespace, defaults: dict) -> dict:
    merged = dict(defaults)
    if args.config:
        try:
            with open(args.config) as f:
                lines = f.readlines()
        except OSError as e:
            raise ConfigError("config", str(e)) from None
        for lineno, line in enumerate(lines, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError("config", f"line {lineno}: expected key=value")
            key, value = (p.strip() for p in line.split("=", 1))
            if key not in _FIELDS:
                raise ConfigError("config", f"line {lineno}: unknown key {key!r}")
            try:
                merged[key] = _FIELDS[key](value)
            except ValueError:
                raise ConfigError(key, f"cannot parse {value!r}") from None
    for key in _FIELDS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def _require(merged: dict, fields) -> None:
    for f in fields:
        if merged.get(f) is None:
            raise ConfigError(f, "missing required field")


_DEFAULTS = {"p0": 1.0, "bits": 1, "trials": 100, "slots": 10, "seed": 0,
             "workers": 1, "sigma2": 1.0}


def _sweep_config(merged: dict, grid_key: str) -> sim.SimConfig:
    try:
        grid = parse_grid(merged[grid_key])
    except ValueError as e:
        raise ConfigError(grid_key, str(e)) from None
    return sim.SimConfig(
        k=merged["k"], nt=merged["nt"], mod=merged["mod"],
        precoder=merged["precoder"],
        snr_grid_db=grid if grid_key == "snr" else (),
        gamma_grid_db=grid if grid_key == "gamma" else (),
        p0=merged["p0"], bits=merged["bits"], trials=merged["trials"],
        slots=merged["slots"], seed=merged["seed"], workers=merged["workers"])


def _emit(rows, out_path) -> None:
    text = sim.rows_to_csv(rows)
    if out_path:
        with open(out_path, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _demo(merged: dict) -> None:
    """Single-slot diagnostic: print the channel, signal, and margins."""
    _require(merged, ("k", "nt", "mod", "precoder"))
    try:
        const = cst.from_name(merged["mod"])
    except UnsupportedOrder as e:
        raise ConfigError("mod", str(e)) from None
    rng = stream_rng(merged["seed"], 0)
    if merged.get("load_channel"):
        H = load_channel_csv(merged["load_channel"])
    else:
        H = sample_rayleigh(merged["k"], merged["nt"], rng)
    if merged.get("dump_channel"):
        save_channel_csv(merged["dump_channel"], H)
    idx = rng.integers(0, const.order, size=H.shape[0])
    s = const.points[idx]
    name = merged["precoder"]
    p0, sigma2 = merged["p0"], merged["sigma2"]
    gamma = 10 ** (merged.get("gamma0", 10.0) / 10)
    print(f"# demo: {name} {merged['mod']} K={H.shape[0]} Nt={H.shape[1]}")
    print(f"symbols: {np.array2string(s, precision=4)}")
    if name in sim.POWER_PRECODERS:
        if name == "pm-duality":
            W, power = pc.pm_duality(H, np.full(H.shape[0], gamma), sigma2)
            x = W @ s
            res = pc.PrecodeResult(x, ci.UserGains(lam=ci.user_gains(H, x, s)),
                                   power, None)
            spec = ci.CiSpec.power_min(ci.NONSTRICT, gamma, sigma2)
        else:
            spec = ci.CiSpec.power_min(sim._CPM_METRIC[name], gamma, sigma2)
            res = pc.cpm(H, s, spec, const)
        level = spec.levels(H.shape[0], const)
        print(f"transmit power: {np.linalg.norm(res.x) ** 2:.6f}")
    else:
        spec = ci.CiSpec.balancing(
            ci.STRICT if name == "civp" else
            ci.SYMBOL_SCALING if name == "csb-ss" else ci.NONSTRICT, p0)
        if name == "csb-ss":
            res = pc.csb_symbol_scaling(H, s, p0, const)
        elif name == "civp":
            res = pc.civp_strict(H, s, p0)
        elif name == "zf":
            res = pc.zf_sym(H, s, p0)
        elif name == "rzf":
            res = pc.rzf_sym(H, s, p0, sigma2)
        elif name == "mrt":
            res = pc.mrt_sym(H, s, p0)
        elif name == "dac1-lp":
            x, level = qt.onebit_lp(H, s, p0, const)
            res = pc.PrecodeResult(x, ci.UserGains(lam=ci.user_gains(H, x, s)),
                                   level, None)
        else:
            raise ConfigError("precoder", f"demo does not support {name!r}")
        level = res.objective
        print(f"achieved level t: {res.objective:.6f}")
    if res.gains.lam is not None:
        print(f"per-user gains: {np.array2string(res.gains.lam, precision=4)}")
    else:
        print(f"component gains: {np.array2string(res.gains.alpha, precision=4)}")
    margins = ci.ci_margin(res.gains, const, spec, level)
    print(f"ci margins: {np.array2string(margins, precision=6)}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="slplab",
                                     description="symbol-level precoding laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ber = sub.add_parser("ber-sweep", help="uncoded BER versus SNR")
    _add_common(p_ber)
    p_ber.add_argument("--snr", help="SNR grid in dB: start:step:stop or list")

    p_pow = sub.add_parser("power-sweep", help="transmit power versus SINR target")
    _add_common(p_pow)
    p_pow.add_argument("--gamma", help="SINR-target grid in dB")

    p_demo = sub.add_parser("demo", help="single-slot diagnostic")
    _add_common(p_demo)
    p_demo.add_argument("--sigma2", type=float)
    p_demo.add_argument("--gamma0", type=float, default=10.0,
                        help="SINR target in dB for power-min precoders")
    p_demo.add_argument("--dump-channel", dest="dump_channel")
    p_demo.add_argument("--load-channel", dest="load_channel")

    args = parser.parse_args(argv)
    try:
        merged = _merge(args, _DEFAULTS)
        if args.command == "ber-sweep":
            _require(merged, ("k", "nt", "mod", "precoder", "snr"))
            rows = sim.run_ber_sweep(_sweep_config(merged, "snr"))
            _emit(rows, merged.get("out") or args.out)
        elif args.command == "power-sweep":
            _require(merged, ("k", "nt", "mod", "precoder", "gamma"))
            rows = sim.run_power_sweep(_sweep_config(merged, "gamma"))
            _emit(rows, merged.get("out") or args.out)
        else:
            merged["gamma0"] = args.gamma0
            merged["dump_channel"] = args.dump_channel
            merged["load_channel"] = args.load_channel
            _demo(merged)
    except (ConfigError, UnsupportedOrder) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except SlpError as e:
        print(f"solver error: {e}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
