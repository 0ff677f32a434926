"""Command line front end.

Subcommands map one-to-one onto the harness operations::

    svdmimo snr-table --preset su-4x4 --snr -8 --trials 100000 --seed 7
    svdmimo end-to-end --preset su-4x4 --snr-range -8:22:6 --policy importance
    svdmimo estimation-sweep --preset su-4x4 --trials 1000
    svdmimo calibrate --reference table.csv --trials 20000

Configuration can also come from a plain-text ``KEY=VALUE`` file via
``--config``; explicit flags always win.  Every run writes a manifest
before any result file.  The default output directory is taken from the
``SVDMIMO_OUT`` environment variable.
"""

import argparse
import os
import sys

from .errors import CalibrationError, ConfigError, SvdMimoError
from .harness import (
    AVERAGINGS,
    ESTIMATORS,
    POLICIES,
    PROFILES,
    REFERENCE_EQUIVALENT_SNR_DB,
    REFERENCE_TRUE_SNR_DB,
    ExperimentConfig,
    MetricsRecord,
    calibrate_convention,
    run_end_to_end,
    run_equivalent_snr_table,
    run_estimation_sweep,
)
from .channel import CONVENTIONS
from .results_io import (
    RunManifest,
    default_output_dir,
    import_feature_block,
    read_csv_rows,
    write_manifest,
    write_results,
)

__all__ = ["main", "build_parser", "parse_config_file", "PRESETS"]

#: Antenna presets: name -> (mode, n_tx, m_rx, users).
PRESETS = {
    "su-2x2": ("su", 2, 2, 1),
    "su-4x4": ("su", 4, 4, 1),
    "su-8x8": ("su", 8, 8, 1),
    "su-16x16": ("su", 16, 16, 1),
    "mu-4x2x2": ("mu", 4, 2, 2),
    "mu-16x4x4": ("mu", 16, 4, 4),
}

_CONFIG_KEYS = {
    "mode": str,
    "n_tx": int,
    "m_rx": int,
    "users": int,
    "trials": int,
    "seed": int,
    "convention": str,
    "averaging": str,
    "b_features": int,
    "d_dim": int,
    "mu_select": float,
    "scheduler_policy": str,
    "estimator": str,
    "profile": str,
    "path": str,
    "workers": int,
    "snr_db_list": None,  # comma separated floats
}


def parse_config_file(path):
    """Parse a ``KEY=VALUE`` config file into ExperimentConfig kwargs."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected KEY=VALUE, got {line!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in _CONFIG_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            if key == "snr_db_list":
                out[key] = tuple(float(v) for v in value.split(","))
            else:
                out[key] = _CONFIG_KEYS[key](value)
    return out


def _parse_snrs(args):
    if args.snr is not None and args.snr_range is not None:
        raise ConfigError("use either --snr or --snr-range, not both")
    if args.snr is not None:
        return tuple(float(v) for v in args.snr.split(","))
    if args.snr_range is not None:
        parts = args.snr_range.split(":")
        if len(parts) != 3:
            raise ConfigError("--snr-range expects LO:HI:STEP")
        lo, hi, step = (float(p) for p in parts)
        if step <= 0:
            raise ConfigError("--snr-range step must be positive")
        values = []
        v = lo
        while v <= hi + 1e-9:
            values.append(round(v, 9))
            v += step
        return tuple(values)
    return None


def _build_config(args):
    kwargs = {}
    if getattr(args, "config", None):
        kwargs.update(parse_config_file(args.config))
    if args.preset is not None:
        if args.preset not in PRESETS:
            raise ConfigError(
                f"unknown preset {args.preset!r}; choose from {sorted(PRESETS)}"
            )
        mode, n_tx, m_rx, users = PRESETS[args.preset]
        kwargs.update(mode=mode, n_tx=n_tx, m_rx=m_rx, users=users)
    flag_map = {
        "n": "n_tx",
        "m": "m_rx",
        "k": "users",
        "trials": "trials",
        "seed": "seed",
        "mu": "mu_select",
        "policy": "scheduler_policy",
        "estimator": "estimator",
        "convention": "convention",
        "averaging": "averaging",
        "profile": "profile",
        "b_features": "b_features",
        "d_dim": "d_dim",
        "workers": "workers",
    }
    for flag, key in flag_map.items():
        value = getattr(args, flag, None)
        if value is not None:
            kwargs[key] = value
    if "users" in kwargs and "mode" not in kwargs:
        kwargs["mode"] = "mu" if kwargs["users"] > 1 else "su"
    snrs = _parse_snrs(args)
    if snrs is not None:
        kwargs["snr_db_list"] = snrs
    return ExperimentConfig(**kwargs).validate()


def _write_run(command, cfg, record, out_dir, fmt, base_name):
    manifest = RunManifest(
        command=command,
        seed=cfg.seed,
        config=cfg.snapshot(),
        convention=cfg.convention,
        averaging=cfg.averaging,
    )
    manifest.outputs = [base_name + ext for ext in ((".csv", ".json") if fmt == "both" else ("." + fmt,))]
    write_manifest(manifest, out_dir)
    paths = write_results(record, out_dir, base_name, fmt=fmt)
    for path in paths:
        print(path)
    return paths


def _cmd_snr_table(args):
    cfg = _build_config(args)
    record = run_equivalent_snr_table(cfg)
    _write_run("snr-table", cfg, record, args.out, args.format, "snr_table")
    return 0


def _cmd_end_to_end(args):
    cfg = _build_config(args)
    feature_block = None
    if args.features:
        feature_block = import_feature_block(args.features)
        cfg = cfg.replace(
            b_features=feature_block.count, d_dim=feature_block.dim
        ).validate()
    policies = tuple(args.policies.split(",")) if args.policies else None
    record = run_end_to_end(cfg, policies=policies, feature_block=feature_block)
    _write_run("end-to-end", cfg, record, args.out, args.format, "end_to_end")
    return 0


def _cmd_estimation_sweep(args):
    cfg = _build_config(args)
    record = run_estimation_sweep(cfg)
    _write_run("estimation-sweep", cfg, record, args.out, args.format, "estimation_sweep")
    return 0


def _load_reference(path):
    if path is None:
        return dict(REFERENCE_EQUIVALENT_SNR_DB), REFERENCE_TRUE_SNR_DB
    rows = read_csv_rows(path)
    if not rows:
        raise ConfigError(f"reference file {path} is empty")
    table = {}
    true_snr = None
    for row in rows:
        key = (int(row["n_tx"]), int(row["m_rx"]))
        table.setdefault(key, {})[int(row["subchannel"])] = float(row["equivalent_snr_db"])
        snr = float(row.get("true_snr_db", REFERENCE_TRUE_SNR_DB))
        if true_snr is None:
            true_snr = snr
        elif abs(true_snr - snr) > 1e-9:
            raise ConfigError("reference file mixes true_snr_db values")
    out = {}
    for key, entries in table.items():
        out[key] = tuple(entries[q] for q in sorted(entries))
    return out, true_snr if true_snr is not None else REFERENCE_TRUE_SNR_DB


def _cmd_calibrate(args):
    reference, true_snr = _load_reference(args.reference)
    result = calibrate_convention(
        reference=reference,
        true_snr_db=true_snr,
        trials=args.trials if args.trials is not None else 20000,
        seed=args.seed if args.seed is not None else 2024,
        workers=args.workers if args.workers is not None else 1,
        tolerance_db=args.tolerance,
        raise_on_fail=False,
    )
    out_dir = args.out
    manifest = RunManifest(
        command="calibrate",
        seed=result.seed,
        config={
            "trials": result.trials,
            "tolerance_db": result.tolerance_db,
            "reference_rows": {f"{k[0]}x{k[1]}": list(v) for k, v in reference.items()},
            "true_snr_db": true_snr,
        },
        convention=result.convention,
        averaging=result.averaging,
    )
    manifest.outputs = ["calibration.csv", "calibration.json"] if args.format == "both" else [
        "calibration." + args.format
    ]
    write_manifest(manifest, out_dir)
    rows = []
    for (conv, avg), dev in sorted(result.per_pair.items()):
        rows.append(
            {
                "convention": conv,
                "averaging": avg,
                "max_abs_deviation_db": dev,
                "selected": conv == result.convention and avg == result.averaging,
            }
        )
    record = MetricsRecord(
        kind="calibration",
        rows=rows,
        meta={
            "kind": "calibration",
            "convention": result.convention,
            "averaging": result.averaging,
            "max_abs_deviation_db": result.max_abs_deviation_db,
            "tolerance_db": result.tolerance_db,
            "passed": result.passed,
            "trials": result.trials,
            "seed": result.seed,
        },
    )
    paths = write_results(record, out_dir, "calibration", fmt=args.format)
    for path in paths:
        print(path)
    print(result.report())
    if not result.passed:
        raise CalibrationError(
            f"calibration failed: best pair ({result.convention}, {result.averaging}) "
            f"deviates by {result.max_abs_deviation_db:.3f} dB (> {result.tolerance_db:.1f} dB)",
            report=result,
        )
    return 0


def _add_common(parser, with_chain_flags=True):
    parser.add_argument("--preset", help=f"antenna preset: {', '.join(sorted(PRESETS))}")
    parser.add_argument("--config", help="KEY=VALUE config file (flags win)")
    parser.add_argument("--n", type=int, help="transmit antennas")
    parser.add_argument("--m", type=int, help="receive antennas per user")
    parser.add_argument("--k", type=int, help="user count")
    parser.add_argument("--snr", help="comma separated SNR list in dB")
    parser.add_argument("--snr-range", dest="snr_range", help="LO:HI:STEP sweep in dB")
    parser.add_argument("--trials", type=int, help="Monte Carlo trials")
    parser.add_argument("--seed", type=int, help="root seed")
    parser.add_argument("--convention", choices=CONVENTIONS, help="channel entry variance")
    parser.add_argument("--averaging", choices=AVERAGINGS, help="SNR averaging domain")
    parser.add_argument("--workers", type=int, help="parallel workers")
    parser.add_argument(
        "--out", default=default_output_dir(), help="output directory (env SVDMIMO_OUT)"
    )
    parser.add_argument("--format", choices=("csv", "json", "both"), default="both")
    if with_chain_flags:
        parser.add_argument("--mu", type=float, help="select fraction in [0, 1]")
        parser.add_argument("--policy", choices=POLICIES, help="scheduling policy")
        parser.add_argument("--estimator", choices=ESTIMATORS, help="channel estimator")
        parser.add_argument("--profile", choices=PROFILES, help="importance profile")
        parser.add_argument("--b-features", dest="b_features", type=int, help="features per block")
        parser.add_argument("--d-dim", dest="d_dim", type=int, help="feature dimension (even)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="svdmimo",
        description="Link-level SVD-precoded MIMO simulation with importance scheduling",
    )
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("snr-table", help="per-subchannel equivalent SNR table")
    _add_common(p, with_chain_flags=False)
    p.set_defaults(func=_cmd_snr_table)

    p = sub.add_parser("end-to-end", help="feature transmission chain metrics")
    _add_common(p)
    p.add_argument(
        "--policies", help="comma separated policy list (default: configured policy)"
    )
    p.add_argument(
        "--features", help="feature block CSV supplying real features and importance"
    )
    p.set_defaults(func=_cmd_end_to_end)

    p = sub.add_parser("estimation-sweep", help="chain metrics under estimated CSI")
    _add_common(p)
    p.set_defaults(func=_cmd_estimation_sweep)

    p = sub.add_parser("calibrate", help="fit normalization convention to a reference table")
    p.add_argument("--reference", help="reference CSV (default: built-in table)")
    p.add_argument("--trials", type=int, help="Monte Carlo trials (default 20000)")
    p.add_argument("--seed", type=int, help="root seed (default 2024)")
    p.add_argument("--workers", type=int, help="parallel workers")
    p.add_argument("--tolerance", type=float, default=1.0, help="acceptance tolerance in dB")
    p.add_argument(
        "--out", default=default_output_dir(), help="output directory (env SVDMIMO_OUT)"
    )
    p.add_argument("--format", choices=("csv", "json", "both"), default="both")
    p.set_defaults(func=_cmd_calibrate)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error[config]: {exc}", file=sys.stderr)
        return 2
    except CalibrationError as exc:
        print(f"error[calibration]: {exc}", file=sys.stderr)
        return 3
    except SvdMimoError as exc:
        print(f"error[runtime]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
