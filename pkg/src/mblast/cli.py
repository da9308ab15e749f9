"""Command-line front end.

Subcommands: ``ser`` (error-rate sweeps), ``outage`` (layer-wise outage
curves), ``pdf`` (decision-statistic densities), ``validate`` (built-in
cross-check suite).  Exit codes: 0 ok, 1 validation failure, 2 usage or
config error, 3 runtime failure.

Options may come from a flat ``key = value`` config file (``--config``),
with command-line flags taking precedence.  Unknown config keys are
rejected.  Randomized commands require an explicit seed; there is no
time-derived default.  Every run writes a CSV and a JSON sidecar with the
full configuration needed to reproduce it; ``--plot`` additionally renders
a PNG figure next to the CSV.
"""

import argparse
import csv
import json
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, stats
from .channel import ChannelConfig
from .detectors import DETECTOR_NAMES, TooLarge
from .linalg import RankDeficient
from .montecarlo import SimPlan, estimate_outage_empirical, estimate_pdf_empirical, run_ser_sweep
from .outage import OutageQuery, QuadratureError, analytical_curve
from .validation import FAULT_MODES, run_validation

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class ConfigError(Exception):
    pass


def _parse_config_file(path, valid_keys):
    """Flat ``key = value`` lines; ``#`` starts a comment; no nesting."""
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        key = key.strip().replace("-", "_")
        if key not in valid_keys:
            raise ConfigError(
                f"{path}:{lineno}: unknown key {key!r}; valid keys: "
                + ", ".join(sorted(valid_keys))
            )
        values[key] = val.strip()
    return values


def _coerce(key, raw, spec):
    kind = spec[0]
    try:
        if kind is bool:
            low = str(raw).strip().lower()
            if low in ("1", "true", "on", "yes"):
                return True
            if low in ("0", "false", "off", "no"):
                return False
            raise ValueError("expected on/off")
        if kind is list:
            return [float(v) for v in str(raw).replace(",", " ").split()]
        if kind == "strlist":
            return [v for v in str(raw).replace(",", " ").split() if v]
        return kind(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid value for {key!r}: {raw!r} ({exc})") from None


def _merge_options(args, schema):
    """Merge config file values with CLI flags (flags win), then range-check."""
    merged = {}
    if args.config:
        filevals = _parse_config_file(args.config, set(schema))
        for key, raw in filevals.items():
            merged[key] = _coerce(key, raw, schema[key])
    for key, spec in schema.items():
        cli_val = getattr(args, key, None)
        if cli_val is not None:
            if isinstance(cli_val, str) and spec[0] is bool:
                cli_val = _coerce(key, cli_val, spec)
            merged[key] = cli_val
    for key, spec in schema.items():
        if key not in merged and len(spec) > 2:
            merged[key] = spec[2]  # default
    for key, spec in schema.items():
        if key not in merged:
            raise ConfigError(f"missing required key {key!r}")
        check = spec[1]
        if check is not None and not check(merged[key]):
            raise ConfigError(f"value for {key!r} out of range: {merged[key]!r}")
    return merged


def _require_seed(opts):
    if opts.get("seed") is None:
        raise ConfigError("missing required key 'seed' (randomized command)")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, float):
        return repr(float(v))
    return v


def _git_describe():
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True, text=True, timeout=5,
        )
        return out.stdout.strip() or None
    except Exception:
        return None


def _write_sidecar(path, command, opts, extra):
    payload = {
        "command": command,
        "config": {k: v for k, v in sorted(opts.items())},
        "version": __version__,
        "git_describe": _git_describe(),
        "wall_time_s": extra.pop("wall_time_s", None),
    }
    payload.update(extra)
    Path(path).write_text(json.dumps(payload, indent=2, default=str) + "\n")


_POS_INT = (int, lambda v: v >= 1)
_SEED = (int, None, None)


_SER_SCHEMA = {
    "tx": _POS_INT,
    "rx": _POS_INT,
    "fading": (str, lambda v: v in ("rayleigh", "rician"), "rayleigh"),
    "rician_k": (float, lambda v: v >= 0, 0.0),
    "sigma_h_sq": (float, lambda v: v > 0, 1.0),
    "corr_rho_tx": (float, lambda v: 0 <= v < 1, 0.0),
    "corr_rho_rx": (float, lambda v: 0 <= v < 1, 0.0),
    "alphabet": (str, lambda v: v in ("bpsk", "bfsk", "qam16"), "bpsk"),
    "detectors": ("strlist", lambda v: v and all(d in DETECTOR_NAMES for d in v),
                  list(DETECTOR_NAMES)),
    "snr_db": (list, lambda v: len(v) >= 1),
    "trials": (int, lambda v: v >= 1),
    "min_errors": (int, lambda v: v >= 1, 500),
    "vblast_literal_argmax": (bool, None, False),
    "seed": _SEED,
    "workers": (int, lambda v: v >= 1, 1),
    "out": (str, None, "."),
    "plot": (bool, None, False),
}

_OUTAGE_SCHEMA = {
    "layer": (int, lambda v: v in (1, 2)),
    "mod": (str, lambda v: v in ("bpsk", "bfsk")),
    "snr_db": (float, None),
    "n_rx": (int, lambda v: v >= 2, 10),
    "x_min": (float, lambda v: v >= 0, 0.5),
    "x_max": (float, lambda v: v > 0, 60.0),
    "points": (int, lambda v: v >= 2, 60),
    "empirical": (int, lambda v: v >= 0, 0),
    "renormalize": (bool, None, True),
    "seed": _SEED,
    "workers": (int, lambda v: v >= 1, 1),
    "out": (str, None, "."),
    "plot": (bool, None, False),
}

_PDF_SCHEMA = {
    "var": (str, lambda v: v in ("uj", "u", "ratio")),
    "mod": (str, lambda v: v in ("bpsk", "bfsk")),
    "mode": (str, lambda v: v in ("perfect", "imperfect"), "perfect"),
    "snr_db": (float, None),
    "n_rx": (int, lambda v: v >= 2, 10),
    "samples": (int, lambda v: v >= 1, 1_000_000),
    "bins": (int, lambda v: v >= 1, 120),
    "seed": _SEED,
    "workers": (int, lambda v: v >= 1, 1),
    "out": (str, None, "."),
    "plot": (bool, None, False),
}


def _add_common(sub):
    sub.add_argument("--config", help="flat key = value config file")
    sub.add_argument("--seed", type=int, help="master seed (required for MC runs)")
    sub.add_argument("--workers", type=int, help="worker threads (default 1)")
    sub.add_argument("--out", help="output directory (default .)")
    sub.add_argument("--plot", action="store_const", const=True, default=None,
                     help="also render a PNG figure next to the CSV")


def _build_parser():
    p = argparse.ArgumentParser(
        prog="mblast",
        description="Layered MIMO detection simulator and outage analysis",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subs = p.add_subparsers(dest="command", required=True)

    ser = subs.add_parser("ser", help="symbol error rate sweep")
    ser.add_argument("--tx", type=int)
    ser.add_argument("--rx", type=int)
    ser.add_argument("--fading", choices=["rayleigh", "rician"])
    ser.add_argument("--rician-k", dest="rician_k", type=float)
    ser.add_argument("--sigma-h-sq", dest="sigma_h_sq", type=float)
    ser.add_argument("--corr-rho-tx", dest="corr_rho_tx", type=float)
    ser.add_argument("--corr-rho-rx", dest="corr_rho_rx", type=float)
    ser.add_argument("--alphabet", choices=["bpsk", "bfsk", "qam16"])
    ser.add_argument("--detectors", nargs="+", choices=list(DETECTOR_NAMES))
    ser.add_argument("--snr-db", dest="snr_db", type=float, nargs="+")
    ser.add_argument("--trials", type=int)
    ser.add_argument("--min-errors", dest="min_errors", type=int)
    ser.add_argument("--vblast-literal-argmax", dest="vblast_literal_argmax",
                     action="store_const", const=True, default=None,
                     help="use the literal largest-row-norm ordering")
    _add_common(ser)

    out = subs.add_parser("outage", help="layer-wise outage curves")
    out.add_argument("--layer", type=int)
    out.add_argument("--mod", choices=["bpsk", "bfsk"])
    out.add_argument("--snr-db", dest="snr_db", type=float)
    out.add_argument("--n-rx", dest="n_rx", type=int)
    out.add_argument("--x-min", dest="x_min", type=float)
    out.add_argument("--x-max", dest="x_max", type=float)
    out.add_argument("--points", type=int)
    out.add_argument("--empirical", type=int,
                     help="MC trial count for the empirical overlay (0 = none)")
    out.add_argument("--renormalize", choices=["on", "off"])
    _add_common(out)

    pdf = subs.add_parser("pdf", help="decision-statistic densities")
    pdf.add_argument("--var", choices=["uj", "u", "ratio"])
    pdf.add_argument("--mod", choices=["bpsk", "bfsk"])
    pdf.add_argument("--mode", choices=["perfect", "imperfect"])
    pdf.add_argument("--snr-db", dest="snr_db", type=float)
    pdf.add_argument("--n-rx", dest="n_rx", type=int)
    pdf.add_argument("--samples", type=int)
    pdf.add_argument("--bins", type=int)
    _add_common(pdf)

    val = subs.add_parser("validate", help="run the built-in cross-check suite")
    val.add_argument("--inject-fault", choices=list(FAULT_MODES),
                     help="test hook: corrupt a designated check")
    return p


def _cmd_ser(args):
    opts = _merge_options(args, _SER_SCHEMA)
    _require_seed(opts)
    cfg = ChannelConfig(
        tx=opts["tx"], rx=opts["rx"], fading=opts["fading"],
        rician_k=opts["rician_k"], sigma_h_sq=opts["sigma_h_sq"],
        corr_rho_tx=opts["corr_rho_tx"], corr_rho_rx=opts["corr_rho_rx"],
    )
    plan = SimPlan(
        channel=cfg, alphabet=opts["alphabet"], detectors=tuple(opts["detectors"]),
        snr_db=tuple(opts["snr_db"]), trials=opts["trials"],
        min_errors=opts["min_errors"], master_seed=opts["seed"],
        vblast_literal_argmax=opts["vblast_literal_argmax"],
    )
    t0 = time.perf_counter()
    points = run_ser_sweep(plan, workers=opts["workers"])
    wall = time.perf_counter() - t0
    outdir = Path(opts["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    rows = [
        (p.snr_db, p.detector, p.ser, p.ci95[0], p.ci95[1], p.symbol_errors,
         p.symbols_sent // cfg.tx)
        for p in points
    ]
    _write_csv(outdir / "ser.csv",
               ["snr_db", "detector", "ser", "ci_low", "ci_high", "errors",
                "trials"], rows)
    _write_sidecar(outdir / "ser.json", "ser", opts, {
        "wall_time_s": wall,
        "resampled_rank_deficient": int(sum(p.resampled for p in points)),
    })
    if opts["plot"]:
        from .plotting import plot_ser

        plot_ser(points, outdir / "ser.png")
    return EXIT_OK


def _cmd_outage(args):
    opts = _merge_options(args, _OUTAGE_SCHEMA)
    if opts["empirical"] > 0:
        _require_seed(opts)
    grid = tuple(np.linspace(opts["x_min"], opts["x_max"], opts["points"]))
    query = OutageQuery(
        layer=opts["layer"], modulation=opts["mod"], n_rx=opts["n_rx"],
        snr_linear=10.0 ** (opts["snr_db"] / 10.0), x_grid=grid,
    )
    t0 = time.perf_counter()
    ana = analytical_curve(query, renormalize=opts["renormalize"])
    emp = None
    if opts["empirical"] > 0:
        emp = estimate_outage_empirical(query, opts["empirical"], opts["seed"],
                                        workers=opts["workers"])
    wall = time.perf_counter() - t0
    outdir = Path(opts["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    if emp is None:
        header = ["x", "analytical"]
        rows = list(zip(ana.x_grid.tolist(), ana.values.tolist()))
    else:
        header = ["x", "analytical", "empirical", "ci_low", "ci_high"]
        rows = list(zip(ana.x_grid.tolist(), ana.values.tolist(),
                        emp.values.tolist(), emp.band[0].tolist(),
                        emp.band[1].tolist()))
    _write_csv(outdir / "outage.csv", header, rows)
    _write_sidecar(outdir / "outage.json", "outage", opts,
                   {"wall_time_s": wall})
    if opts["plot"]:
        from .plotting import plot_outage

        plot_outage(ana, emp, outdir / "outage.png",
                    title=f"layer {opts['layer']}, {opts['mod']}, "
                          f"{opts['snr_db']:g} dB")
    return EXIT_OK


def _cmd_pdf(args):
    opts = _merge_options(args, _PDF_SCHEMA)
    _require_seed(opts)
    var = {"u": "ratio"}.get(opts["var"], opts["var"])
    snr_linear = 10.0 ** (opts["snr_db"] / 10.0)
    model = stats.RatioModel.for_link(opts["mod"], opts["n_rx"], snr_linear)
    t0 = time.perf_counter()
    dist = estimate_pdf_empirical(var, opts["mod"], opts["mode"], opts["n_rx"],
                                  snr_linear, opts["samples"], opts["bins"],
                                  opts["seed"])
    centers = dist.centers
    if var == "uj":
        if opts["mode"] == "perfect":
            analytic = stats.pdf_uj_perfect(model, centers)
        else:
            analytic = stats.pdf_uj_imperfect(model, centers)
    else:
        analytic = stats.pdf_ratio_exact(model, centers)
    wall = time.perf_counter() - t0
    outdir = Path(opts["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    rows = list(zip(centers.tolist(), np.asarray(analytic).tolist(),
                    dist.absolute_density.tolist()))
    _write_csv(outdir / "pdf.csv", ["x", "analytical_pdf", "empirical_pdf"], rows)
    _write_sidecar(outdir / "pdf.json", "pdf", opts, {
        "wall_time_s": wall,
        "coverage": dist.coverage,
    })
    if opts["plot"]:
        from .plotting import plot_pdf

        plot_pdf(dist, centers, analytic, outdir / "pdf.png",
                 title=f"{opts['var']}, {opts['mod']}, {opts['mode']}, "
                       f"{opts['snr_db']:g} dB")
    return EXIT_OK


def _cmd_validate(args):
    results = run_validation(inject_fault=args.inject_fault)
    width = max(len(r.name) for r in results)
    all_ok = True
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status}  {r.name:<{width}}  {r.detail}  [{r.seconds:.2f}s]")
        all_ok &= r.passed
    if not all_ok:
        failed = ", ".join(r.name for r in results if not r.passed)
        print(f"validation failed: {failed}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "ser": _cmd_ser,
        "outage": _cmd_outage,
        "pdf": _cmd_pdf,
        "validate": _cmd_validate,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, ValueError) as exc:
        # ValueError: domain objects rejecting an inconsistent parameter combo
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RankDeficient, QuadratureError, TooLarge, RuntimeError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
