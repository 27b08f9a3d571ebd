"""Command-line front end: characteristic curves, SER sweeps, convergence.

Every output is CSV preceded by ``# key=value`` manifest lines.  The
``command`` entry of the manifest is a complete argument list; running it
again reproduces the CSV body byte for byte.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import io
import logging
import shlex
import sys

import numpy as np

from . import __version__
from .denoiser import DiscreteSparsePrior, GuardConfig, characteristic_curve
from .errors import InvalidArgumentError
from .recovery import RecoveryVariant
from .simkit import WORKERS_ENV, BaseParams, default_workers, run_convergence, run_sweep

log = logging.getLogger(__name__)

CURVE_MODES = {"biased": "biased", "xu": "signal_unbiased", "nu": "noise_unbiased"}
VARIANT_NAMES = ",".join(v.value for v in RecoveryVariant)


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _variant_list(text: str) -> list[RecoveryVariant]:
    try:
        return [RecoveryVariant.parse(t) for t in text.split(",") if t.strip()]
    except InvalidArgumentError:
        raise argparse.ArgumentTypeError(
            f"unknown variant in {text!r}; valid names: {VARIANT_NAMES}") from None


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="softunbias", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    c = sub.add_parser("curves", help="characteristic curves of the scalar denoiser")
    c.add_argument("--sigma-n2", type=float, action="append", dest="sigma_n2",
                   help="noise variance; repeat for several (default 0.1 and 0.01)")
    c.add_argument("--p1", type=float, default=0.1, help="probability of each nonzero symbol")
    c.add_argument("--alphabet", type=_float_list, default=[-1.0, 0.0, 1.0],
                   help="full alphabet including 0, e.g. --alphabet=-1,0,1")
    c.add_argument("--z-min", type=float, default=-2.0)
    c.add_argument("--z-max", type=float, default=2.0)
    c.add_argument("--z-steps", type=_positive_int, default=401)
    c.add_argument("--mode", choices=["biased", "xu", "nu", "all"], default="all")
    c.add_argument("--variance-form", choices=["average", "individual"], default="average",
                   help="form the compensation factor from the average MSE or the pointwise variance")
    c.add_argument("--no-clamp", action="store_true", help="disable variance clamping")
    c.add_argument("--out", default="-")

    for name, helptext in (("sweep", "SER versus SNR"), ("convergence", "SER versus iteration")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--variants", type=_variant_list, default=list(RecoveryVariant),
                       help=f"comma-separated subset of {VARIANT_NAMES}")
        p.add_argument("--L", type=_positive_int, default=258)
        p.add_argument("--K", type=_positive_int, default=129)
        p.add_argument("--s", type=_positive_int, default=15)
        p.add_argument("--nonzero-alphabet", type=_float_list, default=[-1.0, 1.0],
                       help="e.g. --nonzero-alphabet=-1,1")
        p.add_argument("--trials", type=_positive_int, default=2000)
        p.add_argument("--iterations", type=_positive_int, default=50)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--workers", type=_positive_int, default=None,
                       help=f"worker processes (default: ${WORKERS_ENV} or 1)")
        p.add_argument("--out", default="-")
        if name == "sweep":
            p.add_argument("--snr-db", type=float, action="append", dest="snr_db",
                           help="explicit SNR point in dB; repeatable, overrides the range")
            p.add_argument("--snr-db-min", type=float, default=10.0)
            p.add_argument("--snr-db-max", type=float, default=20.0)
            p.add_argument("--snr-db-step", type=float, default=1.0)
        else:
            p.add_argument("--snr-db", type=float, default=18.0)
    return parser


def snr_grid(lo: float, hi: float, step: float) -> list[float]:
    if step <= 0 or hi < lo:
        raise InvalidArgumentError("need snr-db-step > 0 and snr-db-max >= snr-db-min")
    n = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + i * step, 10) for i in range(n)]


def _manifest(command: str, params: dict, extra: dict) -> list[str]:
    lines = ["tool=softunbias", f"version={__version__}", f"subcommand={command}"]
    lines += [f"param.{k}={_fmt(v)}" for k, v in params.items()]
    lines += [f"{k}={_fmt(v)}" for k, v in extra.items()]
    lines.append(f"timestamp={_dt.datetime.now(_dt.timezone.utc).isoformat(timespec='seconds')}")
    return ["# " + ln for ln in lines]


def _replay_command(command: str, args: argparse.Namespace, keys) -> str:
    argv = [command]
    for key in keys:
        value = getattr(args, key)
        flag = "--" + key.replace("_", "-")
        if isinstance(value, bool):
            if value:
                argv.append(flag)
        elif isinstance(value, list):
            if key in ("sigma_n2", "snr_db"):
                argv += [f"{flag}={_fmt(v)}" for v in value]
            elif value and isinstance(value[0], RecoveryVariant):
                argv.append(f"{flag}={','.join(v.value for v in value)}")
            else:
                argv.append(f"{flag}={','.join(_fmt(v) for v in value)}")
        elif value is not None:
            argv.append(f"{flag}={_fmt(value)}")
    return shlex.join(argv)


def _cmd_curves(args):
    if args.z_max < args.z_min:
        raise InvalidArgumentError("--z-max must not be smaller than --z-min")
    args.sigma_n2 = args.sigma_n2 or [0.1, 0.01]
    alphabet = sorted(args.alphabet)
    if 0.0 not in alphabet:
        raise InvalidArgumentError("--alphabet must contain 0")
    n_nonzero = len(alphabet) - 1
    probs = [args.p1 if c != 0.0 else 1.0 - n_nonzero * args.p1 for c in alphabet]
    prior = DiscreteSparsePrior(tuple(alphabet), tuple(probs))
    guard = GuardConfig(clamping_enabled=not args.no_clamp)
    modes = list(CURVE_MODES) if args.mode == "all" else [args.mode]
    z = np.linspace(args.z_min, args.z_max, args.z_steps)
    rows = []
    for s2 in args.sigma_n2:
        for mode in modes:
            curve = characteristic_curve(prior, s2, z, CURVE_MODES[mode], guard, args.variance_form)
            rows += [[zz, mode, s2, v, e] for zz, v, e in curve.rows()]
    keys = ["sigma_n2", "p1", "alphabet", "z_min", "z_max", "z_steps", "mode", "variance_form", "no_clamp"]
    header = ["z", "mode", "sigma_n2", "soft_value", "error_variance"]
    return header, rows, 0, keys, {}


def _base_params(args) -> BaseParams:
    return BaseParams(K=args.K, L=args.L, s=args.s, nonzero_alphabet=tuple(args.nonzero_alphabet),
                      iterations=args.iterations)


def _cmd_sweep(args):
    grid = args.snr_db or snr_grid(args.snr_db_min, args.snr_db_max, args.snr_db_step)
    workers = args.workers or default_workers()
    result = run_sweep(args.variants, grid, args.trials, _base_params(args), args.seed, workers)
    rows = [[p.variant.value, p.snr_db, p.trials, p.symbol_errors, p.ser] for p in result.points]
    keys = ["variants", "L", "K", "s", "nonzero_alphabet", "trials", "iterations", "seed"]
    keys += ["snr_db"] if args.snr_db else ["snr_db_min", "snr_db_max", "snr_db_step"]
    extra = {"master_seed": args.seed, "seed_rule": result.seed_rule,
             "trials_per_point": args.trials, "failed_trials": result.failures}
    return ["variant", "snr_db", "trials", "symbol_errors", "ser"], rows, result.failures, keys, extra


def _cmd_convergence(args):
    workers = args.workers or default_workers()
    result = run_convergence(args.variants, args.snr_db, args.trials, _base_params(args), args.seed, workers)
    rows = []
    for variant in args.variants:
        for it, ser in enumerate(result.mean_ser[variant], start=1):
            rows.append([variant.value, it, float(ser)])
    failures = sum(result.failures.values())
    keys = ["variants", "L", "K", "s", "nonzero_alphabet", "snr_db", "trials", "iterations", "seed"]
    extra = {"master_seed": args.seed, "seed_rule": result.seed_rule,
             "trials_per_point": args.trials, "failed_trials": failures}
    return ["variant", "iteration", "mean_ser"], rows, failures, keys, extra


def render(header, rows, manifest_lines) -> str:
    buf = io.StringIO()
    for line in manifest_lines:
        buf.write(line + "\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {"curves": _cmd_curves, "sweep": _cmd_sweep, "convergence": _cmd_convergence}
    try:
        header, rows, failures, keys, extra = handlers[args.command](args)
    except InvalidArgumentError as exc:
        parser.error(str(exc))
    params = {k: getattr(args, k) for k in keys}
    for k, v in params.items():
        if isinstance(v, list):
            params[k] = ",".join(x.value if isinstance(x, RecoveryVariant) else _fmt(x) for x in v)
    extra = {"command": _replay_command(args.command, args, keys), **extra}
    text = render(header, rows, _manifest(args.command, params, extra))
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    if failures:
        log.error("%d trial(s) failed and were excluded", failures)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
