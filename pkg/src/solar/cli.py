"""Command-line entry point: compress, reconstruct, analyze, bound,
footprint, synth, sweep.

Conventions shared by every subcommand:

* machine-readable output goes to stdout, diagnostics to stderr;
* exit status 0 = success, 2 = usage or input validation, 3 = numerical
  failure, 4 = foundation-weight fingerprint mismatch;
* all flags are validated before any output file is written;
* ``--config file`` supplies ``key = value`` defaults (keys are the long
  option names); explicit flags override file values;
* ``SOLAR_THREADS`` caps BLAS parallelism (positive integer).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from .analysis import (
    BoundInputs,
    c2_bound,
    empirical_rangefinder_error,
    similarity_grid,
)
from .bench import SweepConfig, SyntheticSpec, sweep, synth
from .core import (
    AdapterPair,
    CompressConfig,
    FingerprintMismatch,
    compress,
    delta,
    reconstruct,
)
from .format import FormatError, encode, read_npy, read_solar, write_npy
from .linalg import frobenius_norm, svd_full
from .quant import (
    FootprintReport,
    footprint_bytes,
    footprint_params,
    preset_report,
)

__all__ = ["main", "CliError"]

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3
EXIT_FINGERPRINT = 4

_thread_limiter = None  # keeps a threadpoolctl limit object alive, if used


class CliError(ValueError):
    """Invalid invocation or inputs; reported on stderr with exit status 2."""


# --- shared helpers -------------------------------------------------------

def _setup_threads() -> None:
    raw = os.environ.get("SOLAR_THREADS")
    if raw is None:
        return
    try:
        count = int(raw)
    except ValueError:
        raise CliError(f"SOLAR_THREADS must be a positive integer, got {raw!r}") from None
    if count < 1:
        raise CliError(f"SOLAR_THREADS must be a positive integer, got {raw!r}")
    global _thread_limiter
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        # best effort without threadpoolctl: honored only if BLAS reads the
        # environment after this point
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, str(count))
        return
    _thread_limiter = threadpool_limits(limits=count)


def _extract_config_path(argv: list[str]) -> str | None:
    it = iter(range(len(argv)))
    for i in it:
        tok = argv[i]
        if tok == "--config":
            if i + 1 >= len(argv):
                raise CliError("--config requires a file path")
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def _config_tokens(path: str, sub: argparse.ArgumentParser) -> list[str]:
    """Translate a flat key = value file into CLI tokens for one subcommand.

    Injected before the user's explicit flags, so explicit flags win
    (argparse keeps the last occurrence)."""
    options = {}
    for action in sub._actions:
        for opt in action.option_strings:
            if opt.startswith("--"):
                options[opt] = action
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise CliError(f"cannot read config file {path}: {err}") from None
    tokens: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        opt = "--" + key.replace("_", "-")
        action = options.get(opt)
        if action is None:
            raise CliError(f"{path}:{lineno}: unknown option {opt} for this subcommand")
        if action.nargs == 0:  # boolean flag
            lowered = value.lower()
            if lowered in ("1", "true", "yes", "on"):
                tokens.append(opt)
            elif lowered not in ("0", "false", "no", "off"):
                raise CliError(f"{path}:{lineno}: {opt} takes a boolean, got {value!r}")
        else:
            tokens.extend((opt, value))
    return tokens


def _inject_config(argv: list[str], subparsers: dict[str, argparse.ArgumentParser]) -> list[str]:
    if not argv or argv[0] not in subparsers:
        return argv
    path = _extract_config_path(argv[1:])
    if path is None:
        return argv
    return [argv[0], *_config_tokens(path, subparsers[argv[0]]), *argv[1:]]


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _int_list(raw: str, flag: str) -> list[int]:
    try:
        values = [int(part) for part in raw.split(",") if part.strip()]
    except ValueError:
        raise CliError(f"{flag} expects comma-separated integers, got {raw!r}") from None
    if not values:
        raise CliError(f"{flag} must list at least one value")
    return values


def _parse_spectrum(raw: str) -> tuple:
    kind, _, param = raw.partition(":")
    if kind == "flat":
        if param:
            raise CliError("spectrum 'flat' takes no parameter")
        return ("flat",)
    if kind not in ("geometric", "polynomial"):
        raise CliError(f"unknown spectrum kind {kind!r} (flat, geometric, polynomial)")
    if not param:
        if kind == "geometric":
            return ("geometric", 0.9)
        raise CliError("spectrum 'polynomial' requires a power, e.g. polynomial:1.5")
    try:
        return (kind, float(param))
    except ValueError:
        raise CliError(f"bad spectrum parameter {param!r}") from None


def _product_error(adapter: AdapterPair, rebuilt: AdapterPair) -> float:
    target = delta(adapter)
    err = frobenius_norm(delta(rebuilt) - target)
    base = frobenius_norm(target)
    return err / base if base > 0 else err


# --- subcommands ----------------------------------------------------------

def cmd_compress(args: argparse.Namespace) -> None:
    if args.topk is not None and (args.topk_a is not None or args.topk_b is not None):
        raise CliError("--topk conflicts with --topk-a/--topk-b")
    if args.topk is not None:
        if args.topk % 2:
            raise CliError("--topk is split evenly across factors and must be even")
        k_a = k_b = args.topk // 2
    elif args.topk_a is not None and args.topk_b is not None:
        k_a, k_b = args.topk_a, args.topk_b
    else:
        raise CliError("provide either --topk or both --topk-a and --topk-b")
    pool_b = args.pool_b if args.pool_b is not None else args.pool_a

    W = read_npy(args.weights)
    adapter = AdapterPair(A=read_npy(args.adapter_a), B=read_npy(args.adapter_b))
    config = CompressConfig(
        n_a=args.pool_a, n_b=pool_b, k_a=k_a, k_b=k_b, seed=args.seed,
        noise_sigma=args.noise, ridge=args.ridge, refit=args.refit,
        basis_mode=args.basis_mode, quant_bits=args.quant,
        fingerprint=not args.no_fingerprint,
    )
    artifact = compress(W, adapter, config)
    rebuilt = reconstruct(svd_full(W), artifact)
    err = _product_error(adapter, rebuilt)
    params = footprint_params(1, k_a, k_b, args.pool_a, pool_b)
    payload = encode([(args.name, artifact)])
    Path(args.out).write_bytes(payload)
    print(
        f"{args.name}: k_A={k_a} k_B={k_b} err_product={err:.6g} "
        f"footprint_params={params} file_bytes={len(payload)}"
    )
    if args.verbose:
        print(f"wrote {args.out}", file=sys.stderr)


def cmd_reconstruct(args: argparse.Namespace) -> None:
    W = read_npy(args.weights)
    records = read_solar(args.infile)
    if args.name is not None:
        matches = [a for name, a in records if name == args.name]
        if not matches:
            names = ", ".join(name for name, _ in records)
            raise CliError(f"no record named {args.name!r} in {args.infile}; found: {names}")
        artifact = matches[0]
    elif len(records) == 1:
        artifact = records[0][1]
    else:
        names = ", ".join(name for name, _ in records)
        raise CliError(f"{args.infile} holds {len(records)} records ({names}); pick one with --name")
    rebuilt = reconstruct(svd_full(W), artifact)
    write_npy(args.out_a, rebuilt.A)
    write_npy(args.out_b, rebuilt.B)
    if args.out_delta is not None:
        write_npy(args.out_delta, delta(rebuilt))
    if args.verbose:
        print(f"wrote {args.out_a}, {args.out_b}", file=sys.stderr)


def cmd_analyze(args: argparse.Namespace) -> None:
    W = read_npy(args.weights)
    D = read_npy(args.delta)
    grid = similarity_grid(W, D, args.max_i, args.max_j, side=args.side)
    _emit(grid.to_csv(), args.out)


def cmd_bound(args: argparse.Namespace) -> None:
    if (args.delta is None) == (args.sigma is None):
        raise CliError("provide exactly one of --delta or --sigma")
    if args.delta is not None:
        D = read_npy(args.delta)
        sigma = svd_full(D).sigma
    else:
        try:
            sigma = np.array([float(part) for part in args.sigma.split(",")])
        except ValueError:
            raise CliError(f"--sigma expects comma-separated floats, got {args.sigma!r}") from None
    c2 = c2_bound(BoundInputs(
        sigma=sigma, n_a=args.pool_a, n_b=args.pool_b,
        r_a=args.rank_a, r_b=args.rank_b, k=args.topk,
    ))
    print(f"c2 = {c2:.12g}")
    if args.probes is not None:
        if args.delta is None:
            raise CliError("the Monte-Carlo check (--probes) requires --delta")
        result = empirical_rangefinder_error(
            D, args.probes, args.trials, args.seed, r_a=args.rank_a
        )
        print(f"rangefinder_mean = {result.mean_error:.12g}")
        print(f"rangefinder_bound = {result.bound:.12g}")
        print(f"rangefinder_trials = {result.trials}")


def cmd_footprint(args: argparse.Namespace) -> None:
    if args.preset is not None:
        report = preset_report(args.preset)
    else:
        required = {
            "--layers": args.layers, "--topk-a": args.topk_a, "--topk-b": args.topk_b,
            "--pool-a": args.pool_a,
        }
        if args.mode == "param":
            required["--pool-b"] = args.pool_b
        missing = [flag for flag, value in required.items() if value is None]
        if missing:
            raise CliError(
                "without --preset, these flags are required: " + ", ".join(missing)
            )
        if args.mode == "param":
            value = footprint_params(
                args.layers, args.topk_a, args.topk_b, args.pool_a, args.pool_b,
                projections=args.projections, mask_pools=args.mask_pools,
                include_seed=not args.no_seed,
            )
            report = FootprintReport(
                accounting_mode="param_table", param_count=value,
                breakdown=(("coefficients + mask + seed", str(value)),),
            )
        else:
            # byte-table arithmetic charges a single pool's mask: --pool-a
            if args.bits is None:
                raise CliError("--mode byte requires --bits")
            value = footprint_bytes(
                args.layers, args.topk_a, args.topk_b, args.pool_a, args.bits,
                include_seed=not args.no_seed,
            )
            report = FootprintReport(
                accounting_mode="byte_table", byte_count=value,
                breakdown=(("payload + mask + seed", str(value)),),
            )
    print(report.to_json() if args.json else report.to_text())


def cmd_synth(args: argparse.Namespace) -> None:
    spec = SyntheticSpec(
        m=args.m, n=args.n, r=args.r, alignment=args.alignment,
        seed=args.seed, spectrum=_parse_spectrum(args.spectrum),
    )
    W, adapter = synth(spec)
    write_npy(args.out_weights, W)
    write_npy(args.out_a, adapter.A)
    write_npy(args.out_b, adapter.B)
    if args.out_delta is not None:
        write_npy(args.out_delta, delta(adapter))


def cmd_sweep(args: argparse.Namespace) -> None:
    spec = SyntheticSpec(
        m=args.m, n=args.n, r=args.r, alignment=args.alignment,
        seed=args.instance_seed, spectrum=_parse_spectrum(args.spectrum),
    )
    pools = _int_list(args.pools, "--pools")
    modes = [part.strip() for part in args.modes.split(",") if part.strip()]
    for mode in modes:
        if mode not in ("aligned", "random"):
            raise CliError(f"--modes entries must be 'aligned' or 'random', got {mode!r}")
    explicit_ks = _int_list(args.topks, "--topks") if args.topks is not None else None

    grid = []
    for n_pool in pools:
        # default budgets mirror the desk-scale fractions 10/25/50/100 % of N
        ks = explicit_ks if explicit_ks is not None else [
            max(1, n_pool // 10), max(1, n_pool // 4), max(1, n_pool // 2), n_pool,
        ]
        for k in ks:
            if k > n_pool:
                raise CliError(f"budget k={k} exceeds pool size N={n_pool}")
            for mode in modes:
                grid.append((n_pool, k, mode))

    config = SweepConfig(
        noise_sigma=args.noise, ridge=args.ridge, refit=args.refit,
        quant_bits=args.quant, seed=args.seed,
    )
    result = sweep(spec, grid, config)
    _emit(result.to_csv(timings=not args.no_timings), args.out)


# --- parser construction --------------------------------------------------

def _build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE",
                        help="key = value defaults; explicit flags override")
    common.add_argument("--verbose", action="store_true",
                        help="extra diagnostics on stderr")

    parser = argparse.ArgumentParser(
        prog="solar",
        description="Seeded sparse-coefficient compression for low-rank adapter updates.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    registry: dict[str, argparse.ArgumentParser] = {}

    p = sub.add_parser("compress", parents=[common],
                       help="fit an adapter against seeded basis pools and write a .solar file")
    p.add_argument("--weights", required=True, help="foundation weight matrix (.npy)")
    p.add_argument("--adapter-a", required=True, help="adapter factor A, r x n (.npy)")
    p.add_argument("--adapter-b", required=True, help="adapter factor B, m x r (.npy)")
    p.add_argument("--pool-a", type=int, required=True, help="basis pool size N_A")
    p.add_argument("--pool-b", type=int, help="basis pool size N_B (default: N_A)")
    p.add_argument("--topk-a", type=int, help="coefficients kept for factor A")
    p.add_argument("--topk-b", type=int, help="coefficients kept for factor B")
    p.add_argument("--topk", type=int,
                   help="total budget, split evenly (alternative to --topk-a/--topk-b)")
    p.add_argument("--noise", type=float, default=1.0, help="basis noise sigma (default 1)")
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--quant", type=int, choices=(2, 4, 8, 16, 32),
                   help="coefficient quantizer width in bits (default: float32)")
    p.add_argument("--refit", action="store_true",
                   help="re-solve least squares on the selected support")
    p.add_argument("--basis-mode", choices=("aligned", "random"), default="aligned")
    p.add_argument("--ridge", type=float, default=0.0, help="ridge term for the solve")
    p.add_argument("--no-fingerprint", action="store_true",
                   help="omit the foundation-weight fingerprint")
    p.add_argument("--name", default="adapter", help="record name inside the file")
    p.add_argument("--out", required=True, help="output .solar path")
    p.set_defaults(func=cmd_compress)
    registry["compress"] = p

    p = sub.add_parser("reconstruct", parents=[common],
                       help="regenerate bases from the stored seed and rebuild the factors")
    p.add_argument("--weights", required=True, help="foundation weight matrix (.npy)")
    p.add_argument("--in", dest="infile", required=True, help="input .solar path")
    p.add_argument("--name", help="record to reconstruct (required if several)")
    p.add_argument("--out-a", required=True, help="output path for the rebuilt A (.npy)")
    p.add_argument("--out-b", required=True, help="output path for the rebuilt B (.npy)")
    p.add_argument("--out-delta", help="optional output path for B@A (.npy)")
    p.set_defaults(func=cmd_reconstruct)
    registry["reconstruct"] = p

    p = sub.add_parser("analyze", parents=[common],
                       help="subspace-similarity grid between W and an update")
    p.add_argument("--weights", required=True)
    p.add_argument("--delta", required=True, help="update matrix (.npy)")
    p.add_argument("--max-i", type=int, default=16)
    p.add_argument("--max-j", type=int, default=16)
    p.add_argument("--side", choices=("left", "right"), default="left")
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.set_defaults(func=cmd_analyze)
    registry["analyze"] = p

    p = sub.add_parser("bound", parents=[common],
                       help="closed-form compression error bound (and optional Monte-Carlo check)")
    p.add_argument("--delta", help="update matrix (.npy); its spectrum feeds the bound")
    p.add_argument("--sigma", help="explicit spectrum, comma-separated descending floats")
    p.add_argument("--pool-a", type=int, required=True)
    p.add_argument("--pool-b", type=int, required=True)
    p.add_argument("--rank-a", type=int, required=True, help="sketch rank r_A")
    p.add_argument("--rank-b", type=int, required=True, help="sketch rank r_B")
    p.add_argument("--topk", type=int, required=True, help="total sparsity budget k")
    p.add_argument("--probes", type=int, help="run the rangefinder Monte-Carlo check")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bound)
    registry["bound"] = p

    p = sub.add_parser("footprint", parents=[common],
                       help="exact parameter/byte accounting (presets or explicit sizes)")
    p.add_argument("--preset", help="named accounting row (unknown name lists all)")
    p.add_argument("--mode", choices=("param", "byte"), default="param")
    p.add_argument("--layers", type=int)
    p.add_argument("--topk-a", type=int)
    p.add_argument("--topk-b", type=int)
    p.add_argument("--pool-a", type=int)
    p.add_argument("--pool-b", type=int)
    p.add_argument("--bits", type=int, choices=(2, 4, 8, 16, 32),
                   help="payload width for --mode byte")
    p.add_argument("--projections", type=int, default=1,
                   help="adapted projections per layer (default 1)")
    p.add_argument("--mask-pools", choices=("both", "single"), default="both",
                   help="count index masks for both pools or one")
    p.add_argument("--no-seed", action="store_true", help="exclude the shared seed scalar")
    p.add_argument("--json", action="store_true", help="JSON instead of a text table")
    p.set_defaults(func=cmd_footprint)
    registry["footprint"] = p

    p = sub.add_parser("synth", parents=[common],
                       help="generate a seeded (W, adapter) instance with chosen alignment")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--alignment", type=float, required=True,
                   help="fraction of adapter energy inside W's top-r subspace, in [0, 1]")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--spectrum", default="geometric:0.9",
                   help="flat | geometric:RATIO | polynomial:POWER")
    p.add_argument("--out-weights", required=True)
    p.add_argument("--out-a", required=True)
    p.add_argument("--out-b", required=True)
    p.add_argument("--out-delta")
    p.set_defaults(func=cmd_synth)
    registry["synth"] = p

    p = sub.add_parser("sweep", parents=[common],
                       help="error sweep over pool sizes, budgets, and basis modes (CSV)")
    p.add_argument("--m", type=int, default=64)
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--r", type=int, default=4)
    p.add_argument("--alignment", type=float, default=1.0)
    p.add_argument("--instance-seed", type=int, default=0, help="synthetic instance seed")
    p.add_argument("--spectrum", default="geometric:0.9")
    p.add_argument("--pools", default="50,100,200", help="pool sizes N, comma-separated")
    p.add_argument("--topks", help="budgets k per pool (default: 10/25/50/100 %% of N)")
    p.add_argument("--modes", default="aligned,random")
    p.add_argument("--noise", type=float, default=1.0)
    p.add_argument("--ridge", type=float, default=0.0)
    p.add_argument("--refit", action="store_true")
    p.add_argument("--quant", type=int, choices=(2, 4, 8, 16, 32))
    p.add_argument("--seed", type=int, default=0, help="pool seed shared across the grid")
    p.add_argument("--no-timings", action="store_true",
                   help="write 0.000 in the ms column for byte-reproducible output")
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.set_defaults(func=cmd_sweep)
    registry["sweep"] = p

    return parser, registry


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, registry = _build_parser()
    try:
        _setup_threads()
        argv = _inject_config(argv, registry)
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:  # argparse already printed the diagnostic
            return int(exc.code or 0)
        args.func(args)
        return EXIT_OK
    except FingerprintMismatch as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_FINGERPRINT
    except (CliError, FormatError, OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (np.linalg.LinAlgError, ArithmeticError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
