"""Command line entry point: ``picnet <command> ...`` or ``python -m picnet``.

Exit status is 0 on success, 1 when a verification sweep fails and 2 on bad
input.  Failures print one ``key=value`` line to stderr, for example::

    error=config msg="need C >= N, got C=1, N=2"
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from picnet.errors import CapacityError, ConfigurationError
from picnet.measures import ContextWeights
from picnet.netbuilder import CompiledNet
from picnet.transformer import TransformerNet, transformerify
from picnet.w1net import build_w1_contextual, build_w1_fixed_weights, build_w1_uniform
from picnet.harness.experiment import ExperimentConfig, read_csv, run_experiment
from picnet.harness.verify import verify_equal, verify_w1_net

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG = 0, 1, 2


class _Fail(Exception):
    def __init__(self, kind: str, msg: str, code: int):
        super().__init__(msg)
        self.kind, self.msg, self.code = kind, msg, code


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc.strerror}") from None


def _load_json(path: str):
    try:
        return json.loads(_read(path))
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"malformed JSON in {path}: {exc}") from None


def _load_net(path: str) -> CompiledNet:
    try:
        return CompiledNet.from_json(_load_json(path))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"{path} is not a network file: {exc}") from None


def _write(path: str, text: str) -> None:
    Path(path).write_text(text)


def cmd_compile_w1(args) -> int:
    if args.kind == "uniform":
        net = build_w1_uniform(args.N, args.d)
    elif args.kind == "fixed":
        if args.w is None or args.v is None:
            raise ConfigurationError("--kind fixed needs --w and --v numerators")
        net = build_w1_fixed_weights(ContextWeights(tuple(args.w), args.C),
                                     ContextWeights(tuple(args.v), args.C), args.d)
    else:
        net = build_w1_contextual(args.C, args.N, args.d)
    _write(args.out, net.dumps())
    s = net.sizes()
    print(f"role={net.meta['role']} depth={s['depth']} width={s['width']} nnz={s['nnz']}")
    return EXIT_OK


def cmd_verify_w1(args) -> int:
    result = verify_w1_net(_load_net(args.net), args.trials, args.seed, args.threads)
    if not result.ok:
        raise _Fail("verification", f"max_err={result.max_error!r} trials={result.trials}", EXIT_VERIFY)
    print(f"ok trials={result.trials} max_err={result.max_error!r}")
    return EXIT_OK


def cmd_approx(args) -> int:
    config = ExperimentConfig.loads(_read(args.config))
    report = run_experiment(config, threads=args.threads)
    _write(args.out, report.to_csv())
    if args.meta:
        _write(args.meta, json.dumps(report.to_json(), indent=2))
    for row in report.rows:
        print(f"delta={row.delta!r} delta_star={row.delta_star!r} K={row.K} "
              f"sup_err={row.sup_err_approx_region!r} bound={row.bound_omega_delta!r}")
    return EXIT_OK


def cmd_transformerify(args) -> int:
    net = _load_net(args.inp)
    tf = transformerify(net, args.tokens, pad_input=args.pad_input)
    _write(args.out, tf.dumps())
    s = tf.sizes()
    print(f"blocks={len(tf.blocks)} heads={s['max_heads']} nnz={s['nnz']} source_nnz={net.nonzero_param_count}")
    return EXIT_OK


def cmd_verify_equal(args) -> int:
    mlp = _load_net(args.mlp)
    try:
        tf = TransformerNet.from_json(_load_json(args.tf))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"{args.tf} is not a transformer file: {exc}") from None
    result = verify_equal(mlp, tf, args.trials, args.seed, args.threads)
    heads = {len(b.heads) for b in tf.blocks}
    if not result.ok or heads != {tf.n_tokens} or tf.nonzero_param_count > 2 * mlp.nonzero_param_count:
        raise _Fail("verification", f"max_err={result.max_error!r} heads={sorted(heads)} "
                    f"nnz={tf.nonzero_param_count} source_nnz={mlp.nonzero_param_count}", EXIT_VERIFY)
    print(f"ok trials={result.trials} max_err={result.max_error!r}")
    return EXIT_OK


def cmd_report(args) -> int:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = sorted(read_csv(_read(args.inp)), key=lambda r: (r["delta"], r["delta_star"]))
    if not rows:
        raise ConfigurationError("report has no rows")
    delta = [r["delta"] for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(delta, [r["sup_err_approx_region"] for r in rows], "o-", label="sup error, approximation region")
    ax.plot(delta, [r["bound_omega_delta"] for r in rows], "k--", label="omega(delta)")
    ax.plot(delta, [r["tail_moment_p"] for r in rows], "s:", label="tail moment, trifling region")
    ax.set_xlabel("delta")
    ax.set_ylabel("error")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(args.plot, format="svg", metadata={"Date": None})
    plt.close(fig)
    print(f"rows={len(rows)} plot={args.plot}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="picnet", description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=0, help="seed for randomized sweeps")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile-w1", help="compile an exact W1 network to JSON")
    p.add_argument("--C", type=int, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--kind", choices=("contextual", "uniform", "fixed"), default="contextual")
    p.add_argument("--w", type=int, nargs="+", help="numerators of w over C (fixed kind)")
    p.add_argument("--v", type=int, nargs="+", help="numerators of v over C (fixed kind)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compile_w1)

    p = sub.add_parser("verify-w1", help="compare a compiled W1 network with the oracle")
    p.add_argument("--net", required=True)
    p.add_argument("--trials", type=int, default=500)
    p.set_defaults(func=cmd_verify_w1)

    p = sub.add_parser("approx", help="run an approximation experiment and write the CSV report")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--meta", help="optional JSON file for metadata and timings")
    p.set_defaults(func=cmd_approx)

    p = sub.add_parser("transformerify", help="convert a network JSON into a transformer JSON")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tokens", type=int, required=True)
    p.add_argument("--pad-input", action="store_true", help="zero-pad inputs not divisible into tokens")
    p.set_defaults(func=cmd_transformerify)

    p = sub.add_parser("verify-equal", help="check a transformer against its source network")
    p.add_argument("--mlp", required=True)
    p.add_argument("--tf", required=True)
    p.add_argument("--trials", type=int, default=10_000)
    p.set_defaults(func=cmd_verify_equal)

    p = sub.add_parser("report", help="plot error against delta from a CSV report")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--plot", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def _diagnose(kind: str, msg: str) -> None:
    print(f"error={kind} msg={json.dumps(msg)}", file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    if args.threads < 1:
        _diagnose("config", "--threads must be positive")
        return EXIT_CONFIG
    try:
        return args.func(args)
    except _Fail as fail:
        _diagnose(fail.kind, fail.msg)
        return fail.code
    except (ConfigurationError, CapacityError) as exc:
        _diagnose("config" if isinstance(exc, ConfigurationError) else "capacity", str(exc))
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
