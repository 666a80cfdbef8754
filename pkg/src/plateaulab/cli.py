"""Command-line harness: experiment orchestration and CSV/JSON emission.

Every run is reproducible from (config, seed): all randomness flows from the
root seed through counter-based substreams, so the worker count never changes
results.  Output files are written atomically (temp file + rename).  CSV
bodies are byte-deterministic; the first line is a version comment excluded
from that guarantee.

Flags override values from an optional ``--config`` file, a flat TOML table
whose keys match the long flag names with ``-`` replaced by ``_``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from . import __version__, autoencoder, haarmoments, plateau
from .rng import spawn_rng

VERSION_COMMENT = f"# plateaulab {__version__}"

SCAN_COLUMNS = [
    "n", "m", "L", "l", "cost_family", "samples",
    "mean", "mean_se", "var", "var_se", "F_upper", "G_lower",
]
WARMUP_COLUMNS = [
    "n", "cost_family", "samples", "mean", "mean_se", "var", "var_se", "var_closed_form",
]
GORGE_COLUMNS = [
    "cost_family", "n", "delta", "samples", "empirical", "empirical_se", "bound", "side", "passed",
]
GORGE_SAMPLE_COLUMNS = ["cost_family", "n", "sample", "theta0", "cost"]
BOUNDS_COLUMNS = ["case", "n", "m", "L", "l", "value"]
HAAR_COLUMNS = [
    "check", "d", "n_samples", "closed_re", "closed_im", "mc_re", "mc_im", "std_error", "passed",
]
TRACE_COLUMNS = [
    "iteration", "shots", "est_cost", "exact_cost", "n_a", "n_b", "layers", "cost_kind", "seed",
]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: str, columns: list[str], rows) -> None:
    """Atomic CSV write: version comment, header, then one line per row."""
    lines = [VERSION_COMMENT, ",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in columns))
    _atomic_write(path, "\n".join(lines) + "\n")


def write_json(path: str, payload: dict) -> None:
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip() != ""]


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip() != ""]


def _load_config(path: str | None) -> dict:
    """Flat ``key = value`` document (a TOML-compatible subset).

    Values parse as int, float, bool, or quoted string; ``#`` starts a
    comment.  Keys use underscores and match the long flag names.
    """
    if path is None:
        return {}
    table: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, _, value = line.partition("=")
            table[key.strip().replace("-", "_")] = _parse_config_value(
                value.strip(), path, lineno
            )
    return table


def _parse_config_value(text: str, path: str, lineno: int):
    if text.startswith('"') and text.endswith('"') and len(text) >= 2:
        return text[1:-1]
    if text in ("true", "false"):
        return text == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    if "," in text:  # bare list, e.g. n = 4,6,8
        return text
    raise ValueError(f"{path}:{lineno}: cannot parse value {text!r}")


class _Args:
    """Effective option values: explicit flag, else config key, else default."""

    def __init__(self, namespace, config: dict, defaults: dict):
        self._ns = vars(namespace)
        self._config = config
        self._defaults = defaults

    def __getattr__(self, name):
        value = self._ns.get(name)
        if value is not None:
            return value
        if name in self._config:
            return self._config[name]
        return self._defaults.get(name)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plateaulab",
        description="Gradient-statistics experiments on layered variational circuits.",
    )
    parser.add_argument("--version", action="version", version=f"plateaulab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat TOML table of option defaults")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output CSV path")
        p.add_argument("--workers", type=int)

    p = sub.add_parser("warmup", help="tensor-Rx gradient variance vs closed forms")
    common(p)
    p.add_argument("--n", type=_int_list, help="qubit counts, comma separated")
    p.add_argument("--samples", type=int)

    p = sub.add_parser("variance-scan", help="Haar-block gradient statistics with bounds")
    common(p)
    p.add_argument("--n", type=_int_list)
    p.add_argument("--m", type=int)
    p.add_argument("--L", type=int, dest="layers")
    p.add_argument("--l", dest="target_layers", help="layer indices, comma separated, or 'all'")
    p.add_argument("--family", choices=plateau.HAAR_FAMILIES)
    p.add_argument("--samples", type=int)
    p.add_argument("--target-k", type=int, dest="target_k")

    p = sub.add_parser("gorge", help="valley-volume probability versus its bound")
    common(p)
    p.add_argument("--family", choices=["global", "local"])
    p.add_argument("--n", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--samples", type=int)
    p.add_argument("--samples-out", dest="samples_out", help="per-sample (theta0, cost) CSV")

    p = sub.add_parser("bounds", help="closed-form variance bound evaluators")
    common(p)
    p.add_argument("--case", choices=["projector", "traceless", "local"])
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--L", type=int, dest="layers")
    p.add_argument("--l", type=int, dest="target_layer")
    p.add_argument("--c1", type=float)
    p.add_argument("--ranks", type=_int_list)
    p.add_argument("--coeffs", type=_float_list)
    p.add_argument("--target-k", type=int, dest="target_k")

    p = sub.add_parser("haar-check", help="Monte-Carlo verification of Haar-moment oracles")
    common(p)
    p.add_argument("--samples", type=int)
    p.add_argument("--d", type=_int_list, help="unitary dimensions, comma separated")

    p = sub.add_parser("autoencoder-train", help="variable-shot trash-compression training")
    common(p)
    p.add_argument("--cost", choices=["global", "local"])
    p.add_argument("--n-a", type=int, dest="n_a")
    p.add_argument("--n-b", type=int, dest="n_b")
    p.add_argument("--L", type=int, dest="layers")
    p.add_argument("--max-iters", type=int, dest="max_iters")
    p.add_argument("--target", type=float)
    p.add_argument("--budget", type=int, help="total cost-evaluation budget")
    p.add_argument("--inner-evals", type=int, dest="inner_evals")
    p.add_argument("--summary", help="JSON run summary path")

    p = sub.add_parser("selftest", help="reduced acceptance battery; exit 2 on failure")
    common(p)

    return parser


def run(argv) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports its own diagnostics
        code = exc.code if isinstance(exc.code, int) else 1
        return 0 if code == 0 else 1
    try:
        config = _load_config(ns.config)
        handler = _HANDLERS[ns.command]
        return handler(ns, config)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


def _workers(args) -> int:
    return args.workers if args.workers else plateau.default_workers()


def _cmd_warmup(ns, config) -> int:
    args = _Args(ns, config, {"n": [4], "samples": 100_000, "seed": 7, "out": "warmup.csv"})
    ns_list = args.n if isinstance(args.n, list) else _int_list(str(args.n))
    rows = []
    for n in ns_list:
        for family in ("warmup-global", "warmup-local"):
            cfg = plateau.ScanConfig(
                n=n, m=2, layers=1, cost_family=family, samples=args.samples, seed=args.seed
            )
            rep = plateau.estimate_grad_stats(cfg)
            rows.append(
                {
                    "n": n,
                    "cost_family": family,
                    "samples": rep.n_samples,
                    "mean": rep.mean,
                    "mean_se": rep.mean_se,
                    "var": rep.variance,
                    "var_se": rep.var_se,
                    "var_closed_form": rep.closed_form_var,
                }
            )
    write_csv(args.out, WARMUP_COLUMNS, rows)
    by_family = {r["cost_family"]: r for r in rows if r["n"] == ns_list[-1]}
    gl = by_family["warmup-global"]
    print(
        f"warmup: wrote {len(rows)} rows to {args.out} "
        f"(n={ns_list[-1]} var_global={gl['var']:.6g} closed={gl['var_closed_form']:.6g})"
    )
    return 0


def _cmd_variance_scan(ns, config) -> int:
    args = _Args(
        ns,
        config,
        {
            "n": [4], "m": 2, "layers": 1, "target_layers": "all", "family": "global",
            "samples": 5_000, "seed": 7, "out": "variance-scan.csv", "target_k": None,
        },
    )
    ns_list = args.n if isinstance(args.n, list) else _int_list(str(args.n))
    rows = []
    for n in ns_list:
        if args.target_layers in ("all", None):
            layer_list = list(range(1, args.layers + 1))
        else:
            layer_list = _int_list(str(args.target_layers))
        for l in layer_list:
            cfg = plateau.ScanConfig(
                n=n,
                m=args.m,
                layers=args.layers,
                cost_family=args.family,
                samples=args.samples,
                seed=args.seed,
                target_layer=l,
                target_k=args.target_k,
                workers=_workers(args),
            )
            rep = plateau.estimate_grad_stats(cfg)
            rows.append(
                {
                    "n": n, "m": args.m, "L": args.layers, "l": l,
                    "cost_family": args.family, "samples": rep.n_samples,
                    "mean": rep.mean, "mean_se": rep.mean_se,
                    "var": rep.variance, "var_se": rep.var_se,
                    "F_upper": rep.f_upper, "G_lower": rep.g_lower,
                }
            )
    write_csv(args.out, SCAN_COLUMNS, rows)
    print(f"variance-scan: wrote {len(rows)} rows to {args.out}")
    return 0


def _cmd_gorge(ns, config) -> int:
    args = _Args(
        ns,
        config,
        {
            "family": "global", "n": 10, "delta": 0.5, "samples": 100_000,
            "seed": 7, "out": "gorge.csv", "samples_out": None,
        },
    )
    rep = plateau.gorge_probability(args.family, args.n, args.delta, args.samples, args.seed)
    write_csv(
        args.out,
        GORGE_COLUMNS,
        [
            {
                "cost_family": rep.cost_family, "n": rep.n, "delta": rep.delta,
                "samples": rep.samples, "empirical": rep.empirical,
                "empirical_se": rep.empirical_se, "bound": rep.bound,
                "side": rep.side, "passed": rep.passed,
            }
        ],
    )
    if args.samples_out:
        theta0, costs = plateau.gorge_cost_samples(args.family, args.n, args.samples, args.seed)
        limit = min(len(costs), 20_000)  # scatter payload; the bound row uses all samples
        write_csv(
            args.samples_out,
            GORGE_SAMPLE_COLUMNS,
            [
                {
                    "cost_family": args.family, "n": args.n, "sample": i,
                    "theta0": float(theta0[i]), "cost": float(costs[i]),
                }
                for i in range(limit)
            ],
        )
    print(
        f"gorge: {rep.cost_family} n={rep.n} delta={rep.delta}: empirical={rep.empirical:.6g} "
        f"bound={rep.bound:.6g} ({rep.side}) pass={rep.passed}"
    )
    return 0


def _cmd_bounds(ns, config) -> int:
    args = _Args(
        ns,
        config,
        {
            "case": "projector", "n": 4, "m": 2, "layers": 1, "target_layer": 1,
            "c1": 1.0, "ranks": None, "coeffs": None, "out": None, "target_k": None,
        },
    )
    n, m, layers, l = args.n, args.m, args.layers, args.target_layer
    if args.case == "projector":
        ranks = args.ranks if args.ranks else [1] * (n // m)
        value = plateau.f_upper_projector(n, m, layers, l, c1=args.c1, ranks=ranks)
    elif args.case == "traceless":
        coeffs = args.coeffs if args.coeffs else [1.0]
        value = plateau.f_upper_traceless(n, m, layers, l, coeffs=coeffs)
    else:
        from .ansatz import AnsatzLayout, BlockKind
        from .core import Statevector
        from .observables import make_local_cost

        layout = AnsatzLayout(n, m, layers, BlockKind.HAAR_BLOCK)
        cfg = plateau.ScanConfig(
            n=n, m=m, layers=layers, cost_family="local", samples=100, seed=0,
            target_layer=l, target_k=args.target_k,
        )
        addr = plateau._resolve_target(layout, cfg)
        value = plateau.g_lower(
            layout, make_local_cost(n), ((1.0, Statevector.zero(n)),), addr
        )
    if args.out:
        write_csv(
            args.out,
            BOUNDS_COLUMNS,
            [{"case": args.case, "n": n, "m": m, "L": layers, "l": l, "value": value}],
        )
    print(f"{value:.6f}")
    return 0


def _cmd_haar_check(ns, config) -> int:
    args = _Args(
        ns, config, {"samples": 100_000, "seed": 11, "d": [2, 4], "out": "haar-check.csv"}
    )
    dims = args.d if isinstance(args.d, list) else _int_list(str(args.d))
    reports = haarmoments.standard_battery(args.samples, args.seed, dims=tuple(dims))
    rows = [
        {
            "check": r.which, "d": r.d, "n_samples": r.n_samples,
            "closed_re": r.closed_form.real, "closed_im": r.closed_form.imag,
            "mc_re": r.monte_carlo_mean.real, "mc_im": r.monte_carlo_mean.imag,
            "std_error": r.std_error, "passed": r.passed,
        }
        for r in reports
    ]
    write_csv(args.out, HAAR_COLUMNS, rows)
    n_pass = sum(r.passed for r in reports)
    print(f"haar-check: {n_pass}/{len(reports)} checks passed, wrote {args.out}")
    return 0 if n_pass == len(reports) else 2


def _cmd_autoencoder(ns, config) -> int:
    args = _Args(
        ns,
        config,
        {
            "cost": "local", "n_a": 1, "n_b": 10, "layers": 2, "seed": 0,
            "max_iters": 300, "target": None, "budget": None, "inner_evals": 60,
            "out": "trace.csv", "summary": None,
        },
    )
    instance = autoencoder.build_instance(args.n_a, args.n_b, args.layers)
    cfg = autoencoder.TrainConfig(
        cost_kind=args.cost,
        seed=args.seed,
        max_iterations=args.max_iters,
        target_cost=args.target,
        max_cost_evals=args.budget,
        inner_evals=args.inner_evals,
    )
    trace = autoencoder.train(instance, cfg)
    rows = [
        {
            "iteration": r.iteration, "shots": r.shots, "est_cost": r.est_cost,
            "exact_cost": r.exact_cost, "n_a": args.n_a, "n_b": args.n_b,
            "layers": args.layers, "cost_kind": args.cost, "seed": args.seed,
        }
        for r in trace.rows
    ]
    write_csv(args.out, TRACE_COLUMNS, rows)
    summary = {
        "cost_kind": args.cost,
        "n_a": args.n_a,
        "n_b": args.n_b,
        "layers": args.layers,
        "seed": args.seed,
        "outcome": trace.outcome.value,
        "iterations": trace.iterations(),
        "final_exact_cost": trace.final_exact(),
        "total_cost_evals": trace.total_evals,
        "parameter_count": instance.parameter_count,
        "gate_count": instance.gate_count,
    }
    if args.summary:
        write_json(args.summary, summary)
    print(
        f"autoencoder-train: {args.cost} n_b={args.n_b} -> {trace.outcome.value} "
        f"after {trace.iterations()} iterations, exact cost {trace.final_exact():.6g}"
    )
    return 0


def _cmd_selftest(ns, config) -> int:
    """Reduced acceptance battery: every check family at a scale that runs in
    about a minute.  The full-scale gate lives in the pytest suite."""
    args = _Args(ns, config, {"seed": 23, "out": None})
    seed = args.seed
    failures = []

    def check(name: str, ok: bool, detail: str = ""):
        line = f"[{'PASS' if ok else 'FAIL'}] {name}"
        if detail:
            line += f"  ({detail})"
        print(line)
        if not ok:
            failures.append(name)

    spot_f = plateau.f_upper_projector(4, 2, 1, 1, c1=1.0, ranks=[1, 1])
    check("bound evaluator, projector spot value", abs(spot_f - 16 / 540) < 1e-15, f"{spot_f:.6f}")

    from .ansatz import AnsatzLayout, BlockAddress, BlockKind
    from .core import Statevector
    from .observables import make_local_cost

    layout = AnsatzLayout(4, 2, 1, BlockKind.HAAR_BLOCK)
    spot_g = plateau.g_lower(
        layout, make_local_cost(4), ((1.0, Statevector.zero(4)),), BlockAddress(k=1, layer=1)
    )
    check("bound evaluator, local spot value", abs(spot_g - 8 / 5625 * 3 / 32) < 1e-18, f"{spot_g:.6g}")

    for n in (4, 6):
        for family in ("warmup-global", "warmup-local"):
            rep = plateau.estimate_grad_stats(
                plateau.ScanConfig(n=n, m=2, layers=1, cost_family=family, samples=100_000, seed=seed)
            )
            se = plateau.warmup_variance_null_se(family, n, rep.n_samples)
            ok = abs(rep.variance - rep.closed_form_var) <= 3 * se
            check(f"{family} variance n={n}", ok and rep.zero_mean_pass())

    for family in ("global", "local"):
        for layers in (1, 2):
            for l in range(1, layers + 1):
                rep = plateau.estimate_grad_stats(
                    plateau.ScanConfig(
                        n=4, m=2, layers=layers, cost_family=family,
                        samples=1_500, seed=seed, target_layer=l,
                    )
                )
                check(
                    f"{family} sandwich n=4 L={layers} l={l}",
                    bool(rep.sandwich_pass and rep.zero_mean_pass()),
                )

    for family, delta in (("global", 0.5), ("local", 0.75)):
        rep = plateau.gorge_probability(family, 10, delta, 100_000, seed)
        check(f"gorge bound, {family} cost", rep.passed)

    reports = haarmoments.standard_battery(10_000, seed, dims=(2, 4))
    check(
        "haar-moment battery (1e4 samples)",
        all(r.passed for r in reports),
        f"{sum(r.passed for r in reports)}/{len(reports)}",
    )

    from .ansatz import ParameterVector
    from .core import ProductState
    from .observables import CostSpec, exact_cost, lightcone_local_cost

    rng = spawn_rng(seed, 99)
    worst = 0.0
    for _ in range(10):
        n = int(rng.integers(4, 13))
        lay = AnsatzLayout(n, 2, 2, BlockKind.HARDWARE_RY_CZ)
        spec = CostSpec(
            lay, make_local_cost(n), ((1.0, ProductState.from_bits(rng.integers(0, 2, n))),)
        )
        pv = ParameterVector.uniform(lay, rng)
        worst = max(worst, abs(lightcone_local_cost(spec, pv) - exact_cost(spec, pv)))
    check("light-cone evaluator agreement", worst < 1e-9, f"worst {worst:.1e}")

    from .gradient import GradientMethod, full_gradient

    worst = 0.0
    for _ in range(10):
        n = int(rng.integers(2, 7))
        lay = AnsatzLayout(n, 2, 2, BlockKind.HARDWARE_RY_CZ)
        spec = CostSpec(lay, make_local_cost(n), ((1.0, Statevector.zero(n)),))
        pv = ParameterVector.uniform(lay, rng)
        gps = full_gradient(spec, pv, GradientMethod.PARAMETER_SHIFT)
        gfd = full_gradient(spec, pv, GradientMethod.FINITE_DIFFERENCE)
        worst = max(worst, float(np.max(np.abs(gps - gfd))))
    check("parameter-shift vs finite-difference", worst < 1e-6, f"worst {worst:.1e}")

    inst = autoencoder.build_instance(1, 10, 2)
    check(
        "trash-compression instance size",
        inst.parameter_count == 51 and inst.gate_count == 71,
        f"{inst.parameter_count} parameters, {inst.gate_count} gates",
    )
    ev_l = autoencoder._DenseCostEvaluator(inst, "local")
    ev_g = autoencoder._DenseCostEvaluator(inst, "global")
    ok = True
    for _ in range(100):
        th = rng.uniform(-np.pi, np.pi, inst.parameter_count)
        cl, cg = ev_l.exact(th), ev_g.exact(th)
        ok &= cl <= cg + 1e-12 and cg <= inst.n_b * cl + 1e-12
    check("cost faithfulness sandwich", ok)

    if failures:
        print(f"selftest: {len(failures)} failure(s)")
        return 2
    print("selftest: all checks passed")
    return 0


_HANDLERS = {
    "warmup": _cmd_warmup,
    "variance-scan": _cmd_variance_scan,
    "gorge": _cmd_gorge,
    "bounds": _cmd_bounds,
    "haar-check": _cmd_haar_check,
    "autoencoder-train": _cmd_autoencoder,
    "selftest": _cmd_selftest,
}
