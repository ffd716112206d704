"""Command-line front end for the assembly computations and experiments."""
import argparse
import logging
import sys
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import pandas as pd
from pydantic import ValidationError

from services.additive.experiments import exceedance_scan, feller_terms, lil_experiment, sample_paths
from services.additive.plots import render_paths_svg
from services.additive.strassen import strassen_distance
from services.cli.config_file import load_config
from services.cli.output import write_csv
from services.dist.scan import fl_scan
from services.dist.tv import tv_truncated
from services.model.assembly import (
    check_weakly_logarithmic,
    derive_rates,
    exact_law,
    spec_hash,
    total_count,
)
from services.model.presets import parse_spec
from services.sampler.sampler import draw_many
from services.verify.proposition import proposition1_check
from services.verify.ruzsa import random_ruzsa_suite
from shared.config import Config
from shared.exceptions import AssemblyError, ConfigError
from shared.models import AdditiveFunctionSpec, AssemblySpec, ComponentVector, PolygonalPath, as_fraction

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_VERIFY_FAILED = 3


class VerificationFailed(Exception):
    """A check ran to completion and its inequality did not hold."""


def _int_list(text: str) -> List[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'") from e


def _path_points(text: str) -> List[Tuple[float, float]]:
    """'0:0,0.5:1,1:0' -> [(0, 0), (0.5, 1), (1, 0)]."""
    points = []
    try:
        for item in text.split(","):
            t, y = item.split(":")
            points.append((float(t), float(y)))
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected t:y pairs separated by commas, got '{text}'") from e
    return points


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML experiment file")
    common.add_argument("--spec", help="permutations, set-partitions, ewens:<theta> or ewens with --theta")
    common.add_argument("--theta", help="Ewens parameter")
    common.add_argument("--n", type=int, help="assembly size")
    common.add_argument("--r", type=int, help="truncation index")
    common.add_argument("--seed", type=int, help="master seed (default 0)")
    common.add_argument("--replicas", type=int, help="Monte Carlo replicas")
    common.add_argument("--backend", choices=("auto", "exact", "float"), help="numeric backend")
    common.add_argument("--out", help="CSV output path (default stdout)")
    common.add_argument("--svg", help="optional SVG output path")
    common.add_argument("--verbose", action="store_true", help="debug logging")
    common.add_argument("--quiet", action="store_true", help="warnings and errors only")

    parser = argparse.ArgumentParser(prog="assemblies", description="Weighted random assemblies")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("count", parents=[common], help="weighted number of assemblies W_n")
    sub.add_parser("rates", parents=[common], help="Poisson rates lambda_j")
    p = sub.add_parser("check-log", parents=[common], help="weakly-logarithmic check")
    p.add_argument("--theta-lo")
    p.add_argument("--theta-hi")
    p = sub.add_parser("law", parents=[common], help="exact probability of a component vector")
    p.add_argument("--s", required=True, help="component vector, e.g. 1,1,0")
    sub.add_parser("tv", parents=[common], help="truncated total-variation distance")
    p = sub.add_parser("tv-scan", parents=[common], help="distance scan over r with power fit")
    p.add_argument("--r-list", type=_int_list)
    p.add_argument("--theta-lo")
    p = sub.add_parser("sample", parents=[common], help="draw component vectors")
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--method", choices=("sequential", "rejection", "chain"), default="sequential")
    p = sub.add_parser("lil", parents=[common], help="functional-LIL experiment, a_j = 1")
    p.add_argument("--n1", type=int)
    p.add_argument("--m", type=int, default=16, help="points of the m grid")
    p.add_argument("--delta", type=float, default=0.1)
    p = sub.add_parser("feller", parents=[common], help="Feller series terms, a_j = 1")
    p.add_argument("--ladder", default=None, help="ladder:<s>:<x>")
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--J", type=int, default=1000)
    p = sub.add_parser("exceed", parents=[common], help="exceedance frequency of psi, a_j = 1")
    p.add_argument("--n1", type=int)
    p.add_argument("--ladder", default=None, help="ladder:<s>:<x>")
    p.add_argument("--eps", type=float, default=0.5)
    p = sub.add_parser("ruzsa", parents=[common], help="randomised extension-set inequality suite")
    p.add_argument("--instances", type=int, default=200)
    p = sub.add_parser("strassen", parents=[common], help="distance of a path to the Strassen ball")
    p.add_argument("--path", type=_path_points, required=True)
    p = sub.add_parser("prop1", parents=[common], help="coefficient ratio of the truncated series")
    p.add_argument("--d", default="1", help="one value or a comma list d_1..d_n")
    p.add_argument("--m", type=int)
    p.add_argument("--eta", type=float, default=0.0)
    p.add_argument("--delta", type=float, default=0.25)
    return parser


def _setup_logging(args: argparse.Namespace) -> None:
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
        force=True,
    )


class Context:
    """Resolved spec and shared parameters of one invocation."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        config = load_config(args.config) if args.config else None
        params = config.params if config else None
        self.params = params
        self.spec: Optional[AssemblySpec] = config.spec if config else None
        if args.spec:
            self.spec = parse_spec(args.spec, theta=args.theta)
        self.n: Optional[int] = args.n if args.n is not None else (params.n if params else None)
        self.r: Optional[int] = args.r if args.r is not None else (params.r if params else None)
        self.seed: int = args.seed if args.seed is not None else (params.seed if params else 0)
        self.replicas: Optional[int] = (args.replicas if args.replicas is not None
                                        else params.replicas if params else None)
        default_backend = params.backend if params else "auto"
        self.backend_request = args.backend or default_backend
        self.out = args.out or (params.out if params else None)
        self.svg = args.svg or (params.svg if params else None)
        if args.seed is not None and args.seed < 0:
            raise ConfigError(f"seed must be nonnegative, got {args.seed}")

    def need_spec(self) -> AssemblySpec:
        if self.spec is None:
            raise ConfigError("--spec (or a config file) is required")
        return self.spec

    def need_n(self) -> int:
        if self.n is None or self.n < 1:
            raise ConfigError("--n must be a positive integer")
        return self.n

    def need_r(self) -> int:
        if self.r is None:
            raise ConfigError("--r is required")
        return self.r

    def pick(self, name: str, required: bool = True) -> Any:
        """Flag value, else the config-file key of the same name."""
        value = getattr(self.args, name, None)
        if value is None and self.params is not None:
            value = getattr(self.params, name, None)
        if value is None and required:
            raise ConfigError(f"--{name.replace('_', '-')} is required")
        return value

    def header(self, **extra: Any) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            "tool": f"assemblies {Config.TOOL_VERSION}",
            "command": self.args.command,
            "spec": self.spec.name if self.spec else None,
            "spec_hash": spec_hash(self.spec) if self.spec else None,
            "n": self.n,
            "seed": self.seed,
            "backend": self.backend_request,
        }
        out.update(extra)
        return out

    def emit(self, frame: pd.DataFrame, **extra: Any) -> None:
        write_csv(frame, self.header(**extra), self.out)


def _fraction_text(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def cmd_count(ctx: Context) -> int:
    spec, n = ctx.need_spec(), ctx.need_n()
    value = total_count(spec, n)
    ctx.emit(pd.DataFrame([{"n": n, "count": _fraction_text(value)}]), backend=value.backend.value)
    return EXIT_OK


def cmd_rates(ctx: Context) -> int:
    spec, n = ctx.need_spec(), ctx.need_n()
    rates = derive_rates(spec, n, ctx.backend_request)
    rows = [{"j": j, "rate": _fraction_text(rates.exact[j - 1]) if rates.exact else "",
             "rate_float": float(rates.values[j - 1])} for j in range(1, n + 1)]
    ctx.emit(pd.DataFrame(rows), backend=rates.backend.value)
    return EXIT_OK


def cmd_check_log(ctx: Context) -> int:
    spec, n = ctx.need_spec(), ctx.need_n()
    rates = derive_rates(spec, n, ctx.backend_request)
    theta_lo, theta_hi = as_fraction(ctx.pick("theta_lo")), as_fraction(ctx.pick("theta_hi"))
    verdict = check_weakly_logarithmic(rates, theta_lo, theta_hi)
    ctx.emit(pd.DataFrame([verdict.model_dump()]), theta_lo=theta_lo, theta_hi=theta_hi)
    if not verdict.passed:
        raise VerificationFailed(f"{verdict.bound} bound fails at j={verdict.index}")
    return EXIT_OK


def cmd_law(ctx: Context) -> int:
    spec = ctx.need_spec()
    s = ComponentVector.parse(ctx.args.s)
    ctx.n = s.n
    value = exact_law(spec, s)
    ctx.emit(pd.DataFrame([{"s": str(s), "probability": _fraction_text(value),
                            "probability_float": float(value)}]), backend=value.backend.value)
    return EXIT_OK


def cmd_tv(ctx: Context) -> int:
    spec, n, r = ctx.need_spec(), ctx.need_n(), ctx.need_r()
    rates = derive_rates(spec, n, ctx.backend_request)
    value = tv_truncated(rates, n, r)
    ctx.emit(pd.DataFrame([{"n": n, "r": r, "tv": value, "backend": rates.backend.value}]))
    return EXIT_OK


def cmd_tv_scan(ctx: Context) -> int:
    spec, n = ctx.need_spec(), ctx.need_n()
    scan = fl_scan(spec, n, ctx.pick("r_list"), as_fraction(ctx.pick("theta_lo")), ctx.backend_request)
    ctx.emit(scan.to_frame(), slope=f"{scan.slope:.12g}", c_fit=f"{scan.c_fit:.12g}",
             c1=f"{scan.constants.c1:.12g}")
    return EXIT_OK


def cmd_sample(ctx: Context) -> int:
    spec, n = ctx.need_spec(), ctx.need_n()
    rates = derive_rates(spec, n, "float" if ctx.args.method != "rejection" else ctx.backend_request)
    draws = draw_many(rates, n, ctx.args.count, ctx.seed, ctx.args.method)
    frame = pd.DataFrame(draws, columns=[f"s{j}" for j in range(1, n + 1)])
    frame.insert(0, "draw", range(len(frame)))
    ctx.emit(frame, method=ctx.args.method)
    return EXIT_OK


def _unit_h(n: int) -> AdditiveFunctionSpec:
    return AdditiveFunctionSpec.completely(1.0, n, label="a_j=1")


def cmd_lil(ctx: Context) -> int:
    spec, n = ctx.need_spec(), ctx.need_n()
    replicas = ctx.replicas if ctx.replicas is not None else 100
    summary = lil_experiment(spec, _unit_h(n), n, n1=ctx.pick("n1", required=False), replicas=replicas,
                             seed=ctx.seed, m_points=ctx.args.m, delta=ctx.args.delta)
    if ctx.svg:
        render_paths_svg(sample_paths(spec, _unit_h(n), n, count=min(replicas, 5), seed=ctx.seed),
                         title=f"{spec.name}, n={n}", out=ctx.svg)
    ctx.emit(summary.to_frame(), replicas=replicas, median_distance=f"{summary.median_distance:.12g}",
             endpoint_outside=f"{summary.endpoint_outside:.12g}", pair_outside=f"{summary.pair_outside:.12g}")
    return EXIT_OK


def _ladder(args: argparse.Namespace) -> str:
    return args.ladder or f"ladder:2:{args.eps}"


def cmd_feller(ctx: Context) -> int:
    spec = ctx.need_spec()
    J = ctx.args.J
    ctx.n = J
    rates = derive_rates(spec, J, "float")
    report = feller_terms(_unit_h(J), rates, _ladder(ctx.args), J)
    ctx.emit(report.to_frame(), phi=_ladder(ctx.args), classification=report.classification,
             comparison_spread=report.comparison_spread)
    return EXIT_OK


def cmd_exceed(ctx: Context) -> int:
    spec, n = ctx.need_spec(), ctx.need_n()
    replicas = ctx.replicas if ctx.replicas is not None else 100
    estimate = exceedance_scan(spec, _unit_h(n), _ladder(ctx.args), n, n1=ctx.pick("n1", required=False),
                               replicas=replicas, seed=ctx.seed)
    ctx.emit(pd.DataFrame([estimate.model_dump()]), psi=_ladder(ctx.args))
    return EXIT_OK


def cmd_ruzsa(ctx: Context) -> int:
    suite = random_ruzsa_suite(ctx.args.instances, ctx.seed)
    ctx.emit(suite.to_frame(), instances=ctx.args.instances)
    if not suite.all_passed:
        raise VerificationFailed("extension-set inequality failed on at least one instance")
    return EXIT_OK


def cmd_strassen(ctx: Context) -> int:
    path = PolygonalPath.from_points(ctx.args.path)
    value = strassen_distance(path)
    if ctx.svg:
        render_paths_svg([path], title="path", out=ctx.svg)
    ctx.emit(pd.DataFrame([{"breakpoints": len(path.t), "energy": path.energy, "distance": value}]))
    return EXIT_OK


def _d_values(text: str, n: int) -> List[Fraction]:
    values = [as_fraction(x) for x in text.split(",") if x.strip()]
    if len(values) == 1:
        return values * n
    return values


def cmd_prop1(ctx: Context) -> int:
    n = ctx.need_n()
    r = ctx.r if ctx.r is not None else 0
    m = ctx.args.m if ctx.args.m is not None else n
    result = proposition1_check(_d_values(ctx.args.d, n), n, r, m, ctx.args.eta, ctx.args.delta,
                                ctx.backend_request)
    ctx.emit(pd.DataFrame([result.model_dump(mode="json")]))
    return EXIT_OK


HANDLERS: Dict[str, Callable[[Context], int]] = {
    "count": cmd_count,
    "rates": cmd_rates,
    "check-log": cmd_check_log,
    "law": cmd_law,
    "tv": cmd_tv,
    "tv-scan": cmd_tv_scan,
    "sample": cmd_sample,
    "lil": cmd_lil,
    "feller": cmd_feller,
    "exceed": cmd_exceed,
    "ruzsa": cmd_ruzsa,
    "strassen": cmd_strassen,
    "prop1": cmd_prop1,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse ``argv``, run the subcommand and return the exit code.

    Returns:
        0 on success, 2 for invalid arguments or configuration, 3 when a
        verification ran and failed
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_INVALID
    _setup_logging(args)
    try:
        ctx = Context(args)
        return HANDLERS[args.command](ctx)
    except VerificationFailed as e:
        logger.error(f"Verification failed: {e}")
        return EXIT_VERIFY_FAILED
    except (AssemblyError, ValidationError) as e:
        logger.error(f"{args.command}: {e}")
        return EXIT_INVALID


def main() -> None:
    """Console entry point."""
    sys.exit(run())


if __name__ == "__main__":
    main()
