"""Command-line experiment runner.

Every subcommand writes CSV (to ``--out`` or standard output) and a short
human summary. Studies also get a PNG figure next to the CSV and, with
``--gnuplot``, a gnuplot script. A ``<out>.run.json`` file records the
:class:`RunConfig`, and ``bergman-lab --config <file>`` replays it.

Exit codes: 0 success, 2 a condition check failed, 1 usage or runtime error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import approx, conditions, jordan, spaces
from .conditions import fmt
from .funcmodel import parse_function
from .quadrature import build_rule
from .weights import parse_weight

SUBCOMMANDS = (
    "check-weight", "suggest-k", "norm", "dilation-study", "degree-study", "project", "approximate", "jordan-study",
)
CHECKS = ("dilation", "monotone", "superbiharmonic", "vanishing", "integrability")
STUDIES = ("dilation-study", "degree-study", "jordan-study")

EXIT_OK, EXIT_ERROR, EXIT_FAILED = 0, 1, 2


@dataclass
class RunConfig:
    """Everything needed to rerun a command; there is no randomness anywhere."""

    subcommand: str
    weight: str = "catalog:constant,c=1"
    f: str | None = None
    p: float = 2.0
    space: str = "bergman"
    nr: int = 64
    ntheta: int = 128
    R: float = 1.0
    k: int = 0
    r0: float = 0.5
    cmax: float = conditions.DEFAULT_CMAX
    r: list = field(default_factory=list)
    degrees: list = field(default_factory=list)
    domain: str = "disk"
    eps: float = 1e-2
    method: str = "taylor"
    check: str = "dilation"
    out: str | None = None
    gnuplot: bool = False

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        data = json.loads(text)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown RunConfig fields: {sorted(unknown)}")
        return cls(**data)


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text: str) -> list:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _ints(text: str) -> list:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bergman-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="replay a saved RunConfig JSON file")
    sub = parser.add_subparsers(dest="subcommand")
    for name in SUBCOMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--weight", default="catalog:constant,c=1")
        s.add_argument("--f", help="test function, e.g. geometric,lambda=1,beta=0.3")
        s.add_argument("--p", type=float, default=2.0)
        s.add_argument("--space", choices=spaces.SPACES, default="bergman")
        s.add_argument("--nr", type=int, default=64)
        s.add_argument("--ntheta", type=int, default=128)
        s.add_argument("--R", type=float, default=1.0)
        s.add_argument("--k", type=int, default=0)
        s.add_argument("--r0", type=float, default=0.5)
        s.add_argument("--cmax", type=float, default=conditions.DEFAULT_CMAX)
        s.add_argument("--r", type=_floats, default=[])
        s.add_argument("--degrees", type=_ints, default=[])
        s.add_argument("--domain", default="disk")
        s.add_argument("--eps", type=float, default=1e-2)
        s.add_argument("--method", choices=("taylor", "projection", "mergelyan"), default="taylor")
        s.add_argument("--check", choices=CHECKS, default="dilation")
        s.add_argument("--out")
        s.add_argument("--gnuplot", action="store_true", help="also write a gnuplot script")
    return parser


def parse_config(argv) -> RunConfig:
    args = build_parser().parse_args(argv)
    if args.config:
        if args.subcommand:
            raise UsageError("--config replays a saved run and takes no subcommand")
        return RunConfig.from_json(Path(args.config).read_text())
    if not args.subcommand:
        raise UsageError(f"a subcommand is required: {', '.join(SUBCOMMANDS)}")
    values = {k: v for k, v in vars(args).items() if k != "config"}
    return RunConfig(**values)


def _kv_csv(pairs) -> str:
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(("key", "value"))
    out.writerows(pairs)
    return buf.getvalue()


def _value(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, (int, str)):
        return str(x)
    return fmt(x)


def _need_f(cfg: RunConfig):
    if not cfg.f:
        raise UsageError(f"{cfg.subcommand} needs --f")
    return parse_function(cfg.f)


def _rule(cfg: RunConfig):
    return build_rule(cfg.nr, cfg.ntheta, cfg.R)


def _check_weight(cfg, w):
    if cfg.check == "dilation":
        rep = conditions.check_dilation_bound(w, cfg.k, cfg.r0, cfg.cmax)
    elif cfg.check == "monotone":
        rep = conditions.check_monotone_rk(w, cfg.k, cfg.r0)
    elif cfg.check == "superbiharmonic":
        rep = conditions.check_superbiharmonic(w)
    elif cfg.check == "vanishing":
        rep = conditions.check_boundary_vanishing(w, cfg.r or [0.9, 0.99, 0.999])
    else:
        rep = conditions.check_radial_integrability(w)
    summary = f"{rep.condition_id}: {'passed' if rep.passed else 'FAILED'}, estimated_C={fmt(rep.estimated_C)}"
    return rep.as_pairs(), summary, EXIT_OK if rep.passed else EXIT_FAILED


def _suggest(cfg, w):
    k = conditions.suggest_k(w, r0=cfg.r0, Cmax=cfg.cmax)
    pairs = [("k", "none" if k is None else str(k)), ("r0", fmt(cfg.r0)), ("cmax", fmt(cfg.cmax))]
    if k is None:
        return pairs, "no k <= 16 satisfies the dilation bound", EXIT_FAILED
    return pairs, f"smallest k: {k}", EXIT_OK


def _norm(cfg, w):
    f, rule = _need_f(cfg), _rule(cfg)
    if cfg.domain != "disk":
        res = jordan.pullback_norm(f, w, cfg.p, jordan.parse_domain(cfg.domain), rule)
    else:
        res = spaces.space_norm(cfg.space, f, w, cfg.p, rule)
    pairs = [(k, _value(v)) for k, v in asdict(res).items()]
    what = "metric" if res.metric else "norm"
    return pairs, f"{cfg.space} {what} of {f.name} under {w.source}: {fmt(res.value)} (p-th power {fmt(res.power)})", EXIT_OK


def _project(cfg, w):
    f, rule = _need_f(cfg), _rule(cfg)
    if len(cfg.degrees) != 1:
        raise UsageError("project needs a single --degrees value")
    if cfg.p != 2:
        raise UsageError("project is only defined for p = 2")
    d = cfg.degrees[0]
    q = approx.best_l2_projection(f, w, d, rule)
    err = math.sqrt(spaces.difference_power("bergman", f, q.to_model(), w, 2.0, rule))
    pairs = [("degree", str(q.degree)), ("error", fmt(err))]
    for n, c in enumerate(q.coeffs):
        pairs += [(f"c{n}_re", fmt(c.real)), (f"c{n}_im", fmt(c.imag))]
    return pairs, f"degree-{d} projection of {f.name}: error {fmt(err)}", EXIT_OK


def _approximate(cfg, w):
    f, rule = _need_f(cfg), _rule(cfg)
    if cfg.domain != "disk":
        res = jordan.jordan_approximate(f, w, cfg.p, jordan.parse_domain(cfg.domain), cfg.eps, rule)
        pairs = [("degree", str(res.degree)), ("rho", fmt(res.rho)), ("dilation_error", fmt(res.dilation_error)),
                 ("sup_residual", fmt(res.sup_residual)), ("achieved_error", fmt(res.achieved_error))]
    else:
        res = approx.approximate(f, w, cfg.p, cfg.eps, rule)
        pairs = [("degree", str(res.polynomial.degree)), ("r", fmt(res.r)),
                 ("dilation_error", fmt(res.dilation_error)), ("tail_bound", fmt(res.certificate.tail_bound)),
                 ("achieved_error", fmt(res.achieved_error))]
    pairs.append(("eps", fmt(cfg.eps)))
    code = EXIT_OK if res.achieved_error <= cfg.eps else EXIT_FAILED
    return pairs, f"degree {res.polynomial.degree}, achieved error {fmt(res.achieved_error)} (eps {fmt(cfg.eps)})", code


def _study(cfg, w):
    f, rule = _need_f(cfg), _rule(cfg)
    if cfg.subcommand == "dilation-study":
        if not cfg.r:
            raise UsageError("dilation-study needs --r")
        return approx.dilation_study(f, w, cfg.p, cfg.space, cfg.r, rule)
    if cfg.subcommand == "degree-study":
        if not cfg.degrees:
            raise UsageError("degree-study needs --degrees")
        return approx.degree_study(f, w, cfg.p, cfg.method, cfg.degrees, rule, r0=cfg.r0)
    phi = jordan.parse_domain(cfg.domain)
    if cfg.degrees:
        # fit sweep at one rho, given as a single --r value
        if len(cfg.r) > 1:
            raise UsageError("a jordan fit sweep takes at most one --r value (rho)")
        rho = cfg.r[0] if cfg.r else 0.99
        return jordan.fit_study(f, w, cfg.p, phi, rho, cfg.degrees, rule)
    if not cfg.r:
        raise UsageError("jordan-study needs --r (rho sweep) or --degrees (fit sweep)")
    return jordan.rho_study(f, w, cfg.p, phi, cfg.r, rule)


HANDLERS = {
    "check-weight": _check_weight,
    "suggest-k": _suggest,
    "norm": _norm,
    "project": _project,
    "approximate": _approximate,
}


def execute(cfg: RunConfig, stdout=None) -> int:
    """Run a configuration; returns the exit code."""
    stdout = stdout or sys.stdout
    w = parse_weight(cfg.weight)
    if cfg.subcommand in STUDIES:
        table = _study(cfg, w)
        text = table.to_csv()
        err = table.column("error_p")
        summary = f"{len(table.rows)} rows; error_p from {fmt(err[0])} to {fmt(err[-1])}"
        code = EXIT_OK
    elif cfg.subcommand in HANDLERS:
        pairs, summary, code = HANDLERS[cfg.subcommand](cfg, w)
        text, table = _kv_csv(pairs), None
    else:
        raise UsageError(f"unknown subcommand {cfg.subcommand!r}")
    if cfg.out:
        out = Path(cfg.out)
        out.write_text(text)
        Path(str(out) + ".run.json").write_text(cfg.to_json())
        print(summary, file=stdout)
        if table is not None:
            from .report import write_companions

            for extra in write_companions(table, out, cfg.subcommand, cfg.gnuplot):
                print(f"wrote {extra}", file=stdout)
    else:
        stdout.write(text)
        print(summary, file=sys.stderr)
    return code


def run(argv=None) -> int:
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
        return execute(cfg)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except Exception as exc:  # one-line diagnostic for every failure
        print(f"bergman-lab: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
