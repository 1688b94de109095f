"""``games-lab`` command-line front end.

Exit codes: 0 success, 1 verification violations, 2 usage or parse error,
3 budget exceeded, 4 unsupported answer arity, 5 non-product question
distribution.
"""

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import games, harness, repetition, strategies
from .exceptions import (
    BudgetExceededError,
    GameFormatError,
    NonProductDistributionError,
    UnsupportedArityError,
    ZeroProbabilityError,
)
from .reporting import format_value, write_csv, write_plot_script

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE, EXIT_BUDGET, EXIT_ARITY, EXIT_NONPRODUCT = 0, 1, 2, 3, 4, 5
SUITES = ("lemma5", "lemma6", "lemma3", "facts", "all")

logger = logging.getLogger("games_lab")


@dataclass
class RunConfig:
    seed: int = 42
    tol: float = 1e-9
    dim: int = 2
    iters: int = 500
    restarts: int = 10
    k: int = 1
    coords: list = field(default_factory=list)
    shots: int = 100_000
    output_path: str = "."

    def validate(self):
        for name in ("dim", "iters", "restarts", "k"):
            if getattr(self, name) < 1:
                raise ValueError(f"--{name} must be a positive integer")
        if self.shots < 0:
            raise ValueError("--shots must be nonnegative")
        if self.tol <= 0:
            raise ValueError("--tol must be positive")
        if any(c < 1 or c > self.k for c in self.coords):
            raise ValueError(f"--coords must lie in 1..{self.k}")


class _UsageError(Exception):
    pass


def _out(text):
    print(text, flush=True)


def _f12(v):
    return format_value(float(v))


def _parse_coords(text):
    text = (text or "").strip()
    if not text:
        return []
    try:
        return sorted({int(t) for t in text.replace(" ", "").split(",") if t})
    except ValueError:
        raise _UsageError(f"--coords expects a comma-separated list of integers, got {text!r}") from None


def _config(args):
    cfg = RunConfig(
        seed=args.seed,
        tol=getattr(args, "tol", 1e-9),
        dim=getattr(args, "dim", 2),
        iters=getattr(args, "iters", 500),
        restarts=getattr(args, "restarts", 10),
        k=getattr(args, "k", 1),
        coords=_parse_coords(getattr(args, "coords", "")),
        shots=getattr(args, "shots", 100_000),
        output_path=args.out_dir,
    )
    try:
        cfg.validate()
    except ValueError as exc:
        raise _UsageError(str(exc)) from None
    return cfg


def cmd_classical(args):
    game = games.load_game(args.game)
    value, s = games.classical_value(game, budget=args.budget)
    _out(f"value {_f12(value)}")
    _out(f"f {' '.join(map(str, s.f))}")
    _out(f"g {' '.join(map(str, s.g))}")
    path = Path(args.out_dir) / "classical.csv"
    write_csv(path, ["value", "f", "g"], [[value, " ".join(map(str, s.f)), " ".join(map(str, s.g))]])
    return EXIT_OK


def cmd_entangled(args):
    cfg = _config(args)
    game = games.load_game(args.game)
    s, rep = strategies.seesaw(
        game, cfg.dim, iters=cfg.iters, restarts=cfg.restarts, rng_seed=cfg.seed,
        ascent_fallback=not args.no_fallback,
    )
    _out(f"value {_f12(rep.final_value)}")
    _out(f"best_restart {rep.best_restart} converged {int(rep.converged)} iterations {len(rep.value_trace)}")
    write_csv(Path(cfg.output_path) / "seesaw.csv", ["iteration", "value"], list(enumerate(rep.value_trace, 1)))
    if args.save_strategy:
        strategies.save_strategy(s, args.save_strategy)
    return EXIT_OK


def _load_strategy(path):
    try:
        return strategies.load_strategy(path)
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise _UsageError(f"cannot load strategy {path!r}: {exc}") from None


def cmd_repetition(args):
    cfg = _config(args)
    game = games.load_game(args.game)
    witness = games.marginals(game)
    if not witness.is_product(game.tol):
        raise NonProductDistributionError("question distribution is not a product distribution", witness.residual)
    s_opt, sw = strategies.seesaw(game, cfg.dim, iters=cfg.iters, restarts=cfg.restarts, rng_seed=cfg.seed)
    omega_star = sw.final_value
    base = _load_strategy(args.strategy) if args.strategy else s_opt
    if base.shape == game.sizes:
        s_k = strategies.product_strategy(base, cfg.k)
    elif base.shape == (game.nx ** cfg.k, game.ny ** cfg.k, game.na ** cfg.k, game.nb ** cfg.k):
        s_k = base
    else:
        raise _UsageError(f"strategy sizes {base.shape} fit neither G nor G^{cfg.k}")
    theta = repetition.build_theta(game, cfg.k, s_k, cfg.coords, budget=args.state_budget)
    summary = [["k", cfg.k], ["C", " ".join(map(str, cfg.coords))], ["omega_star_d", omega_star]]
    try:
        cgs = repetition.condition_success(theta, game, cfg.coords)
    except ZeroProbabilityError:
        cgs = None
        _out("q 0.000000000000")
        summary.append(["q", 0.0])
    if cgs is not None:
        lhs, rhs = repetition.lemma7_budget(cgs, game)
        d_inf, log_inv_q = repetition.lemma3_check(cgs)
        _out(f"q {_f12(cgs.q)}")
        _out(f"budget_lhs {_f12(lhs)} budget_rhs {_f12(rhs)}")
        _out(f"dmin_lhs {_f12(d_inf)} dmin_rhs {_f12(log_inv_q)}")
        summary += [["q", cgs.q], ["budget_lhs", lhs], ["budget_rhs", rhs], ["dmin_lhs", d_inf], ["dmin_rhs", log_inv_q]]
    if cgs is not None and len(cfg.coords) < cfg.k:
        report = repetition.lemma8_scan(
            game, cfg.k, s_k, args.delta1, args.delta2, omega_star=omega_star, rng_seed=cfg.seed,
            shots=cfg.shots or None, initial_C=cfg.coords,
        )
        rows = repetition.report_rows(report.steps)
        summary += [["threshold", report.threshold], ["all_hold", int(report.all_hold)]]
    else:
        rows = [[0, "", 0.0 if cgs is None else cgs.q] + [math.nan] * 8]
    for r in rows:
        _out(" ".join(format_value(v) for v in r))
    out = Path(cfg.output_path)
    write_csv(out / "repetition.csv", repetition.REPORT_COLUMNS, rows)
    write_csv(out / "repetition_summary.csv", ["key", "value"], summary)
    eps = max(1e-6, min(1 - 1e-6, 1 - omega_star))
    write_plot_script(out / "plot_repetition.py", "repetition.csv", eps, game.na, game.nb, len(cfg.coords))
    return EXIT_OK


def _run_suite(name, trials, seed):
    if name == "lemma5":
        return [harness.verify_lemma5(trials=trials, seed=seed)]
    if name == "lemma6":
        return [harness.verify_lemma6(trials=trials, seed=seed, correlated_trials=max(0, trials // 4))]
    if name == "lemma3":
        return [harness.verify_lemma3(trials=trials, seed=seed)]
    return list(harness.verify_facts(trials=trials, seed=seed).values())


def cmd_verify(args):
    if args.trials < 1:
        raise _UsageError("--trials must be a positive integer")
    names = SUITES[:-1] if args.suite == "all" else (args.suite,)
    failed = 0
    for name in names:
        for rep in _run_suite(name, args.trials, args.seed):
            _out(rep.summary())
            write_csv(Path(args.out_dir) / f"verify_{rep.name}.csv", harness.CSV_COLUMNS, rep.rows)
            if not rep.passed and not rep.informational:
                failed += 1
    _out("overall " + ("PASS" if failed == 0 else f"FAIL ({failed} checks with violations)"))
    return EXIT_OK if failed == 0 else EXIT_VIOLATION


def cmd_bound(args):
    try:
        value = repetition.theorem_bound(args.epsilon, args.k, args.na, args.nb)
    except ValueError as exc:
        raise _UsageError(str(exc)) from None
    _out(_f12(value))
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="games-lab", description="Values, repetition experiments and numerical checks for two-player games.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--out-dir", default=".", help="directory for CSV output (default: .)")
        if seed:
            sp.add_argument("--seed", type=int, default=42)

    c = sub.add_parser("classical", help="exact classical value")
    c.add_argument("game", help="built-in name (chsh) or JSON game file")
    c.add_argument("--budget", type=int, default=games.DEFAULT_STRATEGY_BUDGET, help="max deterministic pairs")
    common(c, seed=False)
    c.set_defaults(func=cmd_classical)

    e = sub.add_parser("entangled", help="see-saw lower bound on the entangled value")
    e.add_argument("game")
    e.add_argument("--dim", type=int, default=2)
    e.add_argument("--iters", type=int, default=500)
    e.add_argument("--restarts", type=int, default=10)
    e.add_argument("--no-fallback", action="store_true", help="refuse non-binary answers instead of the ascent heuristic")
    e.add_argument("--save-strategy", help="write the best strategy as JSON")
    common(e)
    e.set_defaults(func=cmd_entangled)

    r = sub.add_parser("repetition", help="conditioned-state pipeline for G^k")
    r.add_argument("game")
    r.add_argument("-k", type=int, default=2)
    r.add_argument("--coords", default="", help="comma-separated 1-based coordinates of the initial C")
    r.add_argument("--dim", type=int, default=2)
    r.add_argument("--iters", type=int, default=500)
    r.add_argument("--restarts", type=int, default=10)
    r.add_argument("--shots", type=int, default=100_000, help="Monte Carlo shots for p4 (0 = exact)")
    r.add_argument("--strategy", help="JSON strategy for G or G^k (default: see-saw at --dim)")
    r.add_argument("--delta1", type=float, default=0.01)
    r.add_argument("--delta2", type=float, default=0.01)
    r.add_argument("--state-budget", type=int, default=repetition.DEFAULT_STATE_BUDGET)
    common(r)
    r.set_defaults(func=cmd_repetition)

    v = sub.add_parser("verify", help="randomised checks of the information-theoretic toolkit")
    v.add_argument("--suite", choices=SUITES, default="all")
    v.add_argument("--trials", type=int, default=200)
    common(v)
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bound", help="closed-form decay bound for G^k")
    b.add_argument("--epsilon", type=float, required=True)
    b.add_argument("-k", type=int, required=True)
    b.add_argument("--na", type=int, default=2)
    b.add_argument("--nb", type=int, default=2)
    b.set_defaults(func=cmd_bound, out_dir=".", seed=42)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (_UsageError, GameFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BudgetExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except UnsupportedArityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARITY
    except NonProductDistributionError as exc:
        print(f"error: {exc}; residual ||mu - mu_X mu_Y||_1 = {exc.residual:.12f}", file=sys.stderr)
        return EXIT_NONPRODUCT


if __name__ == "__main__":
    sys.exit(main())
