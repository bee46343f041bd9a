"""Command-line front end: ``finmkt COMMAND SCENARIO [options]``."""
from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

import numpy as np

from . import gop as gopmod
from .errors import FinMktError, UnknownCommand, ValidationError
from .market import Market, discount, normalize, random_strategy, strategy_from_units, value_process
from .noarb import (
    EMPTY,
    find_arbitrage,
    find_dominating,
    find_emms,
    is_complete,
)
from .numeric import format_number
from .probspace import Filtration, partition_from_labels
from .scenario import ScenarioFile, emit_scenario, generate, load_scenario
from .sensitivity import efficiency_check, sdf_compatibility, sensitivity_report

COLLAPSE_NOTE = (
    "finite horizon: U = M = L for martingale measures and NA = ND = NWA coincide with EMM existence"
)
COMMANDS = ("check", "emm", "gop", "price", "sensitivity", "hypothesis", "generate")


def _n(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (Fraction, int, float, np.integer, np.floating)):
        return format_number(x if not isinstance(x, np.floating) else float(x))
    return x


def _block(F: Filtration, t: int, b: int, market: Market) -> list[str]:
    return [market.space.atoms[s] for s in F.blocks(t)[b]]


def _states(block, market: Market) -> list[str]:
    return [market.space.atoms[s] for s in block]


def _measure(Q, market: Market) -> dict | None:
    if Q is None:
        return None
    return {a: _n(w) for a, w in zip(market.space.atoms, Q.weights)}


# ---------------------------------------------------------------------------
# report builders

def _sensitivity_dict(market: Market) -> dict:
    rep = sensitivity_report(market)
    out = {
        "sensitive": rep.sensitive,
        "test_terminal_atoms": rep.sensitive,
        "test_information_blocks": rep.enlarged_side,
        "identity_Et_eq_Ft_meet_Einf": rep.identity_holds,
        "identity_note": "necessary condition only",
    }
    if rep.witness_ii is not None:
        t, atom, block, pf, pe = rep.witness_ii
        out["witness"] = {
            "t": t,
            "price_event": _states(atom, market),
            "information_block": _states(block, market),
            "prob_given_information": _n(pf),
            "prob_given_prices": _n(pe),
        }
    if rep.identity_witness is not None:
        out["identity_fails_at_t"] = rep.identity_witness
    return out


def report_check(market: Market) -> dict:
    F = market.ambient
    emms = find_emms(market, F)
    arb = find_arbitrage(market, F)
    dominated = [a for a in market.assets if find_dominating(market, a, F) is not None]
    out = {
        "command": "check",
        "numeraire": market.assets[market.numeraire],
        "note": COLLAPSE_NOTE,
        "emm": {"status": emms.status, "representative": _measure(emms.representative, market)},
        "NA": arb is None,
        "ND": not dominated,
        "NWA": arb is None and not dominated,
        "dominated_assets": dominated,
    }
    bad = emms.failing_node()
    if bad is not None:
        out["emm"]["failing_node"] = {"t": bad.t, "states": _states(bad.states, market)}
    comp = is_complete(market, market.evolution, F, emms.representative)
    out["complete"] = {
        "complete": comp.complete,
        "spans": comp.spans,
        "immersed_under_emm": comp.immersed,
    }
    if comp.failing_node is not None:
        t, b = comp.failing_node
        out["complete"]["failing_node"] = {"t": t, "states": _block(market.evolution, t, b, market)}
    out["sensitivity"] = _sensitivity_dict(market)
    eff = efficiency_check(market, F)
    out["efficient"] = eff.efficient
    out["efficiency_numeraire_invariant"] = eff.numeraire_invariant
    return out


def report_emm(market: Market) -> dict:
    emms = find_emms(market)
    nodes = []
    for nd in emms.nodes:
        nodes.append(
            {
                "t": nd.t,
                "states": _states(nd.states, market),
                "status": nd.status,
                "absolutely_continuous": nd.absolutely_continuous,
                "max_min_weight": _n(nd.max_min_weight) if nd.max_min_weight is not None else None,
                "rank": nd.rank,
                "children": nd.n_children,
                "transition": [_n(v) for v in nd.representative] if nd.representative else None,
                "vertices": [[_n(v) for v in vert] for vert in nd.vertices],
            }
        )
    return {
        "command": "emm",
        "numeraire": market.assets[market.numeraire],
        "note": COLLAPSE_NOTE,
        "status": emms.status,
        "representative": _measure(emms.representative, market),
        "nodes": nodes,
    }


def report_gop(market: Market) -> dict:
    g = gopmod.compute_gop(market, market.evolution)
    nodes = []
    for ng in g.nodes:
        nodes.append(
            {
                "t": ng.t,
                "states": _block(market.evolution, ng.t, ng.block, market),
                "fractions": {a: _n(f) for a, f in zip(market.assets, ng.fractions)},
                "growth": _n(float(ng.growth)),
                "foc_residual": _n(float(ng.residual)),
                "exact": ng.exact,
                "redundant": ng.redundant,
            }
        )
    W = g.W
    return {
        "command": "gop",
        "numeraire": market.assets[market.numeraire],
        "exact": g.exact,
        "nodes": nodes,
        "wealth": {a: [_n(W[t, s]) for t in range(market.T + 1)] for s, a in enumerate(market.space.atoms)},
    }


def report_price(market: Market, scen: ScenarioFile, claim_name: str, t: int) -> dict:
    if not 0 <= t <= market.T:
        raise ValidationError(f"--t must lie in [0, {market.T}]")
    claim = scen.claim(claim_name, market)
    F = market.ambient
    g = gopmod.compute_gop(market, market.evolution)
    rw = gopmod.real_world_value(claim, market, g, filtration=F, cross_check=False).nominal
    emms = find_emms(market, F)
    tol = market.tol if market.tol else 0
    out = {
        "command": "price",
        "claim": claim_name,
        "t": t,
        "emm_status": emms.status,
    }
    rn = None
    if emms.representative is not None:
        rn = gopmod.risk_neutral_value(claim, market, emms.representative, F).nominal
    rows = []
    all_equal = True
    for b, block in enumerate(F.blocks(t)):
        s = block[0]
        row = {"states": _states(block, market), "real_world": _n(rw[t, s])}
        if rn is not None:
            eq = abs(rn[t, s] - rw[t, s]) <= tol
            all_equal = all_equal and eq
            row["risk_neutral"] = _n(rn[t, s])
            row["equal"] = bool(eq)
        rows.append(row)
    out["values"] = rows
    out["equal"] = bool(rn is not None and all_equal)
    if emms.status == "multiple":
        out["note"] = "martingale measure not unique; risk-neutral column uses the representative measure"
    return out


def report_sensitivity(market: Market) -> dict:
    out = {"command": "sensitivity"}
    out.update(_sensitivity_dict(market))
    eff = efficiency_check(market)
    out["emm_exists"] = eff.emm_exists
    out["efficient"] = eff.efficient
    if eff.emm_exists:
        sdf = sdf_compatibility(market)
        out["sdf_downward"] = sdf.downward
        out["sdf_upward"] = sdf.upward
        if sdf.upward_failures:
            w = sdf.upward_failures[0]
            out["sdf_upward_witness"] = {
                "asset": w.asset,
                "t": w.t,
                "horizon": w.u,
                "states": _block(market.ambient, w.t, w.block, market),
                "price": _n(w.price),
                "discounted_mean": _n(w.value),
            }
    return out


def _constant_mix(market: Market, weights: dict) -> "object":
    """Rebalance to fixed wealth fractions each period (numéraire takes the rest)."""
    P = discount(market)
    E = market.evolution
    n, N1 = market.space.n, market.n_assets
    exact = market.exact
    dtype = object if exact else float
    V = np.full(n, Fraction(1) if exact else 1.0, dtype=dtype)
    units = [None]
    for t in range(1, market.T + 1):
        u = np.zeros((N1, n), dtype=dtype)
        if exact:
            u[...] = Fraction(0)
        for name, f in weights.items():
            i = market.asset_index(name)
            u[i] = V * f / P[t - 1, i]
        units.append(u)
        gain = sum(u[i] * (P[t, i] - P[t - 1, i]) for i in range(N1) if i != market.numeraire)
        V = V + gain
    return strategy_from_units(market, E, units, initial_value=1)


def _parse_strategy(spec: str, market: Market, rng):
    if spec == "random":
        return random_strategy(market, market.evolution, rng)
    if spec.startswith("hold:"):
        name = spec[5:]
        i = market.asset_index(name)
        return _constant_mix(market, {name: Fraction(1)}) if i != market.numeraire else _constant_mix(market, {})
    if spec.startswith("mix:"):
        weights = {}
        for part in spec[4:].split(","):
            if "=" not in part:
                raise ValidationError(f"mix entries look like NAME=FRACTION, got {part!r}")
            name, frac = part.split("=", 1)
            market.asset_index(name)
            weights[name] = Fraction(frac) if market.exact else float(Fraction(frac))
        weights.pop(market.assets[market.numeraire], None)
        return _constant_mix(market, weights)
    if spec == "gop":
        return gopmod.compute_gop(market, market.evolution).strategy
    raise ValidationError(f"unknown strategy {spec!r} (use hold:NAME, mix:NAME=F,..., random or gop)")


def _parse_partition(spec: str, market: Market, rng) -> list:
    F = market.ambient
    if spec == "F":
        return list(F.partitions)
    if spec == "E":
        return list(market.evolution.partitions)
    if spec == "trivial":
        return [(tuple(range(market.space.n)),)] * (market.T + 1)
    if spec == "random":
        parts = []
        for t in range(market.T + 1):
            blocks = F.blocks(t)
            tags = [int(rng.integers(0, max(1, len(blocks)))) for _ in blocks]
            labels = [0] * market.space.n
            for tag, block in zip(tags, blocks):
                for s in block:
                    labels[s] = tag
            parts.append(partition_from_labels(labels))
        return parts
    raise ValidationError(f"unknown partition {spec!r} (use F, E, trivial or random)")


def report_hypothesis(market: Market, strategy: str, partition: str, seed: int) -> dict:
    rng = np.random.default_rng(seed)
    h = gopmod.martingale_hypothesis_check(market, market.ambient)
    H = normalize(_parse_strategy(strategy, market, rng), market)
    V = value_process(H, market).values
    parts = _parse_partition(partition, market, rng)
    tol = h.gop.tol if market.tol == 0 else market.tol
    stats = gopmod.ratio_stats(V / h.gop.W, parts, market.space, tol)
    out = {
        "command": "hypothesis",
        "verdict": h.verdict,
        "complete": h.complete,
        "density_equals_inverse_wealth": h.density_matches,
        "pricing_kernel_identity": h.pricing_kernel_holds,
        "assets": {a: c.kind for a, c in h.classifications.items()},
        "witnesses": [
            {
                "asset": w.asset,
                "t": w.t,
                "states": _block(market.ambient, w.t, w.block, market),
                "benchmarked_price": _n(w.current),
                "conditional_mean": _n(w.conditional_mean),
            }
            for w in h.witnesses
        ],
        "strategy": strategy,
        "partition": partition,
        "statistics_ok": all(s.ok for s in stats),
        "statistics": [
            {
                "t": s.t,
                "states": _states(parts[s.t][s.block], market),
                "mean_excess": _n(s.mean_excess),
                "mean_log": _n(s.mean_log),
                "ok": s.ok,
            }
            for s in stats
        ],
    }
    return out


def _negative(report: dict) -> bool:
    cmd = report.get("command")
    if cmd == "check":
        return not report["efficient"]
    if cmd == "emm":
        return report["status"] == EMPTY
    if cmd == "price":
        return not report["equal"]
    if cmd == "sensitivity":
        return not report["efficient"]
    if cmd == "hypothesis":
        return report["verdict"] != "sensitive-and-complete-consistent" or not report["statistics_ok"]
    return False


# ---------------------------------------------------------------------------
# output

def render_text(obj, indent: int = 0) -> str:
    pad = "  " * indent
    lines = []
    if isinstance(obj, dict):
        for k, v in obj.items():
            if isinstance(v, (dict, list)) and v:
                lines.append(f"{pad}{k}:")
                lines.append(render_text(v, indent + 1))
            else:
                lines.append(f"{pad}{k}: {_scalar(v)}")
    elif isinstance(obj, list):
        for v in obj:
            if isinstance(v, dict):
                lines.append(f"{pad}-")
                lines.append(render_text(v, indent + 1))
            else:
                lines.append(f"{pad}- {_scalar(v)}")
    else:
        lines.append(pad + _scalar(obj))
    return "\n".join(lines)


def _scalar(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, list):
        return "[" + ", ".join(_scalar(x) for x in v) + "]"
    if isinstance(v, dict):
        return "{}"
    return str(v)


def emit(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, indent=2, ensure_ascii=False) + "\n"
    return render_text(report) + "\n"


# ---------------------------------------------------------------------------
# entry point

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="finmkt", description="Finite-state market analysis.")
    sub = ap.add_subparsers(dest="command")

    def common(p):
        p.add_argument("scenario", help="scenario JSON file")
        p.add_argument("--format", choices=("text", "json"), default="text")
        p.add_argument("--tol", type=float, default=None, help="comparison tolerance (default: 0 rational, 1e-9 float)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--numeraire", default=None, help="asset name to use as numéraire")
        p.add_argument("--strict", action="store_true", help="exit with status 2 on a negative verdict")
        return p

    for name in ("check", "emm", "gop", "sensitivity"):
        common(sub.add_parser(name))
    p = common(sub.add_parser("price"))
    p.add_argument("--claim", required=True)
    p.add_argument("--t", type=int, default=0)
    p = common(sub.add_parser("hypothesis"))
    p.add_argument("--strategy", default="random", help="hold:NAME | mix:NAME=F,... | random | gop")
    p.add_argument("--partition", default="F", help="F | E | trivial | random")

    g = sub.add_parser("generate")
    g.add_argument("kind", help="crr | trinomial | insider")
    g.add_argument("--periods", type=int)
    for opt in ("u", "m", "d", "r", "p", "pu", "pm", "accuracy"):
        g.add_argument(f"--{opt}")
    g.add_argument("--mode", choices=("rational", "float"), default="rational")
    g.add_argument("--no-arbitrage", action="store_true", help="crr: require d < 1 + r < u")
    g.add_argument("--out", default=None, help="write to a file instead of stdout")
    return ap


def run(argv: list[str]) -> tuple[int, str]:
    """Run a command; returns (exit status, output text)."""
    if argv and not argv[0].startswith("-") and argv[0] not in COMMANDS:
        raise UnknownCommand(f"unknown command {argv[0]!r}; choose from {', '.join(COMMANDS)}")
    args = build_parser().parse_args(argv)
    if args.command is None:
        raise UnknownCommand("no command given")
    if args.command == "generate":
        params = {k: v for k, v in vars(args).items() if k in ("periods", "u", "m", "d", "r", "p", "pu", "pm", "accuracy") and v is not None}
        params["mode"] = args.mode
        if args.no_arbitrage:
            params["no_arbitrage"] = True
        text = emit_scenario(generate(args.kind, **params))
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
            return 0, ""
        return 0, text
    scen = load_scenario(args.scenario)
    market = scen.market()
    if args.numeraire:
        market = market.with_numeraire(args.numeraire)
    if args.tol is not None:
        market = market.with_tol(args.tol)
    if args.command == "check":
        report = report_check(market)
    elif args.command == "emm":
        report = report_emm(market)
    elif args.command == "gop":
        report = report_gop(market)
    elif args.command == "price":
        report = report_price(market, scen, args.claim, args.t)
    elif args.command == "sensitivity":
        report = report_sensitivity(market)
    else:
        report = report_hypothesis(market, args.strategy, args.partition, args.seed)
    status = 2 if args.strict and _negative(report) else 0
    return status, emit(report, args.format)


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        status, text = run(argv)
    except FinMktError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
