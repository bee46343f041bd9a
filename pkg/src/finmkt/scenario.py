"""Scenario files, claim expressions and scenario generators.

A scenario is a JSON document::

    {
      "version": 1,
      "mode": "rational",
      "times": 1,
      "states": [{"id": "u", "prob": "1/2"}, {"id": "d", "prob": "1/2"}],
      "assets": [
        {"name": "bond", "prices": [["1", "1"], ["1", "1"]]},
        {"name": "stock", "prices": [["1", "1"], ["2", "1/2"]]}
      ],
      "numeraire": "bond",
      "signals": [{"name": "y", "reveal_time": 0, "values": ["g", "b"]}],
      "claims": [{"name": "call1", "expr": "max(S stock[T] - 1, 0)"}]
    }

Price grids are time x state.  Numbers are ``"p/q"`` or decimal strings.
"""
from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import BadParams, ParseError, ValidationError
from .market import Claim, Market
from .numeric import FLOAT, RATIONAL, format_number, parse_number
from .probspace import FiniteProbSpace
from .sensitivity import Signal, enlarge

VERSION = 1


@dataclass(eq=False)
class ScenarioFile:
    mode: str
    times: int
    states: list  # [(id, prob)]
    assets: list  # [(name, grid T+1 x n)]
    numeraire: str
    signals: list = field(default_factory=list)  # [(name, reveal_time, values)]
    claims: list = field(default_factory=list)  # [(name, expr)]
    version: int = VERSION

    def space(self) -> FiniteProbSpace:
        ids = tuple(s for s, _ in self.states)
        dtype = object if self.mode == RATIONAL else float
        return FiniteProbSpace(ids, np.array([p for _, p in self.states], dtype=dtype))

    def market(self) -> Market:
        """Market on the scenario (prices rescaled to start at 1), ambient filtration from the signals."""
        space = self.space()
        grid = [[row for row in prices] for _, prices in self.assets]
        prices = np.array(grid, dtype=object if self.mode == RATIONAL else float).transpose(1, 0, 2)
        m = Market([a for a, _ in self.assets], prices, space, numeraire=self.numeraire)
        if self.signals:
            F = enlarge(m.evolution, self.signal_objects())
            m = m.with_ambient(F)
        return m

    def signal_objects(self) -> list[Signal]:
        return [Signal(name, np.array(values, dtype=object), reveal) for name, reveal, values in self.signals]

    def claim(self, name: str, market: Market | None = None) -> Claim:
        exprs = dict(self.claims)
        if name not in exprs:
            raise ValidationError(f"unknown claim {name!r}; known: {sorted(exprs)}")
        market = market or self.market()
        terminal = {a: np.array(grid[self.times], dtype=object if self.mode == RATIONAL else float) for a, grid in self.assets}
        payoff = evaluate_claim(exprs[name], terminal, self.mode)
        return Claim.for_market(market, payoff, name)


# ---------------------------------------------------------------------------
# parsing

def _num(value, mode: str, where: str):
    try:
        if isinstance(value, bool) or not isinstance(value, (str, int, float)):
            raise TypeError
        return parse_number(value, mode)
    except (TypeError, ValueError, ZeroDivisionError):
        raise ValidationError(f"{where}: cannot read number {value!r}") from None


def _require(obj: dict, key: str, kind, where: str):
    if key not in obj:
        raise ValidationError(f"{where}: missing field {key!r}")
    v = obj[key]
    if not isinstance(v, kind) or isinstance(v, bool):
        raise ValidationError(f"{where}: field {key!r} has the wrong type")
    return v


def parse_scenario(text: str) -> ScenarioFile:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None
    if not isinstance(doc, dict):
        raise ValidationError("scenario must be a JSON object")
    version = _require(doc, "version", int, "scenario")
    if version != VERSION:
        raise ValidationError(f"unsupported scenario version {version}")
    mode = doc.get("mode", RATIONAL)
    if mode not in (RATIONAL, FLOAT):
        raise ValidationError(f"mode must be 'rational' or 'float', got {mode!r}")
    T = _require(doc, "times", int, "scenario")
    if T < 0:
        raise ValidationError("times must be nonnegative")
    states = []
    for k, st in enumerate(_require(doc, "states", list, "scenario")):
        where = f"states[{k}]"
        if not isinstance(st, dict):
            raise ValidationError(f"{where}: expected an object")
        sid = _require(st, "id", str, where)
        states.append((sid, _num(st.get("prob"), mode, where + ".prob")))
    if not states:
        raise ValidationError("scenario has no states")
    n = len(states)
    total = sum(p for _, p in states)
    if mode == RATIONAL and total != 1 or mode == FLOAT and abs(total - 1) > 1e-12:
        raise ValidationError(f"state probabilities sum to {format_number(total)}, not 1")
    assets = []
    for k, a in enumerate(_require(doc, "assets", list, "scenario")):
        where = f"assets[{k}]"
        if not isinstance(a, dict):
            raise ValidationError(f"{where}: expected an object")
        name = _require(a, "name", str, where)
        grid = _require(a, "prices", list, where)
        if len(grid) != T + 1:
            raise ValidationError(f"{where} ({name}): {len(grid)} price rows, expected {T + 1}")
        rows = []
        for t, row in enumerate(grid):
            if not isinstance(row, list) or len(row) != n:
                raise ValidationError(f"{where} ({name}): price row {t} must list {n} states")
            vals = [_num(v, mode, f"{where}.prices[{t}][{s}]") for s, v in enumerate(row)]
            for s, v in enumerate(vals):
                if not v > 0:
                    raise ValidationError(f"{where} ({name}): non-positive price {format_number(v)} at t={t}, state {states[s][0]!r}")
            rows.append(vals)
        assets.append((name, rows))
    if not assets:
        raise ValidationError("scenario has no assets")
    numeraire = doc.get("numeraire", assets[0][0])
    if numeraire not in [a for a, _ in assets]:
        raise ValidationError(f"numeraire {numeraire!r} is not an asset")
    signals = []
    for k, sg in enumerate(doc.get("signals", [])):
        where = f"signals[{k}]"
        name = _require(sg, "name", str, where)
        reveal = sg.get("reveal_time", 0)
        if not isinstance(reveal, int) or not 0 <= reveal <= T:
            raise ValidationError(f"{where}: reveal_time must be an integer in [0, {T}]")
        values = _require(sg, "values", list, where)
        flat = values if values and not isinstance(values[0], list) else None
        if flat is not None:
            if len(flat) != n:
                raise ValidationError(f"{where}: {len(flat)} values, expected {n}")
        elif len(values) != T + 1 or any(not isinstance(r, list) or len(r) != n for r in values):
            raise ValidationError(f"{where}: values must be {n} labels or a {T + 1} x {n} grid")
        for v in itertools.chain.from_iterable(values if flat is None else [flat]):
            if not isinstance(v, (str, int)) or isinstance(v, bool):
                raise ValidationError(f"{where}: signal values must be strings or integers")
        signals.append((name, reveal, values))
    claims = []
    for k, c in enumerate(doc.get("claims", [])):
        where = f"claims[{k}]"
        claims.append((_require(c, "name", str, where), _require(c, "expr", str, where)))
    scen = ScenarioFile(mode, T, states, assets, numeraire, signals, claims, version)
    # validate the market, the filtrations and every claim now
    market = scen.market()
    for name, _ in claims:
        scen.claim(name, market)
    return scen


def load_scenario(path) -> ScenarioFile:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def emit_scenario(scen: ScenarioFile) -> str:
    """Canonical JSON text; ``parse_scenario(emit_scenario(s))`` re-emits identically."""
    d = lambda v: json.dumps(v, ensure_ascii=False)  # noqa: E731
    row = lambda r: "[" + ", ".join(d(format_number(v)) for v in r) + "]"  # noqa: E731
    lines = ["{", f'  "version": {scen.version},', f'  "mode": {d(scen.mode)},', f'  "times": {scen.times},']
    states = ",\n".join(f'    {{"id": {d(sid)}, "prob": {d(format_number(p))}}}' for sid, p in scen.states)
    lines.append('  "states": [\n' + states + "\n  ],")
    assets = []
    for name, grid in scen.assets:
        rows = ",\n".join("        " + row(r) for r in grid)
        assets.append(f'    {{"name": {d(name)}, "prices": [\n{rows}\n    ]}}')
    lines.append('  "assets": [\n' + ",\n".join(assets) + "\n  ],")
    tail = [f'  "numeraire": {d(scen.numeraire)}']
    if scen.signals:
        sigs = ",\n".join(
            f'    {{"name": {d(n)}, "reveal_time": {r}, "values": {d(v)}}}' for n, r, v in scen.signals
        )
        tail.append('  "signals": [\n' + sigs + "\n  ]")
    if scen.claims:
        cl = ",\n".join(f'    {{"name": {d(n)}, "expr": {d(e)}}}' for n, e in scen.claims)
        tail.append('  "claims": [\n' + cl + "\n  ]")
    lines.append(",\n".join(tail))
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# claim expressions

_TOKEN = re.compile(r"\s*(?:(\d+(?:\.\d*)?|\.\d+)|([A-Za-z_][A-Za-z0-9_]*)|(\[T\])|([-+*/(),]))")


def _tokenize(expr: str) -> list[tuple[str, str, int]]:
    out = []
    pos = 0
    while pos < len(expr):
        if expr[pos:].strip() == "":
            break
        m = _TOKEN.match(expr, pos)
        if not m:
            col = pos + len(expr[pos:]) - len(expr[pos:].lstrip()) + 1
            raise ParseError(f"unexpected character {expr[col - 1]!r} in claim", 1, col)
        start = m.start(m.lastindex)
        kind = ("num", "name", "horizon", "op")[m.lastindex - 1]
        out.append((kind, m.group(m.lastindex), start + 1))
        pos = m.end()
    out.append(("end", "", len(expr) + 1))
    return out


class _ClaimParser:
    def __init__(self, expr: str, terminal: dict, mode: str):
        self.toks = _tokenize(expr)
        self.i = 0
        self.terminal = terminal
        self.mode = mode

    def peek(self):
        return self.toks[self.i]

    def take(self, value=None, kind=None):
        tok = self.toks[self.i]
        if (value is not None and tok[1] != value) or (kind is not None and tok[0] != kind):
            want = value or kind
            shown = tok[1] or "end of expression"
            raise ParseError(f"expected {want!r}, found {shown!r}", 1, tok[2])
        self.i += 1
        return tok

    def parse(self):
        v = self.expr()
        self.take(kind="end")
        return v

    def expr(self):
        v = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            w = self.term()
            v = v + w if op == "+" else v - w
        return v

    def term(self):
        v = self.factor()
        while self.peek()[1] in ("*", "/"):
            _, op, col = self.take()
            w = self.factor()
            if op == "*":
                v = v * w
            else:
                if any(x == 0 for x in np.ravel(w)):
                    raise ParseError("division by zero in claim", 1, col)
                v = v / w
        return v

    def factor(self):
        kind, text, col = self.peek()
        if kind == "num":
            self.take()
            return parse_number(text, self.mode)
        if kind == "name" and text in ("max", "min"):
            self.take()
            self.take("(")
            a = self.expr()
            self.take(",")
            b = self.expr()
            self.take(")")
            a, b = np.broadcast_arrays(np.asarray(a, dtype=object), np.asarray(b, dtype=object))
            pick = max if text == "max" else min
            return np.array([pick(x, y) for x, y in zip(a.ravel(), b.ravel())], dtype=object).reshape(a.shape)
        if kind == "name" and text == "S":
            self.take()
            name_tok = self.take(kind="name")
            self.take(kind="horizon")
            if name_tok[1] not in self.terminal:
                raise ParseError(f"unknown asset {name_tok[1]!r} in claim", 1, name_tok[2])
            return self.terminal[name_tok[1]]
        if text == "(":
            self.take()
            v = self.expr()
            self.take(")")
            return v
        raise ParseError(f"unexpected {text or 'end of expression'!r} in claim", 1, col)


def evaluate_claim(expr: str, terminal: dict, mode: str = RATIONAL) -> np.ndarray:
    """Payoff per state of a claim expression over terminal prices (original units)."""
    n = len(next(iter(terminal.values())))
    v = _ClaimParser(expr, terminal, mode).parse()
    out = np.empty(n, dtype=object if mode == RATIONAL else float)
    out[:] = np.broadcast_to(np.asarray(v, dtype=object), (n,))
    for s, x in enumerate(out):
        if x < 0:
            raise ValidationError(f"claim {expr!r} is negative ({format_number(x)}) in state {s}")
    return out


# ---------------------------------------------------------------------------
# generators

def _q(x, name: str) -> Fraction:
    try:
        return parse_number(x if not isinstance(x, float) else repr(x), RATIONAL)
    except (TypeError, ValueError, ZeroDivisionError):
        raise BadParams(f"{name}: cannot read {x!r}") from None


def generate_crr(periods=1, u="2", d="1/2", r="0", p="1/2", mode=RATIONAL, no_arbitrage=False) -> ScenarioFile:
    """Recombining-price binomial tree over all ``2**periods`` paths (states ``'ud...'``)."""
    n = int(periods)
    if not 1 <= n <= 12:
        raise BadParams("periods must be between 1 and 12")
    u, d, r, p = _q(u, "u"), _q(d, "d"), _q(r, "r"), _q(p, "p")
    if u <= 0 or d <= 0:
        raise BadParams("u and d must be positive")
    if r <= -1:
        raise BadParams("r must exceed -1")
    if not 0 < p < 1:
        raise BadParams("p must lie strictly between 0 and 1")
    if no_arbitrage and not d < 1 + r < u:
        raise BadParams("arbitrage-free tree needs d < 1 + r < u")
    paths = ["".join(s) for s in itertools.product("ud", repeat=n)]
    probs = [p ** path.count("u") * (1 - p) ** path.count("d") for path in paths]
    bond = [[(1 + r) ** t] * len(paths) for t in range(n + 1)]
    stock = [[u ** path[:t].count("u") * d ** path[:t].count("d") for path in paths] for t in range(n + 1)]
    scen = ScenarioFile(
        RATIONAL, n, list(zip(paths, probs)), [("bond", bond), ("stock", stock)], "bond",
        claims=[("call1", "max(S stock[T] - 1, 0)")],
    )
    return _as_mode(scen, mode)


def generate_trinomial(periods=1, u="2", m="1", d="1/2", r="0", pu="1/3", pm="1/3", mode=RATIONAL) -> ScenarioFile:
    n = int(periods)
    if not 1 <= n <= 7:
        raise BadParams("periods must be between 1 and 7")
    u, mid, d, r = _q(u, "u"), _q(m, "m"), _q(d, "d"), _q(r, "r")
    pu, pm = _q(pu, "pu"), _q(pm, "pm")
    pd = 1 - pu - pm
    if min(u, mid, d) <= 0 or len({u, mid, d}) < 3:
        raise BadParams("u, m, d must be distinct and positive")
    if r <= -1:
        raise BadParams("r must exceed -1")
    if min(pu, pm, pd) <= 0:
        raise BadParams("branch probabilities must be positive and sum to less than 1")
    moves = {"u": (u, pu), "m": (mid, pm), "d": (d, pd)}
    paths = ["".join(s) for s in itertools.product("umd", repeat=n)]
    probs = []
    for path in paths:
        w = Fraction(1)
        for c in path:
            w *= moves[c][1]
        probs.append(w)

    def level(path, t):
        v = Fraction(1)
        for c in path[:t]:
            v *= moves[c][0]
        return v

    bond = [[(1 + r) ** t] * len(paths) for t in range(n + 1)]
    stock = [[level(path, t) for path in paths] for t in range(n + 1)]
    scen = ScenarioFile(
        RATIONAL, n, list(zip(paths, probs)), [("bond", bond), ("stock", stock)], "bond",
        claims=[("call1", "max(S stock[T] - 1, 0)")],
    )
    return _as_mode(scen, mode)


def generate_insider(accuracy="4/5", u="2", d="1/2", r="0", mode=RATIONAL) -> ScenarioFile:
    """One-period binomial plus a time-0 signal: ``P(up | g) = P(down | b) = accuracy``."""
    q = _q(accuracy, "accuracy")
    if not 0 < q < 1:
        raise BadParams("accuracy must lie strictly between 0 and 1")
    u, d, r = _q(u, "u"), _q(d, "d"), _q(r, "r")
    if u <= 0 or d <= 0 or r <= -1:
        raise BadParams("u, d must be positive and r > -1")
    half = Fraction(1, 2)
    states = [("ug", q * half), ("dg", (1 - q) * half), ("ub", (1 - q) * half), ("db", q * half)]
    bond = [[1] * 4, [1 + r] * 4]
    stock = [[1] * 4, [u, d, u, d]]
    scen = ScenarioFile(
        RATIONAL, 1, states,
        [("bond", [[Fraction(v) for v in row] for row in bond]), ("stock", [[Fraction(v) for v in row] for row in stock])],
        "bond",
        signals=[("signal", 0, ["g", "g", "b", "b"])],
        claims=[("call1", "max(S stock[T] - 1, 0)")],
    )
    return _as_mode(scen, mode)


def _as_mode(scen: ScenarioFile, mode: str) -> ScenarioFile:
    if mode == RATIONAL:
        return scen
    if mode != FLOAT:
        raise BadParams(f"unknown mode {mode!r}")
    scen.mode = FLOAT
    scen.states = [(s, float(p)) for s, p in scen.states]
    scen.assets = [(a, [[float(v) for v in row] for row in grid]) for a, grid in scen.assets]
    return scen


GENERATORS = {"crr": generate_crr, "trinomial": generate_trinomial, "insider": generate_insider}


def generate(kind: str, **params) -> ScenarioFile:
    if kind not in GENERATORS:
        raise BadParams(f"unknown generator {kind!r}; choose from {sorted(GENERATORS)}")
    try:
        return GENERATORS[kind](**params)
    except TypeError as exc:
        raise BadParams(str(exc)) from None
