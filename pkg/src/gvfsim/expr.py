"""Path expression language.

A small recursive-descent parser for scalar expressions over the runtime
variables ``x, y, z, w`` and named parameters, plus a second-order
forward-mode differentiator built on hyper-dual numbers
``a + b e1 + c e2 + d e1 e2`` with ``e1**2 = e2**2 = 0``.

Grammar (lowest to highest precedence)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := ("-" | "+") unary | power
    power  := atom ("^" INTEGER)*
    atom   := NUMBER | NAME | FUNC "(" expr ")" | "(" expr ")"

``FUNC`` is one of sin, cos, tan, exp, ln, sqrt. ``pi`` is a predefined
constant unless it is declared as a symbol.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import DomainError, ExprError, ParseError

RUNTIME_VARIABLES = frozenset({"x", "y", "z", "w"})
FUNCTIONS = ("sin", "cos", "tan", "exp", "ln", "sqrt")


@dataclass(frozen=True)
class Const:
    value: float
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Var:
    name: str
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Param:
    name: str
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Unary:
    op: str  # "neg" or a FUNCTIONS entry
    arg: "Node"
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Binary:
    op: str  # one of + - * /
    left: "Node"
    right: "Node"
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: int
    pos: int = field(default=0, compare=False)


Node = Union[Const, Var, Param, Unary, Binary, Pow]


# --------------------------------------------------------------------------
# tokenizer / parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(src: str) -> list[tuple[str, str, int]]:
    tokens = []
    i = 0
    n = len(src)
    while i < n:
        if src[i].isspace():
            i += 1
            continue
        m = _TOKEN.match(src, i)
        if m is None or m.end() == i:
            raise ParseError(f"unexpected character {src[i]!r}", i)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        i = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, src: str, variables: frozenset[str], parameters: frozenset[str]):
        self.src = src
        self.tokens = _tokenize(src)
        self.i = 0
        self.variables = variables
        self.parameters = parameters

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str):
        kind, val, pos = self.take()
        if val != text or kind != "op":
            found = "end of input" if kind == "end" else repr(val)
            raise ParseError(f"expected {text!r}, found {found}", pos)

    def parse(self) -> Node:
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {val!r}", pos)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            _, op, pos = self.take()
            node = Binary(op, node, self.term(), pos)
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            _, op, pos = self.take()
            node = Binary(op, node, self.unary(), pos)
        return node

    def unary(self) -> Node:
        kind, val, pos = self.peek()
        if kind == "op" and val == "-":
            self.take()
            return Unary("neg", self.unary(), pos)
        if kind == "op" and val == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        node = self.atom()
        while self.peek()[0] == "op" and self.peek()[1] == "^":
            _, _, pos = self.take()
            kind, val, epos = self.take()
            if kind != "num" or not val.isdigit():
                shown = "end of input" if kind == "end" else repr(val)
                raise ParseError(
                    f"exponent must be a nonnegative integer literal, found {shown}", epos
                )
            node = Pow(node, int(val), pos)
        return node

    def atom(self) -> Node:
        kind, val, pos = self.take()
        if kind == "num":
            return Const(float(val), pos)
        if kind == "name":
            if val in FUNCTIONS and self.peek()[1] == "(":
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Unary(val, arg, pos)
            if val in self.variables:
                return Var(val, pos)
            if val in self.parameters:
                return Param(val, pos)
            if val == "pi":
                return Const(math.pi, pos)
            raise ParseError(f"undeclared identifier {val!r}", pos)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(val)
        raise ParseError(f"expected a number, name or '(', found {found}", pos)


def parse_expression(
    src: str,
    symbols: Iterable[str],
    variables: Iterable[str] = RUNTIME_VARIABLES,
) -> Node:
    """Parse ``src``; declared names in ``variables`` become Var nodes, the rest Param nodes."""
    if not src or not src.strip():
        raise ParseError("empty expression", 0)
    symbols = frozenset(symbols)
    for name in symbols:
        if name in FUNCTIONS:
            raise ParseError(f"symbol {name!r} shadows a function name")
    runtime = symbols & frozenset(variables)
    return _Parser(src, runtime, symbols - runtime).parse()


def to_text(node: Node) -> str:
    """Canonical, fully parenthesized text that parses back to an equal tree."""
    if isinstance(node, Const):
        text = repr(float(node.value))
        return f"({text})" if node.value < 0 or text.startswith("-") else text
    if isinstance(node, (Var, Param)):
        return node.name
    if isinstance(node, Unary):
        if node.op == "neg":
            return f"(-{to_text(node.arg)})"
        return f"{node.op}({to_text(node.arg)})"
    if isinstance(node, Binary):
        return f"({to_text(node.left)}{node.op}{to_text(node.right)})"
    if isinstance(node, Pow):
        return f"({to_text(node.base)}^{node.exponent})"
    raise TypeError(f"not an expression node: {node!r}")


def symbols_of(node: Node) -> set[str]:
    if isinstance(node, (Var, Param)):
        return {node.name}
    if isinstance(node, Unary):
        return symbols_of(node.arg)
    if isinstance(node, Binary):
        return symbols_of(node.left) | symbols_of(node.right)
    if isinstance(node, Pow):
        return symbols_of(node.base)
    return set()


def bind_parameters(node: Node, params: Mapping[str, float]) -> Node:
    """Replace Param nodes by constants."""
    if isinstance(node, Param):
        if node.name not in params:
            raise ExprError(f"parameter {node.name!r} has no value", node.pos)
        return Const(float(params[node.name]), node.pos)
    if isinstance(node, Unary):
        return Unary(node.op, bind_parameters(node.arg, params), node.pos)
    if isinstance(node, Binary):
        return Binary(
            node.op, bind_parameters(node.left, params), bind_parameters(node.right, params), node.pos
        )
    if isinstance(node, Pow):
        return Pow(bind_parameters(node.base, params), node.exponent, node.pos)
    return node


# --------------------------------------------------------------------------
# hyper-dual arithmetic


@dataclass(frozen=True)
class Dual2:
    """Value with two first-order directions and their mixed second-order part.

    ``d1`` and ``d2`` are derivatives along the two seed directions and ``d12``
    the mixed second derivative. Seeding both directions on the same variable
    makes ``d12`` the pure second derivative. Components may be numpy arrays.
    """

    value: float
    d1: float = 0.0
    d2: float = 0.0
    d12: float = 0.0

    def __add__(self, o: "Dual2") -> "Dual2":
        return Dual2(self.value + o.value, self.d1 + o.d1, self.d2 + o.d2, self.d12 + o.d12)

    def __sub__(self, o: "Dual2") -> "Dual2":
        return Dual2(self.value - o.value, self.d1 - o.d1, self.d2 - o.d2, self.d12 - o.d12)

    def __neg__(self) -> "Dual2":
        return Dual2(-self.value, -self.d1, -self.d2, -self.d12)

    def __mul__(self, o: "Dual2") -> "Dual2":
        a, b = self, o
        return Dual2(
            a.value * b.value,
            a.d1 * b.value + a.value * b.d1,
            a.d2 * b.value + a.value * b.d2,
            a.d12 * b.value + a.d1 * b.d2 + a.d2 * b.d1 + a.value * b.d12,
        )

    def chain(self, f0, f1, f2) -> "Dual2":
        """Apply a scalar function given its value and first two derivatives at ``value``."""
        return Dual2(f0, f1 * self.d1, f1 * self.d2, f1 * self.d12 + f2 * self.d1 * self.d2)

    def __truediv__(self, o: "Dual2") -> "Dual2":
        inv = 1.0 / _ieee(o.value)
        inv2 = inv * inv
        return self * o.chain(inv, -inv2, 2.0 * inv2 * inv)

    def ipow(self, n: int) -> "Dual2":
        if n == 0:
            return Dual2(np.ones_like(self.value) if np.ndim(self.value) else 1.0)
        if n == 1:
            return self
        v = _ieee(self.value)
        return self.chain(v**n, n * v ** (n - 1), n * (n - 1) * v ** (n - 2))


def _ieee(v):
    # numpy scalars overflow to inf / underflow to 0 where Python floats would raise
    return np.float64(v) if isinstance(v, (int, float)) else v


def _fail(cond, message: str, node: Node):
    if np.any(cond):
        raise DomainError(message, node.pos)


def _apply(op: str, a: Dual2, node: Node) -> Dual2:
    v = _ieee(a.value)
    if op == "neg":
        return -a
    if op == "sin":
        s, c = np.sin(v), np.cos(v)
        return a.chain(s, c, -s)
    if op == "cos":
        s, c = np.sin(v), np.cos(v)
        return a.chain(c, -s, -c)
    if op == "tan":
        c = np.cos(v)
        _fail(c == 0.0, "tan of an odd multiple of pi/2", node)
        t = np.tan(v)
        sec2 = 1.0 + t * t
        return a.chain(t, sec2, 2.0 * t * sec2)
    if op == "exp":
        e = np.exp(v)
        return a.chain(e, e, e)
    if op == "ln":
        _fail(np.asarray(v) <= 0.0, "ln of a nonpositive value", node)
        inv = 1.0 / v
        return a.chain(np.log(v), inv, -inv * inv)
    if op == "sqrt":
        _fail(np.asarray(v) < 0.0, "sqrt of a negative value", node)
        _fail(np.asarray(v) == 0.0, "sqrt at zero has no derivative", node)
        r = np.sqrt(v)
        inv = 1.0 / r
        return a.chain(r, 0.5 * inv, -0.25 * inv * inv * inv)
    raise ExprError(f"unknown function {op!r}", node.pos)


def _eval_dual(node: Node, env: Mapping[str, Dual2]) -> Dual2:
    if isinstance(node, Const):
        return Dual2(node.value)
    if isinstance(node, (Var, Param)):
        try:
            return env[node.name]
        except KeyError:
            raise ExprError(f"symbol {node.name!r} is not bound", node.pos) from None
    if isinstance(node, Unary):
        return _apply(node.op, _eval_dual(node.arg, env), node)
    if isinstance(node, Pow):
        return _eval_dual(node.base, env).ipow(node.exponent)
    left = _eval_dual(node.left, env)
    right = _eval_dual(node.right, env)
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    _fail(np.asarray(right.value) == 0.0, "division by zero", node)
    return left / right


def eval_second_order(
    ast: Node, bindings: Mapping[str, float], dir_a: str, dir_b: str
) -> Dual2:
    """Value, d/d dir_a, d/d dir_b and d2/(d dir_a d dir_b) of ``ast`` at ``bindings``."""
    for d in (dir_a, dir_b):
        if d not in RUNTIME_VARIABLES:
            raise ExprError(f"differentiation direction {d!r} is not a runtime variable")
        if d not in bindings:
            raise ExprError(f"differentiation direction {d!r} is not bound")
    env = {}
    for name, value in bindings.items():
        env[name] = Dual2(
            value,
            1.0 if name == dir_a else 0.0,
            1.0 if name == dir_b else 0.0,
            0.0,
        )
    return _eval_root(ast, env)


def _eval_root(ast: Node, env: Mapping[str, Dual2]) -> Dual2:
    # Domain violations are checked explicitly; beyond them, extreme magnitudes
    # follow IEEE semantics (inf/nan) without numpy warnings.
    with np.errstate(over="ignore", divide="ignore", invalid="ignore", under="ignore"):
        return _eval_dual(ast, env)


def evaluate(ast: Node, bindings: Mapping[str, float]) -> float:
    """Plain value of the expression (no derivatives)."""
    return _eval_root(ast, {k: Dual2(v) for k, v in bindings.items()}).value


# --------------------------------------------------------------------------
# path compilation


def _parse_with_params(src: str, variables: frozenset[str], params: Mapping[str, float]) -> Node:
    clash = variables & set(params)
    if clash:
        raise ExprError(f"parameter names collide with variables: {sorted(clash)}")
    ast = parse_expression(src, set(variables) | set(params), variables)
    return bind_parameters(ast, params)


def compile_implicit_path(phi_src: str, params: Mapping[str, float] | None = None):
    """Build an implicit path whose level-set value, gradient and Hessian come from AD."""
    from .paths import ImplicitPathSpec

    params = dict(params or {})
    ast = _parse_with_params(phi_src, frozenset({"x", "y"}), params)

    def phi(p):
        return evaluate(ast, {"x": p[0], "y": p[1]})

    def grad(p):
        d = eval_second_order(ast, {"x": p[0], "y": p[1]}, "x", "y")
        return np.array([d.d1, d.d2])

    def hess(p):
        b = {"x": p[0], "y": p[1]}
        hxy = eval_second_order(ast, b, "x", "y").d12
        hxx = eval_second_order(ast, b, "x", "x").d12
        hyy = eval_second_order(ast, b, "y", "y").d12
        return np.array([[hxx, hxy], [hxy, hyy]])

    def evaluate_all(p):
        b = {"x": p[0], "y": p[1]}
        dxy = eval_second_order(ast, b, "x", "y")
        hxx = eval_second_order(ast, b, "x", "x").d12
        hyy = eval_second_order(ast, b, "y", "y").d12
        return dxy.value, np.array([dxy.d1, dxy.d2]), np.array([[hxx, dxy.d12], [dxy.d12, hyy]])

    return ImplicitPathSpec(
        phi=phi,
        grad=grad,
        hess=hess,
        params=tuple(params.values()),
        name="dsl",
        source=to_text(ast),
        evaluate_all=evaluate_all,
    )


def compile_parametric_path(f_srcs: Sequence[str], params: Mapping[str, float] | None = None):
    """Build a parametric path; coordinate i and its first two w-derivatives come from AD."""
    from .paths import ParametricPathSpec

    if len(f_srcs) not in (2, 3):
        raise ExprError(f"parametric paths need 2 or 3 coordinate expressions, got {len(f_srcs)}")
    params = dict(params or {})
    asts = [_parse_with_params(s, frozenset({"w"}), params) for s in f_srcs]

    def jets(w):
        return [eval_second_order(a, {"w": w}, "w", "w") for a in asts]

    def f(w):
        return np.array([evaluate(a, {"w": w}) for a in asts])

    def fd(w):
        return np.array([j.d1 for j in jets(w)])

    def fdd(w):
        return np.array([j.d12 for j in jets(w)])

    def evaluate_all(w):
        js = jets(w)
        return (
            np.array([j.value for j in js]),
            np.array([j.d1 for j in js]),
            np.array([j.d12 for j in js]),
        )

    return ParametricPathSpec(
        n=len(asts),
        f=f,
        fd=fd,
        fdd=fdd,
        params=tuple(params.values()),
        name="dsl",
        source=tuple(to_text(a) for a in asts),
        evaluate_all=evaluate_all,
    )


# --------------------------------------------------------------------------
# path files


def parse_path_text(text: str):
    """Compile the contents of a path file.

    Lines starting with ``#`` and blank lines are ignored. Optional headers::

        params: r=100, zl=40
        kind: implicit | parametric

    Every other line is an expression. Without ``kind:``, one expression is
    implicit (over x, y) and two or three are parametric (over w).
    """
    params: dict[str, float] = {}
    kind = None
    exprs: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        low = line.lower()
        if low.startswith("params:"):
            body = line.split(":", 1)[1]
            for item in filter(None, (s.strip() for s in body.replace(";", ",").split(","))):
                name, sep, value = item.partition("=")
                if not sep:
                    raise ParseError(f"line {lineno}: expected name=value, got {item!r}")
                try:
                    params[name.strip()] = float(value)
                except ValueError:
                    raise ParseError(f"line {lineno}: bad number {value.strip()!r}") from None
        elif low.startswith("kind:"):
            kind = line.split(":", 1)[1].strip().lower()
            if kind not in ("implicit", "parametric"):
                raise ParseError(f"line {lineno}: kind must be implicit or parametric")
        else:
            exprs.append(line)
    if not exprs:
        raise ParseError("path file has no expressions")
    if kind is None:
        kind = "implicit" if len(exprs) == 1 else "parametric"
    if kind == "implicit":
        if len(exprs) != 1:
            raise ParseError("an implicit path takes exactly one expression")
        return compile_implicit_path(exprs[0], params)
    return compile_parametric_path(exprs, params)


def load_path_file(path) -> object:
    with open(path, encoding="utf-8") as fh:
        return parse_path_text(fh.read())
