"""Small expression language for the free functions of a construction.

Trees are immutable and built from four node kinds (constants, variables,
unary function calls and binary operators).  Evaluation accepts scalars or
numpy arrays as bindings; domain violations raise :class:`DomainError`
instead of silently producing NaN.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Union

import numpy as np

__all__ = [
    "Expr", "Const", "Var", "Unary", "Binary",
    "ExprError", "ExprSyntaxError", "UnknownVariableError",
    "UnknownFunctionError", "UnboundVariableError", "DomainError",
    "parse", "evaluate", "differentiate", "substitute", "bind_constants",
    "to_string", "free_variables", "depends_on",
    "const", "var", "call", "FUNCTIONS",
]

Number = Union[int, float]


class ExprError(ValueError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, position: int, expected: str, found: str):
        self.position = position
        self.expected = expected
        self.found = found
        super().__init__(
            f"syntax error at position {position}: expected {expected}, found {found!r}")


class UnknownVariableError(ExprError):
    def __init__(self, name: str, position: int):
        self.name = name
        self.position = position
        super().__init__(f"unknown variable {name!r} at position {position}")


class UnknownFunctionError(ExprError):
    def __init__(self, name: str, position: int):
        self.name = name
        self.position = position
        super().__init__(f"unknown function {name!r} at position {position}")


class UnboundVariableError(ExprError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"variable {name!r} is not bound")


class DomainError(ExprError):
    def __init__(self, node: "Expr", message: str):
        self.node = node
        self.position = node.pos
        where = f" (source position {node.pos})" if node.pos is not None else ""
        super().__init__(f"{message} in {to_string(node)!r}{where}")


# ---------------------------------------------------------------- nodes

class Expr:
    """Base class of expression nodes.  Supports arithmetic operators."""

    pos: int | None

    def __add__(self, other):
        return _binary("+", self, _wrap(other))

    def __radd__(self, other):
        return _binary("+", _wrap(other), self)

    def __sub__(self, other):
        return _binary("-", self, _wrap(other))

    def __rsub__(self, other):
        return _binary("-", _wrap(other), self)

    def __mul__(self, other):
        return _binary("*", self, _wrap(other))

    def __rmul__(self, other):
        return _binary("*", _wrap(other), self)

    def __truediv__(self, other):
        return _binary("/", self, _wrap(other))

    def __rtruediv__(self, other):
        return _binary("/", _wrap(other), self)

    def __pow__(self, other):
        return _binary("^", self, _wrap(other))

    def __rpow__(self, other):
        return _binary("^", _wrap(other), self)

    def __neg__(self):
        return _unary("neg", self)

    def __str__(self):
        return to_string(self)

    def __call__(self, **bindings):
        return evaluate(self, bindings)


@dataclass(frozen=True, eq=True, repr=False)
class Const(Expr):
    value: float
    pos: int | None = field(default=None, compare=False)

    def __repr__(self):
        return f"Const({self.value!r})"


@dataclass(frozen=True, eq=True, repr=False)
class Var(Expr):
    name: str
    pos: int | None = field(default=None, compare=False)

    def __repr__(self):
        return f"Var({self.name!r})"


@dataclass(frozen=True, eq=True, repr=False)
class Unary(Expr):
    op: str
    arg: Expr
    pos: int | None = field(default=None, compare=False)

    def __repr__(self):
        return f"Unary({self.op!r}, {self.arg!r})"


@dataclass(frozen=True, eq=True, repr=False)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr
    pos: int | None = field(default=None, compare=False)

    def __repr__(self):
        return f"Binary({self.op!r}, {self.left!r}, {self.right!r})"


FUNCTIONS = ("sin", "cos", "tan", "atan", "tanh", "cosh", "sinh",
             "exp", "ln", "sqrt", "abs")
_ALIASES = {"log": "ln", "arctan": "atan"}
_SUGAR = ("sech",)
_NAMED_CONSTANTS = {"pi": math.pi}

_NUMPY = {
    "neg": np.negative, "sin": np.sin, "cos": np.cos, "tan": np.tan,
    "atan": np.arctan, "tanh": np.tanh, "cosh": np.cosh, "sinh": np.sinh,
    "exp": np.exp, "ln": np.log, "sqrt": np.sqrt, "abs": np.abs,
}


def _wrap(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float, np.floating, np.integer)):
        return Const(float(x))
    raise TypeError(f"cannot use {type(x).__name__} in an expression")


def const(value: Number) -> Const:
    return Const(float(value))


def var(name: str) -> Var:
    return Var(name)


def call(name: str, arg) -> Expr:
    """Function application with constant folding (``sech`` expands to 1/cosh)."""
    name = _ALIASES.get(name, name)
    if name == "sech":
        return _binary("/", Const(1.0), _unary("cosh", _wrap(arg)))
    if name not in FUNCTIONS:
        raise UnknownFunctionError(name, -1)
    return _unary(name, _wrap(arg))


# Constant folding happens only when every operand is a literal; the single
# exception is the neutral/absorbing literals 0 and 1, which keep derivative
# trees from growing with dead branches.

def _unary(op: str, arg: Expr, pos: int | None = None) -> Expr:
    if isinstance(arg, Const):
        try:
            value = _apply_unary(Unary(op, arg), float(arg.value))
        except DomainError:
            return Unary(op, arg, pos)
        if math.isfinite(value):
            return Const(float(value), pos)
    if op == "neg" and isinstance(arg, Unary) and arg.op == "neg":
        return arg.arg
    return Unary(op, arg, pos)


def _is(e: Expr, value: float) -> bool:
    return isinstance(e, Const) and e.value == value


def _binary(op: str, left: Expr, right: Expr, pos: int | None = None) -> Expr:
    if isinstance(left, Const) and isinstance(right, Const):
        try:
            value = _apply_binary(Binary(op, left, right), left.value, right.value)
        except DomainError:
            return Binary(op, left, right, pos)
        if math.isfinite(value):
            return Const(float(value), pos)
        return Binary(op, left, right, pos)
    if op == "+":
        if _is(left, 0.0):
            return right
        if _is(right, 0.0):
            return left
    elif op == "-":
        if _is(right, 0.0):
            return left
        if _is(left, 0.0):
            return _unary("neg", right)
    elif op == "*":
        if _is(left, 0.0) or _is(right, 0.0):
            return Const(0.0)
        if _is(left, 1.0):
            return right
        if _is(right, 1.0):
            return left
    elif op == "/":
        if _is(right, 1.0):
            return left
        if _is(left, 0.0):
            return Const(0.0)
    elif op == "^":
        if _is(right, 1.0):
            return left
        if _is(right, 0.0):
            return Const(1.0)
    return Binary(op, left, right, pos)


# ---------------------------------------------------------------- parsing

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>\*\*|[-+*/^(),])
""", re.VERBOSE)


@dataclass
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    i = 0
    while i < len(source):
        m = _TOKEN_RE.match(source, i)
        if m is None:
            raise ExprSyntaxError(i, "a number, name or operator", source[i])
        kind = m.lastgroup
        if kind != "ws":
            text = m.group()
            if text == "**":
                text = "^"
            tokens.append(_Token(kind, text, i))
        i = m.end()
    tokens.append(_Token("end", "<end of input>", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str, allowed: set[str]):
        self.tokens = _tokenize(source)
        self.i = 0
        self.allowed = allowed

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> _Token:
        if self.tok.text != text:
            raise ExprSyntaxError(self.tok.pos, repr(text), self.tok.text)
        return self.advance()

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "end":
            raise ExprSyntaxError(self.tok.pos, "an operator or end of input", self.tok.text)
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.tok.text in ("+", "-"):
            t = self.advance()
            left = Binary(t.text, left, self.term(), t.pos)
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.tok.text in ("*", "/"):
            t = self.advance()
            left = Binary(t.text, left, self.unary(), t.pos)
        return left

    def unary(self) -> Expr:
        if self.tok.text == "-":
            t = self.advance()
            return Unary("neg", self.unary(), t.pos)
        if self.tok.text == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        if self.tok.text == "^":
            t = self.advance()
            # right-associative; exponent may carry its own sign
            return Binary("^", base, self.unary(), t.pos)
        return base

    def primary(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self.advance()
            return Const(float(t.text), t.pos)
        if t.kind == "name":
            self.advance()
            if self.tok.text == "(":
                self.advance()
                arg = self.expr()
                self.expect(")")
                name = _ALIASES.get(t.text, t.text)
                if name == "sech":
                    return Binary("/", Const(1.0, t.pos), Unary("cosh", arg, t.pos), t.pos)
                if name not in FUNCTIONS:
                    raise UnknownFunctionError(t.text, t.pos)
                return Unary(name, arg, t.pos)
            if t.text in self.allowed:
                return Var(t.text, t.pos)
            if t.text in _NAMED_CONSTANTS:
                return Const(_NAMED_CONSTANTS[t.text], t.pos)
            raise UnknownVariableError(t.text, t.pos)
        if t.text == "(":
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        raise ExprSyntaxError(t.pos, "a number, name or '('", t.text)


def parse(source: str, allowed_vars: Iterable[str]) -> Expr:
    """Parse infix ``source`` into a tree over ``allowed_vars``.

    Precedence from tightest: ``^`` (right associative), unary minus,
    ``* /``, ``+ -``.  ``**`` is accepted as a synonym for ``^``.
    """
    allowed = set(allowed_vars)
    if not allowed:
        raise ValueError("allowed_vars must not be empty")
    return _Parser(source, allowed).parse()


# ---------------------------------------------------------------- evaluation

def _bad(mask) -> bool:
    return bool(np.any(mask))


def _apply_unary(node: Unary, x):
    op = node.op
    if op == "ln" and _bad(np.asarray(x) <= 0):
        raise DomainError(node, "logarithm of a non-positive number")
    if op == "sqrt" and _bad(np.asarray(x) < 0):
        raise DomainError(node, "square root of a negative number")
    with np.errstate(all="ignore"):
        out = _NUMPY[op](x)
    if op == "tan" and _bad(~np.isfinite(out)):
        raise DomainError(node, "tangent at a pole")
    return out


def _apply_binary(node: Binary, a, b):
    op = node.op
    with np.errstate(all="ignore"):
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if _bad(np.asarray(b) == 0):
                raise DomainError(node, "division by zero")
            return a / b
        if op == "^":
            a_arr = np.asarray(a, dtype=float)
            b_arr = np.asarray(b, dtype=float)
            if _bad((a_arr < 0) & (b_arr != np.round(b_arr))):
                raise DomainError(node, "negative base with non-integer exponent")
            if _bad((a_arr == 0) & (b_arr < 0)):
                raise DomainError(node, "zero raised to a negative power")
            return np.power(a_arr, b_arr)
    raise ExprError(f"unknown operator {op!r}")


def evaluate(e: Expr, bindings: Mapping[str, object]):
    """Evaluate ``e``; bindings may be floats or broadcastable numpy arrays.

    Returns a Python float when every binding is scalar, else an ndarray.
    """
    memo: dict[int, object] = {}
    scalar = all(np.ndim(v) == 0 for v in bindings.values())

    def ev(node: Expr):
        key = id(node)
        if key in memo:
            return memo[key]
        if isinstance(node, Const):
            out = node.value
        elif isinstance(node, Var):
            try:
                out = bindings[node.name]
            except KeyError:
                raise UnboundVariableError(node.name) from None
            out = np.asarray(out, dtype=float) if not scalar else float(out)
        elif isinstance(node, Unary):
            out = _apply_unary(node, ev(node.arg))
        elif isinstance(node, Binary):
            out = _apply_binary(node, ev(node.left), ev(node.right))
        else:
            raise TypeError(f"not an expression node: {node!r}")
        memo[key] = out
        return out

    out = ev(e)
    if scalar:
        return float(out)
    return np.asarray(out, dtype=float) + np.zeros(np.broadcast_shapes(
        *(np.shape(v) for v in bindings.values())))


# ---------------------------------------------------------------- structure

def free_variables(e: Expr) -> set[str]:
    out: set[str] = set()
    stack = [e]
    seen: set[int] = set()
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        if isinstance(node, Var):
            out.add(node.name)
        elif isinstance(node, Unary):
            stack.append(node.arg)
        elif isinstance(node, Binary):
            stack.extend((node.left, node.right))
    return out


def depends_on(e: Expr, name: str) -> bool:
    return name in free_variables(e)


def substitute(e: Expr, mapping: Mapping[str, Expr | Number]) -> Expr:
    """Replace variables by expressions (or numbers), folding literal subtrees."""
    repl = {k: _wrap(v) for k, v in mapping.items()}
    memo: dict[int, Expr] = {}

    def go(node: Expr) -> Expr:
        key = id(node)
        if key in memo:
            return memo[key]
        if isinstance(node, Var):
            out = repl.get(node.name, node)
        elif isinstance(node, Unary):
            out = _unary(node.op, go(node.arg), node.pos)
        elif isinstance(node, Binary):
            out = _binary(node.op, go(node.left), go(node.right), node.pos)
        else:
            out = node
        memo[key] = out
        return out

    return go(e)


def bind_constants(e: Expr, values: Mapping[str, Number]) -> Expr:
    return substitute(e, {k: Const(float(v)) for k, v in values.items()})


# ---------------------------------------------------------------- calculus

def differentiate(e: Expr, name: str) -> Expr:
    """Exact derivative of ``e`` with respect to variable ``name``."""
    memo: dict[int, Expr] = {}
    one, two = Const(1.0), Const(2.0)

    def d(node: Expr) -> Expr:
        key = id(node)
        if key in memo:
            return memo[key]
        if isinstance(node, Const):
            out = Const(0.0)
        elif isinstance(node, Var):
            out = Const(1.0 if node.name == name else 0.0)
        elif isinstance(node, Unary):
            u = node.arg
            du = d(u)
            if _is(du, 0.0):
                out = Const(0.0)
            else:
                op = node.op
                if op == "neg":
                    out = -du
                elif op == "sin":
                    out = call("cos", u) * du
                elif op == "cos":
                    out = -(call("sin", u) * du)
                elif op == "tan":
                    out = (one + call("tan", u) ** two) * du
                elif op == "atan":
                    out = du / (one + u ** two)
                elif op == "tanh":
                    out = (one - call("tanh", u) ** two) * du
                elif op == "cosh":
                    out = call("sinh", u) * du
                elif op == "sinh":
                    out = call("cosh", u) * du
                elif op == "exp":
                    out = node * du
                elif op == "ln":
                    out = du / u
                elif op == "sqrt":
                    out = du / (two * node)
                elif op == "abs":
                    out = u * du / node
                else:
                    raise ExprError(f"no derivative rule for {op!r}")
        elif isinstance(node, Binary):
            a, b = node.left, node.right
            da, db = d(a), d(b)
            op = node.op
            if op == "+":
                out = da + db
            elif op == "-":
                out = da - db
            elif op == "*":
                out = da * b + a * db
            elif op == "/":
                out = da / b - a * db / b ** two
            elif op == "^":
                if _is(db, 0.0):
                    out = b * a ** (b - one) * da
                elif _is(da, 0.0):
                    out = node * call("ln", a) * db
                else:
                    out = node * (db * call("ln", a) + b * da / a)
            else:
                raise ExprError(f"unknown operator {op!r}")
        else:
            raise TypeError(f"not an expression node: {node!r}")
        memo[key] = out
        return out

    return d(e)


# ---------------------------------------------------------------- printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}
_ATOM = 5


def _prec(node: Expr) -> int:
    if isinstance(node, Binary):
        return _PREC[node.op]
    if isinstance(node, Unary) and node.op == "neg":
        return _PREC["neg"]
    if isinstance(node, Const) and (node.value < 0 or math.copysign(1.0, node.value) < 0):
        return _PREC["neg"]
    return _ATOM


def to_string(e: Expr) -> str:
    """Infix text that :func:`parse` maps back to the same tree values.

    Equal-precedence right operands are always parenthesised so that the
    reparsed tree has the same floating-point association.
    """
    if isinstance(e, Const):
        v = e.value
        if v < 0 or math.copysign(1.0, v) < 0:
            return f"(-{repr(-v)})"
        return repr(v)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        if e.op == "neg":
            inner = to_string(e.arg)
            if _prec(e.arg) < _PREC["neg"]:
                inner = f"({inner})"
            return f"-{inner}"
        return f"{e.op}({to_string(e.arg)})"
    if isinstance(e, Binary):
        p = _PREC[e.op]
        ls, rs = to_string(e.left), to_string(e.right)
        if e.op == "^":
            if _prec(e.left) <= p:
                ls = f"({ls})"
            if _prec(e.right) < p:
                rs = f"({rs})"
        else:
            if _prec(e.left) < p:
                ls = f"({ls})"
            if _prec(e.right) <= p:
                rs = f"({rs})"
        return f"{ls} {e.op} {rs}"
    raise TypeError(f"not an expression node: {e!r}")
