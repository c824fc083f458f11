"""A small expression language for nonlinearities and boundary functionals.

Scalar expressions are built from numbers, the constants ``pi`` and ``e``,
declared variables (a subset of ``t`` and ``x``), the operators
``+ - * / ^`` and unary minus, and calls to a fixed catalog of functions.
Grammar::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := unary ('^' factor)?
    unary  := '-'? atom
    atom   := number | ident | ident '(' args ')' | '(' expr ')'

Note that unary minus binds tighter than ``^``, so ``-x^2`` is ``(-x)^2``.

Functional expressions additionally accept ``x(p)``, ``x'(p)``, ``x''(p)``,
``x^(j)(p)`` (the j-th derivative at the literal point p) and ``int(f)``
(the integral over [0, 1] of a scalar expression f in ``t`` and ``x``).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import (
    DerivativeOrderError,
    DomainError,
    ExprSyntaxError,
    UnknownIdentifierError,
)

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "atan": np.arctan,
    "tanh": np.tanh,
}

CONSTANTS = {"pi": math.pi, "e": math.e}


# ---------------------------------------------------------------- AST nodes


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


@dataclass(frozen=True)
class PointEval:
    """Derivative of order ``order`` of the unknown at ``point``."""

    order: int
    point: float


@dataclass(frozen=True)
class Integral:
    body: "Node"


Node = Union[Num, Const, Var, Neg, BinOp, Call, PointEval, Integral]


# ---------------------------------------------------------------- tokenizer


@dataclass(frozen=True)
class _Token:
    kind: str  # "num", "ident", "op", "eof"
    text: str
    offset: int  # byte offset


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^(),'])
    """,
    re.VERBOSE,
)


def _byte_offset(src: str, index: int) -> int:
    return len(src[:index].encode("utf-8"))


def _tokenize(src: str) -> list[_Token]:
    tokens = []
    i = 0
    while i < len(src):
        m = _TOKEN_RE.match(src, i)
        if m is None:
            raise ExprSyntaxError(
                f"unexpected character {src[i]!r}", _byte_offset(src, i)
            )
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), _byte_offset(src, i)))
        i = m.end()
    tokens.append(_Token("eof", "", _byte_offset(src, len(src))))
    _check_parens(tokens)
    return tokens


def _check_parens(tokens):
    # An unclosed '(' is reported at its own position (innermost first).
    stack = []
    for tok in tokens:
        if tok.text == "(" and tok.kind == "op":
            stack.append(tok.offset)
        elif tok.text == ")" and tok.kind == "op":
            if not stack:
                raise ExprSyntaxError("unmatched ')'", tok.offset)
            stack.pop()
    if stack:
        raise ExprSyntaxError("unbalanced '('", stack[-1], {")"})


# ---------------------------------------------------------------- parser

_ATOM_START = frozenset({"number", "identifier", "("})


class _Parser:
    def __init__(self, src, variables, functional=False, order=None):
        self.src = src
        self.tokens = _tokenize(src)
        self.pos = 0
        self.variables = tuple(variables)
        self.functional = functional
        self.order = order
        self.in_integral = False

    @property
    def tok(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def at(self, text):
        return self.tok.kind == "op" and self.tok.text == text

    def expect(self, text):
        if not self.at(text):
            self.fail(f"expected {text!r}", {text})
        return self.advance()

    def fail(self, message, expected=()):
        tok = self.tok
        what = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise ExprSyntaxError(f"{message}, found {what}", tok.offset, expected)

    def parse(self):
        node = self.expr()
        if self.tok.kind != "eof":
            self.fail("unexpected token", {"+", "-", "*", "/", "^", "end of input"})
        return node

    def expr(self):
        node = self.term()
        while self.at("+") or self.at("-"):
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.at("*") or self.at("/"):
            op = self.advance().text
            node = BinOp(op, node, self.factor())
        return node

    def factor(self):
        base = self.unary()
        if self.at("^"):
            self.advance()
            return BinOp("^", base, self.factor())
        return base

    def unary(self):
        if self.at("-"):
            self.advance()
            return Neg(self.atom())
        return self.atom()

    def atom(self):
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            value = float(tok.text)
            if not math.isfinite(value):
                raise ExprSyntaxError("number literal overflows", tok.offset)
            return Num(value)
        if tok.kind == "ident":
            return self.identifier()
        if self.at("("):
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        self.fail("expected an operand", _ATOM_START | {"-"})

    def identifier(self):
        tok = self.advance()
        name = tok.text
        if self.functional and not self.in_integral:
            if name == "x":
                return self.point_eval(tok)
            if name == "int" and self.at("("):
                self.advance()
                self.in_integral = True
                body = self.expr()
                self.in_integral = False
                self.expect(")")
                return Integral(body)
        if self.at("("):
            if name not in FUNCTIONS:
                raise UnknownIdentifierError(f"unknown function {name!r}", tok.offset)
            self.advance()
            args = [self.expr()]
            while self.at(","):
                self.advance()
                args.append(self.expr())
            self.expect(")")
            if len(args) != 1:
                raise ExprSyntaxError(
                    f"{name} takes exactly one argument, got {len(args)}", tok.offset
                )
            return Call(name, tuple(args))
        allowed = ("t", "x") if self.in_integral else self.variables
        if name in allowed:
            return Var(name)
        if name in CONSTANTS:
            return Const(name)
        raise UnknownIdentifierError(f"unknown identifier {name!r}", tok.offset)

    def literal(self, what):
        tok = self.tok
        if tok.kind != "num":
            self.fail(f"expected a literal {what}", {"number"})
        self.advance()
        return tok

    def point_eval(self, xtok):
        order = 0
        if self.at("'"):
            while self.at("'"):
                self.advance()
                order += 1
        elif self.at("^"):
            self.advance()
            self.expect("(")
            otok = self.literal("derivative order")
            if not re.fullmatch(r"\d+", otok.text):
                raise ExprSyntaxError("derivative order must be an integer", otok.offset)
            order = int(otok.text)
            self.expect(")")
        elif not self.at("("):
            self.fail("expected point evaluation", {"(", "'", "^"})
        self.expect("(")
        ptok = self.literal("evaluation point")
        point = float(ptok.text)
        if not 0.0 <= point <= 1.0:
            raise ExprSyntaxError(f"evaluation point {point} outside [0, 1]", ptok.offset)
        self.expect(")")
        if self.order is not None and order > self.order - 1:
            raise DerivativeOrderError(
                f"derivative order {order} at offset {xtok.offset} exceeds n-1 = {self.order - 1}"
            )
        return PointEval(order, point)


# ---------------------------------------------------------------- printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 3}


def _prec(node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return 4
    return 5


def to_source(node) -> str:
    """Print ``node`` with the minimal parentheses that preserve its shape."""

    def wrap(child, min_prec):
        s = to_source(child)
        return s if _prec(child) >= min_prec else f"({s})"

    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, (Const, Var)):
        return node.name
    if isinstance(node, Neg):
        return "-" + wrap(node.operand, 5)
    if isinstance(node, BinOp):
        if node.op in "+-":
            return f"{wrap(node.left, 1)} {node.op} {wrap(node.right, 2)}"
        if node.op in "*/":
            return f"{wrap(node.left, 2)}{node.op}{wrap(node.right, 3)}"
        return f"{wrap(node.left, 4)}^{wrap(node.right, 3)}"
    if isinstance(node, Call):
        return f"{node.func}({', '.join(to_source(a) for a in node.args)})"
    if isinstance(node, PointEval):
        point = repr(node.point)
        if node.order <= 2:
            return "x" + "'" * node.order + f"({point})"
        return f"x^({node.order})({point})"
    if isinstance(node, Integral):
        return f"int({to_source(node.body)})"
    raise TypeError(f"not an expression node: {node!r}")


# ---------------------------------------------------------------- evaluation


def _check(node, value, message="non-finite result"):
    if not np.all(np.isfinite(value)):
        raise DomainError(message, to_source(node))
    return value


def _evaluate(node, env):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Const):
        return CONSTANTS[node.name]
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise ValueError(f"no value bound for variable {node.name!r}") from None
    if isinstance(node, Neg):
        return -_evaluate(node.operand, env)
    if isinstance(node, BinOp):
        a = _evaluate(node.left, env)
        b = _evaluate(node.right, env)
        with np.errstate(all="ignore"):
            if node.op == "+":
                out = a + b
            elif node.op == "-":
                out = a - b
            elif node.op == "*":
                out = a * b
            elif node.op == "/":
                if np.any(np.asarray(b) == 0):
                    raise DomainError("division by zero", to_source(node))
                out = a / b
            else:
                a_arr, b_arr = np.asarray(a), np.asarray(b)
                if np.any((a_arr < 0) & (b_arr != np.floor(b_arr))):
                    raise DomainError(
                        "non-integer power of a negative number", to_source(node)
                    )
                if np.any((a_arr == 0) & (b_arr < 0)):
                    raise DomainError("division by zero", to_source(node))
                out = np.power(a, b)
        return _check(node, out)
    if isinstance(node, Call):
        arg = _evaluate(node.args[0], env)
        if node.func == "log" and np.any(np.asarray(arg) <= 0):
            raise DomainError("log of a non-positive number", to_source(node))
        if node.func == "sqrt" and np.any(np.asarray(arg) < 0):
            raise DomainError("sqrt of a negative number", to_source(node))
        with np.errstate(all="ignore"):
            out = FUNCTIONS[node.func](arg)
        return _check(node, out)
    raise TypeError(f"cannot evaluate {node!r} as a scalar expression")


def _walk(node):
    yield node
    if isinstance(node, Neg):
        yield from _walk(node.operand)
    elif isinstance(node, BinOp):
        yield from _walk(node.left)
        yield from _walk(node.right)
    elif isinstance(node, Call):
        for a in node.args:
            yield from _walk(a)
    elif isinstance(node, Integral):
        yield from _walk(node.body)


@dataclass(frozen=True)
class ScalarExpr:
    """A parsed scalar expression over a declared set of variables.

    Calling the expression evaluates it; arguments may be numpy arrays, in
    which case evaluation is elementwise with the usual broadcasting.
    """

    node: Node
    variables: tuple = ("t", "x")

    def __str__(self):
        return to_source(self.node)

    def __call__(self, **values):
        return _evaluate(self.node, values)

    def uses(self, name: str) -> bool:
        return any(isinstance(n, Var) and n.name == name for n in _walk(self.node))

    @property
    def is_zero(self) -> bool:
        return isinstance(self.node, Num) and self.node.value == 0.0


def parse_scalar(src: str, variables=("t", "x")) -> ScalarExpr:
    """Parse ``src`` into a :class:`ScalarExpr` over ``variables``."""
    return ScalarExpr(_Parser(src, variables).parse(), tuple(variables))


def eval_scalar(e: ScalarExpr, t: float, x: float) -> float:
    env = {name: v for name, v in (("t", t), ("x", x)) if name in e.variables}
    return float(e(**env))


ZERO = ScalarExpr(Num(0.0), ())


# ---------------------------------------------------------------- functionals


@dataclass(frozen=True)
class Term:
    """One linear piece of a functional: ``coefficient * x^(order)(point)``
    or ``coefficient * int(integrand)``."""

    coefficient: float
    kind: str  # "point" or "integral"
    order: int = 0
    point: float = 0.0
    integrand: ScalarExpr | None = None

    @property
    def atom(self):
        if self.kind == "point":
            return PointEval(self.order, self.point)
        return Integral(self.integrand.node)


@dataclass(frozen=True)
class FunctionalExpr:
    """``post_map(sum(terms))``; without a post map the sum itself."""

    terms: tuple
    post_map: ScalarExpr | None = None

    @property
    def max_order(self) -> int:
        return max((t.order for t in self.terms if t.kind == "point"), default=0)


@dataclass(frozen=True)
class Functional:
    """A sum of :class:`FunctionalExpr` parts plus a constant."""

    parts: tuple = ()
    constant: float = 0.0
    source: str = field(default="0", compare=False)

    def __str__(self):
        return self.source

    @property
    def is_zero(self) -> bool:
        return not self.parts and self.constant == 0.0

    @property
    def max_order(self) -> int:
        return max((p.max_order for p in self.parts), default=0)

    def shifted(self, c: float) -> "Functional":
        src = self.source if c == 0 else f"{self.source} + {c!r}"
        return Functional(self.parts, self.constant + c, src)

    def __call__(self, x) -> float:
        return eval_functional(self, x)


def _has_atoms(node) -> bool:
    return any(isinstance(n, (PointEval, Integral)) for n in _walk(node))


def _constant_value(node):
    if _has_atoms(node) or any(isinstance(n, Var) for n in _walk(node)):
        return None
    return float(_evaluate(node, {}))


def _as_linear(node):
    """Return [(coef, atom), ...] if ``node`` is a linear combination of atoms."""
    if isinstance(node, (PointEval, Integral)):
        return [(1.0, node)]
    if isinstance(node, Neg):
        inner = _as_linear(node.operand)
        return None if inner is None else [(-c, a) for c, a in inner]
    if isinstance(node, BinOp):
        if node.op in "+-":
            left, right = _as_linear(node.left), _as_linear(node.right)
            if left is None or right is None:
                return None
            sign = 1.0 if node.op == "+" else -1.0
            return left + [(sign * c, a) for c, a in right]
        if node.op == "*":
            for lin, other in ((node.left, node.right), (node.right, node.left)):
                c = _constant_value(other)
                inner = _as_linear(lin) if c is not None else None
                if inner is not None:
                    return [(c * k, a) for k, a in inner]
            return None
        if node.op == "/":
            c = _constant_value(node.right)
            inner = _as_linear(node.left)
            if c is None or inner is None or c == 0:
                return None
            return [(k / c, a) for k, a in inner]
    return None


def _linear_blocks(node):
    if not _has_atoms(node):
        return []
    if _as_linear(node) is not None:
        return [node]
    children = []
    if isinstance(node, Neg):
        children = [node.operand]
    elif isinstance(node, BinOp):
        children = [node.left, node.right]
    elif isinstance(node, Call):
        children = list(node.args)
    return [b for c in children for b in _linear_blocks(c)]


def _replace(node, target, repl):
    if node == target:
        return repl
    if isinstance(node, Neg):
        return Neg(_replace(node.operand, target, repl))
    if isinstance(node, BinOp):
        return BinOp(node.op, _replace(node.left, target, repl), _replace(node.right, target, repl))
    if isinstance(node, Call):
        return Call(node.func, tuple(_replace(a, target, repl) for a in node.args))
    return node


def _additive_parts(node, sign=1.0):
    if isinstance(node, BinOp) and node.op in "+-":
        yield from _additive_parts(node.left, sign)
        yield from _additive_parts(node.right, sign if node.op == "+" else -sign)
    elif isinstance(node, Neg) and _as_linear(node) is None:
        yield from _additive_parts(node.operand, -sign)
    else:
        yield sign, node


def _terms(pairs):
    out = []
    for c, atom in pairs:
        if isinstance(atom, PointEval):
            out.append(Term(c, "point", atom.order, atom.point))
        else:
            out.append(Term(c, "integral", integrand=ScalarExpr(atom.body, ("t", "x"))))
    return tuple(out)


def parse_functional(src: str, order: int | None = None) -> Functional:
    """Parse a boundary functional.

    Each additive part must be a constant, a linear combination of point
    evaluations and integrals, or a scalar map applied to exactly one such
    linear combination (e.g. ``0.05*atan(x(0.5))``).  ``order`` is the ODE
    order n; when given, derivative orders above n-1 are rejected here.
    """
    node = _Parser(src, (), functional=True, order=order).parse()
    constant = 0.0
    linear = []
    parts = []
    for sign, part in _additive_parts(node):
        c = _constant_value(part)
        if c is not None:
            constant += sign * c
            continue
        lin = _as_linear(part)
        if lin is not None:
            linear.extend((sign * k, a) for k, a in lin)
            continue
        blocks = set(_linear_blocks(part))
        if len(blocks) != 1:
            raise ExprSyntaxError(
                "each nonlinear term must apply one map to one linear combination "
                "of point values and integrals",
                0,
            )
        (block,) = blocks
        body = _replace(part, block, Var("x"))
        if sign < 0:
            body = Neg(body)
        parts.append(FunctionalExpr(_terms(_as_linear(block)), ScalarExpr(body, ("x",))))
    if linear:
        parts.insert(0, FunctionalExpr(_terms(linear)))
    return Functional(tuple(parts), constant, src.strip())


def _term_value(term: Term, x) -> float:
    from .funcspace import quad

    if term.kind == "point":
        if term.order >= x.order:
            raise DerivativeOrderError(
                f"functional needs derivative order {term.order}, trajectory has {x.order}"
            )
        return x.eval(term.point, term.order)
    values = term.integrand(t=x.grid.nodes, x=x.values[:, 0])
    return quad(np.broadcast_to(values, x.grid.nodes.shape))


def eval_functional(f, x) -> float:
    """Evaluate a :class:`Functional` or :class:`FunctionalExpr` on a trajectory."""
    if isinstance(f, FunctionalExpr):
        s = sum(t.coefficient * _term_value(t, x) for t in f.terms)
        return float(f.post_map(x=s)) if f.post_map is not None else float(s)
    return float(sum(eval_functional(p, x) for p in f.parts) + f.constant)
