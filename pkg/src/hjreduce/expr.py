"""Scalar expression trees: parsing, evaluation, exact differentiation.

Expressions are immutable trees over float constants, named variables,
the binary operations ``+ - * / ^`` (``^`` is right-associative power),
unary negation, and the functions sin, cos, tan, arctan, sqrt, exp, log.
Identifiers match ``[a-zA-Z][a-zA-Z0-9_]*``.

Evaluation is plain IEEE double arithmetic.  Singular operations
(division by zero, sqrt of a negative, log of a non-positive number)
raise :class:`DomainError` carrying the offending subexpression; no
operation ever returns NaN.  An unbound variable is always an error,
never a default value.

Construction through the smart constructors (and through the overloaded
Python operators) performs constant folding and nothing more; no deeper
simplification is attempted, so structural equality of two expressions
is not meaningful and equality should be tested by evaluation on
sampled bindings.
"""

from __future__ import annotations

import math
import re

__all__ = [
    "Expr", "Const", "Var", "Add", "Sub", "Mul", "Div", "Pow", "Neg",
    "Call", "External",
    "ExprError", "ParseError", "UnknownFunctionError",
    "UnboundVariableError", "DomainError",
    "parse", "evaluate", "differentiate", "substitute", "free_vars",
    "add", "sub", "mul", "div", "power", "neg", "call", "as_expr",
    "FUNCTION_NAMES",
]

# Bindings are plain dicts {variable name: float}.
Bindings = dict


class ExprError(Exception):
    """Base class for expression errors."""


class ParseError(ExprError):
    """Syntax error; ``offset`` is the byte offset into the source text."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class UnknownFunctionError(ParseError):
    """An identifier was applied as a function but is not one."""

    def __init__(self, name, offset):
        super().__init__(f"unknown function '{name}'", offset)
        self.name = name


class UnboundVariableError(ExprError):
    def __init__(self, name):
        super().__init__(f"unbound variable '{name}'")
        self.name = name


class DomainError(ExprError):
    """A singular operation was evaluated.  Carries the subexpression."""

    def __init__(self, message, subexpr=None):
        if subexpr is not None:
            message = f"{message} in '{subexpr}'"
        super().__init__(message)
        self.subexpr = subexpr


class Expr:
    """Abstract expression node.  Instances are immutable and shareable."""

    __slots__ = ()

    def evaluate(self, bindings, singular_tol=0.0):
        """Evaluate with the given variable bindings.

        ``singular_tol`` widens the division guard: a denominator with
        absolute value below it is treated as an exact singularity.
        """
        return self._ev(bindings, singular_tol)

    def free_vars(self):
        out = set()
        self._fv(out)
        return out

    def __str__(self):
        return self._fmt(0)

    def __repr__(self):
        return f"<{type(self).__name__} {self}>"

    # Arithmetic operators build folded nodes, so formulas can be
    # assembled in Python code the same way they are parsed.
    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return sub(self, as_expr(other))

    def __rsub__(self, other):
        return sub(as_expr(other), self)

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __pow__(self, other):
        return power(self, as_expr(other))

    def __neg__(self):
        return neg(self)


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value):
        object.__setattr__(self, "value", float(value))

    def __setattr__(self, name, value):
        raise AttributeError("Expr nodes are immutable")

    def _ev(self, b, tol):
        return self.value

    def _fv(self, out):
        pass

    def _diff(self, var):
        return Const(0.0)

    def _sub(self, mapping):
        return self

    def _fmt(self, ctx):
        s = repr(self.value)
        prec = 5 if self.value >= 0.0 else 3
        return f"({s})" if prec < ctx else s


class Var(Expr):
    __slots__ = ("name",)

    def __init__(self, name):
        object.__setattr__(self, "name", name)

    def __setattr__(self, name, value):
        raise AttributeError("Expr nodes are immutable")

    def _ev(self, b, tol):
        try:
            return float(b[self.name])
        except KeyError:
            raise UnboundVariableError(self.name) from None

    def _fv(self, out):
        out.add(self.name)

    def _diff(self, var):
        return Const(1.0 if var == self.name else 0.0)

    def _sub(self, mapping):
        repl = mapping.get(self.name)
        return self if repl is None else as_expr(repl)

    def _fmt(self, ctx):
        return self.name


class _Binary(Expr):
    __slots__ = ("left", "right")

    def __init__(self, left, right):
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)

    def __setattr__(self, name, value):
        raise AttributeError("Expr nodes are immutable")

    def _fv(self, out):
        self.left._fv(out)
        self.right._fv(out)


class Add(_Binary):
    __slots__ = ()

    def _ev(self, b, tol):
        return self.left._ev(b, tol) + self.right._ev(b, tol)

    def _diff(self, var):
        return add(differentiate(self.left, var), differentiate(self.right, var))

    def _sub(self, mapping):
        return add(self.left._sub(mapping), self.right._sub(mapping))

    def _fmt(self, ctx):
        s = f"{self.left._fmt(1)}+{self.right._fmt(2)}"
        return f"({s})" if ctx > 1 else s


class Sub(_Binary):
    __slots__ = ()

    def _ev(self, b, tol):
        return self.left._ev(b, tol) - self.right._ev(b, tol)

    def _diff(self, var):
        return sub(differentiate(self.left, var), differentiate(self.right, var))

    def _sub(self, mapping):
        return sub(self.left._sub(mapping), self.right._sub(mapping))

    def _fmt(self, ctx):
        s = f"{self.left._fmt(1)}-{self.right._fmt(2)}"
        return f"({s})" if ctx > 1 else s


class Mul(_Binary):
    __slots__ = ()

    def _ev(self, b, tol):
        return self.left._ev(b, tol) * self.right._ev(b, tol)

    def _diff(self, var):
        u, v = self.left, self.right
        return add(mul(differentiate(u, var), v), mul(u, differentiate(v, var)))

    def _sub(self, mapping):
        return mul(self.left._sub(mapping), self.right._sub(mapping))

    def _fmt(self, ctx):
        s = f"{self.left._fmt(2)}*{self.right._fmt(3)}"
        return f"({s})" if ctx > 2 else s


class Div(_Binary):
    __slots__ = ()

    def _ev(self, b, tol):
        den = self.right._ev(b, tol)
        if den == 0.0 or abs(den) < tol:
            raise DomainError("division by zero", self)
        return self.left._ev(b, tol) / den

    def _diff(self, var):
        u, v = self.left, self.right
        num = sub(mul(differentiate(u, var), v), mul(u, differentiate(v, var)))
        return div(num, power(v, Const(2.0)))

    def _sub(self, mapping):
        return div(self.left._sub(mapping), self.right._sub(mapping))

    def _fmt(self, ctx):
        s = f"{self.left._fmt(2)}/{self.right._fmt(3)}"
        return f"({s})" if ctx > 2 else s


class Pow(_Binary):
    __slots__ = ()

    def _ev(self, b, tol):
        base = self.left._ev(b, tol)
        expo = self.right._ev(b, tol)
        if expo < 0.0 and (base == 0.0 or abs(base) < tol):
            raise DomainError("zero raised to a negative power", self)
        try:
            out = math.pow(base, expo)
        except ValueError:
            raise DomainError("invalid power (negative base, fractional exponent)", self) from None
        except OverflowError:
            raise DomainError("power overflow", self) from None
        if not math.isfinite(out):
            raise DomainError("power overflow", self)
        return out

    def _diff(self, var):
        u, v = self.left, self.right
        if isinstance(v, Const):
            # c * u^(c-1) * u'
            return mul(mul(v, power(u, Const(v.value - 1.0))), differentiate(u, var))
        # u^v * (v' log u + v u'/u)
        term = add(mul(differentiate(v, var), call("log", u)),
                   mul(v, div(differentiate(u, var), u)))
        return mul(self, term)

    def _sub(self, mapping):
        return power(self.left._sub(mapping), self.right._sub(mapping))

    def _fmt(self, ctx):
        s = f"{self.left._fmt(5)}^{self.right._fmt(4)}"
        return f"({s})" if ctx > 4 else s


class Neg(Expr):
    __slots__ = ("arg",)

    def __init__(self, arg):
        object.__setattr__(self, "arg", arg)

    def __setattr__(self, name, value):
        raise AttributeError("Expr nodes are immutable")

    def _ev(self, b, tol):
        return -self.arg._ev(b, tol)

    def _fv(self, out):
        self.arg._fv(out)

    def _diff(self, var):
        return neg(differentiate(self.arg, var))

    def _sub(self, mapping):
        return neg(self.arg._sub(mapping))

    def _fmt(self, ctx):
        s = f"-{self.arg._fmt(3)}"
        return f"({s})" if ctx > 3 else s


_FUNCTIONS = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "arctan": math.atan,
    "sqrt": math.sqrt,
    "exp": math.exp,
    "log": math.log,
}

FUNCTION_NAMES = frozenset(_FUNCTIONS)


class Call(Expr):
    __slots__ = ("func", "arg")

    def __init__(self, func, arg):
        if func not in _FUNCTIONS:
            raise ValueError(f"unknown function '{func}'")
        object.__setattr__(self, "func", func)
        object.__setattr__(self, "arg", arg)

    def __setattr__(self, name, value):
        raise AttributeError("Expr nodes are immutable")

    def _ev(self, b, tol):
        x = self.arg._ev(b, tol)
        if self.func == "sqrt" and x < 0.0:
            raise DomainError("sqrt of a negative number", self)
        if self.func == "log" and x <= 0.0:
            raise DomainError("log of a non-positive number", self)
        try:
            out = _FUNCTIONS[self.func](x)
        except ValueError:
            raise DomainError(f"{self.func} domain error", self) from None
        except OverflowError:
            raise DomainError(f"{self.func} overflow", self) from None
        if not math.isfinite(out):
            raise DomainError(f"{self.func} overflow", self)
        return out

    def _fv(self, out):
        self.arg._fv(out)

    def _diff(self, var):
        u = self.arg
        du = differentiate(u, var)
        f = self.func
        if f == "sin":
            outer = call("cos", u)
        elif f == "cos":
            outer = neg(call("sin", u))
        elif f == "tan":
            outer = div(Const(1.0), power(call("cos", u), Const(2.0)))
        elif f == "arctan":
            outer = div(Const(1.0), add(Const(1.0), power(u, Const(2.0))))
        elif f == "sqrt":
            outer = div(Const(0.5), call("sqrt", u))
        elif f == "exp":
            outer = self
        else:  # log
            outer = div(Const(1.0), u)
        return mul(outer, du)

    def _sub(self, mapping):
        return call(self.func, self.arg._sub(mapping))

    def _fmt(self, ctx):
        return f"{self.func}({self.arg._fmt(0)})"


class External(Expr):
    """A numeric function object embedded in an expression tree.

    ``fn`` must be callable on floats (one per argument expression) and
    provide ``partial(i)`` returning the function object for its i-th
    partial derivative, so that symbolic differentiation can proceed
    through it.  Used for quadrature-backed solution objects whose
    values have no closed form.  Printable but not re-parseable.
    """

    __slots__ = ("fn", "args")

    def __init__(self, fn, args):
        object.__setattr__(self, "fn", fn)
        object.__setattr__(self, "args", tuple(args))

    def __setattr__(self, name, value):
        raise AttributeError("Expr nodes are immutable")

    def _ev(self, b, tol):
        return self.fn(*[a._ev(b, tol) for a in self.args])

    def _fv(self, out):
        for a in self.args:
            a._fv(out)

    def _diff(self, var):
        total = Const(0.0)
        for i, a in enumerate(self.args):
            if var in a.free_vars():
                term = mul(External(self.fn.partial(i), self.args),
                           differentiate(a, var))
                total = add(total, term)
        return total

    def _sub(self, mapping):
        return External(self.fn, tuple(a._sub(mapping) for a in self.args))

    def _fmt(self, ctx):
        name = getattr(self.fn, "name", None) or type(self.fn).__name__
        inner = ", ".join(a._fmt(0) for a in self.args)
        return f"{name}({inner})"


# ---------------------------------------------------------------------------
# Smart constructors.  They fold constants and the obvious identities
# (x+0, 1*x, x^1, ...) and nothing else.

def as_expr(x):
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float)):
        return Const(x)
    raise TypeError(f"cannot convert {type(x).__name__} to Expr")


def add(a, b):
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if isinstance(a, Const) and a.value == 0.0:
        return b
    if isinstance(b, Const) and b.value == 0.0:
        return a
    return Add(a, b)


def sub(a, b):
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if isinstance(b, Const) and b.value == 0.0:
        return a
    if isinstance(a, Const) and a.value == 0.0:
        return neg(b)
    return Sub(a, b)


def mul(a, b):
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if isinstance(a, Const):
        if a.value == 0.0:
            return Const(0.0)
        if a.value == 1.0:
            return b
        if a.value == -1.0:
            return neg(b)
    if isinstance(b, Const):
        if b.value == 0.0:
            return Const(0.0)
        if b.value == 1.0:
            return a
        if b.value == -1.0:
            return neg(a)
    return Mul(a, b)


def div(a, b):
    if isinstance(b, Const) and b.value != 0.0:
        if isinstance(a, Const):
            return Const(a.value / b.value)
        if b.value == 1.0:
            return a
    if isinstance(a, Const) and a.value == 0.0 and not (isinstance(b, Const) and b.value == 0.0):
        return Const(0.0)
    return Div(a, b)


def power(a, b):
    if isinstance(a, Const) and isinstance(b, Const):
        try:
            out = math.pow(a.value, b.value)
            if math.isfinite(out):
                return Const(out)
        except (ValueError, OverflowError):
            pass  # keep the node; evaluation reports the domain error
    if isinstance(b, Const):
        if b.value == 1.0:
            return a
        if b.value == 0.0:
            return Const(1.0)
    return Pow(a, b)


def neg(a):
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def call(func, arg):
    if func not in _FUNCTIONS:
        raise ValueError(f"unknown function '{func}'")
    return Call(func, arg)


# ---------------------------------------------------------------------------
# Module-level operations.

def parse(text):
    """Parse ``text`` into an Expr.  Raises ParseError with a byte offset."""
    return _Parser(text).parse()


def evaluate(e, bindings, singular_tol=0.0):
    return e._ev(bindings, singular_tol)


def differentiate(e, var):
    """Exact partial derivative.  Absent variables give the zero Expr."""
    if var not in e.free_vars():
        return Const(0.0)
    return e._diff(var)


def substitute(e, mapping):
    """Replace variables by expressions (or numbers), folding constants."""
    if not mapping:
        return e
    return e._sub(mapping)


def free_vars(e):
    return e.free_vars()


# ---------------------------------------------------------------------------
# Recursive-descent parser.
#
#   sum    := term (('+'|'-') term)*
#   term   := unary (('*'|'/') unary)*
#   unary  := '-' unary | power
#   power  := atom ('^' unary)?          right-associative
#   atom   := number | ident | ident '(' sum ')' | '(' sum ')'

_NUMBER_RE = re.compile(r"(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][+-]?[0-9]+)?")
_IDENT_RE = re.compile(r"[a-zA-Z][a-zA-Z0-9_]*")


class _Parser:
    def __init__(self, text):
        self.text = text
        self.pos = 0

    def parse(self):
        e = self._sum()
        self._skip_ws()
        if self.pos != len(self.text):
            raise ParseError(f"unexpected '{self.text[self.pos]}'", self.pos)
        return e

    def _skip_ws(self):
        t, n = self.text, len(self.text)
        while self.pos < n and t[self.pos] in " \t\r\n":
            self.pos += 1

    def _peek(self):
        self._skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def _sum(self):
        e = self._term()
        while True:
            c = self._peek()
            if c == "+":
                self.pos += 1
                e = add(e, self._term())
            elif c == "-":
                self.pos += 1
                e = sub(e, self._term())
            else:
                return e

    def _term(self):
        e = self._unary()
        while True:
            c = self._peek()
            if c == "*":
                self.pos += 1
                e = mul(e, self._unary())
            elif c == "/":
                self.pos += 1
                e = div(e, self._unary())
            else:
                return e

    def _unary(self):
        if self._peek() == "-":
            self.pos += 1
            return neg(self._unary())
        return self._power()

    def _power(self):
        e = self._atom()
        if self._peek() == "^":
            self.pos += 1
            # exponent parsed as unary: '^' binds tighter than prefix '-',
            # but 'x^-2' is still accepted
            return power(e, self._unary())
        return e

    def _atom(self):
        c = self._peek()
        if c == "":
            raise ParseError("unexpected end of input", len(self.text))
        if c == "(":
            self.pos += 1
            e = self._sum()
            if self._peek() != ")":
                raise ParseError("expected ')'", self.pos)
            self.pos += 1
            return e
        m = _NUMBER_RE.match(self.text, self.pos)
        if m:
            self.pos = m.end()
            return Const(float(m.group()))
        m = _IDENT_RE.match(self.text, self.pos)
        if m:
            name = m.group()
            start = self.pos
            self.pos = m.end()
            if self._peek() == "(":
                if name not in _FUNCTIONS:
                    raise UnknownFunctionError(name, start)
                self.pos += 1
                arg = self._sum()
                if self._peek() != ")":
                    raise ParseError("expected ')'", self.pos)
                self.pos += 1
                return Call(name, arg)
            return Var(name)
        raise ParseError(f"unexpected '{c}'", self.pos)
