"""Sparse multivariate polynomials over float coefficients.

A polynomial lives in a variable space of fixed dimension ``nvars``.
Variables are addressed by 0-based indices internally; the text grammar
uses the 1-based names ``x1, x2, ...``.  Monomials are stored sparsely as
tuples of ``(variable, exponent)`` pairs sorted by variable index, with no
zero exponents.  Terms with coefficient exactly ``0.0`` are never stored,
so the zero polynomial has no terms and (by convention) degree -1.

Polynomials are immutable and safe to share between threads; every
operation returns a new instance.
"""

from __future__ import annotations

from typing import Iterable, Mapping, Sequence

__all__ = [
    "Monomial",
    "Polynomial",
    "ParseError",
    "monomial",
    "monomial_degree",
    "parse_polynomial",
]

# ((var, exp), ...) sorted by var, all exponents >= 1; () is the constant monomial
Monomial = tuple[tuple[int, int], ...]


def monomial(exponents: Mapping[int, int] | Iterable[tuple[int, int]]) -> Monomial:
    """Build a canonical monomial key from ``{var: exp}`` or (var, exp) pairs."""
    items = exponents.items() if isinstance(exponents, Mapping) else exponents
    acc: dict[int, int] = {}
    for var, exp in items:
        if var < 0:
            raise ValueError(f"negative variable index {var}")
        if exp < 0:
            raise ValueError(f"negative exponent {exp} for variable {var}")
        if exp:
            acc[var] = acc.get(var, 0) + exp
    return tuple(sorted(acc.items()))


def monomial_degree(mono: Monomial) -> int:
    return sum(e for _, e in mono)


def _mul_monomials(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    acc = dict(a)
    for var, exp in b:
        acc[var] = acc.get(var, 0) + exp
    return tuple(sorted(acc.items()))


class Polynomial:
    """Immutable sparse polynomial in a fixed-dimension variable space."""

    __slots__ = ("nvars", "_terms", "_ordered")

    def __init__(self, nvars: int, terms: Mapping[Monomial, float] | None = None):
        if nvars < 0:
            raise ValueError("variable space dimension must be >= 0")
        self.nvars = nvars
        clean: dict[Monomial, float] = {}
        if terms:
            for mono, coeff in terms.items():
                coeff = float(coeff)
                if coeff == 0.0:
                    continue
                if mono and mono[-1][0] >= nvars:
                    raise ValueError(
                        f"monomial uses variable x{mono[-1][0] + 1} outside space of dimension {nvars}"
                    )
                clean[mono] = coeff
        self._terms = clean
        self._ordered: tuple[tuple[float, Monomial], ...] | None = None

    # -- construction helpers -------------------------------------------------

    @classmethod
    def zero(cls, nvars: int) -> "Polynomial":
        return cls(nvars)

    @classmethod
    def constant(cls, value: float, nvars: int) -> "Polynomial":
        return cls(nvars, {(): float(value)})

    @classmethod
    def variable(cls, index: int, nvars: int) -> "Polynomial":
        if not 0 <= index < nvars:
            raise ValueError(f"variable index {index} outside space of dimension {nvars}")
        return cls(nvars, {((index, 1),): 1.0})

    @classmethod
    def _raw(cls, nvars: int, terms: dict[Monomial, float]) -> "Polynomial":
        # internal fast path: terms already canonical and zero-free
        p = cls.__new__(cls)
        p.nvars = nvars
        p._terms = terms
        p._ordered = None
        return p

    # -- basic queries ---------------------------------------------------------

    @property
    def terms(self) -> dict[Monomial, float]:
        """Copy of the term map (monomial -> coefficient)."""
        return dict(self._terms)

    @property
    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        if not self._terms:
            return -1
        return max(monomial_degree(m) for m in self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def variables(self) -> set[int]:
        used: set[int] = set()
        for mono in self._terms:
            used.update(v for v, _ in mono)
        return used

    def max_abs_coeff(self) -> float:
        return max((abs(c) for c in self._terms.values()), default=0.0)

    def _order_key(self, mono: Monomial):
        dense = [0] * self.nvars
        for var, exp in mono:
            dense[var] = exp
        return (monomial_degree(mono), tuple(-e for e in dense))

    def ordered_terms(self) -> tuple[tuple[float, Monomial], ...]:
        """Terms in graded-lex order (ascending degree, x1-heavy first)."""
        if self._ordered is None:
            order = sorted(self._terms, key=self._order_key)
            self._ordered = tuple((self._terms[m], m) for m in order)
        return self._ordered

    # -- evaluation ------------------------------------------------------------

    def __call__(self, point: Sequence[float]) -> float:
        """Evaluate at ``point`` (length must equal ``nvars``), in canonical term order."""
        if len(point) != self.nvars:
            raise ValueError(f"point has length {len(point)}, expected {self.nvars}")
        total = 0.0
        for coeff, mono in self.ordered_terms():
            value = coeff
            for var, exp in mono:
                value *= point[var] ** exp
            total += value
        return total

    # -- arithmetic ------------------------------------------------------------

    def _check_space(self, other: "Polynomial") -> None:
        if self.nvars != other.nvars:
            raise ValueError(
                f"variable space mismatch: {self.nvars} vs {other.nvars} dimensions"
            )

    def __add__(self, other) -> "Polynomial":
        if isinstance(other, (int, float)):
            other = Polynomial.constant(other, self.nvars)
        if not isinstance(other, Polynomial):
            return NotImplemented
        self._check_space(other)
        acc = dict(self._terms)
        for mono, coeff in other._terms.items():
            c = acc.get(mono, 0.0) + coeff
            if c == 0.0:
                acc.pop(mono, None)
            else:
                acc[mono] = c
        return Polynomial._raw(self.nvars, acc)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial._raw(self.nvars, {m: -c for m, c in self._terms.items()})

    def __sub__(self, other) -> "Polynomial":
        if isinstance(other, (int, float)):
            other = Polynomial.constant(other, self.nvars)
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.__add__(-other)

    def __rsub__(self, other) -> "Polynomial":
        return (-self).__add__(other)

    def __mul__(self, other) -> "Polynomial":
        if isinstance(other, (int, float)):
            c = float(other)
            if c == 0.0:
                return Polynomial.zero(self.nvars)
            return Polynomial._raw(self.nvars, {m: c * v for m, v in self._terms.items()})
        if not isinstance(other, Polynomial):
            return NotImplemented
        self._check_space(other)
        # gather contributions per monomial and sum them value-sorted, so the
        # result is independent of operand order (exact commutativity)
        acc: dict[Monomial, list[float]] = {}
        for ma, ca in self._terms.items():
            for mb, cb in other._terms.items():
                acc.setdefault(_mul_monomials(ma, mb), []).append(ca * cb)
        out: dict[Monomial, float] = {}
        for mono, contributions in acc.items():
            contributions.sort()
            c = 0.0
            for value in contributions:
                c += value
            if c != 0.0:
                out[mono] = c
        return Polynomial._raw(self.nvars, out)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Polynomial":
        if isinstance(other, (int, float)):
            return self.__mul__(1.0 / float(other))
        return NotImplemented

    def __pow__(self, exponent: int) -> "Polynomial":
        if not isinstance(exponent, int) or exponent < 0:
            raise ValueError("polynomial exponent must be a nonnegative integer")
        result = Polynomial.constant(1.0, self.nvars)
        base = self
        e = exponent
        while e:
            if e & 1:
                result = result * base
            base = base * base if e > 1 else base
            e >>= 1
        return result

    # -- calculus --------------------------------------------------------------

    def partial(self, var: int) -> "Polynomial":
        """Formal partial derivative with respect to variable ``var``."""
        if not 0 <= var < self.nvars:
            raise ValueError(f"variable index {var} outside space of dimension {self.nvars}")
        acc: dict[Monomial, float] = {}
        for mono, coeff in self._terms.items():
            for i, (v, e) in enumerate(mono):
                if v == var:
                    if e == 1:
                        reduced = mono[:i] + mono[i + 1 :]
                    else:
                        reduced = mono[:i] + ((v, e - 1),) + mono[i + 1 :]
                    c = acc.get(reduced, 0.0) + coeff * e
                    if c == 0.0:
                        acc.pop(reduced, None)
                    else:
                        acc[reduced] = c
                    break
        return Polynomial._raw(self.nvars, acc)

    def gradient(self, variables: Iterable[int] | None = None) -> list["Polynomial"]:
        """Vector of partial derivatives (all variables by default)."""
        if variables is None:
            variables = range(self.nvars)
        return [self.partial(v) for v in variables]

    # -- substitution ----------------------------------------------------------

    def substitute(
        self,
        bindings: Mapping[int, "Polynomial"],
        nvars: int | None = None,
    ) -> "Polynomial":
        """Replace bound variables by polynomials and expand fully.

        All binding images must live in one common target space; unbound
        variables must exist in the target space.  With ``nvars`` the target
        dimension can be forced explicitly.
        """
        target = nvars
        for var, image in bindings.items():
            if not 0 <= var < self.nvars:
                raise ValueError(f"bound variable x{var + 1} outside source space")
            if target is None:
                target = image.nvars
            elif image.nvars != target:
                raise ValueError(
                    f"binding images live in different spaces ({image.nvars} vs {target})"
                )
        if target is None:
            target = self.nvars
        result = Polynomial.zero(target)
        for mono, coeff in self._terms.items():
            term = Polynomial.constant(coeff, target)
            for var, exp in mono:
                image = bindings.get(var)
                if image is None:
                    if var >= target:
                        raise ValueError(
                            f"unbound variable x{var + 1} absent from target space "
                            f"of dimension {target}"
                        )
                    image = Polynomial.variable(var, target)
                term = term * image**exp
            result = result + term
        return result

    def widen(self, nvars: int) -> "Polynomial":
        """Reinterpret in a larger variable space (same terms)."""
        if nvars < self.nvars:
            used = self.variables()
            if used and max(used) >= nvars:
                raise ValueError("cannot narrow below the variables actually used")
        return Polynomial._raw(nvars, dict(self._terms))

    # -- comparison ------------------------------------------------------------

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.nvars == other.nvars and self._terms == other._terms

    __hash__ = None  # mutable-dict backed; not hashable

    def allclose(self, other: "Polynomial", rel_tol: float = 1e-12) -> bool:
        """Coefficient-wise comparison relative to the largest coefficient."""
        self._check_space(other)
        scale = max(self.max_abs_coeff(), other.max_abs_coeff(), 1.0)
        for mono in self._terms.keys() | other._terms.keys():
            a = self._terms.get(mono, 0.0)
            b = other._terms.get(mono, 0.0)
            if abs(a - b) > rel_tol * scale:
                return False
        return True

    # -- printing --------------------------------------------------------------

    @staticmethod
    def _format_term(coeff: float, mono: Monomial) -> str:
        factors = [f"x{v + 1}" if e == 1 else f"x{v + 1}^{e}" for v, e in mono]
        if not factors:
            return repr(coeff)
        if coeff == 1.0:
            return "*".join(factors)
        return "*".join([repr(coeff)] + factors)

    def __str__(self) -> str:
        if not self._terms:
            return "0"
        parts: list[str] = []
        for coeff, mono in self.ordered_terms():
            if not parts:
                body = self._format_term(abs(coeff), mono)
                parts.append("-" + body if coeff < 0 else body)
            else:
                parts.append(" - " if coeff < 0 else " + ")
                parts.append(self._format_term(abs(coeff), mono))
        return "".join(parts)

    def __repr__(self) -> str:
        return f"Polynomial({self.nvars}, {self!s})"


# -- parsing -------------------------------------------------------------------


class ParseError(ValueError):
    """Syntax or dimension error in polynomial text, with location."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


_NUMBER_CHARS = set("0123456789.")


class _Lexer:
    """Tokenizer for the polynomial grammar (whitespace insignificant)."""

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def _location(self, pos: int) -> tuple[int, int]:
        line = self.text.count("\n", 0, pos) + 1
        last_nl = self.text.rfind("\n", 0, pos)
        return line, pos - last_nl

    def error(self, message: str, pos: int | None = None) -> ParseError:
        line, col = self._location(self.pos if pos is None else pos)
        return ParseError(message, line, col)

    def next_token(self) -> tuple[str, str, int]:
        """Return (kind, text, pos); kind in num/var/op/end."""
        text = self.text
        n = len(text)
        while self.pos < n and text[self.pos].isspace():
            self.pos += 1
        if self.pos >= n:
            return ("end", "", self.pos)
        start = self.pos
        ch = text[start]
        if ch in "+-*^":
            self.pos += 1
            return ("op", ch, start)
        if ch == "x":
            i = start + 1
            while i < n and text[i].isdigit():
                i += 1
            if i == start + 1:
                raise self.error("expected variable index after 'x'", start)
            self.pos = i
            return ("var", text[start:i], start)
        if ch in _NUMBER_CHARS:
            i = start
            seen_dot = False
            while i < n and (text[i].isdigit() or (text[i] == "." and not seen_dot)):
                seen_dot = seen_dot or text[i] == "."
                i += 1
            if i == start or text[start:i] == ".":
                raise self.error(f"malformed number near {text[start:i + 1]!r}", start)
            if i < n and text[i] in "eE":
                j = i + 1
                if j < n and text[j] in "+-":
                    j += 1
                if j >= n or not text[j].isdigit():
                    raise self.error("malformed exponent part in number", i)
                while j < n and text[j].isdigit():
                    j += 1
                i = j
            self.pos = i
            return ("num", text[start:i], start)
        raise self.error(f"unexpected character {ch!r}", start)


class _Parser:
    """Recursive-descent parser for ``expr := term (('+'|'-') term)*``.

    A term is ``number ('*' factor)*`` or ``factor ('*' factor)*`` with
    ``factor := 'x' INT ('^' INT)?``.  As a convenience an optional leading
    sign is accepted at the start of each term.
    """

    def __init__(self, text: str, nvars: int):
        self.lexer = _Lexer(text)
        self.nvars = nvars
        self.kind, self.value, self.tokpos = self.lexer.next_token()

    def _advance(self) -> None:
        self.kind, self.value, self.tokpos = self.lexer.next_token()

    def _error(self, message: str) -> ParseError:
        return self.lexer.error(message, self.tokpos)

    def parse(self) -> Polynomial:
        acc: dict[Monomial, float] = {}
        self._term(acc, self._leading_sign())
        while self.kind == "op" and self.value in "+-":
            sign = -1.0 if self.value == "-" else 1.0
            self._advance()
            self._term(acc, sign * self._leading_sign())
        if self.kind != "end":
            raise self._error(f"unexpected {self.value!r}")
        return Polynomial(self.nvars, acc)

    def _leading_sign(self) -> float:
        sign = 1.0
        while self.kind == "op" and self.value in "+-":
            if self.value == "-":
                sign = -sign
            self._advance()
        return sign

    def _term(self, acc: dict[Monomial, float], sign: float) -> None:
        coeff = sign
        exps: dict[int, int] = {}
        if self.kind == "num":
            coeff *= float(self.value)
            self._advance()
        elif self.kind == "var":
            self._factor(exps)
        else:
            raise self._error("expected a number or a variable")
        while self.kind == "op" and self.value == "*":
            self._advance()
            if self.kind != "var":
                raise self._error("expected a variable after '*'")
            self._factor(exps)
        mono = tuple(sorted((v, e) for v, e in exps.items() if e))
        c = acc.get(mono, 0.0) + coeff
        if c == 0.0:
            acc.pop(mono, None)
        else:
            acc[mono] = c

    def _factor(self, exps: dict[int, int]) -> None:
        index = int(self.value[1:])
        if index == 0:
            raise self._error("variable indices start at x1")
        if index > self.nvars:
            raise self._error(
                f"variable x{index} exceeds declared dimension {self.nvars}"
            )
        self._advance()
        exp = 1
        if self.kind == "op" and self.value == "^":
            self._advance()
            if self.kind != "num" or not self.value.isdigit():
                raise self._error("expected an integer exponent after '^'")
            exp = int(self.value)
            self._advance()
        var = index - 1
        exps[var] = exps.get(var, 0) + exp


def parse_polynomial(text: str, nvars: int) -> Polynomial:
    """Parse polynomial text with 1-based variables ``x1..x<nvars>``."""
    return _Parser(text, nvars).parse()
