import numpy as np
import pytest

from polyflow.poly import ParseError, Polynomial, monomial, parse_polynomial


def x(i, n):
    return Polynomial.variable(i, n)


def random_polynomial(rng, nvars, max_degree, max_terms=8):
    terms = {}
    for _ in range(rng.integers(1, max_terms + 1)):
        degree = int(rng.integers(0, max_degree + 1))
        exps = {}
        for _ in range(degree):
            v = int(rng.integers(0, nvars))
            exps[v] = exps.get(v, 0) + 1
        terms[monomial(exps)] = float(rng.uniform(-1, 1))
    return Polynomial(nvars, terms)


class TestEval:
    def test_two_term(self):
        p = x(0, 2) ** 2 + 2 * x(0, 2) * x(1, 2)
        assert p((1.0, 2.0)) == 5.0

    def test_zero_polynomial(self):
        assert Polynomial.zero(3)((1.0, 2.0, 3.0)) == 0.0

    def test_quartic_energy(self):
        p = 0.5 * x(0, 2) ** 2 + 0.25 * x(1, 2) ** 4
        assert p((1.0, 1.0)) == 0.75

    def test_dimension_mismatch(self):
        p = x(0, 2)
        with pytest.raises(ValueError, match="length"):
            p((1.0, 2.0, 3.0))


class TestPartial:
    def test_quartic_gradient_component(self):
        p = 0.5 * x(0, 2) ** 2 + 0.25 * x(1, 2) ** 4
        assert p.partial(1) == x(1, 2) ** 3

    def test_constant(self):
        assert Polynomial.constant(3.0, 2).partial(0) == Polynomial.zero(2)

    def test_product(self):
        p = x(0, 2) * x(1, 2)
        assert p.partial(0) == x(1, 2)


class TestArithmetic:
    def test_cancellation(self):
        p = x(0, 2) + x(1, 2)
        assert (p - p) == Polynomial.zero(2)
        assert (p - p).degree == -1

    def test_difference_of_squares(self):
        p = (x(0, 2) + x(1, 2)) * (x(0, 2) - x(1, 2))
        assert p == x(0, 2) ** 2 - x(1, 2) ** 2

    def test_scale(self):
        assert 0.25 * x(1, 2) ** 4 == x(1, 2) ** 4 * 0.25

    def test_space_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            x(0, 2) + x(0, 3)

    def test_pow(self):
        p = x(0, 1) + 1
        assert p**3 == p * p * p
        assert p**0 == Polynomial.constant(1.0, 1)


class TestSubstitute:
    def test_quartic_consistency(self):
        # 3-variable space (x1, x2, y); map y -> x2^2 into the 2-variable space
        reduced = 0.5 * x(0, 3) ** 2 + 0.25 * x(2, 3) ** 2
        image = x(1, 2) ** 2
        expanded = reduced.substitute({2: image})
        assert expanded == 0.5 * x(0, 2) ** 2 + 0.25 * x(1, 2) ** 4

    def test_identity(self):
        p = x(0, 2) ** 2 + x(1, 2)
        assert p.substitute({0: x(0, 2), 1: x(1, 2)}) == p

    def test_product_binding(self):
        p = x(0, 2) * x(1, 2)
        assert p.substitute({1: x(0, 2) * x(1, 2)}) == x(0, 2) ** 2 * x(1, 2)

    def test_unbound_variable_outside_target(self):
        p = x(2, 3)
        with pytest.raises(ValueError, match="unbound"):
            p.substitute({0: x(0, 2)})


class TestParse:
    def test_basic(self):
        p = parse_polynomial("0.5*x1^2 + 0.25*x2^4", 2)
        assert len(p.terms) == 2
        assert p.degree == 4
        assert p == 0.5 * x(0, 2) ** 2 + 0.25 * x(1, 2) ** 4

    def test_cancellation(self):
        assert parse_polynomial("x1 - x1", 2).is_zero()

    def test_index_zero_rejected(self):
        with pytest.raises(ParseError, match="start at x1"):
            parse_polynomial("x0 + 1", 2)

    def test_index_exceeds_dimension(self):
        with pytest.raises(ParseError, match="exceeds"):
            parse_polynomial("x3", 2)

    def test_error_location(self):
        with pytest.raises(ParseError) as err:
            parse_polynomial("x1 + @", 2)
        assert err.value.line == 1
        assert err.value.column == 6

    def test_error_location_second_line(self):
        with pytest.raises(ParseError) as err:
            parse_polynomial("x1 +\n x2 ^ y", 2)
        assert err.value.line == 2

    def test_leading_minus(self):
        assert parse_polynomial("-x2^3", 2) == -(x(1, 2) ** 3)

    def test_scientific_number(self):
        p = parse_polynomial("1.5e-3*x1 + 2E2", 1)
        assert p.terms[monomial({0: 1})] == 1.5e-3
        assert p.terms[()] == 200.0

    def test_number_must_lead(self):
        with pytest.raises(ParseError):
            parse_polynomial("x1*2", 2)

    def test_trailing_junk(self):
        with pytest.raises(ParseError):
            parse_polynomial("x1 x2", 2)


class TestPrint:
    def test_quartic(self):
        p = 0.25 * x(1, 2) ** 4 + 0.5 * x(0, 2) ** 2
        assert str(p) == "0.5*x1^2 + 0.25*x2^4"

    def test_zero(self):
        assert str(Polynomial.zero(2)) == "0"

    def test_negative_and_unit_coeffs(self):
        p = x(0, 2) - x(1, 2) ** 2
        assert str(p) == "x1 - x2^2"

    def test_roundtrip_random(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            nvars = int(rng.integers(1, 5))
            p = random_polynomial(rng, nvars, 6)
            assert parse_polynomial(str(p), nvars) == p


def random_dyadic_polynomial(rng, nvars, max_degree, max_terms=5):
    """Random polynomial whose coefficients make float arithmetic exact."""
    p = random_polynomial(rng, nvars, max_degree, max_terms)
    return Polynomial(p.nvars, {m: float(round(c * 16)) / 16 for m, c in p.terms.items()})


class TestRingAxioms:
    def test_axioms_random(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            n = int(rng.integers(1, 4))
            p = random_polynomial(rng, n, 4, 5)
            q = random_polynomial(rng, n, 4, 5)
            r = random_polynomial(rng, n, 4, 5)
            assert p + q == q + p
            assert p * q == q * p
            assert (p + q) + r == p + (q + r)
            # distributivity recombines rounded products, so allow 1 ulp slack
            assert (p * (q + r)).allclose(p * q + p * r, 1e-13)

    def test_axioms_exact_on_dyadics(self):
        rng = np.random.default_rng(12)
        for _ in range(100):
            n = int(rng.integers(1, 4))
            p = random_dyadic_polynomial(rng, n, 3)
            q = random_dyadic_polynomial(rng, n, 3)
            r = random_dyadic_polynomial(rng, n, 3)
            assert (p * q) * r == p * (q * r)
            assert p * (q + r) == p * q + p * r

    def test_leibniz_exact(self):
        rng = np.random.default_rng(13)
        for _ in range(100):
            n = int(rng.integers(1, 4))
            p = random_polynomial(rng, n, 4, 4)
            q = random_polynomial(rng, n, 4, 4)
            v = int(rng.integers(0, n))
            lhs = (p * q).partial(v)
            rhs = p.partial(v) * q + p * q.partial(v)
            assert lhs.allclose(rhs, 1e-13)


class TestEvalSubstituteProperty:
    def test_agreement(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            n = int(rng.integers(1, 4))
            p = random_polynomial(rng, n, 5)
            bindings = {v: random_polynomial(rng, n, 2, 3) for v in range(n)}
            point = rng.uniform(-1, 1, size=n).tolist()
            substituted = p.substitute(bindings)
            direct = p([bindings[v](point) for v in range(n)])
            assert substituted(point) == pytest.approx(direct, rel=1e-12, abs=1e-12)


class TestWiden:
    def test_widen_preserves_eval(self):
        p = x(0, 2) * x(1, 2)
        q = p.widen(4)
        assert q.nvars == 4
        assert q((2.0, 3.0, 9.0, 9.0)) == 6.0

    def test_narrow_rejected(self):
        with pytest.raises(ValueError):
            x(1, 2).widen(1)
