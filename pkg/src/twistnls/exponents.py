"""
Exponent tuples and admissibility checks, in exact rational arithmetic.

Tuples are stored through reciprocals (``inv_q = 1/q`` and so on), which
keeps ``q = inf`` exact as ``inv_q = 0``.  Every validator returns a
:class:`ValidationReport` whose margins are signed distances to the
constraint boundary: positive means satisfied with room to spare, zero is
on the boundary (a failure for strict inequalities) and negative is a
violation.
"""

from dataclasses import dataclass, field
from fractions import Fraction
import math

from .errors import ValidationError

__all__ = [
    "ExponentTuple",
    "Condition",
    "ValidationReport",
    "DeltaInterval",
    "to_fraction",
    "reciprocal",
    "main_exponents",
    "uniqueness_exponents_case1",
    "uniqueness_exponents_case2",
    "validate_inhomogeneous_strichartz",
    "validate_homogeneous_strichartz",
    "validate_fefferman_stein",
    "validate_decay_embedding",
    "validate_duhamel_weighted",
    "validate_main_tuple",
    "validate_uniqueness_tuple",
    "threshold_sc",
    "feasible_delta_range",
    "format_exponent",
]

HALF = Fraction(1, 2)


def to_fraction(x):
    """Exact rational for ints, Fractions, decimal strings and floats.

    Floats go through their shortest repr, so ``0.2`` becomes ``1/5``.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not exponents")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"{x} has no rational value")
    return Fraction(repr(x))


def reciprocal(x):
    """``1/x`` as a Fraction, with ``1/inf = 0``."""
    if isinstance(x, str) and x.strip().lower() in ("inf", "infinity", "∞"):
        return Fraction(0)
    if not isinstance(x, (Fraction, int, str)) and math.isinf(float(x)):
        if float(x) < 0:
            raise ValueError("exponents must be positive")
        return Fraction(0)
    x = to_fraction(x)
    if x == 0:
        raise ValueError("exponent 0 has no reciprocal here")
    return 1 / x


def _from_reciprocal(inv):
    if inv is None:
        return None
    return math.inf if inv == 0 else 1 / inv


def format_exponent(x):
    """Text form used in reports: ``'8/3'``, ``'16'``, ``'inf'``."""
    if x is None:
        return None
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return str(to_fraction(x))


@dataclass(frozen=True)
class ExponentTuple:
    """A record ``(p, s, q, r, gamma, rho, sigma, delta, kappa)``.

    Only ``p`` and ``s`` are stored directly; the remaining exponents are
    held as reciprocals and exposed as properties (``math.inf`` where the
    reciprocal is zero).
    """

    p: Fraction
    s: Fraction
    inv_q: Fraction
    inv_r: Fraction
    inv_gamma: Fraction
    inv_rho: Fraction
    inv_sigma: Fraction = None
    delta: Fraction = None
    inv_kappa: Fraction = None
    label: str = field(default="", compare=False)

    @property
    def q(self):
        return _from_reciprocal(self.inv_q)

    @property
    def r(self):
        return _from_reciprocal(self.inv_r)

    @property
    def gamma(self):
        return _from_reciprocal(self.inv_gamma)

    @property
    def rho(self):
        return _from_reciprocal(self.inv_rho)

    @property
    def sigma(self):
        return _from_reciprocal(self.inv_sigma)

    @property
    def kappa(self):
        return _from_reciprocal(self.inv_kappa)

    def as_dict(self):
        out = {"label": self.label, "p": str(self.p), "s": str(self.s)}
        for name in ("q", "r", "gamma", "rho", "sigma", "kappa"):
            out[name] = format_exponent(getattr(self, name))
        out["delta"] = None if self.delta is None else str(self.delta)
        return out


@dataclass(frozen=True)
class Condition:
    name: str
    expression: str
    margin: Fraction
    passed: bool

    def as_dict(self):
        return {
            "name": self.name,
            "expression": self.expression,
            "margin": str(self.margin),
            "passed": self.passed,
        }


@dataclass(frozen=True)
class ValidationReport:
    title: str
    conditions: tuple

    @property
    def overall(self):
        return all(c.passed for c in self.conditions)

    def __bool__(self):
        return self.overall

    @property
    def failed(self):
        return [c for c in self.conditions if not c.passed]

    @property
    def min_margin(self):
        return min(c.margin for c in self.conditions)

    def __getitem__(self, name):
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def merged(self, other, title=None):
        return ValidationReport(title or self.title, self.conditions + other.conditions)

    def as_dict(self):
        return {
            "title": self.title,
            "overall": self.overall,
            "conditions": [c.as_dict() for c in self.conditions],
        }

    def summary(self):
        bad = ", ".join(f"{c.name} ({c.expression}, margin {c.margin})" for c in self.failed)
        return f"{self.title}: " + ("all conditions hold" if self.overall else f"violated {bad}")


def _lt(name, lhs, rhs, text):
    m = rhs - lhs
    return Condition(name, f"{text}: {lhs} < {rhs}", m, m > 0)


def _le(name, lhs, rhs, text):
    m = rhs - lhs
    return Condition(name, f"{text}: {lhs} <= {rhs}", m, m >= 0)


def _eq(name, lhs, rhs, text):
    m = -abs(lhs - rhs)
    return Condition(name, f"{text}: {lhs} = {rhs}", m, m == 0)


def _range_ge2(name, inv):
    # 2 <= x <= inf  <=>  0 <= 1/x <= 1/2
    m = min(HALF - inv, inv)
    return Condition(name, f"2 <= {name} <= inf: 1/{name} = {inv} in [0, 1/2]", m, m >= 0)


def _range_1_2(name, inv):
    # 1 < x <= 2  <=>  1/2 <= 1/x < 1
    m = min(inv - HALF, 1 - inv)
    ok = inv >= HALF and inv < 1
    return Condition(name, f"1 < {name} <= 2: 1/{name} = {inv} in [1/2, 1)", m, ok)


# -- validators -------------------------------------------------------------


def validate_inhomogeneous_strichartz(q, r, gamma, rho):
    """Hypotheses of the inhomogeneous Strichartz estimate for non-admissible pairs."""
    iq, ir, ig, irho = (reciprocal(x) for x in (q, r, gamma, rho))
    return _inhomogeneous(iq, ir, ig, irho)


def _inhomogeneous(iq, ir, ig, irho):
    conds = (
        _range_ge2("q", iq),
        _range_ge2("r", ir),
        _range_1_2("gamma", ig),
        _range_1_2("rho", irho),
        _eq("scaling", 2 + 2 * iq + ir, 2 * ig + irho, "2 + 2/q + 1/r = 2/gamma + 1/rho"),
        _lt("non-admissible", iq + ir, HALF, "1/q + 1/r < 1/2"),
        _lt("gamma-lower", Fraction(3, 2) - irho, ig, "3/2 - 1/rho < 1/gamma"),
        _lt("gamma-upper", ig, Fraction(1), "1/gamma < 1"),
    )
    return ValidationReport("inhomogeneous Strichartz", conds)


def _p_range(p_inv, low_inv, text):
    # low < p <= 2  <=>  1/2 <= 1/p < 1/low
    m = min(p_inv - HALF, low_inv - p_inv)
    return Condition("p", f"{text}: 1/p = {p_inv}", m, p_inv >= HALF and p_inv < low_inv)


def validate_homogeneous_strichartz(p, q, r):
    """Hypotheses of the L^p-data homogeneous Strichartz estimate."""
    ip, iq, ir = (reciprocal(x) for x in (p, q, r))
    return _homogeneous(ip, iq, ir)


def _homogeneous(ip, iq, ir):
    conds = (
        _p_range(ip, Fraction(1), "1 < p <= 2"),
        _range_ge2("q", iq),
        _range_ge2("r", ir),
        _eq("scaling", 2 * iq + ir, ip, "2/q + 1/r = 1/p"),
        _lt("non-admissible", iq + ir, HALF, "1/q + 1/r < 1/2"),
    )
    return ValidationReport("homogeneous Strichartz", conds)


def validate_fefferman_stein(p, q, r):
    """Hypotheses of the Fourier-side (Fefferman-Stein type) Strichartz estimate."""
    ip, iq, ir = (reciprocal(x) for x in (p, q, r))
    return _fefferman_stein(ip, iq, ir)


def _fefferman_stein(ip, iq, ir, title="Fefferman-Stein"):
    conds = (
        _p_range(ip, Fraction(3, 4), "4/3 < p <= 2"),
        _range_ge2("q", iq),
        _range_ge2("r", ir),
        _eq("scaling", 2 * iq + ir, ip, "2/q + 1/r = 1/p"),
        _lt("q-finite", Fraction(0), iq, "0 < 1/q"),
        _lt("q-vs-r", iq, HALF - ir, "1/q < 1/2 - 1/r"),
        _lt("q-quarter", iq, Fraction(1, 4), "1/q < 1/4"),
    )
    return ValidationReport(title, conds)


def validate_duhamel_weighted(p, sigma, rho):
    """Weighted Duhamel estimate in L^sigma_t H^s_rho.

    Checked through the dual pair ``(sigma', rho')`` against the
    Fefferman-Stein hypotheses, i.e. the pair that actually appears in the
    weighted estimate.
    """
    ip, isig, irho = (reciprocal(x) for x in (p, sigma, rho))
    return _fefferman_stein(ip, 1 - isig, 1 - irho, title="weighted Duhamel (dual pair)")


def validate_decay_embedding(p, s, q, r):
    """Hypotheses of the twisted-norm embedding into ``L^q(I; L^r)``.

    ``q (1/p - 1/2) < 1`` is evaluated as ``1/p - 1/2 < 1/q``; when
    ``p = 2`` it holds for every ``q`` (the ``inf * 0 = 0`` convention).
    """
    ip, iq, ir = (reciprocal(x) for x in (p, q, r))
    return _decay(ip, to_fraction(s), iq, ir)


def _decay(ip, s, iq, ir):
    gap = ip - HALF
    time_margin = iq - gap
    conds = (
        _range_ge2("q", iq),
        _range_ge2("r", ir),
        Condition("p", f"1 <= p <= 2: 1/p = {ip}", min(ip - HALF, 1 - ip), HALF <= ip <= 1),
        _le("s-nonnegative", Fraction(0), s, "s >= 0"),
        _le("sobolev", 1 - ip - ir, s, "s >= 1 - 1/p - 1/r"),
        Condition(
            "time-integrability",
            f"q (1/p - 1/2) < 1: 1/p - 1/2 = {gap} vs 1/q = {iq}",
            time_margin if gap != 0 else Fraction(1),
            gap == 0 or time_margin > 0,
        ),
    )
    return ValidationReport("decay embedding", conds)


# -- tuples -----------------------------------------------------------------


def _check_box(p, s):
    ip = 1 / p
    if not (Fraction(4, 3) < p):
        raise ValidationError(f"p = {p} violates 4/3 < p")
    if not (p <= 2):
        raise ValidationError(f"p = {p} violates p <= 2")
    if not (s > 0):
        raise ValidationError(f"s = {s} violates 0 < s")
    upper = Fraction(3, 2) - 2 * ip
    if not (s < upper):
        raise ValidationError(f"s = {s} violates s < 3/2 - 2/p = {upper}")


def _main_tuple(p, s):
    ip = 1 / p
    return ExponentTuple(
        p=p,
        s=s,
        inv_q=ip / 2 - Fraction(1, 8) - s / 4,
        inv_r=(1 + 2 * s) / 4,
        inv_gamma=Fraction(5, 8) + s / 4 + ip / 2,
        inv_rho=Fraction(3, 4) - s / 2,
        inv_sigma=Fraction(9, 8) - ip / 2 + s / 4,
        inv_kappa=HALF - s,
        label="main",
    )


def main_exponents(p, s):
    """Exponents used to close the contraction argument in ``H^s_p``.

    Requires ``4/3 < p <= 2`` and ``0 < s < 3/2 - 2/p``.

    >>> t = main_exponents(2, Fraction(1, 4))
    >>> (t.q, t.r, t.gamma, t.rho, t.sigma)
    (Fraction(16, 1), Fraction(8, 3), Fraction(16, 15), Fraction(8, 5), Fraction(16, 15))
    """
    p, s = to_fraction(p), to_fraction(s)
    _check_box(p, s)
    return _main_tuple(p, s)


def validate_main_tuple(t):
    """The three reports a main tuple has to pass."""
    return {
        "inhomogeneous": _inhomogeneous(t.inv_q, t.inv_r, t.inv_gamma, t.inv_rho),
        "homogeneous": _homogeneous(1 / t.p, t.inv_q, t.inv_r),
        "duhamel_weighted": _fefferman_stein(
            1 / t.p, 1 - t.inv_sigma, 1 - t.inv_rho, title="weighted Duhamel (dual pair)"
        ),
    }


def _case1_tuple(p, delta):
    ip = 1 / p
    return ExponentTuple(
        p=p,
        s=delta,
        inv_q=ip - HALF + delta / 2,
        inv_r=1 - ip - delta,
        inv_rho=3 - 3 * ip - 3 * delta,
        inv_gamma=2 * ip - HALF + Fraction(3, 2) * delta,
        delta=delta,
        label="uniqueness case 1",
    )


def _case2_tuple(p, delta, variant):
    s = Fraction(2, 3) - 1 / p + delta
    if variant == "literal":
        inv_rho = 1 - Fraction(3, 2) * delta
        inv_gamma = Fraction(5, 6) + Fraction(3, 4) * delta
    elif variant == "consistent":
        inv_rho = 1 - 3 * delta
        inv_gamma = Fraction(5, 6) + Fraction(3, 2) * delta
    else:
        raise ValueError(f"unknown case-2 variant {variant!r}")
    return ExponentTuple(
        p=p,
        s=s,
        inv_q=Fraction(1, 6) + delta / 2,
        inv_r=Fraction(1, 3) - delta,
        inv_rho=inv_rho,
        inv_gamma=inv_gamma,
        delta=delta,
        label=f"uniqueness case 2 ({variant})",
    )


def validate_uniqueness_tuple(t):
    """Inhomogeneous Strichartz hypotheses plus the embedding hypotheses at ``s``."""
    rep = _inhomogeneous(t.inv_q, t.inv_r, t.inv_gamma, t.inv_rho)
    rep = rep.merged(_decay(1 / t.p, t.s, t.inv_q, t.inv_r))
    budget = t.inv_gamma - 3 * t.inv_q
    extra = (
        Condition(
            "delta-positive", f"delta > 0: delta = {t.delta}", t.delta, t.delta > 0
        ),
        Condition(
            "time-budget",
            f"1/gamma - 3/q = {budget} (>= 0 for the time Holder step)",
            budget,
            budget >= 0,
        ),
    )
    return ValidationReport(t.label, rep.conditions + extra)


def uniqueness_exponents_case1(p, delta):
    """Difference-estimate tuple for ``4/3 < p <= 3/2`` at slack ``delta``.

    By construction ``1/rho = 3/r`` and ``1/gamma - 3/q = 1 - 1/p``.
    """
    p, delta = to_fraction(p), to_fraction(delta)
    if not (Fraction(4, 3) < p <= Fraction(3, 2)):
        raise ValidationError(f"case 1 needs 4/3 < p <= 3/2, got p = {p}")
    t = _case1_tuple(p, delta)
    rep = validate_uniqueness_tuple(t)
    if not rep.overall:
        raise ValidationError(f"delta = {delta} is infeasible at p = {p}: {rep.summary()}", rep)
    return t


def uniqueness_exponents_case2(p, s):
    """Difference-estimate tuples for ``3/2 < p <= 2`` at ``s = 2/3 - 1/p + delta``.

    Returns ``{"literal": (tuple, report), "consistent": (tuple, report)}``.
    The literal variant uses ``1/rho = 1 - 3 delta/2``; the consistent one
    keeps ``1/rho = 3/r = 1 - 3 delta`` and solves the scaling relation for
    ``gamma``.  ``delta`` must be feasible for the literal variant.
    """
    p, s = to_fraction(p), to_fraction(s)
    if not (Fraction(3, 2) < p <= 2):
        raise ValidationError(f"case 2 needs 3/2 < p <= 2, got p = {p}")
    delta = s - (Fraction(2, 3) - 1 / p)
    out = {}
    for variant in ("literal", "consistent"):
        t = _case2_tuple(p, delta, variant)
        out[variant] = (t, validate_uniqueness_tuple(t))
    if not out["literal"][1].overall:
        raise ValidationError(
            f"s = {s} (delta = {delta}) is infeasible at p = {p}: {out['literal'][1].summary()}",
            out["literal"][1],
        )
    return out


def threshold_sc(p):
    """``max(0, 2/3 - 1/p)`` for ``1 <= p <= 2``."""
    p = to_fraction(p)
    if not (1 <= p <= 2):
        raise ValidationError(f"threshold defined for 1 <= p <= 2, got p = {p}")
    return max(Fraction(0), Fraction(2, 3) - 1 / p)


@dataclass(frozen=True)
class DeltaInterval:
    """Interval of admissible slack values; ``empty`` when none exist."""

    lower: Fraction
    upper: Fraction
    lower_closed: bool
    upper_closed: bool

    @property
    def empty(self):
        if self.lower is None or self.upper is None:
            return True
        if self.lower < self.upper:
            return False
        return not (self.lower == self.upper and self.lower_closed and self.upper_closed)

    def __contains__(self, delta):
        if self.empty:
            return False
        d = to_fraction(delta)
        lo_ok = d > self.lower or (self.lower_closed and d == self.lower)
        hi_ok = d < self.upper or (self.upper_closed and d == self.upper)
        return lo_ok and hi_ok

    def midpoint(self):
        return (self.lower + self.upper) / 2

    def as_dict(self):
        return {
            "lower": None if self.lower is None else str(self.lower),
            "upper": None if self.upper is None else str(self.upper),
            "lower_closed": self.lower_closed,
            "upper_closed": self.upper_closed,
            "empty": self.empty,
        }


def feasible_delta_range(p, case, variant="literal"):
    """Exact set of ``delta`` for which the case's tuple passes validation.

    Every condition is affine in ``delta`` (the reciprocals are), so the
    feasible set is an intersection of half-lines, computed here from the
    condition margins at ``delta = 0`` and ``delta = 1``.
    """
    p = to_fraction(p)
    if case == 1:
        build = lambda d: _case1_tuple(p, d)  # noqa: E731
    elif case == 2:
        build = lambda d: _case2_tuple(p, d, variant)  # noqa: E731
    else:
        raise ValueError(f"case must be 1 or 2, got {case!r}")

    def margins(d):
        return validate_uniqueness_tuple(build(d)).conditions

    at0, at1, at_half = margins(Fraction(0)), margins(Fraction(1)), margins(HALF)
    lo, hi = Fraction(-10**9), Fraction(10**9)
    lo_closed = hi_closed = True
    for c0, c1, ch in zip(at0, at1, at_half):
        if c0.name == "scaling":
            if c0.margin != 0 or c1.margin != 0:
                return DeltaInterval(None, None, False, False)
            continue
        if c0.name == "p":
            if not c0.passed:
                return DeltaInterval(None, None, False, False)
            continue
        if c0.name == "time-integrability" and p == 2:
            continue
        if c0.name in ("q", "r", "gamma", "rho"):
            # two-sided range: recover both sides from the reciprocals
            for lo_i, hi_i, closed in _range_sides(c0.name, build):
                lo, lo_closed, hi, hi_closed = _intersect(
                    lo, lo_closed, hi, hi_closed, lo_i, hi_i, closed
                )
            continue
        a = c1.margin - c0.margin
        b = c0.margin
        if ch.margin != b + a / 2:
            raise AssertionError(f"condition {c0.name} is not affine in delta")
        lo, lo_closed, hi, hi_closed = _halfline(
            lo, lo_closed, hi, hi_closed, a, b, strict=c0.name not in _NON_STRICT
        )
    return DeltaInterval(lo, hi, lo_closed, hi_closed)


_NON_STRICT = ("sobolev", "s-nonnegative", "time-budget")


def _halfline(lo, lo_closed, hi, hi_closed, a, b, strict):
    # feasible where a*delta + b > 0 (strict) or >= 0
    if a == 0:
        if (b > 0) or (b == 0 and not strict):
            return lo, lo_closed, hi, hi_closed
        return Fraction(1), False, Fraction(0), False
    root = -b / a
    if a > 0:
        if root > lo or (root == lo and strict):
            lo, lo_closed = root, not strict
    else:
        if root < hi or (root == hi and strict):
            hi, hi_closed = root, not strict
    return lo, lo_closed, hi, hi_closed


def _range_sides(name, build):
    inv = lambda d: getattr(build(d), "inv_" + name)  # noqa: E731
    v0, v1 = inv(Fraction(0)), inv(Fraction(1))
    a, b = v1 - v0, v0
    if name in ("q", "r"):
        # 0 <= a d + b <= 1/2
        return [(a, b, True), (-a, HALF - b, True)]
    # 1/2 <= a d + b < 1
    return [(a, b - HALF, True), (-a, 1 - b, False)]


def _intersect(lo, lo_closed, hi, hi_closed, a, b, closed):
    return _halfline(lo, lo_closed, hi, hi_closed, a, b, not closed)
