"""Text serialisation of rules.

One rule per line::

    rule    := [pred ("," pred)*] "->" name "=" label
    pred    := name "=" value | name "in" "[" num "," num "]"
             | name relop num | linterm ("+" linterm)* relop num
    linterm := num "*" name
    relop   := "<=" | "<" | ">=" | ">"

Whitespace around tokens is insignificant. Categorical values may contain
spaces; they run until the next top-level "," or "->". Feature and target
names are identifier-like (no spaces). ``parse_rule(format_rule(r)) == r``
for every canonically constructed rule.
"""

from __future__ import annotations

import re

from .dataset import FeatureSchema
from .rules import (
    INF,
    CategoricalEq,
    LinearConstraint,
    NumericInterval,
    ParamRule,
    Premise,
    Rule,
)

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.-]*$")
_RELOP_RE = re.compile(r"(<=|>=|<|>)")
_NUM_START_RE = re.compile(r"^[+-]?(\d|\.\d)")


class RuleParseError(ValueError):
    """Malformed rule text; ``position`` is the character offset."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


def fmt_num(x: float) -> str:
    """Shortest round-tripping decimal form of a float."""
    return repr(float(x))


def _split_top_level(text: str, offset: int):
    """Split a premise on commas that are not inside interval brackets."""
    parts = []
    depth = 0
    start = 0
    for i, ch in enumerate(text):
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth = max(0, depth - 1)
        elif ch == "," and depth == 0:
            parts.append((offset + start, text[start:i]))
            start = i + 1
    parts.append((offset + start, text[start:]))
    return parts


def _parse_num(text: str, pos: int) -> float:
    try:
        v = float(text.strip())
    except ValueError:
        raise RuleParseError(f"expected a number, got {text.strip()!r}", pos) from None
    return v


def _lead(raw: str) -> int:
    return len(raw) - len(raw.lstrip())


def _parse_predicate(raw: str, pos: int, schema: FeatureSchema):
    text = raw.strip()
    pos += _lead(raw)
    if not text:
        raise RuleParseError("empty predicate", pos)

    if _NUM_START_RE.match(text) and "*" in text:
        return _parse_linear(text, pos, schema)

    m = re.match(r"^([A-Za-z_][A-Za-z0-9_.-]*)\s+in\s*\[(.*),(.*)\]$", text)
    if m:
        name = m.group(1)
        _require_feature(name, pos, schema)
        lo = _parse_num(m.group(2), pos)
        hi = _parse_num(m.group(3), pos)
        try:
            return NumericInterval(name, lo, hi, True, True)
        except ValueError as e:
            raise RuleParseError(str(e), pos) from None

    m = _RELOP_RE.search(text)
    if m:
        name = text[: m.start()].strip()
        if not _NAME_RE.match(name):
            raise RuleParseError(f"bad feature name {name!r}", pos)
        _require_feature(name, pos, schema)
        value = _parse_num(text[m.end() :], pos + m.end())
        op = m.group(1)
        try:
            if op == "<=":
                return NumericInterval(name, -INF, value, False, True)
            if op == "<":
                return NumericInterval(name, -INF, value, False, False)
            if op == ">=":
                return NumericInterval(name, value, INF, True, False)
            return NumericInterval(name, value, INF, False, False)
        except ValueError as e:
            raise RuleParseError(str(e), pos) from None

    if "=" in text:
        name, _, value = text.partition("=")
        name = name.strip()
        value = value.strip()
        if not _NAME_RE.match(name):
            raise RuleParseError(f"bad feature name {name!r}", pos)
        _require_feature(name, pos, schema)
        feat = schema.feature(name)
        if not feat.is_categorical:
            raise RuleParseError(f"feature {name!r} is continuous, '=' needs a categorical", pos)
        if value not in feat.values:
            raise RuleParseError(f"value {value!r} not in feature {name!r}", pos)
        return CategoricalEq(name, value)

    raise RuleParseError(f"cannot parse predicate {text!r}", pos)


def _parse_linear(text: str, pos: int, schema: FeatureSchema) -> LinearConstraint:
    m = _RELOP_RE.search(text)
    if not m:
        raise RuleParseError("linear constraint lacks a relational operator", pos)
    lhs = text[: m.start()]
    threshold = _parse_num(text[m.end() :], pos + m.end())
    terms = []
    for off, part in _split_on_plus(lhs, pos):
        part_s = part.strip()
        if "*" not in part_s:
            raise RuleParseError(f"expected num*name, got {part_s!r}", off)
        coef_txt, _, name = part_s.partition("*")
        coef = _parse_num(coef_txt, off)
        name = name.strip()
        if not _NAME_RE.match(name):
            raise RuleParseError(f"bad feature name {name!r}", off)
        _require_feature(name, pos, schema)
        if schema.feature(name).is_categorical:
            raise RuleParseError(f"linear constraint uses categorical feature {name!r}", off)
        terms.append((name, coef))
    try:
        return LinearConstraint(_canonical_terms(terms), m.group(1), threshold)
    except ValueError as e:
        raise RuleParseError(str(e), pos) from None


def _split_on_plus(text: str, offset: int):
    """Split linear terms on "+" separators.

    A "+" before the current term's "*" sits inside its coefficient (sign or
    exponent); after the "*" it separates terms.
    """
    parts = []
    start = 0
    seen_star = False
    for i, ch in enumerate(text):
        if ch == "*":
            seen_star = True
        elif ch == "+" and seen_star:
            parts.append((offset + start, text[start:i]))
            start = i + 1
            seen_star = False
    parts.append((offset + start, text[start:]))
    return parts


def _canonical_terms(terms) -> tuple:
    return tuple(sorted(terms, key=lambda t: t[0]))


def _require_feature(name: str, pos: int, schema: FeatureSchema) -> None:
    if not schema.has_feature(name):
        raise RuleParseError(f"unknown feature {name!r}", pos)


def parse_premise(text: str, schema: FeatureSchema, offset: int = 0) -> Premise:
    text_stripped = text.strip()
    if not text_stripped:
        return Premise(schema)
    preds = []
    for pos, part in _split_top_level(text, offset):
        preds.append(_parse_predicate(part, pos, schema))
    try:
        return Premise(schema, preds)
    except ValueError as e:
        raise RuleParseError(str(e), offset) from None


def parse_rule(text: str, schema: FeatureSchema) -> Rule:
    """Parse one rule line against ``schema``.

    Raises :class:`RuleParseError` (with a character position) on unknown
    features, malformed predicates or out-of-schema categorical values.
    """
    arrow = text.find("->")
    if arrow < 0:
        raise RuleParseError("missing '->'", len(text))
    premise = parse_premise(text[:arrow], schema, 0)
    rhs = text[arrow + 2 :]
    pos = arrow + 2
    name, eq, label_txt = rhs.partition("=")
    if not eq:
        raise RuleParseError("missing '=' in consequent", pos + len(rhs))
    name = name.strip()
    if name != schema.target_name:
        raise RuleParseError(
            f"consequent names {name!r}, schema target is {schema.target_name!r}", pos
        )
    label_txt = label_txt.strip()
    try:
        label = schema.label_of(label_txt)
    except ValueError as e:
        raise RuleParseError(str(e), pos + rhs.find("=") + 1) from None
    return Rule(premise, label)


def _format_interval(iv: NumericInterval) -> list[str]:
    f = iv.feature
    if iv.lower == -INF:
        op = "<=" if iv.upper_closed else "<"
        return [f"{f} {op} {fmt_num(iv.upper)}"]
    if iv.upper == INF:
        op = ">=" if iv.lower_closed else ">"
        return [f"{f} {op} {fmt_num(iv.lower)}"]
    if iv.lower_closed and iv.upper_closed:
        return [f"{f} in [{fmt_num(iv.lower)}, {fmt_num(iv.upper)}]"]
    lo_op = ">=" if iv.lower_closed else ">"
    hi_op = "<=" if iv.upper_closed else "<"
    return [f"{f} {lo_op} {fmt_num(iv.lower)}", f"{f} {hi_op} {fmt_num(iv.upper)}"]


def _format_linear(lc: LinearConstraint) -> str:
    lhs = " + ".join(f"{fmt_num(c)}*{f}" for f, c in lc.terms)
    return f"{lhs} {lc.relation} {fmt_num(lc.threshold)}"


def format_premise(premise: Premise) -> str:
    """Premise text with predicates in schema feature order."""
    schema = premise.schema
    parts: list[str] = []
    for feat in schema.features:
        ce = premise.cat_eq_on(feat.name)
        if ce is not None:
            parts.append(f"{feat.name} = {ce.value}")
        iv = premise.interval_on(feat.name)
        if iv is not None:
            parts.extend(_format_interval(iv))
    for lc in premise.linears:
        parts.append(_format_linear(lc))
    return ", ".join(parts)


def format_rule(rule: Rule) -> str:
    """Canonical one-line text of a rule (inverse of :func:`parse_rule`)."""
    schema = rule.schema
    head = format_premise(rule.premise)
    tail = f"-> {schema.target_name} = {schema.class_names[rule.consequent]}"
    return f"{head} {tail}" if head else tail


def format_param_rule(p: ParamRule) -> str:
    """Text form of a parameterised rule, parameter spelled ``a``."""
    schema = p.schema
    base = format_premise(p.base)
    parts = [base] if base else []
    parts.append(f"{p.feature_a} <= a")
    parts.append(f"{p.feature_b} <= {fmt_num(p.bound_sum)}-a")
    parts.append(f"{fmt_num(p.a_lo)} <= a <= {fmt_num(p.a_hi)}")
    tail = f"-> {schema.target_name} = {schema.class_names[p.consequent]}"
    return ", ".join(parts) + " " + tail
