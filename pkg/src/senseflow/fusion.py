"""Data fusion operator repository: descriptor-described single-task
transformations, including the rule evaluator used for secondary context."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

from .errors import (
    ArityMismatch,
    DuplicateOperatorId,
    KindMismatch,
    NoOperatorFound,
    SignatureMismatch,
)
from .knowledge import Rule
from .values import UNKNOWN, ValueKind, is_unknown

VARIADIC = "variadic"

# canonical (arity, input kinds, output kind) per capability; None = unconstrained
_CAPABILITY_SIGNATURES: dict[str, tuple[Any, Any, Any]] = {
    "compare": (2, (ValueKind.NUMBER, ValueKind.NUMBER), ValueKind.BOOLEAN),
    "logical-and": (VARIADIC, ValueKind.BOOLEAN, ValueKind.BOOLEAN),
    "logical-or": (VARIADIC, ValueKind.BOOLEAN, ValueKind.BOOLEAN),
    "rule-eval": (VARIADIC, None, None),
    "window-average": (VARIADIC, ValueKind.NUMBER, ValueKind.NUMBER),
    "latest-value": (VARIADIC, None, None),
    "impute-linear": (VARIADIC, ValueKind.NUMBER, ValueKind.NUMBER),
}


@dataclass(frozen=True)
class OperatorDescriptor:
    operator_id: str
    capability: str
    input_arity: Any  # int or "variadic"
    input_kinds: Any = None
    output_kind: Optional[ValueKind] = None
    params: tuple[str, ...] = field(default_factory=tuple)


class FusionRepository:
    """Concurrent find/apply; registration serialized. Implementations are
    pure functions of (inputs, params)."""

    def __init__(self):
        self._descriptors: dict[str, OperatorDescriptor] = {}
        self._impls: dict[str, Callable] = {}
        self._lock = threading.Lock()

    def register(self, descriptor: OperatorDescriptor, implementation: Callable) -> str:
        if descriptor.capability not in _CAPABILITY_SIGNATURES:
            raise SignatureMismatch(f"unknown capability '{descriptor.capability}'")
        arity, in_kinds, out_kind = _CAPABILITY_SIGNATURES[descriptor.capability]
        if descriptor.input_arity != arity:
            raise SignatureMismatch(
                f"capability '{descriptor.capability}' requires arity {arity}, "
                f"got {descriptor.input_arity}"
            )
        if in_kinds is not None and descriptor.input_kinds not in (None, in_kinds):
            raise SignatureMismatch(
                f"capability '{descriptor.capability}' input kinds mismatch"
            )
        if out_kind is not None and descriptor.output_kind not in (None, out_kind):
            raise SignatureMismatch(
                f"capability '{descriptor.capability}' output kind mismatch"
            )
        with self._lock:
            if descriptor.operator_id in self._descriptors:
                raise DuplicateOperatorId(f"operator '{descriptor.operator_id}' exists")
            self._descriptors[descriptor.operator_id] = descriptor
            self._impls[descriptor.operator_id] = implementation
        return descriptor.operator_id

    def find_operator(self, capability: str, signature: Any = None) -> OperatorDescriptor:
        """Lowest-id operator matching capability (and signature when given)."""
        with self._lock:
            candidates = sorted(
                (d for d in self._descriptors.values() if d.capability == capability),
                key=lambda d: d.operator_id,
            )
        if signature is not None:
            in_kinds, out_kind = signature
            candidates = [
                d
                for d in candidates
                if d.input_kinds in (None, in_kinds) and d.output_kind in (None, out_kind)
            ]
        if not candidates:
            raise NoOperatorFound(f"no operator for capability '{capability}'")
        return candidates[0]

    def descriptor(self, operator_id: str) -> OperatorDescriptor:
        with self._lock:
            if operator_id not in self._descriptors:
                raise NoOperatorFound(f"no operator '{operator_id}'")
            return self._descriptors[operator_id]

    def apply(self, operator_id: str, inputs: Sequence[Any], params: Optional[dict] = None) -> Any:
        descriptor = self.descriptor(operator_id)
        with self._lock:
            impl = self._impls[operator_id]
        if isinstance(descriptor.input_arity, int) and len(inputs) != descriptor.input_arity:
            raise ArityMismatch(
                f"operator '{operator_id}' expects {descriptor.input_arity} inputs, "
                f"got {len(inputs)}"
            )
        _check_input_kinds(descriptor, inputs)
        return impl(list(inputs), dict(params or {}))

    def descriptors(self) -> list[OperatorDescriptor]:
        with self._lock:
            return sorted(self._descriptors.values(), key=lambda d: d.operator_id)


def _check_input_kinds(descriptor: OperatorDescriptor, inputs: Sequence[Any]) -> None:
    kinds = descriptor.input_kinds
    if kinds is None:
        return
    from .values import matches_kind

    if isinstance(kinds, ValueKind):
        expected = [kinds] * len(inputs)
    else:
        expected = list(kinds)
    for value, kind in zip(inputs, expected):
        if not matches_kind(value, kind):
            raise KindMismatch(
                f"operator '{descriptor.operator_id}' expected {kind.value} input, "
                f"got {value!r}"
            )


# --- condition / rule evaluation ---

TRUE, FALSE, INDETERMINATE = "true", "false", "indeterminate"


def _eval_condition(comparator: str, left: Any, right: Any) -> str:
    """Three-valued: unknown operands make the condition indeterminate."""
    if is_unknown(left) or is_unknown(right):
        return INDETERMINATE
    if comparator == "<":
        result = left < right
    elif comparator == "<=":
        result = left <= right
    elif comparator == ">":
        result = left > right
    elif comparator == ">=":
        result = left >= right
    elif comparator == "=":
        result = left == right
    elif comparator == "!=":
        result = left != right
    else:
        raise ValueError(f"unknown comparator '{comparator}'")
    return TRUE if result else FALSE


def evaluate_rules(rules: Sequence[Rule], bindings: dict[str, Any]) -> Any:
    """First rule (document order) whose conditions all hold wins. ELSE fires
    only when every rule is definitely non-matching; otherwise unknown."""
    all_definitely_false = True
    for rule in rules:
        statuses = [
            _eval_condition(c.comparator, bindings.get(c.attribute, UNKNOWN), c.threshold)
            for c in rule.conditions
        ]
        if all(s == TRUE for s in statuses):
            return rule.consequent_value
        if not any(s == FALSE for s in statuses):
            all_definitely_false = False
    if all_definitely_false:
        for rule in rules:
            if rule.has_else:
                return rule.else_value
    return UNKNOWN


# --- built-in single-task operators ---

def _op_compare(inputs, params):
    a, b = inputs
    if is_unknown(a) or is_unknown(b):
        return UNKNOWN
    op = params.get("op", "<")
    status = _eval_condition(op, a, b)
    return status == TRUE


def _op_logical_and(inputs, params):
    if any(is_unknown(v) for v in inputs):
        return UNKNOWN
    return all(bool(v) for v in inputs)


def _op_logical_or(inputs, params):
    if any(is_unknown(v) for v in inputs):
        return UNKNOWN
    return any(bool(v) for v in inputs)


def _op_rule_eval(inputs, params):
    rules = params["rules"]
    bindings = params.get("bindings")
    if bindings is None:
        order = params["input_attributes"]
        bindings = dict(zip(order, inputs))
    return evaluate_rules(rules, bindings)


def window_average(series: Sequence[tuple[int, Any]], window_ms: int) -> Any:
    """Mean of values inside the trailing window ending at the newest sample."""
    if window_ms <= 0:
        raise ValueError("window_ms must be positive")
    if any(is_unknown(v) for _, v in series):
        return UNKNOWN
    if not series:
        return UNKNOWN
    end = max(t for t, _ in series)
    window = [v for t, v in series if t > end - window_ms]
    if not window:
        return UNKNOWN
    return sum(window) / len(window)


def _op_window_average(inputs, params):
    series = params.get("series")
    if series is None:
        now = params["now_ms"]
        series = [(now, v) for v in inputs]
    return window_average(series, params.get("window_ms", 1))


def _op_latest_value(inputs, params):
    series = params.get("series")
    if series is not None:
        if not series:
            return UNKNOWN
        return max(series, key=lambda tv: tv[0])[1]
    if not inputs:
        return UNKNOWN
    return inputs[-1]


def impute_linear(points: Sequence[tuple[float, float]], t: float) -> Any:
    """Linear interpolation between the nearest bracketing samples; unknown
    outside the sampled range (no extrapolation)."""
    if any(is_unknown(v) for _, v in points):
        return UNKNOWN
    pts = sorted(points)
    if not pts or t < pts[0][0] or t > pts[-1][0]:
        return UNKNOWN
    for (t0, v0), (t1, v1) in zip(pts, pts[1:]):
        if t0 <= t <= t1:
            if t0 == t1:
                return v0
            return v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    return pts[0][1] if t == pts[0][0] else UNKNOWN


def _op_impute_linear(inputs, params):
    points = params.get("points")
    if points is None:
        times = params["times"]
        points = list(zip(times, inputs))
    return impute_linear(points, params["at"])


def builtin_repository() -> FusionRepository:
    repo = FusionRepository()
    repo.register(
        OperatorDescriptor(
            "builtin.compare", "compare", 2,
            (ValueKind.NUMBER, ValueKind.NUMBER), ValueKind.BOOLEAN, ("op",),
        ),
        _op_compare,
    )
    repo.register(
        OperatorDescriptor("builtin.logical-and", "logical-and", VARIADIC,
                           ValueKind.BOOLEAN, ValueKind.BOOLEAN),
        _op_logical_and,
    )
    repo.register(
        OperatorDescriptor("builtin.logical-or", "logical-or", VARIADIC,
                           ValueKind.BOOLEAN, ValueKind.BOOLEAN),
        _op_logical_or,
    )
    repo.register(
        OperatorDescriptor("builtin.rule-eval", "rule-eval", VARIADIC,
                           params=("rules", "input_attributes")),
        _op_rule_eval,
    )
    repo.register(
        OperatorDescriptor("builtin.window-average", "window-average", VARIADIC,
                           ValueKind.NUMBER, ValueKind.NUMBER, ("series", "window_ms")),
        _op_window_average,
    )
    repo.register(
        OperatorDescriptor("builtin.latest-value", "latest-value", VARIADIC,
                           params=("series",)),
        _op_latest_value,
    )
    repo.register(
        OperatorDescriptor("builtin.impute-linear", "impute-linear", VARIADIC,
                           ValueKind.NUMBER, ValueKind.NUMBER, ("points", "at")),
        _op_impute_linear,
    )
    return repo
