"""Context knowledge base: pluggable domain rule sets (IF/THEN/ELSE over
context attributes) with the dependency queries the planner needs."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Any, Optional

import yaml

from .acquisition import AttributeSpec
from .errors import CyclicDependency, MalformedDomain, UnknownAttribute
from .values import ValueKind, kind_of

COMPARATORS = ("<", "<=", ">", ">=", "=", "!=")
_ORDERING = ("<", "<=", ">", ">=")

# distinguishes "no ELSE clause" from an explicit ELSE value
NO_ELSE = object()


@dataclass(frozen=True)
class Condition:
    attribute: str
    comparator: str
    threshold: Any

    def __post_init__(self):
        if self.comparator not in COMPARATORS:
            raise MalformedDomain(f"unknown comparator '{self.comparator}'")
        if self.comparator in _ORDERING and not isinstance(self.threshold, (int, float)):
            raise MalformedDomain(
                f"comparator '{self.comparator}' on '{self.attribute}' requires a numeric threshold"
            )


@dataclass(frozen=True)
class Rule:
    rule_id: str
    conditions: tuple[Condition, ...]
    consequent_attribute: str
    consequent_value: Any
    else_value: Any = NO_ELSE

    def __post_init__(self):
        if not self.conditions:
            raise MalformedDomain(f"rule '{self.rule_id}' has no conditions")
        if any(c.attribute == self.consequent_attribute for c in self.conditions):
            raise MalformedDomain(
                f"rule '{self.rule_id}': consequent '{self.consequent_attribute}' "
                "appears in its own conditions"
            )

    @property
    def has_else(self) -> bool:
        return self.else_value is not NO_ELSE

    def dependency_attributes(self) -> set[str]:
        return {c.attribute for c in self.conditions}


@dataclass(frozen=True)
class DomainPlugin:
    domain_id: str
    rules: tuple[Rule, ...]
    declared_attributes: tuple[AttributeSpec, ...] = field(default_factory=tuple)


def parse_domain(document: bytes | str) -> DomainPlugin:
    try:
        doc = yaml.safe_load(document)
    except yaml.YAMLError as exc:
        raise MalformedDomain(f"unparseable domain document: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedDomain("domain document must be a mapping")
    domain_id = doc.get("domain_id")
    if not domain_id or not isinstance(domain_id, str):
        raise MalformedDomain("domain_id: must be a non-empty string")

    declared = []
    for i, a in enumerate(doc.get("attributes") or []):
        if not isinstance(a, dict) or "name" not in a:
            raise MalformedDomain(f"attributes[{i}]: must be a mapping with a name")
        try:
            kind = ValueKind(a.get("kind", "string"))
        except ValueError:
            raise MalformedDomain(f"attributes[{i}].kind: unknown kind '{a.get('kind')}'")
        declared.append(AttributeSpec(a["name"], str(a.get("unit", "")), kind))

    rules = []
    for i, r in enumerate(doc.get("rules") or []):
        if not isinstance(r, dict):
            raise MalformedDomain(f"rules[{i}]: must be a mapping")
        rule_id = r.get("id") or f"{domain_id}-rule-{i}"
        conds = r.get("if")
        if not isinstance(conds, list) or not conds:
            raise MalformedDomain(f"rules[{i}]: 'if' must be a non-empty list")
        conditions = []
        for j, c in enumerate(conds):
            if not isinstance(c, dict) or not {"attribute", "op", "value"} <= set(c):
                raise MalformedDomain(
                    f"rules[{i}].if[{j}]: must carry attribute, op, value"
                )
            conditions.append(Condition(c["attribute"], c["op"], c["value"]))
        then = r.get("then")
        if not isinstance(then, dict) or not {"attribute", "value"} <= set(then):
            raise MalformedDomain(f"rules[{i}]: 'then' must carry attribute and value")
        else_value = r["else"] if "else" in r else NO_ELSE
        rules.append(
            Rule(
                rule_id=rule_id,
                conditions=tuple(conditions),
                consequent_attribute=then["attribute"],
                consequent_value=then["value"],
                else_value=else_value,
            )
        )

    plugin = DomainPlugin(domain_id=domain_id, rules=tuple(rules), declared_attributes=tuple(declared))
    _check_plugin(plugin)
    return plugin


def _check_plugin(plugin: DomainPlugin) -> None:
    kinds: dict[str, ValueKind] = {a.name: a.kind for a in plugin.declared_attributes}
    consequent_kinds: dict[str, ValueKind] = {}
    for rule in plugin.rules:
        attr = rule.consequent_attribute
        kind = kind_of(rule.consequent_value)
        if kind is None:
            raise MalformedDomain(f"rule '{rule.rule_id}': unsupported consequent value type")
        if attr in consequent_kinds and consequent_kinds[attr] != kind:
            raise MalformedDomain(
                f"rules for '{attr}' disagree on its value kind"
            )
        consequent_kinds[attr] = kind
        if attr in kinds and kinds[attr] != kind:
            raise MalformedDomain(
                f"rule '{rule.rule_id}': consequent kind {kind.value} conflicts with "
                f"declared kind {kinds[attr].value} for '{attr}'"
            )
        for cond in rule.conditions:
            declared_kind = kinds.get(cond.attribute)
            if (
                declared_kind is not None
                and cond.comparator in _ORDERING
                and declared_kind != ValueKind.NUMBER
            ):
                raise MalformedDomain(
                    f"rule '{rule.rule_id}': ordering comparator on non-number "
                    f"attribute '{cond.attribute}'"
                )


def _find_cycle(edges: dict[str, set[str]]) -> Optional[list[str]]:
    """DFS cycle search over attribute dependency edges (consequent -> dep)."""
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {node: WHITE for node in edges}
    stack: list[str] = []

    def visit(node: str) -> Optional[list[str]]:
        color[node] = GRAY
        stack.append(node)
        for dep in sorted(edges.get(node, ())):
            if color.get(dep, WHITE) == GRAY:
                return stack[stack.index(dep):] + [dep]
            if color.get(dep, WHITE) == WHITE and dep in edges:
                found = visit(dep)
                if found:
                    return found
        stack.pop()
        color[node] = BLACK
        return None

    for node in sorted(edges):
        if color[node] == WHITE:
            found = visit(node)
            if found:
                return found
    return None


class KnowledgeBase:
    """Read-mostly store of domain plugins; loading is atomic and re-checks
    that the global attribute dependency graph stays acyclic."""

    def __init__(self):
        self._plugins: list[DomainPlugin] = []
        self._lock = threading.Lock()

    def load_domain(self, document: bytes | str | DomainPlugin) -> DomainPlugin:
        plugin = document if isinstance(document, DomainPlugin) else parse_domain(document)
        with self._lock:
            candidate = self._plugins + [plugin]
            edges: dict[str, set[str]] = {}
            for p in candidate:
                for rule in p.rules:
                    edges.setdefault(rule.consequent_attribute, set()).update(
                        rule.dependency_attributes()
                    )
            cycle = _find_cycle(edges)
            if cycle:
                raise CyclicDependency(cycle)
            self._plugins = candidate
        return plugin

    def plugins(self) -> list[DomainPlugin]:
        with self._lock:
            return list(self._plugins)

    def rules_for(self, attribute: str) -> list[Rule]:
        """All rules deriving the attribute, in plugin-load then document order."""
        return [
            rule
            for plugin in self.plugins()
            for rule in plugin.rules
            if rule.consequent_attribute == attribute
        ]

    def dependencies(self, attribute: str, *, registry=None) -> set[str]:
        rules = self.rules_for(attribute)
        if not rules:
            known = self.knows_attribute(attribute) or (
                registry is not None and registry.knows_attribute(attribute)
            )
            if not known:
                raise UnknownAttribute(attribute)
            return set()
        deps: set[str] = set()
        for rule in rules:
            deps |= rule.dependency_attributes()
        return deps

    def derived_attributes(self) -> list[str]:
        seen = []
        for plugin in self.plugins():
            for rule in plugin.rules:
                if rule.consequent_attribute not in seen:
                    seen.append(rule.consequent_attribute)
        return seen

    def knows_attribute(self, attribute: str) -> bool:
        for plugin in self.plugins():
            if any(a.name == attribute for a in plugin.declared_attributes):
                return True
            for rule in plugin.rules:
                if rule.consequent_attribute == attribute:
                    return True
                if any(c.attribute == attribute for c in rule.conditions):
                    return True
        return False

    def attribute_spec(self, attribute: str) -> Optional[AttributeSpec]:
        for plugin in self.plugins():
            for a in plugin.declared_attributes:
                if a.name == attribute:
                    return a
        return None
