"""Planning: expand a request into its attribute closure, split it into
directly-sensed and rule-derived context, and wire an acyclic acquisition plan."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Optional

from .errors import UnknownAttribute, UnsatisfiableAttribute
from .fusion import FusionRepository
from .knowledge import KnowledgeBase, Rule
from .registry import ProviderRegistry

OUTPUT_FORMATS = ("json-lines", "csv")


@dataclass(frozen=True)
class Request:
    request_id: str
    requested_attributes: frozenset[str]
    output_format: str
    delivery_interval_ms: int
    location_constraint: Optional[str] = None
    duration_ms: Optional[int] = None
    include_context_annotations: bool = False

    def __post_init__(self):
        if not self.requested_attributes:
            raise ValueError("requested_attributes must be non-empty")
        if self.delivery_interval_ms < 1:
            raise ValueError("delivery_interval_ms must be >= 1")
        if self.duration_ms is not None and self.duration_ms < self.delivery_interval_ms:
            raise ValueError("duration_ms must be >= delivery_interval_ms")
        if self.output_format not in OUTPUT_FORMATS:
            raise ValueError(f"unsupported output format '{self.output_format}'")


@dataclass(frozen=True)
class SourceNode:
    node_id: str
    provider_id: str
    model_id: str
    attributes: tuple[str, ...]
    location_label: str


@dataclass(frozen=True)
class DeriveNode:
    node_id: str
    attribute: str
    operator_id: str
    rules: tuple[Rule, ...]
    inputs: tuple[str, ...]  # attribute names, sorted


@dataclass(frozen=True)
class PlanSpec:
    plan_id: str
    canonical_key: str
    sources: tuple[SourceNode, ...]
    derives: tuple[DeriveNode, ...]
    outputs: tuple[str, ...]
    delivery_interval_ms: int

    def produced_attributes(self) -> set[str]:
        out = set()
        for s in self.sources:
            out |= set(s.attributes)
        for d in self.derives:
            out.add(d.attribute)
        return out

    def edges(self) -> set[tuple[str, str]]:
        """(input attribute, derived attribute) pairs."""
        return {(i, d.attribute) for d in self.derives for i in d.inputs}


def required_context(request: Request, kb: KnowledgeBase, registry: ProviderRegistry) -> set[str]:
    """Dependency closure of the requested attributes under the rule base."""
    closure: set[str] = set()
    frontier = list(request.requested_attributes)
    while frontier:
        attr = frontier.pop()
        if attr in closure:
            continue
        if not kb.knows_attribute(attr) and not registry.knows_attribute(attr):
            raise UnknownAttribute(attr)
        closure.add(attr)
        for rule in kb.rules_for(attr):
            frontier.extend(rule.dependency_attributes())
    return closure


def classify(
    attributes: set[str],
    registry: ProviderRegistry,
    kb: KnowledgeBase,
    location_constraint: Optional[str] = None,
) -> tuple[set[str], set[str]]:
    """Partition into (primary, secondary); direct acquisition wins over
    derivation. Raises when some attribute can be satisfied neither way."""
    primary, secondary, bare = set(), set(), set()
    for attr in sorted(attributes):
        if registry.find_providers(attr, location_label=location_constraint):
            primary.add(attr)
        elif kb.rules_for(attr):
            secondary.add(attr)
        else:
            bare.add(attr)

    if bare:
        # a secondary attribute resting on a missing dependency is the
        # user-visible failure; name it, citing the missing leaf
        for attr in sorted(secondary):
            deps = _transitive_dependencies(attr, kb)
            missing = sorted(deps & bare)
            if missing:
                raise UnsatisfiableAttribute(
                    attr,
                    f"'{attr}' cannot be derived: dependency '{missing[0]}' has "
                    "neither an online provider nor a rule",
                )
        raise UnsatisfiableAttribute(
            sorted(bare)[0],
            f"'{sorted(bare)[0]}' has neither an online provider nor a rule",
        )
    return primary, secondary


def _transitive_dependencies(attribute: str, kb: KnowledgeBase) -> set[str]:
    deps: set[str] = set()
    frontier = [attribute]
    while frontier:
        attr = frontier.pop()
        for rule in kb.rules_for(attr):
            for dep in rule.dependency_attributes():
                if dep not in deps:
                    deps.add(dep)
                    frontier.append(dep)
    return deps


def canonical_key(request: Request) -> str:
    """Reuse key: identical for any two requests asking for the same thing,
    regardless of requester, request id, or output format."""
    attrs = ",".join(sorted(request.requested_attributes))
    loc = request.location_constraint or ""
    return (
        f"attrs={attrs};loc={loc};interval={request.delivery_interval_ms};"
        f"annotations={str(request.include_context_annotations).lower()}"
    )


def build_plan(
    request: Request,
    registry: ProviderRegistry,
    kb: KnowledgeBase,
    fusion_repo: FusionRepository,
) -> PlanSpec:
    closure = required_context(request, kb, registry)
    primary, secondary = classify(closure, registry, kb, request.location_constraint)

    # one provider per primary attribute (registry's preferred), merged so a
    # multi-attribute sensor yields a single source node
    provider_attrs: dict[str, list[str]] = {}
    provider_meta = {}
    for attr in sorted(primary):
        entry = registry.find_providers(attr, location_label=request.location_constraint)[0]
        provider_attrs.setdefault(entry.provider_id, []).append(attr)
        provider_meta[entry.provider_id] = entry
    sources = tuple(
        SourceNode(
            node_id=f"source:{pid}",
            provider_id=pid,
            model_id=provider_meta[pid].descriptor.model_id,
            attributes=tuple(sorted(attrs)),
            location_label=provider_meta[pid].descriptor.location.label,
        )
        for pid, attrs in sorted(provider_attrs.items())
    )

    rule_eval = fusion_repo.find_operator("rule-eval")
    derives = tuple(
        DeriveNode(
            node_id=f"derive:{attr}",
            attribute=attr,
            operator_id=rule_eval.operator_id,
            rules=tuple(kb.rules_for(attr)),
            inputs=tuple(sorted(kb.dependencies(attr))),
        )
        for attr in sorted(secondary)
    )

    produced = set()
    for s in sources:
        produced |= set(s.attributes)
    for d in derives:
        produced.add(d.attribute)
    if request.include_context_annotations:
        outputs = tuple(sorted(produced))
    else:
        outputs = tuple(sorted(request.requested_attributes))

    key = canonical_key(request)
    plan_id = "plan-" + hashlib.sha1(key.encode()).hexdigest()[:10]
    plan = PlanSpec(
        plan_id=plan_id,
        canonical_key=key,
        sources=sources,
        derives=derives,
        outputs=outputs,
        delivery_interval_ms=request.delivery_interval_ms,
    )
    _validate_plan(plan)
    return plan


def _validate_plan(plan: PlanSpec) -> None:
    produced: dict[str, str] = {}
    for s in plan.sources:
        for a in s.attributes:
            if a in produced:
                raise ValueError(f"attribute '{a}' produced by two nodes")
            produced[a] = s.node_id
    for d in plan.derives:
        if d.attribute in produced:
            raise ValueError(f"attribute '{d.attribute}' produced by two nodes")
        produced[d.attribute] = d.node_id
    for d in plan.derives:
        for dep in d.inputs:
            if dep not in produced:
                raise ValueError(f"derive '{d.attribute}' input '{dep}' is unproduced")
    topological_order(plan)  # raises on a cycle
    for out in plan.outputs:
        if out not in produced:
            raise ValueError(f"output '{out}' is unproduced")


def topological_order(plan: PlanSpec) -> list[str]:
    """Deterministic node evaluation order: sources first, then derive nodes
    whose inputs are all available (Kahn, ties by node id)."""
    order = [s.node_id for s in plan.sources]
    available = set()
    for s in plan.sources:
        available |= set(s.attributes)
    pending = {d.node_id: d for d in plan.derives}
    while pending:
        ready = sorted(
            nid for nid, d in pending.items() if set(d.inputs) <= available
        )
        if not ready:
            raise ValueError("plan contains a cycle or unproduced input")
        for nid in ready:
            order.append(nid)
            available.add(pending.pop(nid).attribute)
    return order


def plan_dump(plan: PlanSpec) -> dict:
    """Stable structured form for inspection and golden tests."""
    return {
        "plan_id": plan.plan_id,
        "canonical_key": plan.canonical_key,
        "sources": [
            {
                "node_id": s.node_id,
                "provider_id": s.provider_id,
                "model_id": s.model_id,
                "attributes": list(s.attributes),
                "location": s.location_label,
            }
            for s in plan.sources
        ],
        "derives": [
            {
                "node_id": d.node_id,
                "attribute": d.attribute,
                "operator_id": d.operator_id,
                "inputs": list(d.inputs),
                "rule_ids": [r.rule_id for r in d.rules],
            }
            for d in plan.derives
        ],
        "edges": sorted([list(e) for e in plan.edges()]),
        "outputs": list(plan.outputs),
    }
