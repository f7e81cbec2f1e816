import pytest
import yaml

from senseflow.errors import CyclicDependency, MalformedDomain, UnknownAttribute
from senseflow.knowledge import NO_ELSE, KnowledgeBase, parse_domain


def domain_doc(domain_id, rules, attributes=None):
    return yaml.safe_dump(
        {"domain_id": domain_id, "attributes": attributes or [], "rules": rules}
    ).encode()


def simple_rule(rule_id, consequent, deps, value="v"):
    return {
        "id": rule_id,
        "if": [{"attribute": d, "op": "=", "value": 1} for d in deps],
        "then": {"attribute": consequent, "value": value},
    }


class TestLoadDomain:
    def test_use_case_document(self, phytophthora_rules_doc):
        plugin = parse_domain(phytophthora_rules_doc)
        derived = {r.consequent_attribute for r in plugin.rules}
        assert derived == {"airStress", "phytophtoraDiseaseStatus"}
        assert len(plugin.rules) == 3

    def test_two_attribute_cycle_rejected(self):
        kb = KnowledgeBase()
        doc = domain_doc("cyclic", [
            simple_rule("r1", "a", ["b"]),
            simple_rule("r2", "b", ["a"]),
        ])
        with pytest.raises(CyclicDependency) as exc:
            kb.load_domain(doc)
        assert set(exc.value.cycle) >= {"a", "b"}

    def test_cycle_load_is_atomic(self):
        kb = KnowledgeBase()
        kb.load_domain(domain_doc("base", [simple_rule("r1", "a", ["b"])]))
        with pytest.raises(CyclicDependency):
            kb.load_domain(domain_doc("bad", [simple_rule("r2", "b", ["a"])]))
        assert [p.domain_id for p in kb.plugins()] == ["base"]

    def test_pure_vocabulary_plugin(self):
        plugin = parse_domain(domain_doc(
            "vocab", [], attributes=[{"name": "soilPh", "unit": "pH", "kind": "number"}]
        ))
        assert plugin.rules == ()
        assert plugin.declared_attributes[0].name == "soilPh"

    def test_malformed_document(self):
        with pytest.raises(MalformedDomain):
            parse_domain(b"- not\n- a mapping\n")

    def test_self_referential_rule_rejected(self):
        with pytest.raises(MalformedDomain, match="own conditions"):
            parse_domain(domain_doc("bad", [simple_rule("r", "a", ["a", "b"])]))

    def test_ordering_comparator_on_string_attribute_rejected(self):
        doc = domain_doc(
            "bad",
            [{
                "id": "r",
                "if": [{"attribute": "status", "op": "<", "value": "high"}],
                "then": {"attribute": "alarm", "value": "on"},
            }],
            attributes=[{"name": "status", "kind": "string"}],
        )
        with pytest.raises(MalformedDomain):
            parse_domain(doc)

    def test_conflicting_consequent_kinds_rejected(self):
        doc = domain_doc("bad", [
            simple_rule("r1", "a", ["b"], value="text"),
            simple_rule("r2", "a", ["c"], value=5),
        ])
        with pytest.raises(MalformedDomain, match="value kind"):
            parse_domain(doc)


class TestDependencies:
    def test_air_stress_depends_on_temp_and_humidity(self, kb):
        assert kb.dependencies("airStress") == {"airTemperature", "airHumidity"}

    def test_disease_depends_on_stress_and_wetness(self, kb):
        assert kb.dependencies("phytophtoraDiseaseStatus") == {"airStress", "leafWetness"}

    def test_primary_attribute_has_no_dependencies(self, kb):
        assert kb.dependencies("airTemperature") == set()

    def test_unknown_attribute(self, kb):
        with pytest.raises(UnknownAttribute):
            kb.dependencies("cropYieldForecast")

    def test_equals_union_over_rules_for(self, kb):
        for attr in kb.derived_attributes():
            union = set()
            for rule in kb.rules_for(attr):
                union |= rule.dependency_attributes()
            assert kb.dependencies(attr) == union


class TestRulesFor:
    def test_air_stress_rules_in_document_order(self, kb):
        rules = kb.rules_for("airStress")
        assert [r.rule_id for r in rules] == ["air-stress-low", "air-stress-high"]

    def test_primary_attribute_has_no_rules(self, kb):
        assert kb.rules_for("leafWetness") == []

    def test_disease_rule_has_else(self, kb):
        rules = kb.rules_for("phytophtoraDiseaseStatus")
        assert len(rules) == 1
        assert rules[0].else_value == "not-infected"
        assert rules[0].else_value is not NO_ELSE


class TestOrderIndependence:
    def test_disjoint_plugins_commute(self):
        doc_a = domain_doc("alpha", [simple_rule("a1", "x", ["p"]),
                                     simple_rule("a2", "x", ["q"])])
        doc_b = domain_doc("beta", [simple_rule("b1", "y", ["r"])])
        kb1, kb2 = KnowledgeBase(), KnowledgeBase()
        kb1.load_domain(doc_a)
        kb1.load_domain(doc_b)
        kb2.load_domain(doc_b)
        kb2.load_domain(doc_a)
        for attr in ("x", "y"):
            assert kb1.dependencies(attr) == kb2.dependencies(attr)
            assert [r.rule_id for r in kb1.rules_for(attr)] == \
                   [r.rule_id for r in kb2.rules_for(attr)]

    def test_topological_order_exists_after_every_load(self, kb):
        # acyclicity means the derived attributes admit a dependency ranking
        ranks = {}
        changed = True
        while changed:
            changed = False
            for attr in kb.derived_attributes():
                deps = kb.dependencies(attr)
                rank = 1 + max((ranks.get(d, 0) for d in deps), default=0)
                if ranks.get(attr) != rank:
                    ranks[attr] = rank
                    changed = True
                    assert rank <= 50, "cycle suspected"
        assert ranks["phytophtoraDiseaseStatus"] > ranks["airStress"]
