import pytest

from senseflow.errors import DuplicateSensorId, UnknownProvider
from senseflow.knowledge import KnowledgeBase
from senseflow.registry import ProviderRegistry, capturable_attributes

from conftest import make_descriptor
from oracles import capturable_fixed_point, filter_and_sort_providers


class TestRegisterProvider:
    def test_registered_sensor_is_discoverable(self):
        registry = ProviderRegistry()
        registry.register(make_descriptor("wet-1", ["leafWetness"]))
        hits = registry.find_providers("leafWetness")
        assert [e.provider_id for e in hits] == ["wet-1"]

    def test_duplicate_sensor_id(self):
        registry = ProviderRegistry()
        registry.register(make_descriptor("s1", ["airTemperature"]))
        with pytest.raises(DuplicateSensorId):
            registry.register(make_descriptor("s1", ["airTemperature"]))

    def test_two_attribute_sensor_counts_both(self, kb):
        registry = ProviderRegistry()
        registry.register(make_descriptor("combo-1", ["airTemperature", "airHumidity"]))
        counts = {
            e.attribute.name: e.provider_count
            for e in capturable_attributes(registry, kb)
        }
        assert counts["airTemperature"] == 1
        assert counts["airHumidity"] == 1


class TestFindProviders:
    def test_two_online_sensors_cheaper_first(self):
        registry = ProviderRegistry()
        registry.register(make_descriptor("exp-t", ["airTemperature"], cost_rank=3))
        registry.register(make_descriptor("cheap-t", ["airTemperature"], cost_rank=1))
        hits = registry.find_providers("airTemperature")
        assert [e.provider_id for e in hits] == ["cheap-t", "exp-t"]
        assert hits == filter_and_sort_providers(registry.entries(), "airTemperature")

    def test_no_direct_provider_gives_empty_list(self, use_case_registry):
        assert use_case_registry.find_providers("airStress") == []

    def test_location_label_filter(self):
        registry = ProviderRegistry()
        registry.register(make_descriptor("t-a", ["airTemperature"], label="plot-7"))
        registry.register(make_descriptor("t-b", ["airTemperature"], label="plot-9"))
        hits = registry.find_providers("airTemperature", location_label="plot-7")
        assert [e.provider_id for e in hits] == ["t-a"]
        assert hits == filter_and_sort_providers(
            registry.entries(), "airTemperature", location_label="plot-7"
        )

    def test_max_cost_rank_filter(self):
        registry = ProviderRegistry()
        registry.register(make_descriptor("t-a", ["airTemperature"], cost_rank=5))
        registry.register(make_descriptor("t-b", ["airTemperature"], cost_rank=1))
        hits = registry.find_providers("airTemperature", max_cost_rank=2)
        assert [e.provider_id for e in hits] == ["t-b"]

    def test_soundness_and_completeness_against_brute_force(self):
        registry = ProviderRegistry()
        attrs = ["airTemperature", "airHumidity", "leafWetness"]
        for i in range(8):
            provided = [a for j, a in enumerate(attrs) if (i >> j) & 1] or ["soilPh"]
            registry.register(make_descriptor(f"s{i}", provided, cost_rank=i % 3))
        registry.set_availability("s3", "offline")
        for attr in attrs + ["soilPh"]:
            got = registry.find_providers(attr)
            expected = filter_and_sort_providers(registry.entries(), attr)
            assert [e.provider_id for e in got] == [e.provider_id for e in expected]
            assert all(e.descriptor.provides(attr) for e in got)


class TestSetAvailability:
    def test_sole_provider_offline_hides_attribute(self):
        registry = ProviderRegistry()
        registry.register(make_descriptor("hum-1", ["airHumidity"]))
        registry.set_availability("hum-1", "offline")
        assert registry.find_providers("airHumidity") == []

    def test_offline_then_online_round_trip(self):
        registry = ProviderRegistry()
        registry.register(make_descriptor("hum-1", ["airHumidity"]))
        before = [e.provider_id for e in registry.find_providers("airHumidity")]
        registry.set_availability("hum-1", "offline")
        registry.set_availability("hum-1", "online")
        after = [e.provider_id for e in registry.find_providers("airHumidity")]
        assert before == after

    def test_unknown_provider(self):
        with pytest.raises(UnknownProvider):
            ProviderRegistry().set_availability("ghost", "offline")


class TestCapturableAttributes:
    def _oracle(self, registry, kb):
        direct = set()
        for entry in registry.entries():
            if entry.descriptor.availability == "online":
                direct |= {a.name for a in entry.descriptor.provided_attributes}
        rules_by_attr = {}
        for attr in kb.derived_attributes():
            rules_by_attr[attr] = [r.dependency_attributes() for r in kb.rules_for(attr)]
        return capturable_fixed_point(direct, rules_by_attr)

    def test_use_case_fixture_includes_derivable_air_stress(self, use_case_registry, kb):
        entries = {e.attribute.name: e for e in capturable_attributes(use_case_registry, kb)}
        assert set(entries) == self._oracle(use_case_registry, kb)
        air_stress = entries["airStress"]
        assert air_stress.derivable is True
        assert air_stress.provider_count == 0
        assert entries["phytophtoraDiseaseStatus"].derivable is True

    def test_empty_registry_and_kb(self):
        assert capturable_attributes(ProviderRegistry(), KnowledgeBase()) == []

    def test_missing_dependency_blocks_derivation(self, kb):
        registry = ProviderRegistry()
        registry.register(make_descriptor("tmp-1", ["airTemperature"]))
        names = {e.attribute.name for e in capturable_attributes(registry, kb)}
        assert names == self._oracle(registry, kb)
        assert "airStress" not in names
        assert "phytophtoraDiseaseStatus" not in names

    def test_matches_fixed_point_after_availability_change(self, use_case_registry, kb):
        use_case_registry.set_availability("hum-1", "offline")
        names = {e.attribute.name for e in capturable_attributes(use_case_registry, kb)}
        assert names == self._oracle(use_case_registry, kb)
