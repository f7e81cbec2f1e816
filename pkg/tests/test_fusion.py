import pytest
from hypothesis import given, strategies as st

from senseflow.errors import (
    ArityMismatch,
    DuplicateOperatorId,
    KindMismatch,
    NoOperatorFound,
    SignatureMismatch,
)
from senseflow.fusion import (
    FusionRepository,
    OperatorDescriptor,
    builtin_repository,
    evaluate_rules,
    impute_linear,
    window_average,
)
from senseflow.values import UNKNOWN, ValueKind, is_unknown

from conftest import FIXTURES
from oracles import exhaustive_rule_match


def _load_use_case_kb():
    from senseflow.knowledge import KnowledgeBase

    kb = KnowledgeBase()
    kb.load_domain((FIXTURES / "domains" / "phytophthora.yaml").read_bytes())
    return kb


@pytest.fixture
def repo():
    return builtin_repository()


@pytest.fixture
def air_stress_rules(kb):
    return kb.rules_for("airStress")


@pytest.fixture
def disease_rules(kb):
    return kb.rules_for("phytophtoraDiseaseStatus")


class TestRegisterFind:
    def test_registered_operator_found(self):
        repo = FusionRepository()
        repo.register(
            OperatorDescriptor("my.compare", "compare", 2,
                               (ValueKind.NUMBER, ValueKind.NUMBER), ValueKind.BOOLEAN),
            lambda inputs, params: inputs[0] < inputs[1],
        )
        assert repo.find_operator("compare").operator_id == "my.compare"

    def test_duplicate_id(self, repo):
        with pytest.raises(DuplicateOperatorId):
            repo.register(
                OperatorDescriptor("builtin.compare", "compare", 2,
                                   (ValueKind.NUMBER, ValueKind.NUMBER), ValueKind.BOOLEAN),
                lambda inputs, params: True,
            )

    def test_wrong_arity_for_capability(self):
        repo = FusionRepository()
        with pytest.raises(SignatureMismatch):
            repo.register(
                OperatorDescriptor("bad.compare", "compare", 3),
                lambda inputs, params: True,
            )

    def test_find_rule_eval_builtin(self, repo):
        assert repo.find_operator("rule-eval").operator_id == "builtin.rule-eval"

    def test_compare_with_signature(self, repo):
        found = repo.find_operator(
            "compare", ((ValueKind.NUMBER, ValueKind.NUMBER), ValueKind.BOOLEAN)
        )
        assert found.capability == "compare"

    def test_unregistered_capability(self, repo):
        with pytest.raises(NoOperatorFound):
            repo.find_operator("kalman")

    def test_lowest_operator_id_wins(self, repo):
        repo.register(
            OperatorDescriptor("aaa.compare", "compare", 2,
                               (ValueKind.NUMBER, ValueKind.NUMBER), ValueKind.BOOLEAN),
            lambda inputs, params: True,
        )
        assert repo.find_operator("compare").operator_id == "aaa.compare"


class TestApply:
    def test_compare_less_than(self, repo):
        assert repo.apply("builtin.compare", [10, 12], {"op": "<"}) is True

    def test_logical_and(self, repo):
        assert repo.apply("builtin.logical-and", [True, False], {}) is False

    def test_impute_linear_midpoint(self, repo):
        v = repo.apply("builtin.impute-linear", [], {"points": [(0, 0.0), (10, 10.0)], "at": 5})
        assert v == 5

    def test_arity_mismatch(self, repo):
        with pytest.raises(ArityMismatch):
            repo.apply("builtin.compare", [1, 2, 3], {"op": "<"})

    def test_kind_mismatch(self, repo):
        with pytest.raises(KindMismatch):
            repo.apply("builtin.compare", ["ten", 2], {"op": "<"})


class TestEvaluateRules:
    def test_low_stress(self, air_stress_rules):
        assert evaluate_rules(air_stress_rules,
                              {"airTemperature": 10, "airHumidity": 20}) == "low"

    def test_boundary_is_high(self, air_stress_rules):
        assert evaluate_rules(air_stress_rules,
                              {"airTemperature": 12, "airHumidity": 25}) == "high"

    def test_infected(self, disease_rules):
        assert evaluate_rules(disease_rules,
                              {"airStress": "high", "leafWetness": 60}) == "infected"

    def test_uncovered_region_is_unknown(self, air_stress_rules):
        # neither rule fires at (15, 20) and no rule carries an ELSE
        assert is_unknown(evaluate_rules(air_stress_rules,
                                         {"airTemperature": 15, "airHumidity": 20}))

    def test_else_fires_on_definite_non_match(self, disease_rules):
        assert evaluate_rules(disease_rules,
                              {"airStress": "low", "leafWetness": 60}) == "not-infected"

    def test_else_withheld_when_indeterminate(self, disease_rules):
        assert is_unknown(evaluate_rules(disease_rules,
                                         {"airStress": UNKNOWN, "leafWetness": 60}))

    def test_651_point_grid_matches_exhaustive_oracle(self, air_stress_rules):
        mismatches = []
        for temp in range(0, 31):
            for hum in range(0, 101, 5):
                bindings = {"airTemperature": temp, "airHumidity": hum}
                got = evaluate_rules(air_stress_rules, bindings)
                want = exhaustive_rule_match(air_stress_rules, bindings)
                if got is not want and got != want:
                    mismatches.append((temp, hum, got, want))
        assert mismatches == []

    @given(
        st.one_of(st.integers(-50, 50), st.just(UNKNOWN)),
        st.one_of(st.integers(-10, 110), st.just(UNKNOWN)),
        st.one_of(st.sampled_from(["low", "high"]), st.just(UNKNOWN)),
        st.one_of(st.integers(0, 100), st.just(UNKNOWN)),
    )
    def test_matches_oracle_with_unknowns(self, temp, hum, stress, wet):
        kb = _load_use_case_kb()
        for attr, bindings in [
            ("airStress", {"airTemperature": temp, "airHumidity": hum}),
            ("phytophtoraDiseaseStatus", {"airStress": stress, "leafWetness": wet}),
        ]:
            rules = kb.rules_for(attr)
            got = evaluate_rules(rules, bindings)
            want = exhaustive_rule_match(rules, bindings)
            assert got is want or got == want


class TestCompareProperties:
    @given(st.floats(allow_nan=False, allow_infinity=False),
           st.floats(allow_nan=False, allow_infinity=False))
    def test_trichotomy(self, a, b):
        repo = builtin_repository()
        outcomes = [repo.apply("builtin.compare", [a, b], {"op": op})
                    for op in ("<", "=", ">")]
        assert outcomes.count(True) == 1


class TestWindowAverage:
    def test_two_values(self):
        assert window_average([(0, 2), (1, 4)], 1000) == 3

    def test_empty_window_unknown(self):
        assert is_unknown(window_average([], 1000))

    def test_single_value_identity(self):
        assert window_average([(5, 7)], 10) == 7

    def test_trailing_window_excludes_stale(self):
        series = [(0, 100.0), (900, 2.0), (1000, 4.0)]
        assert window_average(series, 500) == 3


class TestImputeLinear:
    def test_endpoints_exact(self):
        pts = [(0, 1.0), (10, 9.0)]
        assert impute_linear(pts, 0) == 1.0
        assert impute_linear(pts, 10) == 9.0

    def test_extrapolation_is_unknown(self):
        assert is_unknown(impute_linear([(0, 1.0), (10, 9.0)], 11))
        assert is_unknown(impute_linear([(0, 1.0), (10, 9.0)], -1))

    @given(st.lists(st.tuples(st.integers(0, 1000), st.integers(0, 1000)),
                    min_size=2, max_size=8, unique_by=lambda p: p[0]))
    def test_monotone_between_monotone_points(self, raw):
        pts = sorted(raw)
        values = [v for _, v in pts]
        if values != sorted(values):
            values = sorted(values)
            pts = [(t, v) for (t, _), v in zip(pts, values)]
        samples = [impute_linear(pts, t) for t in range(pts[0][0], pts[-1][0] + 1, 37)]
        assert samples == sorted(samples)


class TestUnknownPropagation:
    @pytest.mark.parametrize("operator_id,inputs,params", [
        ("builtin.compare", [UNKNOWN, 5], {"op": "<"}),
        ("builtin.compare", [5, UNKNOWN], {"op": ">"}),
        ("builtin.logical-and", [True, UNKNOWN], {}),
        ("builtin.logical-or", [UNKNOWN, False], {}),
        ("builtin.window-average", [], {"series": [(0, UNKNOWN), (1, 3)], "window_ms": 10}),
        ("builtin.latest-value", [], {"series": []}),
        ("builtin.impute-linear", [], {"points": [(0, UNKNOWN), (10, 5)], "at": 5}),
    ])
    def test_unknown_in_unknown_out(self, repo, operator_id, inputs, params):
        assert is_unknown(repo.apply(operator_id, inputs, params))
