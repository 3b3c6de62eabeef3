import json
import math

import pytest

import mbpi


def test_fixtures_are_listed():
    assert mbpi.fixture_names() == ["M1", "M2", "M3", "M4", "A2"]


def test_roots_and_extinction():
    m2 = mbpi.Model.fixture("M2")
    assert mbpi.minimal_root(m2)["q"][0] == pytest.approx(0.5, abs=1e-12)
    a = mbpi.extinction_probability(m2.absorptive_companion(), [1])
    assert a["value"] == pytest.approx(1.0 - 2.0 / math.pi, abs=1e-8)
    assert a["upper_bound"] == pytest.approx(0.5)


def test_mean_time_and_rejection():
    m1 = mbpi.Model.fixture("M1").absorptive_companion()
    assert mbpi.mean_extinction_time(m1, [2])["value"] == pytest.approx(1.5, abs=1e-8)
    with pytest.raises(mbpi.ModelError) as info:
        mbpi.mean_extinction_time(mbpi.Model.fixture("M2").absorptive_companion(), [1])
    assert info.value.code == "NotAlmostSurelyExtinct"


def test_classification_and_equilibrium():
    m1 = mbpi.Model.fixture("M1")
    c = mbpi.classify(m1)
    assert (c["recurrence"], c["ergodicity"]) == ("Recurrent", "Ergodic")
    pmf = mbpi.equilibrium_pmf(m1, 10)["probabilities"]
    assert pmf[(3,)] == pytest.approx(1.0 / 16.0, abs=1e-10)


def test_decay_of_the_two_type_fixture():
    assert mbpi.decay_parameter(mbpi.Model.fixture("M3")) == pytest.approx(1.0 / 3.0, abs=1e-10)
    assert mbpi.qsd(mbpi.Model.fixture("M2"))["exists"] is False


def test_oracle_and_simulator_agree():
    m1 = mbpi.Model.fixture("M1")
    row = mbpi.transition_row(m1, [1], 1.0, 60)
    exact = row["probabilities"][(0,)]
    assert sum(row["probabilities"].values()) + row["leak"] == pytest.approx(1.0, abs=1e-12)
    est = mbpi.simulate_transition(m1, [1], [0], 1.0, replicates=4000, seed=5, threads=1)
    assert abs(est["value"] - exact) <= 3.0 * est["standard_error"]


def test_model_json_round_trip():
    m = mbpi.Model.fixture("A2")
    again = mbpi.Model.from_json(m.to_json())
    assert json.loads(again.to_json()) == json.loads(m.to_json())
    with pytest.raises(mbpi.ModelError) as info:
        mbpi.Model.from_json('{"n": 1}')
    assert info.value.code == "MalformedInput"


def test_cli_entry_point():
    code, out, _ = mbpi.run_cli(["extinction", "--fixture", "M4", "--from", "2"])
    assert code == 0
    assert json.loads(out)["result"]["a_i0"] == pytest.approx(1.0 / 6.0, abs=1e-8)


def test_check_report_is_deterministic():
    m1 = mbpi.Model.fixture("M1")
    a = mbpi.check(m1, seed=3, replicates=1000, threads=1)
    b = mbpi.check(m1, seed=3, replicates=1000, threads=1)
    assert a == b
    assert a["passed"] is True
