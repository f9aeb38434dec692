import numpy as np
import pytest

from conftest import make_sig
from stylusnorm import scenarios as sc
from stylusnorm.dataio import Signature, SyntheticConfig, synth_database
from stylusnorm.scenarios import SCENARIOS, ScenarioResult
from stylusnorm.stylus import INK, PLASTIC, map_pressure, pressure_weight, saturated, to_physical


def _pressures(side):
    return {u: [s.pressure for s in sigs] for u, sigs in side.items()}


class TestTable:
    def test_rows(self):
        assert [(s.train_pen, s.test_pen, s.normalized) for s in (SCENARIOS[k] for k in "1234567")] == [
            ("ink", "ink", False),
            ("ink", "ink", True),
            ("plastic", "plastic", True),
            ("plastic", "ink", False),
            ("ink", "plastic", False),
            ("plastic", "ink", True),
            ("ink", "plastic", True),
        ]
        assert not SCENARIOS["no_pressure"].use_pressure

    def test_unknown(self):
        with pytest.raises(ValueError):
            sc.get_scenario("8")


class TestBuildData:
    def test_scenario1_identity(self, small_db):
        train, test = sc.build_scenario_data(SCENARIOS["1"], small_db)
        for u, (tr, te) in small_db.items():
            assert all(a is b for a, b in zip(train[u], tr))
            assert all(a is b for a, b in zip(test[u], te))

    def test_scenario3_plastic_normalized(self, small_db):
        train, test = sc.build_scenario_data(SCENARIOS["3"], small_db)
        raw = small_db["u001"][1][0].pressure
        expected = to_physical(PLASTIC, map_pressure(INK, PLASTIC, raw))
        np.testing.assert_allclose(test["u001"][0].pressure, expected, rtol=0, atol=0)

    def test_interoperability_identity(self, small_db):
        mask = {u: [saturated(INK, PLASTIC, s.pressure) for s in te] for u, (_, te) in small_db.items()}
        for a, b, side in (("2", "7", 1), ("3", "6", 1), ("3", "6", 0)):
            pa = _pressures(sc.build_scenario_data(SCENARIOS[a], small_db)[side])
            pb = _pressures(sc.build_scenario_data(SCENARIOS[b], small_db)[side])
            for u in pa:
                for k, (x, y) in enumerate(zip(pa[u], pb[u])):
                    keep = ~mask[u][k] if side == 1 else slice(None)
                    assert np.max(np.abs(x[keep] - y[keep])) <= 1e-6

    def test_clamped_samples(self):
        sig = make_sig([0, 300, 1000, 1000, 0], user="a")
        db = {"a": ([sig], [sig]), "b": ([sig], [sig])}
        _, test = sc.build_scenario_data(SCENARIOS["5"], db)
        assert test["a"][0].pressure.tolist()[2:4] == [1024, 1024]

    def test_forgeries_follow_test_side(self, small_db):
        forg = {"u000": [small_db["u001"][1][0]]}
        _, test, f = sc.build_scenario_data(SCENARIOS["7"], small_db, forgeries=forg)
        raw = forg["u000"][0].pressure
        np.testing.assert_allclose(f["u000"][0].pressure, to_physical(PLASTIC, map_pressure(INK, PLASTIC, raw)))


class TestWeights:
    def test_modes(self):
        assert sc.scenario_weights(SCENARIOS["1"]).tolist() == [1, 1, 1, 1, 1]
        assert sc.scenario_weights(SCENARIOS["no_pressure"])[2] == 0
        assert sc.scenario_weights(SCENARIOS["6"])[2] == pressure_weight(PLASTIC)
        assert sc.scenario_weights(SCENARIOS["7"], "exact")[2] == pressure_weight(INK, "exact")


class TestRun:
    def test_zero_jitter_matched(self):
        db = synth_database(SyntheticConfig(n_users=5, n_train=2, n_test=2, n_samples_mean=80, intra_user_jitter=0))
        for key in ("1", "2", "3"):
            res = sc.run_scenario(key, db, bits=3)
            assert res.identification_rate == 100.0
            assert res.min_dcf == 0.0

    def test_deterministic(self, small_db):
        a = sc.run_scenario("6", small_db, bits=3)
        b = sc.run_scenario("6", small_db, bits=3)
        assert a == b
        np.testing.assert_array_equal(a.curve.far, b.curve.far)

    def test_skilled(self, small_db):
        # another user's genuine test signature relabeled as a forgery of u000
        other = small_db["u002"][1][0]
        forged = Signature("u000", "f01", other.t, other.features, kind="skilled_forgery")
        res = sc.run_scenario("1", small_db, "skilled", bits=3, forgeries={"u000": [forged]})
        assert res.forgery_kind == "skilled"
        assert 0 <= res.eer <= 100
        with pytest.raises(ValueError):
            sc.run_scenario("1", small_db, "skilled", bits=3)

    def test_reports_clamping(self):
        db = synth_database(SyntheticConfig(n_users=3, n_train=2, n_test=1, n_samples_mean=60, seed=5))
        hot = {}
        for u, (tr, te) in db.items():
            # scale ink pressure up so part of each stroke exceeds the plastic full scale
            boost = lambda s: s.with_pressure(np.minimum(s.pressure * 2.5, 1024.0))
            hot[u] = ([boost(s) for s in tr], [boost(s) for s in te])
        assert sc.run_scenario("5", hot, bits=2).clamped_fraction > 0
        assert sc.run_scenario("1", hot, bits=2).clamped_fraction == 0

    def test_needs_two_users(self, small_db):
        with pytest.raises(ValueError):
            sc.run_scenario("1", {"u000": small_db["u000"]})

    def test_rates_in_range(self):
        with pytest.raises(ValueError):
            ScenarioResult("1", "random", 6, 101.0, 0.0, 0.0)


class TestSweep:
    def test_endpoints(self, small_db):
        pts = sc.mismatch_sweep(small_db, [0, 50, 100], bits=3)
        r1 = sc.run_scenario("1", small_db, bits=3)
        r5 = sc.run_scenario("5", small_db, bits=3)
        assert [p.fraction for p in pts] == [0, 50, 100]
        assert (pts[0].identification_rate, pts[0].min_dcf) == (r1.identification_rate, r1.min_dcf)
        assert (pts[-1].identification_rate, pts[-1].min_dcf) == (r5.identification_rate, r5.min_dcf)

    def test_plastic_direction(self, small_db):
        pts = sc.mismatch_sweep(small_db, [100], bits=3, train_pen="plastic")
        r4 = sc.run_scenario("4", small_db, bits=3)
        assert pts[0].identification_rate == r4.identification_rate

    def test_bad_fraction(self, small_db):
        with pytest.raises(ValueError):
            sc.mismatch_sweep(small_db, [120])


class TestResultsTable:
    def _result(self, key, kind, dcf=1.234, eer=5.678):
        return ScenarioResult(key, kind, 6, 99.0, dcf, eer)

    def test_empty(self):
        assert sc.results_table([]) == "scenario,forgery,min_dcf_pct,eer_pct\n"

    def test_sixteen_rows_ordered(self):
        rows = [self._result(k, kind) for kind in ("skilled", "random") for k in reversed(sc.TABLE_ORDER)]
        lines = sc.results_table(rows).splitlines()
        assert len(lines) == 17
        assert lines[1].startswith("1 (ORIGINAL),RANDOM")
        assert lines[8].startswith("NO PRESSURE,RANDOM")
        assert lines[9].startswith("1 (ORIGINAL),SKILLED")

    def test_two_decimals(self):
        line = sc.results_table([self._result("4", "random", 0.4651, 12.0)]).splitlines()[1]
        assert line == "4 (P-I),RANDOM,0.47,12.00"

    def test_csv(self):
        text = sc.results_csv([self._result("2", "random")])
        assert text.splitlines()[1].startswith("2,random,6,99.0000,1.2340,5.6780")
