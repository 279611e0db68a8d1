"""Synthetic generator: validity, determinism, institute profiles."""

from __future__ import annotations

import json

import pytest

from rehabsched.generator import GenParams, cell_params, generate, preset
from rehabsched.iojson import instance_to_json
from rehabsched.model import ModelError, avg_qualifications, density, validate_instance


class TestGenerate:
    def test_every_instance_validates(self):
        for seed in range(20):
            inst = generate(GenParams(n_patients=20, n_operators=6, seed=seed))
            assert validate_instance(inst) == []

    def test_counts_and_fictitious(self):
        inst = generate(GenParams(n_patients=37, n_operators=9, seed=0))
        assert len(inst.patients) == 37
        assert len(inst.real_operators()) == 9
        assert sum(1 for o in inst.operators if o.is_fictitious()) == 1
        assert round(density(inst), 2) == 4.11

    def test_same_seed_same_bytes(self):
        params = GenParams(n_patients=25, n_operators=7, seed=1234)
        a = json.dumps(instance_to_json(generate(params)), sort_keys=True)
        b = json.dumps(instance_to_json(generate(params)), sort_keys=True)
        assert a == b

    def test_different_seeds_differ(self):
        a = instance_to_json(generate(GenParams(n_patients=25, n_operators=7, seed=1)))
        b = instance_to_json(generate(GenParams(n_patients=25, n_operators=7, seed=2)))
        assert a != b

    def test_individual_fraction_tracks_parameter(self):
        inst = generate(GenParams(n_patients=600, n_operators=60, seed=7, pct_individual=0.7))
        frac = sum(1 for s in inst.sessions if s.kind == "individual") / len(inst.sessions)
        assert abs(frac - 0.7) < 0.05

    def test_sessions_per_patient_between_one_and_two(self):
        inst = generate(GenParams(n_patients=80, n_operators=12, seed=3,
                                  second_session_rate=0.5))
        counts = {len(p.sessions) for p in inst.patients}
        assert counts <= {1, 2}
        assert 2 in counts

    def test_rooms_per_inpatient(self):
        inst = generate(GenParams(n_patients=30, n_operators=8, seed=5))
        inpatients = [p for p in inst.patients if p.ptype.value != "outpatient"]
        rooms = [l for l in inst.locations if l.id.startswith("room")]
        assert len(rooms) == len(inpatients)
        assert all(l.capacity == 1 for l in rooms)

    def test_daily_minimum_stays_reachable(self):
        for seed in range(10):
            inst = generate(GenParams(n_patients=30, n_operators=8, seed=seed))
            for p in inst.patients:
                mandatory = [s for s in inst.sessions_of_patient(p.id) if s.is_mandatory()]
                assert p.min_daily_length <= max(sum(s.ideal_length for s in mandatory), 1)

    def test_bad_params_rejected(self):
        with pytest.raises(ModelError):
            generate(GenParams(n_patients=0))
        with pytest.raises(ModelError):
            generate(GenParams(pct_individual=1.5))
        with pytest.raises(ModelError):
            generate(GenParams(ideal_length_dist=(5, 3)))


class TestPresets:
    def test_nervi_profile(self):
        params = preset("nervi")
        assert params.n_floors == 1
        assert params.n_gyms == 1
        assert 9 <= params.n_operators <= 18
        assert 37 <= params.n_patients <= 67

    def test_castel_goffredo_profile(self):
        params = preset("castel_goffredo")
        assert params.n_floors == 2
        assert params.n_gyms == 3
        assert 11 <= params.n_operators <= 17
        assert 51 <= params.n_patients <= 78

    @pytest.mark.parametrize("name,dens", [("nervi", (2.4, 5.2)),
                                           ("castel_goffredo", (3.5, 6.4))])
    def test_density_always_inside_profile(self, name, dens):
        for seed in range(15):
            inst = generate(preset(name, seed=seed))
            assert dens[0] <= density(inst) <= dens[1]

    def test_unknown_preset(self):
        with pytest.raises(ModelError):
            preset("nowhere")


class TestCellParams:
    def test_counts_match(self):
        inst = generate(cell_params(14, 5, seed=1))
        assert len(inst.patients) == 14
        assert len(inst.real_operators()) == 5

    def test_qualification_metric_defined(self):
        inst = generate(cell_params(14, 5, seed=1))
        assert 1.0 <= avg_qualifications(inst) <= 5.0
