"""Scenario and model loading: presets, overrides, and validation."""

import json

import numpy as np
import pytest

from barriergrasp.models import (
    ModelError,
    apply_overrides,
    load_hand,
    load_object,
    load_scenario,
    preset_names,
)


class TestPresets:
    def test_names_available(self):
        names = preset_names()
        assert "cube_twist" in names
        assert "hand9dof" in names
        assert "cube" in names

    def test_scenario_preset_loads(self):
        cfg = load_scenario("cube_twist")
        assert cfg.hand.dof == 9
        assert cfg.hand.n_fingers == 3
        assert len(cfg.obj.faces) >= 3
        assert len(cfg.contacts) == 3
        assert cfg.sample_time > 0
        assert cfg.mu_hat <= cfg.mu

    def test_hand_preset_loads(self):
        hand = load_hand("hand9dof")
        assert hand.n_fingers == 3
        assert all(f.dof == 3 for f in hand.fingers)

    def test_unknown_source_raises(self):
        with pytest.raises(ModelError):
            load_scenario("no_such_scenario")


class TestFileLoading:
    def test_scenario_from_file(self, tmp_path):
        doc = load_scenario("cube_twist").raw
        path = tmp_path / "scn.json"
        path.write_text(json.dumps(doc))
        cfg = load_scenario(str(path))
        assert cfg.hand.dof == 9

    def test_invalid_json_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ModelError):
            load_scenario(str(path))

    def test_non_object_top_level_rejected(self, tmp_path):
        path = tmp_path / "arr.json"
        path.write_text("[1, 2, 3]")
        with pytest.raises(ModelError):
            load_scenario(str(path))

    def test_unsupported_schema_rejected(self):
        doc = load_scenario("cube_twist").raw
        doc = dict(doc, schema=2)
        with pytest.raises(ModelError):
            load_scenario(doc)


class TestOverrides:
    def test_scalar_override(self):
        cfg = load_scenario("cube_twist", overrides=["nu_hat=0.5"])
        assert cfg.nu_hat == 0.5

    def test_nested_override(self):
        cfg = load_scenario("cube_twist", overrides=["gains.kp=12.5"])
        assert cfg.kp == 12.5

    def test_boolean_override(self):
        cfg = load_scenario("cube_twist", overrides=["filter_enabled=false"])
        assert cfg.filter_enabled is False

    def test_list_index_override(self):
        doc = {"a": [1, 2, 3]}
        out = apply_overrides(doc, ["a.1=9"])
        assert out["a"] == [1, 9, 3]
        assert doc["a"] == [1, 2, 3]  # input untouched

    def test_bare_string_value(self):
        cfg = load_scenario("cube_twist", overrides=["alpha1.kind=cubic"])
        assert cfg.alpha1.kind == "cubic"

    def test_unknown_path_raises(self):
        with pytest.raises(ModelError):
            load_scenario("cube_twist", overrides=["no.such.path=1"])

    def test_missing_equals_raises(self):
        with pytest.raises(ModelError):
            apply_overrides({}, ["oops"])


class TestValidation:
    def base(self):
        return json.loads(json.dumps(load_scenario("cube_twist").raw))

    def test_mu_hat_above_mu_rejected(self):
        doc = self.base()
        doc["mu_hat"] = doc["mu"] + 0.1
        with pytest.raises(ModelError):
            load_scenario(doc)

    def test_bad_joint_limit_length(self):
        doc = self.base()
        doc["joint_limits"]["q_min"] = [0.0, 0.0]
        with pytest.raises(ModelError):
            load_scenario(doc)

    def test_inverted_joint_limits(self):
        doc = self.base()
        doc["joint_limits"]["q_min"] = doc["joint_limits"]["q_max"]
        with pytest.raises(ModelError):
            load_scenario(doc)

    def test_contact_indices_checked(self):
        doc = self.base()
        doc["contacts"][0]["finger"] = 99
        with pytest.raises(ModelError):
            load_scenario(doc)

    def test_duplicate_finger_rejected(self):
        doc = self.base()
        doc["contacts"][1]["finger"] = doc["contacts"][0]["finger"]
        with pytest.raises(ModelError):
            load_scenario(doc)

    def test_contact_target_outside_face(self):
        doc = self.base()
        doc["contacts"][0]["xi_co"] = [1e6, 0.0]
        with pytest.raises(ModelError):
            load_scenario(doc)

    def test_bad_contact_box(self):
        doc = self.base()
        doc["rolling_limits"]["contact_box"] = [0.5, -0.5, -0.5, 0.5]
        with pytest.raises(ModelError):
            load_scenario(doc)

    def test_nonpositive_sample_time(self):
        doc = self.base()
        doc["sample_time"] = 0.0
        with pytest.raises(ModelError):
            load_scenario(doc)

    def test_bad_disturbance_kind(self):
        doc = self.base()
        doc["tau_e"] = {"kind": "ramp", "value": [0.0] * 9}
        with pytest.raises(ModelError):
            load_scenario(doc)

    def test_sine_disturbance_accepted(self):
        doc = self.base()
        doc["w_e"] = {"kind": "sine", "amplitude": [0.01] * 6, "frequency": 2.0}
        cfg = load_scenario(doc)
        assert cfg.w_e["kind"] == "sine"
        assert cfg.w_e["phase"] == 0.0

    def test_hand_bad_rotation_rejected(self):
        doc = self.base()
        hand_doc = doc["hand"] if isinstance(doc["hand"], dict) else None
        if hand_doc is None:
            hand_doc = json.loads(json.dumps(load_hand_doc(doc["hand"])))
        hand_doc["fingers"][0]["base_rotation"] = np.eye(3) * 2.0
        with pytest.raises(ModelError):
            load_hand(hand_doc)

    def test_object_needs_faces(self):
        with pytest.raises(ModelError):
            load_object({"mass": 1.0, "inertia": [1e-3, 1e-3, 1e-3], "faces": []})

    def test_object_diagonal_inertia_shorthand(self):
        doc = load_scenario("cube_twist").raw["object"]
        obj = load_object(doc)
        assert obj.inertia.shape == (3, 3)


def load_hand_doc(source):
    from barriergrasp.models import load_json
    return load_json(source)
