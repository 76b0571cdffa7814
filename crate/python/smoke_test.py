"""Smoke test for the Python bindings.

Build first:  maturin develop --release -m crates/py/Cargo.toml
Run:          python python/smoke_test.py
"""

import json
import sys

import coachsim_py as cs


def main() -> int:
    report = json.loads(cs.simulate(json.dumps({"n_learners": 50, "skill_counts": [3, 5]}), seed=42))
    assert report["n_records"] == 50 * 2 * 3, report["n_records"]
    rows = {(r["policy"], r["skill_count"]): r for r in report["summary"]}
    print("adaptive, 5 skills:", rows[("adaptive", 5)]["mean_actions"], "mean actions")

    out = cs.coach(cs.worked_example(), zero_latencies=True)
    assert out == cs.worked_example_golden(), "coach output differs from the golden file"
    parsed = json.loads(out)
    assert parsed["robot_adjustment"]["distance_to_door_adjustment"] == "closer"
    print("coach:", parsed["coaching_action"]["terminal_instruction_to_user"])

    status, value = cs.validate('{"user_state": "aproaching"}', "frame_state")
    assert status == "invalid", (status, value)

    try:
        import jsonschema
    except ImportError:
        jsonschema = None
    for sid in cs.schema_ids():
        schema = json.loads(cs.schema(sid))
        if jsonschema is not None:
            jsonschema.Draft202012Validator.check_schema(schema)
            for example in schema["examples"]:
                jsonschema.validate(example, schema, cls=jsonschema.Draft202012Validator)
        assert cs.validate(json.dumps(schema["examples"][0]), sid)[0] == "valid"
    print("schemas:", ", ".join(cs.schema_ids()))

    t, df, p = cs.welch_t([1, 2, 3], [4, 5, 6])
    assert abs(t + 3.674) < 1e-3 and abs(p - 0.0214) < 5e-4
    assert cs.cohens_d([1, 2, 3], [4, 5, 6]) < 0
    assert cs.proficiency(22.5, 5.0, 40.0) == 0.5

    try:
        cs.coach("{}")
    except ValueError as e:
        assert "metadata" in str(e)
    else:
        raise AssertionError("malformed episode accepted")

    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
