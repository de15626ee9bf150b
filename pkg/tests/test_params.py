import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from flightbench.params import MIXER_PARAMS, SPECS, ParamStore, ParamTypeError, UnknownParamError


def test_defaults_and_round_trip():
    p = ParamStore()
    assert p["PRIMARY_MIXER"] == "quadrotor_x"
    assert p["SECONDARY_MIXER"] == "unset"
    p.set("PRIMARY_MIXER", "hexarotor_x")
    assert p.get("PRIMARY_MIXER") == "hexarotor_x"


def test_unknown_names_fail():
    p = ParamStore()
    with pytest.raises(UnknownParamError):
        p.get("NOT_A_PARAM")
    with pytest.raises(UnknownParamError):
        p.set("NOT_A_PARAM", 1)


@pytest.mark.parametrize("name, value", [
    ("ROLL_RATE_P", "fast"),
    ("ROLL_RATE_P", True),
    ("USE_MOTOR_PARAM", 0.5),
    ("USE_MOTOR_PARAM", "1"),
    ("PRIMARY_MIXER", "octocopter"),
    ("PRIMARY_MIXER", 3),
    ("PRIMARY_MIXER", "unset"),
])
def test_wrong_types_fail(name, value):
    with pytest.raises(ParamTypeError):
        ParamStore().set(name, value)


def test_int_widens_to_float():
    p = ParamStore()
    assert p.set("ROLL_RATE_P", 2) == 2.0 and isinstance(p["ROLL_RATE_P"], float)
    assert p.set("USE_MOTOR_PARAM", 1.0) == 1 and isinstance(p["USE_MOTOR_PARAM"], int)


def test_revisions():
    p = ParamStore()
    r0, m0 = p.revision, p.mixer_revision
    p.set("ROLL_RATE_P", 1.0)
    assert p.revision == r0 + 1 and p.mixer_revision == m0
    p.set("MIX_PRI_2_0", 1.0)
    assert p.mixer_revision == p.revision


def test_mixer_param_names():
    assert len([n for n in SPECS if n.startswith("MIX_PRI_") and n.count("_") == 3 and "OUT" not in n]) == 60
    assert "MIX_SEC_OUT9_RATE" in SPECS and "MIX_PRI_OUT0_TYPE" in SPECS
    assert {"PRIMARY_MIXER", "SECONDARY_MIXER", "USE_MOTOR_PARAM"} <= MIXER_PARAMS


def test_nan_is_storable_real():
    # rejected later by the mixer loader, not by the store
    p = ParamStore()
    p.set("MIX_PRI_0_0", math.nan)
    assert math.isnan(p["MIX_PRI_0_0"])


def test_dump_load_round_trip():
    p = ParamStore()
    p.update({"ROLL_RATE_P": 0.1 + 0.2, "PRIMARY_MIXER": "custom", "MIX_PRI_3_4": -1e-17, "SERIAL_ECHO": 1})
    q = ParamStore()
    q.load(p.dump().splitlines())
    assert q.view() == p.view()


def test_load_reports_line_numbers():
    p = ParamStore()
    with pytest.raises(UnknownParamError, match="line 3"):
        p.load(["# header", "ROLL_RATE_P 1.0", "BOGUS 2"])
    with pytest.raises(ParamTypeError, match="line 1"):
        p.load(["USE_MOTOR_PARAM yes"])


@given(st.floats(allow_nan=False))
def test_float_params_round_trip_through_text(x):
    p = ParamStore()
    p.set("THR_SCALE", x)
    q = ParamStore()
    q.load(p.dump().splitlines())
    assert q["THR_SCALE"] == x
