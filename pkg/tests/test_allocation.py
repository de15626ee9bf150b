import logging
import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import REF_MOTOR, REF_PROP, RHO
from flightbench.allocation import (
    PREDEFINED,
    ChannelKind,
    InvalidMatrixError,
    MixerConfig,
    MixerValidationError,
    OutputChannelConfig,
    OverrideState,
    StoredAs,
    UnknownMixerError,
    blend_mixers,
    custom_params,
    load_custom,
    load_predefined,
    mix,
    moore_penrose_residuals,
    output_stage,
    pseudoinverse,
    rank,
)
from flightbench.motor import Environment, MotorDescriptor, MotorGeometry

DELTA_AT_400 = 0.354905967995932  # independent scalar evaluation, see test_motor


def _mp_check(M, P, tol):
    """Four Moore-Penrose identities, absolute inf-norm."""
    inf = lambda A: np.linalg.norm(A, np.inf)  # noqa: E731
    assert inf(M @ P @ M - M) < tol
    assert inf(P @ M @ P - P) < tol
    assert inf((M @ P).T - M @ P) < tol
    assert inf((P @ M).T - P @ M) < tol


def _headers(kind=ChannelKind.MOTOR):
    return tuple(OutputChannelConfig(kind, 400) for _ in range(10))


# --- pseudoinverse ----------------------------------------------------------


def test_pinv_identity_block():
    M = np.hstack([np.eye(6), np.zeros((6, 4))])
    P = pseudoinverse(M)
    assert P.shape == (10, 6)
    np.testing.assert_array_equal(P[:6], np.eye(6))
    np.testing.assert_array_equal(P[6:], 0)


def test_pinv_scaled_identity():
    P = pseudoinverse(2 * np.hstack([np.eye(6), np.zeros((6, 4))]))
    np.testing.assert_allclose(P[:6], 0.5 * np.eye(6), atol=1e-15)


def test_pinv_random_full_row_rank_against_scipy():
    rng = np.random.default_rng(2024)
    M = rng.normal(size=(6, 10))
    P = pseudoinverse(M)
    assert np.linalg.norm(M @ P - np.eye(6), np.inf) < 1e-9
    np.testing.assert_allclose(P, scipy.linalg.pinv(M), atol=1e-12)
    _mp_check(M, P, 1e-10)


def test_pinv_rank_deficient():
    rng = np.random.default_rng(5)
    M = rng.normal(size=(6, 3)) @ rng.normal(size=(3, 10))
    P = pseudoinverse(M)
    assert rank(M) == 3
    _mp_check(M, P, 1e-9)
    np.testing.assert_allclose(P, scipy.linalg.pinv(M), atol=1e-9)


def test_pinv_zero_matrix_and_tolerance():
    np.testing.assert_array_equal(pseudoinverse(np.zeros((6, 10))), np.zeros((10, 6)))
    M = np.diag([1.0, 1e-3, 0, 0, 0, 0]) @ np.hstack([np.eye(6), np.zeros((6, 4))])
    P = pseudoinverse(M, sv_tolerance=1e-2)
    assert P[0, 0] == 1.0 and P[1, 1] == 0.0


def test_pinv_subnormal_matrix_is_numerically_zero():
    P = pseudoinverse(np.full((6, 10), 2.2e-313))
    assert np.all(np.isfinite(P)) and not P.any()


@pytest.mark.parametrize("bad", [np.full((6, 10), np.nan), np.full((6, 10), np.inf)])
def test_pinv_rejects_non_finite(bad):
    with pytest.raises(InvalidMatrixError):
        pseudoinverse(bad)


def test_pinv_rejects_negative_tolerance():
    with pytest.raises(ValueError):
        pseudoinverse(np.eye(6, 10), sv_tolerance=-1)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (6, 10), elements=st.floats(-100, 100, allow_subnormal=False)))
def test_pinv_identities_property(M):
    P = pseudoinverse(M)
    scale = max(1.0, np.linalg.norm(M, np.inf)) * max(1.0, np.linalg.norm(P, np.inf))
    res = moore_penrose_residuals(M, P)
    # relative residuals stay near machine precision up to the conditioning
    assert res["MPM=M"] < 1e-8 * scale
    assert res["(MP)^T=MP"] < 1e-8 * scale


# --- predefined mixers and mix() --------------------------------------------


def test_vtail_matches_reference_matrix():
    vt = load_predefined("fixedwing_vtail")
    expected = np.zeros((10, 6))
    expected[0, 0] = 1
    expected[1, 1], expected[1, 2] = -0.5, 0.5
    expected[2, 1], expected[2, 2] = 0.5, 0.5
    expected[3, 3] = 1
    np.testing.assert_array_equal(vt.inverse, expected)
    assert vt.stored_as is StoredAs.INVERSE_MDAGGER


def test_vtail_mix_examples():
    vt = load_predefined("fixedwing_vtail")
    np.testing.assert_array_equal(mix(vt, [0, 1, 0, 0, 0, 0]), [0, -0.5, 0.5, 0, 0, 0, 0, 0, 0, 0])
    np.testing.assert_array_equal(mix(vt, [0.1, 0, 0, 0.5, 0, 0]), [0.1, 0, 0, 0.5, 0, 0, 0, 0, 0, 0])


@pytest.mark.parametrize("name", PREDEFINED)
def test_zero_input_gives_zero_output(name):
    np.testing.assert_array_equal(mix(load_predefined(name), np.zeros(6)), np.zeros(10))


def test_quadrotor_x_columns():
    M = load_predefined("quadrotor_x").forward
    s = math.sqrt(0.5)
    np.testing.assert_allclose(M[:, 0], [0, 0, 1, -0.70711, 0.70711, 1], atol=5e-6)
    np.testing.assert_allclose(M[:, :4], [
        [0, 0, 0, 0], [0, 0, 0, 0], [1, 1, 1, 1],
        [-s, -s, s, s], [s, -s, -s, s], [1, -1, 1, -1]], atol=1e-15)
    np.testing.assert_array_equal(M[:, 4:], 0)


def test_passthrough_identity():
    u = np.array([1.5, -2.0, 3.25, 0.1, -0.2, 7.0])
    np.testing.assert_array_equal(mix(load_predefined("passthrough"), u), np.concatenate([u, np.zeros(4)]))


def test_unknown_mixer():
    with pytest.raises(UnknownMixerError):
        load_predefined("octo_plus")


@pytest.mark.parametrize("name", PREDEFINED)
def test_predefined_moore_penrose(name):
    m = load_predefined(name)
    _mp_check(m.forward, m.inverse, 1e-8)


@pytest.mark.parametrize("name", ["quadrotor_x", "hexarotor_x"])
def test_multirotor_full_row_rank_on_nonzero_rows(name):
    m = load_predefined(name)
    rows = np.flatnonzero(np.any(m.forward != 0, axis=1))
    MP = m.forward @ m.inverse
    assert np.linalg.norm(MP[np.ix_(rows, rows)] - np.eye(len(rows)), np.inf) < 1e-9


@settings(max_examples=100)
@given(
    st.sampled_from(PREDEFINED),
    arrays(np.float64, 6, elements=st.floats(-50, 50)),
    arrays(np.float64, 6, elements=st.floats(-50, 50)),
    st.floats(-10, 10), st.floats(-10, 10),
)
def test_mix_linearity(name, u1, u2, a, b):
    m = load_predefined(name)
    lhs = mix(m, a * u1 + b * u2)
    rhs = a * mix(m, u1) + b * mix(m, u2)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12 * max(1.0, np.abs(u1).max() + np.abs(u2).max()) * 100)


def test_mixer_config_validation():
    with pytest.raises(InvalidMatrixError):
        MixerConfig("x", np.zeros((6, 9)), StoredAs.FORWARD_M, _headers())
    with pytest.raises(InvalidMatrixError):
        MixerConfig("x", np.zeros((6, 10)), StoredAs.FORWARD_M, _headers()[:9])
    bad = np.zeros((6, 10))
    bad[2, 3] = np.nan
    with pytest.raises(InvalidMatrixError):
        MixerConfig("x", bad, StoredAs.FORWARD_M, _headers())
    with pytest.raises(ValueError):
        OutputChannelConfig(ChannelKind.MOTOR, 0)


def test_mixer_matrix_is_immutable():
    m = load_predefined("quadrotor_x")
    with pytest.raises(ValueError):
        m.matrix[0, 0] = 1.0
    with pytest.raises(ValueError):
        m.inverse[0, 0] = 1.0


# --- blending ---------------------------------------------------------------

ALL_OVERRIDES = [OverrideState(a, t, o) for a in (False, True) for t in (False, True) for o in (False, True)]


@pytest.mark.parametrize("ov", ALL_OVERRIDES)
def test_blend_truth_table(ov):
    pri = load_predefined("quadrotor_x")
    sec = load_predefined("passthrough")
    eff = blend_mixers(pri, sec, ov)
    f_src = pri if (not ov.offboard_active or ov.throttle_override) else sec
    q_src = pri if (not ov.offboard_active or ov.attitude_override) else sec
    np.testing.assert_array_equal(eff.inverse[:, :3], f_src.inverse[:, :3])
    np.testing.assert_array_equal(eff.inverse[:, 3:], q_src.inverse[:, 3:])
    assert eff.channels == pri.channels


def test_blend_both_overrides_is_primary():
    pri, sec = load_predefined("quadrotor_x"), load_predefined("hexarotor_x")
    eff = blend_mixers(pri, sec, OverrideState(True, True, True))
    np.testing.assert_array_equal(eff.inverse, pri.inverse)


def test_blend_no_overrides_is_secondary_with_primary_headers():
    pri, sec = load_predefined("quadrotor_x"), load_predefined("fixedwing_vtail")
    eff = blend_mixers(pri, sec, OverrideState(False, False, True))
    np.testing.assert_array_equal(eff.inverse, sec.inverse)
    assert eff.channels == pri.channels != sec.channels


@pytest.mark.parametrize("ov", ALL_OVERRIDES)
def test_blend_degenerate(ov):
    pri = load_predefined("hexarotor_x")
    np.testing.assert_array_equal(blend_mixers(pri, pri, ov).inverse, pri.inverse)
    np.testing.assert_array_equal(blend_mixers(pri, None, ov).inverse, pri.inverse)


# --- custom mixers ----------------------------------------------------------


def test_custom_vtail_bit_exact():
    vt = load_predefined("fixedwing_vtail")
    custom = load_custom(custom_params(vt, "PRI"), "PRI")
    rng = np.random.default_rng(3)
    for u in rng.normal(size=(50, 6)):
        assert mix(custom, u).tobytes() == mix(vt, u).tobytes()
    assert custom.channels == vt.channels


def test_custom_forward_quad_round_trip():
    q = load_predefined("quadrotor_x")
    c = load_custom(custom_params(q, "SEC"), "SEC")
    np.testing.assert_array_equal(c.inverse, q.inverse)


def test_custom_zero_matrix():
    params = custom_params(load_predefined("passthrough"), "PRI")
    for k in params:
        if k.count("_") == 3 and k.split("_")[2].isdigit():
            params[k] = 0.0
    m = load_custom(params)
    assert rank(m.forward) == 0
    np.testing.assert_array_equal(mix(m, [1, 2, 3, 4, 5, 6]), np.zeros(10))


def test_custom_invalid_kind_names_parameter():
    params = custom_params(load_predefined("quadrotor_x"))
    params["MIX_PRI_OUT3_TYPE"] = 9
    with pytest.raises(MixerValidationError) as exc:
        load_custom(params)
    assert exc.value.params == ["MIX_PRI_OUT3_TYPE"]
    assert "MIX_PRI_OUT3_TYPE" in str(exc.value)


def test_custom_collects_all_bad_parameters():
    params = custom_params(load_predefined("quadrotor_x"))
    params["MIX_PRI_0_0"] = math.nan
    params["MIX_PRI_OUT1_RATE"] = 0
    params["MIX_PRI_OUT2_RATE"] = -50
    with pytest.raises(MixerValidationError) as exc:
        load_custom(params)
    assert set(exc.value.params) == {"MIX_PRI_0_0", "MIX_PRI_OUT1_RATE", "MIX_PRI_OUT2_RATE"}


def test_custom_missing_parameters_warn(caplog):
    params = custom_params(load_predefined("quadrotor_x"))
    del params["MIX_PRI_5_9"], params["MIX_PRI_OUT9_TYPE"]
    with caplog.at_level(logging.WARNING):
        m = load_custom(params)
    assert "MIX_PRI_5_9" in caplog.text and "MIX_PRI_OUT9_TYPE" in caplog.text
    assert m.channels[9].kind is ChannelKind.AUX


# --- output stage -----------------------------------------------------------


def _single_motor_mixer():
    kinds = [ChannelKind.MOTOR, ChannelKind.SERVO, ChannelKind.AUX, ChannelKind.GPIO] + [ChannelKind.AUX] * 6
    return MixerConfig("t", np.zeros((6, 10)), StoredAs.FORWARD_M,
                       tuple(OutputChannelConfig(k, 50) for k in kinds))


MOTOR = [MotorDescriptor(MotorGeometry((0, 0, 0)), REF_PROP, REF_MOTOR, 0)]
ENV = Environment(rho=RHO)


def test_output_stage_clamps():
    m = _single_motor_mixer()
    out = output_stage(np.array([1.3, -4.0] + [0] * 8), m)
    assert out[0] == 1.0 and out[1] == -1.0


def test_output_stage_motor_param_zero_speed():
    out = output_stage(np.zeros(10), _single_motor_mixer(), MOTOR, True, env=ENV)
    assert out[0] == pytest.approx(REF_MOTOR.i0 * REF_MOTOR.R / REF_MOTOR.V_max, rel=1e-15)


def test_output_stage_motor_param_reference():
    tau = np.zeros(10)
    tau[0] = 400.0**2
    out = output_stage(tau, _single_motor_mixer(), MOTOR, True, env=ENV)
    assert out[0] == pytest.approx(DELTA_AT_400, rel=1e-13)


def test_output_stage_negative_omega_squared_clamps_to_zero_speed():
    tau = np.zeros(10)
    tau[0] = -100.0
    out = output_stage(tau, _single_motor_mixer(), MOTOR, True, env=ENV)
    assert out[0] == pytest.approx(REF_MOTOR.i0 * REF_MOTOR.R / REF_MOTOR.V_max)


def test_output_stage_aux_passthrough():
    aux = np.arange(10, dtype=float) / 10
    out = output_stage(np.full(10, 5.0), _single_motor_mixer(), aux_values=aux)
    np.testing.assert_array_equal(out[2:], aux[2:])


@given(arrays(np.float64, 10, elements=st.floats(-1e3, 1e3)))
def test_output_stage_idempotent(tau):
    m = _single_motor_mixer()
    once = output_stage(tau, m)
    np.testing.assert_array_equal(output_stage(once, m), once)
    assert 0 <= once[0] <= 1 and -1 <= once[1] <= 1


def test_report_helpers():
    q = load_predefined("quadrotor_x")
    assert rank(q.forward) == 4
    res = moore_penrose_residuals(q.forward, q.inverse)
    assert set(res) == {"MPM=M", "PMP=P", "(MP)^T=MP", "(PM)^T=PM"}
    assert max(res.values()) < 1e-9
