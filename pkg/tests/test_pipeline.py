"""Offline pipeline tests: mocap I/O, reconstruction, validation, envelope."""

import math

import numpy as np
import pytest

from conftest import make_trim_flight
from flapsim.errors import ConfigError, SchemaError
from flapsim.harness import Scenario, run_scenario
from flapsim.controller import ConstantSchedule, Setpoint
from flapsim.dynamics import SimState
from flapsim.kinematics import EulerAngles321, euler_to_quat, euler_to_rotmat
from flapsim.pipeline import (
    EnvelopeGrid,
    FilterConfig,
    MocapTrajectory,
    estimate_body_offset,
    flight_envelope,
    load_command_csv,
    load_mocap_csv,
    load_runlog_csv,
    reconstruct,
    reconstruct_runlog,
    trajectory_from_runlog,
    validate_model,
    write_mocap_csv,
)
from flapsim.vehicle import hover_cmd, hover_thrust


def constant_trajectory(n=120, pos=(0.1, 0.2, 0.3), euler=(0.0, 0.0, 0.0), rate=240.0):
    t = np.arange(n) / rate
    q = euler_to_quat(EulerAngles321(*euler)).canonical()
    quat = np.tile([q.w, q.x, q.y, q.z], (n, 1))
    return MocapTrajectory(t, np.tile(pos, (n, 1)), quat, source="synthetic")


# ---------------------------------------------------------------------------
# mocap files
# ---------------------------------------------------------------------------


def test_load_mocap_minimal(tmp_path):
    f = tmp_path / "m.csv"
    f.write_text(
        "t,x,y,z,qw,qx,qy,qz\n"
        "0.0,0.0,0.0,0.0,1.0,0.0,0.0,0.0\n"
        "0.01,0.001,0.0,0.0,1.0,0.0,0.0,0.0\n"
    )
    tr = load_mocap_csv(f)
    assert len(tr) == 2
    assert tr.sample_rate == pytest.approx(100.0, rel=1e-9)
    assert tr.source == str(f)
    assert tr.gap_indices == ()
    tr2 = load_mocap_csv(f, source="flight-3")
    assert tr2.source == "flight-3"


def test_load_mocap_canonicalizes_negated_quaternions(tmp_path):
    s = math.sqrt(0.5)
    f = tmp_path / "m.csv"
    f.write_text(
        "t,x,y,z,qw,qx,qy,qz\n"
        f"0.0,0,0,0,{-s},0.0,0.0,{-s}\n"
        "0.01,0,0,0,1.0,0.0,0.0,0.0\n"
    )
    tr = load_mocap_csv(f)
    np.testing.assert_allclose(tr.quat[0], [s, 0.0, 0.0, s], atol=1e-12)
    assert np.all(tr.quat[:, 0] >= 0.0)


def test_load_mocap_scalar_last_header(tmp_path):
    f = tmp_path / "m.csv"
    f.write_text(
        "t,x,y,z,qx,qy,qz,qw\n"
        "0.0,1,2,3,0.0,0.0,0.0,1.0\n"
        "0.01,1,2,3,0.0,0.0,0.0,1.0\n"
    )
    tr = load_mocap_csv(f)
    np.testing.assert_array_equal(tr.quat[0], [1.0, 0.0, 0.0, 0.0])
    np.testing.assert_array_equal(tr.pos_w[0], [1.0, 2.0, 3.0])


@pytest.mark.parametrize(
    "text,match",
    [
        ("", "empty file"),
        ("t,x,y,z\n", "does not match"),
        ("t,x,y,z,qw,qx,qy,qz\n0,0,0,0,1,0,0,0\n", "at least 2 data rows"),
        ("t,x,y,z,qw,qx,qy,qz\n0,0,0,0,1,0,0\n", ":2: expected 8 columns"),
        ("t,x,y,z,qw,qx,qy,qz\n0,0,0,0,1,0,0,0\n0.01,zero,0,0,1,0,0,0\n", ":3:"),
        (
            "t,x,y,z,qw,qx,qy,qz\n0,0,0,0,1,0,0,0\n0,0,0,0,1,0,0,0\n",
            "not strictly increasing",
        ),
        (
            "t,x,y,z,qw,qx,qy,qz\n0,0,0,0,1,0,0,0\n0.01,0,0,0,0.5,0,0,0\n",
            "not unit",
        ),
    ],
)
def test_load_mocap_rejects(tmp_path, text, match):
    f = tmp_path / "bad.csv"
    f.write_text(text)
    with pytest.raises(SchemaError, match=match):
        load_mocap_csv(f)


def test_mocap_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    n = 20
    t = np.arange(n) / 240.0
    pos = rng.normal(size=(n, 3)) * 0.1
    quat = rng.normal(size=(n, 4))
    quat /= np.linalg.norm(quat, axis=1)[:, None]
    tr = MocapTrajectory(t, pos, quat)
    f = tmp_path / "rt.csv"
    write_mocap_csv(f, tr)
    back = load_mocap_csv(f)
    np.testing.assert_array_equal(back.t, tr.t)
    np.testing.assert_array_equal(back.pos_w, tr.pos_w)
    # quaternions are re-normalized on load; only ulp-level drift allowed
    np.testing.assert_allclose(back.quat, tr.quat, atol=1e-15)


def test_mocap_gap_detection():
    t = np.concatenate([np.arange(10) / 240.0, [10.0 / 240.0 + 5.0 / 240.0]])
    n = len(t)
    quat = np.tile([1.0, 0.0, 0.0, 0.0], (n, 1))
    tr = MocapTrajectory(t, np.zeros((n, 3)), quat)
    assert tr.gap_indices == (9,)
    with pytest.raises(ValueError, match="timing gap"):
        reconstruct(tr)


def test_trajectory_from_runlog_matches_truth(params, gain):
    sched = ConstantSchedule(Setpoint.hold((0.0, 0.0, 0.0)))
    init = SimState((0.01, 0.0, 0.0), (0, 0, 0), EulerAngles321(0, 0, 0), (0, 0, 0))
    sc = Scenario(name="short", duration=0.1, initial=init, schedule=sched)
    log = run_scenario(sc, params, gain)
    tr = trajectory_from_runlog(log)
    assert tr.source == "short"
    np.testing.assert_array_equal(tr.t, log.t)
    np.testing.assert_array_equal(tr.pos_w, log.pos_w)
    q5 = euler_to_quat(EulerAngles321(*log.euler[5])).canonical()
    np.testing.assert_allclose(tr.quat[5], [q5.w, q5.x, q5.y, q5.z], atol=1e-15)


def test_load_runlog_csv_rejects(tmp_path):
    f = tmp_path / "r.csv"
    f.write_text("t,x,y\n")
    with pytest.raises(SchemaError, match="column order"):
        load_runlog_csv(f)
    from flapsim.harness import RUNLOG_COLUMNS

    header = ",".join(RUNLOG_COLUMNS)
    f.write_text(header + "\n")
    with pytest.raises(SchemaError, match="no data rows"):
        load_runlog_csv(f)
    row = ",".join(["0.0"] * len(RUNLOG_COLUMNS))
    f.write_text(header + "\n" + row + "\n" + row + "\n")
    with pytest.raises(SchemaError, match="not strictly increasing"):
        load_runlog_csv(f)


def test_load_command_csv(tmp_path):
    f = tmp_path / "c.csv"
    f.write_text("t,A,dA,Vo\n0.0,129.0,0.0,0.0\n0.5,130.0,1.0,-2.0\n")
    t, cmds = load_command_csv(f)
    np.testing.assert_array_equal(t, [0.0, 0.5])
    np.testing.assert_array_equal(cmds[1], [130.0, 1.0, -2.0])
    f.write_text("time,A,dA,Vo\n0,0,0,0\n")
    with pytest.raises(SchemaError, match="does not match"):
        load_command_csv(f)
    f.write_text("t,A,dA,Vo\n0.5,129,0,0\n0.1,129,0,0\n")
    with pytest.raises(SchemaError, match="increasing"):
        load_command_csv(f)
    f.write_text("t,A,dA,Vo\n")
    with pytest.raises(SchemaError, match="no data rows"):
        load_command_csv(f)


# ---------------------------------------------------------------------------
# reconstruction
# ---------------------------------------------------------------------------


def test_reconstruct_constant_pose_is_static():
    rs = reconstruct(constant_trajectory(n=120))
    assert len(rs) == 120 - 2 * 24  # 2 cutoff periods trimmed per end at 240 Hz
    np.testing.assert_allclose(rs.pos_w, np.tile([0.1, 0.2, 0.3], (len(rs), 1)), atol=1e-9)
    np.testing.assert_allclose(rs.vel_w, 0.0, atol=1e-9)
    np.testing.assert_allclose(rs.vel_b, 0.0, atol=1e-9)
    np.testing.assert_allclose(rs.omega_b, 0.0, atol=1e-9)
    np.testing.assert_allclose(rs.accel_body, 0.0, atol=1e-9)
    np.testing.assert_allclose(rs.euler, 0.0, atol=1e-9)


def test_reconstruct_free_fall_acceleration():
    rate = 240.0
    t = np.arange(240) / rate
    pos = np.zeros((240, 3))
    pos[:, 2] = -0.5 * 9.81 * t**2
    quat = np.tile([1.0, 0.0, 0.0, 0.0], (240, 1))
    rs = reconstruct(MocapTrajectory(t, pos, quat))
    mid = len(rs) // 2
    assert rs.accel_w[mid, 2] == pytest.approx(-9.81, rel=1e-3)
    assert rs.accel_body[mid, 2] == pytest.approx(-9.81, rel=1e-3)
    assert rs.vel_w[mid, 2] == pytest.approx(-9.81 * rs.t[mid], rel=1e-3)


def test_reconstruct_zero_phase_filtering():
    # a 2 Hz tone passes the 20 Hz zero-phase filter without lag or droop
    rate = 240.0
    t = np.arange(480) / rate
    pos = np.zeros((480, 3))
    pos[:, 0] = 0.05 * np.sin(2.0 * math.pi * 2.0 * t)
    quat = np.tile([1.0, 0.0, 0.0, 0.0], (480, 1))
    rs = reconstruct(MocapTrajectory(t, pos, quat))
    ref = 0.05 * np.sin(2.0 * math.pi * 2.0 * rs.t)
    np.testing.assert_allclose(rs.pos_w[:, 0], ref, atol=5e-5)
    # velocity should match the analytic derivative mid-window
    vref = 0.05 * 2.0 * math.pi * 2.0 * np.cos(2.0 * math.pi * 2.0 * rs.t)
    mid = slice(len(rs) // 4, 3 * len(rs) // 4)
    np.testing.assert_allclose(rs.vel_w[mid, 0], vref[mid], rtol=5e-3, atol=1e-4)


def test_reconstruct_short_trajectory_rejected():
    with pytest.raises(ValueError, match="too short"):
        reconstruct(constant_trajectory(n=8))


def test_reconstruct_cutoff_above_nyquist_rejected():
    tr = constant_trajectory(n=40, rate=30.0)
    with pytest.raises(ConfigError, match="Nyquist"):
        reconstruct(tr, FilterConfig(cutoff_hz=20.0))


def test_filter_config_validation_and_margins():
    with pytest.raises(ConfigError, match="cutoff"):
        FilterConfig(cutoff_hz=0.0)
    with pytest.raises(ConfigError, match="order"):
        FilterConfig(order=0)
    with pytest.raises(ConfigError, match="edge_margin"):
        FilterConfig(edge_margin=-1)
    assert FilterConfig(cutoff_hz=20.0).margin_for(240.0) == 24
    assert FilterConfig(cutoff_hz=60.0).margin_for(240.0) == 8  # floor
    assert FilterConfig(edge_margin=5).margin_for(240.0) == 5
    # disabled filter only trims the one-sided difference samples
    rs = reconstruct(constant_trajectory(n=40), FilterConfig(enabled=False))
    assert len(rs) == 36


def test_attach_wrench_zero_order_hold():
    rs = reconstruct(constant_trajectory(n=120))
    t_src = np.array([0.0, 0.3])
    w_src = np.array([[1e-3, 0.0, 0.0], [2e-3, 0.0, 0.0]])
    rs2 = rs.attach_wrench(t_src, w_src)
    assert rs.wrench is None  # original untouched
    before = rs2.wrench[rs2.t < 0.3]
    after = rs2.wrench[rs2.t >= 0.3]
    assert np.all(before[:, 0] == 1e-3)
    assert np.all(after[:, 0] == 2e-3)
    with pytest.raises(ValueError, match="empty or mismatched"):
        rs.attach_wrench(np.array([0.0]), w_src)


def test_attach_commands_maps_through_actuator_fits(params):
    rs = reconstruct(constant_trajectory(n=120))
    ref = hover_cmd(params)
    rs2 = rs.attach_commands([0.0], [[ref.A, ref.dA, ref.Vo]], params)
    np.testing.assert_allclose(rs2.wrench[:, 0], hover_thrust(params), rtol=1e-9)
    np.testing.assert_array_equal(rs2.wrench[:, 1:], 0.0)
    np.testing.assert_allclose(rs2.cmd[:, 0], ref.A)
    with pytest.raises(ValueError, match="empty or mismatched"):
        rs.attach_commands([], np.zeros((0, 3)), params)


# ---------------------------------------------------------------------------
# body-offset estimation
# ---------------------------------------------------------------------------


def test_offset_estimator_identity_for_aligned_flight(params):
    tr = make_trim_flight(params, 0.0)
    off = estimate_body_offset(tr, (0.06, 0.24))
    assert off.tilt < 1e-6
    np.testing.assert_allclose(off.rotation, np.eye(3), atol=1e-6)


def test_offset_estimator_recovers_five_degrees(params):
    tr = make_trim_flight(params, 5.0)
    off = estimate_body_offset(tr, (0.06, 0.24))
    assert math.degrees(off.tilt) == pytest.approx(5.0, abs=0.1)
    # the rotation moves the body z-axis by exactly the tilt angle
    z_moved = off.rotation @ np.array([0.0, 0.0, 1.0])
    assert float(z_moved @ [0.0, 0.0, 1.0]) == pytest.approx(math.cos(off.tilt), rel=1e-9)


def test_offset_estimator_rejects_large_tilt(params):
    tr = make_trim_flight(params, 35.0)
    with pytest.raises(ValueError, match="exceeds 30 deg"):
        estimate_body_offset(tr, (0.06, 0.24))


def test_offset_estimator_rejects_hover_window():
    with pytest.raises(ValueError, match="hover/rest"):
        estimate_body_offset(constant_trajectory(n=240), (0.2, 0.8))


def test_offset_estimator_rejects_free_fall():
    t = np.arange(240) / 240.0
    pos = np.zeros((240, 3))
    pos[:, 2] = -0.5 * 9.81 * t**2
    quat = np.tile([1.0, 0.0, 0.0, 0.0], (240, 1))
    tr = MocapTrajectory(t, pos, quat)
    with pytest.raises(ValueError, match="free-fall"):
        estimate_body_offset(tr, (0.2, 0.8))


def test_offset_estimator_window_validation(params):
    tr = make_trim_flight(params, 5.0)
    with pytest.raises(ValueError, match="positive length"):
        estimate_body_offset(tr, (0.2, 0.2))
    with pytest.raises(ValueError, match="no overlap"):
        estimate_body_offset(tr, (5.0, 6.0))


# ---------------------------------------------------------------------------
# model validation
# ---------------------------------------------------------------------------


def test_validate_model_explains_openloop_flight(params, openloop_log):
    rs = reconstruct_runlog(openloop_log)
    rep = validate_model(rs, params)
    assert rep.measured.shape == rep.predicted.shape == (len(rs), 6)
    # the reconstruction chain reproduces the model's own accelerations
    # to within a couple percent of signal on every driven axis
    assert float(np.max(rep.ratio)) < 0.02
    txt = rep.to_text()
    assert "u_dot" in txt and "error/signal" in txt


def test_validate_model_worsens_with_measurement_noise(params, openloop_log):
    rs_clean = reconstruct_runlog(openloop_log)
    rep_clean = validate_model(rs_clean, params)
    tr = trajectory_from_runlog(openloop_log)
    rng = np.random.default_rng(4)
    noisy = MocapTrajectory(
        tr.t, tr.pos_w + rng.normal(0.0, 0.5e-3, tr.pos_w.shape), tr.quat
    )
    rs_noisy = reconstruct(noisy).attach_wrench(openloop_log.t, openloop_log.wrench)
    rep_noisy = validate_model(rs_noisy, params)
    # translational axes degrade measurably
    assert np.all(rep_noisy.rms_error[0:3] > rep_clean.rms_error[0:3])


def test_validate_model_requires_wrench(params, openloop_log):
    rs = reconstruct(trajectory_from_runlog(openloop_log))
    with pytest.raises(ValueError, match="no command/wrench"):
        validate_model(rs, params)


def test_validate_model_window(params, openloop_log):
    rs = reconstruct_runlog(openloop_log)
    rep = validate_model(rs, params, window=(1.0, 2.0))
    assert rep.t[0] >= 1.0 and rep.t[-1] <= 2.0
    with pytest.raises(ValueError, match="no samples"):
        validate_model(rs, params, window=(50.0, 60.0))


def test_validation_series_csv(tmp_path, params, openloop_log):
    rs = reconstruct_runlog(openloop_log)
    rep = validate_model(rs, params, window=(1.0, 1.1))
    f = tmp_path / "series.csv"
    rep.write_series_csv(f)
    lines = f.read_text().splitlines()
    assert lines[0].startswith("t,meas_u_dot,pred_u_dot")
    assert len(lines) == len(rep.t) + 1


# ---------------------------------------------------------------------------
# flight envelope
# ---------------------------------------------------------------------------


def test_envelope_hover_mass_in_origin_bin():
    rs = reconstruct(constant_trajectory(n=120))
    grid = flight_envelope(rs)
    assert grid.total() == len(rs)
    assert grid.counts[0, 0] == len(rs)


def test_envelope_bins_constructed_flight():
    # constant 31 deg pitch, constant 0.41 m/s body-x speed
    rate = 240.0
    n = 240
    t = np.arange(n) / rate
    e = EulerAngles321(0.0, math.radians(31.0), 0.0)
    R = euler_to_rotmat(e)
    q = euler_to_quat(e).canonical()
    vel_w = R @ np.array([0.41, 0.0, 0.0])
    pos = np.outer(t, vel_w)
    quat = np.tile([q.w, q.x, q.y, q.z], (n, 1))
    rs = reconstruct(MocapTrajectory(t, pos, quat))
    grid = flight_envelope(rs)
    # tilt bin [30, 35) deg is row 6; speed bin [0.40, 0.45) is column 8
    assert grid.counts[6, 8] == grid.total() == len(rs)
    horiz = flight_envelope(rs, speed_mode="horizontal")
    assert horiz.counts[6, 8] == horiz.total()


def test_envelope_clips_outliers_conserving_mass():
    rs = reconstruct(constant_trajectory(n=120))
    fast = rs.__class__(
        t=rs.t, pos_w=rs.pos_w, quat=rs.quat, euler=rs.euler,
        vel_w=rs.vel_w, vel_b=rs.vel_b + np.array([5.0, 0.0, 0.0]),
        omega_b=rs.omega_b, accel_w=rs.accel_w,
        accel_body=rs.accel_body, alpha_body=rs.alpha_body,
    )
    grid = flight_envelope(fast)
    assert grid.total() == len(rs)
    assert grid.counts[0, -1] == len(rs)  # clipped into the outermost speed bin


def test_envelope_merge_and_csv(tmp_path):
    rs = reconstruct(constant_trajectory(n=120))
    a = flight_envelope(rs)
    b = flight_envelope(rs)
    merged = a.merge(b)
    assert merged.total() == 2 * len(rs)
    other = flight_envelope(rs, tilt_edges_deg=[0.0, 45.0, 90.0])
    with pytest.raises(ValueError, match="different edges"):
        a.merge(other)
    f = tmp_path / "env.csv"
    merged.write_csv(f)
    lines = f.read_text().splitlines()
    assert lines[0] == "tilt_lo_deg,tilt_hi_deg,speed_lo,speed_hi,count"
    assert len(lines) == 1 + 12 * 16
    total = sum(int(ln.split(",")[-1]) for ln in lines[1:])
    assert total == merged.total()


def test_envelope_validation():
    rs = reconstruct(constant_trajectory(n=120))
    with pytest.raises(ValueError, match="speed_mode"):
        flight_envelope(rs, speed_mode="vertical")
    with pytest.raises(ValueError, match="edges"):
        flight_envelope(rs, tilt_edges_deg=[10.0, 5.0])
    with pytest.raises(ValueError, match="edges"):
        flight_envelope(rs, speed_edges=[0.0])
