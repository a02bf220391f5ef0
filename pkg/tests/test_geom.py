import numpy as np
import pytest

from dpemu.cli.waveforms import waveform_gen
from dpemu.errors import InvalidRho, ZeroDistance
from dpemu.geom import (C, Angle, Kinematics, direction_angles, doppler_approx_error, path_between,
                        propagate, steering_vector, unit_vectors)


def test_speed_of_light_is_si():
    assert C == 299792458.0


@pytest.mark.parametrize("az, pol", [(-180.5, 10), (180.0, 10), (0, -1), (0, 180.01)])
def test_angle_rejects_out_of_range(az, pol):
    with pytest.raises(ValueError):
        Angle(az, pol)


def test_angle_wrapping_and_antipode():
    assert Angle.wrapped(190.0, 45.0) == Angle(-170.0, 45.0)
    a = Angle(30.0, 60.0)
    np.testing.assert_allclose(a.antipode().unit(), -a.unit(), atol=1e-15)


def test_direction_angles_round_trip():
    rng = np.random.default_rng(3)
    az = rng.uniform(-180, 180, 50)
    pol = rng.uniform(1, 179, 50)
    a2, p2 = direction_angles(5.0 * unit_vectors(az, pol))
    np.testing.assert_allclose(a2, az, atol=1e-9)
    np.testing.assert_allclose(p2, pol, atol=1e-9)


@pytest.mark.parametrize("dt, pos, vel, expected", [
    (0.0, (0, 0, 0), (100, 0, 0), (0, 0, 0)),
    (1.3e-3, (0, 0, 0), (100, 0, 0), (0.13, 0, 0)),
    (0.5, (8000, 0, 0), (0, 100, 0), (8000, 50, 0)),
])
def test_propagate(dt, pos, vel, expected):
    np.testing.assert_allclose(propagate(Kinematics(pos, vel), dt), expected, atol=1e-12)


def test_propagate_composes_additively():
    k = Kinematics([1.0, 2.0, 3.0], [4.0, -5.0, 6.0], reference_time=0.2)
    k2 = Kinematics(propagate(k, 0.5), k.velocity, reference_time=0.5)
    np.testing.assert_allclose(propagate(k2, 0.9), propagate(k, 0.9), atol=1e-12)


def test_kinematics_rejects_improper_rotation():
    with pytest.raises(ValueError):
        Kinematics([0, 0, 0], orientation=np.diag([1.0, 1.0, -1.0]))


def test_static_path():
    p = path_between(Kinematics([0, 0, 0]), Kinematics([1000, 0, 0]), 1e9, 0.0)
    assert p.doppler_hz == 0.0
    assert p.delay_s == pytest.approx(3.33564095e-6, rel=1e-8)
    assert p.delay_s * C == pytest.approx(p.distance_m, rel=1e-12)
    assert p.loss_amp == pytest.approx(1e-3)
    assert p.outgoing == Angle(0.0, 90.0)


def test_transverse_motion_has_no_doppler():
    p = path_between(Kinematics([0, 0, 0]), Kinematics([1000, 0, 0], [0, 10, 0]), 1e9, 0.0)
    assert p.doppler_hz == 0.0


def test_closing_doppler_matches_finite_difference():
    # Oracle: -fc * d(tau)/dt by central difference over a 1 us step.
    src = Kinematics([0, 0, 0])
    dst = Kinematics([1000, 0, 0], [-100, 0, 0])
    fc, h = 1e9, 1e-6
    p = path_between(src, dst, fc, 0.0)
    tau = lambda t: path_between(src, dst, fc, t).delay_s
    fd = -fc * (tau(h) - tau(-h)) / (2 * h)
    assert p.doppler_hz == pytest.approx(333.564, rel=1e-5)
    assert p.doppler_hz == pytest.approx(fd, rel=1e-3)


def test_path_reciprocity():
    rng = np.random.default_rng(0)
    for _ in range(20):
        a = Kinematics(rng.normal(size=3) * 1e3, rng.normal(size=3) * 300)
        b = Kinematics(rng.normal(size=3) * 1e3, rng.normal(size=3) * 300)
        ab, ba = path_between(a, b, 1e9, 0.3), path_between(b, a, 1e9, 0.3)
        assert ab.distance_m == pytest.approx(ba.distance_m, rel=1e-14)
        assert ab.doppler_hz == pytest.approx(ba.doppler_hz, rel=1e-12, abs=1e-9)


def test_angles_use_local_frames():
    # Destination rotated 90 degrees about z: a wave travelling +x arrives along local -y.
    rz = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    p = path_between(Kinematics([0, 0, 0]), Kinematics([10, 0, 0], orientation=rz), 1e9, 0.0)
    np.testing.assert_allclose(p.incoming.unit(), [0, -1, 0], atol=1e-12)
    np.testing.assert_allclose(p.outgoing.unit(), [1, 0, 0], atol=1e-12)


def test_zero_distance():
    with pytest.raises(ZeroDistance):
        path_between(Kinematics([1, 2, 3]), Kinematics([1, 2, 3]), 1e9, 0.0)


@pytest.mark.parametrize("theta, expected", [
    (Angle(0, 0), (0, 0, 1)), (Angle(0, 90), (1, 0, 0)), (Angle(90, 90), (0, 1, 0))])
def test_steering_vector_axes(theta, expected):
    np.testing.assert_allclose(steering_vector(theta) * C, expected, atol=1e-15)


def test_steering_vector_norm():
    rng = np.random.default_rng(1)
    for az, pol in zip(rng.uniform(-180, 180, 30), rng.uniform(0, 180, 30)):
        assert np.linalg.norm(steering_vector(Angle(az, pol))) * C == pytest.approx(1.0, rel=1e-15)


def test_doppler_error_zero_rho_and_invalid_rho():
    u = np.ones(1000, dtype=complex)
    assert doppler_approx_error(u, 1e9, 0.0, 1e6) == 0.0
    with pytest.raises(InvalidRho):
        doppler_approx_error(u, 1e9, 1e-3, 1e6)


def test_doppler_error_tone_matches_analytic():
    # For a tone at f the modulation approximation misses a phase ramp 2 pi f rho t,
    # so the relative RMS error is the RMS of |1 - exp(j 2 pi f rho t)| over the window.
    fs, f, rho = 1.25e9, 1e6, 100 / C
    u = waveform_gen("tone", {"freq_hz": f}, fs, 20e-6)
    err = doppler_approx_error(u, 1e9, rho, fs)
    n = len(u)
    lo = max(int(np.ceil(0.05 * n)), 64)
    t = np.arange(lo, n - lo) / fs
    expected = np.sqrt(np.mean(np.abs(1 - np.exp(2j * np.pi * f * rho * t)) ** 2))
    assert err < 1e-3
    assert err == pytest.approx(expected, rel=0.02)


def test_doppler_error_grows_with_bandwidth():
    fs, rho = 1.25e9, 100 / C
    errs = [doppler_approx_error(waveform_gen("tone", {"freq_hz": 1e6}, fs, 20e-6), 1e9, rho, fs)]
    for b in (50e6, 500e6):
        errs.append(doppler_approx_error(waveform_gen("lfm", {"bandwidth_hz": b}, fs, 20e-6), 1e9, rho, fs))
    assert errs[0] < errs[1] < errs[2] < 5e-2
