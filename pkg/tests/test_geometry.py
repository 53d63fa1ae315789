import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vlcsee.geometry import (
    ELEMENTARY_CHARGE,
    LuminaryParams,
    NoiseParams,
    ReceiverParams,
    Scene,
    build_channel,
    channel_gain,
    concentrator_gain,
    emission_intensity,
    lambertian_order,
    led_layout,
    noise_variance,
    sample_users,
)

R2 = math.sqrt(2.0)


def test_lambertian_order_sixty_degrees_is_one():
    assert lambertian_order(60.0) == 1


def test_emission_intensity_examples():
    assert emission_intensity(0.0, 1) == pytest.approx(1.0 / math.pi, rel=1e-12)
    assert emission_intensity(90.0, 1) == pytest.approx(0.0, abs=1e-16)
    phi = math.degrees(math.acos(2.5 / math.sqrt(10.25)))
    assert emission_intensity(phi, 1) == pytest.approx(0.78086 / math.pi, rel=1e-4)


def test_concentrator_gain_examples():
    assert concentrator_gain(0.0, 60.0, 1.5) == pytest.approx(3.0, rel=1e-12)
    assert concentrator_gain(61.0, 60.0, 1.5) == 0.0
    assert concentrator_gain(59.9, 60.0, 1.5) == pytest.approx(3.0, rel=1e-12)


def _hand_gain(led, rx):
    # independent evaluation with l = 1, A_r = 1e-4, T_s = 1, g = 1.5^2 / sin^2(60 deg)
    d = np.subtract(rx, led)
    t = float(np.linalg.norm(d))
    cos_angle = abs(d[2]) / t
    return 1e-4 / t**2 * (2.0 / (2.0 * math.pi)) * cos_angle * 3.0 * cos_angle


def test_channel_gain_directly_below():
    h = channel_gain(LuminaryParams((-R2, -R2, 3.0)), ReceiverParams((-R2, -R2, 0.5)))
    assert h == pytest.approx(1.528e-5, rel=1e-3)
    assert h == pytest.approx(_hand_gain((-R2, -R2, 3.0), (-R2, -R2, 0.5)), rel=1e-12)


def test_channel_gain_room_centre():
    h = channel_gain(LuminaryParams((-R2, -R2, 3.0)), ReceiverParams((0.0, 0.0, 0.5)))
    assert h == pytest.approx(5.68e-6, rel=1e-3)


def test_channel_gain_outside_fov_is_zero():
    off = 2.5 * math.tan(math.radians(60.0)) + 0.05
    assert channel_gain(LuminaryParams((0.0, 0.0, 3.0)), ReceiverParams((off, 0.0, 0.5))) == 0.0


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 55.0), st.floats(1.0, 3.0), st.floats(0.0, 2 * math.pi))
def test_gain_scales_inverse_square_along_ray(angle_deg, dist, azimuth):
    # same angles, double the distance -> a quarter of the gain
    led = np.array([0.0, 0.0, 10.0])
    ray = np.array([math.sin(math.radians(angle_deg)) * math.cos(azimuth),
                    math.sin(math.radians(angle_deg)) * math.sin(azimuth),
                    -math.cos(math.radians(angle_deg))])
    h1 = channel_gain(LuminaryParams(tuple(led)), ReceiverParams(tuple(led + dist * ray)))
    h2 = channel_gain(LuminaryParams(tuple(led)), ReceiverParams(tuple(led + 2 * dist * ray)))
    assert h2 == pytest.approx(h1 / 4.0, rel=1e-10)


def test_noise_variance_one_milliwatt():
    rx = ReceiverParams((0.0, 0.0, 0.5))
    noise = NoiseParams()
    shot = 2 * ELEMENTARY_CHARGE * 0.54 * 1e-3 * 20e6
    assert shot == pytest.approx(3.4608e-15, rel=1e-4)
    assert noise_variance(0.0, rx, noise) == pytest.approx(1.18829e-14 + 5e-16, rel=1e-4)
    assert noise_variance(1e-3, rx, noise) == pytest.approx(1.5844e-14, rel=1e-3)


def _scene(users):
    return Scene(tuple(LuminaryParams(p) for p in led_layout("2x2")), tuple(ReceiverParams(u) for u in users))


def test_build_channel_shapes_and_purity():
    scene = _scene(sample_users(3, 3))
    c1 = build_channel(scene, np.full(4, 0.5))
    c2 = build_channel(scene, np.full(4, 0.5))
    assert c1.gains.shape == (3, 4)
    assert np.array_equal(c1.gains, c2.gains)
    assert np.array_equal(c1.noise_vars_effective, c2.noise_vars_effective)


def test_noise_increases_with_dc_bias():
    scene = _scene(sample_users(5, 3))
    base = build_channel(scene, np.full(4, 0.5)).noise_vars_effective
    for n in range(4):
        dc = np.full(4, 0.5)
        dc[n] = 1.0
        bumped = build_channel(scene, dc).noise_vars_effective
        gains = build_channel(scene, dc).gains[:, n]
        assert np.all(bumped[gains > 0] > base[gains > 0])


def test_zero_dc_leaves_ambient_and_preamp_noise():
    scene = _scene([(0.0, 0.0, 0.5)])
    nv = build_channel(scene, np.zeros(4)).noise_vars_effective[0]
    expected = noise_variance(0.0, scene.users[0], scene.noise) / (0.54 * 2.0) ** 2
    assert nv == pytest.approx(expected, rel=1e-12)


def test_no_line_of_sight_raises():
    leds = (LuminaryParams((0.0, 0.0, 3.0)),)
    with pytest.raises(ValueError):
        build_channel(Scene(leds, (ReceiverParams((8.0, 0.0, 0.5)),), room_dims=(20.0, 20.0, 3.0)), [0.5])


def test_led_layouts():
    pts = led_layout("2x2")
    assert sorted(pts) == sorted((sx * R2, sy * R2, 3.0) for sx in (-1, 1) for sy in (-1, 1))
    six = np.array(led_layout("2x3"))
    assert six.shape == (6, 3)
    assert np.allclose(six[:, :2].mean(axis=0), 0.0)
    nine = led_layout("3x3")
    assert len(nine) == 9
    assert any(np.allclose(p, (0.0, 0.0, 3.0)) for p in nine)


def test_sample_users():
    assert sample_users(7, 3) == sample_users(7, 3)
    assert all(u[2] == 0.5 for u in sample_users(7, 3))
    xy = np.array(sample_users(11, 10_000))[:, :2]
    # uniform on [-2.5, 2.5]: std of the mean is 5 / sqrt(12 * 1e4)
    assert np.all(np.abs(xy.mean(axis=0)) < 3 * 5.0 / math.sqrt(12 * 10_000))
