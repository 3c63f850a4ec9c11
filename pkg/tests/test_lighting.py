import math

import numpy as np
import pytest

from oculogen.errors import BlackEnvironment, MalformedHdr, NonPositiveScale
from oculogen.lighting import (
    KINDS,
    EnvironmentMap,
    build_sampler,
    eval_radiance,
    generate_procedural_env,
    load_hdr,
    rotate_env,
    sample_direction,
    save_hdr,
    scale_intensity,
    total_power,
)
from oculogen.lighting.envmap import pixel_solid_angles
from oculogen.lighting.rgbe import float_to_rgbe, read_hdr_array, rgbe_to_float, write_hdr


def _smooth_env(seed=0, h=32):
    rng = np.random.default_rng(seed)
    v = (np.arange(h) + 0.5) / h
    u = (np.arange(2 * h) + 0.5) / (2 * h)
    base = np.zeros((h, 2 * h, 3))
    for c in range(3):
        for _ in range(3):
            k = rng.integers(1, 4)
            base[..., c] += rng.uniform(0.2, 1) * np.cos(2 * np.pi * k * u[None, :] + rng.uniform(0, 6)) * np.sin(
                np.pi * v[:, None]
            )
    return EnvironmentMap(base - base.min() + 0.1)


def _random_dirs(n, seed=0):
    d = np.random.default_rng(seed).normal(size=(n, 3))
    return d / np.linalg.norm(d, axis=1)[:, None]


def _rot_y(deg):
    a = math.radians(deg)
    return np.array([[math.cos(a), 0, math.sin(a)], [0, 1, 0], [-math.sin(a), 0, math.cos(a)]])


# --- RGBE -------------------------------------------------------------------


def test_hand_encoded_two_pixel_file(tmp_path):
    # (1,0,0) -> frexp(1) = (0.5, 1): mantissa byte 0.5*256 = 128, exponent 1+128
    body = bytes([128, 0, 0, 129, 0, 128, 0, 129])
    path = tmp_path / "two.hdr"
    path.write_bytes(b"#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y 1 +X 2\n" + body)
    rad = read_hdr_array(path)
    assert rad.shape == (1, 2, 3)
    assert np.array_equal(rad[0], [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


def test_pixel_encoding_matches_reference_bytes():
    px = float_to_rgbe(np.array([[1.0, 0.0, 0.0], [0.5, 0.25, 0.0], [0.0, 0.0, 0.0]]))
    assert px.tolist() == [[128, 0, 0, 129], [128, 64, 0, 128], [0, 0, 0, 0]]
    assert np.array_equal(rgbe_to_float(px[1]), [0.5, 0.25, 0.0])


@pytest.mark.parametrize("rle", [True, False])
def test_round_trip_relative_error(tmp_path, rle):
    rng = np.random.default_rng(1)
    rad = np.exp(rng.uniform(np.log(1e-3), np.log(1e3), size=(37, 74, 3)))
    rad[5, :20] = 0.7  # a run to exercise run-length packets
    rad[0, 0] = 0.0
    path = write_hdr(tmp_path / "r.hdr", rad, rle=rle)
    back = read_hdr_array(path)
    peak = rad.max(axis=2, keepdims=True)
    rel = np.abs(back - rad) / np.where(peak > 0, peak, 1)
    assert rel.max() <= 0.01
    assert back[0, 0].tolist() == [0, 0, 0]


def test_rle_is_smaller_for_flat_rows(tmp_path):
    rad = np.full((16, 32, 3), 0.3)
    a = write_hdr(tmp_path / "a.hdr", rad, rle=True).stat().st_size
    b = write_hdr(tmp_path / "b.hdr", rad, rle=False).stat().st_size
    assert a < b
    assert np.array_equal(read_hdr_array(tmp_path / "a.hdr"), read_hdr_array(tmp_path / "b.hdr"))


def test_truncated_file_rejected(tmp_path):
    rad = np.random.default_rng(2).uniform(0, 5, size=(8, 16, 3))
    path = write_hdr(tmp_path / "t.hdr", rad)
    data = path.read_bytes()
    path.write_bytes(data[: len(data) - 40])
    with pytest.raises(MalformedHdr):
        load_hdr(path)


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "bad.hdr"
    path.write_bytes(b"P6\n2 1\n255\n" + bytes(6))
    with pytest.raises(MalformedHdr):
        read_hdr_array(path)


def test_env_save_load(tmp_path):
    env = generate_procedural_env("cloudy_outdoor", 3, height=16)
    back = load_hdr(save_hdr(env, tmp_path / "c.hdr"))
    peak = env.radiance.max(axis=2, keepdims=True)
    assert (np.abs(back.radiance - env.radiance) / peak).max() <= 0.01
    assert back.id == "c"


# --- lookup -----------------------------------------------------------------


def test_constant_map_eval():
    env = scale_intensity(EnvironmentMap(np.full((8, 16, 3), 0.7)), 3.0)
    out = eval_radiance(env, _random_dirs(200))
    assert np.allclose(out, 2.1, atol=1e-12)


def test_checker_lookup_plus_x():
    # 4x2 map with distinct values; +X sits at u = 0.25, v = 0.5, i.e. on the
    # shared corner of pixels (0,0), (0,1), (1,0), (1,1) -> bilinear average
    vals = np.array([[1, 2, 3, 4], [5, 6, 7, 8]], float)
    env = EnvironmentMap(np.repeat(vals[..., None], 3, axis=2))
    assert np.allclose(eval_radiance(env, [1, 0, 0]), 3.5)
    # +Z is u = 0 (seam between columns 3 and 0), zenith row clamps to row 0
    assert np.allclose(eval_radiance(env, [0, 1, 0]), [2.5, 2.5, 2.5])


def test_rotation_consistency():
    env = _smooth_env()
    for psi in (17.0, 90.0, 233.5):
        rot = rotate_env(env, psi)
        d = _random_dirs(500, 3)
        lhs = eval_radiance(rot, d)
        rhs = eval_radiance(env, d @ _rot_y(-psi).T)
        assert np.abs(lhs - rhs).max() < 1e-6


def test_rotate_full_turn_and_scale_round_trip():
    env = _smooth_env(1)
    d = _random_dirs(300, 4)
    assert np.allclose(eval_radiance(rotate_env(env, 360), d), eval_radiance(env, d), atol=1e-12)
    back = scale_intensity(scale_intensity(env, 2.0), 0.5)
    assert np.array_equal(eval_radiance(back, d), eval_radiance(env, d))
    assert np.allclose(eval_radiance(scale_intensity(env, 2.0), d), 2 * eval_radiance(env, d))
    assert np.allclose(total_power(rotate_env(env, 123)), total_power(env))


def test_non_positive_scale():
    env = _smooth_env()
    for k in (0.0, -1.0, float("nan")):
        with pytest.raises(NonPositiveScale):
            scale_intensity(env, k)


def test_seam_continuity():
    env = _smooth_env(2)
    eps = 1e-7
    a = eval_radiance(env, [math.sin(-eps), 0.3, math.cos(-eps)])
    b = eval_radiance(env, [math.sin(eps), 0.3, math.cos(eps)])
    assert np.abs(a - b).max() < 1e-4


# --- sampling ---------------------------------------------------------------


def test_constant_map_pdf_is_uniform():
    env = EnvironmentMap(np.ones((16, 32, 3)))
    s = build_sampler(env)
    rng = np.random.default_rng(0)
    d, pdf = s.sample(rng.random(2000), rng.random(2000))
    assert np.allclose(np.linalg.norm(d, axis=1), 1.0)
    assert np.allclose(pdf, 1 / (4 * np.pi), atol=1e-3)


def test_cdfs_monotone_and_normalised():
    s = build_sampler(generate_procedural_env("bright_outdoor", 1))
    assert (np.diff(s.row_cdf) >= 0).all() and s.row_cdf[-1] == 1.0
    assert (np.diff(s.col_cdf, axis=1) >= 0).all() and (s.col_cdf[:, -1] == 1.0).all()
    assert abs(s.row_cdf[-1] - 1) < 1e-9


def test_hot_pixel_draws():
    rad = np.ones((16, 32, 3))
    rad[5, 9] = 1e6
    env = EnvironmentMap(rad)
    s = build_sampler(env)
    rng = np.random.default_rng(1)
    d, _ = s.sample(rng.random(10_000), rng.random(10_000))
    az = np.arctan2(d[:, 0], d[:, 2]) % (2 * np.pi)
    incl = np.arccos(np.clip(d[:, 1], -1, 1))
    j = np.minimum((az / (2 * np.pi) * 32).astype(int), 31)
    i = np.minimum((incl / np.pi * 16).astype(int), 15)
    assert np.mean((i == 5) & (j == 9)) >= 0.99


def test_sample_direction_matches_pdf_lookup():
    env = rotate_env(_smooth_env(3), 40.0)
    s = build_sampler(env)
    for u1, u2 in np.random.default_rng(2).random((50, 2)):
        d, p = sample_direction(env, s, u1, u2)
        assert p > 0
        assert p == pytest.approx(s.pdf(d)[0], rel=1e-9)


def test_black_environment():
    with pytest.raises(BlackEnvironment):
        build_sampler(EnvironmentMap(np.zeros((4, 8, 3))))


def test_importance_integral_matches_quadrature():
    env = _smooth_env(4)
    s = build_sampler(env)
    rng = np.random.default_rng(3)
    n = 1_000_000
    d, pdf = s.sample(rng.random(n), rng.random(n))
    est = (eval_radiance(env, d) / pdf[:, None]).mean(axis=0)
    quad = total_power(env)
    assert np.abs(est / quad - 1).max() < 0.005


def stratified_uniform_irradiance(env, normal, n_side=1000, seed=0):
    rng = np.random.default_rng(seed)
    i, j = np.meshgrid(np.arange(n_side), np.arange(n_side), indexing="ij")
    a = (i.ravel() + rng.random(i.size)) / n_side
    b = (j.ravel() + rng.random(j.size)) / n_side
    y = 1 - 2 * a
    r = np.sqrt(np.maximum(0, 1 - y * y))
    phi = 2 * np.pi * b
    d = np.column_stack([r * np.sin(phi), y, r * np.cos(phi)])
    cos = np.clip(d @ normal, 0, None)
    return (eval_radiance(env, d) * cos[:, None]).mean(axis=0) * 4 * np.pi


def importance_irradiance(env, normal, n=1_000_000, seed=1):
    s = build_sampler(env)
    rng = np.random.default_rng(seed)
    d, pdf = s.sample(rng.random(n), rng.random(n))
    cos = np.clip(d @ normal, 0, None)
    return (eval_radiance(env, d) * (cos / pdf)[:, None]).mean(axis=0)


@pytest.mark.parametrize("kind", KINDS)
def test_importance_irradiance_unbiased(kind):
    env = rotate_env(generate_procedural_env(kind, 0), 30.0)
    n = np.array([0.2, 0.3, 1.0])
    n /= np.linalg.norm(n)
    a = importance_irradiance(env, n)
    b = stratified_uniform_irradiance(env, n)
    assert np.abs(a / b - 1).max() < 0.01


# --- procedural archetypes -----------------------------------------------


def test_bright_outdoor_has_sun():
    lum = generate_procedural_env("bright_outdoor", 0).luminance()
    assert lum.max() / np.median(lum) >= 100


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_dark_indoor_is_dark(seed):
    dark = generate_procedural_env("dark_indoor", seed).luminance().mean()
    bright = generate_procedural_env("bright_indoor", seed).luminance().mean()
    assert dark <= 0.1 * bright


def test_cloudy_has_no_sun():
    lum = generate_procedural_env("cloudy_outdoor", 0).luminance()
    assert lum.max() / np.median(lum) < 5


@pytest.mark.parametrize("kind", KINDS)
def test_procedural_deterministic_and_valid(kind):
    a = generate_procedural_env(kind, 7)
    b = generate_procedural_env(kind, 7)
    assert np.array_equal(a.radiance, b.radiance)
    assert a.width == 2 * a.height
    assert np.all(a.radiance >= 0)


def test_solid_angles_cover_sphere():
    assert pixel_solid_angles(64, 128).sum() * 128 == pytest.approx(4 * np.pi)
