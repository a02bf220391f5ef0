import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from dpemu.analysis import rayleigh_ks
from dpemu.cli.experiments import fibonacci_directions
from dpemu.errors import InsufficientData
from dpemu.geom import C, Angle, direction_angles
from dpemu.scatter import (ISOTROPIC, BistaticSamples, MonostaticTable, ScatterPoint, ScatterProfile,
                           bilinear_fit_bistatic, bistatic_samples, general_response, heaviside_profile,
                           hemisphere_coeffs, isotropic_point, monostatic_table, omp_fit_monostatic,
                           scatter_delays, scatter_response, swerling_profile)
from dpemu.sphharm import ShBasisSpec, ShFunction


def _random_profile(K, order, seed, extent=1.0):
    rng = np.random.default_rng(seed)
    spec = ShBasisSpec(order)
    pts = [ScatterPoint(rng.uniform(-extent, extent, 3),
                        rng.normal(size=spec.P) + 1j * rng.normal(size=spec.P),
                        rng.normal(size=spec.P) + 1j * rng.normal(size=spec.P)) for _ in range(K)]
    return ScatterProfile(spec, pts)


def _random_angles(rng, n):
    return [Angle(a, p) for a, p in zip(rng.uniform(-180, 180, n), np.degrees(np.arccos(rng.uniform(-1, 1, n))))]


def test_delays_examples():
    assert scatter_delays(isotropic_point([0, 0, 0]), Angle(10, 20), Angle(30, 40)) == (0.0, 0.0)
    ti, to = scatter_delays(isotropic_point([3, 0, 0]), Angle(0, 90), Angle(0, 0))
    assert ti == pytest.approx(1.00069e-8, rel=1e-5)
    assert ti == pytest.approx(3 / C) and to == pytest.approx(0.0, abs=1e-24)
    a = Angle(47, 71)
    ti, to = scatter_delays(isotropic_point([1, -2, 0.5]), a, a)
    assert ti - to == 0.0


def test_response_examples():
    assert scatter_response(ScatterProfile(), Angle(0, 0), Angle(0, 0)) == []
    taps = scatter_response(ScatterProfile(points=[isotropic_point([0, 0, 0])]), Angle(12, 34), Angle(56, 78))
    assert len(taps) == 1
    assert taps[0][0] == 0.0 and taps[0][1] == pytest.approx(1.0)


def test_separable_matches_general():
    profile = _random_profile(5, 3, 0)
    sigma = [lambda ti, to, p=p: (ShFunction(profile.spec, p.in_coeffs)(ti) * ShFunction(profile.spec, p.out_coeffs)(to))
             for p in profile.points]
    rng = np.random.default_rng(1)
    for ti, to in zip(_random_angles(rng, 100), _random_angles(rng, 100)):
        sep = scatter_response(profile, ti, to)
        gen = general_response(profile.locations, sigma, ti, to)
        for (d1, w1), (d2, w2) in zip(sep, gen):
            assert d1 == pytest.approx(d2, rel=1e-12, abs=1e-22)
            assert w1 == pytest.approx(w2, rel=1e-12)


def test_rotation_covariance():
    profile = ScatterProfile(points=[isotropic_point(x, w) for x, w in
                                     zip(np.random.default_rng(2).normal(size=(6, 3)), np.arange(1, 7))])
    rot = Rotation.from_euler("zyx", [30, -20, 75], degrees=True)
    rotated = ScatterProfile(points=[isotropic_point(rot.apply(p.location), p.in_coeffs[0] / ISOTROPIC)
                                     for p in profile.points])
    rng = np.random.default_rng(3)
    for ti, to in zip(_random_angles(rng, 20), _random_angles(rng, 20)):
        ri = Angle(*direction_angles(rot.apply(ti.unit())))
        ro = Angle(*direction_angles(rot.apply(to.unit())))
        for (d1, w1), (d2, w2) in zip(scatter_response(profile, ti, to), scatter_response(rotated, ri, ro)):
            assert d1 == pytest.approx(d2, rel=1e-9, abs=1e-20)
            assert w1 == pytest.approx(w2)


def test_storage_count():
    assert _random_profile(16, 15, 0).storage == 16 * (2 * 256 + 3)
    assert ScatterProfile().storage == 0
    with pytest.raises(ValueError):
        ScatterProfile(ShBasisSpec(1), [isotropic_point([0, 0, 0])])


def _grid(n=7, spacing=0.5):
    c = (np.arange(n) - (n - 1) / 2) * spacing
    return np.stack(np.meshgrid(c, c, c, indexing="ij"), -1).reshape(-1, 3)


def _monostatic_truth(seed=0):
    grid = _grid()
    rng = np.random.default_rng(seed)
    pick = rng.choice(grid.shape[0], 3, replace=False)
    truth = ScatterProfile(points=[isotropic_point(grid[i], rng.normal() + 1j * rng.normal()) for i in pick])
    az, pol = fibonacci_directions(200)
    return monostatic_table(truth, np.linspace(9.5e9, 10.5e9, 64), az, pol), grid, pick


def test_omp_recovers_three_points():
    table, grid, pick = _monostatic_truth()
    fit = omp_fit_monostatic(table, grid, 3, ShBasisSpec(0))
    assert set(fit.selected) == set(int(i) for i in pick)
    assert fit.nmse < 1e-8
    again = omp_fit_monostatic(table, grid, 3, ShBasisSpec(0))
    assert again.selected == fit.selected
    assert np.array_equal(again.profile.in_matrix, fit.profile.in_matrix)


def test_omp_zero_points():
    table, grid, _ = _monostatic_truth()
    fit = omp_fit_monostatic(table, grid, 0, ShBasisSpec(0))
    assert fit.profile.K == 0
    assert fit.residual_energy == [pytest.approx(np.sum(np.abs(table.values) ** 2))]


def test_omp_error_nonincreasing_on_extended_target():
    # A continuous line of scatterers off the grid.
    xs = np.linspace(-1.2, 1.3, 40)
    truth = ScatterProfile(points=[isotropic_point([x, 0.1 * x, 0.07], 0.1) for x in xs])
    az, pol = fibonacci_directions(60)
    table = monostatic_table(truth, np.linspace(1e9, 2e9, 21), az, pol)
    fit = omp_fit_monostatic(table, _grid(7, 0.5), 8, ShBasisSpec(1))
    e = fit.residual_energy
    assert all(b <= a * (1 + 1e-12) for a, b in zip(e, e[1:]))
    assert e[-1] < e[0]


def test_omp_errors():
    table, grid, _ = _monostatic_truth()
    with pytest.raises(ValueError):
        omp_fit_monostatic(table, grid, 17, ShBasisSpec(0))
    tiny = MonostaticTable([1e9], [0.0], [0.0], [[1.0]])
    with pytest.raises(InsufficientData):
        omp_fit_monostatic(tiny, grid, 1, ShBasisSpec(1))


def test_table_validation():
    with pytest.raises(ValueError):
        MonostaticTable([1e9, 2e9, 4e9], [0.0], [0.0], np.ones((3, 1)))
    with pytest.raises(ValueError):
        MonostaticTable([1e9], [0.0, 1.0], [0.0], np.ones((1, 2)))


def _bistatic(profile, n=600, seed=0):
    rng = np.random.default_rng(seed)
    return bistatic_samples(profile, [(a.azimuth_deg, a.polar_deg) for a in _random_angles(rng, n)],
                            [(a.azimuth_deg, a.polar_deg) for a in _random_angles(rng, n)],
                            rng.uniform(1e9, 2e9, n))


def test_als_recovers_separable_truth():
    truth = _random_profile(3, 2, 4, extent=0.3)
    samples = _bistatic(truth)
    fit = bilinear_fit_bistatic(samples, truth.locations, truth.spec, iters=50, seed=1)
    assert fit.objective[-1] < 1e-10
    rng = np.random.default_rng(9)
    for ti, to in zip(_random_angles(rng, 30), _random_angles(rng, 30)):
        for (_, w1), (_, w2) in zip(scatter_response(fit.profile, ti, to), scatter_response(truth, ti, to)):
            assert abs(w1 - w2) <= 1e-6 * abs(w2)
    for p in fit.profile.points:
        assert np.linalg.norm(p.in_coeffs) == pytest.approx(np.linalg.norm(p.out_coeffs))


@pytest.mark.parametrize("seed", range(20))
def test_als_objective_nonincreasing(seed):
    # Truth of higher order than the fit so the objective stays away from zero.
    truth = _random_profile(2, 2, 100 + seed, extent=0.3)
    samples = _bistatic(truth, 300, seed)
    fit = bilinear_fit_bistatic(samples, truth.locations, ShBasisSpec(1), iters=15, seed=seed)
    obj = fit.objective
    assert all(b <= a * (1 + 1e-10) + 1e-24 for a, b in zip(obj, obj[1:]))


def test_als_single_isotropic_point_one_iteration():
    truth = ScatterProfile(points=[isotropic_point([0.2, -0.1, 0.05], 0.8 - 0.3j)])
    samples = _bistatic(truth, 50)
    fit = bilinear_fit_bistatic(samples, truth.locations, ShBasisSpec(0), iters=1)
    assert len(fit.objective) == 1 and fit.objective[0] < 1e-20


def test_als_accepts_tuple_list_and_checks_size():
    truth = ScatterProfile(points=[isotropic_point([0.0, 0.0, 0.0])])
    samples = [(Angle(0, 10), Angle(5, 20), 1e9, 1.0 + 0j)]
    assert isinstance(BistaticSamples.from_list(samples), BistaticSamples)
    with pytest.raises(InsufficientData):
        bilinear_fit_bistatic(samples, truth.locations, ShBasisSpec(1))
    with pytest.raises(ValueError):
        bilinear_fit_bistatic(samples, truth.locations, ShBasisSpec(0), iters=0)


def test_swerling_construction():
    a = swerling_profile(1, 20, 15.0, 7)
    b = swerling_profile(1, 20, 15.0, 7)
    assert np.array_equal(a.locations, b.locations) and np.array_equal(a.in_matrix, b.in_matrix)
    assert np.all(np.abs(a.locations) <= 7.5)
    power = np.abs(a.in_matrix[:, 0] / ISOTROPIC) ** 2
    assert np.allclose(power, 1 / 20) and power.sum() == pytest.approx(1.0)
    p3 = np.abs(swerling_profile(3, 10, 15.0, 7).in_matrix[:, 0] / ISOTROPIC) ** 2
    assert p3[0] >= 0.9 * p3.sum() and p3.sum() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        swerling_profile(1, 9, 1.0, 0)
    with pytest.raises(ValueError):
        swerling_profile(2, 20, 1.0, 0)


def test_swerling1_envelope_is_rayleigh():
    fc = 1e9
    profile = swerling_profile(1, 20, 50 * C / fc, 0)
    rots = Rotation.random(2000, random_state=1)
    look = np.array([1.0, 0.0, 0.0])
    w = profile.in_matrix[:, 0] * profile.out_matrix[:, 0] / (4 * np.pi)
    env = []
    for r in rots:
        tau = 2 * r.apply(profile.locations) @ look / C
        env.append(abs(np.sum(w * np.exp(-2j * np.pi * fc * tau))))
    assert rayleigh_ks(env).ks_statistic < 0.05


def test_hemisphere_coefficients():
    spec = ShBasisSpec(15)
    b = hemisphere_coeffs(spec, [0, 0, 1])
    # Mean over the sphere is one half, and the indicator is azimuthally symmetric about z.
    assert b[0] == pytest.approx(ISOTROPIC / 2, rel=1e-3)
    l, m = spec.degrees()
    assert np.max(np.abs(b[m != 0])) < 1e-12
    fn = ShFunction(spec, b)
    assert fn(Angle(0, 10)).real == pytest.approx(1.0, abs=0.05)
    assert fn(Angle(0, 170)).real == pytest.approx(0.0, abs=0.05)
    profile = heaviside_profile(np.zeros((2, 3)), [[0, 0, 1], [1, 0, 0]], [[0, 0, -1], [0, 1, 0]], spec, [1.0, 2.0])
    assert profile.K == 2 and np.allclose(profile.in_matrix[1], 2 * hemisphere_coeffs(spec, [1, 0, 0]))
