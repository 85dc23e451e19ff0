import dataclasses
import math

import numpy as np
import pytest

from splitspin import criteria as cr
from splitspin import sampler as sa
from splitspin import spin_core as sc
from splitspin import splitter as sp
from splitspin.config import RunConfig
from splitspin.exceptions import IncompleteDatasetError, UndefinedValueError


def make_records(sz_ab=None, sy_ab=None, sx_mean=(5.0, 5.0), n_total=(20.0, 20.0),
                 dt=None, theta=0.0):
    """Synthetic records from raw value arrays (no sampling engine)."""
    records = []
    shot = 0
    if sz_ab is not None:
        setting = sa.MeasurementSetting("z", "z", theta)
        for va, vb in zip(*sz_ab):
            records.append(sa.ShotRecord(
                n1a=n_total[0] / 2 + va, n2a=n_total[0] / 2 - va,
                n1b=n_total[1] / 2 + vb, n2b=n_total[1] / 2 - vb,
                setting=setting, delta_t=0.0, shot_id=shot, seed=0))
            shot += 1
    if sy_ab is not None:
        setting = sa.MeasurementSetting("y", "y", theta)
        dts = dt if dt is not None else np.zeros(len(sy_ab[0]))
        for (va, vb), t in zip(zip(*sy_ab), dts):
            records.append(sa.ShotRecord(
                n1a=n_total[0] / 2 + va, n2a=n_total[0] / 2 - va,
                n1b=n_total[1] / 2 + vb, n2b=n_total[1] / 2 - vb,
                setting=setting, delta_t=float(t), shot_id=shot, seed=0))
            shot += 1
    for sign, basis in ((1.0, "x"), (-1.0, "-x")):
        setting = sa.MeasurementSetting(basis, basis, theta)
        for _ in range(5):
            records.append(sa.ShotRecord(
                n1a=n_total[0] / 2 + sign * sx_mean[0],
                n2a=n_total[0] / 2 - sign * sx_mean[0],
                n1b=n_total[1] / 2 + sign * sx_mean[1],
                n2b=n_total[1] / 2 - sign * sx_mean[1],
                setting=setting, delta_t=0.0, shot_id=shot, seed=0))
            shot += 1
    return records


class TestOptimalInference:
    def test_perfect_correlation(self):
        x = np.array([1.0, 2.0, 3.0, 4.0])
        g, c, var_inf = cr.optimal_inference(x, x)
        assert g == pytest.approx(-1.0)
        assert var_inf == pytest.approx(0.0, abs=1e-12)
        assert c == pytest.approx(x.mean() + g * x.mean())

    def test_independent_data(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=4000)
        y = rng.normal(size=4000)
        g, _, var_inf = cr.optimal_inference(x, y)
        assert abs(g) < 5.0 / math.sqrt(len(x))
        assert var_inf == pytest.approx(y.var(ddof=1), rel=0.01)

    def test_unbiased_estimate(self):
        rng = np.random.default_rng(1)
        x = rng.normal(2.0, 1.0, size=500)
        y = 3.0 - 0.5 * x + rng.normal(size=500) * 0.1
        g, c, _ = cr.optimal_inference(x, y)
        estimate = -g * x + c
        assert estimate.mean() == pytest.approx(y.mean(), abs=1e-12)

    def test_degenerate_predictor(self):
        x = np.ones(10)
        y = np.arange(10.0)
        g, c, var_inf = cr.optimal_inference(x, y)
        assert g == 0.0
        assert var_inf == pytest.approx(y.var(ddof=1))

    def test_inference_never_hurts(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            n = rng.integers(5, 100)
            x = rng.normal(size=n)
            y = rng.normal(size=n) + rng.uniform(-1, 1) * x
            _, _, var_inf = cr.optimal_inference(x, y)
            assert var_inf <= y.var(ddof=1) + 1e-12


class TestJitterCorrect:
    def test_zero_dt_identity(self):
        sy = np.array([1.0, 2.0, 3.0])
        corrected, g = cr.jitter_correct(sy, np.zeros(3))
        np.testing.assert_allclose(corrected, sy)
        assert g == 0.0

    def test_construct_and_recover(self):
        rng = np.random.default_rng(3)
        n = 1000
        sy_true = rng.normal(0.0, 5.0, size=n)
        dt = rng.normal(0.0, 4e-9, size=n)
        injected = sy_true + 2.5e9 * dt
        corrected, g = cr.jitter_correct(injected, dt)
        assert g == pytest.approx(-2.5e9, rel=0.1)
        assert corrected.var(ddof=1) == pytest.approx(sy_true.var(ddof=1), rel=0.02)

    def test_corrected_variance_never_larger(self):
        rng = np.random.default_rng(4)
        sy = rng.normal(size=200)
        dt = rng.normal(size=200)
        corrected, _ = cr.jitter_correct(sy, dt)
        assert corrected.var(ddof=1) <= sy.var(ddof=1) + 1e-12

    def test_paper_scale_phase_noise_removed(self):
        # sigma_phi = omega_rf * sigma_dt = 0.045 rad: the induced Sy noise
        # (sigma_phi * <Sx>)^2 is removed from the inferred-variance budget
        omega, sigma_dt, sx = 2 * math.pi * 1.79e6, 4e-9, 336.0
        sigma_phi = omega * sigma_dt
        assert sigma_phi == pytest.approx(0.045, abs=1e-3)
        rng = np.random.default_rng(5)
        n = 4000
        dt = rng.normal(0.0, sigma_dt, size=n)
        quantum = rng.normal(0.0, 48.0, size=n)
        measured = quantum + omega * dt * sx
        corrected, _ = cr.jitter_correct(measured, dt)
        removed = measured.var(ddof=1) - corrected.var(ddof=1)
        assert removed == pytest.approx((sigma_phi * sx) ** 2, rel=0.1)


class TestSxEstimator:
    def test_noise_free_split_css(self):
        state = sp.split_exact(sc.make_coherent_state(12, math.pi / 2, 0.0), 0.5)
        recs = []
        for i, basis in enumerate(("x", "-x", "y", "z")):
            recs += sa.sample_exact(state, sa.MeasurementSetting(basis, basis),
                                    sa.NoiseModel(), 400, seed=10 + i)
        groups = cr.split_groups(recs)
        sx = cr.sx_estimator(groups["x"], groups["y"] + groups["z"], "a")
        assert sx == pytest.approx(12 / 4.0, rel=0.05)

    def test_contrast_scaling(self):
        state, _ = sc.squeezed_state(1400, -7.0)
        jm = sp.split_moments(sc.moments_from_state(state), 0.5)
        noise = sa.NoiseModel(detection_sigma=3.0, contrast=0.96)
        recs = []
        for i, basis in enumerate(("x", "-x", "y", "z")):
            recs += sa.sample_gaussian(jm, sa.MeasurementSetting(basis, basis),
                                       noise, 500, seed=20 + i)
        groups = cr.split_groups(recs)
        sx = cr.sx_estimator(groups["x"], groups["y"] + groups["z"], "b")
        assert sx == pytest.approx(0.96 * 700 / 2.0, rel=0.01)

    def test_detectivity_drop_unbiased(self):
        # the folded-imbalance estimator ignores the x-shot drop; the naive
        # per-shot Sx average is biased low by the drop
        state, _ = sc.squeezed_state(1400, -7.0)
        jm = sp.split_moments(sc.moments_from_state(state), 0.5)
        noise = sa.NoiseModel(detectivity_sx_drop=0.03)
        recs = []
        for i, basis in enumerate(("x", "-x", "y", "z")):
            recs += sa.sample_gaussian(jm, sa.MeasurementSetting(basis, basis),
                                       noise, 500, seed=30 + i)
        groups = cr.split_groups(recs)
        sx = cr.sx_estimator(groups["x"], groups["y"] + groups["z"], "b")
        true_sx = jm.mean[sp.BX]
        assert sx == pytest.approx(true_sx, rel=0.01)
        naive = np.mean([abs(r.spin_b()) for r in groups["x"]])
        assert naive == pytest.approx(0.97 * true_sx, rel=0.01)

    def test_empty_groups_rejected(self):
        with pytest.raises(IncompleteDatasetError):
            cr.sx_estimator([], [], "a")


class TestEprAndHei:
    def test_separable_baseline_moment_level(self):
        css = sc.moments_from_state(sc.make_coherent_state(800, math.pi / 2, 0.0))
        vals = cr.criteria_from_moments(sp.split_moments(css, 0.5))
        assert vals["epr_a_to_b"] == pytest.approx(1.0, abs=1e-9)
        assert vals["epr_b_to_a"] == pytest.approx(1.0, abs=1e-9)
        assert vals["hei_a"] == pytest.approx(1.0, abs=1e-9)
        assert vals["hei_b"] == pytest.approx(1.0, abs=1e-9)
        assert vals["ent"] == pytest.approx(1.0, abs=1e-6)

    def test_squeezed_moment_level_product(self):
        state, _ = sc.squeezed_state(1400, -7.0)
        jm = sp.split_moments(sc.moments_from_state(state), 0.5)
        vals = cr.criteria_from_moments(jm)
        c = jm.covariance
        expected = 4 * c[sp.BZ, sp.BZ] * c[sp.BY, sp.BY] / jm.mean[sp.BX] ** 2
        assert vals["hei_b"] == pytest.approx(expected, rel=1e-12)
        assert vals["epr_a_to_b"] < vals["hei_b"]

    def test_missing_settings_rejected(self):
        recs = make_records(sz_ab=(np.arange(5.0), np.arange(5.0)))
        only_z = [r for r in recs if r.setting.basis_a == "z"]
        with pytest.raises(IncompleteDatasetError):
            cr.epr_criterion(only_z)

    def test_direction_argument(self):
        rng = np.random.default_rng(6)
        za = rng.normal(size=300)
        zb = 0.6 * za + rng.normal(size=300) * 0.5
        ya = rng.normal(size=300)
        yb = rng.normal(size=300)
        recs = make_records(sz_ab=(za, zb), sy_ab=(ya, yb))
        ab = cr.epr_criterion(recs, "a_to_b")
        ba = cr.epr_criterion(recs, "b_to_a")
        assert ab != ba
        with pytest.raises(ValueError):
            cr.epr_criterion(recs, "sideways")

    def test_gain_zero_reduces_ent_to_hei_b(self):
        rng = np.random.default_rng(7)
        recs = make_records(
            sz_ab=(rng.normal(size=200), rng.normal(size=200)),
            sy_ab=(rng.normal(size=200), rng.normal(size=200)))
        forced = cr.ent_criterion(recs, gains=(0.0, 0.0))
        assert forced == pytest.approx(cr.heisenberg_product(recs, "b"), rel=1e-12)

    def test_uncorrelated_css_level_ent_above_one(self):
        rng = np.random.default_rng(8)
        n = 400
        scale = math.sqrt(n / 8.0)
        m = 2000
        recs = make_records(
            sz_ab=(rng.normal(0, scale, m), rng.normal(0, scale, m)),
            sy_ab=(rng.normal(0, scale, m), rng.normal(0, scale, m)),
            sx_mean=(n / 4.0, n / 4.0), n_total=(n / 2.0, n / 2.0))
        assert cr.ent_criterion(recs) > 1.0 - 0.15   # separable baseline


class TestBlocksAndBootstrap:
    def test_single_block_mean_equals_single(self):
        cfg = RunConfig(n_atoms=10, squeezing_db=-2.0, n_blocks=1,
                        noise=sa.NoiseModel(), seed=40)
        recs = sa.run_experiment(cfg)
        out = cr.block_analysis(recs)
        assert out["n_blocks"] == 1
        for k in cr.CRITERIA_KEYS:
            assert out["means"][k] == pytest.approx(out["single_block"][k], rel=1e-12)

    def test_insufficient_data(self):
        cfg = RunConfig(n_atoms=10, squeezing_db=-2.0, n_blocks=1,
                        block_z=10, block_y=10, block_x=4,
                        noise=sa.NoiseModel(), seed=41)
        recs = sa.run_experiment(cfg)
        with pytest.raises(IncompleteDatasetError):
            cr.block_analysis(recs, cr.BlockSpec(100, 100, 20))

    def test_stationary_agreement(self):
        cfg = RunConfig(n_atoms=12, squeezing_db=-3.0, n_blocks=8, seed=42,
                        noise=sa.NoiseModel(detection_sigma=0.3))
        recs = sa.run_experiment(cfg)
        out = cr.block_analysis(recs)
        errs = cr.bootstrap_errors(recs, n_resamples=400, seed=0)
        for k in ("epr_a_to_b", "ent", "hei_b"):
            assert abs(out["means"][k] - out["single_block"][k]) < 4 * errs[k]

    def test_bootstrap_zero_variance(self):
        pb = [{"ent": 0.5, "hei_b": 2.0}] * 6
        errs = cr.bootstrap_errors_from_blocks(pb, n_resamples=200, seed=1)
        assert errs["ent"] == 0.0
        assert errs["hei_b"] == 0.0

    def test_bootstrap_shot_scaling(self):
        noise = sa.NoiseModel(detection_sigma=0.3)
        small = RunConfig(n_atoms=12, squeezing_db=-3.0, n_blocks=6, seed=43, noise=noise)
        big = RunConfig(n_atoms=12, squeezing_db=-3.0, n_blocks=24, seed=43, noise=noise)
        e_small = cr.bootstrap_errors(sa.run_experiment(small), 400, seed=2)
        e_big = cr.bootstrap_errors(sa.run_experiment(big), 400, seed=2)
        ratio = e_small["epr_a_to_b"] / e_big["epr_a_to_b"]
        assert 1.2 < ratio < 3.4      # expect ~2 = sqrt(4) with sampling slack

    def test_bootstrap_needs_enough_resamples(self):
        cfg = RunConfig(n_atoms=10, squeezing_db=-2.0, n_blocks=1,
                        noise=sa.NoiseModel(), seed=44)
        with pytest.raises(ValueError):
            cr.bootstrap_errors(sa.run_experiment(cfg), n_resamples=50)

    def test_bootstrap_deterministic(self):
        cfg = RunConfig(n_atoms=10, squeezing_db=-2.0, n_blocks=3,
                        noise=sa.NoiseModel(), seed=45)
        recs = sa.run_experiment(cfg)
        assert (cr.bootstrap_errors(recs, 300, seed=9)
                == cr.bootstrap_errors(recs, 300, seed=9))


class TestHierarchy:
    def test_hierarchy_and_inference_on_random_datasets(self):
        rng = np.random.default_rng(46)
        for _ in range(30):
            m = int(rng.integers(50, 300))
            rho = rng.uniform(-0.9, 0.9)
            za = rng.normal(size=m)
            zb = rho * za + math.sqrt(1 - rho ** 2) * rng.normal(size=m)
            ya = rng.normal(size=m) * rng.uniform(0.5, 2.0)
            yb = rng.normal(size=m) * rng.uniform(0.5, 2.0) - 0.4 * ya
            sxm = rng.uniform(2.0, 8.0)
            recs = make_records(sz_ab=(za, zb), sy_ab=(ya, yb), sx_mean=(sxm, sxm))
            policy = cr.CorrectionPolicy(jitter_correction=False)
            epr = cr.epr_criterion(recs, "a_to_b", policy)
            ent = cr.ent_criterion(recs)
            assert epr >= ent - 1e-9
            assert cr.epr_criterion(recs, "b_to_a", policy) >= ent - 1e-9


class TestReport:
    def test_report_structure(self):
        cfg = RunConfig(n_atoms=12, squeezing_db=-3.0, n_blocks=3, seed=47,
                        noise=sa.NoiseModel(detection_sigma=0.3, jitter_sigma_dt=4e-9))
        recs = sa.run_experiment(cfg)
        rep = cr.build_report(recs, n_resamples=200, seed=3)
        assert rep.n_blocks == 3
        assert rep.n_discarded == 0
        assert set(rep.errors) == set(cr.CRITERIA_KEYS)
        assert rep.error_method == "block-bootstrap"
        assert rep.n_shots_used == {"z": 300, "y": 300, "x": 60}
        payload = rep.to_json_dict()
        assert payload["criteria"]["epr_a_to_b"] == rep.epr_a_to_b
        assert len(payload["per_block"]) == 3
        for direction in ("a_to_b", "b_to_a", "ent"):
            assert direction in payload["gains"]

    def test_policy_off_headline_uses_uncorrected(self):
        cfg = RunConfig(n_atoms=12, squeezing_db=-3.0, n_blocks=2, seed=48,
                        noise=sa.NoiseModel(detection_sigma=0.3, jitter_sigma_dt=4e-9))
        recs = sa.run_experiment(cfg)
        rep = cr.build_report(recs, policy=cr.CorrectionPolicy(False), n_resamples=200)
        assert rep.epr_a_to_b == rep.epr_a_to_b_uncorrected
        assert not rep.jitter_correction
