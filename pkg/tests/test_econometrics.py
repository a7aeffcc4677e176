import numpy as np
import pandas as pd
import pytest

from oracles import dummy_ols, hc1
from taskmarket.econometrics import (
    DesignSpec,
    EstimationError,
    NotConverged,
    PanelDataset,
    RankDeficient,
    SpecError,
    classical_se,
    cluster_robust_se,
    estimate_spec,
    factor_codes,
    ols,
    significance_stars,
    two_sls,
    within_transform,
)


def random_panel(rng, n_firms=10, n_years=3, extra_missing=False):
    rows = []
    for f in range(n_firms):
        for t in range(n_years):
            rows.append({"firm": f, "year": 2016 + t, "industry": int(rng.integers(0, 3)),
                         "x1": rng.normal(), "x2": rng.normal()})
    df = pd.DataFrame(rows)
    df["y"] = 0.7 * df.x1 - 0.3 * df.x2 + 0.1 * df.industry + rng.normal(size=len(df))
    if extra_missing:
        df.loc[[1, 5], "x2"] = np.nan
    return df


class TestWithin:
    def test_single_factor_example(self, backend):
        X, sweeps = within_transform(np.array([1.0, 3.0, 10.0]), np.array([[0], [0], [1]]), np.array([2]))
        np.testing.assert_allclose(X[:, 0], [-1.0, 1.0, 0.0])
        assert sweeps == 1

    def test_absorbed_column(self, backend, rng):
        codes = rng.integers(0, 4, size=(40, 1))
        col = np.array([7.0, -1.0, 2.5, 3.0])[codes[:, 0]]
        X, _ = within_transform(col, codes, np.array([4]))
        assert np.max(np.abs(X)) <= 1e-12

    def test_not_converged(self, backend, rng):
        codes = np.column_stack([rng.integers(0, 5, 60), rng.integers(0, 6, 60)])
        with pytest.raises(NotConverged) as info:
            within_transform(rng.normal(size=(60, 2)), codes, np.array([5, 6]), tol=1e-300, maxiter=3)
        assert info.value.iterations == 3

    @pytest.mark.parametrize("seed", range(10))
    def test_two_factor_matches_dummy_regression(self, backend, seed):
        rng = np.random.default_rng(seed)
        df = random_panel(rng)
        res = estimate_spec(PanelDataset(df), DesignSpec("y", ("x1", "x2"), ("year", "industry")))
        beta, resid, D = dummy_ols(df.y.to_numpy(), df[["x1", "x2"]].to_numpy(),
                                   [df.year.to_numpy(), df.industry.to_numpy()])
        np.testing.assert_allclose(res.coef, beta, atol=1e-8)
        # classical SEs with the dummy design's residual degrees of freedom
        dof = len(df) - np.linalg.matrix_rank(D)
        se_oracle = np.sqrt(np.diag(resid @ resid / dof * np.linalg.inv(D.T @ D)))[:2]
        np.testing.assert_allclose(res.se, se_oracle, rtol=1e-7)


class TestOLS:
    def test_exact_line(self):
        x = np.arange(1.0, 11.0)
        beta, resid = ols(x, 2 * x)
        assert abs(beta[0] - 2.0) <= 1e-12 and np.max(np.abs(resid)) <= 1e-12

    def test_duplicate_column(self, rng):
        x = rng.normal(size=20)
        with pytest.raises(RankDeficient) as info:
            ols(np.column_stack([x, rng.normal(size=20), x]), rng.normal(size=20), ["a", "b", "c"])
        assert info.value.column == 2 and info.value.name == "c"

    def test_normal_equations(self, rng):
        X, y = rng.normal(size=(50, 3)), rng.normal(size=50)
        beta, _ = ols(X, y)
        np.testing.assert_allclose(beta, np.linalg.solve(X.T @ X, X.T @ y), atol=1e-8)

    def test_too_few_rows(self):
        with pytest.raises(EstimationError):
            ols(np.ones((2, 3)), np.ones(2))


class TestClusterSE:
    def test_singletons_reduce_to_hc1(self, rng):
        X, y = rng.normal(size=(80, 3)), rng.normal(size=80)
        beta, u = ols(X, y)
        se = cluster_robust_se(X, u, np.arange(80))
        # CR1 with G = n: n/(n-1) * (n-1)/(n-k) = n/(n-k), the HC1 factor
        np.testing.assert_allclose(se, hc1(X, u), rtol=1e-10)

    def test_close_to_classical_under_iid(self):
        rng = np.random.default_rng(2024)
        X = rng.normal(size=(500, 2))
        y = X @ np.array([1.0, -1.0]) + rng.normal(size=500)
        beta, u = ols(X, y)
        cr = cluster_robust_se(X, u, np.repeat(np.arange(100), 5))
        cl = classical_se(X, u, 498)
        assert np.all(np.abs(cr / cl - 1.0) <= 0.25)

    def test_two_way_identical_factors(self, rng):
        X, y = rng.normal(size=(60, 2)), rng.normal(size=60)
        _, u = ols(X, y)
        g = rng.integers(0, 12, 60)
        np.testing.assert_allclose(cluster_robust_se(X, u, (g, g)), cluster_robust_se(X, u, g), rtol=1e-12)

    def test_two_way_inclusion_exclusion(self, rng):
        X, y = rng.normal(size=(90, 2)), rng.normal(size=90)
        _, u = ols(X, y)
        a, b = rng.integers(0, 9, 90), rng.integers(0, 7, 90)
        bread = np.linalg.inv(X.T @ X)
        n, k = X.shape

        def comp(labels):
            uniq = np.unique(labels)
            S = np.array([(X[labels == v] * u[labels == v, None]).sum(axis=0) for v in uniq])
            G = len(uniq)
            return G / (G - 1) * bread @ S.T @ S @ bread

        inter = np.array([f"{x}-{z}" for x, z in zip(a, b)])
        V = (comp(a) + comp(b) - comp(inter)) * (n - 1) / (n - k)
        np.testing.assert_allclose(cluster_robust_se(X, u, (a, b)), np.sqrt(np.clip(np.diag(V), 0, None)),
                                   rtol=1e-10)

    def test_single_cluster(self, rng):
        X, y = rng.normal(size=(10, 1)), rng.normal(size=10)
        _, u = ols(X, y)
        with pytest.raises(EstimationError):
            cluster_robust_se(X, u, np.zeros(10))


class TestTwoSLS:
    def test_three_point_exactly_identified(self):
        fit = two_sls(np.array([1.0, 2, 3]), np.array([1.0, 2, 3]), None, np.array([2.0, 4, 6]))
        assert abs(fit.coef[0] - 1.0) <= 1e-10

    def test_closed_form(self, rng):
        n = 40
        W = rng.normal(size=(n, 2))
        z = rng.normal(size=n)
        x = 0.8 * z + rng.normal(size=n)
        y = 1.5 * x + W @ np.array([0.2, -0.4]) + rng.normal(size=n)
        fit = two_sls(y, x, W, z)
        Xf = np.column_stack([x, W])
        Zf = np.column_stack([z, W])
        np.testing.assert_allclose(fit.coef, np.linalg.solve(Zf.T @ Xf, Zf.T @ y), atol=1e-10)

    def test_instrument_equals_regressor(self, rng):
        X, y = rng.normal(size=(50, 3)), rng.normal(size=50)
        fit = two_sls(y, X[:, 0], X[:, 1:], X[:, 0])
        beta, _ = ols(X, y)
        np.testing.assert_allclose(fit.coef, beta, atol=1e-10)

    def test_weak_instrument_flag(self, rng):
        n = 200
        z = rng.normal(size=n)
        x = rng.normal(size=n) + 0.001 * z
        fit = two_sls(rng.normal(size=n), x, None, z)
        assert fit.weak_instrument and fit.first_stage_f < 10

    def test_first_stage_f_oracle(self, rng):
        n = 120
        W = rng.normal(size=(n, 1))
        Z = rng.normal(size=(n, 2))
        x = Z @ np.array([0.3, 0.2]) + 0.5 * W[:, 0] + rng.normal(size=n)
        fit = two_sls(rng.normal(size=n), x, W, Z)
        full = np.column_stack([Z, W])
        rss_u = np.sum((x - full @ np.linalg.lstsq(full, x, rcond=None)[0]) ** 2)
        rss_r = np.sum((x - W @ np.linalg.lstsq(W, x, rcond=None)[0]) ** 2)
        assert fit.first_stage_f == pytest.approx(((rss_r - rss_u) / 2) / (rss_u / (n - 3)), rel=1e-10)


class TestEstimateSpec:
    def test_zero_outcome(self, rng):
        df = random_panel(rng)
        df["y"] = 0.0
        res = estimate_spec(PanelDataset(df), DesignSpec("y", ("x1", "x2"), ("year",)))
        assert np.all(res.coef == 0) and res.r2_within == 0.0

    def test_constant_fe_changes_nothing(self, rng):
        df = random_panel(rng)
        df["country"] = 1
        a = estimate_spec(PanelDataset(df), DesignSpec("y", ("x1", "x2"), ("year",)))
        b = estimate_spec(PanelDataset(df), DesignSpec("y", ("x1", "x2"), ("year", "country")))
        np.testing.assert_allclose(a.coef, b.coef, atol=1e-12)
        np.testing.assert_allclose(a.se, b.se, rtol=1e-10)

    def test_no_fe_includes_intercept(self, rng):
        df = random_panel(rng)
        df["y"] += 100.0
        res = estimate_spec(PanelDataset(df), DesignSpec("y", ("x1",)))
        X = np.column_stack([np.ones(len(df)), df.x1])
        beta = np.linalg.lstsq(X, df.y, rcond=None)[0]
        assert res.coef[0] == pytest.approx(beta[1], abs=1e-10)

    def test_row_order_invariance(self, rng):
        df = random_panel(rng, n_firms=20)
        spec = DesignSpec("y", ("x1", "x2"), ("year", "industry"), ("firm",))
        a = estimate_spec(PanelDataset(df), spec)
        b = estimate_spec(PanelDataset(df.sample(frac=1.0, random_state=3)), spec)
        np.testing.assert_allclose(a.coef, b.coef, atol=1e-10)
        np.testing.assert_allclose(a.se, b.se, rtol=1e-8)

    def test_missing_rows_dropped(self, rng):
        df = random_panel(rng, extra_missing=True)
        res = estimate_spec(PanelDataset(df), DesignSpec("y", ("x1", "x2"), ("year",)))
        assert res.dropped_rows == 2 and res.n == len(df) - 2

    def test_interaction_term(self, rng):
        df = random_panel(rng, n_firms=30)
        df["y"] = df.y + 0.5 * df.x1 * df.x2
        res = estimate_spec(PanelDataset(df), DesignSpec("y", ("x1", "x2", "x1*x2"), ("year",)))
        df["x12"] = df.x1 * df.x2
        ref = estimate_spec(PanelDataset(df), DesignSpec("y", ("x1", "x2", "x12"), ("year",)))
        np.testing.assert_allclose(res.coef, ref.coef, atol=1e-12)
        assert res.terms[2] == "x1*x2"

    def test_unknown_column(self, rng):
        with pytest.raises(SpecError, match="nosuch"):
            estimate_spec(PanelDataset(random_panel(rng)), DesignSpec("y", ("nosuch",)))

    def test_spec_validation(self):
        with pytest.raises(SpecError):
            DesignSpec("y", ("y",))
        with pytest.raises(SpecError):
            DesignSpec("y", ("x",), endogenous="x")
        with pytest.raises(SpecError):
            DesignSpec("y", ("x",), instruments=("z",))
        with pytest.raises(SpecError):
            DesignSpec("y", ())

    def test_duplicate_firm_year(self):
        with pytest.raises(SpecError):
            PanelDataset(pd.DataFrame({"firm": [1, 1], "year": [1, 1]}))

    def test_iv_reports_spec_order(self, rng):
        df = random_panel(rng, n_firms=40)
        df["z"] = df.x2 + rng.normal(size=len(df))
        res = estimate_spec(PanelDataset(df), DesignSpec("y", ("x1", "x2"), ("year",), ("firm",), "x2", ("z",)))
        assert res.terms == ["x1", "x2"] and res.method == "2sls" and res.first_stage_f > 10

    def test_stars(self):
        assert [significance_stars(p) for p in (0.2, 0.04, 0.009, 0.0009, float("nan"))] == \
            ["", "*", "**", "***", ""]

    def test_factor_codes(self):
        codes, levels = factor_codes(pd.DataFrame({"a": ["x", "y", "x"]}), ["a"])
        assert codes[:, 0].tolist() == [0, 1, 0] and levels.tolist() == [2]


def test_iv_reduces_endogeneity_bias():
    from taskmarket.metrics import leave_one_out_mean
    from taskmarket.synthgen import SynthConfig, generate_panel
    cfg = SynthConfig(seed=5, theta_city_sd=0.35, endogeneity_sd=0.3, endogeneity_loading=0.05,
                      share_noise_sd=0.005)
    df, man = generate_panel(cfg)
    truth = man["planted_share_slopes"]["prof"]
    loo = leave_one_out_mean(zip(zip(df.city, df.year), df.firm, df.digital))
    df["z"] = [np.nan if v is None else v for _, _, v in loo]
    controls = ("size", "roa")
    o = estimate_spec(PanelDataset(df), DesignSpec("share_prof", ("digital",) + controls, ("year", "industry")))
    iv = estimate_spec(PanelDataset(df), DesignSpec("share_prof", ("digital",) + controls, ("year", "industry"),
                                                    ("firm",), "digital", ("z",)))
    assert iv.first_stage_f > 10
    assert abs(iv["digital"][0] - truth) < abs(o["digital"][0] - truth)
