import json
import math

import numpy as np
import pytest

from hetreg.cli import main as cli_main
from hetreg.experiments import (
    CSV_COLUMNS,
    ExperimentConfig,
    efficiency_study,
    lower_bound_study,
    mc_risk,
    oracle_coefficient,
    oracle_study,
    resolve_test_function,
    risk_study,
    write_csv,
)


def small_config(**over):
    base = dict(
        n_grid=[51],
        reps=24,
        seed=555,
        workers=1,
        test_function={"preset": "S1"},
        scale={"c0": 1.0, "c1": 1.0, "c2": 0.5, "c3": 0.5},
        noise_menu=[{"kind": "gaussian"}],
        estimators=["adaptive", "oracle_weight", "projection"],
    )
    base.update(over)
    return ExperimentConfig.from_dict(base)


class TestConfig:
    def test_rejects_even_n(self):
        with pytest.raises(ValueError):
            small_config(n_grid=[50])

    def test_rejects_unknown_keys(self):
        with pytest.raises(ValueError):
            ExperimentConfig.from_dict({"bogus": 1})

    def test_presets_have_nonnegative_margin(self):
        for preset in ("S1", "S2", "S3"):
            cfg = small_config(test_function={"preset": preset}, ball=None)
            _, ball, margin = resolve_test_function(cfg)
            assert margin >= 0.0

    def test_refuses_function_outside_ball(self):
        cfg = small_config(ball={"k": 1, "r": 1.0})  # S1 needs r ~ 320
        with pytest.raises(ValueError, match="margin"):
            risk_study(cfg)


class TestOracleCoefficient:
    def test_quarter(self):
        assert oracle_coefficient(0.25) == pytest.approx(6.5)

    def test_small_rho_limit(self):
        assert oracle_coefficient(1e-9) == pytest.approx(1.0, abs=1e-6)

    def test_invalid(self):
        with pytest.raises(ValueError):
            oracle_coefficient(0.4)


class TestMcRisk:
    def test_full_projection_pure_noise(self):
        # lam == 1, S == 0, g == 1: E||S_hat - S||_n^2 = 1
        cfg = small_config(
            test_function={"preset": "S3"}, scale={"sigma": 1.0}, reps=400,
        )
        out = mc_risk(cfg, "projection", {"kind": "gaussian"}, 51)
        assert abs(out["risk_empiric"] - 1.0) <= 4.0 * out["se_empiric"]

    def test_adaptive_no_worse_than_full_projection(self):
        cfg = small_config(reps=100, n_grid=[101])
        rows, _, _ = risk_study(cfg)
        by_name = {r.estimator: r for r in rows}
        a, p = by_name["adaptive"], by_name["projection"]
        assert a.risk_empiric <= p.risk_empiric + 3.0 * math.hypot(a.se_empiric, p.se_empiric)

    def test_risk_rows_have_gamma_and_ratio(self):
        cfg = small_config(reps=8)
        rows, _, _ = risk_study(cfg)
        for r in rows:
            assert r.gamma_k > 0.0
            assert r.normalized_ratio == pytest.approx(
                r.n ** (2.0 / 3.0) * r.risk_empiric / r.gamma_k
            )

    def test_single_coefficient_projection_pure_noise(self):
        # lam = indicator{1}, S == 0, g == 1: risk = 1/n
        cfg = small_config(
            test_function={"preset": "S3"}, scale={"sigma": 1.0}, reps=400,
        )
        out = mc_risk(cfg, "projection:1", {"kind": "gaussian"}, 51)
        assert abs(out["risk_empiric"] - 1.0 / 51.0) <= 4.0 * out["se_empiric"]

    def test_per_family_rows(self):
        cfg = small_config(reps=10, estimators=["adaptive", "per_family"])
        rows, _, _ = risk_study(cfg)
        fam_rows = [r for r in rows if r.estimator.startswith("lambda[")]
        from hetreg.weights import default_sequences

        s = default_sequences(51)
        assert len(fam_rows) == s.k_star * s.m
        assert all(r.risk_empiric >= 0.0 for r in fam_rows)

    def test_noise_kind_aliases(self):
        from hetreg.models import NoiseSpec

        assert NoiseSpec("uniform_normalized").kind == "uniform"
        assert NoiseSpec("student_t_normalized", df=7).kind == "student_t"

    def test_empiric_vs_continuous_norm_consistency(self):
        # norm transfer at delta = 1/2: R_n >= R_l2 / 2 - r / n^2
        cfg = small_config(reps=50, n_grid=[101])
        rows, _, _ = risk_study(cfg)
        from hetreg.experiments import resolve_test_function

        _, ball, _ = resolve_test_function(cfg)
        for r in rows:
            assert r.risk_empiric >= 0.5 * r.risk_l2 - ball.r / r.n**2 - 1e-9


class TestBayesMinimaxOrdering:
    def test_bayes_risk_below_max_frequentist_over_prior_draws(self):
        # averaging over the prior cannot exceed the worst sampled S
        import numpy as np

        from hetreg.basis import DesignGrid
        from hetreg.lowerbound import bayes_risk_mc, kernel_function, least_favorable_prior, sample_prior
        from hetreg.models import SIMPSON_PANELS, NoiseSpec, homogeneous_scale, substream
        from hetreg.selection import estimate as run_estimate
        from hetreg.basis import basis_eval_matrix

        scale = homogeneous_scale(1.0)
        grid = DesignGrid(51)
        prior = least_favorable_prior(1, 1.0, 51, eps=0.2)

        def adaptive(Y, g):
            out = run_estimate(Y, g)
            return out.lambda_hat * out.coeffs.theta_hat

        bayes, bayes_se = bayes_risk_mc(adaptive, prior, scale, grid, reps=400, seed=21)

        xq = np.linspace(0.0, 1.0, SIMPSON_PANELS + 1)
        wq = np.ones(len(xq))
        wq[1:-1:2] = 4.0
        wq[2:-1:2] = 2.0
        wq /= 3.0 * SIMPSON_PANELS
        Phi_q = basis_eval_matrix(51, xq)
        noise = NoiseSpec("gaussian")
        freq_risks = []
        for d in range(8):
            theta, _ = sample_prior(prior, substream(77, 1, d))
            s_design = kernel_function(theta, prior.family, grid.points)
            s_quad = kernel_function(theta, prior.family, xq)
            losses = []
            for rep in range(120):
                rng = substream(77, 2, d, rep)
                Y = s_design + noise.draw(rng, 51)
                c = adaptive(Y, grid)
                losses.append(float(wq @ (Phi_q @ c - s_quad) ** 2))
            freq_risks.append(float(np.mean(losses)))
        assert bayes <= max(freq_risks) + 5.0 * bayes_se


class TestOracleStudy:
    def test_summary_structure_and_inequality(self):
        cfg = small_config(reps=60, n_grid=[51, 101], rho=0.25)
        rows, summary, _ = oracle_study(cfg)
        assert summary["rho"] == 0.25
        recs = summary["per_noise"]["gaussian"]
        for rec in recs:
            assert rec["coefficient"] == pytest.approx(6.5)
            # the inequality with the recorded slack holds by construction
            assert rec["adaptive_risk"] <= rec["coefficient"] * rec["min_family_risk"] + rec["slack"] + 1e-12
            assert rec["slack"] >= 0.0
        assert {r.estimator for r in rows} == {"adaptive", "family_min"}

    def test_trend_pass_flag_present(self):
        cfg = small_config(reps=40, n_grid=[51, 101], rho=0.25)
        _, summary, _ = oracle_study(cfg)
        assert "grows_slower_than_sqrt_n" in summary["trend"]["gaussian"]


class TestEfficiencyStudy:
    def test_rows_and_trend(self):
        cfg = small_config(reps=60, n_grid=[51, 101])
        rows, summary, _ = efficiency_study(cfg)
        trend = summary["trend"]["gaussian"]
        assert trend["ns"] == [51, 101]
        assert len(trend["oracle_ratios"]) == 2
        assert all(r > 0 for r in trend["oracle_ratios"])

    def test_homogeneous_scale_recovers_classical_normalization(self):
        from hetreg.theory import pinsker_constant

        cfg = small_config(reps=10, scale={"sigma": 1.0})
        _, summary, _ = efficiency_study(cfg)
        k, r = summary["ball"]["k"], summary["ball"]["r"]
        assert summary["varsigma"] == pytest.approx(1.0)
        assert summary["gamma_k"] == pytest.approx(pinsker_constant(k, r, 1.0))


class TestLowerBoundStudy:
    def test_records(self):
        cfg = small_config(
            reps=80, n_grid=[51],
            lowerbound={"eps": 0.2, "eta": 0.05, "prior_mc": 80,
                        "bayes_estimators": ["zero", "adaptive"]},
        )
        rows, summary, _ = lower_bound_study(cfg)
        rec = summary["records"][0]
        assert rec["bound"] > 0.0
        for name, br in rec["bayes_risks"].items():
            assert br["risk"] + 5.0 * br["se"] >= rec["bound"]
        assert any(r.estimator == "van_trees_bound" for r in rows)


class TestDeterminism:
    def test_worker_count_does_not_change_rows(self):
        cfg1 = small_config(reps=70, workers=1, n_grid=[51, 101])
        cfg8 = small_config(reps=70, workers=8, n_grid=[51, 101])
        rows1, _, _ = risk_study(cfg1)
        rows8, _, _ = risk_study(cfg8)
        assert [r.as_csv() for r in rows1] == [r.as_csv() for r in rows8]

    def test_csv_bytes_identical(self, tmp_path):
        paths = []
        for w in (1, 8):
            cfg = small_config(reps=40, workers=w)
            rows, _, _ = risk_study(cfg)
            p = tmp_path / f"risk_{w}.csv"
            write_csv(rows, p)
            paths.append(p.read_bytes())
        assert paths[0] == paths[1]

    def test_header(self, tmp_path):
        cfg = small_config(reps=4)
        rows, _, _ = risk_study(cfg)
        p = tmp_path / "risk.csv"
        write_csv(rows, p)
        assert p.read_text().splitlines()[0] == ",".join(CSV_COLUMNS)


class TestNoiseMenuEnvelope:
    def test_menu_max_rows_emitted(self):
        cfg = small_config(
            reps=12,
            noise_menu=[{"kind": "gaussian"}, {"kind": "rademacher"},
                        {"kind": "uniform"}, {"kind": "student_t", "df": 12}],
        )
        rows, _, _ = risk_study(cfg)
        labels = {r.noise for r in rows}
        assert "menu_max" in labels
        for est in cfg.estimators:
            per = [r for r in rows if r.estimator == est and r.noise != "menu_max"]
            env = next(r for r in rows if r.estimator == est and r.noise == "menu_max")
            assert env.risk_empiric == pytest.approx(max(r.risk_empiric for r in per))


class TestCli:
    def test_simulate_then_estimate_roundtrip(self, tmp_path):
        cfg = dict(small_config(n_grid=[51]).__dict__)
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        data_path = tmp_path / "data.csv"
        assert cli_main(["simulate", "--config", str(cfg_path), "--out", str(data_path)]) == 0
        out_path = tmp_path / "est.json"
        assert cli_main(["estimate", "--data", str(data_path), "--out", str(out_path)]) == 0
        payload = json.loads(out_path.read_text())
        assert payload["n"] == 51
        assert len(payload["theta_hat"]) == 51
        assert payload["costs"]
        assert min(c["cost"] for c in payload["costs"]) == pytest.approx(
            next(c["cost"] for c in payload["costs"]
                 if (c["beta"], c["t"]) == (payload["selected"]["beta"], payload["selected"]["t"]))
        )

    def test_study_outputs_files(self, tmp_path):
        cfg = dict(small_config(reps=6).__dict__)
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        out_dir = tmp_path / "out"
        assert cli_main(["risk", "--config", str(cfg_path), "--out", str(out_dir)]) == 0
        assert (out_dir / "risk.csv").exists()
        assert (out_dir / "risk.json").exists()

    def test_env_seed_override(self, tmp_path, monkeypatch):
        cfg = dict(small_config(reps=6).__dict__)
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        monkeypatch.setenv("HETREG_SEED", "42")
        out_dir = tmp_path / "env_out"
        cli_main(["risk", "--config", str(cfg_path), "--out", str(out_dir)])
        text = (out_dir / "risk.csv").read_text()
        assert text.splitlines()[1].split(",")[-1] == "42"

    def test_flag_beats_env(self, tmp_path, monkeypatch):
        cfg = dict(small_config(reps=6).__dict__)
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        monkeypatch.setenv("HETREG_SEED", "42")
        out_dir = tmp_path / "flag_out"
        cli_main(["risk", "--config", str(cfg_path), "--out", str(out_dir), "--seed", "77"])
        text = (out_dir / "risk.csv").read_text()
        assert text.splitlines()[1].split(",")[-1] == "77"

    def test_save_losses(self, tmp_path):
        cfg = dict(small_config(reps=5, save_losses=True).__dict__)
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        out_dir = tmp_path / "loss_out"
        cli_main(["risk", "--config", str(cfg_path), "--out", str(out_dir)])
        lines = (out_dir / "risk_losses.csv").read_text().splitlines()
        assert lines[0] == "estimator,noise,n,rep,loss_empiric,loss_l2"
        assert len(lines) == 1 + 5 * 3  # reps x estimators
