//! Monte Carlo validation of the occupation harness against closed forms:
//! exact Gaussian variances, normal tail probabilities, and the scheme
//! oracle. Replica counts are sized so every comparison sits at four-ish
//! standard errors with comfortable test margins.

use fbm_lab_core::{
    check_envelope_domination, fit_scaling_exponent, run_occupation_continuous,
    run_occupation_discrete, ExperimentConfig, TailRow,
};

fn cfg(body: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml_str(body).unwrap()
}

fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        num += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    num / (va * vb).sqrt()
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Tail-estimate noise: binomial spread plus the threshold jitter induced
/// by centering with an independent finite mean block.
fn tail_stderr(row: &TailRow, k: f64) -> f64 {
    let centering = normal_pdf(k) / (row.replicas as f64).sqrt();
    (row.stderr * row.stderr + centering * centering).sqrt()
}

#[test]
fn time_averaged_bm_matches_the_closed_form_variance() {
    // With vanishing drift the continuous statistic is (1/T) int_0^1 B dt;
    // its trapezoid variance is 1/3 - dt^2/12 exactly.
    let c = cfg(r#"
        [kernel]
        family = "standard"
        hurst = 0.5

        [sde]
        sigma = [[1.0]]
        x0 = [0.0]

        [sde.drift]
        kind = "linear"
        matrix = [[1e-9]]

        [f]
        kind = "identity"

        [experiment]
        delta = 0.015625
        dt = 0.015625
        t_list = [1.0]
        r_list = [0.0]
        replicas = 4096
        seed = 42
    "#);
    let run = run_occupation_continuous(&c).unwrap();
    let values = &run.samples[0].continuous[0];
    let got = sample_variance(values);
    let dt = 0.015625f64;
    let want = 1.0 / 3.0 - dt * dt / 12.0;
    let stderr = want * (2.0 / (values.len() as f64 - 1.0)).sqrt();
    assert!(
        (got - want).abs() < 4.0 * stderr,
        "variance {got} vs {want} (stderr {stderr})"
    );

    // Median check: the centered statistic is symmetric, so the tail at
    // r = 0 sits at one half.
    let row = &run.rows[0];
    assert_eq!(row.r, 0.0);
    let se = tail_stderr(row, 0.0);
    assert!((row.estimate - 0.5).abs() < 4.0 * se, "{} vs 0.5", row.estimate);
}

#[test]
fn discrete_tails_match_the_exact_gaussian_law() {
    // Linear drift, identity f: the centered statistic is Gaussian with
    // the oracle's variance, so P(S > k sigma) = normal_tail(k) exactly.
    let c = cfg(r#"
        [kernel]
        family = "standard"
        hurst = 0.5

        [sde]
        sigma = [[1.0]]
        x0 = [0.5]

        [sde.drift]
        kind = "linear"
        matrix = [[1.0]]

        [f]
        kind = "identity"

        [experiment]
        delta = 1.0
        dt = 0.1
        n_list = [8]
        r_list = [0.5, 1.0, 2.0]
        replicas = 4096
        seed = 1
        r_scale = "sigma"
    "#);
    let run = run_occupation_discrete(&c).unwrap();
    assert_eq!(run.rows.len(), 3);
    for row in &run.rows {
        let want = row.oracle_tail.unwrap();
        let se = tail_stderr(row, row.r_input);
        assert!(
            (row.estimate - want).abs() < 4.0 * se,
            "r = {} sigma: {} vs {} (se {})",
            row.r_input,
            row.estimate,
            want,
            se
        );
        assert!(!row.censored);
    }
}

#[test]
fn continuous_and_discrete_averages_are_nearly_the_same_path_functional() {
    // Observing every Delta versus integrating in time: over a window much
    // longer than the correlation length both averages ride the same
    // low-frequency noise, so coupled replicas correlate above 0.99.
    let c = cfg(r#"
        [kernel]
        family = "standard"
        hurst = 0.5

        [sde]
        sigma = [[1.0]]
        x0 = [0.0]

        [sde.drift]
        kind = "linear"
        matrix = [[0.2]]

        [f]
        kind = "identity"

        [experiment]
        delta = 1.0
        dt = 0.125
        n_list = [8]
        t_list = [8.0]
        r_list = [0.0]
        replicas = 2048
        seed = 9
    "#);
    let samples = fbm_lab_core::occupation_samples(&c, &c.n_list, &c.t_list, 0, 0).unwrap();
    let corr = pearson(&samples.discrete[0], &samples.continuous[0]);
    assert!(corr > 0.99, "correlation {corr}");
}

#[test]
fn doubling_replicas_halves_the_tail_stderr() {
    let base = r#"
        [kernel]
        family = "standard"
        hurst = 0.5

        [sde]
        sigma = [[1.0]]
        x0 = [0.0]

        [sde.drift]
        kind = "linear"
        matrix = [[1.0]]

        [f]
        kind = "identity"

        [experiment]
        delta = 0.5
        dt = 0.05
        n_list = [4]
        r_list = [1.0]
        seed = 4
        r_scale = "sigma"
    "#;
    let small = cfg(&format!("{base}\nreplicas = 2048"));
    let large = cfg(&format!("{base}\nreplicas = 8192"));
    let se_small = run_occupation_discrete(&small).unwrap().rows[0].stderr;
    let se_large = run_occupation_discrete(&large).unwrap().rows[0].stderr;
    let ratio = se_small / se_large;
    // Quadrupling replicas should double precision; allow 20% slack on the
    // factor-two law per doubling.
    assert!(
        ratio > 2.0 * 0.8 && ratio < 2.0 * 1.2,
        "stderr ratio {ratio} for a 4x replica increase"
    );
}

#[test]
fn scaling_exponents_recover_the_diffusive_law() {
    // H = 1/2: oracle variance decays like 1/n, and the quadratic MGF
    // coefficient of the 1-Lipschitz rescaling grows like n.
    let c = cfg(r#"
        [kernel]
        family = "standard"
        hurst = 0.5

        [sde]
        sigma = [[1.0]]
        x0 = [0.0]

        [sde.drift]
        kind = "linear"
        matrix = [[1.0]]

        [f]
        kind = "identity"

        [experiment]
        delta = 1.0
        dt = 0.1
        n_list = [16, 32, 64, 128, 256]
        lambda_list = [0.03125, 0.0625]
        replicas = 4096
        seed = 17
    "#);
    let report = fit_scaling_exponent(&c).unwrap();
    assert_eq!(report.variance.target, -1.0);
    assert!(
        (report.variance.slope + 1.0).abs() < 0.1,
        "variance slope {}",
        report.variance.slope
    );
    let mgf = report.mgf.expect("reliable horizons should survive at these tilts");
    assert_eq!(mgf.target, 1.0);
    assert!((mgf.slope - 1.0).abs() < 0.15, "mgf slope {}", mgf.slope);
    assert!(report.mgf_cells.iter().all(|cell| cell.reliable));
}

#[test]
fn envelope_constant_transfers_to_a_longer_horizon() {
    // Rough regime: the scaled variance trends downward in n, so a constant
    // calibrated on the short horizon keeps dominating on the long one.
    let c = cfg(r#"
        [kernel]
        family = "standard"
        hurst = 0.3

        [sde]
        sigma = [[1.0]]
        x0 = [1.0]

        [sde.drift]
        kind = "linear"
        matrix = [[0.25]]

        [f]
        kind = "identity"

        [experiment]
        delta = 2.0
        dt = 0.4
        n_list = [64]
        r_list = [0.0, 0.5, 1.0, 2.0]
        replicas = 2048
        seed = 33
        burn_in = 16
        r_scale = "sigma"
    "#);
    let report = check_envelope_domination(&c, &[16], (0, 16384), (16384, 20480)).unwrap();
    assert!(report.pass, "cells: {:?}", report.cells);
    assert!(!report.fallback_constant);
    assert!(report.calibrated_c > 0.0);
    assert_eq!(report.cells.len(), 4);
    for cell in &report.cells {
        assert!(cell.pass);
        if cell.r == 0.0 {
            assert_eq!(cell.envelope, 1.0);
        } else {
            assert!(cell.lower_bound < cell.envelope);
        }
    }
}

#[test]
fn burn_in_variance_shift_matches_the_oracle() {
    // Discarding the transient raises the statistic's variance; both the
    // size of the shift and the level agree with the exact scheme values.
    let c = cfg(r#"
        [kernel]
        family = "standard"
        hurst = 0.7

        [sde]
        sigma = [[1.0]]
        x0 = [0.0]

        [sde.drift]
        kind = "linear"
        matrix = [[0.5]]

        [f]
        kind = "identity"

        [experiment]
        delta = 1.0
        dt = 0.2
        n_list = [16]
        r_list = [1.0]
        replicas = 4096
        seed = 8
        burn_in = 8
        r_scale = "sigma"
    "#);
    let run = run_occupation_discrete(&c).unwrap();
    assert_eq!(run.samples.len(), 2);
    let h = c.hurst();
    for s in &run.samples {
        let got = sample_variance(&s.discrete[0]);
        let want =
            fbm_lab_core::occupation_variance_discrete(h, 0.5, 1.0, 0.2, 5, 16, s.burn_in)
                .unwrap();
        let stderr = want * (2.0 / (s.discrete[0].len() as f64 - 1.0)).sqrt();
        assert!(
            (got - want).abs() < 4.0 * stderr,
            "burn {}: variance {got} vs {want}",
            s.burn_in
        );
    }
    let v_burned = sample_variance(&run.samples[0].discrete[0]);
    let v_raw = sample_variance(&run.samples[1].discrete[0]);
    assert!(v_burned > v_raw, "{v_burned} vs {v_raw}");
}
