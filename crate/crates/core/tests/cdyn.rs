use qct_core::cdyn::{density_histogram, lyapunov_ensemble, sample_coherent_matched, LangevinRun};
use qct_core::model::HamiltonianSpec;
use qct_core::qstate::WignerGrid;

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[test]
fn duffing_exponent_is_positive_and_reproducible_across_seeds() {
    let spec = HamiltonianSpec::chaotic_duffing();
    let estimates: Vec<_> = (1..=3)
        .map(|seed| {
            let starts = sample_coherent_matched(-3.0, 8.0, 0.1, 16, seed).unwrap();
            lyapunov_ensemble(&spec, &starts, 500.0, 1e-3, 100).unwrap()
        })
        .collect();
    let max_err = estimates.iter().map(|e| e.std_err).fold(0.0, f64::max);
    for e in &estimates {
        assert!(e.lambda_bar > 0.1, "{e:?}");
        assert_eq!(e.n_orbits, 16);
    }
    for a in &estimates {
        for b in &estimates {
            assert!((a.lambda_bar - b.lambda_bar).abs() < 2.0 * max_err, "{a:?} vs {b:?}");
        }
    }
}

#[test]
fn exponent_does_not_depend_on_renormalization_interval() {
    let spec = HamiltonianSpec::chaotic_duffing();
    let starts = sample_coherent_matched(-3.0, 8.0, 0.1, 8, 4).unwrap();
    let often = lyapunov_ensemble(&spec, &starts, 300.0, 1e-3, 20).unwrap();
    let rarely = lyapunov_ensemble(&spec, &starts, 300.0, 1e-3, 200).unwrap();
    let tol = 2.0 * often.std_err.max(rarely.std_err);
    assert!((often.lambda_bar - rarely.lambda_bar).abs() < tol, "{often:?} vs {rarely:?}");
}

#[test]
fn histograms_converge_at_monte_carlo_rate() {
    let axes = WignerGrid::zeros(40, 40, -4.0, 0.2, 4.0, 0.2);
    let mut log_n = Vec::new();
    let mut log_l1 = Vec::new();
    for (i, n) in [2_000usize, 8_000, 32_000, 128_000].into_iter().enumerate() {
        let a = sample_coherent_matched(0.0, 8.0, 0.5, n, 10 + 2 * i as u64).unwrap();
        let b = sample_coherent_matched(0.0, 8.0, 0.5, n, 11 + 2 * i as u64).unwrap();
        let ha = density_histogram(&a, &axes).unwrap();
        let hb = density_histogram(&b, &axes).unwrap();
        let l1: f64 = ha.values.iter().zip(&hb.values).map(|(u, v)| (u - v).abs()).sum::<f64>() * 0.5 * axes.cell_area();
        log_n.push((n as f64).ln());
        log_l1.push(l1.ln());
    }
    let slope = least_squares_slope(&log_n, &log_l1);
    assert!((slope + 0.5).abs() < 0.15, "slope {slope}");
}

#[test]
fn free_langevin_matches_quantum_diffusion_rate() {
    // D = ħ²k with ħ = 0.1, k = 1
    let d = 0.1f64.powi(2) * 1.0;
    let ensemble = sample_coherent_matched(0.0, 0.0, 0.1, 100_000, 6).unwrap();
    let v0 = ensemble.moments().var_p;
    let mut run = LangevinRun::new(ensemble, &HamiltonianSpec::free(1.0), d, 1e-2, 6).unwrap();
    run.advance_to(2.0).unwrap();
    let rate = (run.ensemble.moments().var_p - v0) / 2.0;
    assert!((rate - 2.0 * d).abs() < 0.05 * 2.0 * d, "rate {rate}");
}
