use qct_core::model::HamiltonianSpec;
use qct_core::qdyn::{average_ensemble, run_trajectory, MeasurementSpec, NoisePath, Propagator};
use qct_core::qstate::{coherent_state, energy, moments, wigner, PositionGrid, WaveFunction};

fn free_gaussian(n: usize, half_width: f64, hbar: f64) -> WaveFunction {
    let grid = PositionGrid::new(n, -half_width, half_width).unwrap();
    coherent_state(&grid, 0.0, 0.0, hbar).unwrap()
}

/// Conditioned covariance flow of a free Gaussian under continuous position
/// measurement, integrated with classic RK4.
fn riccati(m: f64, k: f64, hbar: f64, v0: [f64; 3], t: f64, steps: usize) -> [f64; 3] {
    let rhs = |v: [f64; 3]| {
        let [vx, vp, c] = v;
        [
            2.0 * c / m - 8.0 * k * vx * vx,
            -8.0 * k * c * c + 2.0 * hbar * hbar * k,
            vp / m - 8.0 * k * vx * c,
        ]
    };
    let h = t / steps as f64;
    let add = |a: [f64; 3], b: [f64; 3], s: f64| [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]];
    let mut v = v0;
    for _ in 0..steps {
        let k1 = rhs(v);
        let k2 = rhs(add(v, k1, 0.5 * h));
        let k3 = rhs(add(v, k2, 0.5 * h));
        let k4 = rhs(add(v, k3, h));
        for i in 0..3 {
            v[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    v
}

#[test]
fn conditioned_free_gaussian_follows_riccati_flow() {
    let hbar = 0.1;
    let psi0 = free_gaussian(512, 5.0, hbar);
    let meas = MeasurementSpec::new(1.0, hbar).unwrap();
    let spec = HamiltonianSpec::free(1.0);
    let [vx, vp, c] = riccati(1.0, 1.0, hbar, [0.5 * hbar, 0.5 * hbar, 0.0], 1.0, 100_000);
    for index in 0..3 {
        let mut noise = NoisePath::new(11, index, 1e-4);
        let rec = run_trajectory(&psi0, &spec, &meas, 1.0, &mut noise, 10_000, &[]).unwrap();
        let m = rec.rows.last().unwrap().moments;
        assert!((m.var_x - vx).abs() < 0.01 * vx, "V_x {} vs {vx}", m.var_x);
        assert!((m.var_p - vp).abs() < 0.01 * vp, "V_p {} vs {vp}", m.var_p);
        assert!((m.cov_xp - c).abs() < 0.01 * c.abs(), "C_xp {} vs {c}", m.cov_xp);
    }
}

#[test]
fn conditioned_free_gaussian_stays_gaussian() {
    let hbar = 0.1;
    let psi0 = free_gaussian(512, 5.0, hbar);
    let meas = MeasurementSpec::new(1.0, hbar).unwrap();
    let mut noise = NoisePath::new(4, 0, 1e-4);
    let times: Vec<f64> = (1..=10).map(|i| 0.1 * i as f64).collect();
    let rec = run_trajectory(&psi0, &HamiltonianSpec::free(1.0), &meas, 1.0, &mut noise, 1000, &times).unwrap();
    for (t, psi) in &rec.snapshots {
        let rho = psi.density();
        let dx = psi.grid.dx;
        let xs = psi.grid.positions();
        let mean: f64 = rho.iter().zip(&xs).map(|(r, x)| r * x).sum::<f64>() * dx;
        let central = |k: i32| rho.iter().zip(&xs).map(|(r, x)| r * (x - mean).powi(k)).sum::<f64>() * dx;
        let excess = central(4) / central(2).powi(2) - 3.0;
        assert!(excess.abs() < 1e-3, "excess kurtosis {excess} at t = {t}");
    }
}

#[test]
fn unmeasured_steps_preserve_norm() {
    let grid = PositionGrid::new(1024, -8.0, 8.0).unwrap();
    let mut psi = coherent_state(&grid, -3.0, 8.0, 0.1).unwrap();
    let meas = MeasurementSpec::new(0.0, 0.1).unwrap();
    let mut prop = Propagator::new(&grid, &HamiltonianSpec::chaotic_duffing(), &meas, 1e-4).unwrap();
    for step in 0..200 {
        let before = psi.norm();
        prop.step(&mut psi, step as f64 * 1e-4, 0.0).unwrap();
        assert!((psi.norm() - before).abs() < 1e-12);
    }
}

#[test]
fn harmonic_coherent_state_returns_after_one_period() {
    let omega = 2.0;
    let hbar = 0.1;
    let grid = PositionGrid::new(256, -6.0, 6.0).unwrap();
    let psi0 = coherent_state(&grid, 1.5, 0.0, hbar).unwrap();
    let period = std::f64::consts::TAU / omega;
    let dt = period / 4000.0;
    let meas = MeasurementSpec::new(0.0, hbar).unwrap();
    let mut noise = NoisePath::new(0, 0, dt);
    let rec = run_trajectory(&psi0, &HamiltonianSpec::harmonic(1.0, omega), &meas, period, &mut noise, 1000, &[])
        .unwrap();
    let quarter = rec.rows[1].moments;
    assert!(quarter.mean_x.abs() < 1e-5);
    assert!((quarter.mean_p + 1.5 * omega).abs() < 1e-5);
    let end = rec.rows.last().unwrap().moments;
    assert!((end.mean_x - 1.5).abs() < 1e-5, "{}", end.mean_x);
    assert!(end.mean_p.abs() < 1e-5);
}

#[test]
fn harmonic_variance_has_no_secular_growth() {
    let omega = 1.0;
    let hbar = 0.1;
    let grid = PositionGrid::new(256, -6.0, 6.0).unwrap();
    // squeezed start so the width actually breathes
    let psi0 = WaveFunction::from_fn(grid, hbar, |x| {
        num_complex::Complex64::new((-(x - 1.0) * (x - 1.0) / (4.0 * 0.02)).exp(), 0.0)
    })
    .unwrap();
    let period = std::f64::consts::TAU / omega;
    let steps_per_period = 2000;
    let dt = period / steps_per_period as f64;
    let meas = MeasurementSpec::new(0.0, hbar).unwrap();
    let mut noise = NoisePath::new(0, 0, dt);
    let rec = run_trajectory(
        &psi0,
        &HamiltonianSpec::harmonic(1.0, omega),
        &meas,
        10.0 * period,
        &mut noise,
        steps_per_period,
        &[],
    )
    .unwrap();
    let v0 = rec.rows[0].moments.var_x;
    assert_eq!(rec.rows.len(), 11);
    for row in &rec.rows {
        assert!((row.moments.var_x - v0).abs() < 1e-4, "{} vs {v0} at {}", row.moments.var_x, row.t);
    }
}

#[test]
fn undriven_duffing_conserves_energy() {
    let hbar = 0.1;
    let mut spec = HamiltonianSpec::chaotic_duffing();
    spec.drive_amp = 0.0;
    let grid = PositionGrid::new(2048, -7.0, 7.0).unwrap();
    let psi0 = coherent_state(&grid, -3.0, 8.0, hbar).unwrap();
    let meas = MeasurementSpec::new(0.0, hbar).unwrap();
    let dt = 1e-4;
    let times: Vec<f64> = (1..=10).map(|i| i as f64).collect();
    let mut noise = NoisePath::new(0, 0, dt);
    let rec = run_trajectory(&psi0, &spec, &meas, 10.0, &mut noise, 10_000, &times).unwrap();
    let e0 = energy(&psi0, &spec, 0.0);
    for (t, psi) in &rec.snapshots {
        let drift = (energy(psi, &spec, *t) - e0).abs() / e0.abs();
        assert!(drift < 1e-6, "relative energy drift {drift:e} at t = {t}");
    }
}

#[test]
fn halving_dt_shrinks_strong_error() {
    let hbar = 0.1;
    let spec = HamiltonianSpec::chaotic_duffing();
    let grid = PositionGrid::new(1024, -7.0, 7.0).unwrap();
    let psi0 = coherent_state(&grid, -3.0, 8.0, hbar).unwrap();
    let meas = MeasurementSpec::new(1.0, hbar).unwrap();
    // single paths cross zero error by accident; average |error| over paths
    let (mut coarse, mut fine_err) = (0.0, 0.0);
    for seed in 0..8 {
        let fine = NoisePath::new(100 + seed, 0, 1e-5);
        let terminal = |factor: u64| {
            let mut noise = fine.coarsened(factor);
            let rec = run_trajectory(&psi0, &spec, &meas, 1.0, &mut noise, usize::MAX, &[]).unwrap();
            rec.rows.last().unwrap().moments.mean_x
        };
        let reference = terminal(1);
        coarse += (terminal(16) - reference).abs();
        fine_err += (terminal(8) - reference).abs();
    }
    let ratio = coarse / fine_err;
    assert!((1.2..=2.8).contains(&ratio), "error ratio {ratio} ({coarse:e} -> {fine_err:e})");
}

#[test]
fn records_are_bitwise_reproducible() {
    let grid = PositionGrid::new(512, -7.0, 7.0).unwrap();
    let psi0 = coherent_state(&grid, -3.0, 0.0, 0.1).unwrap();
    let meas = MeasurementSpec::new(1.0, 0.1).unwrap();
    let spec = HamiltonianSpec::chaotic_duffing();
    let run = || {
        let mut noise = NoisePath::new(5, 3, 1e-3);
        let rec = run_trajectory(&psi0, &spec, &meas, 0.5, &mut noise, 10, &[]).unwrap();
        let mut csv = Vec::new();
        rec.write_csv(&mut csv).unwrap();
        csv
    };
    assert_eq!(run(), run());
}

#[test]
fn ensemble_is_independent_of_worker_count() {
    let grid = PositionGrid::new(256, -6.0, 6.0).unwrap();
    let psi0 = coherent_state(&grid, -2.0, 0.0, 0.2).unwrap();
    let meas = MeasurementSpec::new(1.0, 0.2).unwrap();
    let spec = HamiltonianSpec::chaotic_duffing();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| average_ensemble(&psi0, &spec, &meas, 0.2, 1e-3, 19, 8, &[0.1, 0.2], 256).unwrap())
    };
    let a = run(1);
    let b = run(3);
    for (ga, gb) in a.grids.iter().zip(&b.grids) {
        assert!(ga.values.iter().zip(&gb.values).all(|(u, v)| u.to_bits() == v.to_bits()));
    }
    assert_eq!(a.moments, b.moments);
}

#[test]
fn single_member_ensemble_is_that_trajectory() {
    let grid = PositionGrid::new(256, -6.0, 6.0).unwrap();
    let psi0 = coherent_state(&grid, -2.0, 1.0, 0.2).unwrap();
    let meas = MeasurementSpec::new(1.0, 0.2).unwrap();
    let spec = HamiltonianSpec::chaotic_duffing();
    let avg = average_ensemble(&psi0, &spec, &meas, 0.3, 1e-3, 1, 2, &[0.3], 256).unwrap();
    let mut noise = NoisePath::new(2, 0, 1e-3);
    let rec = run_trajectory(&psi0, &spec, &meas, 0.3, &mut noise, usize::MAX, &[0.3]).unwrap();
    let w = wigner(&rec.snapshots[0].1, 256).unwrap();
    assert_eq!(avg.grids[0].values, w.values);
    let (a, b) = (avg.moments[0], moments(&rec.snapshots[0].1));
    assert_eq!(a.mean_x, b.mean_x);
    assert!((a.var_x - b.var_x).abs() < 1e-14 && (a.var_p - b.var_p).abs() < 1e-12);
}

#[test]
fn averaged_momentum_variance_grows_at_diffusion_rate() {
    let hbar = 0.1;
    let psi0 = free_gaussian(512, 5.0, hbar);
    let meas = MeasurementSpec::new(1.0, hbar).unwrap();
    let avg = average_ensemble(&psi0, &HamiltonianSpec::free(1.0), &meas, 2.0, 1e-3, 200, 3, &[0.0, 2.0], 512)
        .unwrap();
    let rate = (avg.moments[1].var_p - avg.moments[0].var_p) / 2.0;
    let expected = 2.0 * meas.diffusion();
    assert!((rate - expected).abs() < 0.05 * expected, "rate {rate} vs {expected}");
    for g in &avg.grids {
        assert!((g.integral() - 1.0).abs() < 1e-6);
    }
}

#[test]
fn averaging_never_increases_negativity() {
    let grid = PositionGrid::new(512, -7.0, 7.0).unwrap();
    let psi0 = coherent_state(&grid, -3.0, 3.0, 0.1).unwrap();
    let meas = MeasurementSpec::new(1.0, 0.1).unwrap();
    let avg = average_ensemble(
        &psi0,
        &HamiltonianSpec::chaotic_duffing(),
        &meas,
        1.0,
        1e-3,
        16,
        9,
        &[0.5, 1.0],
        1024,
    )
    .unwrap();
    for (g, mean_neg) in avg.grids.iter().zip(&avg.mean_trajectory_negativity) {
        assert!(qct_core::compare::negativity(g) <= mean_neg + 1e-10);
    }
}
