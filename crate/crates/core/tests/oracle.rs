//! Godunov reference: invariants, wave positions and self-convergence.

use trtlbm::diagnostics::{l1_norm, total_variation};
use trtlbm::reference::{godunov_solve, project};
use trtlbm::{FluxModel, GodunovOptions, GridSpec, InitialDatum, SchemeSpec};

fn grid(n: usize) -> GridSpec {
    GridSpec::symmetric(&SchemeSpec::d1q3(2.0, 12.0 / 25.0), n).unwrap()
}

#[test]
fn invariants_along_the_trajectory() {
    let b = FluxModel::burgers();
    for datum in [InitialDatum::indicator(), InitialDatum::hat(), InitialDatum::double_indicator()] {
        let fine = grid(1024);
        let o = godunov_solve(&b, &datum, &fine, 0.25, &GodunovOptions::default()).unwrap();
        assert!(o.cfl() <= 0.45 + 1e-12);
        let first = &o.trajectory()[0];
        let (lo, hi) = first.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let mass0: f64 = first.iter().sum();
        let mut tv_prev = total_variation(first, &fine);
        for u in o.trajectory() {
            assert!(u.iter().all(|&v| v >= lo - 1e-12 && v <= hi + 1e-12), "{}", datum.name);
            let mass: f64 = u.iter().sum();
            assert!((mass - mass0).abs() <= 1e-12 * mass0.abs(), "{}", datum.name);
            let tv = total_variation(u, &fine);
            assert!(tv <= tv_prev + 1e-12, "{}", datum.name);
            tv_prev = tv;
        }
        assert!((o.final_time() - 0.25).abs() < 1e-12);
    }
}

#[test]
fn indicator_waves_at_final_time() {
    let b = FluxModel::burgers();
    let fine = grid(8192);
    let opts = GodunovOptions { sync_dt: Some(1.0 / 256.0), ..GodunovOptions::default() };
    let o = godunov_solve(&b, &InitialDatum::indicator(), &fine, 0.25, &opts).unwrap();
    let u = o.nearest(0.25);
    let x = |i: usize| fine.center(&[i])[0];

    // shock: last cell with u > 1/2
    let shock = (0..fine.n()).filter(|&i| u[i] > 0.5).map(x).fold(f64::NEG_INFINITY, f64::max);
    assert!((shock - 0.625).abs() < 2e-3, "shock at {shock}");
    // rarefaction: u rises linearly from x = -1/2 to x = -1/4
    let foot = (0..fine.n()).map(|i| (x(i), u[i])).find(|&(_, v)| v > 1e-3).unwrap().0;
    assert!((foot + 0.5).abs() < 2e-2, "foot at {foot}");
    let mid = (0..fine.n()).find(|&i| x(i) >= -0.375).unwrap();
    assert!((u[mid] - 0.5).abs() < 1e-2, "u(-3/8) = {}", u[mid]);
}

#[test]
fn oracle_self_convergence() {
    let b = FluxModel::burgers();
    let target = grid(64);
    let opts = GodunovOptions::for_target(&target);
    let finals: Vec<Vec<f64>> = [8, 16, 32]
        .iter()
        .map(|&r| {
            let o = godunov_solve(&b, &InitialDatum::indicator(), &target.refine(r).unwrap(), 0.25, &opts).unwrap();
            project(&o, &target, 0.25).unwrap()
        })
        .collect();
    let diff = |a: &[f64], c: &[f64]| l1_norm(&a.iter().zip(c).map(|(x, y)| x - y).collect::<Vec<_>>(), &target);
    let (d1, d2) = (diff(&finals[0], &finals[1]), diff(&finals[1], &finals[2]));
    let order = (d1 / d2).log2();
    assert!(order >= 0.7, "self-convergence order {order} ({d1:.3e}, {d2:.3e})");
}

#[test]
fn cfl_limits_are_enforced() {
    let b = FluxModel::burgers();
    let bad = GodunovOptions { cfl: 0.6, ..GodunovOptions::default() };
    assert!(godunov_solve(&b, &InitialDatum::hat(), &grid(64), 0.25, &bad).is_err());
}

#[test]
fn two_dimensional_oracle_is_bounded() {
    let rot = FluxModel::rotated_burgers(std::f64::consts::FRAC_PI_4);
    let spec = SchemeSpec::d2q5(2.0, 6.0 / 25.0, 6.0 / 25.0);
    let fine = GridSpec::symmetric(&spec, 64).unwrap();
    let o = godunov_solve(&rot, &InitialDatum::indicator_radial(), &fine, 0.25, &GodunovOptions::default()).unwrap();
    let u = o.nearest(0.25);
    assert!(u.iter().all(|&v| (-1e-12..=1.0 + 1e-12).contains(&v)));
    let m0: f64 = o.trajectory()[0].iter().sum();
    assert!((u.iter().sum::<f64>() - m0).abs() <= 1e-12 * m0);
}
