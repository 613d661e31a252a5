//! Accuracy properties of the built-in models against closed forms and
//! finite-difference oracles.

use gosurr_core::models::{Elliptic1d, QoiNormalization};
use gosurr_core::{Level, Model};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_lambdas(seed: u64, count: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| vec![rng.random_range(1.0..5.0), rng.random_range(1.0..5.0)])
        .collect()
}

#[test]
fn mean_error_decreases_with_level() {
    let m = Elliptic1d::default();
    let lams = random_lambdas(10, 50);
    let mut prev = f64::INFINITY;
    for l in 1..=5 {
        let mut err = 0.0;
        for lam in &lams {
            let exact = m.exact_qoi(lam).unwrap();
            let r = m.evaluate(lam, Level::new(l), false).unwrap();
            err += (0..2).map(|k| (r.q[k] - exact[k]).abs()).sum::<f64>();
        }
        assert!(err < prev, "level {l}: {err} >= {prev}");
        prev = err;
    }
}

#[test]
fn corrected_level_one_is_ten_times_better() {
    let m = Elliptic1d::default();
    for lam in random_lambdas(11, 50) {
        let exact = m.exact_qoi(&lam).unwrap();
        let r = m.evaluate(&lam, Level::new(1), false).unwrap();
        for k in 0..2 {
            let raw = (r.q[k] - exact[k]).abs();
            let corrected = (r.q[k] + r.error_estimate[k] - exact[k]).abs();
            assert!(corrected < 0.1 * raw, "λ={lam:?} k={k}: {corrected} vs {raw}");
        }
    }
}

#[test]
fn effectivity_near_one_on_levels_one_to_four() {
    let m = Elliptic1d::default();
    for lam in random_lambdas(12, 50) {
        let exact = m.exact_qoi(&lam).unwrap();
        for l in 1..=4 {
            let r = m.evaluate(&lam, Level::new(l), false).unwrap();
            for k in 0..2 {
                let eff = r.error_estimate[k] / (exact[k] - r.q[k]);
                assert!((0.5..=1.5).contains(&eff), "λ={lam:?} level {l} k={k}: {eff}");
            }
        }
    }
}

#[test]
fn gradient_at_unit_parameters() {
    let m = Elliptic1d::default().with_normalization(QoiNormalization::Integral);
    let r = m.evaluate(&[1.0, 1.0], Level::new(5), true).unwrap();
    let j = r.jacobian.unwrap();
    assert_eq!((j.rows(), j.cols()), (2, 2));
    // Q ∝ 1/λ₁, so ∂Q/∂λ₁ = −Q at λ₁ = 1
    assert!((j.get(0, 0) + r.q[0]).abs() < 1e-12);
    assert!((j.get(0, 0) + 0.0422173).abs() < 1e-3);
}

#[test]
fn gradient_matches_central_differences() {
    let m = Elliptic1d::default();
    let step = 1e-5;
    for lam in random_lambdas(13, 10) {
        for l in [1, 3, 5] {
            let level = Level::new(l);
            let j = m.evaluate(&lam, level, true).unwrap().jacobian.unwrap();
            for i in 0..2 {
                let mut lp = lam.clone();
                let mut lm = lam.clone();
                lp[i] += step;
                lm[i] -= step;
                let qp = m.evaluate(&lp, level, false).unwrap().q;
                let qm = m.evaluate(&lm, level, false).unwrap().q;
                for k in 0..2 {
                    let fd = (qp[k] - qm[k]) / (2.0 * step);
                    let rel = (j.get(k, i) - fd).abs() / fd.abs();
                    assert!(rel < 1e-5, "λ={lam:?} level {l} ∂{i}Q{k}: {} vs {fd}", j.get(k, i));
                }
            }
        }
    }
}

#[test]
fn predprey_equilibrium_identical_across_levels() {
    let m = gosurr_core::models::PredatorPrey::default();
    let base = m.evaluate(&[1.0; 6], Level::new(1), false).unwrap().q;
    for l in 2..=4 {
        let q = m.evaluate(&[1.0; 6], Level::new(l), false).unwrap().q;
        for (a, b) in q.iter().zip(&base) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
