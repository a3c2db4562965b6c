//! Cross-validation of the four moment pipelines for the Pauli model.

use flatmagic::groups::{weyl_basis, FiniteAbelianGroup};
use flatmagic::moments::{
    char_square_moments, gram_model_moments, lis_moment, transfer_moments, weyl_lambda_moments,
    FullySplitSampler,
};

/// Within 3 combined standard errors, with a roundoff floor for statistics
/// that are exact per sample.
fn agree(a: (f64, f64), b: (f64, f64)) -> bool {
    (a.0 - b.0).abs() <= 3.0 * (a.1 * a.1 + b.1 * b.1).sqrt() + 1e-12
}

#[test]
fn pauli_pipelines_agree() {
    let h = FiniteAbelianGroup::parse("Z2").unwrap();
    let basis = weyl_basis(&h);
    let samples = 20_000;
    let transfer = transfer_moments(
        &FullySplitSampler {
            basis: basis.clone(),
        },
        3,
        2,
        4_000,
        1,
    )
    .unwrap();
    let direct = char_square_moments(2, 3, samples, 2).unwrap();
    for r in 1..=2 {
        let gram = gram_model_moments(&basis, r, 3, samples, 3 + r as u64).unwrap();
        let weyl = weyl_lambda_moments(&h, r, 3, samples, 5 + r as u64).unwrap();
        for p in 1..=3 {
            let routes = [
                transfer.get(p, r).unwrap(),
                gram.get(p, r).unwrap(),
                weyl.get(p, r).unwrap(),
                direct.get(p, 0).unwrap(),
            ];
            for a in 0..4 {
                for b in a + 1..4 {
                    assert!(agree(routes[a], routes[b]), "p={p} r={r}: {routes:?}");
                }
                let exact = lis_moment(2, p).unwrap() as f64;
                assert!(
                    agree(routes[a], (exact, 0.0)),
                    "p={p} r={r} route {a}: {:?} vs {exact}",
                    routes[a]
                );
            }
        }
    }
}

#[test]
fn u3_third_moment_is_six() {
    let s = char_square_moments(3, 3, 100_000, 9).unwrap();
    let (est, se) = s.get(3, 0).unwrap();
    assert!((est - 6.0).abs() <= 3.0 * se, "{est} ± {se}");
}
