//! Flattening behavior on Haar starts.

use flatmagic::groups::LatinSquare;
use flatmagic::moments::{f_p, GridSampler};
use flatmagic::rng::stream;
use flatmagic::sinkhorn::{extract_latin_square, flatten, vol, KnSampler, UnitaryTuple};

#[test]
fn n3_limits_are_latin_squares() {
    let sampler = KnSampler::new(3).unwrap();
    let mut squares: Vec<(LatinSquare, usize)> = Vec::new();
    for k in 0..40 {
        let g = sampler.sample(&mut stream(21, k)).unwrap();
        let (l, overlap) = extract_latin_square(&g).unwrap();
        assert!(overlap > 1.0 - 1e-6);
        match squares.iter_mut().find(|(s, _)| *s == l) {
            Some((_, c)) => *c += 1,
            None => squares.push((l, 1)),
        }
    }
    // rows normalized to 1,2,3 leave exactly two 3x3 Latin squares
    assert_eq!(squares.len(), 2, "{squares:?}");
}

#[test]
fn trajectories_increase_volume() {
    for n in 3..=4 {
        for k in 0..10 {
            let x = UnitaryTuple::haar(n, &mut stream(22, 10 * n as u64 + k)).unwrap();
            let out = flatten(&x, 10_000, 1e-9).unwrap();
            assert_eq!(out.trace.vol_violations(), 0, "N={n} start {k}");
            if out.converged {
                let last = out.trace.records.last().unwrap();
                assert!((last.vol - 1.0).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn sampled_magic_bases_have_fp_n_to_one_minus_p() {
    for n in 2..=4 {
        let g = KnSampler::new(n)
            .unwrap()
            .sample(&mut stream(23, 0))
            .unwrap();
        assert!(g.is_magic_basis(1e-8));
        assert!((vol(&g) - 1.0).abs() < 1e-8);
        for p in 2..=3 {
            let expected = (n as f64).powi(1 - p as i32);
            assert!((f_p(&g, p).unwrap() - expected).abs() < 1e-8);
        }
    }
}
