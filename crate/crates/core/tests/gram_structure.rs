//! Gram matrices of fully split models over abelian groups.

use flatmagic::groups::{pairing, twisted_basis, weyl_basis, FiniteAbelianGroup};
use flatmagic::linalg::{haar_unitary, CMatrix, C64};
use flatmagic::moments::{build_gram_matrix, weyl_lambda_diagonal};
use flatmagic::rng::stream;
use nalgebra::SymmetricEigen;

/// Component formula for the twisted basis g_{ia} = Σ_k <k,a> E_{k,k+i}:
/// a product over s of (1/n) Σ_{p,q} <p, a_s − b_s> <q, b_{s+1} − a_{s+1}>
/// (x_s)_{p+i_s, q+i_{s+1}} conj((x_s)_{p+j_s, q+j_{s+1}}).
fn component_oracle(
    h: &FiniteAbelianGroup,
    xs: &[CMatrix],
    left: &[(usize, usize)],
    right: &[(usize, usize)],
) -> C64 {
    let n = h.size();
    let r = xs.len();
    let el = |k: usize| h.element_at(k);
    let pair = |u: usize, v: usize| pairing(h, &el(u), &el(v)).unwrap();
    let add = |u: usize, v: usize| h.index_of(&h.add(&el(u), &el(v)));
    let sub = |u: usize, v: usize| h.index_of(&h.sub(&el(u), &el(v)));
    let mut total = C64::new(1.0, 0.0);
    for s in 0..r {
        let t = (s + 1) % r;
        let (i_s, a_s) = left[s];
        let (i_t, a_t) = left[t];
        let (j_s, b_s) = right[s];
        let (j_t, b_t) = right[t];
        let mut acc = C64::new(0.0, 0.0);
        for p in 0..n {
            for q in 0..n {
                acc += pair(p, sub(a_s, b_s))
                    * pair(q, sub(b_t, a_t))
                    * xs[s][(add(p, i_s), add(q, i_t))]
                    * xs[s][(add(p, j_s), add(q, j_t))].conj();
            }
        }
        total *= acc / n as f64;
    }
    total
}

fn labels(h: &FiniteAbelianGroup, basis_labels: &[flatmagic::GroupElement]) -> Vec<(usize, usize)> {
    basis_labels
        .iter()
        .map(|l| {
            let (i, a) = h.split_doubled(l);
            (h.index_of(&i), h.index_of(&a))
        })
        .collect()
}

fn multi(idx: usize, base: usize, r: usize) -> Vec<usize> {
    let mut out = vec![0; r];
    let mut rest = idx;
    for slot in out.iter_mut().rev() {
        *slot = rest % base;
        rest /= base;
    }
    out
}

#[test]
fn gram_matrix_matches_component_formula() {
    for (spec, r) in [("Z2", 1), ("Z2", 2), ("Z3", 1), ("Z3", 2), ("Z2xZ2", 1)] {
        let h = FiniteAbelianGroup::parse(spec).unwrap();
        let basis = twisted_basis(&h);
        let lab = labels(&h, basis.labels());
        let mut rng = stream(41, r as u64);
        for _ in 0..3 {
            let xs: Vec<CMatrix> = (0..r)
                .map(|_| haar_unitary(h.size(), &mut rng).unwrap())
                .collect();
            let g = build_gram_matrix(&basis, &xs).unwrap();
            let m = basis.len();
            for row in 0..g.nrows() {
                for col in 0..g.ncols() {
                    let left: Vec<_> = multi(row, m, r).into_iter().map(|k| lab[k]).collect();
                    let right: Vec<_> = multi(col, m, r).into_iter().map(|k| lab[k]).collect();
                    let oracle = component_oracle(&h, &xs, &left, &right);
                    assert!(
                        (g[(row, col)] - oracle).norm() < 1e-8,
                        "{spec} r={r} ({row},{col})"
                    );
                }
            }
        }
    }
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

#[test]
fn gram_spectrum_is_the_weyl_diagonal() {
    let h = FiniteAbelianGroup::parse("Z2").unwrap();
    for basis in [weyl_basis(&h), twisted_basis(&h)] {
        for r in 1..=2 {
            for k in 0..20 {
                let mut rng = stream(42, 100 * r as u64 + k);
                let xs: Vec<CMatrix> = (0..r).map(|_| haar_unitary(2, &mut rng).unwrap()).collect();
                let g = build_gram_matrix(&basis, &xs).unwrap();
                let eig = sorted(SymmetricEigen::new(g).eigenvalues.iter().copied().collect());
                let lambda = sorted(weyl_lambda_diagonal(&h, &xs).unwrap());
                assert_eq!(eig.len(), lambda.len());
                for (a, b) in eig.iter().zip(&lambda) {
                    assert!((a - b).abs() < 1e-8, "r={r} sample {k}: {a} vs {b}");
                }
            }
        }
    }
}

#[test]
fn weyl_diagonal_sums_to_gram_trace() {
    // Σ Λ = Tr G = n^{2r}, since G has unit diagonal
    let h = FiniteAbelianGroup::parse("Z3").unwrap();
    let mut rng = stream(43, 0);
    let xs: Vec<CMatrix> = (0..2).map(|_| haar_unitary(3, &mut rng).unwrap()).collect();
    let s: f64 = weyl_lambda_diagonal(&h, &xs).unwrap().iter().sum();
    assert!((s - 81.0).abs() < 1e-9);
}
