//! Minimum-norm point of a polytope given by its generators (Wolfe's method).

use nalgebra::{DMatrix, DVector};

/// Solves `min ‖Σ αᵢ pᵢ‖` over the affine hull of `pts[s]`, i.e. with
/// `Σ αᵢ = 1` but no sign constraint.
fn affine_min_norm(pts: &[DVector<f64>], s: &[usize]) -> Vec<f64> {
    let k = s.len();
    let mut kkt = DMatrix::zeros(k + 1, k + 1);
    let mut rhs = DVector::zeros(k + 1);
    for i in 0..k {
        for j in 0..k {
            kkt[(i, j)] = pts[s[i]].dot(&pts[s[j]]);
        }
        kkt[(i, k)] = 1.0;
        kkt[(k, i)] = 1.0;
    }
    rhs[k] = 1.0;
    let sol = kkt
        .clone()
        .lu()
        .solve(&rhs)
        .filter(|v| v.iter().all(|x| x.is_finite()))
        .unwrap_or_else(|| {
            kkt.svd(true, true)
                .solve(&rhs, 1e-12)
                .expect("SVD factors were requested")
        });
    sol.iter().take(k).copied().collect()
}

/// Point of minimum Euclidean norm in `conv(pts)`.
pub(crate) fn min_norm_point(pts: &[DVector<f64>]) -> DVector<f64> {
    assert!(!pts.is_empty());
    let scale = pts.iter().map(|p| p.norm_squared()).fold(0.0, f64::max).max(1e-300);
    let start = (0..pts.len())
        .min_by(|&a, &b| pts[a].norm_squared().total_cmp(&pts[b].norm_squared()))
        .expect("nonempty");
    let mut s = vec![start];
    let mut lam = vec![1.0];
    let combine = |s: &[usize], lam: &[f64]| {
        let mut x = DVector::zeros(pts[0].len());
        for (&i, &l) in s.iter().zip(lam) {
            x.axpy(l, &pts[i], 1.0);
        }
        x
    };
    for _ in 0..1000 {
        let x = combine(&s, &lam);
        let (j, pj) = (0..pts.len())
            .map(|j| (j, pts[j].dot(&x)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty");
        if x.norm_squared() - pj <= 1e-14 * scale || s.contains(&j) {
            return x;
        }
        s.push(j);
        lam.push(0.0);
        loop {
            let alpha = affine_min_norm(pts, &s);
            if alpha.iter().all(|&a| a > 1e-15) {
                lam = alpha;
                break;
            }
            let mut theta = 1.0f64;
            for (l, a) in lam.iter().zip(&alpha) {
                if *a <= 1e-15 && l - a > 0.0 {
                    theta = theta.min(l / (l - a));
                }
            }
            for (l, a) in lam.iter_mut().zip(&alpha) {
                *l += theta * (a - *l);
            }
            let keep: Vec<bool> = lam.iter().map(|&l| l > 1e-15).collect();
            s = s.iter().zip(&keep).filter(|(_, k)| **k).map(|(i, _)| *i).collect();
            lam = lam.iter().zip(&keep).filter(|(_, k)| **k).map(|(l, _)| *l).collect();
            if s.len() == 1 {
                lam = vec![1.0];
                break;
            }
        }
    }
    combine(&s, &lam)
}
