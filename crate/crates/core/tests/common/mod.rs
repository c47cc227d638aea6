#![allow(dead_code)]
pub mod checks;
pub mod oracle;

use benson_core::model::{CvopProblem, DomainBox, Expr, OrderingCone};
use nalgebra::DVector;

pub fn v(a: &[f64]) -> DVector<f64> {
    DVector::from_row_slice(a)
}

fn x(i: usize) -> Expr {
    Expr::var(i)
}

/// Identity objectives over the unit disk centred at (1, 1) in the orthant.
pub fn example1() -> CvopProblem {
    let cone = OrderingCone::orthant(v(&[1.0, 1.0])).unwrap();
    CvopProblem::new(
        2,
        vec![x(0), x(1)],
        vec![(x(0) - 1.0).square() + (x(1) - 1.0).square() - 1.0, -x(0), -x(1)],
        DomainBox::free(2),
        cone,
    )
    .unwrap()
    .with_frame(vec![v(&[0.0, 1.0])])
}

/// Two squared distances under `|x₁| + 2|x₂| ≤ 2`.
pub fn example2() -> CvopProblem {
    let cone = OrderingCone::orthant(v(&[1.0, 1.0])).unwrap();
    CvopProblem::new(
        2,
        vec![
            (x(0) - 3.0).square() + (x(1) - 1.0).square(),
            (x(0) - 1.0).square() + (x(1) - 1.0).square(),
        ],
        vec![x(0).abs() + 2.0 * x(1).abs() - 2.0],
        DomainBox::free(2),
        cone,
    )
    .unwrap()
    .with_frame(vec![v(&[1.0, 0.0])])
}

/// Three sums of exponentials over a polyhedral cone of `ℝ⁶`.
pub fn example3() -> CvopProblem {
    let cone = OrderingCone::orthant(v(&[1.0, 1.0, 1.0])).unwrap();
    let lin = |a: [f64; 6]| Expr::affine(a.iter().map(|c| -c).collect(), 0.0);
    CvopProblem::new(
        6,
        vec![
            x(0).exp() + x(3).exp(),
            x(1).exp() + x(4).exp(),
            x(2).exp() + x(5).exp(),
        ],
        vec![
            lin([1.0, 1.0, 1.0, 0.0, 0.0, 0.0]),
            lin([3.0, 6.0, 3.0, 4.0, 1.0, 4.0]),
            lin([3.0, 1.0, 1.0, 2.0, 4.0, 4.0]),
        ],
        DomainBox::free(6),
        cone,
    )
    .unwrap()
    .with_frame(vec![v(&[1.0, 0.0, 0.0]), v(&[0.0, 1.0, 0.0])])
}
