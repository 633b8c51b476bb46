//! Central finite-difference gradient oracle.
//!
//! Lives in the library so both unit tests and the acceptance suite can use
//! it, but it never touches the tape's backward pass: derivatives come from
//! forward re-evaluations only.

use crate::tape::Mat;

/// Central-difference gradient of a scalar function of several matrices.
pub fn fd_grad_scalar<F>(mut f: F, inputs: &[Mat], eps: f64) -> Vec<Mat>
where
    F: FnMut(&[Mat]) -> f64,
{
    let mut work: Vec<Mat> = inputs.to_vec();
    let mut grads = Vec::with_capacity(inputs.len());
    for k in 0..inputs.len() {
        let dim = inputs[k].dim();
        let mut g = Mat::zeros(dim);
        for i in 0..dim.0 {
            for j in 0..dim.1 {
                let orig = work[k][(i, j)];
                work[k][(i, j)] = orig + eps;
                let fp = f(&work);
                work[k][(i, j)] = orig - eps;
                let fm = f(&work);
                work[k][(i, j)] = orig;
                g[(i, j)] = (fp - fm) / (2.0 * eps);
            }
        }
        grads.push(g);
    }
    grads
}

/// Largest elementwise relative error between two same-shaped matrices,
/// with the denominator floored at 1 so near-zero entries compare absolutely.
pub fn max_abs_rel_err(a: &Mat, b: &Mat) -> f64 {
    assert_eq!(a.dim(), b.dim(), "shape mismatch in gradient comparison");
    let mut worst = 0.0_f64;
    for (x, y) in a.iter().zip(b.iter()) {
        let denom = x.abs().max(y.abs()).max(1.0);
        worst = worst.max((x - y).abs() / denom);
    }
    worst
}
