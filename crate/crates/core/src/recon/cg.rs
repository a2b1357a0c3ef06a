use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    /// `‖b − Ax‖ / ‖b‖` at exit.
    pub relative_residual: f64,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.as_f64() * y.as_f64()).sum()
}

/// Conjugate gradient for a symmetric positive semi-definite operator,
/// starting from the contents of `x`. Stops after `max_iters` or when the
/// relative residual falls below `tol`.
pub fn conjugate_gradient<T: Real>(
    apply: &mut dyn FnMut(&[T]) -> Vec<T>,
    b: &[T],
    x: &mut [T],
    max_iters: usize,
    tol: f64,
) -> CgReport {
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = T::zero());
        return CgReport { iterations: 0, relative_residual: 0.0 };
    }
    let ax = apply(x);
    let mut r: Vec<T> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
    let mut p = r.clone();
    let mut rs = dot(&r, &r);
    let mut it = 0;
    while it < max_iters && rs.sqrt() / b_norm > tol {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = T::of(rs / pap);
        x.iter_mut().zip(&p).for_each(|(xi, &pi)| *xi = *xi + alpha * pi);
        r.iter_mut().zip(&ap).for_each(|(ri, &ai)| *ri = *ri - alpha * ai);
        let rs_new = dot(&r, &r);
        let beta = T::of(rs_new / rs);
        p.iter_mut().zip(&r).for_each(|(pi, &ri)| *pi = ri + beta * *pi);
        rs = rs_new;
        it += 1;
    }
    CgReport { iterations: it, relative_residual: rs.sqrt() / b_norm }
}
