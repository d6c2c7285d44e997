//! Fixed-step classical Runge–Kutta for 2×2 complex matrix ODEs.

use crate::spin::Mat2;

/// One RK4 step of `dy/dt = f(t, y)` from `t` to `t + h`.
#[inline]
pub fn rk4_step<F>(f: &F, t: f64, y: &Mat2, h: f64) -> Mat2
where
    F: Fn(f64, &Mat2) -> Mat2,
{
    let half = 0.5 * h;
    let k1 = f(t, y);
    let k2 = f(t + half, &(y + k1.map(|z| z * half)));
    let k3 = f(t + half, &(y + k2.map(|z| z * half)));
    let k4 = f(t + h, &(y + k3.map(|z| z * h)));
    y + (k1 + (k2 + k3).map(|z| z * 2.0) + k4).map(|z| z * (h / 6.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::pauli::{c, pauli};

    #[test]
    fn fourth_order_convergence() {
        // dU/dt = -i ω σz/2 U has the exact solution diag(e^{-iωt/2}, e^{iωt/2}).
        let omega = 5.0;
        let f = |_t: f64, u: &Mat2| pauli(3) * u * c(0.0, -0.5 * omega);
        let run = |n: usize| {
            let h = 2.0 / n as f64;
            let mut u = Mat2::identity();
            for i in 0..n {
                u = rk4_step(&f, i as f64 * h, &u, h);
            }
            (u[(0, 0)] - c(0.0, -omega).exp()).norm()
        };
        let e1 = run(100);
        let e2 = run(200);
        let order = (e1 / e2).log2();
        assert!((order - 4.0).abs() < 0.2, "observed order {order}");
    }
}
