//! Explicit Runge-Kutta steppers on fixed-size state arrays.
//!
//! Two methods: the classical fixed-step fourth-order scheme and the
//! Dormand-Prince embedded 5(4) pair with standard step-size control.

/// Smallest step the adaptive controller may take.
pub const MIN_STEP: f64 = 1e-14;

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for j in 0..N {
            out[j] += h * c * k[j];
        }
    }
    out
}

/// One classical RK4 step.
pub fn rk4_step<const N: usize, F>(f: &F, y: &[f64; N], h: f64) -> [f64; N]
where
    F: Fn(&[f64; N]) -> [f64; N],
{
    let k1 = f(y);
    let k2 = f(&axpy(y, h, &[(0.5, &k1)]));
    let k3 = f(&axpy(y, h, &[(0.5, &k2)]));
    let k4 = f(&axpy(y, h, &[(1.0, &k3)]));
    axpy(
        y,
        h,
        &[
            (1.0 / 6.0, &k1),
            (1.0 / 3.0, &k2),
            (1.0 / 3.0, &k3),
            (1.0 / 6.0, &k4),
        ],
    )
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Difference between the fifth- and fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// One Dormand-Prince step. Returns the fifth-order solution and the
/// scaled error norm (accept when `<= 1`).
pub fn dopri5_step<const N: usize, F>(
    f: &F,
    y: &[f64; N],
    h: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> ([f64; N], f64)
where
    F: Fn(&[f64; N]) -> [f64; N],
{
    let k1 = f(y);
    let k2 = f(&axpy(y, h, &[(A21, &k1)]));
    let k3 = f(&axpy(y, h, &[(A31, &k1), (A32, &k2)]));
    let k4 = f(&axpy(y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
    let k5 = f(&axpy(
        y,
        h,
        &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)],
    ));
    let k6 = f(&axpy(
        y,
        h,
        &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
    ));
    let y5 = axpy(
        y,
        h,
        &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
    );
    let k7 = f(&y5);
    let mut sum = 0.0;
    for j in 0..N {
        let err = h * (E1 * k1[j] + E3 * k3[j] + E4 * k4[j] + E5 * k5[j] + E6 * k6[j] + E7 * k7[j]);
        let scale = abs_tol + rel_tol * y[j].abs().max(y5[j].abs());
        sum += (err / scale).powi(2);
    }
    (y5, (sum / N as f64).sqrt())
}

/// Step-size factor from an accepted or rejected error norm.
pub fn step_factor(err: f64) -> f64 {
    if err == 0.0 {
        5.0
    } else {
        (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk4_exponential() {
        let f = |y: &[f64; 1]| [-y[0]];
        let mut y = [1.0];
        for _ in 0..100 {
            y = rk4_step(&f, &y, 0.01);
        }
        assert!((y[0] - (-1.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn dopri5_harmonic_oscillator() {
        let f = |y: &[f64; 2]| [y[1], -y[0]];
        let mut y = [1.0, 0.0];
        let mut t = 0.0;
        let mut h: f64 = 0.1;
        let end = 2.0 * std::f64::consts::PI;
        while t < end {
            let step = h.min(end - t);
            let (y_new, err) = dopri5_step(&f, &y, step, 1e-12, 1e-12);
            if err <= 1.0 {
                y = y_new;
                t += step;
            }
            h = step * step_factor(err);
        }
        assert!((y[0] - 1.0).abs() < 1e-9);
        assert!(y[1].abs() < 1e-9);
    }
}
