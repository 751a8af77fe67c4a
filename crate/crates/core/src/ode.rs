//! Adaptive quadrature (Gauss–Kronrod 7/15) and an adaptive Dormand–Prince
//! 5(4) integrator, used for cross-checks of the closed-form spreading law.

use crate::error::{Error, Result};

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const K15_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
// Gauss weights for the odd-indexed nodes (1, 3, 5) and the center.
const G7_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = K15_WEIGHTS[7] * fc;
    let mut g = G7_WEIGHTS[3] * fc;
    for j in 0..7 {
        let x = h * GK_NODES[j];
        let s = f(c - x) + f(c + x);
        k += K15_WEIGHTS[j] * s;
        if j % 2 == 1 {
            g += G7_WEIGHTS[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// `∫_a^b f` by adaptive bisection until each piece's Kronrod–Gauss gap is
/// within its share of `tol`. Endpoints are never evaluated.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (v, err) = gk15(f, a, b);
        if err <= tol || depth >= 40 {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth + 1) + rec(f, m, b, 0.5 * tol, depth + 1)
    }
    if a == b {
        return 0.0;
    }
    rec(&f, a, b, tol, 0)
}

/// Tolerances for [`dopri45`].
#[derive(Debug, Clone, Copy)]
pub struct OdeTolerance {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeTolerance {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-14,
            max_steps: 1_000_000,
        }
    }
}

/// Integrates `y' = f(t, y)` from `t0` to `t1` and returns `y(t1)`. `f`
/// writes the derivative into its third argument.
pub fn dopri45<F>(mut f: F, t0: f64, t1: f64, y0: &[f64], tol: OdeTolerance) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    const B: [f64; 7] = [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
        0.0,
    ];
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    let n = y0.len();
    let mut y = y0.to_vec();
    if t1 == t0 {
        return Ok(y);
    }
    let dir = (t1 - t0).signum();
    let mut t = t0;
    let mut h = (t1 - t0) * 1e-3;
    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    for _ in 0..tol.max_steps {
        if (t1 - t) * dir <= 0.0 {
            return Ok(y);
        }
        if (t + h - t1) * dir > 0.0 {
            h = t1 - t;
        }
        f(t, &y, &mut k[0]);
        for s in 1..7 {
            for i in 0..n {
                tmp[i] = y[i] + h * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>();
            }
            f(t + C[s] * h, &tmp, &mut k[s]);
        }
        let mut err = 0.0_f64;
        for i in 0..n {
            y_new[i] = y[i] + h * (0..7).map(|j| B[j] * k[j][i]).sum::<f64>();
            let e = h * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>();
            let scale = tol.atol + tol.rtol * y[i].abs().max(y_new[i].abs());
            err = err.max((e / scale).abs());
        }
        if !err.is_finite() {
            h *= 0.1;
            continue;
        }
        if err <= 1.0 {
            t += h;
            y.copy_from_slice(&y_new);
        }
        let factor = if err == 0.0 { 5.0 } else { 0.9 * err.powf(-0.2) };
        h *= factor.clamp(0.2, 5.0);
    }
    Err(Error::NonConvergence {
        iterations: tol.max_steps,
        last_estimate: t,
        last_iterate: y,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_polynomial_and_singular() {
        let v = integrate(|x| x * x, 0.0, 3.0, 1e-12);
        assert!((v - 9.0).abs() < 1e-12);
        // Integrable endpoint singularity.
        let v = integrate(|x: f64| x.powf(-0.5), 0.0, 1.0, 1e-10);
        assert!((v - 2.0).abs() < 1e-6);
    }

    #[test]
    fn dopri_exponential() {
        let y = dopri45(
            |_, y, dy| dy[0] = -2.0 * y[0],
            0.0,
            3.0,
            &[1.0],
            OdeTolerance::default(),
        )
        .unwrap();
        assert!((y[0] - (-6.0f64).exp()).abs() < 1e-9 * (-6.0f64).exp());
    }

    #[test]
    fn dopri_oscillator() {
        let y = dopri45(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            0.0,
            10.0,
            &[1.0, 0.0],
            OdeTolerance::default(),
        )
        .unwrap();
        assert!((y[0] - 10f64.cos()).abs() < 1e-8);
        assert!((y[1] + 10f64.sin()).abs() < 1e-8);
    }
}
