//! Dormand–Prince 5(4) with FSAL and the standard continuous extension.
//! Fields are autonomous, so the stage nodes never appear.

use crate::poly::CompiledField;

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
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Fifth-order weights minus embedded fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// Dense-output coefficients.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// One attempted step: the fifth-order solution, the scaled error vector and
/// the stages needed for dense output.
pub(crate) struct Step {
    pub y1: Vec<f64>,
    pub err: Vec<f64>,
    /// Derivative at the new point (first stage of the next step).
    pub k7: Vec<f64>,
    dense: [Vec<f64>; 5],
}

impl Step {
    /// State at `t0 + theta * h`, `theta in [0, 1]`.
    pub fn interpolate(&self, theta: f64, out: &mut [f64]) {
        let t1 = 1.0 - theta;
        let [r1, r2, r3, r4, r5] = &self.dense;
        for i in 0..out.len() {
            out[i] = r1[i] + theta * (r2[i] + t1 * (r3[i] + theta * (r4[i] + t1 * r5[i])));
        }
    }
}

/// Takes one step of size `h` from `y0` with `k1 = f(y0)`.
pub(crate) fn step(f: &CompiledField, y0: &[f64], k1: &[f64], h: f64) -> Step {
    let n = y0.len();
    let mut tmp = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    for i in 0..n {
        tmp[i] = y0[i] + h * A21 * k1[i];
    }
    f.eval_into(&tmp, &mut k2);
    for i in 0..n {
        tmp[i] = y0[i] + h * (A31 * k1[i] + A32 * k2[i]);
    }
    f.eval_into(&tmp, &mut k3);
    for i in 0..n {
        tmp[i] = y0[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
    }
    f.eval_into(&tmp, &mut k4);
    for i in 0..n {
        tmp[i] = y0[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
    }
    f.eval_into(&tmp, &mut k5);
    for i in 0..n {
        tmp[i] = y0[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
    }
    f.eval_into(&tmp, &mut k6);
    let mut y1 = vec![0.0; n];
    for i in 0..n {
        y1[i] = y0[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
    }
    f.eval_into(&y1, &mut k7);
    let err: Vec<f64> = (0..n)
        .map(|i| h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]))
        .collect();
    let mut r2 = vec![0.0; n];
    let mut r3 = vec![0.0; n];
    let mut r4 = vec![0.0; n];
    let mut r5 = vec![0.0; n];
    for i in 0..n {
        let dy = y1[i] - y0[i];
        let bspl = h * k1[i] - dy;
        r2[i] = dy;
        r3[i] = bspl;
        r4[i] = dy - h * k7[i] - bspl;
        r5[i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
    }
    Step { y1, err, k7, dense: [y0.to_vec(), r2, r3, r4, r5] }
}

/// RMS of the error scaled by `atol + rtol * max(|y0|, |y1|)`.
pub(crate) fn error_norm(s: &Step, y0: &[f64], rtol: f64, atol: f64) -> f64 {
    let n = y0.len().max(1);
    let sum: f64 = (0..y0.len())
        .map(|i| {
            let sc = atol + rtol * y0[i].abs().max(s.y1[i].abs());
            (s.err[i] / sc).powi(2)
        })
        .sum();
    (sum / n as f64).sqrt()
}

/// Starting step size from the local derivative scales.
pub(crate) fn initial_step(f: &CompiledField, y0: &[f64], k1: &[f64], rtol: f64, atol: f64, h_max: f64) -> f64 {
    let n = y0.len().max(1) as f64;
    let norm = |v: &[f64]| {
        (v.iter().zip(y0).map(|(a, y)| (a / (atol + rtol * y.abs())).powi(2)).sum::<f64>() / n).sqrt()
    };
    let d0 = norm(y0);
    let d1 = norm(k1);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1: Vec<f64> = y0.iter().zip(k1).map(|(y, k)| y + h0 * k).collect();
    let mut k2 = vec![0.0; y0.len()];
    f.eval_into(&y1, &mut k2);
    let diff: Vec<f64> = k2.iter().zip(k1).map(|(a, b)| a - b).collect();
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1).min(h_max)
}
