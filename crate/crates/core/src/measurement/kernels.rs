//! Per-type measurement functions with analytic derivatives.
//!
//! Every kernel works on the voltages of the buses a row touches, gathered in
//! the row's fixed order, and writes derivatives as `[dθ_0.., dV_0..]`.
//!
//! * `Vm`: buses `[i]`.
//! * flows: buses `[a, b]` with `y = [Y_aa, Y_ab]`, `a` the metered end.
//! * injections: buses `[i, j_1, ..]` with `y = [Y_ii, Y_ij1, ..]`.

use num_complex::Complex64;

use super::MeasurementType;

pub fn eval_row(
    kind: MeasurementType,
    y: &[Complex64],
    va: &[f64],
    vm: &[f64],
    grad: Option<&mut [f64]>,
) -> f64 {
    use MeasurementType::*;
    match kind {
        Vm => {
            if let Some(g) = grad {
                g[0] = 0.0;
                g[1] = 1.0;
            }
            vm[0]
        }
        Pf | Pt => flow_p(y, va, vm, grad),
        Qf | Qt => flow_q(y, va, vm, grad),
        Pinj => injection_p(y, va, vm, grad),
        Qinj => injection_q(y, va, vm, grad),
    }
}

fn flow_p(y: &[Complex64], va: &[f64], vm: &[f64], grad: Option<&mut [f64]>) -> f64 {
    let (gaa, g, b) = (y[0].re, y[1].re, y[1].im);
    let (s, c) = (va[0] - va[1]).sin_cos();
    let (v_a, v_b) = (vm[0], vm[1]);
    let k = g * c + b * s;
    if let Some(d) = grad {
        let dtheta = v_a * v_b * (-g * s + b * c);
        d[0] = dtheta;
        d[1] = -dtheta;
        d[2] = 2.0 * v_a * gaa + v_b * k;
        d[3] = v_a * k;
    }
    v_a * v_a * gaa + v_a * v_b * k
}

fn flow_q(y: &[Complex64], va: &[f64], vm: &[f64], grad: Option<&mut [f64]>) -> f64 {
    let (baa, g, b) = (y[0].im, y[1].re, y[1].im);
    let (s, c) = (va[0] - va[1]).sin_cos();
    let (v_a, v_b) = (vm[0], vm[1]);
    let k = g * s - b * c;
    if let Some(d) = grad {
        let dtheta = v_a * v_b * (g * c + b * s);
        d[0] = dtheta;
        d[1] = -dtheta;
        d[2] = -2.0 * v_a * baa + v_b * k;
        d[3] = v_a * k;
    }
    -v_a * v_a * baa + v_a * v_b * k
}

fn injection_p(y: &[Complex64], va: &[f64], vm: &[f64], grad: Option<&mut [f64]>) -> f64 {
    let nb = y.len();
    let v_i = vm[0];
    let gii = y[0].re;
    let mut sum = 0.0;
    match grad {
        Some(d) => {
            let mut dtheta_i = 0.0;
            for j in 1..nb {
                let (g, b) = (y[j].re, y[j].im);
                let (s, c) = (va[0] - va[j]).sin_cos();
                let k = g * c + b * s;
                let kd = -g * s + b * c;
                sum += vm[j] * k;
                dtheta_i += vm[j] * kd;
                d[j] = -v_i * vm[j] * kd;
                d[nb + j] = v_i * k;
            }
            d[0] = v_i * dtheta_i;
            d[nb] = sum + 2.0 * v_i * gii;
        }
        None => {
            for j in 1..nb {
                let (s, c) = (va[0] - va[j]).sin_cos();
                sum += vm[j] * (y[j].re * c + y[j].im * s);
            }
        }
    }
    v_i * sum + v_i * v_i * gii
}

fn injection_q(y: &[Complex64], va: &[f64], vm: &[f64], grad: Option<&mut [f64]>) -> f64 {
    let nb = y.len();
    let v_i = vm[0];
    let bii = y[0].im;
    let mut sum = 0.0;
    match grad {
        Some(d) => {
            let mut dtheta_i = 0.0;
            for j in 1..nb {
                let (g, b) = (y[j].re, y[j].im);
                let (s, c) = (va[0] - va[j]).sin_cos();
                let k = g * s - b * c;
                let kd = g * c + b * s;
                sum += vm[j] * k;
                dtheta_i += vm[j] * kd;
                d[j] = -v_i * vm[j] * kd;
                d[nb + j] = v_i * k;
            }
            d[0] = v_i * dtheta_i;
            d[nb] = sum - 2.0 * v_i * bii;
        }
        None => {
            for j in 1..nb {
                let (s, c) = (va[0] - va[j]).sin_cos();
                sum += vm[j] * (y[j].re * s - y[j].im * c);
            }
        }
    }
    v_i * sum - v_i * v_i * bii
}
