//! Adaptive Dormand–Prince 5(4) integration of small autonomous or
//! time-dependent systems.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    /// Largest step; `f64::INFINITY` for none.
    pub h_max: f64,
    /// Steps below `h_min · max(1, |t|)` are reported as underflow.
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            rtol: 1e-8,
            atol: 1e-10,
            h_max: f64::INFINITY,
            h_min: 1e-14,
            max_steps: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OdeError {
    Underflow { t: f64, h: f64 },
    NonFinite { t: f64 },
    TooManySteps { t: f64 },
}

/// Integrate `x' = f(t, x)` from `t0` to `t1`, calling `on_step(t, x)` after
/// every accepted step. Returns the final state and the number of accepted
/// steps.
pub fn dopri5<const N: usize>(
    f: impl Fn(f64, &[f64; N]) -> [f64; N],
    t0: f64,
    x0: [f64; N],
    t1: f64,
    ctl: &StepControl,
    mut on_step: impl FnMut(f64, &[f64; N]),
) -> Result<([f64; N], usize), (OdeError, [f64; N])> {
    const C2: f64 = 1.0 / 5.0;
    const C3: f64 = 3.0 / 10.0;
    const C4: f64 = 4.0 / 5.0;
    const C5: f64 = 8.0 / 9.0;
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
    // fifth-order minus embedded fourth-order weights
    const E1: f64 = 71.0 / 57600.0;
    const E3: f64 = -71.0 / 16695.0;
    const E4: f64 = 71.0 / 1920.0;
    const E5: f64 = -17253.0 / 339200.0;
    const E6: f64 = 22.0 / 525.0;
    const E7: f64 = -1.0 / 40.0;

    let mut t = t0;
    let mut x = x0;
    if t1 <= t0 {
        return Ok((x, 0));
    }
    let combine = |x: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]| {
        let mut out = *x;
        for (c, k) in terms {
            for i in 0..N {
                out[i] += h * c * k[i];
            }
        }
        out
    };
    let norm = |x: &[f64; N], scale: &[f64; N]| {
        let s: f64 = (0..N).map(|i| (x[i] / scale[i]).powi(2)).sum();
        (s / N as f64).sqrt()
    };

    let mut k1 = f(t, &x);
    let mut h = {
        let scale: [f64; N] = std::array::from_fn(|i| ctl.atol + ctl.rtol * x[i].abs());
        let d0 = norm(&x, &scale);
        let d1 = norm(&k1, &scale);
        let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h.min(ctl.h_max).min(t1 - t0)
    };
    let mut steps = 0;
    let mut last_err: f64 = 1e-4;

    while t < t1 {
        if steps >= ctl.max_steps {
            return Err((OdeError::TooManySteps { t }, x));
        }
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        let k2 = f(t + C2 * h, &combine(&x, h, &[(A21, &k1)]));
        let k3 = f(t + C3 * h, &combine(&x, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(t + C4 * h, &combine(&x, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(
            t + C5 * h,
            &combine(&x, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = f(
            t + h,
            &combine(&x, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        );
        let x_new = combine(&x, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        let k7 = f(t + h, &x_new);
        let err_vec: [f64; N] = std::array::from_fn(|i| {
            h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
        });
        let scale: [f64; N] =
            std::array::from_fn(|i| ctl.atol + ctl.rtol * x[i].abs().max(x_new[i].abs()));
        let err = norm(&err_vec, &scale);

        if !err.is_finite() || x_new.iter().any(|v| !v.is_finite()) {
            if h <= ctl.h_min * t.abs().max(1.0) {
                return Err((OdeError::NonFinite { t }, x));
            }
            h *= 0.25;
            continue;
        }

        if err <= 1.0 {
            t = if last { t1 } else { t + h };
            x = x_new;
            k1 = k7;
            steps += 1;
            on_step(t, &x);
            // PI step-size controller
            let fac = 0.9 * err.max(1e-10).powf(-0.7 / 5.0) * last_err.powf(0.4 / 5.0);
            h = (h * fac.clamp(0.2, 5.0)).min(ctl.h_max);
            last_err = err.max(1e-4);
        } else {
            let fac = 0.9 * err.powf(-1.0 / 5.0);
            h *= fac.clamp(0.1, 0.9);
        }
        if h <= ctl.h_min * t.abs().max(1.0) && t < t1 {
            return Err((OdeError::Underflow { t, h }, x));
        }
    }
    Ok((x, steps))
}
