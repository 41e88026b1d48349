//! Dormand-Prince 5(4) embedded pair.

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
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

const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];

const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Result of one trial step.
pub(crate) struct Trial {
    pub y: Vec<f64>,
    /// Weighted RMS error; the step is acceptable when this is at most 1.
    pub error: f64,
    /// Estimate of the Jacobian's spectral radius from the last two stages.
    pub stiffness: f64,
}

/// Largest `dt * stiffness` allowed; the stability region reaches about 3.3 on the real axis.
pub(crate) const STABLE_STEP: f64 = 2.0;

/// Advances `y` by `dt`, propagating any failure of the derivative at a stage.
pub(crate) fn trial_step<F, E>(f: &F, y: &[f64], dt: f64, rel_tol: f64, abs_tol: f64) -> Result<Trial, E>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, E>,
{
    let n = y.len();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    let mut stage = vec![0.0; n];
    let mut sixth = vec![0.0; n];
    for s in 0..7 {
        if s == 0 {
            k.push(f(y)?);
            continue;
        }
        debug_assert!(C[s] > 0.0);
        for i in 0..n {
            let mut acc = y[i];
            for (j, kj) in k.iter().enumerate() {
                acc += dt * A[s][j] * kj[i];
            }
            stage[i] = acc;
        }
        if s == 5 {
            sixth.copy_from_slice(&stage);
        }
        k.push(f(&stage)?);
    }
    // the seventh stage sits at y_new, so the fifth-order solution is `stage`
    let y_new = stage;
    let mut sum = 0.0;
    for i in 0..n {
        let mut e = 0.0;
        for s in 0..7 {
            e += (B5[s] - B4[s]) * k[s][i];
        }
        let scale = abs_tol + rel_tol * y[i].abs().max(y_new[i].abs());
        sum += (dt * e / scale).powi(2);
    }
    // stages 6 and 7 share the same time, so their slope difference probes the Jacobian
    let dk: f64 = (0..n).map(|i| (k[6][i] - k[5][i]).powi(2)).sum::<f64>().sqrt();
    let dy: f64 = (0..n).map(|i| (y_new[i] - sixth[i]).powi(2)).sum::<f64>().sqrt();
    let stiffness = if dy > 0.0 { dk / dy } else { 0.0 };
    Ok(Trial {
        y: y_new,
        error: (sum / n as f64).sqrt(),
        stiffness,
    })
}

/// Step size factor suggested by the error of the last trial.
pub(crate) fn step_factor(error: f64) -> f64 {
    if error == 0.0 {
        5.0
    } else {
        (0.9 * error.powf(-0.2)).clamp(0.2, 5.0)
    }
}
