//! Plain Nelder–Mead downhill simplex with the textbook coefficients
//! (reflect 1, expand 2, contract 1/2, shrink 1/2).
//!
//! Nothing here knows about the fitting problem: the caller owns bounds,
//! transforms, and restarts. Termination is an evaluation budget plus a
//! stall rule — the best vertex improving by less than `stall_rtol`
//! (relative) over `stall_iters` consecutive iterations ends the run.

#[derive(Debug, Clone, Copy)]
pub struct NmOptions {
    pub max_evals: usize,
    pub stall_iters: usize,
    pub stall_rtol: f64,
}

impl Default for NmOptions {
    fn default() -> Self {
        Self {
            max_evals: 20_000,
            stall_iters: 200,
            stall_rtol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NmResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub evals: usize,
    /// True when the stall rule ended the run, false when the evaluation
    /// budget did — the caller's convergence flag.
    pub stalled: bool,
}

struct Vertex {
    x: Vec<f64>,
    fx: f64,
}

/// Minimizes `f` starting from `x0`, with initial simplex edges `step`
/// along each axis. `step` entries must be nonzero.
pub fn minimize<F>(mut f: F, x0: &[f64], step: &[f64], opts: &NmOptions) -> NmResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    assert!(n > 0, "empty parameter vector");
    assert_eq!(step.len(), n);

    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<Vertex> = Vec::with_capacity(n + 1);
    let fx0 = eval(x0, &mut evals);
    simplex.push(Vertex {
        x: x0.to_vec(),
        fx: fx0,
    });
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step[i];
        let fx = eval(&x, &mut evals);
        simplex.push(Vertex { x, fx });
    }

    let mut stall = 0usize;
    let mut stalled = false;
    while evals < opts.max_evals {
        simplex.sort_by(|a, b| a.fx.total_cmp(&b.fx));
        let best_before = simplex[0].fx;

        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, &xi) in centroid.iter_mut().zip(&v.x) {
                *c += xi;
            }
        }
        for c in &mut centroid {
            *c /= n as f64;
        }

        let worst = simplex[n].fx;
        let second_worst = simplex[n - 1].fx;
        let lerp = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].x)
                .map(|(&c, &w)| c + t * (c - w))
                .collect()
        };

        let xr = lerp(1.0);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].fx {
            let xe = lerp(2.0);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr {
                Vertex { x: xe, fx: fe }
            } else {
                Vertex { x: xr, fx: fr }
            };
        } else if fr < second_worst {
            simplex[n] = Vertex { x: xr, fx: fr };
        } else {
            let (xc, fc) = if fr < worst {
                let xc = lerp(0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            } else {
                let xc: Vec<f64> = centroid
                    .iter()
                    .zip(&simplex[n].x)
                    .map(|(&c, &w)| c - 0.5 * (c - w))
                    .collect();
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            };
            if fc < worst.min(fr) {
                simplex[n] = Vertex { x: xc, fx: fc };
            } else {
                // Shrink toward the best vertex.
                let best = simplex[0].x.clone();
                for v in &mut simplex[1..] {
                    for (xi, &bi) in v.x.iter_mut().zip(&best) {
                        *xi = bi + 0.5 * (*xi - bi);
                    }
                    v.fx = eval(&v.x, &mut evals);
                }
            }
        }

        let best_after = simplex.iter().map(|v| v.fx).fold(f64::INFINITY, f64::min);
        let improved = best_before - best_after > opts.stall_rtol * best_before.abs().max(1e-30);
        stall = if improved { 0 } else { stall + 1 };
        if stall >= opts.stall_iters {
            stalled = true;
            break;
        }
    }

    simplex.sort_by(|a, b| a.fx.total_cmp(&b.fx));
    let best = simplex.into_iter().next().expect("nonempty simplex");
    NmResult {
        x: best.x,
        fx: best.fx,
        evals,
        stalled,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn solves_rosenbrock() {
        let r = minimize(rosenbrock, &[-1.2, 1.0], &[0.5, 0.5], &NmOptions::default());
        assert!(r.fx < 1e-12, "fx = {}", r.fx);
        assert!((r.x[0] - 1.0).abs() < 1e-5);
        assert!((r.x[1] - 1.0).abs() < 1e-5);
        assert!(r.stalled);
    }

    #[test]
    fn solves_shifted_sphere_in_five_dims() {
        let f = |x: &[f64]| -> f64 {
            x.iter()
                .enumerate()
                .map(|(i, &v)| (v - i as f64).powi(2))
                .sum()
        };
        let r = minimize(f, &[5.0; 5], &[1.0; 5], &NmOptions::default());
        assert!(r.fx < 1e-14, "fx = {}", r.fx);
        for (i, &v) in r.x.iter().enumerate() {
            assert!((v - i as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn respects_eval_budget() {
        let opts = NmOptions {
            max_evals: 50,
            ..NmOptions::default()
        };
        let r = minimize(rosenbrock, &[-1.2, 1.0], &[0.5, 0.5], &opts);
        // A few evals of overshoot within one iteration is fine; a whole
        // extra iteration is not.
        assert!(r.evals <= 60, "evals = {}", r.evals);
        assert!(!r.stalled);
    }

    #[test]
    fn identical_runs_are_identical() {
        let a = minimize(rosenbrock, &[3.0, -4.0], &[1.0, 1.0], &NmOptions::default());
        let b = minimize(rosenbrock, &[3.0, -4.0], &[1.0, 1.0], &NmOptions::default());
        assert_eq!(a.x, b.x);
        assert_eq!(a.fx, b.fx);
        assert_eq!(a.evals, b.evals);
    }

    #[test]
    fn nan_objective_is_treated_as_infinite() {
        // A basin guarded by NaN walls: the simplex must still find 0.
        let f = |x: &[f64]| {
            if x[0].abs() > 3.0 {
                f64::NAN
            } else {
                x[0] * x[0]
            }
        };
        let r = minimize(f, &[2.5], &[1.0], &NmOptions::default());
        assert!(r.fx < 1e-14);
    }
}
