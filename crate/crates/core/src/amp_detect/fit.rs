//! Logistic fit `y = T / (1 + exp(-a (x - c)))` by Levenberg-Marquardt.

use std::io::{self, Write};

use crate::error::{Error, Result};

use super::T0Stats;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Fit the plateau as a third parameter instead of holding it fixed.
    pub float_plateau: bool,
    pub max_iterations: usize,
    /// Convergence tolerance on the relative parameter change.
    pub tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            float_plateau: false,
            max_iterations: 200,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmoidFit {
    pub slope_a: f64,
    pub center_b: f64,
    pub plateau_t: f64,
    pub r_squared: f64,
    pub se_a: f64,
    pub se_b: f64,
    /// Standard error of the plateau when it was fitted.
    pub se_plateau: Option<f64>,
    pub iterations: usize,
}

impl SigmoidFit {
    pub fn eval(&self, x: f64) -> f64 {
        logistic(self.plateau_t, self.slope_a, self.center_b, x)
    }
}

/// Writes `decay_b,slope_a,center_b,r2` rows.
pub fn write_fits_csv<W: Write>(fits: &[(f64, SigmoidFit)], mut w: W) -> io::Result<()> {
    writeln!(w, "decay_b,slope_a,center_b,r2")?;
    for (b, f) in fits {
        writeln!(w, "{},{},{},{}", b, f.slope_a, f.center_b, f.r_squared)?;
    }
    Ok(())
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn logistic(t: f64, a: f64, c: f64, x: f64) -> f64 {
    t * sigmoid(a * (x - c))
}

pub fn fit_sigmoid(curve: &[T0Stats], plateau_t: f64) -> Result<SigmoidFit> {
    fit_sigmoid_with(curve, plateau_t, &FitOptions::default())
}

pub fn fit_sigmoid_with(
    curve: &[T0Stats],
    plateau_t: f64,
    opts: &FitOptions,
) -> Result<SigmoidFit> {
    let xs: Vec<f64> = curve.iter().map(|s| s.sigma).collect();
    let ys: Vec<f64> = curve.iter().map(|s| s.mean_t0).collect();
    fit_sigmoid_xy(&xs, &ys, plateau_t, opts)
}

/// Initial guess: `a0 = 4 / (x range)`, `c0` where the data first cross half the plateau.
fn initial_guess(xs: &[f64], ys: &[f64], plateau_t: f64) -> (f64, f64) {
    let range = xs[xs.len() - 1] - xs[0];
    let a0 = 4.0 / range;
    let half = 0.5 * plateau_t;
    let c0 = match ys.iter().position(|&y| y >= half) {
        Some(0) => xs[0],
        Some(i) => {
            let (x0, x1, y0, y1) = (xs[i - 1], xs[i], ys[i - 1], ys[i]);
            if y1 > y0 {
                x0 + (half - y0) * (x1 - x0) / (y1 - y0)
            } else {
                x1
            }
        }
        None => xs[0] + 0.5 * range,
    };
    (a0, c0)
}

/// Least-squares logistic fit to `(xs, ys)`.
pub fn fit_sigmoid_xy(
    xs: &[f64],
    ys: &[f64],
    plateau_t: f64,
    opts: &FitOptions,
) -> Result<SigmoidFit> {
    if xs.len() != ys.len() {
        return Err(Error::invalid("x and y lengths differ"));
    }
    if xs.len() < 4 {
        return Err(Error::invalid("sigmoid fit needs at least 4 points"));
    }
    if !(plateau_t > 0.0 && plateau_t.is_finite()) {
        return Err(Error::invalid(format!(
            "plateau must be > 0, got {plateau_t}"
        )));
    }
    if xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("x values must be strictly increasing"));
    }
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::invalid("y values must be finite"));
    }

    let np = if opts.float_plateau { 3 } else { 2 };
    let (a0, c0) = initial_guess(xs, ys, plateau_t);
    let mut p = vec![a0, c0, plateau_t];
    let model = |p: &[f64], x: f64| logistic(p[2], p[0], p[1], x);
    let rss_of = |p: &[f64]| -> f64 {
        xs.iter()
            .zip(ys)
            .map(|(&x, &y)| (y - model(p, x)).powi(2))
            .sum()
    };

    let jacobian_row = |p: &[f64], x: f64| -> [f64; 3] {
        let s = sigmoid(p[0] * (x - p[1]));
        let ds = p[2] * s * (1.0 - s);
        [ds * (x - p[1]), -ds * p[0], s]
    };

    let mut rss = rss_of(&p);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for (&x, &y) in xs.iter().zip(ys) {
            let j = jacobian_row(&p, x);
            let r = y - model(&p, x);
            for u in 0..np {
                jtr[u] += j[u] * r;
                for v in 0..np {
                    jtj[u][v] += j[u] * j[v];
                }
            }
        }
        if rss == 0.0 {
            converged = true;
            break;
        }
        let mut accepted = false;
        while lambda < 1e16 {
            let mut m = jtj;
            for u in 0..np {
                m[u][u] += lambda * jtj[u][u].max(1e-300);
            }
            let Some(delta) = solve(&m, &jtr, np) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = p.clone();
            for u in 0..np {
                trial[u] += delta[u];
            }
            let trial_rss = rss_of(&trial);
            if trial_rss.is_finite() && trial_rss <= rss {
                let small = (0..np)
                    .all(|u| delta[u].abs() <= opts.tolerance * (p[u].abs() + opts.tolerance));
                p = trial;
                rss = trial_rss;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                converged = small;
                break;
            }
            lambda *= 10.0;
        }
        if converged {
            break;
        }
        if !accepted {
            // No downhill step at any damping: p is a stationary point.
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::FitFailure {
            iterations,
            rss,
            params: p[..np].to_vec(),
        });
    }

    let n = xs.len() as f64;
    let mean_y = ys.iter().sum::<f64>() / n;
    let tss: f64 = ys.iter().map(|y| (y - mean_y).powi(2)).sum();
    let r_squared = if tss > 0.0 {
        (1.0 - rss / tss).clamp(0.0, 1.0)
    } else if rss == 0.0 {
        1.0
    } else {
        0.0
    };

    let mut jtj = [[0.0; 3]; 3];
    for &x in xs {
        let j = jacobian_row(&p, x);
        for u in 0..np {
            for v in 0..np {
                jtj[u][v] += j[u] * j[v];
            }
        }
    }
    let s2 = if xs.len() > np {
        rss / (xs.len() - np) as f64
    } else {
        0.0
    };
    let cov = invert(&jtj, np);
    let se = |u: usize| {
        cov.map(|c| (s2 * c[u][u]).max(0.0).sqrt())
            .unwrap_or(f64::NAN)
    };

    Ok(SigmoidFit {
        slope_a: p[0],
        center_b: p[1],
        plateau_t: p[2],
        r_squared,
        se_a: se(0),
        se_b: se(1),
        se_plateau: opts.float_plateau.then(|| se(2)),
        iterations,
    })
}

/// Gaussian elimination with partial pivoting on the leading `n x n` block.
fn solve(m: &[[f64; 3]; 3], b: &[f64; 3], n: usize) -> Option<[f64; 3]> {
    let mut a = *m;
    let mut x = *b;
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if !(a[piv][col].abs() > 0.0) || !a[piv][col].is_finite() {
            return None;
        }
        a.swap(col, piv);
        x.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            let pivot = a[col];
            for (v, p) in a[row][col..n].iter_mut().zip(&pivot[col..n]) {
                *v -= f * p;
            }
            x[row] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = x[col];
        for k in col + 1..n {
            s -= a[col][k] * x[k];
        }
        x[col] = s / a[col][col];
    }
    x[..n].iter().all(|v| v.is_finite()).then_some(x)
}

fn invert(m: &[[f64; 3]; 3], n: usize) -> Option<[[f64; 3]; 3]> {
    let mut inv = [[0.0; 3]; 3];
    for col in 0..n {
        let mut e = [0.0; 3];
        e[col] = 1.0;
        let x = solve(m, &e, n)?;
        for row in 0..n {
            inv[row][col] = x[row];
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<f64> {
        (0..=50).map(|i| 0.01 * i as f64).collect()
    }

    #[test]
    fn recovers_exact_model() {
        let xs = grid();
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| 1.5 / (1.0 + (-20.0 * (x - 0.2)).exp()))
            .collect();
        let f = fit_sigmoid_xy(&xs, &ys, 1.5, &FitOptions::default()).unwrap();
        assert!((f.slope_a - 20.0).abs() < 1e-6, "{f:?}");
        assert!((f.center_b - 0.2).abs() < 1e-6);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn recovers_steep_step() {
        let xs = grid();
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| 1.5 / (1.0 + (-170.0 * (x - 0.102)).exp()))
            .collect();
        let f = fit_sigmoid_xy(&xs, &ys, 1.5, &FitOptions::default()).unwrap();
        assert!((f.slope_a - 170.0).abs() < 1e-4, "{f:?}");
        assert!((f.center_b - 0.102).abs() < 1e-8);
    }

    #[test]
    fn floating_plateau() {
        let xs = grid();
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| 1.2 / (1.0 + (-30.0 * (x - 0.25)).exp()))
            .collect();
        let opts = FitOptions {
            float_plateau: true,
            ..Default::default()
        };
        let f = fit_sigmoid_xy(&xs, &ys, 1.5, &opts).unwrap();
        assert!((f.plateau_t - 1.2).abs() < 1e-6);
        assert!(f.se_plateau.is_some());
    }

    #[test]
    fn wrong_plateau_hurts_r2() {
        let xs = grid();
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| 0.75 / (1.0 + (-20.0 * (x - 0.2)).exp()))
            .collect();
        let good = fit_sigmoid_xy(&xs, &ys, 0.75, &FitOptions::default()).unwrap();
        let bad = fit_sigmoid_xy(&xs, &ys, 1.5, &FitOptions::default()).unwrap();
        // oracle: residual sum recomputed by hand from the returned parameters
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        let tss: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
        let rss: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(&x, y)| (y - bad.eval(x)).powi(2))
            .sum();
        assert!((bad.r_squared - (1.0 - rss / tss).max(0.0)).abs() < 1e-12);
        assert!(good.r_squared - bad.r_squared > 0.1);
    }

    #[test]
    fn standard_errors_shrink_with_less_noise() {
        let xs = grid();
        let fit_with = |amp: f64| {
            let ys: Vec<f64> = xs
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    1.5 / (1.0 + (-20.0 * (x - 0.2)).exp())
                        + amp * if i % 2 == 0 { 1.0 } else { -1.0 }
                })
                .collect();
            fit_sigmoid_xy(&xs, &ys, 1.5, &FitOptions::default()).unwrap()
        };
        let noisy = fit_with(0.02);
        let quiet = fit_with(0.002);
        assert!(quiet.se_a < noisy.se_a && quiet.se_b < noisy.se_b);
        assert!(noisy.se_a > 0.0);
    }

    #[test]
    fn rejects_short_curves() {
        assert!(fit_sigmoid_xy(
            &[0.0, 0.1, 0.2],
            &[0.0, 0.5, 1.0],
            1.5,
            &FitOptions::default()
        )
        .is_err());
        assert!(fit_sigmoid_xy(
            &[0.0, 0.1, 0.2, 0.3],
            &[0.0; 4],
            0.0,
            &FitOptions::default()
        )
        .is_err());
    }

    #[test]
    fn iteration_cap_reports_failure() {
        let xs = grid();
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| 1.5 / (1.0 + (-170.0 * (x - 0.3)).exp()))
            .collect();
        let opts = FitOptions {
            max_iterations: 1,
            ..Default::default()
        };
        match fit_sigmoid_xy(&xs, &ys, 1.5, &opts) {
            Err(Error::FitFailure {
                iterations, params, ..
            }) => {
                assert_eq!(iterations, 1);
                assert_eq!(params.len(), 2);
            }
            other => panic!("expected fit failure, got {other:?}"),
        }
    }
}
