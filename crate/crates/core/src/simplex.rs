//! Nelder–Mead downhill simplex over non-negative coordinates.

use crate::error::{Error, Result};

/// Reflection, expansion, contraction and shrink coefficients.
pub const REFLECTION: f64 = 1.0;
pub const EXPANSION: f64 = 2.0;
pub const CONTRACTION: f64 = 0.5;
pub const SHRINK: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadConfig {
    pub max_iterations: usize,
    /// Stop once `max f − min f` over the simplex drops below this.
    pub tolerance: f64,
    /// Edge length of the initial simplex along each axis. Zero coordinates
    /// are perturbed by this absolute amount, others by the same fraction.
    pub initial_step: f64,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            tolerance: 1e-12,
            initial_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    /// Best objective value after each iteration (first entry: initial simplex).
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn mirror(x: Vec<f64>) -> Vec<f64> {
    x.into_iter().map(f64::abs).collect()
}

fn eval(f: &mut impl FnMut(&[f64]) -> f64, x: &[f64]) -> Result<f64> {
    let v = f(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteObjective { point: x.to_vec() })
    }
}

/// Initial simplex: `x0` plus one vertex per axis.
pub fn axis_simplex(x0: &[f64], step: f64) -> Vec<Vec<f64>> {
    let mut simplex = vec![x0.to_vec()];
    for i in 0..x0.len() {
        let mut v = x0.to_vec();
        v[i] = if v[i] == 0.0 { step } else { v[i] * (1.0 + step) };
        simplex.push(v);
    }
    simplex
}

/// Minimizes `f` starting from the axis simplex around `x0`.
pub fn nelder_mead(f: impl FnMut(&[f64]) -> f64, x0: &[f64], config: &NelderMeadConfig) -> Result<NelderMeadResult> {
    if x0.is_empty() {
        return Err(Error::param("x0", "need at least one coordinate"));
    }
    nelder_mead_simplex(f, axis_simplex(x0, config.initial_step), config)
}

/// Minimizes `f` from an explicit initial simplex of `n + 1` vertices.
pub fn nelder_mead_simplex(
    mut f: impl FnMut(&[f64]) -> f64,
    simplex: Vec<Vec<f64>>,
    config: &NelderMeadConfig,
) -> Result<NelderMeadResult> {
    let n = simplex.len().saturating_sub(1);
    if n == 0 || simplex.iter().any(|v| v.len() != n) {
        return Err(Error::param("simplex", "need n + 1 vertices of dimension n ≥ 1"));
    }
    let mut pts: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    for v in simplex {
        let v = mirror(v);
        let fv = eval(&mut f, &v)?;
        pts.push((v, fv));
    }
    let order = |pts: &mut Vec<(Vec<f64>, f64)>| pts.sort_by(|a, b| a.1.total_cmp(&b.1));
    order(&mut pts);
    let mut history = vec![pts[0].1];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iterations {
        if pts[n].1 - pts[0].1 < config.tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let centroid: Vec<f64> = (0..n).map(|j| pts[..n].iter().map(|p| p.0[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> {
            mirror(
                centroid
                    .iter()
                    .zip(&pts[n].0)
                    .map(|(c, w)| c + t * (c - w))
                    .collect(),
            )
        };
        let xr = along(REFLECTION);
        let fr = eval(&mut f, &xr)?;
        if fr < pts[0].1 {
            let xe = along(REFLECTION * EXPANSION);
            let fe = eval(&mut f, &xe)?;
            pts[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < pts[n - 1].1 {
            pts[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < pts[n].1 {
                let xc = along(REFLECTION * CONTRACTION);
                let fc = eval(&mut f, &xc)?;
                (xc, fc)
            } else {
                let xc = along(-CONTRACTION);
                let fc = eval(&mut f, &xc)?;
                (xc, fc)
            };
            if fc < fr.min(pts[n].1) {
                pts[n] = (xc, fc);
            } else {
                let best = pts[0].0.clone();
                for p in pts.iter_mut().skip(1) {
                    let v = mirror(best.iter().zip(&p.0).map(|(b, x)| b + SHRINK * (x - b)).collect());
                    let fv = eval(&mut f, &v)?;
                    *p = (v, fv);
                }
            }
        }
        order(&mut pts);
        history.push(pts[0].1);
    }
    let (x, fx) = pts.swap_remove(0);
    Ok(NelderMeadResult {
        x,
        f: fx,
        history,
        iterations,
        converged,
    })
}
