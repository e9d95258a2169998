//! Gauss–Newton regression of the post-buckling shape
//! `f(y) = c1·sin(k·y) + c2·cos(k·y) + c3`.
//!
//! `y` is the row measured from the central line's top end, and the fitted
//! quantity is the horizontal offset of a point from the central line. The
//! wavenumber is fixed to `k = 2π/L` with `L` the central line length; only
//! the three coefficients are estimated.
//!
//! Each iteration builds the residual vector `D = x − f(y)` and the
//! Jacobian `Z` with rows `[sin(k·y), cos(k·y), 1]`, solves the linear
//! least-squares problem `Z·ΔC ≈ D` and applies `c ← c + ΔC`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::locator::CentralLine;
use crate::tracker::TrackPointSet;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct BeamFit {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// Radians per pixel.
    pub k: f64,
    pub converged: bool,
    pub iterations: usize,
    pub residual_rms: f64,
}

impl BeamFit {
    /// Unfitted model with the given coefficients.
    pub fn with_coefficients(c: [f64; 3], k: f64) -> Self {
        Self {
            c1: c[0],
            c2: c[1],
            c3: c[2],
            k,
            converged: true,
            iterations: 0,
            residual_rms: 0.0,
        }
    }

    pub fn coefficients(&self) -> [f64; 3] {
        [self.c1, self.c2, self.c3]
    }

    /// Horizontal offset from the central line at `y` rows below its top.
    pub fn offset(&self, y: f64) -> f64 {
        let (s, c) = (self.k * y).sin_cos();
        self.c1 * s + self.c2 * c + self.c3
    }

    /// Absolute column of the fitted beam at image row `row`.
    pub fn model_eval(&self, line: &CentralLine, row: f64) -> f64 {
        line.col_at(row) + self.offset(row - line.top.row)
    }
}

/// Wavenumber for one full period over the clamp-to-clamp length.
pub fn wavenumber(line: &CentralLine) -> f64 {
    2.0 * PI / line.length_px
}

/// One observation: `y` rows below the line top, offset `x` from the line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub y: f64,
    pub x: f64,
}

/// Active track points expressed relative to the central line.
pub fn samples_from_points(points: &TrackPointSet, line: &CentralLine) -> Vec<Sample> {
    points
        .active()
        .map(|p| {
            let row = p.row as f64;
            Sample {
                y: row - line.top.row,
                x: p.col as f64 - line.col_at(row),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinearSolver {
    /// Householder QR of `Z`; never forms `ZᵀZ`.
    #[default]
    Householder,
    /// `(ZᵀZ)⁻¹ ZᵀD` via the 3×3 adjugate. Kept to cross-check the QR path.
    ExplicitInverse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussNewtonOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub solver: LinearSolver,
}

impl Default for GaussNewtonOptions {
    fn default() -> Self {
        Self {
            max_iter: 20,
            tol: 1e-8,
            solver: LinearSolver::Householder,
        }
    }
}

impl GaussNewtonOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("gn_max_iter must be >= 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig("gn_tol must be > 0".into()));
        }
        Ok(())
    }
}

/// Linearised system at the current coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussNewtonState {
    /// Residuals `x_i − f(y_i)`.
    pub residuals: Vec<f64>,
    /// Jacobian rows `[sin(k·y_i), cos(k·y_i), 1]`.
    pub jacobian: Vec<[f64; 3]>,
    pub delta: [f64; 3],
}

impl GaussNewtonState {
    pub fn new(samples: &[Sample], fit: &BeamFit) -> Self {
        let jacobian = samples
            .iter()
            .map(|s| {
                let (sin, cos) = (fit.k * s.y).sin_cos();
                [sin, cos, 1.0]
            })
            .collect();
        let residuals = samples.iter().map(|s| s.x - fit.offset(s.y)).collect();
        Self {
            residuals,
            jacobian,
            delta: [0.0; 3],
        }
    }

    pub fn solve(&mut self, solver: LinearSolver) -> Result<[f64; 3]> {
        self.delta = match solver {
            LinearSolver::Householder => solve_householder(&self.jacobian, &self.residuals)?,
            LinearSolver::ExplicitInverse => solve_normal_inverse(&self.jacobian, &self.residuals)?,
        };
        Ok(self.delta)
    }

    /// `Zᵀ·D`, zero at a least-squares stationary point.
    pub fn gradient(&self) -> [f64; 3] {
        let mut g = [0.0; 3];
        for (row, d) in self.jacobian.iter().zip(&self.residuals) {
            for j in 0..3 {
                g[j] += row[j] * d;
            }
        }
        g
    }
}

fn solve_householder(z: &[[f64; 3]], d: &[f64]) -> Result<[f64; 3]> {
    let n = z.len();
    let mut a: Vec<[f64; 3]> = z.to_vec();
    let mut b: Vec<f64> = d.to_vec();
    let scale = (0..3)
        .map(|j| a.iter().map(|r| r[j] * r[j]).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let eps = 1e-10 * scale.max(f64::MIN_POSITIVE);

    for j in 0..3 {
        let norm = a[j..].iter().map(|r| r[j] * r[j]).sum::<f64>().sqrt();
        if norm <= eps {
            return Err(Error::SingularSystem);
        }
        let alpha = if a[j][j] > 0.0 { -norm } else { norm };
        // v = x − alpha·e1, stored in place below the diagonal.
        let mut v: Vec<f64> = a[j..].iter().map(|r| r[j]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for col in j + 1..3 {
                let dot: f64 = v.iter().zip(&a[j..]).map(|(vi, r)| vi * r[col]).sum();
                let f = 2.0 * dot / vnorm2;
                for (vi, r) in v.iter().zip(a[j..].iter_mut()) {
                    r[col] -= f * vi;
                }
            }
            let dot: f64 = v.iter().zip(&b[j..]).map(|(vi, bi)| vi * bi).sum();
            let f = 2.0 * dot / vnorm2;
            for (vi, bi) in v.iter().zip(b[j..].iter_mut()) {
                *bi -= f * vi;
            }
        }
        a[j][j] = alpha;
        for r in a[j + 1..n].iter_mut() {
            r[j] = 0.0;
        }
    }

    let mut x = [0.0; 3];
    for j in (0..3).rev() {
        let tail: f64 = (j + 1..3).map(|c| a[j][c] * x[c]).sum();
        x[j] = (b[j] - tail) / a[j][j];
    }
    Ok(x)
}

fn solve_normal_inverse(z: &[[f64; 3]], d: &[f64]) -> Result<[f64; 3]> {
    let mut m = [[0.0; 3]; 3];
    let mut rhs = [0.0; 3];
    for (row, di) in z.iter().zip(d) {
        for i in 0..3 {
            rhs[i] += row[i] * di;
            for j in 0..3 {
                m[i][j] += row[i] * row[j];
            }
        }
    }
    let cof =
        |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let adj = [
        [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
        [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
        [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
    ];
    let det = m[0][0] * adj[0][0] + m[0][1] * adj[1][0] + m[0][2] * adj[2][0];
    let trace = m[0][0] + m[1][1] + m[2][2];
    if det.abs() <= 1e-12 * trace.powi(3).max(f64::MIN_POSITIVE) {
        return Err(Error::SingularSystem);
    }
    let mut x = [0.0; 3];
    for i in 0..3 {
        x[i] = (0..3).map(|j| adj[i][j] * rhs[j]).sum::<f64>() / det;
    }
    Ok(x)
}

pub fn residual_rms(fit: &BeamFit, samples: &[Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InsufficientData(
            "residual of empty sample set".into(),
        ));
    }
    let sum: f64 = samples
        .iter()
        .map(|s| (s.x - fit.offset(s.y)).powi(2))
        .sum();
    Ok((sum / samples.len() as f64).sqrt())
}

/// Gauss–Newton from `c = (0, 0, 0)` with fixed `k`.
///
/// Each iteration solves for `ΔC`; when `max|ΔC| < tol` the fit is
/// converged and that negligible step is not counted. Otherwise the update
/// is applied and counted. `iterations` is therefore the number of updates
/// applied, which is 1 for any full-rank dataset since the model is linear
/// in the coefficients.
pub fn fit_samples(samples: &[Sample], k: f64, opts: &GaussNewtonOptions) -> Result<BeamFit> {
    opts.validate()?;
    if samples.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 points, got {}",
            samples.len()
        )));
    }
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "wavenumber must be positive, got {k}"
        )));
    }
    let mut fit = BeamFit {
        c1: 0.0,
        c2: 0.0,
        c3: 0.0,
        k,
        converged: false,
        iterations: 0,
        residual_rms: 0.0,
    };
    loop {
        let mut state = GaussNewtonState::new(samples, &fit);
        let delta = state.solve(opts.solver)?;
        if delta.iter().all(|d| d.abs() < opts.tol) {
            fit.converged = true;
            break;
        }
        fit.c1 += delta[0];
        fit.c2 += delta[1];
        fit.c3 += delta[2];
        fit.iterations += 1;
        if fit.iterations >= opts.max_iter {
            break;
        }
    }
    fit.residual_rms = residual_rms(&fit, samples)?;
    Ok(fit)
}

/// Fits the active points of `points` against `line`.
pub fn gauss_newton_fit(
    points: &TrackPointSet,
    line: &CentralLine,
    opts: &GaussNewtonOptions,
) -> Result<BeamFit> {
    fit_samples(&samples_from_points(points, line), wavenumber(line), opts)
}
