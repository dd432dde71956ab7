use serde::{Deserialize, Serialize};

use super::fbm_covariance;
use crate::error::{Error, Result};
use crate::fraccalc::GridPath;

/// Share of lattice entries that must fall within three standard errors.
pub const COVARIANCE_PASS_SHARE: f64 = 60.0 / 64.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEntry {
    pub i: usize,
    pub j: usize,
    pub empirical: f64,
    pub exact: f64,
    /// Standard error of the empirical mean of `X_{t_i} X_{t_j}`.
    pub stderr: f64,
    pub within_3_stderr: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceDiagnostic {
    pub hurst: f64,
    pub n_paths: usize,
    pub lattice: Vec<usize>,
    pub entries: Vec<CovarianceEntry>,
    pub n_within: usize,
    pub required: usize,
    pub passed: bool,
}

/// Lattice of `size` interior-to-terminal nodes, evenly spread over `1..=n_steps`.
pub fn covariance_lattice(n_steps: usize, size: usize) -> Vec<usize> {
    (1..=size).map(|k| ((k * n_steps) as f64 / size as f64).round().max(1.0) as usize).collect()
}

/// Compares the empirical covariance of the first coordinate of `paths`
/// with the fBm covariance on a `size × size` node lattice.
pub fn covariance_diagnostic(paths: &[GridPath], hurst: f64, size: usize) -> Result<CovarianceDiagnostic> {
    let Some(first) = paths.first() else {
        return Ok(CovarianceDiagnostic {
            hurst,
            n_paths: 0,
            lattice: Vec::new(),
            entries: Vec::new(),
            n_within: 0,
            required: 0,
            passed: false,
        });
    };
    let grid = *first.grid();
    if paths.iter().any(|p| *p.grid() != grid) {
        return Err(Error::usage("covariance diagnostic needs paths on one grid"));
    }
    let lattice = covariance_lattice(grid.n_steps(), size.min(grid.n_steps()));
    let n = paths.len() as f64;
    let mut entries = Vec::with_capacity(lattice.len() * lattice.len());
    for &i in &lattice {
        for &j in &lattice {
            let prods: Vec<f64> = paths.iter().map(|p| p.at(i)[0] * p.at(j)[0]).collect();
            let empirical = prods.iter().sum::<f64>() / n;
            let var = if paths.len() > 1 {
                prods.iter().map(|x| (x - empirical).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            let stderr = (var / n).sqrt();
            let exact = fbm_covariance(grid.node(i), grid.node(j), hurst);
            entries.push(CovarianceEntry {
                i,
                j,
                empirical,
                exact,
                stderr,
                within_3_stderr: (empirical - exact).abs() <= 3.0 * stderr,
            });
        }
    }
    let n_within = entries.iter().filter(|e| e.within_3_stderr).count();
    let required = (COVARIANCE_PASS_SHARE * entries.len() as f64).ceil() as usize;
    Ok(CovarianceDiagnostic {
        hurst,
        n_paths: paths.len(),
        lattice,
        entries,
        n_within,
        required,
        passed: n_within >= required,
    })
}
