//! Exact analysis of the finite Markov chain induced by a policy:
//! stationary law, spectral gaps and the 1/4 total-variation mixing time.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::mdp::PROB_TOL;

/// Mixing-time search stops here and reports an error.
pub const MIXING_CAP: usize = 100_000;

/// Total-variation threshold in the mixing-time definition.
pub const MIXING_TV: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct ChainAnalysis {
    pub kernel: Matrix,
    pub stationary: Vector,
    /// `1 - |ρ₂|`, with `ρ₂` the second-largest eigenvalue modulus.
    pub spectral_gap: f64,
    /// Largest `λ` with `var_μ(Pf) ≤ (1-λ)² var_μ(f)` for every `f`.
    ///
    /// Equals `spectral_gap` for reversible chains and is smaller otherwise.
    pub variance_gap: f64,
    pub mixing_time: usize,
}

pub fn check_stochastic(kernel: &Matrix) -> Result<()> {
    if kernel.nrows() != kernel.ncols() {
        return Err(Error::DimensionMismatch { what: "kernel", expected: kernel.nrows(), found: kernel.ncols() });
    }
    for (i, row) in kernel.row_iter().enumerate() {
        let mut sum = 0.0;
        for &p in row.iter() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidProbability { what: "kernel", row: i, value: p });
            }
            sum += p;
        }
        if (sum - 1.0).abs() > PROB_TOL * kernel.ncols() as f64 {
            return Err(Error::NotStochastic { what: "kernel", row: i, sum });
        }
    }
    Ok(())
}

/// Unique stationary law, from `[Pᵀ - I; 1ᵀ] μ = [0; 1]`.
///
/// Fails when the chain has more than one closed class.
pub fn stationary_distribution(kernel: &Matrix) -> Result<Vector> {
    check_stochastic(kernel)?;
    let n = kernel.nrows();
    let mut system = Matrix::zeros(n + 1, n);
    system.view_mut((0, 0), (n, n)).copy_from(&(kernel.transpose() - Matrix::identity(n, n)));
    system.row_mut(n).fill(1.0);
    if linalg::rank(&system, 1e-10) < n {
        return Err(Error::NotErgodic(format!("{n}-state kernel has several closed classes")));
    }
    let mut rhs = Vector::zeros(n + 1);
    rhs[n] = 1.0;
    let mut mu = linalg::least_squares(&system, &rhs, 1e-13);
    for v in mu.iter_mut() {
        if *v < 0.0 {
            if *v < -1e-10 {
                return Err(Error::NotErgodic(format!("negative stationary mass {v:e}")));
            }
            *v = 0.0;
        }
    }
    let total = mu.sum();
    mu /= total;
    Ok(mu)
}

/// Cesàro limit of the law started from the uniform distribution.
///
/// Agrees with [`stationary_distribution`] on unichains and stays defined for
/// reducible or periodic kernels (computed as an Abel mean with `1 - α = 1e-9`).
pub fn limiting_distribution(kernel: &Matrix) -> Vector {
    if let Ok(mu) = stationary_distribution(kernel) {
        return mu;
    }
    let n = kernel.nrows();
    let alpha = 1.0 - 1e-9;
    let a = (Matrix::identity(n, n) - kernel * alpha).transpose();
    let start = Vector::from_element(n, 1.0 / n as f64);
    let mut mu = linalg::solve(&a, &start, "Abel mean").unwrap_or(start) * (1.0 - alpha);
    mu.iter_mut().for_each(|v| *v = v.max(0.0));
    let total = mu.sum();
    mu / total
}

/// `1 - |ρ₂|` from the eigenvalue moduli of the kernel.
pub fn spectral_gap(kernel: &Matrix) -> f64 {
    if kernel.nrows() < 2 {
        return 1.0;
    }
    let mut moduli: Vec<f64> = kernel.clone().complex_eigenvalues().iter().map(|z| libm::hypot(z.re, z.im)).collect();
    moduli.sort_by(|a, b| b.total_cmp(a));
    (1.0_f64 - moduli[1]).clamp(0.0, 1.0)
}

/// `1 - ‖P‖` on mean-zero functions of `L²(μ)`.
pub fn variance_gap(kernel: &Matrix, stationary: &Vector) -> f64 {
    let n = kernel.nrows();
    if n < 2 {
        return 1.0;
    }
    let root: Vector = stationary.map(libm::sqrt);
    if root.iter().any(|&r| r <= 0.0) {
        return 0.0;
    }
    let similar = Matrix::from_fn(n, n, |i, j| root[i] * kernel[(i, j)] / root[j]);
    let projector = Matrix::identity(n, n) - &root * root.transpose();
    (1.0 - linalg::operator_norm(&(similar * projector))).clamp(0.0, 1.0)
}

/// `(var_μ(Pf), var_μ(f))`.
pub fn variance_pair(kernel: &Matrix, stationary: &Vector, f: &Vector) -> (f64, f64) {
    let var = |g: &Vector| {
        let mean = stationary.dot(g);
        stationary.iter().zip(g.iter()).map(|(m, x)| m * (x - mean) * (x - mean)).sum::<f64>()
    };
    (var(&(kernel * f)), var(f))
}

pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// `max_s ‖P^t(s,·) - μ‖_TV` for `t = 1, 2, …` as a lazy sequence.
pub fn worst_tv_trace<'a>(kernel: &'a Matrix, stationary: &'a Vector) -> impl Iterator<Item = f64> + 'a {
    let mu: Vec<f64> = stationary.iter().copied().collect();
    let mut power = kernel.clone();
    let mut first = true;
    core::iter::from_fn(move || {
        if !first {
            power = &power * kernel;
        }
        first = false;
        let worst = power
            .row_iter()
            .map(|row| {
                let r: Vec<f64> = row.iter().copied().collect();
                tv_distance(&r, &mu)
            })
            .fold(0.0, f64::max);
        Some(worst)
    })
}

/// Smallest `τ ≥ 1` with `max_s TV(P^τ(s,·), μ) ≤ 1/4`.
pub fn mixing_time(kernel: &Matrix, stationary: &Vector, cap: usize) -> Result<usize> {
    worst_tv_trace(kernel, stationary)
        .take(cap)
        .position(|tv| tv <= MIXING_TV + 1e-14)
        .map(|i| i + 1)
        .ok_or(Error::MixingCapExceeded { cap })
}

pub fn analyze_chain(kernel: &Matrix) -> Result<ChainAnalysis> {
    let stationary = stationary_distribution(kernel)?;
    let mixing_time = mixing_time(kernel, &stationary, MIXING_CAP)?;
    let spectral_gap = spectral_gap(kernel);
    let variance_gap = variance_gap(kernel, &stationary);
    Ok(ChainAnalysis { kernel: kernel.clone(), stationary, spectral_gap, variance_gap, mixing_time })
}
