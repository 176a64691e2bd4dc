//! Linear parameterizations of the unified value function and the
//! quadratic loss they induce.

use alloc::vec::Vec;

use crate::chain;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::mdp::{expected_rewards, transition_kernel, Mdp, Policy};

/// Tolerance for `ζ ⊥ φ(s)`.
pub const ORTHO_TOL: f64 = 1e-12;

/// `V_θ(s) = φ(s)ᵀθ`, `r̄_θ = ζᵀθ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    phi: Vec<Vector>,
    zeta: Vector,
}

impl FeatureMap {
    pub fn new(phi: Vec<Vector>, zeta: Vector) -> Result<Self> {
        let dim = zeta.len();
        if phi.is_empty() {
            return Err(Error::InvalidConfig("feature map needs at least one state".into()));
        }
        for (s, row) in phi.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { what: "feature vector", expected: dim, found: row.len() });
            }
            let dot = row.dot(&zeta);
            if dot.abs() > ORTHO_TOL {
                return Err(Error::ZetaNotOrthogonal { state: s, dot });
            }
        }
        Ok(Self { phi, zeta })
    }

    /// One-hot features, with an extra coordinate for `r̄` when `γ = 1`.
    pub fn tabular(n_states: usize, gamma: f64) -> Self {
        let dim = if gamma < 1.0 { n_states } else { n_states + 1 };
        let phi = (0..n_states).map(|i| unit(dim, i)).collect();
        let zeta = if gamma < 1.0 { Vector::zeros(dim) } else { unit(dim, n_states) };
        Self { phi, zeta }
    }

    /// One-hot features with the last state pinned to zero value; `ζ = e_n`.
    pub fn anchored(n_states: usize) -> Self {
        let phi = (0..n_states)
            .map(|i| if i + 1 < n_states { unit(n_states, i) } else { Vector::zeros(n_states) })
            .collect();
        Self { phi, zeta: unit(n_states, n_states - 1) }
    }

    /// Rows `[u_i, 0]` where the columns of `U` are an orthonormal basis of
    /// `1^⊥`; `ζ = e_n`.
    pub fn orthonormal(n_states: usize) -> Self {
        let u = complement_basis(n_states);
        let phi = (0..n_states)
            .map(|i| {
                let mut row = Vector::zeros(n_states);
                for j in 0..n_states - 1 {
                    row[j] = u[(i, j)];
                }
                row
            })
            .collect();
        Self { phi, zeta: unit(n_states, n_states - 1) }
    }

    pub fn n_states(&self) -> usize {
        self.phi.len()
    }

    pub fn dim(&self) -> usize {
        self.zeta.len()
    }

    pub fn phi(&self, s: usize) -> &Vector {
        &self.phi[s]
    }

    pub fn zeta(&self) -> &Vector {
        &self.zeta
    }

    pub fn has_zeta(&self) -> bool {
        self.zeta.iter().any(|&z| z != 0.0)
    }

    pub fn value(&self, theta: &Vector, s: usize) -> f64 {
        self.phi[s].dot(theta)
    }

    pub fn values(&self, theta: &Vector) -> Vector {
        Vector::from_iterator(self.n_states(), self.phi.iter().map(|p| p.dot(theta)))
    }

    pub fn average_reward(&self, theta: &Vector) -> f64 {
        self.zeta.dot(theta)
    }

    /// Largest Euclidean norm among `φ(s)` and `ζ`.
    pub fn norm_bound(&self) -> f64 {
        self.phi.iter().map(|p| p.norm()).fold(self.zeta.norm(), f64::max)
    }

    /// Checks dimensions against the MDP and that `ζ = 0` when `γ < 1`.
    pub fn check(&self, mdp: &Mdp) -> Result<()> {
        if self.n_states() != mdp.n_states() {
            return Err(Error::DimensionMismatch { what: "feature rows", expected: mdp.n_states(), found: self.n_states() });
        }
        if mdp.gamma() < 1.0 && self.has_zeta() {
            return Err(Error::ZetaMustVanish);
        }
        Ok(())
    }

    /// Matrix with rows `φ(s)ᵀ`.
    pub fn phi_matrix(&self) -> Matrix {
        Matrix::from_fn(self.n_states(), self.dim(), |s, j| self.phi[s][j])
    }
}

fn unit(dim: usize, i: usize) -> Vector {
    let mut v = Vector::zeros(dim);
    v[i] = 1.0;
    v
}

/// Gram-Schmidt on `e_j - 1/n`, `j < n-1`, each column's first nonzero
/// entry made positive.
pub fn complement_basis(n: usize) -> Matrix {
    let mut u = Matrix::zeros(n, n.saturating_sub(1));
    let inv_n = 1.0 / n as f64;
    for j in 0..n.saturating_sub(1) {
        let mut v = Vector::from_element(n, -inv_n);
        v[j] += 1.0;
        // two passes keep the basis orthogonal to machine precision
        for _ in 0..2 {
            for k in 0..j {
                let col = u.column(k).clone_owned();
                let proj = col.dot(&v);
                v.axpy(-proj, &col, 1.0);
            }
            let mean = v.sum() * inv_n;
            v.add_scalar_mut(-mean);
        }
        v /= v.norm();
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-14) {
            if *first < 0.0 {
                v.neg_mut();
            }
        }
        u.set_column(j, &v);
    }
    u
}

/// `ξ^π(s)` and `φ^π(s) = Σ_{s'} P^π(s,s') φ(s')`.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleMoments {
    pub xi: Vector,
    pub phi_next: Vec<Vector>,
}

impl OracleMoments {
    pub fn new(mdp: &Mdp, target: &Policy, features: &FeatureMap) -> Result<Self> {
        features.check(mdp)?;
        let kernel = transition_kernel(mdp, target)?;
        let xi = expected_rewards(mdp, target)?;
        let phi_next = (0..mdp.n_states())
            .map(|s| {
                let mut acc = Vector::zeros(features.dim());
                for next in 0..mdp.n_states() {
                    let p = kernel[(s, next)];
                    if p != 0.0 {
                        acc.axpy(p, features.phi(next), 1.0);
                    }
                }
                acc
            })
            .collect();
        Ok(Self { xi, phi_next })
    }
}

/// Which mean field a contraction constant refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContractionKind {
    /// direct-SGD and TD-SGD: `ḡ = ∇l`.
    Sgd,
    /// TD(0).
    Td0,
}

/// The quadratic loss `l(θ) = Σ_s μ^b(s) ½ δ(θ,s)²` with all its exact
/// derivatives.
#[derive(Debug, Clone)]
pub struct LossModel {
    gamma: f64,
    mu_b: Vector,
    moments: OracleMoments,
    w: Vec<Vector>,
    hessian: Matrix,
    d_matrix: Matrix,
    jacobian: Matrix,
    theta_star: Vector,
    l_star: f64,
}

impl LossModel {
    /// Builds the model with `μ^b` the behavior chain's stationary law.
    pub fn build(mdp: &Mdp, target: &Policy, behavior: &Policy, features: &FeatureMap) -> Result<Self> {
        let kb = transition_kernel(mdp, behavior)?;
        let mu_b = chain::stationary_distribution(&kb)?;
        Self::with_weights(mdp, target, features, mu_b)
    }

    /// Builds the model for an explicit state weighting `μ^b`.
    pub fn with_weights(mdp: &Mdp, target: &Policy, features: &FeatureMap, mu_b: Vector) -> Result<Self> {
        if mu_b.len() != mdp.n_states() {
            return Err(Error::DimensionMismatch { what: "state weights", expected: mdp.n_states(), found: mu_b.len() });
        }
        let moments = OracleMoments::new(mdp, target, features)?;
        let gamma = mdp.gamma();
        let d = features.dim();
        let zeta = features.zeta();
        let w: Vec<Vector> = (0..mdp.n_states())
            .map(|s| &moments.phi_next[s] * gamma - features.phi(s) - zeta)
            .collect();

        let mut hessian = Matrix::zeros(d, d);
        let mut rhs = Vector::zeros(d);
        let mut d_matrix = Matrix::zeros(d, d);
        let mut jacobian = Matrix::zeros(d, d);
        let zz = zeta * zeta.transpose();
        for s in 0..mdp.n_states() {
            let phi = features.phi(s);
            hessian.ger(mu_b[s], &w[s], &w[s], 1.0);
            rhs.axpy(-mu_b[s] * moments.xi[s], &w[s], 1.0);
            d_matrix.ger(1.0, phi, phi, 1.0);
            d_matrix.ger(-gamma, phi, &moments.phi_next[s], 1.0);
            d_matrix += &zz;
            jacobian.ger(-1.0, &(phi + zeta), &w[s], 1.0);
        }

        let theta_star = linalg::least_squares(&hessian, &rhs, 1e-12);
        let residual = (&hessian * &theta_star - &rhs).norm();
        if residual > 1e-9 * (1.0 + rhs.norm()) {
            return Err(Error::NotRealizable { residual });
        }
        let mut model = Self { gamma, mu_b, moments, w, hessian, d_matrix, jacobian, theta_star, l_star: 0.0 };
        model.l_star = model.loss(&model.theta_star);
        Ok(model)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn mu_b(&self) -> &Vector {
        &self.mu_b
    }

    pub fn moments(&self) -> &OracleMoments {
        &self.moments
    }

    /// `w(s) = -ζ + γφ^π(s) - φ(s)`.
    pub fn w(&self, s: usize) -> &Vector {
        &self.w[s]
    }

    pub fn hessian(&self) -> &Matrix {
        &self.hessian
    }

    /// `D = Σ_s [φφᵀ - γφφ^πᵀ + ζζᵀ]`.
    pub fn d_matrix(&self) -> &Matrix {
        &self.d_matrix
    }

    /// `J = Σ_s (φ+ζ)(φ+ζ-γφ^π)ᵀ`, the slope of the TD(0) mean field.
    pub fn td0_jacobian(&self) -> &Matrix {
        &self.jacobian
    }

    pub fn theta_star(&self) -> &Vector {
        &self.theta_star
    }

    pub fn l_star(&self) -> f64 {
        self.l_star
    }

    pub fn n_states(&self) -> usize {
        self.w.len()
    }

    /// `δ(θ,s) = ξ^π(s) + w(s)ᵀθ`.
    pub fn delta(&self, theta: &Vector, s: usize) -> f64 {
        self.moments.xi[s] + self.w[s].dot(theta)
    }

    pub fn loss(&self, theta: &Vector) -> f64 {
        (0..self.n_states()).map(|s| 0.5 * self.mu_b[s] * { let d = self.delta(theta, s); d * d }).sum()
    }

    pub fn loss_gap(&self, theta: &Vector) -> f64 {
        self.loss(theta) - self.l_star
    }

    pub fn loss_and_grad(&self, theta: &Vector) -> (f64, Vector) {
        let mut loss = 0.0;
        let mut grad = Vector::zeros(theta.len());
        for s in 0..self.n_states() {
            let delta = self.delta(theta, s);
            loss += 0.5 * self.mu_b[s] * delta * delta;
            grad.axpy(self.mu_b[s] * delta, &self.w[s], 1.0);
        }
        (loss, grad)
    }

    /// `-Σ_s δ(θ,s)(φ(s)+ζ)`.
    pub fn td0_mean_field(&self, features: &FeatureMap, theta: &Vector) -> Vector {
        let mut out = Vector::zeros(theta.len());
        for s in 0..self.n_states() {
            let delta = self.delta(theta, s);
            out.axpy(-delta, features.phi(s), 1.0);
            out.axpy(-delta, features.zeta(), 1.0);
        }
        out
    }

    /// Smallest eigenvalue of `H` for the SGD rules, of `sym(J)` for TD(0).
    /// May be nonpositive.
    pub fn contraction_constant(&self, kind: ContractionKind) -> f64 {
        match kind {
            ContractionKind::Sgd => linalg::min_sym_eigenvalue(&self.hessian),
            ContractionKind::Td0 => linalg::min_sym_eigenvalue(&self.jacobian),
        }
    }

    /// Rebuilds `D` with the sign of its `γφφ^πᵀ` term flipped. Used by the
    /// verification suite to confirm that its checks catch a broken `D`.
    #[doc(hidden)]
    pub fn inject_d_sign_fault(&mut self, features: &FeatureMap) {
        let d = features.dim();
        let mut flipped = Matrix::zeros(d, d);
        let zz = features.zeta() * features.zeta().transpose();
        for s in 0..self.n_states() {
            let phi = features.phi(s);
            flipped.ger(1.0, phi, phi, 1.0);
            flipped.ger(self.gamma, phi, &self.moments.phi_next[s], 1.0);
            flipped += &zz;
        }
        self.d_matrix = flipped;
    }

    /// Smallest eigenvalue of `½(D+Dᵀ)`.
    pub fn d_constant(&self) -> f64 {
        linalg::min_sym_eigenvalue(&self.d_matrix)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::RewardOutcome;
    use alloc::vec;

    fn one_state(gamma: f64) -> Mdp {
        Mdp::new(gamma, vec![vec![vec![1.0]]], vec![vec![vec![RewardOutcome::new(1.0, 1.0)]]]).unwrap()
    }

    pub(crate) fn two_state(gamma: f64) -> Mdp {
        let r = |v: f64| vec![RewardOutcome::new(v, 1.0)];
        Mdp::new(gamma, vec![vec![vec![0.9, 0.1]], vec![vec![0.1, 0.9]]], vec![vec![r(1.0)], vec![r(0.0)]]).unwrap()
    }

    #[test]
    fn constructions() {
        let f = FeatureMap::tabular(2, 0.5);
        assert_eq!(f.phi(0).as_slice(), &[1.0, 0.0]);
        assert_eq!(f.zeta().as_slice(), &[0.0, 0.0]);
        let f = FeatureMap::tabular(2, 1.0);
        assert_eq!(f.dim(), 3);
        assert_eq!(f.zeta().as_slice(), &[0.0, 0.0, 1.0]);
        let f = FeatureMap::anchored(3);
        assert_eq!(f.phi(2).as_slice(), &[0.0, 0.0, 0.0]);
        assert_eq!(f.zeta().as_slice(), &[0.0, 0.0, 1.0]);
        let f = FeatureMap::orthonormal(2);
        let h = 0.5_f64.sqrt();
        assert!((f.phi(0)[0] - h).abs() < 1e-15 && f.phi(0)[1] == 0.0);
        assert!((f.phi(1)[0] + h).abs() < 1e-15);
        assert!(FeatureMap::new(vec![Vector::from_vec(vec![1.0, 1.0])], Vector::from_vec(vec![0.0, 1.0])).is_err());
    }

    #[test]
    fn complement_basis_is_orthonormal() {
        for n in 1..8 {
            let u = complement_basis(n);
            let gram = u.transpose() * &u;
            assert!((gram - Matrix::identity(n - 1, n - 1)).abs().max() < 1e-12);
            let ones = Vector::from_element(n, 1.0);
            assert!((u.transpose() * ones).abs().max() < 1e-12);
        }
    }

    #[test]
    fn one_state_model() {
        let m = one_state(0.5);
        let pi = Policy::uniform(1, 1);
        let f = FeatureMap::tabular(1, 0.5);
        let model = LossModel::build(&m, &pi, &pi, &f).unwrap();
        assert!((model.theta_star()[0] - 2.0).abs() < 1e-12);
        assert!(model.l_star().abs() < 1e-20);
        let (l, g) = model.loss_and_grad(&Vector::zeros(1));
        assert!((l - 0.5).abs() < 1e-15 && (g[0] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn two_state_model() {
        let m = two_state(0.5);
        let pi = Policy::uniform(2, 1);
        let model = LossModel::build(&m, &pi, &pi, &FeatureMap::tabular(2, 0.5)).unwrap();
        let t = model.theta_star();
        assert!((t[0] - 11.0 / 6.0).abs() < 1e-12 && (t[1] - 1.0 / 6.0).abs() < 1e-12);
        assert!(model.contraction_constant(ContractionKind::Sgd) >= 0.125 - 1e-12);
        assert!((model.contraction_constant(ContractionKind::Td0) - 0.5).abs() < 1e-12);
        assert!((model.d_constant() - 0.5).abs() < 1e-12);

        let m1 = two_state(1.0);
        let tab = LossModel::build(&m1, &pi, &pi, &FeatureMap::tabular(2, 1.0)).unwrap();
        assert!(tab.contraction_constant(ContractionKind::Sgd).abs() < 1e-12);
        let ortho = LossModel::build(&m1, &pi, &pi, &FeatureMap::orthonormal(2)).unwrap();
        assert!(ortho.d_constant() >= 0.2 - 1e-12);
        assert!(ortho.contraction_constant(ContractionKind::Td0) >= 0.2 - 1e-12);
        let anchored = LossModel::build(&m1, &pi, &pi, &FeatureMap::anchored(2)).unwrap();
        // tilde P = [[0.9, 0], [0.1, 0]] has norm sqrt(0.82)
        assert!(anchored.d_constant() >= 1.0 - 0.82_f64.sqrt() - 1e-12);
    }

    #[test]
    fn d_equals_jacobian_without_zeta() {
        let m = two_state(0.7);
        let pi = Policy::uniform(2, 1);
        let model = LossModel::build(&m, &pi, &pi, &FeatureMap::tabular(2, 0.7)).unwrap();
        assert!((model.d_matrix() - model.td0_jacobian()).abs().max() < 1e-15);
    }
}
