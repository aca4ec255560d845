//! The fast SDD manifold-learning map
//!
//! ```text
//! A(sigma) = L^+(sigma) S Gamma
//! Z(sigma) = A(sigma) / Tr(Gamma^T S A(sigma))
//! ```
//!
//! together with its analytic first derivative in `sigma`, a central
//! difference second derivative, and the `sigma -> infinity` asymptote.

use nalgebra::DMatrix;

use crate::dataset::OrderedDataset;
use crate::error::{Error, Result};
use crate::linalg::{
    apply_s, build_laplacian, laplacian_derivative, pinv_derivative_apply, pseudoinverse,
    sample_gamma, solve_laplacian_cg, squared_distances, AnchorMatrix, SquaredDistanceMatrix,
    DEFAULT_EIGENVALUE_FLOOR,
};

/// Relative threshold on the normalizing trace.
const DENOMINATOR_TOL: f64 = 1e-12;

/// XORed into the seed when the normalizing trace vanishes and `Gamma` has to
/// be redrawn.
pub const RESAMPLE_SEED_MASK: u64 = 0x9E37_79B9_7F4A_7C15;

/// Relative step of the central difference used for the second derivative.
pub const SECOND_DERIVATIVE_STEP: f64 = 1e-4;

/// How `L^+ S Gamma` is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Solver {
    /// Dense symmetric eigendecomposition. The reference path.
    Eigen,
    /// Conjugate gradients on `L y = (S Gamma)_col` with mean-free iterates.
    ConjugateGradient { rel_tol: f64, max_iter: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbedConfig {
    pub eigenvalue_floor: f64,
    pub solver: Solver,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self {
            eigenvalue_floor: DEFAULT_EIGENVALUE_FLOOR,
            solver: Solver::Eigen,
        }
    }
}

/// `Z(X, sigma)` plus its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub z: DMatrix<f64>,
    pub sigma: f64,
    /// Seed of the anchor matrix actually used.
    pub seed: u64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingDerivative {
    pub dz: DMatrix<f64>,
    pub d2z: DMatrix<f64>,
    pub sigma: f64,
}

/// Everything evaluated at one `sigma` that the derivative needs again.
pub(crate) struct MapState {
    pub laplacian: DMatrix<f64>,
    /// Only present on the eigendecomposition path.
    pub pinv: Option<DMatrix<f64>>,
    pub s_gamma: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub trace: f64,
}

impl MapState {
    pub fn evaluate(
        dist: &SquaredDistanceMatrix,
        gamma: &DMatrix<f64>,
        sigma: f64,
        cfg: &EmbedConfig,
    ) -> Result<Self> {
        if gamma.nrows() != dist.n() {
            return Err(Error::InvalidArgument(format!(
                "anchor matrix has {} rows, data has {}",
                gamma.nrows(),
                dist.n()
            )));
        }
        let l = build_laplacian(dist, sigma)?;
        let s_gamma = apply_s(gamma);
        let (a, pinv) = match cfg.solver {
            Solver::Eigen => {
                let p = pseudoinverse(&l, cfg.eigenvalue_floor)?.pinv;
                (&p * &s_gamma, Some(p))
            }
            Solver::ConjugateGradient { rel_tol, max_iter } => {
                (solve_laplacian_cg(&l, &s_gamma, rel_tol, max_iter)?, None)
            }
        };
        // Tr(Gamma^T S A) = <S Gamma, A> since S is symmetric
        let gsa = s_gamma.transpose() * &a;
        let trace = gsa.trace();
        if !(trace.abs() >= DENOMINATOR_TOL * gsa.norm()) || trace == 0.0 {
            return Err(Error::DegenerateDenominator { sigma });
        }
        Ok(Self {
            laplacian: l.matrix().clone(),
            pinv,
            s_gamma,
            a,
            trace,
        })
    }

    pub fn z(&self) -> DMatrix<f64> {
        &self.a / self.trace
    }

    /// `dA/dsigma = (dL^+/dsigma) S Gamma`.
    fn a_derivative(
        &self,
        dist: &SquaredDistanceMatrix,
        sigma: f64,
        cfg: &EmbedConfig,
    ) -> Result<DMatrix<f64>> {
        let dl = laplacian_derivative(dist, sigma)?;
        match (&self.pinv, cfg.solver) {
            (Some(p), _) => Ok(pinv_derivative_apply(&self.laplacian, p, &dl, &self.s_gamma)),
            (None, Solver::ConjugateGradient { rel_tol, max_iter }) => {
                // For a connected Laplacian and a mean-free panel the two
                // projector terms vanish, leaving -L^+ dL A.
                let l = crate::linalg::KernelLaplacian::from_matrix(self.laplacian.clone(), sigma);
                let rhs = &dl * &self.a;
                Ok(-solve_laplacian_cg(&l, &rhs, rel_tol, max_iter)?)
            }
            (None, Solver::Eigen) => unreachable!("eigen path always stores L^+"),
        }
    }

    /// Quotient rule over `N = T dA - A dT`, `D = T^2`.
    pub fn z_derivative(
        &self,
        dist: &SquaredDistanceMatrix,
        sigma: f64,
        cfg: &EmbedConfig,
    ) -> Result<DMatrix<f64>> {
        let da = self.a_derivative(dist, sigma, cfg)?;
        let dtrace = (self.s_gamma.transpose() * &da).trace();
        Ok((&da * self.trace - &self.a * dtrace) / (self.trace * self.trace))
    }
}

/// `Z(X, sigma)` with the default configuration.
pub fn embed(data: &OrderedDataset, gamma: &AnchorMatrix, sigma: f64) -> Result<Embedding> {
    embed_with(&squared_distances(data), gamma, sigma, &EmbedConfig::default())
}

/// `Z(X, sigma)` from precomputed distances. If the normalizing trace
/// vanishes, `Gamma` is redrawn once from `seed ^ RESAMPLE_SEED_MASK`; a
/// second failure yields an embedding flagged degenerate.
pub fn embed_with(
    dist: &SquaredDistanceMatrix,
    gamma: &AnchorMatrix,
    sigma: f64,
    cfg: &EmbedConfig,
) -> Result<Embedding> {
    match MapState::evaluate(dist, gamma.gamma(), sigma, cfg) {
        Ok(state) => Ok(Embedding {
            z: state.z(),
            sigma,
            seed: gamma.seed(),
            degenerate: false,
        }),
        Err(Error::DegenerateDenominator { .. }) => {
            let seed = gamma.seed() ^ RESAMPLE_SEED_MASK;
            let redrawn = sample_gamma(gamma.n(), seed)?;
            match MapState::evaluate(dist, redrawn.gamma(), sigma, cfg) {
                Ok(state) => Ok(Embedding {
                    z: state.z(),
                    sigma,
                    seed,
                    degenerate: false,
                }),
                Err(Error::DegenerateDenominator { .. }) => Ok(Embedding {
                    z: DMatrix::zeros(gamma.n(), 2),
                    sigma,
                    seed,
                    degenerate: true,
                }),
                Err(e) => Err(e),
            }
        }
        Err(e) => Err(e),
    }
}

pub fn embedding_derivative(
    data: &OrderedDataset,
    gamma: &AnchorMatrix,
    sigma: f64,
) -> Result<EmbeddingDerivative> {
    embedding_derivative_with(&squared_distances(data), gamma, sigma, &EmbedConfig::default())
}

/// Analytic `dZ/dsigma`; `d2Z/dsigma2` by central differences of the analytic
/// first derivative with step `sigma * SECOND_DERIVATIVE_STEP`.
pub fn embedding_derivative_with(
    dist: &SquaredDistanceMatrix,
    gamma: &AnchorMatrix,
    sigma: f64,
    cfg: &EmbedConfig,
) -> Result<EmbeddingDerivative> {
    let dz_at = |s: f64| MapState::evaluate(dist, gamma.gamma(), s, cfg)?.z_derivative(dist, s, cfg);
    let dz = dz_at(sigma)?;
    let h = sigma * SECOND_DERIVATIVE_STEP;
    let d2z = (dz_at(sigma + h)? - dz_at(sigma - h)?) / (2.0 * h);
    Ok(EmbeddingDerivative { dz, d2z, sigma })
}

/// `(S/n) Gamma / Tr(Gamma^T S Gamma)`, the finite-`n` limit of `Z` as
/// `sigma -> infinity`.
pub fn asymptotic_embedding(gamma: &AnchorMatrix) -> DMatrix<f64> {
    let g = gamma.gamma();
    let sg = apply_s(g);
    let trace = (g.transpose() * &sg).trace();
    sg / (g.nrows() as f64 * trace)
}
