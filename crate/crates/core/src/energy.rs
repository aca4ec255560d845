//! Polygon energies of an embedding and their bandwidth profiles.
//!
//! The energy is the cyclic sum of squared side lengths of the polygon
//! `Z_1 -> Z_2 -> ... -> Z_n -> Z_1`. Its derivatives are taken through the
//! cyclic difference operator `C` (the Laplacian of the `n`-cycle), so that
//! `E = Tr(Z^T C Z)`, `dE = 2 Tr(Z^T C dZ)` and
//! `d2E = 2 Tr(dZ^T C dZ + Z^T C d2Z)`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::dataset::OrderedDataset;
use crate::embedding::{
    embedding_derivative_with, EmbedConfig, Embedding, MapState,
};
use crate::error::{Error, Result};
use crate::linalg::{apply_s, squared_distances, AnchorMatrix, SquaredDistanceMatrix};

/// Edge norm used by the perimeter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PerimeterNorm {
    /// Unsquared Euclidean edge lengths, the true perimeter.
    #[default]
    Euclidean,
    /// Coordinate-wise 1-norm of each edge vector.
    Manhattan,
}

/// Cyclic sum of squared side lengths.
pub fn cyclic_energy(z: &DMatrix<f64>) -> f64 {
    cyclic_edges(z).map(|(dx, dy)| dx * dx + dy * dy).sum()
}

pub fn cyclic_perimeter(z: &DMatrix<f64>, norm: PerimeterNorm) -> f64 {
    match norm {
        PerimeterNorm::Euclidean => cyclic_edges(z).map(|(dx, dy)| dx.hypot(dy)).sum(),
        PerimeterNorm::Manhattan => cyclic_edges(z).map(|(dx, dy)| dx.abs() + dy.abs()).sum(),
    }
}

fn cyclic_edges(z: &DMatrix<f64>) -> impl Iterator<Item = (f64, f64)> + '_ {
    let n = z.nrows();
    (0..n).map(move |i| {
        let j = (i + 1) % n;
        (z[(j, 0)] - z[(i, 0)], z[(j, 1)] - z[(i, 1)])
    })
}

/// `sum_i <Z_{i+1} - Z_i, W_{i+1} - W_i>` over the closed cycle, i.e.
/// `Tr(Z^T C W)`.
fn cyclic_inner(z: &DMatrix<f64>, w: &DMatrix<f64>) -> f64 {
    let n = z.nrows();
    (0..n)
        .map(|i| {
            let j = (i + 1) % n;
            (0..z.ncols())
                .map(|c| (z[(j, c)] - z[(i, c)]) * (w[(j, c)] - w[(i, c)]))
                .sum::<f64>()
        })
        .sum()
}

/// `Tr(Z^T S Z)` with the centering matrix, `n` times the total squared
/// deviation from the centroid. Reported as a diagnostic only; it is not the
/// cyclic energy.
pub fn trace_energy(z: &DMatrix<f64>) -> f64 {
    (z.transpose() * apply_s(z)).trace()
}

pub fn energy(z: &Embedding) -> Result<f64> {
    if z.degenerate {
        return Err(Error::DegenerateInput);
    }
    Ok(cyclic_energy(&z.z))
}

pub fn perimeter(z: &Embedding) -> Result<f64> {
    perimeter_with(z, PerimeterNorm::default())
}

pub fn perimeter_with(z: &Embedding, norm: PerimeterNorm) -> Result<f64> {
    if z.degenerate {
        return Err(Error::DegenerateInput);
    }
    Ok(cyclic_perimeter(&z.z, norm))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyDerivative {
    /// `dE/dsigma` of the cyclic energy.
    pub first: f64,
    /// `d2E/dsigma2` of the cyclic energy.
    pub second: f64,
    /// `2 Tr(S Z dZ^T)`, the derivative of the centering-trace form. Diagnostic.
    pub trace_form_first: f64,
}

pub fn energy_derivative(
    data: &OrderedDataset,
    gamma: &AnchorMatrix,
    sigma: f64,
) -> Result<EnergyDerivative> {
    energy_derivative_with(&squared_distances(data), gamma, sigma, &EmbedConfig::default())
}

pub fn energy_derivative_with(
    dist: &SquaredDistanceMatrix,
    gamma: &AnchorMatrix,
    sigma: f64,
    cfg: &EmbedConfig,
) -> Result<EnergyDerivative> {
    let z = MapState::evaluate(dist, gamma.gamma(), sigma, cfg)?.z();
    let d = embedding_derivative_with(dist, gamma, sigma, cfg)?;
    Ok(EnergyDerivative {
        first: 2.0 * cyclic_inner(&z, &d.dz),
        second: 2.0 * (cyclic_energy(&d.dz) + cyclic_inner(&z, &d.d2z)),
        trace_form_first: 2.0 * (apply_s(&z).transpose() * &d.dz).trace(),
    })
}

/// One objective evaluation: the energy and its slope `dE/dsigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub energy: f64,
    pub slope: f64,
}

/// `sigma -> (E, dE/dsigma)` for a fixed dataset and anchor matrix, with the
/// distances computed once.
#[derive(Debug, Clone)]
pub struct BandwidthObjective {
    dist: SquaredDistanceMatrix,
    gamma: AnchorMatrix,
    cfg: EmbedConfig,
    coincident: bool,
}

impl BandwidthObjective {
    pub fn new(data: &OrderedDataset, gamma: &AnchorMatrix) -> Result<Self> {
        Self::with_config(squared_distances(data), gamma.clone(), EmbedConfig::default())
    }

    pub fn with_config(
        dist: SquaredDistanceMatrix,
        gamma: AnchorMatrix,
        cfg: EmbedConfig,
    ) -> Result<Self> {
        if gamma.n() != dist.n() {
            return Err(Error::InvalidArgument(format!(
                "anchor matrix has {} rows, data has {}",
                gamma.n(),
                dist.n()
            )));
        }
        let coincident = dist.values().amax() == 0.0;
        Ok(Self {
            dist,
            gamma,
            cfg,
            coincident,
        })
    }

    pub fn distances(&self) -> &SquaredDistanceMatrix {
        &self.dist
    }

    pub fn gamma(&self) -> &AnchorMatrix {
        &self.gamma
    }

    pub fn config(&self) -> &EmbedConfig {
        &self.cfg
    }

    fn state(&self, sigma: f64) -> Result<MapState> {
        // With every point coincident the kernel is the same at every sigma
        // and carries no geometry, so no bandwidth is usable.
        if self.coincident {
            return Err(Error::DegenerateKernel { sigma });
        }
        MapState::evaluate(&self.dist, self.gamma.gamma(), sigma, &self.cfg)
    }

    /// Embedding at `sigma` without redrawing `Gamma`.
    pub fn embedding(&self, sigma: f64) -> Result<Embedding> {
        Ok(Embedding {
            z: self.state(sigma)?.z(),
            sigma,
            seed: self.gamma.seed(),
            degenerate: false,
        })
    }

    pub fn energy(&self, sigma: f64) -> Result<f64> {
        Ok(cyclic_energy(&self.state(sigma)?.z()))
    }

    pub fn evaluate(&self, sigma: f64) -> Result<Evaluation> {
        let state = self.state(sigma)?;
        let z = state.z();
        let dz = state.z_derivative(&self.dist, sigma, &self.cfg)?;
        Ok(Evaluation {
            energy: cyclic_energy(&z),
            slope: 2.0 * cyclic_inner(&z, &dz),
        })
    }

    /// Energy and perimeter, or `None` when the bandwidth is degenerate.
    pub fn sample(&self, sigma: f64) -> Result<EnergySample> {
        match self.state(sigma) {
            Ok(state) => {
                let z = state.z();
                Ok(EnergySample {
                    sigma,
                    energy: Some(cyclic_energy(&z)),
                    perimeter: Some(cyclic_perimeter(&z, PerimeterNorm::default())),
                    degenerate: false,
                })
            }
            Err(e) if is_degenerate(&e) => Ok(EnergySample {
                sigma,
                energy: None,
                perimeter: None,
                degenerate: true,
            }),
            Err(e) => Err(e),
        }
    }
}

/// Errors that mark a bandwidth as unusable rather than abort a sweep.
pub fn is_degenerate(e: &Error) -> bool {
    matches!(
        e,
        Error::DegenerateKernel { .. }
            | Error::RankCollapse { .. }
            | Error::DegenerateDenominator { .. }
            | Error::SolverDiverged { .. }
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergySample {
    pub sigma: f64,
    pub energy: Option<f64>,
    pub perimeter: Option<f64>,
    pub degenerate: bool,
}

/// Endpoints and size of a log-spaced grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn new(min: f64, max: f64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::EmptyGrid);
        }
        if !(min > 0.0 && max.is_finite() && (max > min || (count == 1 && max == min))) {
            return Err(Error::InvalidArgument(format!(
                "grid bounds must satisfy 0 < min < max, got [{min}, {max}]"
            )));
        }
        Ok(Self { min, max, count })
    }

    pub fn points(&self) -> Vec<f64> {
        log_grid(self.min, self.max, self.count)
    }

    /// Step between neighbouring points in `ln sigma`.
    pub fn log_step(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.max / self.min).ln() / (self.count - 1) as f64
        }
    }
}

impl std::fmt::Display for GridSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "log[{:e}..{:e}]x{}", self.min, self.max, self.count)
    }
}

/// `count` points evenly spaced in `ln sigma`, endpoints included exactly.
pub fn log_grid(min: f64, max: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![min],
        _ => {
            let (a, b) = (min.ln(), max.ln());
            let step = (b - a) / (count - 1) as f64;
            (0..count)
                .map(|i| match i {
                    0 => min,
                    i if i == count - 1 => max,
                    i => (a + step * i as f64).exp(),
                })
                .collect()
        }
    }
}

/// Default search interval `[1e-4, 1e4] x` median squared distance, with the
/// lower end pulled down to `median nearest-neighbour squared distance / 30`
/// when that is smaller, so the small-bandwidth plateau (where only
/// neighbouring points interact) is inside the interval.
pub fn default_sigma_bounds(dist: &SquaredDistanceMatrix) -> (f64, f64) {
    let median = dist.median_off_diagonal();
    let nn = dist.median_nearest_neighbor();
    let mut lo = 1e-4 * median;
    if nn > 0.0 {
        lo = lo.min(nn / 30.0);
    }
    let hi = 1e4 * median;
    if lo > 0.0 && hi > lo {
        (lo, hi)
    } else {
        // coincident data: any interval, every sample is degenerate anyway
        (1e-4, 1e4)
    }
}

pub const DEFAULT_GRID_SIZE: usize = 200;

pub fn default_grid(dist: &SquaredDistanceMatrix) -> GridSpec {
    let (lo, hi) = default_sigma_bounds(dist);
    GridSpec {
        min: lo,
        max: hi,
        count: DEFAULT_GRID_SIZE,
    }
}

/// Sampled `(sigma, E, P)` curve.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyProfile {
    pub samples: Vec<EnergySample>,
    pub seed: u64,
    pub grid_spec: GridSpec,
}

impl EnergyProfile {
    pub fn usable(&self) -> impl Iterator<Item = &EnergySample> {
        self.samples.iter().filter(|s| !s.degenerate)
    }
}

pub fn energy_profile(
    data: &OrderedDataset,
    gamma: &AnchorMatrix,
    grid: &[f64],
) -> Result<EnergyProfile> {
    let objective = BandwidthObjective::new(data, gamma)?;
    profile_with(&objective, grid)
}

/// Evaluates every grid point independently (in parallel) and assembles the
/// samples in grid order. Degenerate bandwidths are recorded, not dropped.
pub fn profile_with(objective: &BandwidthObjective, grid: &[f64]) -> Result<EnergyProfile> {
    let (&first, &last) = match (grid.first(), grid.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::EmptyGrid),
    };
    if first <= 0.0 || !last.is_finite() || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "grid must be positive, finite and strictly increasing".into(),
        ));
    }
    let samples = grid
        .par_iter()
        .map(|&s| objective.sample(s))
        .collect::<Result<Vec<_>>>()?;
    Ok(EnergyProfile {
        samples,
        seed: objective.gamma().seed(),
        grid_spec: GridSpec {
            min: first,
            max: last,
            count: grid.len(),
        },
    })
}
