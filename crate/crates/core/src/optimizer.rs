//! Bandwidth search: a coarse log-grid scan seeds gradient descent in
//! `t = ln sigma`, and a tunneling pass looks for a point below the local
//! minimum to restart descent from. Rounds repeat until tunneling finds
//! nothing better or `max_rounds` is reached.

use rayon::prelude::*;

use crate::dataset::OrderedDataset;
use crate::energy::{default_sigma_bounds, log_grid, BandwidthObjective, Evaluation};
use crate::error::{Error, Result};
use crate::linalg::AnchorMatrix;

/// `sigma -> (E, dE/dsigma)`; `None` marks a degenerate bandwidth.
pub trait Objective: Sync {
    fn evaluate(&self, sigma: f64) -> Option<Evaluation>;
}

impl<F> Objective for F
where
    F: Fn(f64) -> Option<Evaluation> + Sync,
{
    fn evaluate(&self, sigma: f64) -> Option<Evaluation> {
        self(sigma)
    }
}

impl Objective for BandwidthObjective {
    fn evaluate(&self, sigma: f64) -> Option<Evaluation> {
        BandwidthObjective::evaluate(self, sigma)
            .ok()
            .filter(|e| e.energy.is_finite() && e.slope.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    /// Search interval; `None` resolves to the data-driven default.
    pub sigma_bounds: Option<(f64, f64)>,
    pub init_grid_size: usize,
    pub max_descent_iters: usize,
    /// Stop when `|dE/d ln sigma| < descent_tolerance * |E(sigma_0)|`.
    pub descent_tolerance: f64,
    pub tunneling_lambda_schedule: Vec<f64>,
    pub max_rounds: usize,
    /// Relative drop below which neighbouring grid energies count as flat.
    pub flatness_tolerance: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            sigma_bounds: None,
            init_grid_size: 50,
            max_descent_iters: 200,
            descent_tolerance: 1e-8,
            tunneling_lambda_schedule: vec![1.0, 2.0, 4.0, 8.0],
            max_rounds: 3,
            flatness_tolerance: 1e-10,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some((lo, hi)) = self.sigma_bounds {
            if !(lo > 0.0 && hi > lo && hi.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "sigma bounds must satisfy 0 < min < max, got [{lo}, {hi}]"
                )));
            }
        }
        if self.init_grid_size < 2 {
            return Err(Error::InvalidArgument("init_grid_size must be >= 2".into()));
        }
        if self.tunneling_lambda_schedule.is_empty()
            || self.tunneling_lambda_schedule.iter().any(|&l| !(l > 0.0))
        {
            return Err(Error::InvalidArgument(
                "tunneling schedule must be a nonempty list of positive exponents".into(),
            ));
        }
        if self.max_rounds == 0 {
            return Err(Error::InvalidArgument("max_rounds must be >= 1".into()));
        }
        if !(self.descent_tolerance >= 0.0) || !(self.flatness_tolerance >= 0.0) {
            return Err(Error::InvalidArgument("tolerances must be nonnegative".into()));
        }
        Ok(())
    }

    fn bounds(&self) -> Result<(f64, f64)> {
        self.sigma_bounds
            .ok_or_else(|| Error::InvalidArgument("sigma bounds are unresolved".into()))
    }

    fn init_grid(&self) -> Result<Vec<f64>> {
        let (lo, hi) = self.bounds()?;
        Ok(log_grid(lo, hi, self.init_grid_size))
    }

    /// The init grid with the geometric midpoint of every cell inserted.
    fn tunneling_grid(&self) -> Result<Vec<f64>> {
        let coarse = self.init_grid()?;
        let mut fine = Vec::with_capacity(2 * coarse.len() - 1);
        for w in coarse.windows(2) {
            fine.push(w[0]);
            fine.push((0.5 * (w[0].ln() + w[1].ln())).exp());
        }
        fine.extend(coarse.last());
        Ok(fine)
    }

    fn log_step(&self) -> Result<f64> {
        let (lo, hi) = self.bounds()?;
        Ok((hi / lo).ln() / (self.init_grid_size - 1) as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Grid,
    Descent,
    Tunneling,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Grid => "grid",
            Phase::Descent => "descent",
            Phase::Tunneling => "tunneling",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub phase: Phase,
    pub sigma: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentResult {
    pub sigma: f64,
    pub energy: f64,
    /// `dE/d ln sigma` at the returned point.
    pub log_slope: f64,
    pub iterations: usize,
    pub converged: bool,
    pub boundary: Option<Boundary>,
    pub trace: Vec<TracePoint>,
}

const ARMIJO: f64 = 1e-4;
/// Length in `ln sigma` of the first trial step.
const INITIAL_LOG_STEP: f64 = 0.5;
const MIN_LOG_STEP: f64 = 1e-14;

/// Backtracking gradient descent on `E` over `t = ln sigma`, projected onto
/// the configured bounds. Accepted iterates never increase `E`.
pub fn gradient_descent<O: Objective + ?Sized>(
    objective: &O,
    sigma0: f64,
    cfg: &OptimizerConfig,
) -> Result<DescentResult> {
    cfg.validate()?;
    let (lo, hi) = cfg.bounds()?;
    let (t_lo, t_hi) = (lo.ln(), hi.ln());
    if !(sigma0 > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma0 must be positive, got {sigma0}")));
    }
    let mut t = sigma0.ln().clamp(t_lo, t_hi);
    let mut sigma = t.exp();
    let ev = objective.evaluate(sigma).ok_or(Error::DegenerateObjective)?;
    let mut energy = ev.energy;
    let mut g = sigma * ev.slope;
    let scale = if energy != 0.0 { energy.abs() } else { 1.0 };
    let threshold = cfg.descent_tolerance * scale;

    let mut trace = vec![TracePoint {
        phase: Phase::Descent,
        sigma,
        energy,
    }];
    let mut alpha = if g != 0.0 { INITIAL_LOG_STEP / g.abs() } else { 0.0 };
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_descent_iters {
        if g.abs() < threshold {
            converged = true;
            break;
        }
        // projected stationarity at a bound
        if (t <= t_lo && g > 0.0) || (t >= t_hi && g < 0.0) {
            break;
        }
        let mut accepted = None;
        while alpha * g.abs() >= MIN_LOG_STEP {
            let step = alpha * g;
            let t_new = if step.is_finite() {
                (t - step).clamp(t_lo, t_hi)
            } else if g > 0.0 {
                t_lo
            } else {
                t_hi
            };
            if t_new == t {
                break;
            }
            let s_new = t_new.exp();
            if let Some(ev) = objective.evaluate(s_new) {
                if ev.energy <= energy - ARMIJO * g * (t - t_new) {
                    accepted = Some((t_new, s_new, ev));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((t_new, s_new, ev)) = accepted else {
            break;
        };
        t = t_new;
        sigma = s_new;
        energy = ev.energy;
        g = s_new * ev.slope;
        alpha *= 2.0;
        iterations += 1;
        trace.push(TracePoint {
            phase: Phase::Descent,
            sigma,
            energy,
        });
    }
    if g.abs() < threshold {
        converged = true;
    }
    let boundary = if t <= t_lo {
        Some(Boundary::Lower)
    } else if t >= t_hi {
        Some(Boundary::Upper)
    } else {
        None
    };
    Ok(DescentResult {
        sigma,
        energy,
        log_slope: g,
        iterations,
        converged,
        boundary,
        trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunnelingOutcome {
    pub sigma: f64,
    pub energy: f64,
    pub lambda: f64,
}

/// Points closer than this (relative) to the local minimum are excluded.
const TUNNEL_EXCLUSION: f64 = 1e-6;
/// Relative improvement a tunneling candidate must beat.
const TUNNEL_IMPROVEMENT: f64 = 1e-12;

/// Minimizes `(E(sigma) - E_l) / |ln sigma - ln sigma_l|^lambda` over the
/// tunneling grid for each `lambda` in the schedule and returns the first
/// minimizer that lies strictly below the local minimum.
pub fn tunneling<O: Objective + ?Sized>(
    objective: &O,
    sigma_l: f64,
    cfg: &OptimizerConfig,
) -> Result<Option<TunnelingOutcome>> {
    cfg.validate()?;
    let local = objective
        .evaluate(sigma_l)
        .ok_or(Error::DegenerateObjective)?;
    let samples = scan(objective, &cfg.tunneling_grid()?);
    Ok(tunnel_over(&samples, sigma_l, local.energy, cfg))
}

fn tunnel_over(
    samples: &[(f64, Option<f64>)],
    sigma_l: f64,
    energy_l: f64,
    cfg: &OptimizerConfig,
) -> Option<TunnelingOutcome> {
    let t_l = sigma_l.ln();
    let target = energy_l - TUNNEL_IMPROVEMENT * energy_l.abs().max(f64::MIN_POSITIVE);
    for &lambda in &cfg.tunneling_lambda_schedule {
        let best = samples
            .iter()
            .filter_map(|&(s, e)| e.map(|e| (s, e)))
            .filter(|&(s, _)| (s - sigma_l).abs() > TUNNEL_EXCLUSION * sigma_l)
            .map(|(s, e)| (s, e, (e - energy_l) / (s.ln() - t_l).abs().powf(lambda)))
            .min_by(|a, b| a.2.total_cmp(&b.2));
        if let Some((sigma, energy, _)) = best {
            if energy < target {
                return Some(TunnelingOutcome {
                    sigma,
                    energy,
                    lambda,
                });
            }
        }
    }
    None
}

fn scan<O: Objective + ?Sized>(objective: &O, grid: &[f64]) -> Vec<(f64, Option<f64>)> {
    grid.par_iter()
        .map(|&s| (s, objective.evaluate(s).map(|e| e.energy)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthEstimate {
    pub sigma_star: Option<f64>,
    pub energy_at_star: Option<f64>,
    pub exists: bool,
    pub trace: Vec<TracePoint>,
    /// Lowest point visited, reported even when no minimizer is accepted.
    pub best_sigma: f64,
    pub best_energy: f64,
    pub boundary: Option<Boundary>,
    pub bounds: (f64, f64),
    pub rounds: usize,
}

pub fn estimate_bandwidth(
    data: &OrderedDataset,
    gamma: &AnchorMatrix,
    cfg: &OptimizerConfig,
) -> Result<BandwidthEstimate> {
    let objective = BandwidthObjective::new(data, gamma)?;
    let cfg = resolve_bounds(&objective, cfg);
    estimate_with(&objective, &cfg)
}

/// Fills in the data-driven default interval when none is set.
pub fn resolve_bounds(objective: &BandwidthObjective, cfg: &OptimizerConfig) -> OptimizerConfig {
    let mut cfg = cfg.clone();
    if cfg.sigma_bounds.is_none() {
        cfg.sigma_bounds = Some(default_sigma_bounds(objective.distances()));
    }
    cfg
}

/// Grid scan, then up to `max_rounds` of descent followed by tunneling.
///
/// No minimizer is reported (`exists = false`) when the lowest visited point
/// lies within one coarse grid step of a bound and the energy keeps falling
/// toward that bound over the final decade of the tunneling grid, each step
/// by more than `flatness_tolerance` relative.
pub fn estimate_with<O: Objective + ?Sized>(
    objective: &O,
    cfg: &OptimizerConfig,
) -> Result<BandwidthEstimate> {
    cfg.validate()?;
    let bounds = cfg.bounds()?;

    let grid = cfg.init_grid()?;
    let coarse = scan(objective, &grid);
    let mut trace: Vec<TracePoint> = coarse
        .iter()
        .filter_map(|&(sigma, e)| {
            e.map(|energy| TracePoint {
                phase: Phase::Grid,
                sigma,
                energy,
            })
        })
        .collect();
    let start = argmin(&trace).ok_or(Error::AllDegenerate)?;
    let mut sigma0 = start.sigma;

    // the coarse grid is every other point of the tunneling grid
    let mut fine: Vec<(f64, Option<f64>)> = Vec::with_capacity(2 * coarse.len() - 1);
    let midpoints: Vec<f64> = cfg
        .tunneling_grid()?
        .into_iter()
        .skip(1)
        .step_by(2)
        .collect();
    let mid = scan(objective, &midpoints);
    for (i, c) in coarse.iter().enumerate() {
        fine.push(*c);
        if let Some(m) = mid.get(i) {
            fine.push(*m);
        }
    }

    let mut rounds = 0;
    while rounds < cfg.max_rounds {
        rounds += 1;
        let descent = gradient_descent(objective, sigma0, cfg)?;
        trace.extend(descent.trace.iter().copied());
        match tunnel_over(&fine, descent.sigma, descent.energy, cfg) {
            Some(t) => {
                trace.push(TracePoint {
                    phase: Phase::Tunneling,
                    sigma: t.sigma,
                    energy: t.energy,
                });
                sigma0 = t.sigma;
            }
            None => break,
        }
    }

    let best = argmin(&trace).expect("trace holds the grid argmin");
    let step = cfg.log_step()?;
    let near = |b: f64| (best.sigma.ln() - b.ln()).abs() <= step * (1.0 + 1e-9);
    let boundary = if near(bounds.0) {
        Some(Boundary::Lower)
    } else if near(bounds.1) {
        Some(Boundary::Upper)
    } else {
        None
    };
    let exists = match boundary {
        None => true,
        Some(side) => !falls_toward(&fine, side, bounds, cfg.flatness_tolerance),
    };
    Ok(BandwidthEstimate {
        sigma_star: exists.then_some(best.sigma),
        energy_at_star: exists.then_some(best.energy),
        exists,
        trace,
        best_sigma: best.sigma,
        best_energy: best.energy,
        boundary,
        bounds,
        rounds,
    })
}

fn argmin(trace: &[TracePoint]) -> Option<TracePoint> {
    trace
        .iter()
        .copied()
        .fold(None, |acc: Option<TracePoint>, p| match acc {
            Some(a) if a.energy <= p.energy => Some(a),
            _ => Some(p),
        })
}

/// True when the usable samples in the last decade before `side` strictly
/// decrease toward it by more than `flat_tol` relative at every step.
fn falls_toward(
    samples: &[(f64, Option<f64>)],
    side: Boundary,
    (lo, hi): (f64, f64),
    flat_tol: f64,
) -> bool {
    let decade = 10f64.ln();
    let mut tail: Vec<f64> = samples
        .iter()
        .filter(|(s, _)| match side {
            Boundary::Lower => (s / lo).ln() <= decade,
            Boundary::Upper => (hi / s).ln() <= decade,
        })
        .filter_map(|&(_, e)| e)
        .collect();
    if side == Boundary::Lower {
        tail.reverse();
    }
    // tail now runs from the interior toward the boundary
    tail.len() < 2
        || tail
            .windows(2)
            .all(|w| w[1] < w[0] - flat_tol * w[0].abs())
}
