//! Simple-polygon classification of an embedding joined in row order, and
//! the circularity decision built on it.

use nalgebra::DMatrix;

use crate::dataset::OrderedDataset;
use crate::energy::BandwidthObjective;
use crate::error::{Error, Result};
use crate::linalg::sample_gamma;
use crate::optimizer::{estimate_with, resolve_bounds, BandwidthEstimate, OptimizerConfig};

pub type Point = [f64; 2];

/// Relative tolerance used when none is given.
pub const DEFAULT_EPS: f64 = 1e-9;

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn sign(v: f64, eps: f64) -> i8 {
    if v > eps {
        1
    } else if v < -eps {
        -1
    } else {
        0
    }
}

/// `p` lies in the axis-aligned box spanned by `a` and `b`.
fn in_box(a: Point, b: Point, p: Point) -> bool {
    a[0].min(b[0]) <= p[0]
        && p[0] <= a[0].max(b[0])
        && a[1].min(b[1]) <= p[1]
        && p[1] <= a[1].max(b[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Contact {
    None,
    /// Interiors cross transversally.
    Proper,
    /// Touching or collinear overlap within tolerance.
    Touch,
}

fn contact(p1: Point, p2: Point, q1: Point, q2: Point, eps: f64) -> Contact {
    let d1 = sign(cross(q1, q2, p1), eps);
    let d2 = sign(cross(q1, q2, p2), eps);
    let d3 = sign(cross(p1, p2, q1), eps);
    let d4 = sign(cross(p1, p2, q2), eps);
    if d1 * d2 < 0 && d3 * d4 < 0 {
        return Contact::Proper;
    }
    let touches = (d1 == 0 && in_box(q1, q2, p1))
        || (d2 == 0 && in_box(q1, q2, p2))
        || (d3 == 0 && in_box(p1, p2, q1))
        || (d4 == 0 && in_box(p1, p2, q2));
    if touches {
        Contact::Touch
    } else {
        Contact::None
    }
}

/// Closed segments `[p1, p2]` and `[q1, q2]` share a point, with `eps` the
/// tolerance on cross-product magnitudes. Collinear overlap counts.
pub fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point, eps: f64) -> bool {
    contact(p1, p2, q1, q2, eps) != Contact::None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Simple,
    SelfIntersecting,
    Degenerate,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Simple => "simple",
            Classification::SelfIntersecting => "self_intersecting",
            Classification::Degenerate => "degenerate",
        }
    }
}

/// Edge `i` joins vertex `i` to vertex `(i + 1) mod n`; indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Witness {
    /// Non-adjacent edges whose interiors cross.
    Crossing(usize, usize),
    /// Edges touching within tolerance, or adjacent edges folding back
    /// over each other.
    Contact(usize, usize),
    ZeroLengthEdge(usize),
    CoincidentVertices(usize, usize),
}

impl std::fmt::Display for Witness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Witness::Crossing(a, b) => write!(f, "crossing({a},{b})"),
            Witness::Contact(a, b) => write!(f, "contact({a},{b})"),
            Witness::ZeroLengthEdge(e) => write!(f, "zero_length_edge({e})"),
            Witness::CoincidentVertices(a, b) => write!(f, "coincident_vertices({a},{b})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolygonVerdict {
    pub classification: Classification,
    pub witnesses: Vec<Witness>,
    /// Relative tolerance the verdict was computed with.
    pub epsilon: f64,
}

fn vertex(z: &DMatrix<f64>, i: usize) -> Point {
    [z[(i, 0)], z[(i, 1)]]
}

/// Classifies the closed cycle `Z_0 -> ... -> Z_{n-1} -> Z_0`.
///
/// Lengths are compared against `eps * diag` and cross products against
/// `eps * diag^2`, where `diag` is the bounding-box diagonal. Short edges,
/// coincident vertices and touching edges make the polygon `Degenerate`;
/// any transversal crossing of non-adjacent edges makes it
/// `SelfIntersecting`.
pub fn is_simple_closed_polygon(z: &DMatrix<f64>, eps: f64) -> Result<PolygonVerdict> {
    let n = z.nrows();
    if n < 3 {
        return Err(Error::TooFewPoints { n });
    }
    if z.ncols() != 2 {
        return Err(Error::InvalidArgument(format!(
            "polygon vertices must be planar, got {} columns",
            z.ncols()
        )));
    }
    if !(eps >= 0.0) || z.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "polygon needs finite vertices and a nonnegative eps".into(),
        ));
    }
    let (xs, ys) = (z.column(0), z.column(1));
    let diag = (xs.max() - xs.min()).hypot(ys.max() - ys.min());
    let len_tol = eps * diag;
    let cross_tol = eps * diag * diag;
    let dist = |i: usize, j: usize| {
        let (a, b) = (vertex(z, i), vertex(z, j));
        (a[0] - b[0]).hypot(a[1] - b[1])
    };

    let mut witnesses = Vec::new();
    for i in 0..n {
        if dist(i, (i + 1) % n) <= len_tol {
            witnesses.push(Witness::ZeroLengthEdge(i));
        }
    }
    for i in 0..n {
        for j in i + 2..n {
            if !(i == 0 && j == n - 1) && dist(i, j) <= len_tol {
                witnesses.push(Witness::CoincidentVertices(i, j));
            }
        }
    }
    if !witnesses.is_empty() {
        return Ok(PolygonVerdict {
            classification: Classification::Degenerate,
            witnesses,
            epsilon: eps,
        });
    }

    let edge = |i: usize| (vertex(z, i), vertex(z, (i + 1) % n));
    let mut crossings = Vec::new();
    let mut contacts = Vec::new();
    for i in 0..n {
        // adjacent pair (i, i+1) shares vertex i+1; fold-back overlaps it
        let (a, v) = edge(i);
        let (_, b) = edge((i + 1) % n);
        let u = [v[0] - a[0], v[1] - a[1]];
        let w = [b[0] - v[0], b[1] - v[1]];
        let turn = u[0] * w[1] - u[1] * w[0];
        let along = u[0] * w[0] + u[1] * w[1];
        if turn.abs() <= cross_tol && along < 0.0 {
            let pair = if i + 1 == n { (0, n - 1) } else { (i, i + 1) };
            contacts.push(Witness::Contact(pair.0, pair.1));
        }
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (p1, p2) = edge(i);
            let (q1, q2) = edge(j);
            match contact(p1, p2, q1, q2, cross_tol) {
                Contact::Proper => crossings.push(Witness::Crossing(i, j)),
                Contact::Touch => contacts.push(Witness::Contact(i, j)),
                Contact::None => {}
            }
        }
    }
    let classification = if !crossings.is_empty() {
        Classification::SelfIntersecting
    } else if !contacts.is_empty() {
        Classification::Degenerate
    } else {
        Classification::Simple
    };
    crossings.extend(contacts);
    Ok(PolygonVerdict {
        classification,
        witnesses: crossings,
        epsilon: eps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reason {
    NoMinimizer,
    NotSimplePolygon,
    SimplePolygon,
}

impl Reason {
    pub fn as_str(self) -> &'static str {
        match self {
            Reason::NoMinimizer => "no_minimizer",
            Reason::NotSimplePolygon => "not_simple_polygon",
            Reason::SimplePolygon => "simple_polygon",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircularityVerdict {
    pub accept_h0: bool,
    pub reason: Reason,
    pub sigma_star: Option<f64>,
    pub energy_at_star: Option<f64>,
    pub polygon: Option<PolygonVerdict>,
    /// Embedding the polygon verdict was computed on.
    pub embedding: Option<DMatrix<f64>>,
    pub estimate: Option<BandwidthEstimate>,
    pub seed: u64,
    pub diagnostic: Option<String>,
}

/// Estimates the bandwidth; rejects when no minimizer exists, otherwise
/// embeds at `sigma*` and accepts exactly when the embedding, joined in row
/// order, is a simple closed polygon. A deterministic decision rule for a
/// fixed seed, not a test with a significance level.
pub fn circularity_test(
    data: &OrderedDataset,
    cfg: &OptimizerConfig,
    eps: f64,
) -> Result<CircularityVerdict> {
    cfg.validate()?;
    let gamma = sample_gamma(data.n(), cfg.seed)?;
    let objective = BandwidthObjective::new(data, &gamma)?;
    let cfg = resolve_bounds(&objective, cfg);
    let reject = |estimate: Option<BandwidthEstimate>, diagnostic: Option<String>| CircularityVerdict {
        accept_h0: false,
        reason: Reason::NoMinimizer,
        sigma_star: None,
        energy_at_star: None,
        polygon: None,
        embedding: None,
        estimate,
        seed: cfg.seed,
        diagnostic,
    };
    let estimate = match estimate_with(&objective, &cfg) {
        Ok(e) => e,
        Err(Error::AllDegenerate) => {
            return Ok(reject(None, Some(Error::AllDegenerate.to_string())));
        }
        Err(e) => return Err(e),
    };
    let (Some(sigma), true) = (estimate.sigma_star, estimate.exists) else {
        let note = format!(
            "lowest energy {:e} at sigma {:e} sits on the search boundary with energy still falling",
            estimate.best_energy, estimate.best_sigma
        );
        return Ok(reject(Some(estimate), Some(note)));
    };
    let z = objective.embedding(sigma)?.z;
    let polygon = is_simple_closed_polygon(&z, eps)?;
    let accept = polygon.classification == Classification::Simple;
    Ok(CircularityVerdict {
        accept_h0: accept,
        reason: if accept {
            Reason::SimplePolygon
        } else {
            Reason::NotSimplePolygon
        },
        sigma_star: Some(sigma),
        energy_at_star: estimate.energy_at_star,
        polygon: Some(polygon),
        embedding: Some(z),
        estimate: Some(estimate),
        seed: cfg.seed,
        diagnostic: None,
    })
}
