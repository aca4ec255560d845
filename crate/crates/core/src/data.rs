//! Synthetic generators, isometric lifting, Lowess smoothing against row
//! index, and comma-separated dataset files.

use std::f64::consts::TAU;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::OrderedDataset;
use crate::error::{Error, Result};
use crate::report::format_float;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorKind {
    Circle,
    ToroidalHelix,
    GaussianCloud,
}

impl GeneratorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GeneratorKind::Circle => "circle",
            GeneratorKind::ToroidalHelix => "toroidal_helix",
            GeneratorKind::GaussianCloud => "gaussian_cloud",
        }
    }
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "circle" => Ok(GeneratorKind::Circle),
            "toroidal_helix" | "helix" => Ok(GeneratorKind::ToroidalHelix),
            "gaussian_cloud" | "cloud" => Ok(GeneratorKind::GaussianCloud),
            _ => Err(Error::InvalidArgument(format!(
                "unknown generator kind {s:?} (expected circle, toroidal_helix or gaussian_cloud)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub n: usize,
    /// Standard deviation of isotropic Gaussian noise.
    pub noise: f64,
    /// Helix windings around the tube.
    pub windings: u32,
    /// Ambient dimension of the Gaussian cloud.
    pub dim: usize,
    pub seed: u64,
}

impl GeneratorSpec {
    pub const DEFAULT_WINDINGS: u32 = 8;
    pub const DEFAULT_CLOUD_DIM: usize = 5;

    pub fn new(kind: GeneratorKind, n: usize) -> Self {
        Self {
            kind,
            n,
            noise: 0.0,
            windings: Self::DEFAULT_WINDINGS,
            dim: Self::DEFAULT_CLOUD_DIM,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < OrderedDataset::MIN_POINTS {
            return Err(Error::InvalidArgument(format!("n must be >= 3, got {}", self.n)));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise must be finite and nonnegative, got {}",
                self.noise
            )));
        }
        if self.windings == 0 {
            return Err(Error::InvalidArgument("windings must be >= 1".into()));
        }
        if self.dim == 0 {
            return Err(Error::InvalidArgument("dim must be >= 1".into()));
        }
        Ok(())
    }

    /// Parses `key = value` lines; blank lines and `#` comments are skipped.
    /// Recognized keys: kind, n, noise, windings, dim, seed.
    pub fn from_key_values(text: &str) -> Result<Self> {
        let mut kind = None;
        let mut spec = GeneratorSpec::new(GeneratorKind::Circle, 0);
        for (line_no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                row: line_no,
                column: 0,
                message: format!("expected key = value, got {line:?}"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |message: String| Error::Parse {
                row: line_no,
                column: 0,
                message,
            };
            match key {
                "kind" => kind = Some(value.parse::<GeneratorKind>()?),
                "n" => spec.n = value.parse().map_err(|e| bad(format!("n: {e}")))?,
                "noise" => spec.noise = value.parse().map_err(|e| bad(format!("noise: {e}")))?,
                "windings" => {
                    spec.windings = value.parse().map_err(|e| bad(format!("windings: {e}")))?
                }
                "dim" => spec.dim = value.parse().map_err(|e| bad(format!("dim: {e}")))?,
                "seed" => spec.seed = value.parse().map_err(|e| bad(format!("seed: {e}")))?,
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }
        spec.kind = kind.ok_or_else(|| Error::InvalidArgument("generator config lacks `kind`".into()))?;
        spec.validate()?;
        Ok(spec)
    }
}

fn add_noise(points: &mut DMatrix<f64>, noise: f64, seed: u64) {
    if noise == 0.0 {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..points.nrows() {
        for j in 0..points.ncols() {
            let e: f64 = rng.sample(StandardNormal);
            points[(i, j)] += noise * e;
        }
    }
}

fn angle(r: usize, n: usize) -> f64 {
    TAU * r as f64 / n as f64
}

/// `(cos t_r, sin t_r)` at `t_r = 2 pi r / n`, plus noise.
pub fn gen_circle(spec: &GeneratorSpec) -> Result<OrderedDataset> {
    spec.validate()?;
    let n = spec.n;
    let mut points = DMatrix::from_fn(n, 2, |r, j| {
        let t = angle(r, n);
        if j == 0 {
            t.cos()
        } else {
            t.sin()
        }
    });
    add_noise(&mut points, spec.noise, spec.seed);
    OrderedDataset::new(points)
}

/// A curve winding `w` times around a radius-1 tube about the radius-2
/// circle in the xy-plane.
pub fn gen_toroidal_helix(spec: &GeneratorSpec) -> Result<OrderedDataset> {
    spec.validate()?;
    let n = spec.n;
    let w = f64::from(spec.windings);
    let mut points = DMatrix::from_fn(n, 3, |r, j| {
        let t = angle(r, n);
        let radial = 2.0 + (w * t).cos();
        match j {
            0 => radial * t.cos(),
            1 => radial * t.sin(),
            _ => (w * t).sin(),
        }
    });
    add_noise(&mut points, spec.noise, spec.seed);
    OrderedDataset::new(points)
}

/// i.i.d. standard normal rows in `dim` dimensions; `noise` is ignored.
pub fn gen_gaussian_cloud(spec: &GeneratorSpec) -> Result<OrderedDataset> {
    spec.validate()?;
    let mut points = DMatrix::zeros(spec.n, spec.dim);
    add_noise(&mut points, 1.0, spec.seed);
    OrderedDataset::new(points)
}

pub fn generate(spec: &GeneratorSpec) -> Result<OrderedDataset> {
    match spec.kind {
        GeneratorKind::Circle => gen_circle(spec),
        GeneratorKind::ToroidalHelix => gen_toroidal_helix(spec),
        GeneratorKind::GaussianCloud => gen_gaussian_cloud(spec),
    }
}

/// Embeds the data isometrically in `target_d` dimensions: `X R` where `R`
/// is `d x target_d` with orthonormal rows, taken from the QR factor of a
/// seeded Gaussian matrix.
pub fn lift_to_dim(data: &OrderedDataset, target_d: usize, seed: u64) -> Result<OrderedDataset> {
    let d = data.dim();
    if target_d < d {
        return Err(Error::DimensionError {
            source_dim: d,
            target: target_d,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(target_d, target_d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = g.qr().q();
    let rotation = q.rows(0, d).into_owned();
    OrderedDataset::new(data.points() * rotation)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmootherConfig {
    /// Fraction of points in each local fit.
    pub alpha: f64,
    /// Local polynomial degree, 0 or 1.
    pub degree: usize,
}

impl Default for SmootherConfig {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            degree: 1,
        }
    }
}

impl SmootherConfig {
    pub fn window(&self, n: usize) -> usize {
        ((self.alpha * n as f64).ceil() as usize).min(n)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if self.degree > 1 {
            return Err(Error::InvalidArgument(format!(
                "degree must be 0 or 1, got {}",
                self.degree
            )));
        }
        let window = self.window(n);
        let needed = self.degree + 2;
        if window < needed {
            return Err(Error::WindowTooSmall {
                window,
                degree: self.degree,
                needed,
            });
        }
        Ok(())
    }
}

fn tricube(u: f64) -> f64 {
    let u = u.abs();
    if u >= 1.0 {
        0.0
    } else {
        (1.0 - u * u * u).powi(3)
    }
}

/// Smooths every column against the row index with tricube-weighted local
/// polynomial fits over the `ceil(alpha n)` nearest indices.
pub fn lowess_smooth(data: &OrderedDataset, cfg: &SmootherConfig) -> Result<OrderedDataset> {
    let n = data.n();
    cfg.validate(n)?;
    let k = cfg.window(n);
    let x = data.points();
    let mut out = DMatrix::zeros(n, data.dim());
    for i in 0..n {
        let start = i.saturating_sub(k / 2).min(n - k);
        let reach = (i - start).max(start + k - 1 - i) as f64;
        let weights: Vec<(f64, f64)> = (start..start + k)
            .map(|j| {
                let dx = j as f64 - i as f64;
                (dx, tricube(dx / reach))
            })
            .collect();
        let s0: f64 = weights.iter().map(|&(_, w)| w).sum();
        let s1: f64 = weights.iter().map(|&(dx, w)| w * dx).sum();
        let s2: f64 = weights.iter().map(|&(dx, w)| w * dx * dx).sum();
        for c in 0..data.dim() {
            let t0: f64 = weights
                .iter()
                .enumerate()
                .map(|(m, &(_, w))| w * x[(start + m, c)])
                .sum();
            out[(i, c)] = if cfg.degree == 0 {
                t0 / s0
            } else {
                let t1: f64 = weights
                    .iter()
                    .enumerate()
                    .map(|(m, &(dx, w))| w * dx * x[(start + m, c)])
                    .sum();
                (s2 * t0 - s1 * t1) / (s0 * s2 - s1 * s1)
            };
        }
    }
    OrderedDataset::new(out)
}

/// Reads a rectangular numeric table. Lines starting with `#` are comments;
/// row indices in errors count data rows from 0.
pub fn read_dataset<R: Read>(reader: R, has_header: bool) -> Result<OrderedDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut expected = None;
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::Io(std::io::Error::other(e.to_string())),
            _ => Error::Parse {
                row,
                column: 0,
                message: e.to_string(),
            },
        })?;
        let expected = *expected.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::RaggedRows {
                row,
                expected,
                found: record.len(),
            });
        }
        let values = record
            .iter()
            .enumerate()
            .map(|(column, cell)| {
                cell.parse::<f64>().map_err(|_| Error::NonNumericCell {
                    row,
                    column,
                    value: cell.to_string(),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(values);
    }
    OrderedDataset::from_rows(&rows)
}

pub fn load_dataset(path: impl AsRef<Path>, has_header: bool) -> Result<OrderedDataset> {
    read_dataset(File::open(path)?, has_header)
}

/// Writes one row per line with shortest round-trip float formatting.
pub fn write_dataset<W: Write>(data: &OrderedDataset, mut out: W) -> Result<()> {
    let x = data.points();
    for i in 0..x.nrows() {
        let row: Vec<String> = (0..x.ncols()).map(|j| format_float(x[(i, j)])).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn save_dataset(data: &OrderedDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_dataset(data, &mut out)?;
    out.flush()?;
    Ok(())
}
