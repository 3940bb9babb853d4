//! Grids, sectors, bracket weights and the field containers shared by every
//! other module.
//!
//! The tangential space is a periodic box `[0, L)^dim` sampled on `N^dim`
//! points; the normal half-line is truncated at `x_max` and sampled on a
//! geometrically graded grid that is fine near the boundary.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

/// `(1 + |xi|^2 + |mu|^2)^{1/2}`, with `|mu| = 0` when no parameter is given.
pub fn bracket(xi: &[f64], mu: Option<Complex64>) -> f64 {
    let xi2: f64 = xi.iter().map(|x| x * x).sum();
    let mu2 = mu.map_or(0.0, |m| m.norm_sqr());
    (1.0 + xi2 + mu2).sqrt()
}

/// Scalar form of [`bracket`] for radial arguments.
pub fn bracket2(xi_norm: f64, mu_abs: f64) -> f64 {
    (1.0 + xi_norm * xi_norm + mu_abs * mu_abs).sqrt()
}

/// An open angular sector `{mu != 0 : alpha < arg mu < beta}` or the empty sector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sector {
    Empty,
    Angular { alpha: f64, beta: f64 },
}

impl Sector {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha < beta) || beta - alpha > 2.0 * PI {
            return param(format!("sector needs alpha < beta <= alpha + 2pi, got ({alpha}, {beta})"));
        }
        Ok(Sector::Angular { alpha, beta })
    }

    /// The symmetric sector `|arg mu| < theta`.
    pub fn symmetric(theta: f64) -> Result<Self> {
        Self::new(-theta, theta)
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, Sector::Empty)
    }

    pub fn contains(&self, mu: Complex64) -> bool {
        match *self {
            Sector::Empty => false,
            Sector::Angular { alpha, beta } => {
                if mu == Complex64::new(0.0, 0.0) || !mu.re.is_finite() || !mu.im.is_finite() {
                    return false;
                }
                // unwrap arg into (alpha, alpha + 2pi]
                let mut a = mu.arg();
                while a <= alpha {
                    a += 2.0 * PI;
                }
                while a > alpha + 2.0 * PI {
                    a -= 2.0 * PI;
                }
                a < beta
            }
        }
    }

    /// Accepts `None` exactly when the sector is empty, otherwise requires membership.
    pub fn check(&self, mu: Option<Complex64>) -> Result<()> {
        match (self, mu) {
            (Sector::Empty, None) => Ok(()),
            (Sector::Empty, Some(m)) => Err(Error::Domain(format!(
                "parameter-free symbol evaluated with mu = {m}"
            ))),
            (_, None) => Err(Error::Domain("missing spectral parameter".into())),
            (s, Some(m)) => {
                if s.contains(m) {
                    Ok(())
                } else {
                    Err(Error::Domain(format!("mu = {m} outside sector {s:?}")))
                }
            }
        }
    }

    /// Angular bounds pulled inward by `margin`, or `None` for the empty sector.
    pub fn inner_bounds(&self, margin: f64) -> Option<(f64, f64)> {
        match *self {
            Sector::Empty => None,
            Sector::Angular { alpha, beta } => {
                let m = margin.min(0.25 * (beta - alpha));
                Some((alpha + m, beta - m))
            }
        }
    }
}

/// Periodic tangential grid on `[0, L)^dim` with `N` points per axis.
#[derive(Debug, Clone)]
pub struct TangentialGrid {
    dim: usize,
    length: f64,
    points: usize,
    freqs: Vec<f64>,
}

impl PartialEq for TangentialGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.length == other.length && self.points == other.points
    }
}

impl TangentialGrid {
    pub fn new(dim: usize, length: f64, points: usize) -> Result<Self> {
        if dim == 0 || dim > 2 {
            return param(format!("tangential dimension must be 1 or 2, got {dim}"));
        }
        if !(length > 0.0) || !length.is_finite() {
            return param(format!("box length must be positive, got {length}"));
        }
        if points < 2 || !points.is_power_of_two() {
            return param(format!("points per axis must be a power of two >= 2, got {points}"));
        }
        let total = points.pow(dim as u32);
        let mut freqs = Vec::with_capacity(total * dim);
        for i in 0..total {
            for axis in 0..dim {
                let idx = Self::axis_index(i, axis, dim, points);
                freqs.push(2.0 * PI * Self::signed_mode(idx, points) as f64 / length);
            }
        }
        Ok(Self { dim, length, points, freqs })
    }

    fn axis_index(flat: usize, axis: usize, dim: usize, points: usize) -> usize {
        // row-major, last axis fastest
        let stride = points.pow((dim - 1 - axis) as u32);
        (flat / stride) % points
    }

    /// FFT-order index to the signed integer mode in `{-N/2, ..., N/2 - 1}`.
    pub fn signed_mode(idx: usize, points: usize) -> i64 {
        if idx < points / 2 {
            idx as i64
        } else {
            idx as i64 - points as i64
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn points_per_dim(&self) -> usize {
        self.points
    }

    /// Total number of samples `N^dim`.
    pub fn len(&self) -> usize {
        self.freqs.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn cell_measure(&self) -> f64 {
        (self.length / self.points as f64).powi(self.dim as i32)
    }

    pub fn measure(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    pub fn nyquist(&self) -> f64 {
        PI * self.points as f64 / self.length
    }

    /// Frequency vector of the sample with flat FFT-order index `i`.
    pub fn frequency(&self, i: usize) -> &[f64] {
        &self.freqs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn frequency_norm(&self, i: usize) -> f64 {
        self.frequency(i).iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn frequencies(&self) -> impl Iterator<Item = &[f64]> {
        self.freqs.chunks(self.dim)
    }

    /// Spatial position of sample `i`.
    pub fn position(&self, i: usize) -> Vec<f64> {
        let h = self.length / self.points as f64;
        (0..self.dim)
            .map(|axis| Self::axis_index(i, axis, self.dim, self.points) as f64 * h)
            .collect()
    }

    /// Flat index of the sample carrying the integer mode vector `modes`, if on the grid.
    pub fn mode_index(&self, modes: &[i64]) -> Option<usize> {
        if modes.len() != self.dim {
            return None;
        }
        let n = self.points as i64;
        let mut flat = 0usize;
        for &m in modes {
            if m < -n / 2 || m >= n / 2 {
                return None;
            }
            let idx = m.rem_euclid(n) as usize;
            flat = flat * self.points + idx;
        }
        Some(flat)
    }
}

/// Graded grid on `[0, x_max]` with trapezoid weights.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl NormalGrid {
    /// Nodes `x_j = x_max (r^{j-1} - 1) / (r^{M-1} - 1)`, `j = 1..=M`.
    pub fn graded(count: usize, x_max: f64, ratio: f64) -> Result<Self> {
        if count < 2 {
            return param(format!("normal grid needs at least 2 nodes, got {count}"));
        }
        if !(ratio > 1.0) || !ratio.is_finite() {
            return param(format!("grading ratio must exceed 1, got {ratio}"));
        }
        if !(x_max > 0.0) || !x_max.is_finite() {
            return param(format!("x_max must be positive, got {x_max}"));
        }
        let denom = ratio.powi(count as i32 - 1) - 1.0;
        let mut nodes: Vec<f64> = (0..count)
            .map(|j| x_max * (ratio.powi(j as i32) - 1.0) / denom)
            .collect();
        nodes[count - 1] = x_max;
        Self::from_nodes(nodes)
    }

    /// Builds a grid from strictly increasing nodes starting anywhere `>= 0`.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return param("normal grid needs at least 2 nodes");
        }
        if nodes[0] < 0.0 || nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return param("normal nodes must be nonnegative and strictly increasing");
        }
        let m = nodes.len();
        let mut weights = vec![0.0; m];
        for j in 0..m - 1 {
            let h = nodes[j + 1] - nodes[j];
            weights[j] += 0.5 * h;
            weights[j + 1] += 0.5 * h;
        }
        Ok(Self { nodes, weights })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn x_max(&self) -> f64 {
        *self.nodes.last().expect("nonempty grid")
    }
}

/// Grid parameters as they appear in run configurations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub dim: usize,
    pub box_length: f64,
    pub points_per_dim: usize,
    pub normal_count: usize,
    pub x_max: f64,
    pub ratio: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            dim: 1,
            box_length: 2.0 * PI,
            points_per_dim: 256,
            normal_count: 256,
            x_max: 16.0,
            ratio: 1.05,
        }
    }
}

impl GridConfig {
    /// Same box, twice the points in both directions, grading ratio adjusted
    /// so the graded grid keeps its spread `r^{M-1}`.
    pub fn refined(&self) -> Self {
        let m = 2 * self.normal_count;
        let spread = self.ratio.ln() * (self.normal_count as f64 - 1.0);
        Self {
            points_per_dim: 2 * self.points_per_dim,
            normal_count: m,
            ratio: (spread / (m as f64 - 1.0)).exp(),
            ..*self
        }
    }
}

pub fn make_grids(config: &GridConfig) -> Result<(Arc<TangentialGrid>, Arc<NormalGrid>)> {
    let tangential = TangentialGrid::new(config.dim, config.box_length, config.points_per_dim)?;
    let normal = NormalGrid::graded(config.normal_count, config.x_max, config.ratio)?;
    Ok((Arc::new(tangential), Arc::new(normal)))
}

/// Complex samples on the tangential grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryField {
    pub grid: Arc<TangentialGrid>,
    pub samples: Vec<Complex64>,
}

impl BoundaryField {
    pub fn new(grid: Arc<TangentialGrid>, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} samples for a grid of {} points",
                samples.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, samples })
    }

    pub fn zeros(grid: Arc<TangentialGrid>) -> Self {
        let n = grid.len();
        Self { grid, samples: vec![Complex64::new(0.0, 0.0); n] }
    }

    pub fn from_fn(grid: Arc<TangentialGrid>, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let samples = (0..grid.len()).map(|i| f(&grid.position(i))).collect();
        Self { grid, samples }
    }

    /// The plane wave `exp(i eta . x)` for an integer mode vector on the grid.
    pub fn mode(grid: Arc<TangentialGrid>, modes: &[i64]) -> Result<Self> {
        let idx = grid
            .mode_index(modes)
            .ok_or_else(|| Error::Parameter(format!("mode {modes:?} not on the grid")))?;
        let eta = grid.frequency(idx).to_vec();
        Ok(Self::from_fn(grid, |x| {
            let phase: f64 = x.iter().zip(&eta).map(|(a, b)| a * b).sum();
            Complex64::from_polar(1.0, phase)
        }))
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self { grid: self.grid.clone(), samples: self.samples.iter().map(|z| z * c).collect() }
    }
}

/// Complex samples on tangential x normal grid, stored as `M` consecutive
/// tangential slices (slice `j` belongs to normal node `x_j`).
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpaceField {
    pub tangential: Arc<TangentialGrid>,
    pub normal: Arc<NormalGrid>,
    pub samples: Vec<Complex64>,
}

impl HalfSpaceField {
    pub fn new(
        tangential: Arc<TangentialGrid>,
        normal: Arc<NormalGrid>,
        samples: Vec<Complex64>,
    ) -> Result<Self> {
        if samples.len() != tangential.len() * normal.len() {
            return Err(Error::GridMismatch(format!(
                "{} samples for a {}x{} grid",
                samples.len(),
                tangential.len(),
                normal.len()
            )));
        }
        Ok(Self { tangential, normal, samples })
    }

    pub fn zeros(tangential: Arc<TangentialGrid>, normal: Arc<NormalGrid>) -> Self {
        let n = tangential.len() * normal.len();
        Self { tangential, normal, samples: vec![Complex64::new(0.0, 0.0); n] }
    }

    /// Samples `f(x', x_n)`.
    pub fn from_fn(
        tangential: Arc<TangentialGrid>,
        normal: Arc<NormalGrid>,
        f: impl Fn(&[f64], f64) -> Complex64,
    ) -> Self {
        let nt = tangential.len();
        let positions: Vec<Vec<f64>> = (0..nt).map(|i| tangential.position(i)).collect();
        let mut samples = Vec::with_capacity(nt * normal.len());
        for &xn in normal.nodes() {
            samples.extend(positions.iter().map(|x| f(x, xn)));
        }
        Self { tangential, normal, samples }
    }

    pub fn slice(&self, j: usize) -> &[Complex64] {
        let nt = self.tangential.len();
        &self.samples[j * nt..(j + 1) * nt]
    }

    pub fn slice_mut(&mut self, j: usize) -> &mut [Complex64] {
        let nt = self.tangential.len();
        &mut self.samples[j * nt..(j + 1) * nt]
    }

    /// Boundary trace (the slice at the first normal node).
    pub fn trace(&self) -> BoundaryField {
        BoundaryField { grid: self.tangential.clone(), samples: self.slice(0).to_vec() }
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            tangential: self.tangential.clone(),
            normal: self.normal.clone(),
            samples: self.samples.iter().map(|z| z * c).collect(),
        }
    }
}

/// Either kind of field; the carrier used by norms and Rademacher sums.
#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Boundary(BoundaryField),
    HalfSpace(HalfSpaceField),
}

impl Field {
    pub fn samples(&self) -> &[Complex64] {
        match self {
            Field::Boundary(b) => &b.samples,
            Field::HalfSpace(h) => &h.samples,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Field::Boundary(_) => "boundary field",
            Field::HalfSpace(_) => "half-space field",
        }
    }

    pub fn same_grid(&self, other: &Field) -> bool {
        match (self, other) {
            (Field::Boundary(a), Field::Boundary(b)) => a.grid == b.grid,
            (Field::HalfSpace(a), Field::HalfSpace(b)) => {
                a.tangential == b.tangential && a.normal == b.normal
            }
            _ => false,
        }
    }

    /// `sum_n c_n f_n`; every field must share the grid of the first.
    pub fn linear_combination(coeffs: &[Complex64], fields: &[&Field]) -> Result<Field> {
        let first = fields.first().ok_or_else(|| Error::Parameter("empty combination".into()))?;
        if coeffs.len() != fields.len() {
            return param("coefficient count differs from field count");
        }
        let mut acc = vec![Complex64::new(0.0, 0.0); first.samples().len()];
        for (c, f) in coeffs.iter().zip(fields) {
            if !first.same_grid(f) {
                return Err(Error::GridMismatch("Rademacher sum over different grids".into()));
            }
            for (a, s) in acc.iter_mut().zip(f.samples()) {
                *a += c * s;
            }
        }
        Ok(first.with_samples(acc))
    }

    pub fn with_samples(&self, samples: Vec<Complex64>) -> Field {
        match self {
            Field::Boundary(b) => Field::Boundary(BoundaryField { grid: b.grid.clone(), samples }),
            Field::HalfSpace(h) => Field::HalfSpace(HalfSpaceField {
                tangential: h.tangential.clone(),
                normal: h.normal.clone(),
                samples,
            }),
        }
    }
}

impl From<BoundaryField> for Field {
    fn from(b: BoundaryField) -> Self {
        Field::Boundary(b)
    }
}

impl From<HalfSpaceField> for Field {
    fn from(h: HalfSpaceField) -> Self {
        Field::HalfSpace(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn bracket_values() {
        assert_eq!(bracket(&[0.0], None), 1.0);
        assert_abs_diff_eq!(bracket(&[3.0], None), 10f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(bracket(&[0.0], Some(c(2.0, 0.0))), 5f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn sector_membership() {
        let s = Sector::new(-PI / 4.0, PI / 4.0).unwrap();
        assert!(s.contains(c(1.0, 0.0)));
        assert!(!s.contains(c(0.0, 1.0)));
        assert!(!s.contains(c(0.0, 0.0)));
        assert!(!Sector::Empty.contains(c(1.0, 0.0)));
        assert!(Sector::Empty.check(None).is_ok());
        assert!(Sector::Empty.check(Some(c(1.0, 0.0))).is_err());
        assert!(s.check(None).is_err());
    }

    #[test]
    fn sector_across_negative_axis() {
        let s = Sector::new(3.0 * PI / 4.0, 5.0 * PI / 4.0).unwrap();
        assert!(s.contains(c(-1.0, 0.0)));
        assert!(s.contains(c(-1.0, -0.1)));
        assert!(!s.contains(c(1.0, 0.0)));
        assert!(Sector::new(1.0, 0.5).is_err());
    }

    #[test]
    fn tangential_frequencies() {
        let g = TangentialGrid::new(1, 2.0 * PI, 8).unwrap();
        let mut f: Vec<f64> = g.frequencies().map(|x| x[0]).collect();
        f.sort_by(f64::total_cmp);
        let expected: Vec<f64> = (-4..4).map(|k| k as f64).collect();
        for (a, b) in f.iter().zip(&expected) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(g.nyquist(), 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.cell_measure() * g.len() as f64, g.measure(), epsilon = 1e-12);
    }

    #[test]
    fn frequencies_closed_under_negation_below_nyquist() {
        let g = TangentialGrid::new(2, 3.0, 8).unwrap();
        for k in g.frequencies() {
            let at_nyquist = k.iter().any(|x| (x.abs() - g.nyquist()).abs() < 1e-9);
            if at_nyquist {
                continue;
            }
            assert!(g.frequencies().any(|q| q.iter().zip(k).all(|(a, b)| (a + b).abs() < 1e-9)));
        }
    }

    #[test]
    fn graded_nodes() {
        let g = NormalGrid::graded(3, 3.0, 2.0).unwrap();
        assert_eq!(g.nodes(), &[0.0, 1.0, 3.0]);
        let w: f64 = g.weights().iter().sum();
        assert_abs_diff_eq!(w, 3.0, epsilon = 1e-15);
    }

    #[test]
    fn grid_parameter_errors() {
        assert!(TangentialGrid::new(1, 1.0, 6).is_err());
        assert!(NormalGrid::graded(8, 1.0, 1.0).is_err());
        assert!(NormalGrid::graded(8, 1.0, 0.5).is_err());
        let cfg = GridConfig { points_per_dim: 6, ..GridConfig::default() };
        assert!(make_grids(&cfg).is_err());
    }

    #[test]
    fn refined_grid_keeps_spread() {
        let cfg = GridConfig::default();
        let r = cfg.refined();
        let a = cfg.ratio.powi(cfg.normal_count as i32 - 1);
        let b = r.ratio.powi(r.normal_count as i32 - 1);
        assert!((a / b - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mode_fields() {
        let g = Arc::new(TangentialGrid::new(1, 2.0 * PI, 8).unwrap());
        let f = BoundaryField::mode(g.clone(), &[2]).unwrap();
        assert_abs_diff_eq!(f.samples[1].re, (2.0 * 2.0 * PI / 8.0).cos(), epsilon = 1e-14);
        assert!(BoundaryField::mode(g, &[4]).is_err());
    }

    proptest! {
        #[test]
        fn bracket_monotone_and_bounded(a in 0.0f64..1e3, b in 0.0f64..1e3, m in 0.0f64..1e3, dm in 0.0f64..10.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(bracket(&[lo], Some(c(m, 0.0))) <= bracket(&[hi], Some(c(m, 0.0))));
            prop_assert!(bracket(&[lo], Some(c(m, 0.0))) <= bracket(&[lo], Some(c(0.0, m + dm))));
            let v = bracket(&[a], Some(c(m, 0.0)));
            prop_assert!(v >= 1.0);
            prop_assert!(v >= 1f64.max(a).max(m) / 3f64.sqrt());
        }

        #[test]
        fn graded_weights_sum(count in 2usize..400, x_max in 0.1f64..50.0, r in 1.001f64..1.3) {
            let g = NormalGrid::graded(count, x_max, r).unwrap();
            let s: f64 = g.weights().iter().sum();
            prop_assert!((s - x_max).abs() <= 1e-12 * x_max);
            prop_assert!(g.weights().iter().all(|w| *w > 0.0));
            prop_assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
        }
    }
}
