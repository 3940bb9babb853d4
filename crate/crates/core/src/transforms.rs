//! FFT-based application of Fourier multipliers and Poisson operators, and the
//! dyadic Littlewood–Paley decomposition.
//!
//! Transforms are unitary with physical weights:
//! `g^(xi) = (L/N)^d sum_x g(x) e^{-i x.xi}` and
//! `g(x) = L^{-d} sum_xi g^(xi) e^{i x.xi}`, so that
//! `sum |g|^2 (L/N)^d = L^{-d} sum |g^|^2`.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{BoundaryField, HalfSpaceField, NormalGrid, TangentialGrid};
use crate::symbols::{MultiplierSymbol, SymbolKernel};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft_in_place(grid: &TangentialGrid, data: &mut [Complex64], direction: FftDirection) {
    let n = grid.points_per_dim();
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft(n, direction));
    match grid.dim() {
        1 => fft.process(data),
        _ => {
            // rows (last axis, contiguous) then columns
            fft.process(data);
            let mut column = vec![Complex64::new(0.0, 0.0); n];
            for c in 0..n {
                for r in 0..n {
                    column[r] = data[r * n + c];
                }
                fft.process(&mut column);
                for r in 0..n {
                    data[r * n + c] = column[r];
                }
            }
        }
    }
}

/// Physical-space samples to Fourier coefficients (FFT order).
pub fn forward(grid: &TangentialGrid, samples: &[Complex64]) -> Vec<Complex64> {
    let mut data = samples.to_vec();
    fft_in_place(grid, &mut data, FftDirection::Forward);
    let w = grid.cell_measure();
    data.iter_mut().for_each(|z| *z *= w);
    data
}

/// Fourier coefficients back to physical samples.
pub fn inverse(grid: &TangentialGrid, coeffs: &[Complex64]) -> Vec<Complex64> {
    let mut data = coeffs.to_vec();
    fft_in_place(grid, &mut data, FftDirection::Inverse);
    let w = 1.0 / grid.measure();
    data.iter_mut().for_each(|z| *z *= w);
    data
}

/// `sum |g^|^2 / L^d`, the squared L^2 norm computed on the Fourier side.
pub fn spectral_energy(grid: &TangentialGrid, coeffs: &[Complex64]) -> f64 {
    coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>() / grid.measure()
}

fn finite(v: Complex64, name: &str, xi: &[f64]) -> Result<Complex64> {
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else {
        Err(Error::Domain(format!("{name} is not finite at xi' = {xi:?}")))
    }
}

/// The symbol sampled at every grid frequency (FFT order).
pub fn multiplier_values(a: &MultiplierSymbol, mu: Option<Complex64>, grid: &TangentialGrid) -> Result<Vec<Complex64>> {
    a.sector.check(mu)?;
    grid.frequencies().map(|xi| finite(a.raw(xi, mu), &a.name, xi)).collect()
}

/// `a(D) g` on the discrete torus.
pub fn apply_multiplier(a: &MultiplierSymbol, mu: Option<Complex64>, g: &BoundaryField) -> Result<BoundaryField> {
    let values = multiplier_values(a, mu, &g.grid)?;
    Ok(apply_diagonal(&values, g))
}

/// Multiplies the Fourier coefficients of `g` by precomputed values.
pub fn apply_diagonal(values: &[Complex64], g: &BoundaryField) -> BoundaryField {
    let mut hat = forward(&g.grid, &g.samples);
    hat.iter_mut().zip(values).for_each(|(z, a)| *z *= a);
    BoundaryField { grid: g.grid.clone(), samples: inverse(&g.grid, &hat) }
}

/// Applies `a(D)` to every normal slice of `u`.
pub fn apply_multiplier_slices(a: &MultiplierSymbol, mu: Option<Complex64>, u: &HalfSpaceField) -> Result<HalfSpaceField> {
    let values = multiplier_values(a, mu, &u.tangential)?;
    let grid = &u.tangential;
    let nt = grid.len();
    let mut samples = u.samples.clone();
    samples.par_chunks_mut(nt).for_each(|slice| {
        let mut hat = forward(grid, slice);
        hat.iter_mut().zip(&values).for_each(|(z, a)| *z *= a);
        slice.copy_from_slice(&inverse(grid, &hat));
    });
    Ok(HalfSpaceField { tangential: u.tangential.clone(), normal: u.normal.clone(), samples })
}

/// Builds a half-space field slice by slice from per-node Fourier coefficients.
pub(crate) fn synthesize<F>(tangential: &Arc<TangentialGrid>, normal: &Arc<NormalGrid>, coeff: F) -> Result<HalfSpaceField>
where
    F: Fn(usize, f64) -> Result<Complex64> + Sync,
{
    let nt = tangential.len();
    let slices: Result<Vec<Vec<Complex64>>> = normal
        .nodes()
        .par_iter()
        .map(|&xn| {
            let hat: Result<Vec<Complex64>> = (0..nt).map(|i| coeff(i, xn)).collect();
            Ok(inverse(tangential, &hat?))
        })
        .collect();
    let samples = slices?.concat();
    HalfSpaceField::new(tangential.clone(), normal.clone(), samples)
}

/// `(K_mu g)(x', x_j) = F^{-1}[k(xi', mu; x_j) g^(xi')]` at every normal node.
pub fn apply_poisson(
    k: &SymbolKernel,
    mu: Option<Complex64>,
    g: &BoundaryField,
    normal: &Arc<NormalGrid>,
) -> Result<HalfSpaceField> {
    k.sector.check(mu)?;
    let grid = &g.grid;
    let hat = forward(grid, &g.samples);
    synthesize(grid, normal, |i, xn| {
        let xi = grid.frequency(i);
        if hat[i] == Complex64::new(0.0, 0.0) {
            return Ok(hat[i]);
        }
        Ok(finite(k.raw(xi, mu, xn), &k.name, xi)? * hat[i])
    })
}

fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
}

/// Dyadic partition `psi_0 = phi`, `psi_j = phi(2^{-j} .) - phi(2^{-j+1} .)`
/// with `phi = 1` on `|xi| <= 1`, `0` on `|xi| >= 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LPPartition {
    /// Highest block index `J`; blocks `0..=J` cover every grid frequency.
    pub top: usize,
}

impl LPPartition {
    /// Enough blocks for the largest frequency magnitude on `grid`.
    pub fn for_grid(grid: &TangentialGrid) -> Self {
        let max = grid.nyquist() * (grid.dim() as f64).sqrt();
        let top = if max <= 1.0 { 0 } else { max.log2().ceil() as usize };
        Self { top }
    }

    pub fn len(&self) -> usize {
        self.top + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The cutoff profile: quintic smoothstep in `log2 |xi|`.
    pub fn phi(r: f64) -> f64 {
        if r <= 1.0 {
            1.0
        } else if r >= 2.0 {
            0.0
        } else {
            1.0 - smoothstep(r.log2())
        }
    }

    pub fn psi(&self, j: usize, r: f64) -> f64 {
        if j == 0 {
            Self::phi(r)
        } else {
            let s = 2f64.powi(-(j as i32));
            Self::phi(s * r) - Self::phi(2.0 * s * r)
        }
    }
}

/// Blocks `psi_j(D) g`, `j = 0..=J`.
pub fn lp_blocks(g: &BoundaryField, part: &LPPartition) -> Vec<BoundaryField> {
    let grid = &g.grid;
    let hat = forward(grid, &g.samples);
    (0..part.len())
        .into_par_iter()
        .map(|j| {
            let block: Vec<Complex64> = hat
                .iter()
                .enumerate()
                .map(|(i, z)| z * part.psi(j, grid.frequency_norm(i)))
                .collect();
            BoundaryField { grid: grid.clone(), samples: inverse(grid, &block) }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Field, GridConfig, Sector};
    use crate::symbols::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn grid(dim: usize, n: usize) -> Arc<TangentialGrid> {
        Arc::new(TangentialGrid::new(dim, 2.0 * std::f64::consts::PI, n).unwrap())
    }

    fn random_field(g: &Arc<TangentialGrid>, seed: u64) -> BoundaryField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = (0..g.len()).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        BoundaryField::new(g.clone(), s).unwrap()
    }

    fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    fn l2(g: &BoundaryField) -> f64 {
        (g.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() * g.grid.cell_measure()).sqrt()
    }

    #[test]
    fn plancherel_and_roundtrip() {
        for (dim, n) in [(1, 64), (2, 16)] {
            let g = grid(dim, n);
            let f = random_field(&g, 7);
            let hat = forward(&g, &f.samples);
            let e = spectral_energy(&g, &hat).sqrt();
            assert!((e / l2(&f) - 1.0).abs() < 1e-12);
            assert!(max_diff(&inverse(&g, &hat), &f.samples) < 1e-12);
        }
    }

    #[test]
    fn constant_has_single_coefficient() {
        let g = grid(1, 8);
        let one = BoundaryField::from_fn(g.clone(), |_| c(1.0));
        let hat = forward(&g, &one.samples);
        assert!((hat[0] - c(2.0 * std::f64::consts::PI)).norm() < 1e-12);
        assert!(hat[1..].iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn identity_and_shift() {
        let g = grid(1, 32);
        let f = random_field(&g, 3);
        let same = apply_multiplier(&constant_symbol(c(1.0)), None, &f).unwrap();
        assert!(max_diff(&same.samples, &f.samples) < 1e-13);
        let h = g.length() / 32.0 * 5.0;
        let shifted = apply_multiplier(&shift_symbol(vec![h]), None, &f).unwrap();
        let expect: Vec<Complex64> = (0..32).map(|i| f.samples[(i + 5) % 32]).collect();
        assert!(max_diff(&shifted.samples, &expect) < 1e-12);
    }

    #[test]
    fn group_law() {
        let g = grid(2, 16);
        let f = random_field(&g, 11);
        let up = apply_multiplier(&bessel_symbol(1.5), None, &f).unwrap();
        let back = apply_multiplier(&bessel_symbol(-1.5), None, &up).unwrap();
        assert!(max_diff(&back.samples, &f.samples) < 1e-12);
    }

    #[test]
    fn contraction_does_not_grow_norm() {
        let g = grid(1, 64);
        let f = random_field(&g, 5);
        let out = apply_multiplier(&bessel_symbol(-0.7), None, &f).unwrap();
        assert!(l2(&out) <= l2(&f) * (1.0 + 1e-14));
    }

    #[test]
    fn sector_is_checked() {
        let g = grid(1, 8);
        let f = random_field(&g, 1);
        let b = heat_dynbc_b(DEFAULT_THETA);
        assert!(matches!(apply_multiplier(&b, Some(Complex64::new(0.0, 1.0)), &f), Err(Error::Domain(_))));
        assert!(apply_multiplier(&b, None, &f).is_err());
    }

    #[test]
    fn poisson_single_mode_and_constant() {
        let (t, nrm) = crate::grid::make_grids(&GridConfig { points_per_dim: 16, normal_count: 32, ..GridConfig::default() }).unwrap();
        let k = heat_kernel(DEFAULT_THETA);
        let mu = Some(c(1.0));
        let wave = BoundaryField::mode(t.clone(), &[3]).unwrap();
        let u = apply_poisson(&k, mu, &wave, &nrm).unwrap();
        for (j, &xn) in nrm.nodes().iter().enumerate() {
            let kv = k.raw(&[3.0], mu, xn);
            let expect: Vec<Complex64> = wave.samples.iter().map(|z| z * kv).collect();
            assert!(max_diff(u.slice(j), &expect) < 1e-13);
        }
        let one = BoundaryField::from_fn(t.clone(), |_| c(1.0));
        let u = apply_poisson(&k, mu, &one, &nrm).unwrap();
        for (j, &xn) in nrm.nodes().iter().enumerate() {
            assert!(u.slice(j).iter().all(|z| (z - c((-2f64.sqrt() * xn).exp())).norm() < 1e-13));
        }
        let zero = apply_poisson(&k, mu, &BoundaryField::zeros(t), &nrm).unwrap();
        assert!(zero.samples.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn poisson_commutes_with_multipliers() {
        let (t, nrm) = crate::grid::make_grids(&GridConfig { points_per_dim: 32, normal_count: 24, ..GridConfig::default() }).unwrap();
        let k = heat_kernel(DEFAULT_THETA);
        let a = dtn_symbol(DEFAULT_THETA);
        let mu = Some(Complex64::from_polar(2.0, 0.3));
        let f = random_field(&t, 9);
        let left = apply_poisson(&k, mu, &apply_multiplier(&a, mu, &f).unwrap(), &nrm).unwrap();
        let right = apply_multiplier_slices(&a, mu, &apply_poisson(&k, mu, &f, &nrm).unwrap()).unwrap();
        let scale = left.samples.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(max_diff(&left.samples, &right.samples) < 1e-12 * scale);
    }

    #[test]
    fn partition_of_unity_on_grid() {
        for (dim, n) in [(1, 256), (2, 32)] {
            let g = grid(dim, n);
            let part = LPPartition::for_grid(&g);
            for i in 0..g.len() {
                let r = g.frequency_norm(i);
                let s: f64 = (0..part.len()).map(|j| part.psi(j, r)).sum();
                assert!((s - 1.0).abs() < 1e-14, "{r} {s}");
            }
            let f = random_field(&g, 21);
            let blocks = lp_blocks(&f, &part);
            let mut sum = vec![Complex64::new(0.0, 0.0); g.len()];
            for b in &blocks {
                sum.iter_mut().zip(&b.samples).for_each(|(a, z)| *a += z);
            }
            assert!(max_diff(&sum, &f.samples) < 1e-12);
        }
    }

    #[test]
    fn single_mode_blocks() {
        let g = grid(1, 64);
        let part = LPPartition::for_grid(&g);
        let zero_mode = BoundaryField::mode(g.clone(), &[0]).unwrap();
        let blocks = lp_blocks(&zero_mode, &part);
        assert!(blocks[1..].iter().all(|b| l2(b) < 1e-13));
        let m4 = BoundaryField::mode(g.clone(), &[4]).unwrap();
        let blocks = lp_blocks(&m4, &part);
        for (j, b) in blocks.iter().enumerate() {
            if j == 2 {
                assert!(max_diff(&b.samples, &m4.samples) < 1e-13);
            } else {
                assert!(l2(b) < 1e-13);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn operations_are_linear(seed in 0u64..1000, re in -3.0f64..3.0, im in -3.0f64..3.0) {
            let (t, nrm) = crate::grid::make_grids(&GridConfig { points_per_dim: 16, normal_count: 8, ..GridConfig::default() }).unwrap();
            let f = random_field(&t, seed);
            let h = random_field(&t, seed + 1);
            let z = Complex64::new(re, im);
            let comb = match Field::linear_combination(&[c(1.0), z], &[&Field::from(f.clone()), &Field::from(h.clone())]).unwrap() {
                Field::Boundary(b) => b,
                _ => unreachable!(),
            };
            let a = dtn_symbol(DEFAULT_THETA);
            let mu = Some(c(1.5));
            let lhs = apply_multiplier(&a, mu, &comb).unwrap();
            let (af, ah) = (apply_multiplier(&a, mu, &f).unwrap(), apply_multiplier(&a, mu, &h).unwrap());
            let rhs: Vec<Complex64> = af.samples.iter().zip(&ah.samples).map(|(x, y)| x + z * y).collect();
            prop_assert!(max_diff(&lhs.samples, &rhs) < 1e-11);

            let k = heat_kernel(DEFAULT_THETA);
            let lhs = apply_poisson(&k, mu, &comb, &nrm).unwrap();
            let (pf, ph) = (apply_poisson(&k, mu, &f, &nrm).unwrap(), apply_poisson(&k, mu, &h, &nrm).unwrap());
            let rhs: Vec<Complex64> = pf.samples.iter().zip(&ph.samples).map(|(x, y)| x + z * y).collect();
            prop_assert!(max_diff(&lhs.samples, &rhs) < 1e-11);

            let part = LPPartition::for_grid(&t);
            let lb = lp_blocks(&comb, &part);
            let (bf, bh) = (lp_blocks(&f, &part), lp_blocks(&h, &part));
            for j in 0..part.len() {
                let rhs: Vec<Complex64> = bf[j].samples.iter().zip(&bh[j].samples).map(|(x, y)| x + z * y).collect();
                prop_assert!(max_diff(&lb[j].samples, &rhs) < 1e-11);
            }
        }
    }

    #[test]
    fn empty_sector_kernel_without_parameter() {
        let g = grid(1, 8);
        let k = zero_kernel(Sector::Empty);
        let nrm = Arc::new(NormalGrid::graded(4, 1.0, 1.1).unwrap());
        assert!(apply_poisson(&k, None, &random_field(&g, 2), &nrm).is_ok());
    }
}
