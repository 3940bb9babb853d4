//! Tensor-product central differences for complex-valued functions of several
//! real variables.

use num_complex::Complex64;

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Offsets (in units of the step) and weights of the order-`n` central stencil.
fn stencil(n: usize) -> Vec<(f64, f64)> {
    (0..=n)
        .map(|i| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            (n as f64 / 2.0 - i as f64, sign * binomial(n, i))
        })
        .collect()
}

/// Mixed partial derivative `prod_v d^{orders[v]}/dx_v^{orders[v]} f` at `x`.
///
/// Each variable gets its own step; order zero leaves the variable untouched.
pub fn mixed_central<F>(f: &F, x: &[f64], orders: &[usize], steps: &[f64]) -> Complex64
where
    F: Fn(&[f64]) -> Complex64 + ?Sized,
{
    debug_assert_eq!(x.len(), orders.len());
    debug_assert_eq!(x.len(), steps.len());
    let stencils: Vec<Vec<(f64, f64)>> = orders.iter().map(|&n| stencil(n)).collect();
    let mut scale = 1.0;
    for (n, h) in orders.iter().zip(steps) {
        scale *= h.powi(*n as i32);
    }
    let mut idx = vec![0usize; x.len()];
    let mut point = x.to_vec();
    let mut acc = Complex64::new(0.0, 0.0);
    loop {
        let mut w = 1.0;
        for v in 0..x.len() {
            let (off, c) = stencils[v][idx[v]];
            point[v] = x[v] + off * steps[v];
            w *= c;
        }
        acc += f(&point) * w;
        // odometer over the stencil product
        let mut v = 0;
        loop {
            if v == x.len() {
                return acc / scale;
            }
            idx[v] += 1;
            if idx[v] < stencils[v].len() {
                break;
            }
            idx[v] = 0;
            v += 1;
        }
    }
}

/// Stirling numbers of the second kind `S(m, j)`, `j = 0..=m`.
///
/// `(t d/dt)^m = sum_j S(m, j) t^j (d/dt)^j`.
pub fn stirling2_row(m: usize) -> Vec<f64> {
    let mut row = vec![1.0];
    for n in 1..=m {
        let mut next = vec![0.0; n + 1];
        for j in 1..=n {
            let prev_same = if j < row.len() { row[j] } else { 0.0 };
            next[j] = j as f64 * prev_same + row[j - 1];
        }
        row = next;
    }
    row
}

/// All multi-indices of the given length with entry sum at most `max_total`.
pub fn multi_indices(len: usize, max_total: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; len];
    fn rec(pos: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if pos == cur.len() {
            out.push(cur.clone());
            return;
        }
        for k in 0..=left {
            cur[pos] = k;
            rec(pos + 1, left - k, cur, out);
        }
        cur[pos] = 0;
    }
    rec(0, max_total, &mut cur, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_of_polynomial() {
        let f = |x: &[f64]| Complex64::new(x[0].powi(3) * x[1] * x[1], 0.0);
        let d = mixed_central(&f, &[1.5, 2.0], &[1, 2], &[1e-3, 1e-3]);
        // d/dx d2/dy2 = 3x^2 * 2
        assert!((d.re - 6.0 * 2.25).abs() < 1e-5, "{d}");
        let d0 = mixed_central(&f, &[1.5, 2.0], &[0, 0], &[1e-3, 1e-3]);
        assert!((d0.re - 1.5f64.powi(3) * 4.0).abs() < 1e-14);
    }

    #[test]
    fn fourth_derivative_of_exp() {
        let f = |x: &[f64]| Complex64::new((0.5 * x[0]).exp(), 0.0);
        let d = mixed_central(&f, &[0.3], &[4], &[1e-2]);
        let exact = 0.0625 * (0.15f64).exp();
        assert!((d.re - exact).abs() < 1e-5 * exact.max(1.0), "{d} vs {exact}");
    }

    #[test]
    fn stirling_rows() {
        assert_eq!(stirling2_row(0), vec![1.0]);
        assert_eq!(stirling2_row(3), vec![0.0, 1.0, 3.0, 1.0]);
        assert_eq!(stirling2_row(4), vec![0.0, 1.0, 7.0, 6.0, 1.0]);
    }

    #[test]
    fn multi_index_count() {
        // C(len + N, N)
        assert_eq!(multi_indices(3, 2).len(), 10);
        assert_eq!(multi_indices(1, 4).len(), 5);
        assert_eq!(multi_indices(0, 4), vec![Vec::<usize>::new()]);
    }
}
