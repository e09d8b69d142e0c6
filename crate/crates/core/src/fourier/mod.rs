//! Cosine Fourier basis on a box-shaped search domain and the coefficient
//! arithmetic built on it.
//!
//! The basis functions are
//!
//! ```text
//! F_k(s) = (1 / h_k) * prod_i cos(k_i * pi * s_i / L_i)
//! ```
//!
//! with `h_k` chosen so that the family is orthonormal in L2 over
//! `[0, L_1] x ... x [0, L_nu]`. Multi-indices are enumerated in row-major
//! order over `(k_1, ..., k_nu)`: the last component varies fastest. That
//! ordering is part of every serialized coefficient vector.

mod coefficients;
mod grid;
mod trajectory;

pub use coefficients::CoefficientVector;
pub use grid::SpatialGrid;
pub use trajectory::{recursive_coeff_update, RecursionWindow, TrajectorySegment};

use std::f64::consts::PI;

use crate::error::{check_dim, usage, Result};

/// Box domain `[0, L_1] x ... x [0, L_nu]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchDomain {
    bounds: Vec<f64>,
}

impl SearchDomain {
    pub fn new(bounds: Vec<f64>) -> Result<Self> {
        if bounds.is_empty() {
            return usage("search domain needs at least one dimension");
        }
        if bounds.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return usage(format!("domain lengths must be positive, got {bounds:?}"));
        }
        Ok(Self { bounds })
    }

    /// Unit hypercube of dimension `nu`.
    pub fn unit(nu: usize) -> Self {
        Self {
            bounds: vec![1.0; nu.max(1)],
        }
    }

    pub fn nu(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    pub fn volume(&self) -> f64 {
        self.bounds.iter().product()
    }

    pub fn contains(&self, s: &[f64]) -> bool {
        s.len() == self.nu() && s.iter().zip(&self.bounds).all(|(x, l)| *x >= 0.0 && x <= l)
    }

    /// `(1/h_k)` for the orthonormal convention.
    pub fn inverse_norm(&self, k: &[usize]) -> f64 {
        k.iter()
            .zip(&self.bounds)
            .map(|(&ki, &l)| if ki == 0 { 1.0 / l.sqrt() } else { (2.0 / l).sqrt() })
            .product()
    }
}

/// All multi-indices `k` with `0 <= k_i <= K`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexSet {
    nu: usize,
    order: usize,
    flat: Vec<usize>,
}

impl IndexSet {
    pub fn new(nu: usize, order: usize) -> Self {
        let per_dim = order + 1;
        let len = per_dim.pow(nu as u32);
        let mut flat = Vec::with_capacity(len * nu);
        for i in 0..len {
            let mut rem = i;
            let mut k = vec![0usize; nu];
            for d in (0..nu).rev() {
                k[d] = rem % per_dim;
                rem /= per_dim;
            }
            flat.extend_from_slice(&k);
        }
        Self { nu, order, flat }
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    /// Highest order `K` along each dimension.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.flat.len() / self.nu
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    pub fn get(&self, i: usize) -> &[usize] {
        &self.flat[i * self.nu..(i + 1) * self.nu]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> + '_ {
        self.flat.chunks_exact(self.nu)
    }

    /// Position of `k` in the row-major enumeration.
    pub fn position(&self, k: &[usize]) -> Option<usize> {
        if k.len() != self.nu || k.iter().any(|&ki| ki > self.order) {
            return None;
        }
        Some(k.iter().fold(0, |acc, &ki| acc * (self.order + 1) + ki))
    }
}

/// Single basis function `F_k(s)`.
pub fn basis_eval(domain: &SearchDomain, k: &[usize], s: &[f64]) -> Result<f64> {
    check_dim("basis index", domain.nu(), k.len())?;
    check_dim("basis point", domain.nu(), s.len())?;
    let prod: f64 = k
        .iter()
        .zip(s)
        .zip(domain.bounds())
        .map(|((&ki, &si), &l)| (ki as f64 * PI * si / l).cos())
        .product();
    Ok(domain.inverse_norm(k) * prod)
}

/// Analytic gradient of [`basis_eval`] with respect to `s`.
pub fn basis_grad(domain: &SearchDomain, k: &[usize], s: &[f64]) -> Result<Vec<f64>> {
    check_dim("basis index", domain.nu(), k.len())?;
    check_dim("basis point", domain.nu(), s.len())?;
    let norm = domain.inverse_norm(k);
    let nu = domain.nu();
    let l = domain.bounds();
    let mut grad = vec![norm; nu];
    for (d, g) in grad.iter_mut().enumerate() {
        for j in 0..nu {
            let w = k[j] as f64 * PI / l[j];
            if j == d {
                *g *= -w * (w * s[j]).sin();
            } else {
                *g *= (w * s[j]).cos();
            }
        }
    }
    Ok(grad)
}

/// Sobolev-type weight `(1 + |k|^2)^(-(nu+1)/2)`.
pub fn lambda_weight(k: &[usize], nu: usize) -> f64 {
    let norm2: f64 = k.iter().map(|&ki| (ki * ki) as f64).sum();
    (1.0 + norm2).powf(-(nu as f64 + 1.0) / 2.0)
}

/// `sum_k Lambda_k (c_k - phi_k)^2`.
pub fn ergodic_metric(c: &[f64], phi: &[f64], idx: &IndexSet) -> Result<f64> {
    check_dim("coefficient vector", idx.len(), c.len())?;
    check_dim("coefficient vector", idx.len(), phi.len())?;
    Ok(idx
        .iter()
        .zip(c.iter().zip(phi))
        .map(|(k, (a, b))| lambda_weight(k, idx.nu()) * (a - b).powi(2))
        .sum())
}

/// Precomputed basis family for one domain and order.
///
/// This is the hot-path object: evaluating all `(K+1)^nu` functions at a
/// point costs `O(nu * K)` trigonometric calls plus one multiply per basis
/// function.
#[derive(Debug, Clone)]
pub struct FourierBasis {
    domain: SearchDomain,
    index: IndexSet,
    inv_norm: Vec<f64>,
    lambda: Vec<f64>,
    wavenumbers: Vec<f64>,
}

impl FourierBasis {
    pub fn new(domain: SearchDomain, order: usize) -> Self {
        let index = IndexSet::new(domain.nu(), order);
        let inv_norm = index.iter().map(|k| domain.inverse_norm(k)).collect();
        let lambda = index.iter().map(|k| lambda_weight(k, domain.nu())).collect();
        let wavenumbers = domain.bounds().iter().map(|l| PI / l).collect();
        Self {
            domain,
            index,
            inv_norm,
            lambda,
            wavenumbers,
        }
    }

    pub fn domain(&self) -> &SearchDomain {
        &self.domain
    }

    pub fn index(&self) -> &IndexSet {
        &self.index
    }

    pub fn nu(&self) -> usize {
        self.domain.nu()
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// Per-dimension tables `cos(k w s)` and `sin(k w s)` for `k = 0..=K`,
    /// laid out as `[d * (K+1) + k]`.
    fn trig_tables(&self, s: &[f64], cos: &mut [f64], sin: &mut [f64]) {
        let per = self.index.order() + 1;
        for (d, (&sd, &w)) in s.iter().zip(&self.wavenumbers).enumerate() {
            let (s1, c1) = (w * sd).sin_cos();
            let c = &mut cos[d * per..(d + 1) * per];
            let sn = &mut sin[d * per..(d + 1) * per];
            c[0] = 1.0;
            sn[0] = 0.0;
            if per > 1 {
                c[1] = c1;
                sn[1] = s1;
            }
            // Chebyshev recurrence; stable for the orders used here.
            for k in 2..per {
                c[k] = 2.0 * c1 * c[k - 1] - c[k - 2];
                sn[k] = 2.0 * c1 * sn[k - 1] - sn[k - 2];
            }
        }
    }

    /// Writes `F_k(s)` for every index into `out`.
    pub fn eval_all(&self, s: &[f64], out: &mut [f64]) {
        debug_assert_eq!(s.len(), self.nu());
        debug_assert_eq!(out.len(), self.len());
        let per = self.index.order() + 1;
        let nu = self.nu();
        let mut cos = vec![0.0; nu * per];
        let mut sin = vec![0.0; nu * per];
        self.trig_tables(s, &mut cos, &mut sin);
        // Expand the tensor product in place, back to front.
        out[0] = 1.0;
        let mut len = 1;
        for d in 0..nu {
            let c = &cos[d * per..(d + 1) * per];
            for i in (0..len).rev() {
                let p = out[i];
                for k in (0..per).rev() {
                    out[i * per + k] = p * c[k];
                }
            }
            len *= per;
        }
        for (o, n) in out.iter_mut().zip(&self.inv_norm) {
            *o *= n;
        }
    }

    /// Writes `F_k(s)` into `values` and `dF_k/ds` into `grads`
    /// (`grads[i * nu + d]`).
    pub fn eval_with_grad(&self, s: &[f64], values: &mut [f64], grads: &mut [f64]) {
        let per = self.index.order() + 1;
        let nu = self.nu();
        debug_assert_eq!(grads.len(), self.len() * nu);
        let mut cos = vec![0.0; nu * per];
        let mut sin = vec![0.0; nu * per];
        self.trig_tables(s, &mut cos, &mut sin);
        for (i, k) in self.index.iter().enumerate() {
            let norm = self.inv_norm[i];
            let mut v = norm;
            for (d, &kd) in k.iter().enumerate() {
                v *= cos[d * per + kd];
            }
            values[i] = v;
            for d in 0..nu {
                let mut g = norm;
                for (j, &kj) in k.iter().enumerate() {
                    if j == d {
                        g *= -(kj as f64) * self.wavenumbers[j] * sin[j * per + kj];
                    } else {
                        g *= cos[j * per + kj];
                    }
                }
                grads[i * nu + d] = g;
            }
        }
    }

    /// `sum_k weights[k] * dF_k/ds` written into `out` (length `nu`).
    pub fn weighted_grad(&self, s: &[f64], weights: &[f64], out: &mut [f64]) {
        let per = self.index.order() + 1;
        let nu = self.nu();
        debug_assert_eq!(weights.len(), self.len());
        let mut cos = vec![0.0; nu * per];
        let mut sin = vec![0.0; nu * per];
        self.trig_tables(s, &mut cos, &mut sin);
        // Derivative factors -k w sin(k w s), reusing the sine table.
        for d in 0..nu {
            for k in 0..per {
                sin[d * per + k] *= -(k as f64) * self.wavenumbers[d];
            }
        }
        out.fill(0.0);
        let mut prefix = vec![1.0; nu + 1];
        let mut suffix = vec![1.0; nu + 1];
        for (i, k) in self.index.iter().enumerate() {
            let w = weights[i] * self.inv_norm[i];
            if w == 0.0 {
                continue;
            }
            for d in 0..nu {
                prefix[d + 1] = prefix[d] * cos[d * per + k[d]];
            }
            for d in (0..nu).rev() {
                suffix[d] = suffix[d + 1] * cos[d * per + k[d]];
            }
            for d in 0..nu {
                out[d] += w * prefix[d] * suffix[d + 1] * sin[d * per + k[d]];
            }
        }
    }

    pub fn eval_vec(&self, s: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.eval_all(s, &mut out);
        out
    }

    /// `sum_k Lambda_k (c_k - phi_k)^2`.
    pub fn ergodic_metric(&self, c: &[f64], phi: &[f64]) -> f64 {
        debug_assert_eq!(c.len(), self.len());
        self.lambda
            .iter()
            .zip(c.iter().zip(phi))
            .map(|(l, (a, b))| l * (a - b) * (a - b))
            .sum()
    }

    /// Fourier coefficients of a normalized density by midpoint quadrature.
    pub fn distribution_coeffs(&self, grid: &SpatialGrid) -> Result<CoefficientVector> {
        if grid.domain() != &self.domain {
            return usage("grid domain does not match basis domain");
        }
        if !grid.is_normalized() {
            return usage("distribution grid must be normalized before projection");
        }
        let vol = grid.cell_volume();
        let mut phi = vec![0.0; self.len()];
        let mut f = vec![0.0; self.len()];
        let mut center = vec![0.0; self.nu()];
        for (cell, &v) in grid.values().iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            grid.cell_center_into(cell, &mut center);
            self.eval_all(&center, &mut f);
            let w = v * vol;
            for (p, fk) in phi.iter_mut().zip(&f) {
                *p += w * fk;
            }
        }
        Ok(CoefficientVector::new(phi))
    }

    /// Time-averaged coefficients of `seg` over `[t0erg, horizon_end]`,
    /// trapezoidal in time.
    pub fn trajectory_coeffs(
        &self,
        seg: &TrajectorySegment,
        t0erg: f64,
        horizon_end: f64,
    ) -> Result<CoefficientVector> {
        let span = horizon_end - t0erg;
        if span <= 0.0 {
            return usage("coefficient window must have positive length");
        }
        let mut acc = self.integrate_segment(seg, t0erg, horizon_end)?;
        acc.iter_mut().for_each(|a| *a /= span);
        Ok(CoefficientVector::new(acc))
    }

    /// Unnormalized `int_a^b F_k(x(t)) dt` over a sampled segment.
    ///
    /// Samples are combined with the trapezoid rule; partial intervals at the
    /// window edges use linear interpolation of the basis values.
    pub fn integrate_segment(&self, seg: &TrajectorySegment, a: f64, b: f64) -> Result<Vec<f64>> {
        check_dim("trajectory point", self.nu(), seg.dim())?;
        let times = seg.times();
        let tol = 1e-9 * (1.0 + a.abs().max(b.abs()));
        if b < a {
            return usage("integration window reversed");
        }
        if times[0] > a + tol || times[times.len() - 1] < b - tol {
            return usage(format!(
                "segment [{}, {}] does not cover window [{a}, {b}]",
                times[0],
                times[times.len() - 1]
            ));
        }
        let n = self.len();
        let mut acc = vec![0.0; n];
        if b - a <= 0.0 {
            return Ok(acc);
        }
        let mut f0 = vec![0.0; n];
        let mut f1 = vec![0.0; n];
        self.eval_all(seg.state(0), &mut f0);
        for j in 0..times.len() - 1 {
            let (t0, t1) = (times[j], times[j + 1]);
            self.eval_all(seg.state(j + 1), &mut f1);
            let lo = t0.max(a);
            let hi = t1.min(b);
            if hi > lo {
                let h = t1 - t0;
                // Linear interpolation weights of the clipped endpoints.
                let (wl, wh) = ((lo - t0) / h, (hi - t0) / h);
                let half = 0.5 * (hi - lo);
                for k in 0..n {
                    let d = f1[k] - f0[k];
                    let fl = f0[k] + wl * d;
                    let fh = f0[k] + wh * d;
                    acc[k] += half * (fl + fh);
                }
            }
            std::mem::swap(&mut f0, &mut f1);
        }
        Ok(acc)
    }

    /// Weighted synthesis `sum_k Lambda_k c_k F_k(x)` on a cell-centered grid.
    ///
    /// The result is a raw field: truncated series can ring below zero.
    pub fn reconstruct(&self, c: &[f64], cells_per_dim: &[usize]) -> Result<SpatialGrid> {
        check_dim("coefficient vector", self.len(), c.len())?;
        let weighted: Vec<f64> = c.iter().zip(&self.lambda).map(|(a, l)| a * l).collect();
        let mut f = vec![0.0; self.len()];
        SpatialGrid::from_fn(self.domain.clone(), cells_per_dim.to_vec(), |s| {
            self.eval_all(s, &mut f);
            f.iter().zip(&weighted).map(|(a, b)| a * b).sum()
        })
    }
}

/// Free-function form of [`FourierBasis::distribution_coeffs`].
pub fn distribution_coeffs(grid: &SpatialGrid, order: usize) -> Result<CoefficientVector> {
    FourierBasis::new(grid.domain().clone(), order).distribution_coeffs(grid)
}

/// Free-function form of [`FourierBasis::reconstruct`].
pub fn reconstruct_statistics(
    c: &[f64],
    basis: &FourierBasis,
    cells_per_dim: &[usize],
) -> Result<SpatialGrid> {
    basis.reconstruct(c, cells_per_dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn midpoint_integral(domain: &SearchDomain, n: usize, f: impl Fn(&[f64]) -> f64) -> f64 {
        let grid = SpatialGrid::from_fn(domain.clone(), vec![n; domain.nu()], f).unwrap();
        grid.values().iter().sum::<f64>() * grid.cell_volume()
    }

    #[test]
    fn normalizer_matches_quadrature() {
        // h_k from direct quadrature of the un-normalized squared basis.
        let dom = SearchDomain::unit(2);
        for k in [[0usize, 0], [1, 0], [2, 3]] {
            let h2 = midpoint_integral(&dom, 400, |s| {
                let p: f64 = (0..2).map(|i| (k[i] as f64 * PI * s[i]).cos()).product();
                p * p
            });
            assert_relative_eq!(dom.inverse_norm(&k), 1.0 / h2.sqrt(), max_relative = 1e-9);
        }
        assert_relative_eq!(basis_eval(&dom, &[0, 0], &[0.3, 0.7]).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(
            basis_eval(&dom, &[1, 0], &[0.0, 0.0]).unwrap(),
            std::f64::consts::SQRT_2,
            epsilon = 1e-12
        );
        let one = SearchDomain::unit(1);
        assert!(basis_eval(&one, &[1], &[0.5]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let dom = SearchDomain::unit(2);
        assert!(basis_eval(&dom, &[1], &[0.1, 0.2]).is_err());
        assert!(basis_grad(&dom, &[1, 1], &[0.1]).is_err());
    }

    #[test]
    fn gradient_edge_cases() {
        let dom = SearchDomain::unit(2);
        assert_eq!(basis_grad(&dom, &[0, 0], &[0.4, 0.9]).unwrap(), vec![0.0, 0.0]);
        let one = SearchDomain::unit(1);
        assert_eq!(basis_grad(&one, &[1], &[0.0]).unwrap()[0], 0.0);
        let s = [0.3, 0.6];
        let g = basis_grad(&dom, &[2, 1], &s).unwrap();
        let h = 1e-5;
        for d in 0..2 {
            let mut sp = s;
            let mut sm = s;
            sp[d] += h;
            sm[d] -= h;
            let fd = (basis_eval(&dom, &[2, 1], &sp).unwrap() - basis_eval(&dom, &[2, 1], &sm).unwrap())
                / (2.0 * h);
            assert_relative_eq!(g[d], fd, max_relative = 1e-6);
        }
    }

    #[test]
    fn lambda_values() {
        assert_eq!(lambda_weight(&[0, 0], 2), 1.0);
        assert_relative_eq!(lambda_weight(&[1, 0], 2), 0.353_553_390_593_273_8, epsilon = 1e-15);
        assert_relative_eq!(lambda_weight(&[3, 4], 2), 26f64.powf(-1.5), epsilon = 1e-15);
    }

    #[test]
    fn index_set_is_row_major() {
        let idx = IndexSet::new(2, 2);
        assert_eq!(idx.len(), 9);
        assert_eq!(idx.get(0), &[0, 0]);
        assert_eq!(idx.get(1), &[0, 1]);
        assert_eq!(idx.get(3), &[1, 0]);
        assert_eq!(idx.position(&[2, 1]), Some(7));
        assert_eq!(idx.position(&[3, 0]), None);
        assert_eq!(IndexSet::new(3, 4).len(), 125);
    }

    #[test]
    fn batched_evaluation_matches_single() {
        let dom = SearchDomain::new(vec![1.0, 2.5]).unwrap();
        let basis = FourierBasis::new(dom.clone(), 7);
        let s = [0.37, 1.91];
        let mut v = vec![0.0; basis.len()];
        let mut g = vec![0.0; basis.len() * 2];
        basis.eval_with_grad(&s, &mut v, &mut g);
        let fast = basis.eval_vec(&s);
        for (i, k) in basis.index().iter().enumerate() {
            let e = basis_eval(&dom, k, &s).unwrap();
            assert_relative_eq!(v[i], e, epsilon = 1e-12);
            assert_relative_eq!(fast[i], e, epsilon = 1e-12);
            let ge = basis_grad(&dom, k, &s).unwrap();
            assert_relative_eq!(g[2 * i], ge[0], epsilon = 1e-10);
            assert_relative_eq!(g[2 * i + 1], ge[1], epsilon = 1e-10);
        }
        let w: Vec<f64> = (0..basis.len()).map(|i| (i as f64 * 0.61).cos()).collect();
        let mut wg = [0.0; 2];
        basis.weighted_grad(&s, &w, &mut wg);
        for d in 0..2 {
            let naive: f64 = (0..basis.len()).map(|i| w[i] * g[2 * i + d]).sum();
            assert_relative_eq!(wg[d], naive, epsilon = 1e-9);
        }
    }

    #[test]
    fn metric_examples() {
        let idx = IndexSet::new(2, 3);
        let phi: Vec<f64> = (0..idx.len()).map(|i| (i as f64 * 0.37).sin()).collect();
        assert_eq!(ergodic_metric(&phi, &phi, &idx).unwrap(), 0.0);
        let mut c = phi.clone();
        c[0] += 1.0;
        assert_relative_eq!(ergodic_metric(&c, &phi, &idx).unwrap(), 1.0, epsilon = 1e-15);
        assert!(ergodic_metric(&c[1..], &phi, &idx).is_err());
    }

    #[test]
    fn basis_is_orthonormal() {
        let basis = FourierBasis::new(SearchDomain::new(vec![1.0, 2.0]).unwrap(), 5);
        let grid = SpatialGrid::uniform(basis.domain().clone(), vec![240, 240]).unwrap();
        let n = basis.len();
        let mut gram = vec![0.0; n * n];
        let mut f = vec![0.0; n];
        let mut s = [0.0; 2];
        for cell in 0..grid.len() {
            grid.cell_center_into(cell, &mut s);
            basis.eval_all(&s, &mut f);
            for i in 0..n {
                for j in i..n {
                    gram[i * n + j] += f[i] * f[j];
                }
            }
        }
        let vol = grid.cell_volume();
        for i in 0..n {
            for j in i..n {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((gram[i * n + j] * vol - expect).abs() < 1e-6, "({i},{j})");
            }
        }
    }

    #[test]
    fn uniform_density_projects_onto_constant() {
        let dom = SearchDomain::unit(2);
        let grid = SpatialGrid::uniform(dom.clone(), vec![50, 50]).unwrap();
        let phi = distribution_coeffs(&grid, 6).unwrap();
        assert_relative_eq!(phi[0], 1.0, epsilon = 1e-12);
        assert!(phi[1..].iter().all(|p| p.abs() < 1e-6));
        let raw = SpatialGrid::new(dom, vec![2, 2], vec![1.0; 4]).unwrap();
        let doubled = SpatialGrid::new(raw.domain().clone(), vec![2, 2], vec![2.0; 4]).unwrap();
        assert!(distribution_coeffs(&doubled, 2).is_err());
    }

    #[test]
    fn cell_delta_projects_to_basis_values() {
        let dom = SearchDomain::unit(2);
        let n = 100;
        let mut values = vec![0.0; n * n];
        let target = 37 * n + 61;
        values[target] = 1.0;
        let grid = SpatialGrid::new(dom, vec![n, n], values).unwrap().normalized().unwrap();
        let basis = FourierBasis::new(grid.domain().clone(), 4);
        let phi = basis.distribution_coeffs(&grid).unwrap();
        let f = basis.eval_vec(&grid.cell_center(target));
        for (a, b) in phi.iter().zip(&f) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    /// Unit box with a disk and a bar excluded.
    fn occluded(cells: usize) -> SpatialGrid {
        let dom = SearchDomain::unit(2);
        SpatialGrid::from_fn(dom, vec![cells, cells], |s| {
            let disk = (s[0] - 0.3).powi(2) + (s[1] - 0.65).powi(2) < 0.15f64.powi(2);
            let bar = (0.55..0.85).contains(&s[0]) && (0.15..0.35).contains(&s[1]);
            if disk || bar {
                0.0
            } else {
                1.0
            }
        })
        .unwrap()
        .normalized()
        .unwrap()
    }

    fn cosine(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    #[test]
    fn occluded_density_reconstructs() {
        let grid = occluded(80);
        let basis = FourierBasis::new(grid.domain().clone(), 20);
        let phi = basis.distribution_coeffs(&grid).unwrap();
        let rec = basis.reconstruct(&phi, &[80, 80]).unwrap();
        assert!(cosine(rec.values(), grid.values()) >= 0.9);
    }

    #[test]
    fn stationary_trajectory() {
        let dom = SearchDomain::unit(2);
        let s0 = [0.27, 0.71];
        let times: Vec<f64> = (0..=20).map(|j| j as f64 * 0.05).collect();
        let seg = TrajectorySegment::from_points(times, &vec![s0.to_vec(); 21]).unwrap();
        let basis = FourierBasis::new(dom, 30);
        let c = basis.trajectory_coeffs(&seg, 0.0, 1.0).unwrap();
        let f = basis.eval_vec(&s0);
        for (a, b) in c.iter().zip(&f) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_relative_eq!(c[0], 1.0, epsilon = 1e-14);
        let rec = basis.reconstruct(&c, &[50, 50]).unwrap();
        let peak = rec.cell_center(rec.argmax());
        assert!((peak[0] - s0[0]).abs() <= 0.02 + 1e-12);
        assert!((peak[1] - s0[1]).abs() <= 0.02 + 1e-12);
        assert!(basis.trajectory_coeffs(&seg, 0.0, 1.5).is_err());
    }

    fn semicircle(n: usize) -> TrajectorySegment {
        let times: Vec<f64> = (0..=n).map(|j| j as f64 / n as f64).collect();
        let pts: Vec<Vec<f64>> = times
            .iter()
            .map(|t| {
                let a = PI * t;
                vec![0.5 + 0.3 * a.cos(), 0.3 + 0.3 * a.sin()]
            })
            .collect();
        TrajectorySegment::from_points(times, &pts).unwrap()
    }

    #[test]
    fn semicircle_matches_dense_quadrature() {
        let basis = FourierBasis::new(SearchDomain::unit(2), 5);
        let c = basis.trajectory_coeffs(&semicircle(10_000), 0.0, 1.0).unwrap();
        // Composite Simpson on the analytic path, 100x denser.
        let n = 1_000_000;
        let mut acc = vec![0.0; basis.len()];
        let mut f = vec![0.0; basis.len()];
        for j in 0..=n {
            let a = PI * j as f64 / n as f64;
            basis.eval_all(&[0.5 + 0.3 * a.cos(), 0.3 + 0.3 * a.sin()], &mut f);
            let w = if j == 0 || j == n {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            for (s, v) in acc.iter_mut().zip(&f) {
                *s += w * v;
            }
        }
        for (a, b) in c.iter().zip(&acc) {
            assert!((a - b / (3.0 * n as f64)).abs() < 1e-6);
        }
    }

    #[test]
    fn higher_order_sharpens_reconstruction() {
        let dom = SearchDomain::unit(2);
        let seg = semicircle(2_000);
        let shape = [60, 60];
        let at = |k: usize| {
            let basis = FourierBasis::new(dom.clone(), k);
            let c = basis.trajectory_coeffs(&seg, 0.0, 1.0).unwrap();
            basis.reconstruct(&c, &shape).unwrap()
        };
        let reference = at(60);
        let dist = |g: &SpatialGrid| -> f64 {
            g.values()
                .iter()
                .zip(reference.values())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        let d: Vec<f64> = [5, 10, 30].iter().map(|&k| dist(&at(k))).collect();
        assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");
    }

    #[test]
    fn only_constant_coefficient_gives_flat_field() {
        let basis = FourierBasis::new(SearchDomain::unit(2), 3);
        let mut c = vec![0.0; basis.len()];
        c[0] = 2.0;
        let g = reconstruct_statistics(&c, &basis, &[7, 9]).unwrap();
        assert!(g.values().iter().all(|v| (v - 2.0).abs() < 1e-12));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(100))]
            #[test]
            fn gradient_matches_central_difference(
                k0 in 0usize..6, k1 in 0usize..6,
                s0 in 0.0f64..1.0, s1 in 0.0f64..2.0,
            ) {
                let dom = SearchDomain::new(vec![1.0, 2.0]).unwrap();
                let k = [k0, k1];
                let s = [s0, s1];
                let g = basis_grad(&dom, &k, &s).unwrap();
                let h = 1e-5;
                for d in 0..2 {
                    let (mut sp, mut sm) = (s, s);
                    sp[d] += h;
                    sm[d] -= h;
                    let fd = (basis_eval(&dom, &k, &sp).unwrap() - basis_eval(&dom, &k, &sm).unwrap()) / (2.0 * h);
                    let scale = g[d].abs().max(1e-3);
                    prop_assert!((g[d] - fd).abs() / scale < 1e-6, "k={k:?} s={s:?} {} vs {fd}", g[d]);
                }
            }

            #[test]
            fn metric_is_symmetric_and_matches_naive_sum(
                pairs in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 36),
            ) {
                let idx = IndexSet::new(2, 5);
                let c: Vec<f64> = pairs.iter().map(|p| p.0).collect();
                let phi: Vec<f64> = pairs.iter().map(|p| p.1).collect();
                let m = ergodic_metric(&c, &phi, &idx).unwrap();
                prop_assert_eq!(m, ergodic_metric(&phi, &c, &idx).unwrap());
                let mut naive = 0.0;
                for k1 in 0..6 {
                    for k2 in 0..6 {
                        let i = k1 * 6 + k2;
                        let w = (1.0 + (k1 * k1 + k2 * k2) as f64).powf(-1.5);
                        naive += w * (c[i] - phi[i]) * (c[i] - phi[i]);
                    }
                }
                prop_assert!((m - naive).abs() <= 1e-12 * naive.max(1.0));
                prop_assert!(m >= 0.0);
                prop_assert_eq!(m == 0.0, c == phi);
            }
        }
    }
}
