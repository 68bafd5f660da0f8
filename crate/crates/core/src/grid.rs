//! Uniform collocation grids on the 2π-periodic torus and their FFT plans.
//!
//! Coefficients are stored in FFT order: index `k` on an axis of `n` modes
//! carries frequency `k` for `k < n/2` and `k − n` for `k > n/2`. The Nyquist
//! slot `k = n/2` is kept at zero so that every stored field is an honest
//! trigonometric polynomial with `|ξ_i| < n/2`. Two-dimensional arrays are
//! row-major with axis 0 as the slow index.
//!
//! A field with coefficients `c_ξ` has values `f(x) = Σ c_ξ e^{iξ·x}`.

use std::fmt;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::{czero, Cplx, Real};

/// Whether a field is constrained to be real valued.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ScalarKind {
    Real,
    Complex,
}

/// Shape of a field: torus dimension, resolution, value width and kind.
///
/// The circumference of every axis is 2π.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GridSpec {
    pub dim: usize,
    pub modes_per_axis: usize,
    pub value_width: usize,
    pub scalar_kind: ScalarKind,
}

impl GridSpec {
    pub fn new(dim: usize, modes_per_axis: usize, value_width: usize, kind: ScalarKind) -> Result<Self> {
        validate_shape(dim, modes_per_axis)?;
        if value_width == 0 {
            return Err(Error::InvalidGrid("value width must be at least 1".into()));
        }
        Ok(Self { dim, modes_per_axis, value_width, scalar_kind: kind })
    }

    pub fn circumference() -> f64 {
        std::f64::consts::TAU
    }

    pub fn points(&self) -> usize {
        self.modes_per_axis.pow(self.dim as u32)
    }
}

fn validate_shape(dim: usize, n: usize) -> Result<()> {
    if !(dim == 1 || dim == 2) {
        return Err(Error::InvalidGrid(format!("dimension must be 1 or 2, got {dim}")));
    }
    if n < 8 || !n.is_power_of_two() {
        return Err(Error::InvalidGrid(format!(
            "modes per axis must be a power of two ≥ 8, got {n}"
        )));
    }
    Ok(())
}

/// Frequency carried by FFT slot `k` on an axis with `n` slots.
#[inline]
pub fn slot_frequency(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Slot holding frequency `xi` on an axis with `n` slots.
#[inline]
pub fn frequency_slot(xi: i64, n: usize) -> usize {
    xi.rem_euclid(n as i64) as usize
}

struct Plans<T: Real> {
    n: usize,
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
}

impl<T: Real> Plans<T> {
    fn new(planner: &mut FftPlanner<T>, n: usize) -> Self {
        Self { n, fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n) }
    }

    /// Unnormalized transform along every axis of a `dim`-dimensional array.
    fn transform(&self, data: &mut [Cplx<T>], dim: usize, forward: bool) {
        let plan = if forward { &self.fwd } else { &self.inv };
        let n = self.n;
        match dim {
            1 => plan.process(data),
            _ => {
                plan.process(data);
                let mut col = vec![czero(); n];
                for j in 0..n {
                    for i in 0..n {
                        col[i] = data[i * n + j];
                    }
                    plan.process(&mut col);
                    for i in 0..n {
                        data[i * n + j] = col[i];
                    }
                }
            }
        }
    }
}

/// Geometry and transforms shared by all fields of one resolution.
///
/// Cheap to clone behind an [`Arc`]; the FFT plans are immutable and may be
/// used from many threads at once.
pub struct Grid<T: Real> {
    dim: usize,
    n: usize,
    padded: usize,
    plans: Plans<T>,
    padded_plans: Plans<T>,
    freqs: Vec<i64>,
}

impl<T: Real> fmt::Debug for Grid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("dim", &self.dim).field("modes", &self.n).finish()
    }
}

impl<T: Real> Grid<T> {
    pub fn new(dim: usize, modes_per_axis: usize) -> Result<Arc<Self>> {
        validate_shape(dim, modes_per_axis)?;
        let n = modes_per_axis;
        let padded = 3 * n / 2;
        let mut planner = FftPlanner::new();
        let plans = Plans::new(&mut planner, n);
        let padded_plans = Plans::new(&mut planner, padded);
        let freqs = (0..n).map(|k| slot_frequency(k, n)).collect();
        Ok(Arc::new(Self { dim, n, padded, plans, padded_plans, freqs }))
    }

    pub fn one_d(modes: usize) -> Result<Arc<Self>> {
        Self::new(1, modes)
    }

    pub fn two_d(modes: usize) -> Result<Arc<Self>> {
        Self::new(2, modes)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn modes(&self) -> usize {
        self.n
    }

    /// Number of collocation points per axis of the dealiasing grid.
    #[inline]
    pub fn padded_modes(&self) -> usize {
        self.padded
    }

    /// Total number of collocation nodes (also the number of spectral slots).
    #[inline]
    pub fn points(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    #[inline]
    pub fn padded_points(&self) -> usize {
        self.padded.pow(self.dim as u32)
    }

    pub fn spec(&self, width: usize, kind: ScalarKind) -> GridSpec {
        GridSpec { dim: self.dim, modes_per_axis: self.n, value_width: width, scalar_kind: kind }
    }

    /// Frequency of every axis slot, in FFT order.
    pub fn axis_frequencies(&self) -> &[i64] {
        &self.freqs
    }

    /// Whether slot `idx` (flattened) is a Nyquist slot on some axis.
    #[inline]
    pub fn is_nyquist(&self, idx: usize) -> bool {
        let half = self.n / 2;
        match self.dim {
            1 => idx == half,
            _ => idx / self.n == half || idx % self.n == half,
        }
    }

    /// Frequency multi-index of the flattened slot `idx`.
    #[inline]
    pub fn frequency(&self, idx: usize) -> [i64; 2] {
        match self.dim {
            1 => [self.freqs[idx], 0],
            _ => [self.freqs[idx / self.n], self.freqs[idx % self.n]],
        }
    }

    /// Flattened slot of a frequency multi-index, if it is representable.
    pub fn slot(&self, xi: &[i64]) -> Option<usize> {
        let half = (self.n / 2) as i64;
        if xi.len() != self.dim || xi.iter().any(|&x| x.abs() >= half) {
            return None;
        }
        Some(match self.dim {
            1 => frequency_slot(xi[0], self.n),
            _ => frequency_slot(xi[0], self.n) * self.n + frequency_slot(xi[1], self.n),
        })
    }

    fn node_coords(m: usize, dim: usize, idx: usize, out: &mut [T; 2]) {
        let h = T::TAU() / T::from_count(m);
        match dim {
            1 => {
                out[0] = h * T::from_count(idx);
            }
            _ => {
                out[0] = h * T::from_count(idx / m);
                out[1] = h * T::from_count(idx % m);
            }
        }
    }

    /// Coordinates of collocation node `idx`.
    pub fn node(&self, idx: usize) -> [T; 2] {
        let mut x = [T::zero(); 2];
        Self::node_coords(self.n, self.dim, idx, &mut x);
        x
    }

    /// Coordinates of node `idx` on the dealiasing grid.
    pub fn padded_node(&self, idx: usize) -> [T; 2] {
        let mut x = [T::zero(); 2];
        Self::node_coords(self.padded, self.dim, idx, &mut x);
        x
    }

    /// Quadrature weight of one node: `(2π/n)^dim`.
    pub fn cell_volume(&self) -> T {
        (T::TAU() / T::from_count(self.n)).powi(self.dim as i32)
    }

    /// Torus volume `(2π)^dim`.
    pub fn volume(&self) -> T {
        T::TAU().powi(self.dim as i32)
    }

    /// Values on the native grid from one component's coefficients.
    pub fn synthesize(&self, coeffs: &[Cplx<T>], out: &mut [Cplx<T>]) {
        out.copy_from_slice(coeffs);
        self.plans.transform(out, self.dim, false);
    }

    /// Coefficients from one component's values on the native grid. The
    /// Nyquist slots are cleared.
    pub fn analyze(&self, values: &mut [Cplx<T>]) {
        self.plans.transform(values, self.dim, true);
        let s = T::one() / T::from_count(self.points());
        for (i, v) in values.iter_mut().enumerate() {
            if self.is_nyquist(i) {
                *v = czero();
            } else {
                *v = *v * s;
            }
        }
    }

    /// Values on the 3/2-padded grid from one component's coefficients.
    pub fn synthesize_padded(&self, coeffs: &[Cplx<T>], out: &mut [Cplx<T>]) {
        let (n, m) = (self.n, self.padded);
        out.iter_mut().for_each(|z| *z = czero());
        match self.dim {
            1 => {
                for (k, c) in coeffs.iter().enumerate() {
                    out[frequency_slot(self.freqs[k], m)] = *c;
                }
            }
            _ => {
                for k0 in 0..n {
                    let r = frequency_slot(self.freqs[k0], m) * m;
                    for k1 in 0..n {
                        out[r + frequency_slot(self.freqs[k1], m)] = coeffs[k0 * n + k1];
                    }
                }
            }
        }
        // Nyquist slots are zero in storage, so copying them is harmless.
        self.padded_plans.transform(out, self.dim, false);
    }

    /// Truncated coefficients from values on the padded grid.
    pub fn analyze_padded(&self, values: &mut [Cplx<T>], coeffs: &mut [Cplx<T>]) {
        let (n, m) = (self.n, self.padded);
        self.padded_plans.transform(values, self.dim, true);
        let s = T::one() / T::from_count(self.padded_points());
        match self.dim {
            1 => {
                for k in 0..n {
                    coeffs[k] = values[frequency_slot(self.freqs[k], m)] * s;
                }
            }
            _ => {
                for k0 in 0..n {
                    let r = frequency_slot(self.freqs[k0], m) * m;
                    for k1 in 0..n {
                        coeffs[k0 * n + k1] = values[r + frequency_slot(self.freqs[k1], m)] * s;
                    }
                }
            }
        }
        for (i, c) in coeffs.iter_mut().enumerate() {
            if self.is_nyquist(i) {
                *c = czero();
            }
        }
    }
}
