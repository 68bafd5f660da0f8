//! The smoothing operator `J_ε`: convolution with a rescaled even bump.
//!
//! On the torus `J_ε` is the Fourier multiplier `ξ ↦ θ̂(εξ)` where `θ` is the
//! unit-mass bump `c·exp(−1/(1−|x|²))` supported in the unit ball. Multiplier
//! tables are computed once per grid resolution by trapezoidal quadrature in
//! double precision. The bump is flat to all orders at the boundary of its
//! support, so the trapezoid rule converges faster than any power of the
//! step. In two dimensions the radial kernel is first projected onto one
//! axis (an Abel transform), which reduces the multiplier to a cosine
//! transform of a smooth even profile.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::scalar::Real;

const PROFILE_POINTS: usize = 4096;

/// Unnormalized bump `exp(−1/(1−r²))` for `r² < 1`, else 0.
pub fn bump(r2: f64) -> f64 {
    if r2 >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - r2)).exp()
    }
}

/// Even profile of the kernel on `[0, 1]`: the bump itself in one
/// dimension, its projection onto an axis in two.
#[derive(Debug)]
struct Profile {
    y: Vec<f64>,
    w: Vec<f64>,
    mass: f64,
}

impl Profile {
    fn new(dim: usize) -> Self {
        let n = PROFILE_POINTS;
        let h = 1.0 / n as f64;
        let mut y = Vec::with_capacity(n);
        let mut w = Vec::with_capacity(n);
        for i in 0..n {
            let yi = i as f64 * h;
            let p = match dim {
                1 => bump(yi * yi),
                _ => projected_bump(yi),
            };
            // Trapezoid on [−1, 1] folded onto [0, 1]: the node at 0 appears
            // once, every other node twice.
            let weight = if i == 0 { h } else { 2.0 * h };
            y.push(yi);
            w.push(weight * p);
        }
        let mass = w.iter().sum();
        Self { y, w, mass }
    }

    /// `θ̂(s) / θ̂(0)`, clamped to `[−1, 1]`.
    fn hat(&self, s: f64) -> f64 {
        if s == 0.0 {
            return 1.0;
        }
        let acc: f64 = self.y.iter().zip(&self.w).map(|(y, w)| w * (s * y).cos()).sum();
        (acc / self.mass).clamp(-1.0, 1.0)
    }
}

/// `∫ bump(y1² + y2²) dy2`, the line integral through the 2D bump.
fn projected_bump(y1: f64) -> f64 {
    let half = (1.0 - y1 * y1).max(0.0).sqrt();
    if half == 0.0 {
        return 0.0;
    }
    let m = 512;
    let h = 2.0 * half / m as f64;
    let mut acc = 0.0;
    for j in 1..m {
        let y2 = -half + j as f64 * h;
        acc += bump(y1 * y1 + y2 * y2);
    }
    acc * h
}

fn profile(dim: usize) -> &'static Profile {
    use std::sync::OnceLock;
    static P1: OnceLock<Profile> = OnceLock::new();
    static P2: OnceLock<Profile> = OnceLock::new();
    match dim {
        1 => P1.get_or_init(|| Profile::new(1)),
        _ => P2.get_or_init(|| Profile::new(2)),
    }
}

/// Normalized Fourier transform of the `dim`-dimensional kernel at radius `s`.
///
/// Equals 1 at `s = 0`, is even, and never exceeds 1 in magnitude.
pub fn kernel_hat(dim: usize, s: f64) -> f64 {
    profile(dim).hat(s.abs())
}

type Table<T> = Arc<Vec<T>>;

/// The operator `J_ε` with its lazily built multiplier tables.
///
/// [`Mollifier::identity`] is the `ε → 0` limit and leaves fields unchanged.
#[derive(Debug, Clone)]
pub struct Mollifier<T: Real> {
    epsilon: f64,
    cache: Arc<Mutex<HashMap<(usize, usize), Table<T>>>>,
}

impl<T: Real> Mollifier<T> {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidEpsilon(epsilon));
        }
        Ok(Self { epsilon, cache: Arc::default() })
    }

    /// No smoothing at all.
    pub fn identity() -> Self {
        Self { epsilon: 0.0, cache: Arc::default() }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn is_identity(&self) -> bool {
        self.epsilon == 0.0
    }

    /// Multiplier `θ̂(εξ)` at a single frequency.
    pub fn multiplier(&self, xi: &[i64]) -> f64 {
        if self.is_identity() {
            return 1.0;
        }
        let r = xi.iter().map(|&k| (k * k) as f64).sum::<f64>().sqrt();
        kernel_hat(xi.len(), self.epsilon * r)
    }

    /// Multiplier per spectral slot of `grid`, built on first use.
    pub fn table(&self, grid: &Grid<T>) -> Table<T> {
        let key = (grid.dim(), grid.modes());
        let mut cache = self.cache.lock().expect("mollifier cache poisoned");
        cache
            .entry(key)
            .or_insert_with(|| Arc::new(self.build(grid)))
            .clone()
    }

    fn build(&self, grid: &Grid<T>) -> Vec<T> {
        let mut by_radius: HashMap<i64, T> = HashMap::new();
        (0..grid.points())
            .map(|idx| {
                let xi = grid.frequency(idx);
                let r2 = xi[0] * xi[0] + xi[1] * xi[1];
                *by_radius.entry(r2).or_insert_with(|| {
                    if self.is_identity() {
                        T::one()
                    } else {
                        T::lit(kernel_hat(grid.dim(), self.epsilon * (r2 as f64).sqrt()))
                    }
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct quadrature of ∫θ(y)cos(sy)dy on a much finer midpoint grid.
    fn hat_oracle_1d(s: f64) -> f64 {
        let m = 200_000;
        let h = 2.0 / m as f64;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..m {
            let y = -1.0 + (i as f64 + 0.5) * h;
            let b = bump(y * y);
            num += b * (s * y).cos();
            den += b;
        }
        num / den
    }

    /// Two-dimensional radial oracle by a polar tensor rule.
    fn hat_oracle_2d(s: f64) -> f64 {
        let (nr, na) = (2000, 256);
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..nr {
            let r = (i as f64 + 0.5) / nr as f64;
            let b = bump(r * r) * r;
            for j in 0..na {
                let phi = std::f64::consts::TAU * j as f64 / na as f64;
                num += b * (s * r * phi.cos()).cos();
                den += b;
            }
        }
        num / den
    }

    #[test]
    fn unit_mass_and_bounds() {
        for dim in [1, 2] {
            assert_eq!(kernel_hat(dim, 0.0), 1.0);
            for s in [0.1, 1.0, 5.0, 40.0] {
                let v = kernel_hat(dim, s);
                assert!(v.abs() <= 1.0);
                assert_eq!(v, kernel_hat(dim, -s));
            }
        }
    }

    #[test]
    fn matches_independent_quadrature() {
        for s in [0.3, 2.0, 7.5, 20.0] {
            assert!((kernel_hat(1, s) - hat_oracle_1d(s)).abs() < 1e-9, "1d s={s}");
            assert!((kernel_hat(2, s) - hat_oracle_2d(s)).abs() < 1e-6, "2d s={s}");
        }
    }

    #[test]
    fn small_argument_is_second_order() {
        // θ even ⇒ 1 − θ̂(s) = m₂ s²/2 + O(s⁴).
        let a = 1.0 - kernel_hat(1, 1e-2);
        let b = 1.0 - kernel_hat(1, 2e-2);
        assert!((b / a - 4.0).abs() < 1e-3);
    }

    #[test]
    fn rejects_nonpositive_width() {
        assert!(Mollifier::<f64>::new(0.0).is_err());
        assert!(Mollifier::<f64>::new(-1.0).is_err());
        assert!(Mollifier::<f64>::new(f64::NAN).is_err());
    }

    #[test]
    fn table_is_cached_per_resolution() {
        let m = Mollifier::<f64>::new(0.1).unwrap();
        let g = Grid::one_d(32).unwrap();
        let a = m.table(&g);
        let b = m.table(&g);
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(a[0], 1.0);
        assert_eq!(a[3], a[32 - 3]);
    }
}
