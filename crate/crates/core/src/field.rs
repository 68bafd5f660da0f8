//! Band-limited vector-valued fields on the torus.

use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridSpec, ScalarKind};
use crate::linalg::CMat;
use crate::mollifier::Mollifier;
use crate::scalar::{cplx, czero, Cplx, Real};

/// A trigonometric polynomial with values in `𝕂^N`.
///
/// Coefficients are stored component-major in the FFT order described in
/// [`crate::grid`]. Real-kind fields keep conjugate-symmetric coefficients.
#[derive(Clone, Debug)]
pub struct Field<T: Real> {
    grid: Arc<Grid<T>>,
    width: usize,
    kind: ScalarKind,
    coeffs: Vec<Cplx<T>>,
}

fn partner(grid: &Grid<impl Real>, idx: usize) -> usize {
    let n = grid.modes();
    match grid.dim() {
        1 => (n - idx) % n,
        _ => ((n - idx / n) % n) * n + (n - idx % n) % n,
    }
}

fn symmetrize<T: Real>(grid: &Grid<T>, width: usize, coeffs: &mut [Cplx<T>]) {
    let p = grid.points();
    let half = T::lit(0.5);
    for c in 0..width {
        let block = &mut coeffs[c * p..(c + 1) * p];
        for idx in 0..p {
            let j = partner(grid, idx);
            if j < idx {
                continue;
            }
            let avg = (block[idx] + block[j].conj()) * half;
            block[idx] = avg;
            block[j] = avg.conj();
        }
    }
}

fn clear_nyquist<T: Real>(grid: &Grid<T>, coeffs: &mut [Cplx<T>]) {
    let p = grid.points();
    for (i, c) in coeffs.iter_mut().enumerate() {
        if grid.is_nyquist(i % p) {
            *c = czero();
        }
    }
}

/// Sum over multi-indices `|α| ≤ k` of `Π ξ_i^{2α_i}`.
fn sobolev_weight(xi: [i64; 2], dim: usize, k: usize) -> f64 {
    let a = (xi[0] * xi[0]) as f64;
    if dim == 1 {
        let mut s = 0.0;
        let mut p = 1.0;
        for _ in 0..=k {
            s += p;
            p *= a;
        }
        return s;
    }
    let b = (xi[1] * xi[1]) as f64;
    let mut s = 0.0;
    let mut pa = 1.0;
    for i in 0..=k {
        let mut pb = 1.0;
        for _ in 0..=(k - i) {
            s += pa * pb;
            pb *= b;
        }
        pa *= a;
    }
    s
}

impl<T: Real> Field<T> {
    pub fn zeros(grid: &Arc<Grid<T>>, width: usize, kind: ScalarKind) -> Self {
        Self {
            grid: grid.clone(),
            width,
            kind,
            coeffs: vec![czero(); width * grid.points()],
        }
    }

    /// Real scalar field with constant value `c`.
    pub fn constant(grid: &Arc<Grid<T>>, c: T) -> Self {
        let mut f = Self::zeros(grid, 1, ScalarKind::Real);
        f.coeffs[0] = cplx(c, T::zero());
        f
    }

    /// Builds a field from raw coefficients. Nyquist slots are cleared and
    /// real-kind input is projected onto conjugate-symmetric coefficients.
    pub fn from_coeffs(
        grid: &Arc<Grid<T>>,
        width: usize,
        kind: ScalarKind,
        mut coeffs: Vec<Cplx<T>>,
    ) -> Result<Self> {
        if width == 0 || coeffs.len() != width * grid.points() {
            return Err(Error::InvalidGrid(format!(
                "expected {} coefficients, got {}",
                width * grid.points(),
                coeffs.len()
            )));
        }
        clear_nyquist(grid, &mut coeffs);
        if kind == ScalarKind::Real {
            symmetrize(grid, width, &mut coeffs);
        }
        Ok(Self { grid: grid.clone(), width, kind, coeffs })
    }

    /// Sum of single modes `Σ a·e^{iξ·x}` in one component.
    pub fn from_modes(grid: &Arc<Grid<T>>, kind: ScalarKind, modes: &[(&[i64], Cplx<T>)]) -> Result<Self> {
        let mut coeffs = vec![czero(); grid.points()];
        for (xi, a) in modes {
            let slot = grid
                .slot(xi)
                .ok_or_else(|| Error::InvalidGrid(format!("frequency {xi:?} not representable")))?;
            coeffs[slot] += *a;
        }
        Self::from_coeffs(grid, 1, kind, coeffs)
    }

    /// Interpolates collocation values (component-major, native grid).
    pub fn from_values(
        grid: &Arc<Grid<T>>,
        width: usize,
        kind: ScalarKind,
        mut values: Vec<Cplx<T>>,
    ) -> Result<Self> {
        let p = grid.points();
        if width == 0 || values.len() != width * p {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                width * p,
                values.len()
            )));
        }
        if kind == ScalarKind::Real {
            values.iter_mut().for_each(|z| z.im = T::zero());
        }
        for block in values.chunks_mut(p) {
            grid.analyze(block);
        }
        Self::from_coeffs(grid, width, kind, values)
    }

    /// Interpolates `f` at the collocation nodes. `f` receives the node
    /// coordinates and writes `width` values.
    pub fn from_fn<F>(grid: &Arc<Grid<T>>, width: usize, kind: ScalarKind, f: F) -> Result<Self>
    where
        F: Fn(&[T], &mut [Cplx<T>]),
    {
        let p = grid.points();
        let mut values = vec![czero(); width * p];
        let mut buf = vec![czero(); width];
        for node in 0..p {
            let x = grid.node(node);
            f(&x[..grid.dim()], &mut buf);
            for c in 0..width {
                values[c * p + node] = buf[c];
            }
        }
        Self::from_values(grid, width, kind, values)
    }

    /// Real scalar field interpolating `f`.
    pub fn from_real_fn<F>(grid: &Arc<Grid<T>>, f: F) -> Self
    where
        F: Fn(&[T]) -> T,
    {
        Self::from_fn(grid, 1, ScalarKind::Real, |x, out| out[0] = cplx(f(x), T::zero()))
            .expect("width 1 is valid")
    }

    /// Complex scalar field interpolating `f`.
    pub fn from_complex_fn<F>(grid: &Arc<Grid<T>>, f: F) -> Self
    where
        F: Fn(&[T]) -> Cplx<T>,
    {
        Self::from_fn(grid, 1, ScalarKind::Complex, |x, out| out[0] = f(x)).expect("width 1 is valid")
    }

    /// Concatenates components. The result is real only if every part is.
    pub fn stack(parts: &[&Field<T>]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::InvalidGrid("nothing to stack".into()))?;
        let mut coeffs = Vec::new();
        let mut width = 0;
        let mut kind = ScalarKind::Real;
        for f in parts {
            if !f.same_geometry(first) {
                return Err(Error::GridMismatch);
            }
            coeffs.extend_from_slice(&f.coeffs);
            width += f.width;
            if f.kind == ScalarKind::Complex {
                kind = ScalarKind::Complex;
            }
        }
        Ok(Self { grid: first.grid.clone(), width, kind, coeffs })
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn spec(&self) -> GridSpec {
        self.grid.spec(self.width, self.kind)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn kind(&self) -> ScalarKind {
        self.kind
    }

    pub fn coeffs(&self) -> &[Cplx<T>] {
        &self.coeffs
    }

    pub(crate) fn coeffs_mut(&mut self) -> &mut [Cplx<T>] {
        &mut self.coeffs
    }

    /// Coefficients of component `c`.
    pub fn component_coeffs(&self, c: usize) -> &[Cplx<T>] {
        let p = self.grid.points();
        &self.coeffs[c * p..(c + 1) * p]
    }

    /// Coefficient of `e^{iξ·x}` in component `c`, or zero if not stored.
    pub fn coeff(&self, c: usize, xi: &[i64]) -> Cplx<T> {
        match self.grid.slot(xi) {
            Some(s) => self.component_coeffs(c)[s],
            None => czero(),
        }
    }

    pub fn component(&self, c: usize) -> Field<T> {
        Self {
            grid: self.grid.clone(),
            width: 1,
            kind: self.kind,
            coeffs: self.component_coeffs(c).to_vec(),
        }
    }

    /// Components `range` as a new field.
    pub fn components(&self, range: std::ops::Range<usize>) -> Field<T> {
        let p = self.grid.points();
        Self {
            grid: self.grid.clone(),
            width: range.len(),
            kind: self.kind,
            coeffs: self.coeffs[range.start * p..range.end * p].to_vec(),
        }
    }

    /// Reinterprets the field as complex valued.
    pub fn into_complex(mut self) -> Self {
        self.kind = ScalarKind::Complex;
        self
    }

    /// Real part (componentwise) as a real-kind field.
    pub fn real_part(&self) -> Self {
        let mut f = self.clone();
        f.kind = ScalarKind::Real;
        symmetrize(&f.grid, f.width, &mut f.coeffs);
        f
    }

    fn same_geometry(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid)
            || (self.grid.dim() == other.grid.dim() && self.grid.modes() == other.grid.modes())
    }

    /// Fails unless both fields have the same [`GridSpec`].
    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.same_geometry(other) && self.width == other.width && self.kind == other.kind {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        if self.same_geometry(other) && self.width == other.width {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    fn joint_kind(&self, other: &Self) -> ScalarKind {
        if self.kind == ScalarKind::Real && other.kind == ScalarKind::Real {
            ScalarKind::Real
        } else {
            ScalarKind::Complex
        }
    }

    /// Collocation values, component-major.
    pub fn values(&self) -> Vec<Cplx<T>> {
        let p = self.grid.points();
        let mut out = vec![czero(); self.coeffs.len()];
        for (src, dst) in self.coeffs.chunks(p).zip(out.chunks_mut(p)) {
            self.grid.synthesize(src, dst);
        }
        if self.kind == ScalarKind::Real {
            out.iter_mut().for_each(|z| z.im = T::zero());
        }
        out
    }

    /// Real parts of the collocation values of component `c`.
    pub fn real_values(&self, c: usize) -> Vec<T> {
        let p = self.grid.points();
        let mut out = vec![czero(); p];
        self.grid.synthesize(self.component_coeffs(c), &mut out);
        out.into_iter().map(|z| z.re).collect()
    }

    /// Direct evaluation at an arbitrary point by summing all modes.
    pub fn eval_at(&self, x: &[T]) -> Vec<Cplx<T>> {
        let p = self.grid.points();
        let dim = self.grid.dim();
        let phases: Vec<Cplx<T>> = (0..p)
            .map(|idx| {
                let xi = self.grid.frequency(idx);
                let mut arg = T::zero();
                for (a, &k) in x.iter().take(dim).zip(xi.iter()) {
                    arg += *a * T::lit(k as f64);
                }
                cplx(arg.cos(), arg.sin())
            })
            .collect();
        (0..self.width)
            .map(|c| {
                let mut acc = czero();
                for (cf, ph) in self.component_coeffs(c).iter().zip(&phases) {
                    acc += cf * ph;
                }
                if self.kind == ScalarKind::Real {
                    acc.im = T::zero();
                }
                acc
            })
            .collect()
    }

    /// `∂/∂x_axis`, the multiplier `iξ_axis`.
    pub fn derivative(&self, axis: usize) -> Result<Self> {
        let dim = self.grid.dim();
        if axis >= dim {
            return Err(Error::AxisOutOfRange { axis, dim });
        }
        let p = self.grid.points();
        let mut out = self.clone();
        for (i, c) in out.coeffs.iter_mut().enumerate() {
            let k = self.grid.frequency(i % p)[axis];
            *c = *c * cplx(T::zero(), T::lit(k as f64));
        }
        Ok(out)
    }

    /// Derivative of multi-order `alpha` (one entry per axis).
    pub fn partial(&self, alpha: &[usize]) -> Result<Self> {
        let dim = self.grid.dim();
        if alpha.len() != dim {
            return Err(Error::AxisOutOfRange { axis: alpha.len(), dim });
        }
        let p = self.grid.points();
        let mut out = self.clone();
        for (i, c) in out.coeffs.iter_mut().enumerate() {
            let xi = self.grid.frequency(i % p);
            let mut m = cplx(T::one(), T::zero());
            for (ax, &a) in alpha.iter().enumerate() {
                let ik = cplx(T::zero(), T::lit(xi[ax] as f64));
                for _ in 0..a {
                    m = m * ik;
                }
            }
            *c = *c * m;
        }
        Ok(out)
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c = *c * s);
        out
    }

    /// Multiplication by a complex constant; the result is complex kind.
    pub fn scale_complex(&self, s: Cplx<T>) -> Self {
        let mut out = self.clone();
        out.kind = ScalarKind::Complex;
        out.coeffs.iter_mut().for_each(|c| *c = *c * s);
        out
    }

    /// `self + a·x`.
    pub fn axpy(&self, a: T, x: &Self) -> Result<Self> {
        self.check_shape(x)?;
        let mut out = self.clone();
        out.kind = self.joint_kind(x);
        for (o, v) in out.coeffs.iter_mut().zip(&x.coeffs) {
            *o += v * a;
        }
        Ok(out)
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.axpy(T::one(), other)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.axpy(-T::one(), other)
    }

    /// Applies `J_ε` coefficientwise.
    pub fn mollify(&self, m: &Mollifier<T>) -> Self {
        if m.is_identity() {
            return self.clone();
        }
        let table = m.table(&self.grid);
        let p = self.grid.points();
        let mut out = self.clone();
        for (i, c) in out.coeffs.iter_mut().enumerate() {
            *c = *c * table[i % p];
        }
        out
    }

    /// Dealiased pointwise map. `f` receives the node coordinates, the
    /// concatenated input values and an output buffer of `out_width`.
    ///
    /// Inputs are evaluated on the 3/2-padded grid and the result is
    /// truncated back to the native band, so quadratic maps of band-limited
    /// inputs are exact.
    pub fn pointwise<F>(
        inputs: &[&Field<T>],
        out_width: usize,
        out_kind: ScalarKind,
        f: F,
    ) -> Result<Field<T>>
    where
        F: Fn(&[T], &[Cplx<T>], &mut [Cplx<T>]),
    {
        let first = inputs.first().ok_or_else(|| Error::InvalidGrid("no inputs".into()))?;
        let grid = first.grid.clone();
        for g in inputs {
            if !g.same_geometry(first) {
                return Err(Error::GridMismatch);
            }
        }
        let p = grid.points();
        let q = grid.padded_points();
        let in_width: usize = inputs.iter().map(|g| g.width).sum();
        let mut in_vals = vec![czero(); in_width * q];
        let mut c0 = 0;
        for g in inputs {
            for c in 0..g.width {
                let dst = &mut in_vals[(c0 + c) * q..(c0 + c + 1) * q];
                grid.synthesize_padded(g.component_coeffs(c), dst);
                if g.kind == ScalarKind::Real {
                    dst.iter_mut().for_each(|z| z.im = T::zero());
                }
            }
            c0 += g.width;
        }
        let mut out_vals = vec![czero(); out_width * q];
        let mut ibuf = vec![czero(); in_width];
        let mut obuf = vec![czero(); out_width];
        let dim = grid.dim();
        for node in 0..q {
            for c in 0..in_width {
                ibuf[c] = in_vals[c * q + node];
            }
            obuf.iter_mut().for_each(|z| *z = czero());
            let x = grid.padded_node(node);
            f(&x[..dim], &ibuf, &mut obuf);
            for c in 0..out_width {
                out_vals[c * q + node] = obuf[c];
            }
        }
        let mut coeffs = vec![czero(); out_width * p];
        for c in 0..out_width {
            let vals = &mut out_vals[c * q..(c + 1) * q];
            if out_kind == ScalarKind::Real {
                vals.iter_mut().for_each(|z| z.im = T::zero());
            }
            grid.analyze_padded(vals, &mut coeffs[c * p..(c + 1) * p]);
        }
        Field::from_coeffs(&grid, out_width, out_kind, coeffs)
    }

    /// Componentwise dealiased product of two fields with equal specs.
    pub fn product(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let w = self.width;
        Self::pointwise(&[self, other], w, self.kind, |_, v, out| {
            for c in 0..w {
                out[c] = v[c] * v[w + c];
            }
        })
    }

    /// Multiplies every component by the scalar field `s` (dealiased).
    pub fn times_scalar_field(&self, s: &Self) -> Result<Self> {
        if s.width != 1 || !self.same_geometry(s) {
            return Err(Error::GridMismatch);
        }
        let w = self.width;
        Self::pointwise(&[s, self], w, self.joint_kind(s), |_, v, out| {
            for c in 0..w {
                out[c] = v[0] * v[1 + c];
            }
        })
    }

    /// Same field on a grid of different resolution: shared modes are
    /// copied, the rest are dropped or zero-filled.
    pub fn resample(&self, grid: &Arc<Grid<T>>) -> Result<Self> {
        if grid.dim() != self.grid.dim() {
            return Err(Error::GridMismatch);
        }
        let p = self.grid.points();
        let q = grid.points();
        let mut coeffs = vec![czero(); self.width * q];
        for c in 0..self.width {
            for idx in 0..p {
                if self.grid.is_nyquist(idx) {
                    continue;
                }
                let xi = self.grid.frequency(idx);
                if let Some(s) = grid.slot(&xi[..grid.dim()]) {
                    coeffs[c * q + s] = self.coeffs[c * p + idx];
                }
            }
        }
        Self::from_coeffs(grid, self.width, self.kind, coeffs)
    }

    /// `‖f‖_{L²}` over `[0, 2π)^dim`, summed over components.
    pub fn l2_norm(&self) -> T {
        self.sobolev_norm(0)
    }

    /// `sqrt(Σ_{|α|≤k} ‖∂^α f‖²_{L²})` by Parseval.
    pub fn sobolev_norm(&self, k: usize) -> T {
        let p = self.grid.points();
        let dim = self.grid.dim();
        let mut acc = 0.0f64;
        for (i, c) in self.coeffs.iter().enumerate() {
            let a = c.norm_sqr().to_f64_lossy();
            if a == 0.0 {
                continue;
            }
            let w = if k == 0 { 1.0 } else { sobolev_weight(self.grid.frequency(i % p), dim, k) };
            acc += w * a;
        }
        T::lit((acc * self.grid.volume().to_f64_lossy()).sqrt())
    }

    /// L² pairing `∫ Σ_c a_c · conj(b_c)`.
    pub fn inner(&self, other: &Self) -> Result<Cplx<T>> {
        self.check_shape(other)?;
        let mut acc = czero();
        for (a, b) in self.coeffs.iter().zip(&other.coeffs) {
            acc += a * b.conj();
        }
        Ok(acc * self.grid.volume())
    }

    /// Largest pointwise Euclidean norm over the collocation grid.
    pub fn sup_norm(&self) -> T {
        let p = self.grid.points();
        let vals = self.values();
        (0..p)
            .map(|node| {
                (0..self.width)
                    .map(|c| vals[c * p + node].norm_sqr())
                    .fold(T::zero(), |a, b| a + b)
                    .sqrt()
            })
            .fold(T::zero(), |a, b| if b.is_nan() || a.is_nan() { T::nan() } else { a.max(b) })
    }

    /// Grid-sampled `C¹` norm `max|f| + Σ_j max|∂_j f|`. This is a lower
    /// bound for the true norm and converges to it with resolution.
    pub fn c1_norm(&self) -> T {
        let mut s = self.sup_norm();
        for axis in 0..self.grid.dim() {
            s += self.derivative(axis).expect("axis in range").sup_norm();
        }
        s
    }

    /// Largest pointwise difference magnitude on the collocation grid.
    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        Ok(self.try_sub(other)?.sup_norm())
    }

    /// Grid quadrature of `⟨W a, b⟩ = Σ_{ij} conj(b_i) W_ij a_j`.
    pub fn weighted_inner(&self, other: &Self, weight: &MatrixField<T>) -> Result<Cplx<T>> {
        self.check_shape(other)?;
        if !Arc::ptr_eq(&self.grid, &weight.grid)
            && (self.grid.dim() != weight.grid.dim() || self.grid.modes() != weight.grid.modes())
        {
            return Err(Error::GridMismatch);
        }
        if weight.width != self.width {
            return Err(Error::GridMismatch);
        }
        let tol = T::lit(1e-10);
        for (node, m) in weight.mats.iter().enumerate() {
            let d = m.hermitian_defect();
            if d > tol * (T::one() + m.max_abs()) {
                return Err(Error::NonHermitianWeight { node, defect: d.to_f64_lossy() });
            }
        }
        let p = self.grid.points();
        let (va, vb) = (self.values(), other.values());
        let w = self.width;
        let mut a = vec![czero(); w];
        let mut wa = vec![czero(); w];
        let mut acc = czero();
        for node in 0..p {
            for c in 0..w {
                a[c] = va[c * p + node];
            }
            weight.mats[node].mul_vec_into(&a, &mut wa);
            for c in 0..w {
                acc += wa[c] * vb[c * p + node].conj();
            }
        }
        Ok(acc * self.grid.cell_volume())
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Exact equality of kind, shape and every coefficient bit.
    pub fn bitwise_eq(&self, other: &Self) -> bool {
        self.check_compatible(other).is_ok()
            && self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .all(|(a, b)| a.re.to_f64_lossy().to_bits() == b.re.to_f64_lossy().to_bits()
                    && a.im.to_f64_lossy().to_bits() == b.im.to_f64_lossy().to_bits())
    }
}

impl<T: Real> Add for &Field<T> {
    type Output = Field<T>;
    /// Panics on shape mismatch; use [`Field::try_add`] to handle it.
    fn add(self, rhs: Self) -> Field<T> {
        self.try_add(rhs).expect("adding fields of different shapes")
    }
}

impl<T: Real> Sub for &Field<T> {
    type Output = Field<T>;
    fn sub(self, rhs: Self) -> Field<T> {
        self.try_sub(rhs).expect("subtracting fields of different shapes")
    }
}

impl<T: Real> Mul<T> for &Field<T> {
    type Output = Field<T>;
    fn mul(self, rhs: T) -> Field<T> {
        self.scale(rhs)
    }
}

impl<T: Real> Neg for &Field<T> {
    type Output = Field<T>;
    fn neg(self) -> Field<T> {
        self.scale(-T::one())
    }
}

/// A matrix at every collocation node, used as a pointwise weight.
#[derive(Clone, Debug)]
pub struct MatrixField<T: Real> {
    grid: Arc<Grid<T>>,
    width: usize,
    mats: Vec<CMat<T>>,
}

impl<T: Real> MatrixField<T> {
    pub fn from_fn<F>(grid: &Arc<Grid<T>>, width: usize, f: F) -> Result<Self>
    where
        F: Fn(&[T]) -> CMat<T>,
    {
        let mats: Vec<CMat<T>> = (0..grid.points())
            .map(|node| {
                let x = grid.node(node);
                f(&x[..grid.dim()])
            })
            .collect();
        if mats.iter().any(|m| m.dim() != width) {
            return Err(Error::InvalidArgument(format!("weight matrices must be {width}×{width}")));
        }
        Ok(Self { grid: grid.clone(), width, mats })
    }

    /// One matrix per native node, in node order.
    pub fn from_mats(grid: &Arc<Grid<T>>, width: usize, mats: Vec<CMat<T>>) -> Result<Self> {
        if mats.len() != grid.points() || mats.iter().any(|m| m.dim() != width) {
            return Err(Error::InvalidArgument("one width×width matrix per node expected".into()));
        }
        Ok(Self { grid: grid.clone(), width, mats })
    }

    pub fn constant(grid: &Arc<Grid<T>>, m: CMat<T>) -> Self {
        let width = m.dim();
        Self { grid: grid.clone(), width, mats: vec![m; grid.points()] }
    }

    pub fn identity(grid: &Arc<Grid<T>>, width: usize) -> Self {
        Self::constant(grid, CMat::identity(width))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn at(&self, node: usize) -> &CMat<T> {
        &self.mats[node]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cplx;

    type F = Field<f64>;

    fn grid(n: usize) -> Arc<Grid<f64>> {
        Grid::one_d(n).unwrap()
    }

    fn sin_field(g: &Arc<Grid<f64>>) -> F {
        F::from_real_fn(g, |x| x[0].sin())
    }

    #[test]
    fn derivative_of_sin_is_cos() {
        let g = grid(64);
        let d = sin_field(&g).derivative(0).unwrap();
        let cos = F::from_real_fn(&g, |x| x[0].cos());
        assert!(d.max_abs_diff(&cos).unwrap() <= 1e-12);
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let g = grid(16);
        let d = F::constant(&g, 3.5).derivative(0).unwrap();
        assert_eq!(d.sup_norm(), 0.0);
    }

    #[test]
    fn derivative_of_exponential_mode() {
        let g = grid(16);
        let e = F::from_modes(&g, ScalarKind::Complex, &[(&[3], cplx(1.0, 0.0))]).unwrap();
        let d = e.derivative(0).unwrap();
        assert_eq!(d.coeff(0, &[3]), cplx(0.0, 3.0));
    }

    #[test]
    fn derivative_axis_out_of_range() {
        let g = grid(16);
        assert_eq!(
            sin_field(&g).derivative(1).unwrap_err(),
            Error::AxisOutOfRange { axis: 1, dim: 1 }
        );
    }

    #[test]
    fn sobolev_examples() {
        let g = grid(32);
        let tau = std::f64::consts::TAU;
        assert_eq!(F::zeros(&g, 1, ScalarKind::Real).sobolev_norm(3), 0.0);
        for k in 0..5 {
            assert!((F::constant(&g, 1.0).sobolev_norm(k) - tau.sqrt()).abs() < 1e-14);
        }
        // ‖sin‖² + ‖cos‖² = 2π, checked against midpoint quadrature.
        let s = sin_field(&g);
        let m = 10_000;
        let quad: f64 = (0..m)
            .map(|i| {
                let x = tau * (i as f64 + 0.5) / m as f64;
                x.sin().powi(2) + x.cos().powi(2)
            })
            .sum::<f64>()
            * tau
            / m as f64;
        assert!((s.sobolev_norm(1) - quad.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn sobolev_weight_counts_multi_indices() {
        // |α| ≤ 1 in 2D: α ∈ {(0,0), (1,0), (0,1)}.
        assert_eq!(sobolev_weight([2, 3], 2, 1), 1.0 + 4.0 + 9.0);
        assert_eq!(sobolev_weight([2, 0], 1, 2), 1.0 + 4.0 + 16.0);
    }

    #[test]
    fn c1_examples() {
        let g = grid(64);
        assert_eq!(F::zeros(&g, 1, ScalarKind::Real).c1_norm(), 0.0);
        assert!((sin_field(&g).c1_norm() - 2.0).abs() < 1e-12);
        let c = F::from_real_fn(&g, |x| 3.0 * x[0].cos());
        assert!((c.c1_norm() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn product_examples() {
        let g = grid(64);
        let s = sin_field(&g);
        let ss = s.product(&s).unwrap();
        let expect = F::from_real_fn(&g, |x| (1.0 - (2.0 * x[0]).cos()) / 2.0);
        assert!(ss.max_abs_diff(&expect).unwrap() <= 1e-12);
        let one = F::constant(&g, 1.0);
        assert!(s.product(&one).unwrap().max_abs_diff(&s).unwrap() <= 1e-14);
        let zero = F::zeros(&g, 1, ScalarKind::Real);
        assert_eq!(s.product(&zero).unwrap().sup_norm(), 0.0);
    }

    #[test]
    fn product_rejects_mismatch() {
        let s = sin_field(&grid(16));
        let t = sin_field(&grid(32));
        assert_eq!(s.product(&t).unwrap_err(), Error::GridMismatch);
        assert!(s.product(&s.clone().into_complex()).is_err());
    }

    #[test]
    fn product_is_exact_at_dealias_capacity() {
        // Degrees up to n/2 − 1 on each factor stay exact after truncation.
        let g = grid(16);
        let a = F::from_real_fn(&g, |x| (7.0 * x[0]).cos());
        let b = F::from_real_fn(&g, |x| (6.0 * x[0]).sin());
        let ab = a.product(&b).unwrap();
        // cos7x·sin6x = (sin13x − sin x)/2; only sin x survives the band.
        let expect = F::from_real_fn(&g, |x| -x[0].sin() / 2.0);
        assert!(ab.max_abs_diff(&expect).unwrap() < 1e-14);
    }

    #[test]
    fn mollify_constant_and_commutes() {
        let g = grid(64);
        let m = Mollifier::new(0.1).unwrap();
        let c = F::constant(&g, 2.5);
        assert_eq!(c.mollify(&m).coeffs()[0], cplx(2.5, 0.0));
        let s = sin_field(&g);
        let a = s.mollify(&m).derivative(0).unwrap();
        let b = s.derivative(0).unwrap().mollify(&m);
        assert!(a.max_abs_diff(&b).unwrap() <= 1e-14);
    }

    #[test]
    fn mollifier_gap_against_direct_convolution() {
        // Oracle: direct convolution of sin with θ_ε on a 10⁴-point grid.
        let eps = 0.1;
        let g = grid(64);
        let s = sin_field(&g);
        let js = s.mollify(&Mollifier::new(eps).unwrap());
        let m = 10_000;
        let h = 2.0 / m as f64;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..m {
            let y = -1.0 + (i as f64 + 0.5) * h;
            let b = crate::mollifier::bump(y * y);
            num += b * (eps * y).cos();
            den += b;
        }
        let factor = num / den; // J_ε sin = factor · sin
        let expect = (1.0 - factor) * std::f64::consts::PI.sqrt();
        let gap = (&js - &s).l2_norm();
        assert!((gap - expect).abs() < 1e-10);
        let c = gap / (eps * s.sobolev_norm(1));
        assert!(c < 0.1, "C = {c}");
    }

    #[test]
    fn weighted_inner_examples() {
        let g = grid(32);
        let a = F::from_complex_fn(&g, |x| cplx(x[0].sin(), (2.0 * x[0]).cos()));
        let b = F::from_complex_fn(&g, |x| cplx(1.0 + x[0].cos(), 0.5 * (3.0 * x[0]).sin()));
        let id = MatrixField::identity(&g, 1);
        let w = a.weighted_inner(&b, &id).unwrap();
        let l2 = a.inner(&b).unwrap();
        assert!((w - l2).norm() < 1e-12);
        let two = MatrixField::constant(&g, CMat::scaled_identity(1, 2.0));
        assert!((a.weighted_inner(&b, &two).unwrap() - l2 * 2.0).norm() < 1e-12);
        let ba = b.weighted_inner(&a, &id).unwrap();
        assert!((w - ba.conj()).norm() < 1e-12);
    }

    #[test]
    fn weighted_inner_rejects_non_hermitian() {
        let g = grid(16);
        let a = F::zeros(&g, 2, ScalarKind::Complex);
        let w = MatrixField::constant(&g, CMat::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]));
        assert!(matches!(a.weighted_inner(&a, &w), Err(Error::NonHermitianWeight { .. })));
    }

    #[test]
    fn two_dimensional_round_trip() {
        let g = Grid::<f64>::two_d(16).unwrap();
        let f = F::from_real_fn(&g, |x| (x[0] + 2.0 * x[1]).sin() * x[1].cos());
        let vals = f.values();
        let back = F::from_values(&g, 1, ScalarKind::Real, vals).unwrap();
        assert!(back.max_abs_diff(&f).unwrap() < 1e-13);
        let dy = f.derivative(1).unwrap();
        let expect = F::from_real_fn(&g, |x| {
            2.0 * (x[0] + 2.0 * x[1]).cos() * x[1].cos() - (x[0] + 2.0 * x[1]).sin() * x[1].sin()
        });
        assert!(dy.max_abs_diff(&expect).unwrap() < 1e-12);
    }

    #[test]
    fn resample_preserves_band_limited_fields() {
        let f = sin_field(&grid(16));
        let up = f.resample(&grid(64)).unwrap();
        assert!(up.max_abs_diff(&sin_field(&grid(64))).unwrap() < 1e-14);
        let down = up.resample(&grid(16)).unwrap();
        assert!(down.bitwise_eq(&f));
    }

    #[test]
    fn eval_at_matches_closed_form() {
        let g = grid(16);
        let f = F::from_real_fn(&g, |x| (3.0 * x[0]).cos() + x[0].sin());
        let x = 0.123_f64;
        let v = f.eval_at(&[x])[0].re;
        assert!((v - ((3.0 * x).cos() + x.sin())).abs() < 1e-14);
    }

    #[test]
    fn single_precision_smoke() {
        let g = Grid::<f32>::one_d(32).unwrap();
        let s = Field::<f32>::from_real_fn(&g, |x| x[0].sin());
        assert!((s.c1_norm() - 2.0).abs() < 1e-5);
        assert!((s.sobolev_norm(1) - std::f32::consts::TAU.sqrt()).abs() < 1e-5);
    }
}
