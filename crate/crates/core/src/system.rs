//! First-order symmetric hyperbolic systems
//! `A₀(t,x,u) ∂_t u = Σ_j A_j(t,x,u) ∂_j u + g(t,x,u)` on the torus.

use std::cell::RefCell;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{Field, MatrixField};
use crate::grid::{Grid, ScalarKind};
use crate::linalg::{CMat, Cholesky};
use crate::mollifier::Mollifier;
use crate::scalar::{cplx, czero, Cplx, Real};

/// Coefficient depending on `(t, x)` only.
pub type SpaceTimeFn<T> = Arc<dyn Fn(T, &[T]) -> CMat<T> + Send + Sync>;
/// Coefficient depending on `(t, x, u)`.
pub type StateFn<T> = Arc<dyn Fn(T, &[T], &[Cplx<T>]) -> CMat<T> + Send + Sync>;
/// Source `g(t, x, u)` written into the output slice.
pub type SourceFn<T> = Arc<dyn Fn(T, &[T], &[Cplx<T>], &mut [Cplx<T>]) + Send + Sync>;

/// A matrix coefficient of the system.
#[derive(Clone)]
pub enum Coefficient<T: Real> {
    Constant(CMat<T>),
    SpaceTime(SpaceTimeFn<T>),
    State(StateFn<T>),
}

impl<T: Real> fmt::Debug for Coefficient<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant(m) => f.debug_tuple("Constant").field(m).finish(),
            Coefficient::SpaceTime(_) => f.write_str("SpaceTime(..)"),
            Coefficient::State(_) => f.write_str("State(..)"),
        }
    }
}

impl<T: Real> Coefficient<T> {
    pub fn space_time(f: impl Fn(T, &[T]) -> CMat<T> + Send + Sync + 'static) -> Self {
        Coefficient::SpaceTime(Arc::new(f))
    }

    pub fn state(f: impl Fn(T, &[T], &[Cplx<T>]) -> CMat<T> + Send + Sync + 'static) -> Self {
        Coefficient::State(Arc::new(f))
    }

    pub fn eval(&self, t: T, x: &[T], u: &[Cplx<T>]) -> CMat<T> {
        match self {
            Coefficient::Constant(m) => m.clone(),
            Coefficient::SpaceTime(f) => f(t, x),
            Coefficient::State(f) => f(t, x, u),
        }
    }

    pub fn depends_on_state(&self) -> bool {
        matches!(self, Coefficient::State(_))
    }

    fn as_constant(&self) -> Option<&CMat<T>> {
        match self {
            Coefficient::Constant(m) => Some(m),
            _ => None,
        }
    }
}

/// A first-order system together with its structural metadata.
///
/// `semilinear` is derived: it holds when neither `A₀` nor any `A_j`
/// depends on `u`. `punctured` is declared by the builder and checked by
/// [`validate_system`].
#[derive(Clone)]
pub struct HyperbolicSystem<T: Real> {
    dim: usize,
    width: usize,
    kind: ScalarKind,
    a0: Coefficient<T>,
    a_spatial: Vec<Coefficient<T>>,
    source: Option<SourceFn<T>>,
    punctured: bool,
    positivity_floor: T,
    a0_factor: Option<Arc<Cholesky>>,
}

impl<T: Real> fmt::Debug for HyperbolicSystem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HyperbolicSystem")
            .field("dim", &self.dim)
            .field("width", &self.width)
            .field("kind", &self.kind)
            .field("semilinear", &self.is_semilinear())
            .field("punctured", &self.punctured)
            .field("positivity_floor", &self.positivity_floor)
            .finish()
    }
}

impl<T: Real> HyperbolicSystem<T> {
    /// A system without source term (hence punctured).
    pub fn new(
        dim: usize,
        width: usize,
        kind: ScalarKind,
        a0: Coefficient<T>,
        a_spatial: Vec<Coefficient<T>>,
        positivity_floor: T,
    ) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::InvalidSystem(format!("dimension must be 1 or 2, got {dim}")));
        }
        if a_spatial.len() != dim {
            return Err(Error::InvalidSystem(format!(
                "expected {dim} spatial coefficients, got {}",
                a_spatial.len()
            )));
        }
        if width == 0 {
            return Err(Error::InvalidSystem("width must be positive".into()));
        }
        if !(positivity_floor > T::zero()) {
            return Err(Error::InvalidSystem("positivity floor must be positive".into()));
        }
        for c in std::iter::once(&a0).chain(a_spatial.iter()) {
            if let Some(m) = c.as_constant() {
                if m.dim() != width {
                    return Err(Error::InvalidSystem(format!(
                        "constant coefficient is {}×{}, expected {width}×{width}",
                        m.dim(),
                        m.dim()
                    )));
                }
            }
        }
        let a0_factor = match &a0 {
            Coefficient::Constant(m) => Some(Arc::new(m.cholesky().ok_or_else(|| {
                Error::NotPositiveDefinite { t: 0.0, x: Vec::new() }
            })?)),
            _ => None,
        };
        Ok(Self {
            dim,
            width,
            kind,
            a0,
            a_spatial,
            source: None,
            punctured: true,
            positivity_floor,
            a0_factor,
        })
    }

    /// Attaches the source `g`; `punctured` declares `g(t, x, 0) = 0`.
    pub fn with_source(
        mut self,
        g: impl Fn(T, &[T], &[Cplx<T>], &mut [Cplx<T>]) + Send + Sync + 'static,
        punctured: bool,
    ) -> Self {
        self.source = Some(Arc::new(g));
        self.punctured = punctured;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn kind(&self) -> ScalarKind {
        self.kind
    }

    pub fn a0(&self) -> &Coefficient<T> {
        &self.a0
    }

    pub fn a_spatial(&self) -> &[Coefficient<T>] {
        &self.a_spatial
    }

    pub fn has_source(&self) -> bool {
        self.source.is_some()
    }

    pub fn positivity_floor(&self) -> T {
        self.positivity_floor
    }

    pub fn is_semilinear(&self) -> bool {
        !self.a0.depends_on_state() && self.a_spatial.iter().all(|a| !a.depends_on_state())
    }

    pub fn is_punctured(&self) -> bool {
        self.punctured
    }

    /// Evaluates `g(t, x, u)`; zero when the system has no source.
    pub fn eval_source(&self, t: T, x: &[T], u: &[Cplx<T>], out: &mut [Cplx<T>]) {
        out.iter_mut().for_each(|z| *z = czero());
        if let Some(g) = &self.source {
            g(t, x, u, out);
        }
    }

    fn check_field(&self, u: &Field<T>) -> Result<()> {
        if u.grid().dim() != self.dim || u.width() != self.width {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// `A₀(t, x, u(x))` at every native collocation node.
    pub fn a0_field(&self, t: T, u: &Field<T>) -> Result<MatrixField<T>> {
        self.check_field(u)?;
        let grid = u.grid();
        if let Some(m) = self.a0.as_constant() {
            return Ok(MatrixField::constant(grid, m.clone()));
        }
        let p = grid.points();
        let vals = u.values();
        let w = self.width;
        let mats: Vec<CMat<T>> = (0..p)
            .map(|node| {
                let x = grid.node(node);
                let un: Vec<Cplx<T>> = (0..w).map(|c| vals[c * p + node]).collect();
                self.a0.eval(t, &x[..self.dim], &un)
            })
            .collect();
        MatrixField::from_mats(grid, w, mats)
    }
}

/// One validation probe `(t, x, u)`.
#[derive(Clone, Debug)]
pub struct Sample<T: Real> {
    pub t: T,
    pub x: Vec<T>,
    pub u: Vec<Cplx<T>>,
}

/// The documented sample set: `t ∈ {0, 1/4, 1/2, 3/4, 1}` times an 8-point
/// lattice per axis, crossed with `u = 0` and the supplied probes.
pub fn default_samples<T: Real>(sys: &HyperbolicSystem<T>, probes: &[Vec<Cplx<T>>]) -> Vec<Sample<T>> {
    let times: Vec<T> = (0..5).map(|i| T::lit(i as f64 * 0.25)).collect();
    let lattice: Vec<T> = (0..8).map(|i| T::lit(std::f64::consts::TAU * i as f64 / 8.0)).collect();
    let points: Vec<Vec<T>> = match sys.dim {
        1 => lattice.iter().map(|&a| vec![a]).collect(),
        _ => lattice
            .iter()
            .flat_map(|&a| lattice.iter().map(move |&b| vec![a, b]))
            .collect(),
    };
    let mut us = vec![vec![czero(); sys.width]];
    us.extend(probes.iter().cloned());
    let mut out = Vec::new();
    for &t in &times {
        for x in &points {
            for u in &us {
                out.push(Sample { t, x: x.clone(), u: u.clone() });
            }
        }
    }
    out
}

/// Outcome of [`validate_system`].
#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub a0_hermitian_defect: f64,
    pub spatial_hermitian_defect: Vec<f64>,
    pub a0_min_eigenvalue: f64,
    pub positivity_floor: f64,
    pub puncture_defect: f64,
    pub samples: usize,
    pub failures: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub const SYMMETRY_TOL: f64 = 1e-10;
pub const PUNCTURE_TOL: f64 = 1e-12;

/// Checks symmetry of every coefficient, `A₀ ≥ c·I`, and the declared
/// puncture `g(t, x, 0) = 0` on the given samples.
pub fn validate_system<T: Real>(sys: &HyperbolicSystem<T>, samples: &[Sample<T>]) -> Result<ValidationReport> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("validation needs at least one sample".into()));
    }
    let mut rep = ValidationReport {
        a0_hermitian_defect: 0.0,
        spatial_hermitian_defect: vec![0.0; sys.dim],
        a0_min_eigenvalue: f64::INFINITY,
        positivity_floor: sys.positivity_floor.to_f64_lossy(),
        puncture_defect: 0.0,
        samples: samples.len(),
        failures: Vec::new(),
    };
    let mut g = vec![czero(); sys.width];
    for s in samples {
        if s.u.len() != sys.width || s.x.len() != sys.dim {
            return Err(Error::InvalidArgument("sample shape does not match the system".into()));
        }
        let a0 = sys.a0.eval(s.t, &s.x, &s.u);
        rep.a0_hermitian_defect = rep.a0_hermitian_defect.max(a0.hermitian_defect().to_f64_lossy());
        rep.a0_min_eigenvalue = rep.a0_min_eigenvalue.min(a0.min_eigenvalue());
        for (j, a) in sys.a_spatial.iter().enumerate() {
            let d = a.eval(s.t, &s.x, &s.u).hermitian_defect().to_f64_lossy();
            rep.spatial_hermitian_defect[j] = rep.spatial_hermitian_defect[j].max(d);
        }
        if sys.punctured && s.u.iter().all(|z| *z == czero()) {
            sys.eval_source(s.t, &s.x, &s.u, &mut g);
            let d = g.iter().fold(0.0f64, |m, z| m.max(z.norm().to_f64_lossy()));
            rep.puncture_defect = rep.puncture_defect.max(d);
        }
    }
    if !(rep.a0_hermitian_defect <= SYMMETRY_TOL) {
        rep.failures.push(format!("A0 not Hermitian (defect {:.3e})", rep.a0_hermitian_defect));
    }
    for (j, d) in rep.spatial_hermitian_defect.iter().enumerate() {
        if !(*d <= SYMMETRY_TOL) {
            rep.failures.push(format!("A{} not Hermitian (defect {d:.3e})", j + 1));
        }
    }
    let floor = rep.positivity_floor;
    if !(rep.a0_min_eigenvalue >= floor * (1.0 - 1e-12)) {
        rep.failures.push(format!(
            "A0 smallest eigenvalue {:.3e} below floor {floor:.3e}",
            rep.a0_min_eigenvalue
        ));
    }
    if !(rep.puncture_defect <= PUNCTURE_TOL) {
        rep.failures.push(format!("source does not vanish at 0 (defect {:.3e})", rep.puncture_defect));
    }
    Ok(rep)
}

/// Spatial part `Σ_j A_j ∂_j v` for constant coefficients, slot by slot.
fn constant_principal<T: Real>(mats: &[&CMat<T>], v: &Field<T>, kind: ScalarKind) -> Result<Field<T>> {
    let grid = v.grid().clone();
    let p = grid.points();
    let w = v.width();
    let mut out = vec![czero(); w * p];
    let mut vin = vec![czero(); w];
    let mut acc = vec![czero(); w];
    let mut tmp = vec![czero(); w];
    for slot in 0..p {
        let xi = grid.frequency(slot);
        for c in 0..w {
            vin[c] = v.coeffs()[c * p + slot];
        }
        acc.iter_mut().for_each(|z| *z = czero());
        for (j, m) in mats.iter().enumerate() {
            if xi[j] == 0 {
                continue;
            }
            m.mul_vec_into(&vin, &mut tmp);
            let ik = cplx(T::zero(), T::lit(xi[j] as f64));
            for c in 0..w {
                acc[c] += tmp[c] * ik;
            }
        }
        for c in 0..w {
            out[c * p + slot] = acc[c];
        }
    }
    Field::from_coeffs(&grid, w, kind, out)
}

/// `L(t)v + g(t, v)` without any smoothing: `Σ_j A_j(t,x,v) ∂_j v + g(t,x,v)`.
pub fn spatial_operator<T: Real>(sys: &HyperbolicSystem<T>, t: T, v: &Field<T>) -> Result<Field<T>> {
    sys.check_field(v)?;
    let w = sys.width;
    let dim = sys.dim;
    let constants: Option<Vec<&CMat<T>>> = sys.a_spatial.iter().map(|a| a.as_constant()).collect();
    if let Some(mats) = constants {
        let mut l = constant_principal(&mats, v, sys.kind)?;
        if sys.source.is_some() {
            let g = Field::pointwise(&[v], w, sys.kind, |x, u, out| sys.eval_source(t, x, u, out))?;
            l = l.try_add(&g)?;
        }
        return Ok(l);
    }
    let derivs: Vec<Field<T>> = (0..dim).map(|j| v.derivative(j)).collect::<Result<_>>()?;
    let mut inputs: Vec<&Field<T>> = vec![v];
    inputs.extend(derivs.iter());
    Field::pointwise(&inputs, w, sys.kind, |x, vals, out| {
        let u = &vals[..w];
        sys.eval_source(t, x, u, out);
        for (j, a) in sys.a_spatial.iter().enumerate() {
            let du = &vals[(j + 1) * w..(j + 2) * w];
            let m = a.eval(t, x, u);
            m.mul_vec_acc(du, out);
        }
    })
}

/// Applies `A₀(t, x, v)⁻¹` pointwise to `w`.
fn apply_a0_inverse<T: Real>(sys: &HyperbolicSystem<T>, t: T, v: &Field<T>, w: Field<T>) -> Result<Field<T>> {
    if let Some(chol) = &sys.a0_factor {
        let grid = w.grid().clone();
        let p = grid.points();
        let n = sys.width;
        let mut coeffs = w.coeffs().to_vec();
        let mut buf = vec![czero(); n];
        for slot in 0..p {
            for c in 0..n {
                buf[c] = coeffs[c * p + slot];
            }
            chol.solve_in_place(&mut buf);
            for c in 0..n {
                coeffs[c * p + slot] = buf[c];
            }
        }
        return Field::from_coeffs(&grid, n, w.kind(), coeffs);
    }
    let n = sys.width;
    let failure: RefCell<Option<Vec<f64>>> = RefCell::new(None);
    let out = Field::pointwise(&[&w, v], n, sys.kind, |x, vals, out| {
        let a0 = sys.a0.eval(t, x, &vals[n..]);
        out.copy_from_slice(&vals[..n]);
        match a0.cholesky() {
            Some(c) => c.solve_in_place(out),
            None => {
                let mut f = failure.borrow_mut();
                if f.is_none() {
                    *f = Some(x.iter().map(|v| v.to_f64_lossy()).collect());
                }
            }
        }
    })?;
    if let Some(x) = failure.into_inner() {
        return Err(Error::NotPositiveDefinite { t: t.to_f64_lossy(), x });
    }
    Ok(out)
}

/// The smoothed right-hand side
/// `A₀(t,x,J_ε u)⁻¹ (J_ε[Σ_j A_j(t,x,J_ε u) ∂_j J_ε u] + J_ε[g(t,x,J_ε u)])`.
pub fn mollified_rhs<T: Real>(
    sys: &HyperbolicSystem<T>,
    m: &Mollifier<T>,
    t: T,
    u: &Field<T>,
) -> Result<Field<T>> {
    sys.check_field(u)?;
    let v = u.mollify(m);
    let w = spatial_operator(sys, t, &v)?.mollify(m);
    apply_a0_inverse(sys, t, &v, w)
}

/// Residual `A₀ ∂_t u − Σ_j A_j ∂_j u − g` of an exact trajectory, given
/// the state and its time derivative at time `t`.
pub fn system_residual<T: Real>(
    sys: &HyperbolicSystem<T>,
    t: T,
    u: &Field<T>,
    du_dt: &Field<T>,
) -> Result<Field<T>> {
    sys.check_field(u)?;
    sys.check_field(du_dt)?;
    let n = sys.width;
    let lhs = Field::pointwise(&[du_dt, u], n, sys.kind, |x, vals, out| {
        sys.a0.eval(t, x, &vals[n..]).mul_vec_into(&vals[..n], out);
    })?;
    lhs.try_sub(&spatial_operator(sys, t, u)?)
}

/// `Σ_{|α|≤k} Re⟨A₀(t,x,u) ∂^α u, ∂^α u⟩`, the weighted Sobolev energy.
pub fn weighted_energy<T: Real>(sys: &HyperbolicSystem<T>, t: T, u: &Field<T>, k: usize) -> Result<T> {
    if let Some(m) = sys.a0.as_constant() {
        if *m == CMat::identity(sys.width) {
            let s = u.sobolev_norm(k);
            return Ok(s * s);
        }
    }
    let weight = sys.a0_field(t, u)?;
    let mut acc = T::zero();
    for alpha in multi_indices(sys.dim, k) {
        let d = u.partial(&alpha)?;
        acc += d.weighted_inner(&d, &weight)?.re;
    }
    Ok(acc)
}

/// All multi-indices `α` with `|α| ≤ k` in `dim` variables.
pub fn multi_indices(dim: usize, k: usize) -> Vec<Vec<usize>> {
    match dim {
        1 => (0..=k).map(|a| vec![a]).collect(),
        _ => (0..=k).flat_map(|a| (0..=(k - a)).map(move |b| vec![a, b])).collect(),
    }
}

/// Principal part `A_ij(t, x)`, a real symmetric `dim × dim` array.
pub type PrincipalFn<T> = Arc<dyn Fn(T, &[T]) -> Vec<Vec<T>> + Send + Sync>;
/// Drift coefficients `b_j(t, x)` multiplying `∂_j u`.
pub type DriftFn<T> = Arc<dyn Fn(T, &[T]) -> Vec<T> + Send + Sync>;

/// A second-order operator
/// `∂_t² u = Σ_ij A_ij(t,x) ∂_i∂_j u + Σ_j b_j(t,x) ∂_j u + p(t, x, u, ∂_t u, ∇u)`
/// acting componentwise on `u ∈ 𝕂^m`.
#[derive(Clone)]
pub struct SecondOrderOp<T: Real> {
    pub dim: usize,
    pub components: usize,
    pub kind: ScalarKind,
    pub principal: PrincipalFn<T>,
    pub drift: Option<DriftFn<T>>,
    /// `p` receives the prolonged state `(u, ∂_t u, ∂_1 u, …)` and writes `m` values.
    pub zeroth: Option<SourceFn<T>>,
    /// Declares `p(t, x, 0) = 0`.
    pub zeroth_punctured: bool,
}

impl<T: Real> fmt::Debug for SecondOrderOp<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SecondOrderOp")
            .field("dim", &self.dim)
            .field("components", &self.components)
            .finish_non_exhaustive()
    }
}

impl<T: Real> SecondOrderOp<T> {
    /// Flat wave operator `∂_t² u = c² Δu` on `m` components.
    pub fn wave(dim: usize, components: usize, speed: T) -> Self {
        let c2 = speed * speed;
        Self {
            dim,
            components,
            kind: ScalarKind::Real,
            principal: Arc::new(move |_, _| {
                (0..dim)
                    .map(|i| (0..dim).map(|j| if i == j { c2 } else { T::zero() }).collect())
                    .collect()
            }),
            drift: None,
            zeroth: None,
            zeroth_punctured: true,
        }
    }

    /// Width of the prolonged system, `m (2 + dim)`.
    pub fn prolonged_width(&self) -> usize {
        self.components * (2 + self.dim)
    }
}

fn principal_matrix<T: Real>(a: &[Vec<T>]) -> CMat<T> {
    let rows: Vec<&[T]> = a.iter().map(|r| r.as_slice()).collect();
    CMat::from_real_rows(&rows)
}

/// The first prolongation: a first-order system in `(u, ∂_t u, ∂_1 u, …)`.
///
/// Blocks of width `m` are ordered `u`, `v = ∂_t u`, `w_1 = ∂_1 u`, ….
/// `A₀ = diag(I, I, A ⊗ I)` and `A_k` couples `v` with `w_j` through `A_kj`;
/// the source carries `v` into the `u` row and the drift and `p` into the
/// `v` row. The positivity floor is `min(1, λ_min(A))` over the default
/// sample lattice.
pub fn prolong_second_order<T: Real>(op: &SecondOrderOp<T>) -> Result<HyperbolicSystem<T>> {
    let (dim, m) = (op.dim, op.components);
    if !(dim == 1 || dim == 2) || m == 0 {
        return Err(Error::InvalidSystem("second-order operator needs dim 1 or 2 and m ≥ 1".into()));
    }
    let mut floor = f64::INFINITY;
    let times = [0.0, 0.25, 0.5, 0.75, 1.0];
    let lattice: Vec<f64> = (0..8).map(|i| std::f64::consts::TAU * i as f64 / 8.0).collect();
    for &t in &times {
        for &a in &lattice {
            for &b in lattice.iter().take(if dim == 1 { 1 } else { 8 }) {
                let x: Vec<T> = if dim == 1 { vec![T::lit(a)] } else { vec![T::lit(a), T::lit(b)] };
                let pm = (op.principal)(T::lit(t), &x);
                if pm.len() != dim || pm.iter().any(|r| r.len() != dim) {
                    return Err(Error::InvalidSystem("principal part has the wrong shape".into()));
                }
                let mat = principal_matrix(&pm);
                let d = mat.hermitian_defect().to_f64_lossy();
                if d > SYMMETRY_TOL {
                    return Err(Error::NonSymmetricPrincipal(d));
                }
                let lmin = mat.min_eigenvalue();
                if !(lmin > 0.0) {
                    return Err(Error::NotPositiveDefinite {
                        t,
                        x: x.iter().map(|v| v.to_f64_lossy()).collect(),
                    });
                }
                floor = floor.min(lmin);
            }
        }
    }
    let floor = T::lit(floor.min(1.0));
    let width = op.prolonged_width();
    let principal = op.principal.clone();
    let a0 = Coefficient::space_time(move |t, x| {
        let a = principal(t, x);
        let mut mat = CMat::identity(width);
        for i in 0..dim {
            for j in 0..dim {
                for c in 0..m {
                    mat.set((2 + i) * m + c, (2 + j) * m + c, cplx(a[i][j], T::zero()));
                }
            }
        }
        mat
    });
    let a_spatial = (0..dim)
        .map(|k| {
            let principal = op.principal.clone();
            Coefficient::space_time(move |t, x| {
                let a = principal(t, x);
                let mut mat = CMat::zeros(width);
                for j in 0..dim {
                    let v = cplx(a[k][j], T::zero());
                    for c in 0..m {
                        mat.set(m + c, (2 + j) * m + c, v);
                        mat.set((2 + j) * m + c, m + c, v);
                    }
                }
                mat
            })
        })
        .collect();
    let sys = HyperbolicSystem::new(dim, width, op.kind, a0, a_spatial, floor)?;
    let drift = op.drift.clone();
    let zeroth = op.zeroth.clone();
    let punctured = op.zeroth_punctured;
    let scratch_len = m;
    Ok(sys.with_source(
        move |t, x, u, out| {
            out[..m].copy_from_slice(&u[m..2 * m]);
            if let Some(b) = &drift {
                let bj = b(t, x);
                for (j, &bv) in bj.iter().enumerate().take(dim) {
                    for c in 0..m {
                        out[m + c] += u[(2 + j) * m + c] * bv;
                    }
                }
            }
            if let Some(p) = &zeroth {
                let mut buf = vec![czero(); scratch_len];
                p(t, x, u, &mut buf);
                for c in 0..m {
                    out[m + c] += buf[c];
                }
            }
        },
        punctured,
    ))
}

/// Residual `∂_t² u − Σ A_ij ∂_i∂_j u − Σ b_j ∂_j u − p` of a second-order
/// operator on an exact solution, given `u`, `∂_t u` and `∂_t² u` at `t`.
pub fn second_order_residual<T: Real>(
    op: &SecondOrderOp<T>,
    t: T,
    u: &Field<T>,
    u_t: &Field<T>,
    u_tt: &Field<T>,
) -> Result<Field<T>> {
    let (dim, m) = (op.dim, op.components);
    let grads: Vec<Field<T>> = (0..dim).map(|j| u.derivative(j)).collect::<Result<_>>()?;
    let mut hess = Vec::new();
    for i in 0..dim {
        for j in 0..dim {
            hess.push(grads[j].derivative(i)?);
        }
    }
    let mut inputs: Vec<&Field<T>> = vec![u, u_t];
    inputs.extend(grads.iter());
    inputs.push(u_tt);
    inputs.extend(hess.iter());
    Field::pointwise(&inputs, m, op.kind, |x, vals, out| {
        let state = &vals[..(2 + dim) * m];
        let utt = &vals[(2 + dim) * m..(3 + dim) * m];
        let hs = &vals[(3 + dim) * m..];
        let a = (op.principal)(t, x);
        out.copy_from_slice(utt);
        for i in 0..dim {
            for j in 0..dim {
                for c in 0..m {
                    out[c] -= hs[(i * dim + j) * m + c] * a[i][j];
                }
            }
        }
        if let Some(b) = &op.drift {
            let bj = b(t, x);
            for j in 0..dim {
                for c in 0..m {
                    out[c] -= state[(2 + j) * m + c] * bj[j];
                }
            }
        }
        if let Some(p) = &op.zeroth {
            let mut buf = vec![czero(); m];
            p(t, x, state, &mut buf);
            for c in 0..m {
                out[c] -= buf[c];
            }
        }
    })
}

/// Packs `(u, ∂_t u, ∇u)` into the prolonged block order.
pub fn prolonged_state<T: Real>(u: &Field<T>, u_t: &Field<T>) -> Result<Field<T>> {
    let grads: Vec<Field<T>> = (0..u.grid().dim()).map(|j| u.derivative(j)).collect::<Result<_>>()?;
    let mut parts: Vec<&Field<T>> = vec![u, u_t];
    parts.extend(grads.iter());
    Field::stack(&parts)
}

/// Grid used by tests and scenarios for a system of this shape.
pub fn grid_for<T: Real>(sys: &HyperbolicSystem<T>, modes: usize) -> Result<Arc<Grid<T>>> {
    Grid::new(sys.dim, modes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;

    type S = HyperbolicSystem<f64>;

    #[test]
    fn advection_validates_with_unit_floor() {
        let sys = bundled::advection::<f64>(1);
        let rep = validate_system(&sys, &default_samples(&sys, &[])).unwrap();
        assert!(rep.passed(), "{:?}", rep.failures);
        assert_eq!(rep.a0_min_eigenvalue, 1.0);
        assert_eq!(rep.positivity_floor, 1.0);
    }

    #[test]
    fn non_hermitian_spatial_fails() {
        let a1 = CMat::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let sys = S::new(
            1,
            2,
            ScalarKind::Real,
            Coefficient::Constant(CMat::identity(2)),
            vec![Coefficient::Constant(a1)],
            1.0,
        )
        .unwrap();
        let rep = validate_system(&sys, &default_samples(&sys, &[])).unwrap();
        assert!(!rep.passed());
        assert_eq!(rep.spatial_hermitian_defect[0], 1.0);
    }

    #[test]
    fn weak_positivity_fails() {
        let sys = S::new(
            1,
            2,
            ScalarKind::Real,
            Coefficient::Constant(CMat::from_real_diag(&[1.0, 1e-9])),
            vec![Coefficient::Constant(CMat::zeros(2))],
            1e-6,
        )
        .unwrap();
        let rep = validate_system(&sys, &default_samples(&sys, &[])).unwrap();
        assert!(!rep.passed());
        assert!(rep.failures[0].contains("below floor"));
    }

    #[test]
    fn empty_sample_set_is_rejected() {
        let sys = bundled::advection::<f64>(1);
        assert!(validate_system(&sys, &[]).is_err());
    }

    #[test]
    fn false_puncture_claim_fails() {
        let sys = bundled::advection::<f64>(1).with_source(|_, _, _, out| out[0] = cplx(1.0, 0.0), true);
        let rep = validate_system(&sys, &default_samples(&sys, &[])).unwrap();
        assert!(!rep.passed());
        assert_eq!(rep.puncture_defect, 1.0);
    }

    #[test]
    fn advection_rhs_is_squared_multiplier() {
        let g = Grid::<f64>::one_d(32).unwrap();
        let sys = bundled::advection::<f64>(1);
        let eps = 0.05;
        let m = Mollifier::new(eps).unwrap();
        let u = Field::from_modes(&g, ScalarKind::Complex, &[(&[5], cplx(1.0, 0.0))]).unwrap();
        let sys = S::new(
            1,
            1,
            ScalarKind::Complex,
            sys.a0().clone(),
            sys.a_spatial().to_vec(),
            1.0,
        )
        .unwrap();
        let rhs = mollified_rhs(&sys, &m, 0.0, &u).unwrap();
        let th = crate::mollifier::kernel_hat(1, 5.0 * eps);
        let expect = cplx(0.0, 5.0 * th * th);
        assert!((rhs.coeff(0, &[5]) - expect).norm() < 1e-15);
        assert!(rhs.l2_norm() - rhs.coeff(0, &[5]).norm() * std::f64::consts::TAU.sqrt() < 1e-14);
    }

    #[test]
    fn punctured_rhs_vanishes_at_zero() {
        let g = Grid::<f64>::one_d(16).unwrap();
        let sys = bundled::burgers::<f64>();
        let m = Mollifier::new(0.1).unwrap();
        let z = Field::zeros(&g, 1, ScalarKind::Real);
        assert_eq!(mollified_rhs(&sys, &m, 0.3, &z).unwrap().sup_norm(), 0.0);
    }

    #[test]
    fn doubling_a0_halves_rhs() {
        let g = Grid::<f64>::one_d(32).unwrap();
        let m = Mollifier::new(0.1).unwrap();
        let base = bundled::square_growth::<f64>();
        let twice = S::new(
            1,
            1,
            ScalarKind::Real,
            Coefficient::space_time(|_, _| CMat::scaled_identity(1, 2.0)),
            base.a_spatial().to_vec(),
            1.0,
        )
        .unwrap()
        .with_source(|_, _, u, out| out[0] = u[0] * u[0], true);
        let u = Field::from_real_fn(&g, |x| 0.5 + 0.3 * x[0].sin());
        let r1 = mollified_rhs(&base, &m, 0.0, &u).unwrap();
        let r2 = mollified_rhs(&twice, &m, 0.0, &u).unwrap();
        assert!(r1.scale(0.5).max_abs_diff(&r2).unwrap() < 1e-14);
    }

    #[test]
    fn non_positive_a0_reports_location() {
        let g = Grid::<f64>::one_d(16).unwrap();
        let sys = S::new(
            1,
            1,
            ScalarKind::Real,
            Coefficient::space_time(|_, x: &[f64]| CMat::scaled_identity(1, x[0].cos())),
            vec![Coefficient::Constant(CMat::identity(1))],
            1.0,
        )
        .unwrap();
        let u = Field::constant(&g, 1.0);
        let err = mollified_rhs(&sys, &Mollifier::identity(), 0.0, &u).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { .. }));
    }

    #[test]
    fn wave_prolongation_has_three_components_and_validates() {
        let op = SecondOrderOp::<f64>::wave(1, 1, 1.0);
        let sys = prolong_second_order(&op).unwrap();
        assert_eq!(sys.width(), 3);
        assert!(sys.is_semilinear() && sys.is_punctured());
        let rep = validate_system(&sys, &default_samples(&sys, &[])).unwrap();
        assert!(rep.passed(), "{:?}", rep.failures);
    }

    #[test]
    fn dalembert_solution_satisfies_prolonged_system() {
        let g = Grid::<f64>::one_d(32).unwrap();
        let op = SecondOrderOp::<f64>::wave(1, 1, 1.0);
        let sys = prolong_second_order(&op).unwrap();
        let t = 0.7;
        // u = sin(x + t): state (u, u_t, u_x) and its time derivative.
        let u = Field::from_real_fn(&g, |x| (x[0] + t).sin());
        let ut = Field::from_real_fn(&g, |x| (x[0] + t).cos());
        let utt = Field::from_real_fn(&g, |x| -(x[0] + t).sin());
        let state = prolonged_state(&u, &ut).unwrap();
        let dstate = prolonged_state(&ut, &utt).unwrap();
        let r = system_residual(&sys, t, &state, &dstate).unwrap();
        assert!(r.sup_norm() <= 1e-8);
    }

    #[test]
    fn variable_principal_prolongation_floor() {
        let op = SecondOrderOp::<f64> {
            dim: 2,
            components: 1,
            kind: ScalarKind::Real,
            principal: Arc::new(|_, x| {
                let a = 1.5 + 0.5 * x[0].sin();
                vec![vec![a, 0.2], vec![0.2, 2.0]]
            }),
            drift: None,
            zeroth: None,
            zeroth_punctured: true,
        };
        let sys = prolong_second_order(&op).unwrap();
        let samples = default_samples(&sys, &[]);
        let rep = validate_system(&sys, &samples).unwrap();
        assert!(rep.passed(), "{:?}", rep.failures);
        // Eigenvalue oracle: the smallest eigenvalue of A over the lattice.
        let mut lmin = f64::INFINITY;
        for s in &samples {
            let a = 1.5 + 0.5 * s.x[0].sin();
            let tr = a + 2.0;
            let det = a * 2.0 - 0.04;
            lmin = lmin.min(tr / 2.0 - ((tr / 2.0).powi(2) - det).sqrt());
        }
        assert!(sys.positivity_floor() >= lmin.min(1.0) * (1.0 - 1e-12));
        assert!(rep.spatial_hermitian_defect.iter().all(|d| *d <= 1e-12));
    }

    #[test]
    fn non_symmetric_principal_is_rejected() {
        let op = SecondOrderOp::<f64> {
            dim: 2,
            components: 1,
            kind: ScalarKind::Real,
            principal: Arc::new(|_, _| vec![vec![1.0, 0.5], vec![0.0, 1.0]]),
            drift: None,
            zeroth: None,
            zeroth_punctured: true,
        };
        assert!(matches!(prolong_second_order(&op), Err(Error::NonSymmetricPrincipal(_))));
    }

    #[test]
    fn zero_p_gives_punctured_source() {
        let op = SecondOrderOp::<f64>::wave(2, 1, 1.0);
        let sys = prolong_second_order(&op).unwrap();
        let mut out = vec![czero(); sys.width()];
        sys.eval_source(0.0, &[0.1, 0.2], &vec![czero(); sys.width()], &mut out);
        assert!(out.iter().all(|z| *z == czero()));
    }

    #[test]
    fn weighted_energy_with_identity_is_sobolev() {
        let g = Grid::<f64>::one_d(16).unwrap();
        let sys = bundled::advection::<f64>(1);
        let u = Field::from_real_fn(&g, |x| x[0].sin() + 0.5 * (2.0 * x[0]).cos());
        let e = weighted_energy(&sys, 0.0, &u, 2).unwrap();
        assert!((e - u.sobolev_norm(2).powi(2)).abs() < 1e-12);
    }
}
