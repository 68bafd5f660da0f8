//! Pointwise finite-difference checks of the tensor identities behind the
//! Dirac–Maxwell gauge, conformal and constraint formulas, on flat or
//! conformally flat charts of dimension `n ≤ 4`.
//!
//! Coordinates are `x = (t, x¹, …, x^{n−1})`. Forms are given by their
//! coordinate components (`A_μ`, `ω_{μν}` row-major). Each checker compares
//! two discretisations whose truncation errors differ, so the reported
//! Richardson order is meaningful; when both sides agree to roundoff at
//! every step the identity is reported as exact instead.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::error::{Error, Result};

type C64 = Complex<f64>;

/// Analytic map from a spacetime point to its components.
pub type Evaluator = Arc<dyn Fn(&[f64]) -> Vec<C64> + Send + Sync>;

/// Residuals at or below this level are treated as exact agreement.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;

/// Central-difference accuracy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FdOrder {
    Second,
    Fourth,
}

impl FdOrder {
    pub fn value(self) -> u32 {
        match self {
            FdOrder::Second => 2,
            FdOrder::Fourth => 4,
        }
    }
}

/// What an [`AnalyticField`] represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    Scalar,
    OneForm,
    /// Antisymmetric `n × n` component matrix, row-major.
    TwoForm,
    Spinor,
}

/// An analytic input together with its finite-difference settings and the
/// box it is defined on.
#[derive(Clone)]
pub struct AnalyticField {
    pub evaluator: Evaluator,
    pub kind: FieldKind,
    pub dim: usize,
    pub fd_step: f64,
    pub fd_order: FdOrder,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl std::fmt::Debug for AnalyticField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AnalyticField")
            .field("kind", &self.kind)
            .field("dim", &self.dim)
            .field("fd_step", &self.fd_step)
            .field("fd_order", &self.fd_order)
            .finish()
    }
}

/// Default step on an O(1) test box.
pub const DEFAULT_STEP: f64 = 1e-3;

impl AnalyticField {
    fn new(kind: FieldKind, dim: usize, evaluator: Evaluator) -> Self {
        Self {
            evaluator,
            kind,
            dim,
            fd_step: DEFAULT_STEP,
            fd_order: FdOrder::Second,
            lo: vec![-10.0; dim],
            hi: vec![10.0; dim],
        }
    }

    pub fn scalar(dim: usize, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(FieldKind::Scalar, dim, Arc::new(move |x| vec![C64::new(f(x), 0.0)]))
    }

    pub fn one_form(dim: usize, f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        Self::new(FieldKind::OneForm, dim, Arc::new(move |x| f(x).into_iter().map(|v| C64::new(v, 0.0)).collect()))
    }

    pub fn two_form(dim: usize, f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        Self::new(FieldKind::TwoForm, dim, Arc::new(move |x| f(x).into_iter().map(|v| C64::new(v, 0.0)).collect()))
    }

    pub fn spinor(dim: usize, f: impl Fn(&[f64]) -> Vec<C64> + Send + Sync + 'static) -> Self {
        Self::new(FieldKind::Spinor, dim, Arc::new(f))
    }

    pub fn with_step(mut self, h: f64) -> Self {
        self.fd_step = h;
        self
    }

    pub fn with_order(mut self, order: FdOrder) -> Self {
        self.fd_order = order;
        self
    }

    pub fn with_box(mut self, lo: Vec<f64>, hi: Vec<f64>) -> Self {
        self.lo = lo;
        self.hi = hi;
        self
    }

    pub fn eval(&self, x: &[f64]) -> Vec<C64> {
        (self.evaluator)(x)
    }

    /// Expected number of components.
    pub fn width(&self) -> usize {
        match self.kind {
            FieldKind::Scalar => 1,
            FieldKind::OneForm => self.dim,
            FieldKind::TwoForm => self.dim * self.dim,
            FieldKind::Spinor => spinor_width(self.dim),
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        let inside = x.len() == self.dim && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| v >= l && v <= h);
        if inside {
            Ok(())
        } else {
            Err(Error::OutsideBox(x.to_vec()))
        }
    }

    fn expect(&self, kind: FieldKind, dim: usize, what: &str) -> Result<()> {
        if self.kind != kind || self.dim != dim {
            return Err(Error::InvalidArgument(format!("{what}: expected a {kind:?} in dimension {dim}")));
        }
        Ok(())
    }

    fn stencil(&self) -> Stencil {
        Stencil { h: self.fd_step, order: self.fd_order }
    }
}

/// Spinor dimension used in spacetime dimension `n`.
pub fn spinor_width(n: usize) -> usize {
    if n <= 3 {
        2
    } else {
        4
    }
}

#[derive(Clone, Copy, Debug)]
struct Stencil {
    h: f64,
    order: FdOrder,
}

impl Stencil {
    fn doubled(self) -> Self {
        Self { h: self.h * 2.0, order: self.order }
    }

    fn weights(self) -> &'static [(f64, f64)] {
        match self.order {
            FdOrder::Second => &[(1.0, 0.5), (-1.0, -0.5)],
            FdOrder::Fourth => &[(2.0, -1.0 / 12.0), (1.0, 8.0 / 12.0), (-1.0, -8.0 / 12.0), (-2.0, 1.0 / 12.0)],
        }
    }

    /// `∂_i f(x)`.
    fn d1<F: Fn(&[f64]) -> Vec<C64>>(self, f: &F, x: &[f64], i: usize) -> Vec<C64> {
        let mut y = x.to_vec();
        let mut acc: Vec<C64> = Vec::new();
        for &(k, w) in self.weights() {
            y[i] = x[i] + k * self.h;
            let v = f(&y);
            if acc.is_empty() {
                acc = vec![C64::new(0.0, 0.0); v.len()];
            }
            for (a, b) in acc.iter_mut().zip(v) {
                *a += b * w;
            }
        }
        acc.iter().map(|a| a / self.h).collect()
    }

    /// `∂_i∂_j f(x)` with a direct stencil (not nested first differences).
    fn d2<F: Fn(&[f64]) -> Vec<C64>>(self, f: &F, x: &[f64], i: usize, j: usize) -> Vec<C64> {
        let mut y = x.to_vec();
        if i != j {
            let mut acc: Vec<C64> = Vec::new();
            for &(ki, wi) in self.weights() {
                for &(kj, wj) in self.weights() {
                    y[i] = x[i] + ki * self.h;
                    y[j] = x[j] + kj * self.h;
                    let v = f(&y);
                    if acc.is_empty() {
                        acc = vec![C64::new(0.0, 0.0); v.len()];
                    }
                    for (a, b) in acc.iter_mut().zip(v) {
                        *a += b * (wi * wj);
                    }
                }
            }
            return acc.iter().map(|a| a / (self.h * self.h)).collect();
        }
        let w: &[(f64, f64)] = match self.order {
            FdOrder::Second => &[(1.0, 1.0), (0.0, -2.0), (-1.0, 1.0)],
            FdOrder::Fourth => &[
                (2.0, -1.0 / 12.0),
                (1.0, 16.0 / 12.0),
                (0.0, -30.0 / 12.0),
                (-1.0, 16.0 / 12.0),
                (-2.0, -1.0 / 12.0),
            ],
        };
        let mut acc: Vec<C64> = Vec::new();
        for &(k, wk) in w {
            y[i] = x[i] + k * self.h;
            let v = f(&y);
            if acc.is_empty() {
                acc = vec![C64::new(0.0, 0.0); v.len()];
            }
            for (a, b) in acc.iter_mut().zip(v) {
                *a += b * wk;
            }
        }
        acc.iter().map(|a| a / (self.h * self.h)).collect()
    }
}

fn re(v: &[C64]) -> Vec<f64> {
    v.iter().map(|z| z.re).collect()
}

fn cvec(v: &[f64]) -> Vec<C64> {
    v.iter().map(|&r| C64::new(r, 0.0)).collect()
}

fn minkowski(n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::identity(n, n);
    m[(0, 0)] = -1.0;
    m
}

/// Geometry of the background chart.
#[derive(Clone, Debug)]
pub enum ChartForm {
    Minkowski,
    /// `e^{2u} η`.
    ConformallyFlat(AnalyticField),
    /// `−β dt² + a² δ`.
    Sliced { beta: AnalyticField, a: AnalyticField },
}

/// A metric chart on `ℝ^{1,n−1}`.
#[derive(Clone, Debug)]
pub struct MetricChart {
    pub form: ChartForm,
    pub dim: usize,
}

impl MetricChart {
    pub fn minkowski(dim: usize) -> Self {
        Self { form: ChartForm::Minkowski, dim }
    }

    pub fn conformally_flat(expo: AnalyticField) -> Self {
        let dim = expo.dim;
        Self { form: ChartForm::ConformallyFlat(expo), dim }
    }

    pub fn sliced(beta: AnalyticField, a: AnalyticField) -> Result<Self> {
        if beta.dim != a.dim || beta.kind != FieldKind::Scalar || a.kind != FieldKind::Scalar {
            return Err(Error::InvalidArgument("β and a must be scalar fields of equal dimension".into()));
        }
        let dim = beta.dim;
        Ok(Self { form: ChartForm::Sliced { beta, a }, dim })
    }

    pub fn metric(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.dim;
        match &self.form {
            ChartForm::Minkowski => minkowski(n),
            ChartForm::ConformallyFlat(u) => minkowski(n) * (2.0 * u.eval(x)[0].re).exp(),
            ChartForm::Sliced { beta, a } => {
                let mut m = DMatrix::identity(n, n) * a.eval(x)[0].re.powi(2);
                m[(0, 0)] = -beta.eval(x)[0].re;
                m
            }
        }
    }

    /// Fails unless `β > 0` and `a > 0` at every point.
    pub fn validate(&self, points: &[Vec<f64>]) -> Result<()> {
        if let ChartForm::Sliced { beta, a } = &self.form {
            for x in points {
                if !(beta.eval(x)[0].re > 0.0) || !(a.eval(x)[0].re > 0.0) {
                    return Err(Error::InvalidArgument(format!("β and a must be positive, fails at {x:?}")));
                }
            }
        }
        Ok(())
    }

    fn metric_c(&self, x: &[f64]) -> Vec<C64> {
        cvec(self.metric(x).as_slice())
    }

    /// `Γ^k_{ij}` at `x`, flattened as `[k][i][j]`.
    fn christoffel(&self, x: &[f64], s: Stencil) -> Vec<f64> {
        let n = self.dim;
        if matches!(self.form, ChartForm::Minkowski) {
            return vec![0.0; n * n * n];
        }
        let ginv = self.metric(x).try_inverse().expect("metric is invertible");
        // dg[l][(i,j)] = ∂_l g_ij (nalgebra is column-major; g is symmetric).
        let dg: Vec<Vec<f64>> = (0..n).map(|l| re(&s.d1(&|y: &[f64]| self.metric_c(y), x, l))).collect();
        let d = |l: usize, i: usize, j: usize| dg[l][i + j * n];
        let mut gam = vec![0.0; n * n * n];
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut acc = 0.0;
                    for l in 0..n {
                        acc += ginv[(k, l)] * (d(i, j, l) + d(j, i, l) - d(l, i, j));
                    }
                    gam[(k * n + i) * n + j] = 0.5 * acc;
                }
            }
        }
        gam
    }

    /// `∂_m Γ^k_{ij}` by differencing the Christoffel symbols.
    fn christoffel_derivative(&self, x: &[f64], m: usize, s: Stencil) -> Vec<f64> {
        if matches!(self.form, ChartForm::Minkowski) {
            return vec![0.0; self.dim.pow(3)];
        }
        re(&s.d1(&|y: &[f64]| cvec(&self.christoffel(y, s)), x, m))
    }

    /// `R_{μν} = ∂_λΓ^λ_{μν} − ∂_νΓ^λ_{μλ} + Γ^λ_{λσ}Γ^σ_{μν} − Γ^λ_{νσ}Γ^σ_{μλ}`.
    fn ricci(&self, x: &[f64], s: Stencil) -> DMatrix<f64> {
        let n = self.dim;
        let g = self.christoffel(x, s);
        let dg: Vec<Vec<f64>> = (0..n).map(|m| self.christoffel_derivative(x, m, s)).collect();
        let gm = |k: usize, i: usize, j: usize| g[(k * n + i) * n + j];
        let dgm = |m: usize, k: usize, i: usize, j: usize| dg[m][(k * n + i) * n + j];
        DMatrix::from_fn(n, n, |mu, nu| {
            let mut r = 0.0;
            for l in 0..n {
                r += dgm(l, l, mu, nu) - dgm(nu, l, mu, l);
                for sg in 0..n {
                    r += gm(l, l, sg) * gm(sg, mu, nu) - gm(l, nu, sg) * gm(sg, mu, l);
                }
            }
            r
        })
    }
}

/// One evaluated point.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualRow {
    pub point: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub h: f64,
}

/// Residuals at steps `2h` and `h` with the Richardson order estimate.
#[derive(Clone, Debug)]
pub struct ResidualReport {
    pub label: String,
    pub rows: Vec<ResidualRow>,
    pub h: f64,
    pub max_residual: f64,
    pub max_residual_coarse: f64,
    /// `log₂(max_residual_coarse / max_residual)`; `None` when exact.
    pub order: Option<f64>,
    /// Both sides agree to roundoff at both steps.
    pub exact: bool,
    /// Fitted exponent, for the current-scaling check.
    pub slope: Option<f64>,
}

impl ResidualReport {
    fn assemble(label: &str, h: f64, rows: Vec<ResidualRow>) -> Self {
        let max_at = |hh: f64| rows.iter().filter(|r| r.h == hh).fold(0.0f64, |m, r| if r.residual.is_nan() { f64::NAN } else { m.max(r.residual) });
        let max_residual = max_at(h);
        let max_residual_coarse = max_at(2.0 * h);
        let exact = max_residual <= ROUNDOFF_FLOOR && max_residual_coarse <= ROUNDOFF_FLOOR;
        let order = if exact { None } else { Some((max_residual_coarse / max_residual).log2()) };
        Self { label: label.into(), rows, h, max_residual, max_residual_coarse, order, exact, slope: None }
    }

    /// Exact agreement, or an observed order of at least `p`.
    pub fn converges_at(&self, p: f64) -> bool {
        self.exact || self.order.is_some_and(|o| o >= p)
    }

    /// CSV with columns `point,lhs,rhs,residual,h,estimated_order`.
    pub fn to_csv(&self, header: Option<&str>) -> String {
        let mut s = String::new();
        if let Some(h) = header {
            let _ = writeln!(s, "# {h}");
        }
        s.push_str("point,lhs,rhs,residual,h,estimated_order\n");
        let order = match (self.exact, self.order) {
            (true, _) => "exact".to_string(),
            (_, Some(o)) => o.to_string(),
            _ => String::new(),
        };
        for r in &self.rows {
            let p: Vec<String> = r.point.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{},{},{},{},{},{}", p.join(" "), r.lhs, r.rhs, r.residual, r.h, order);
        }
        s
    }
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn diff_norm(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

/// Runs `eval` at steps `2h` and `h` for every point.
fn richardson<F>(label: &str, s: Stencil, points: &[Vec<f64>], eval: F) -> Result<ResidualReport>
where
    F: Fn(&[f64], Stencil) -> Result<(f64, f64, f64)>,
{
    let mut rows = Vec::new();
    for st in [s.doubled(), s] {
        for x in points {
            let (lhs, rhs, residual) = eval(x, st)?;
            rows.push(ResidualRow { point: x.clone(), lhs, rhs, residual, h: st.h });
        }
    }
    Ok(ResidualReport::assemble(label, s.h, rows))
}

fn check_points(fields: &[&AnalyticField], points: &[Vec<f64>]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("no evaluation points".into()));
    }
    for f in fields {
        for x in points {
            f.check_point(x)?;
        }
    }
    Ok(())
}

/// `d*_ḡ ω = e^{−2u}(d*_η ω − (n−4) grad_η(u) ⌟ ω)` for `ḡ = e^{2u}η`.
///
/// The left side is evaluated twice, through the Christoffel symbols of
/// `ḡ` and through the divergence form `−ḡ_{kj}|ḡ|^{−1/2}∂_i(|ḡ|^{1/2}ω^{ij})`;
/// the residual is the larger disagreement with the right side.
pub fn check_conformal_codifferential(
    omega: &AnalyticField,
    expo: &AnalyticField,
    n: usize,
    points: &[Vec<f64>],
) -> Result<ResidualReport> {
    if !(2..=4).contains(&n) {
        return Err(Error::InvalidArgument("dimension must be between 2 and 4".into()));
    }
    omega.expect(FieldKind::TwoForm, n, "omega")?;
    expo.expect(FieldKind::Scalar, n, "expo")?;
    check_points(&[omega, expo], points)?;
    let chart = MetricChart::conformally_flat(expo.clone());
    let eta = minkowski(n);
    let w = |y: &[f64]| omega.eval(y);
    richardson("conformal_codifferential", omega.stencil(), points, |x, s| {
        let om = omega.eval(x);
        for i in 0..n {
            for j in 0..n {
                if (om[i * n + j] + om[j * n + i]).norm() > 1e-12 {
                    return Err(Error::InvalidArgument("omega is not antisymmetric".into()));
                }
            }
        }
        let u = expo.eval(x)[0].re;
        let dw: Vec<Vec<C64>> = (0..n).map(|i| s.d1(&w, x, i)).collect();
        let du: Vec<f64> = (0..n).map(|i| s.d1(&|y: &[f64]| expo.eval(y), x, i)[0].re).collect();
        let gbar = chart.metric(x);
        let ginv = gbar.clone().try_inverse().expect("invertible");
        let gam = chart.christoffel(x, s);
        let gm = |k: usize, i: usize, j: usize| gam[(k * n + i) * n + j];
        let mut via_christoffel = vec![C64::new(0.0, 0.0); n];
        for (k, out) in via_christoffel.iter_mut().enumerate() {
            for i in 0..n {
                for j in 0..n {
                    let mut cov = dw[i][j * n + k];
                    for l in 0..n {
                        cov -= om[l * n + k] * gm(l, i, j) + om[j * n + l] * gm(l, i, k);
                    }
                    *out -= cov * ginv[(i, j)];
                }
            }
        }
        // Divergence form.
        let density = |y: &[f64]| -> Vec<C64> {
            let g = chart.metric(y);
            let gi = g.clone().try_inverse().expect("invertible");
            let vol = g.determinant().abs().sqrt();
            let o = omega.eval(y);
            let mut up = vec![C64::new(0.0, 0.0); n * n];
            for i in 0..n {
                for j in 0..n {
                    for a in 0..n {
                        for b in 0..n {
                            up[i * n + j] += o[a * n + b] * (gi[(i, a)] * gi[(j, b)] * vol);
                        }
                    }
                }
            }
            up
        };
        let vol = gbar.determinant().abs().sqrt();
        let ddens: Vec<Vec<C64>> = (0..n).map(|i| s.d1(&density, x, i)).collect();
        let mut via_divergence = vec![C64::new(0.0, 0.0); n];
        for (k, out) in via_divergence.iter_mut().enumerate() {
            for j in 0..n {
                let mut div = C64::new(0.0, 0.0);
                for (i, dd) in ddens.iter().enumerate() {
                    div += dd[i * n + j];
                }
                *out -= div * (gbar[(k, j)] / vol);
            }
        }
        // Right side in the flat metric.
        let scale = (-2.0 * u).exp();
        let rhs: Vec<C64> = (0..n)
            .map(|k| {
                let mut d_star = C64::new(0.0, 0.0);
                let mut contraction = C64::new(0.0, 0.0);
                for i in 0..n {
                    d_star -= dw[i][i * n + k] * eta[(i, i)];
                    contraction += om[i * n + k] * (eta[(i, i)] * du[i]);
                }
                (d_star - contraction * (n as f64 - 4.0)) * scale
            })
            .collect();
        let residual = diff_norm(&via_christoffel, &rhs).max(diff_norm(&via_divergence, &rhs));
        Ok((norm(&via_christoffel), norm(&rhs), residual))
    })
}

/// Gamma matrices `γ_a` with `γ₀² = I`, `γ_j² = −I` and pairing `γ₀`.
pub fn gammas(n: usize) -> Vec<DMatrix<C64>> {
    let c = |re: f64, im: f64| C64::new(re, im);
    let m2 = |a: [C64; 4]| DMatrix::from_row_slice(2, 2, &a);
    let (o, z, i) = (c(1.0, 0.0), c(0.0, 0.0), c(0.0, 1.0));
    let sx = m2([z, o, o, z]);
    let sy = m2([z, -i, i, z]);
    let sz = m2([o, z, z, -o]);
    let isy = &sy * i;
    let isz = &sz * i;
    match n {
        2 => vec![sx, isy],
        3 => vec![sx, isy, isz],
        _ => {
            let kron = |a: &DMatrix<C64>, b: &DMatrix<C64>| a.kronecker(b);
            vec![kron(&sx, &DMatrix::identity(2, 2)), kron(&isy, &sx), kron(&isy, &sy), kron(&isy, &sz)]
        }
    }
}

fn apply(m: &DMatrix<C64>, v: &[C64]) -> Vec<C64> {
    (m * nalgebra::DVector::from_column_slice(v)).as_slice().to_vec()
}

/// Which covariance property to check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CovarianceKind {
    /// `D^{A+df}(e^{−iμf}ψ) = e^{−iμf} D^A ψ`.
    Gauge,
    /// `D^A_ḡ(e^{−(n−1)u/2}ψ) = e^{−(n+1)u/2} D^A_g ψ` for `ḡ = e^{2u}η`.
    Conformal,
    /// `j_φ̄(∂_t) = e^{−(n−2)u} j_ψ(∂_t)` for `φ̄ = e^{−(n−1)u/2}ψ`.
    CurrentScaling,
}

/// `D^A φ = Σ_a ε_a γ_a (∂_a + iμA_a) φ` in the flat chart, with the spinor
/// derivatives supplied.
fn flat_dirac(g: &[DMatrix<C64>], dphi: &[Vec<C64>], phi: &[C64], a: &[f64], mu: f64) -> Vec<C64> {
    let n = g.len();
    let w = phi.len();
    let mut out = vec![C64::new(0.0, 0.0); w];
    for k in 0..n {
        let eps = if k == 0 { -1.0 } else { 1.0 };
        let v: Vec<C64> = (0..w).map(|c| dphi[k][c] + phi[c] * C64::new(0.0, mu * a[k])).collect();
        for (o, r) in out.iter_mut().zip(apply(&g[k], &v)) {
            *o += r * eps;
        }
    }
    out
}

/// Gauge, conformal and current-scaling properties of the Dirac operator
/// on `ℝ^{1,n−1}`. `param` is the gauge function `f` or the conformal
/// exponent `u`.
///
/// The conformally rescaled operator is assembled from the spin connection
/// of `e^{2u}η` in the rescaled frame, `∇̄_X = ∂_X − ½X·grad u· − ½X(u)`.
pub fn check_dirac_covariance(
    kind: CovarianceKind,
    psi: &AnalyticField,
    potential: &AnalyticField,
    param: &AnalyticField,
    mu: f64,
    points: &[Vec<f64>],
) -> Result<ResidualReport> {
    let n = psi.dim;
    if !(2..=4).contains(&n) {
        return Err(Error::InvalidArgument("dimension must be between 2 and 4".into()));
    }
    psi.expect(FieldKind::Spinor, n, "psi")?;
    potential.expect(FieldKind::OneForm, n, "potential")?;
    param.expect(FieldKind::Scalar, n, "param")?;
    check_points(&[psi, potential, param], points)?;
    let g = gammas(n);
    let wdt = spinor_width(n);
    let scalar = |y: &[f64]| param.eval(y)[0].re;
    match kind {
        CovarianceKind::Gauge => richardson("gauge_covariance", psi.stencil(), points, |x, s| {
            let phase = |y: &[f64]| C64::from_polar(1.0, -mu * scalar(y));
            let rotated = |y: &[f64]| -> Vec<C64> { psi.eval(y).iter().map(|z| z * phase(y)).collect() };
            let df: Vec<f64> = (0..n).map(|k| s.d1(&|y: &[f64]| param.eval(y), x, k)[0].re).collect();
            let a = re(&potential.eval(x));
            let shifted: Vec<f64> = a.iter().zip(&df).map(|(p, q)| p + q).collect();
            let d_rot: Vec<Vec<C64>> = (0..n).map(|k| s.d1(&rotated, x, k)).collect();
            let lhs = flat_dirac(&g, &d_rot, &rotated(x), &shifted, mu);
            let d_psi: Vec<Vec<C64>> = (0..n).map(|k| s.d1(&|y: &[f64]| psi.eval(y), x, k)).collect();
            let rhs: Vec<C64> = flat_dirac(&g, &d_psi, &psi.eval(x), &a, mu).iter().map(|z| z * phase(x)).collect();
            Ok((norm(&lhs), norm(&rhs), diff_norm(&lhs, &rhs)))
        }),
        CovarianceKind::Conformal => richardson("conformal_covariance", psi.stencil(), points, |x, s| {
            let w = (n as f64 - 1.0) / 2.0;
            let rescaled = |y: &[f64]| -> Vec<C64> {
                let f = (-w * scalar(y)).exp();
                psi.eval(y).iter().map(|z| z * f).collect()
            };
            let u = scalar(x);
            let du: Vec<f64> = (0..n).map(|k| s.d1(&|y: &[f64]| param.eval(y), x, k)[0].re).collect();
            // grad u as a Clifford element: Σ_b ε_b ∂_b u γ_b.
            let mut grad = DMatrix::<C64>::zeros(wdt, wdt);
            for b in 0..n {
                let eps = if b == 0 { -1.0 } else { 1.0 };
                grad += &g[b] * C64::new(eps * du[b], 0.0);
            }
            let phi = rescaled(x);
            let a = re(&potential.eval(x));
            let d_phi: Vec<Vec<C64>> = (0..n).map(|k| s.d1(&rescaled, x, k)).collect();
            let mut lhs = vec![C64::new(0.0, 0.0); wdt];
            for k in 0..n {
                let eps = if k == 0 { -1.0 } else { 1.0 };
                let spin = apply(&(&g[k] * &grad), &phi);
                let cov: Vec<C64> = (0..wdt)
                    .map(|c| d_phi[k][c] - spin[c] * 0.5 - phi[c] * (0.5 * du[k]) + phi[c] * C64::new(0.0, mu * a[k]))
                    .collect();
                for (o, r) in lhs.iter_mut().zip(apply(&g[k], &cov)) {
                    *o += r * (eps * (-u).exp());
                }
            }
            let d_psi: Vec<Vec<C64>> = (0..n).map(|k| s.d1(&|y: &[f64]| psi.eval(y), x, k)).collect();
            let rhs: Vec<C64> = flat_dirac(&g, &d_psi, &psi.eval(x), &a, mu)
                .iter()
                .map(|z| z * (-(n as f64 + 1.0) / 2.0 * u).exp())
                .collect();
            Ok((norm(&lhs), norm(&rhs), diff_norm(&lhs, &rhs)))
        }),
        CovarianceKind::CurrentScaling => {
            let pairing = &g[0];
            let current = |clifford: &DMatrix<C64>, v: &[C64]| -> f64 {
                let pv = apply(pairing, &apply(clifford, v));
                v.iter().zip(&pv).map(|(a, b)| (a.conj() * b).re).sum()
            };
            let mut logs = Vec::new();
            let report = richardson("current_scaling", psi.stencil(), points, |x, _s| {
                let u = scalar(x);
                let p = psi.eval(x);
                let phi: Vec<C64> = p.iter().map(|z| z * (-(n as f64 - 1.0) / 2.0 * u).exp()).collect();
                // ∂_t as a Clifford element for ḡ: Σ_a ε_a ḡ(∂_t, ē_a) γ_a, ē_a = e^{−u}∂_a.
                let mut x_bar = DMatrix::<C64>::zeros(wdt, wdt);
                for (a_idx, ga) in g.iter().enumerate() {
                    let eps = if a_idx == 0 { -1.0 } else { 1.0 };
                    let gbar = if a_idx == 0 { -(2.0 * u).exp() * (-u).exp() } else { 0.0 };
                    x_bar += ga * C64::new(eps * gbar, 0.0);
                }
                let j = current(&g[0], &p);
                let j_bar = current(&x_bar, &phi);
                let lr = (j_bar / j).ln();
                Ok((lr, -(n as f64 - 2.0) * u, (lr + (n as f64 - 2.0) * u).abs()))
            })?;
            for r in report.rows.iter().filter(|r| r.h == report.h) {
                let u = r.rhs / -(n as f64 - 2.0).max(f64::MIN_POSITIVE);
                logs.push((if n == 2 { scalar(&r.point) } else { u }, r.lhs));
            }
            let mut report = report;
            report.slope = fit_slope(&logs);
            Ok(report)
        }
    }
}

fn fit_slope(pts: &[(f64, f64)]) -> Option<f64> {
    let m = pts.len() as f64;
    if pts.len() < 2 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Which d'Alembertian replaces the current in the second constraint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoxKind {
    /// `dd* + d*d`.
    Hodge,
    /// `−g^{μν}∇_μ∇_ν`.
    Rough,
}

/// Residuals of both constraint equations, plus the gaps between the
/// general and the `β = 1` forms where the latter applies.
///
/// The second equation is reported twice. `second` uses the lapse-gradient
/// terms `β^{-1}A₁(grad β) + (2β)^{-1}∇_{grad β}A₀(∂_t)` as usually stated;
/// `second_corrected` uses `(2β)^{-1}A₁(grad β)` alone, which accounts for
/// the normal component of `∇_t e_j`. Both agree when `grad β = 0`.
#[derive(Clone, Debug)]
pub struct ConstraintReport {
    pub first: ResidualReport,
    pub second: ResidualReport,
    pub second_corrected: ResidualReport,
    /// Largest pointwise gap between the general and the simplified forms of
    /// the first and second equations, over both steps; `None` unless `β ≡ 1`
    /// near every point.
    pub remark_gap: Option<[f64; 2]>,
    /// The same gap for the second equation with the simplified form
    /// `−Δ_S A_t + d*_S A₁ − g_t(∇^S A_S, W) + A(d*_S W) + ric + □A`.
    pub remark_gap_corrected: Option<f64>,
}

struct ConstraintTerms {
    /// First equation, second as printed, second corrected.
    general: [f64; 3],
    simplified: Option<[f64; 3]>,
    direct: [f64; 2],
}

/// `∇_μ A_ν = ∂_μA_ν − Γ^λ_{μν}A_λ` for the 1-form `a` at `x`.
fn covariant_1form<F: Fn(&[f64]) -> Vec<C64>>(chart: &MetricChart, a: &F, x: &[f64], s: Stencil) -> DMatrix<f64> {
    let n = chart.dim;
    let gam = chart.christoffel(x, s);
    let av = re(&a(x));
    let da: Vec<Vec<f64>> = (0..n).map(|m| re(&s.d1(a, x, m))).collect();
    DMatrix::from_fn(n, n, |mu, nu| {
        let mut v = da[mu][nu];
        for l in 0..n {
            v -= gam[(l * n + mu) * n + nu] * av[l];
        }
        v
    })
}

/// `d*A = −|g|^{−1/2} ∂_μ(|g|^{1/2} g^{μν} A_ν)`.
fn codifferential_divergence(chart: &MetricChart, a: &AnalyticField, x: &[f64], s: Stencil) -> f64 {
    let n = chart.dim;
    let flux = |y: &[f64]| -> Vec<C64> {
        let g = chart.metric(y);
        let gi = g.clone().try_inverse().expect("invertible");
        let vol = g.determinant().abs().sqrt();
        let av = re(&a.eval(y));
        (0..n).map(|m| C64::new(vol * (0..n).map(|v| gi[(m, v)] * av[v]).sum::<f64>(), 0.0)).collect()
    };
    let vol = chart.metric(x).determinant().abs().sqrt();
    -(0..n).map(|m| s.d1(&flux, x, m)[m].re).sum::<f64>() / vol
}

/// `(□A)_ν` evaluated directly from second differences of `A`.
fn box_direct(chart: &MetricChart, a: &AnalyticField, x: &[f64], s: Stencil, kind: BoxKind) -> Vec<f64> {
    let n = chart.dim;
    let f = |y: &[f64]| a.eval(y);
    let gi = chart.metric(x).try_inverse().expect("invertible");
    let gam = chart.christoffel(x, s);
    let gm = |k: usize, i: usize, j: usize| gam[(k * n + i) * n + j];
    let dgam: Vec<Vec<f64>> = (0..n).map(|m| chart.christoffel_derivative(x, m, s)).collect();
    let dgm = |m: usize, k: usize, i: usize, j: usize| dgam[m][(k * n + i) * n + j];
    let av = re(&a.eval(x));
    let da: Vec<Vec<f64>> = (0..n).map(|m| re(&s.d1(&f, x, m))).collect();
    let dda: Vec<Vec<Vec<f64>>> = (0..n).map(|m| (0..n).map(|l| re(&s.d2(&f, x, m, l))).collect()).collect();
    // ∇_λ A_ν and ∂_μ(∇_λ A_ν).
    let cov = |l: usize, v: usize| da[l][v] - (0..n).map(|sg| gm(sg, l, v) * av[sg]).sum::<f64>();
    let dcov = |m: usize, l: usize, v: usize| {
        dda[m][l][v] - (0..n).map(|sg| dgm(m, sg, l, v) * av[sg] + gm(sg, l, v) * da[m][sg]).sum::<f64>()
    };
    // (∇∇A)_{μλν}.
    let hess = |m: usize, l: usize, v: usize| {
        dcov(m, l, v) - (0..n).map(|sg| gm(sg, m, l) * cov(sg, v) + gm(sg, m, v) * cov(l, sg)).sum::<f64>()
    };
    let rough: Vec<f64> = (0..n)
        .map(|v| {
            let mut acc = 0.0;
            for m in 0..n {
                for l in 0..n {
                    acc -= gi[(m, l)] * hess(m, l, v);
                }
            }
            acc
        })
        .collect();
    match kind {
        BoxKind::Rough => rough,
        BoxKind::Hodge => {
            let ric = chart.ricci(x, s);
            (0..n)
                .map(|v| rough[v] + (0..n).map(|l| (0..n).map(|k| ric[(v, k)] * gi[(k, l)]).sum::<f64>() * av[l]).sum::<f64>())
                .collect()
        }
    }
}

fn constraint_terms(chart: &MetricChart, a: &AnalyticField, x: &[f64], s: Stencil, kind: BoxKind) -> ConstraintTerms {
    let n = chart.dim;
    let f = |y: &[f64]| a.eval(y);
    let g = chart.metric(x);
    let gi = g.clone().try_inverse().expect("invertible");
    let beta = -g[(0, 0)];
    let gam = chart.christoffel(x, s);
    let gm = |k: usize, i: usize, j: usize| gam[(k * n + i) * n + j];
    let av = re(&a.eval(x));
    let nab = covariant_1form(chart, &f, x, s);
    // A₁ = ∇_t A as a 1-form field.
    let a1 = |y: &[f64]| -> Vec<C64> {
        let c = covariant_1form(chart, &f, y, s);
        (0..n).map(|v| C64::new(c[(0, v)], 0.0)).collect()
    };
    let a1v = re(&a1(x));
    let dg: Vec<Vec<f64>> = (0..n).map(|l| re(&s.d1(&|y: &[f64]| chart.metric_c(y), x, l))).collect();
    let dgij = |l: usize, i: usize, j: usize| dg[l][i + j * n];
    let gt = |i: usize, j: usize| gi[(i, j)]; // spatial block of the inverse is g_t^{-1} (block-diagonal metric)
    let dbeta: Vec<f64> = (0..n).map(|l| -dgij(l, 0, 0)).collect();

    // First equation.
    let mut first = a1v[0] / beta;
    for j in 1..n {
        for k in 1..n {
            first -= gt(j, k) * nab[(j, k)];
        }
    }
    let direct_first = codifferential_divergence(chart, a, x, s);

    // Second equation, general form.
    let mut tan = 0.0;
    for j in 1..n {
        let c = g[(j, j)].powf(-0.5);
        // ∇_{e_j}∇_{e_j}A evaluated at ∂_t.
        let inner = |y: &[f64]| -> Vec<C64> {
            let cj = chart.metric(y)[(j, j)].powf(-0.5);
            let cv = covariant_1form(chart, &f, y, s);
            (0..n).map(|v| C64::new(cj * cv[(j, v)], 0.0)).collect()
        };
        let iv = re(&inner(x));
        let d_inner = re(&s.d1(&inner, x, j));
        let second_cov = c * (d_inner[0] - (0..n).map(|l| gm(l, j, 0) * iv[l]).sum::<f64>());
        // ∇^S_{e_j} e_j = c ∂_j c ∂_j + c² Γ^k_{jj} ∂_k over spatial k.
        let dc = -0.5 * g[(j, j)].powf(-1.5) * dgij(j, j, j);
        let mut conn = 0.0;
        for k in 1..n {
            let vk = if k == j { c * dc } else { 0.0 } + c * c * gm(k, j, j);
            conn += vk * nab[(k, 0)];
        }
        tan += conn - second_cov;
    }
    let mut div_a1 = 0.0;
    let da1: Vec<Vec<f64>> = (0..n).map(|m| re(&s.d1(&a1, x, m))).collect();
    for j in 1..n {
        for k in 1..n {
            let cov = da1[j][k] - (0..n).map(|l| gm(l, j, k) * a1v[l]).sum::<f64>();
            div_a1 += gt(j, k) * cov;
        }
    }
    let mut tr_dg = 0.0;
    let mut a1_grad_beta = 0.0;
    let mut nab_grad_beta = 0.0;
    let mut dg_pair = 0.0;
    for j in 1..n {
        for k in 1..n {
            tr_dg += gt(j, k) * dgij(0, j, k);
            a1_grad_beta += gt(j, k) * dbeta[k] * a1v[j];
            nab_grad_beta += gt(j, k) * dbeta[k] * nab[(j, 0)];
            for p in 1..n {
                for q in 1..n {
                    dg_pair += gt(j, p) * gt(k, q) * dgij(0, p, q) * nab[(j, k)];
                }
            }
        }
    }
    let ric = chart.ricci(x, s);
    let a_sharp: Vec<f64> = (0..n).map(|m| (0..n).map(|v| gi[(m, v)] * av[v]).sum()).collect();
    let ric_term: f64 = (0..n).map(|m| ric[(0, m)] * a_sharp[m]).sum();
    let box_t = box_direct(chart, a, x, s, kind)[0];
    let common = -tan - div_a1 - tr_dg / (2.0 * beta) * a1v[0] + 0.5 * dg_pair + ric_term + box_t;
    let second = common + a1_grad_beta / beta + nab_grad_beta / (2.0 * beta);
    // The normal part of ∇_t e_j, (2β)^{-1} e_j(β) ∂_t, changes the lapse-gradient terms.
    let corrected = common + a1_grad_beta / (2.0 * beta);
    let direct_second = s.d1(&|y: &[f64]| vec![C64::new(codifferential_divergence(chart, a, y, s), 0.0)], x, 0)[0].re;

    // Simplified forms, valid where β ≡ 1 near the point.
    let flat_lapse = (beta - 1.0).abs() < 1e-14 && dbeta.iter().all(|d| d.abs() < 1e-14);
    let simplified = flat_lapse.then(|| {
        let vol_s = |y: &[f64]| {
            let gy = chart.metric(y);
            (1..n).map(|j| gy[(j, j)]).product::<f64>().sqrt()
        };
        // Slice divergence −|g_t|^{−1/2}∂_j(|g_t|^{1/2} g_t^{jk} B_k).
        let slice_div = |b: &dyn Fn(&[f64]) -> Vec<f64>| -> f64 {
            let flux = |y: &[f64]| -> Vec<C64> {
                let gy = chart.metric(y);
                let v = vol_s(y);
                let bv = b(y);
                (0..n).map(|j| if j == 0 { C64::new(0.0, 0.0) } else { C64::new(v * bv[j] / gy[(j, j)], 0.0) }).collect()
            };
            -(1..n).map(|j| s.d1(&flux, x, j)[j].re).sum::<f64>() / vol_s(x)
        };
        let w = |j: usize, k: usize| 0.5 * dgij(0, j, k); // W_{jk} with indices down
        let mut w_sq = 0.0;
        let mut tr_w = 0.0;
        for j in 1..n {
            tr_w += gt(j, j) * w(j, j);
            for k in 1..n {
                w_sq += gt(j, j) * gt(k, k) * w(j, k) * w(j, k);
            }
        }
        let s1 = re(&s.d1(&f, x, 0))[0] + slice_div(&|y| re(&a.eval(y))) + tr_w * av[0];
        // −Δ_S A_t = −d*_S d A_t.
        let grad_at = |y: &[f64]| -> Vec<f64> { (0..n).map(|j| if j == 0 { 0.0 } else { s.d1(&f, y, j)[0].re }).collect() };
        let lap = slice_div(&grad_at);
        let a1_div = slice_div(&|y| re(&a1(y)));
        // g_t(∇^S A_S, W) with slice Christoffels (spatial indices of Γ).
        let mut nab_w = 0.0;
        for j in 1..n {
            for k in 1..n {
                let mut cov = re(&s.d1(&f, x, j))[k];
                for l in 1..n {
                    cov -= gm(l, j, k) * av[l];
                }
                nab_w += cov * gt(j, j) * gt(k, k) * w(j, k);
            }
        }
        // d*_S W as a 1-form, contracted with A.
        let w_field = |y: &[f64]| -> Vec<C64> {
            let d = re(&s.d1(&|z: &[f64]| chart.metric_c(z), y, 0));
            d.iter().map(|v| C64::new(0.5 * v, 0.0)).collect()
        };
        let mut a_div_w = 0.0;
        let dw: Vec<Vec<f64>> = (0..n).map(|m| re(&s.d1(&w_field, x, m))).collect();
        for k in 1..n {
            let mut div = 0.0;
            for j in 1..n {
                let mut cov = dw[j][j + k * n];
                for l in 1..n {
                    cov -= gm(l, j, j) * w(l, k) + gm(l, j, k) * w(j, l);
                }
                div -= gt(j, j) * cov;
            }
            a_div_w += div * gt(k, k) * av[k];
        }
        let s2 = -lap + a1_div - 3.0 * nab_w + a_div_w + 2.0 * w_sq * av[0] + ric_term + box_t;
        let s2_corrected = -lap + a1_div - nab_w + a_div_w + ric_term + box_t;
        [s1, s2, s2_corrected]
    });
    ConstraintTerms { general: [first, second, corrected], simplified, direct: [direct_first, direct_second] }
}

/// Checks both constraint equations for a potential on a sliced chart,
/// with the current replaced by `(□A)(∂_t)` for the rough d'Alembertian.
/// The left sides are `d*A` and `∂_t d*A`, differenced directly from the
/// divergence form.
pub fn check_constraints_3p1(potential: &AnalyticField, chart: &MetricChart, points: &[Vec<f64>]) -> Result<ConstraintReport> {
    check_constraints_with(potential, chart, points, BoxKind::Rough)
}

/// [`check_constraints_3p1`] with an explicit choice of d'Alembertian.
pub fn check_constraints_with(
    potential: &AnalyticField,
    chart: &MetricChart,
    points: &[Vec<f64>],
    kind: BoxKind,
) -> Result<ConstraintReport> {
    let n = chart.dim;
    if n != 4 {
        return Err(Error::InvalidArgument("the constraint check runs in dimension 4".into()));
    }
    if matches!(chart.form, ChartForm::ConformallyFlat(_)) {
        return Err(Error::InvalidArgument("the constraint check needs a sliced chart".into()));
    }
    potential.expect(FieldKind::OneForm, n, "potential")?;
    check_points(&[potential], points)?;
    chart.validate(points)?;
    let s = potential.stencil();
    let mut rows = [Vec::new(), Vec::new(), Vec::new()];
    let mut gap: Option<[f64; 3]> = Some([0.0; 3]);
    for st in [s.doubled(), s] {
        for x in points {
            let t = constraint_terms(chart, potential, x, st, kind);
            for (e, out) in rows.iter_mut().enumerate() {
                let d = t.direct[e.min(1)];
                out.push(ResidualRow { point: x.clone(), lhs: d, rhs: t.general[e], residual: (d - t.general[e]).abs(), h: st.h });
            }
            gap = match (gap, t.simplified) {
                (Some(g), Some(sv)) => Some([0, 1, 2].map(|e| g[e].max((sv[e] - t.general[e]).abs()))),
                _ => None,
            };
        }
    }
    let [r1, r2, r3] = rows;
    Ok(ConstraintReport {
        first: ResidualReport::assemble("constraint_1", s.h, r1),
        second: ResidualReport::assemble("constraint_2", s.h, r2),
        second_corrected: ResidualReport::assemble("constraint_2_corrected", s.h, r3),
        remark_gap: gap.map(|g| [g[0], g[1]]),
        remark_gap_corrected: gap.map(|g| g[2]),
    })
}

/// Pointwise `d*_S(ν ⌟ dA) + (d*_M dA)(ν)` on the slice through each point
/// of Minkowski space, with `ν = ∂_t`. The slice term differences the
/// analytic `dA(ν, ·)`; the spacetime term uses direct second differences.
pub fn check_obstruction(potential: &AnalyticField, points: &[Vec<f64>]) -> Result<ResidualReport> {
    let n = potential.dim;
    potential.expect(FieldKind::OneForm, n, "potential")?;
    check_points(&[potential], points)?;
    richardson("obstruction", potential.stencil(), points, |x, s| {
        let slice = slice_term(potential, x, s);
        let bulk = bulk_term(potential, x, s);
        Ok((slice, -bulk, (slice + bulk).abs()))
    })
}

/// `d*_S(ν ⌟ dA) = −Σ_j ∂_j (dA)_{tj}`.
fn slice_term(a: &AnalyticField, x: &[f64], s: Stencil) -> f64 {
    let n = a.dim;
    let f = |y: &[f64]| a.eval(y);
    let nu_da = |y: &[f64]| -> Vec<C64> {
        let dt = s.d1(&f, y, 0);
        (0..n).map(|j| if j == 0 { C64::new(0.0, 0.0) } else { dt[j] - s.d1(&f, y, j)[0] }).collect()
    };
    -(1..n).map(|j| s.d1(&nu_da, x, j)[j].re).sum::<f64>()
}

/// `(d*_M dA)(ν) = −η^{μλ} ∂_μ (dA)_{λt}`.
fn bulk_term(a: &AnalyticField, x: &[f64], s: Stencil) -> f64 {
    let n = a.dim;
    let f = |y: &[f64]| a.eval(y);
    let mut acc = 0.0;
    for m in 0..n {
        let eta = if m == 0 { -1.0 } else { 1.0 };
        let dd_t = s.d2(&f, x, m, m)[0].re;
        let dd_m = s.d2(&f, x, m, 0)[m].re;
        acc -= eta * (dd_t - dd_m);
    }
    acc
}

/// `∫_{[0,2π]^{n−1}} (d*_M dA)(ν)` over the slice `t = t0` by the periodic
/// trapezoid rule with `nodes` points per axis.
pub fn slice_charge_integral(potential: &AnalyticField, t0: f64, nodes: usize) -> Result<f64> {
    let n = potential.dim;
    potential.expect(FieldKind::OneForm, n, "potential")?;
    if nodes == 0 || n < 2 {
        return Err(Error::InvalidArgument("need nodes and at least one spatial axis".into()));
    }
    let s = potential.stencil();
    let m = n - 1;
    let h = std::f64::consts::TAU / nodes as f64;
    let total = nodes.pow(m as u32);
    let mut acc = 0.0;
    let mut x = vec![t0; n];
    for idx in 0..total {
        let mut r = idx;
        for axis in 1..n {
            x[axis] = (r % nodes) as f64 * h;
            r /= nodes;
        }
        acc += bulk_term(potential, &x, s);
    }
    Ok(acc * h.powi(m as i32))
}

/// Bundled analytic fixtures used by the tests and the command line.
pub mod fixtures {
    use super::*;

    /// A generic antisymmetric 2-form with polynomial and trigonometric parts.
    pub fn omega(n: usize) -> AnalyticField {
        AnalyticField::two_form(n, move |x| {
            let mut m = vec![0.0; n * n];
            for i in 0..n {
                for j in (i + 1)..n {
                    let v = (0.7 * x[i] - 0.3 * x[j] + 0.1 * (i + 2 * j) as f64).sin() + 0.2 * x[(i + j) % n] * x[i];
                    m[i * n + j] = v;
                    m[j * n + i] = -v;
                }
            }
            m
        })
    }

    /// A conformal exponent with nonzero gradient in every direction.
    pub fn expo(n: usize) -> AnalyticField {
        AnalyticField::scalar(n, move |x| 0.2 * (x.iter().enumerate().map(|(i, v)| 0.5 / (i + 1) as f64 * v).sum::<f64>()).sin() + 0.1 * x[0])
    }

    pub fn zero_scalar(n: usize) -> AnalyticField {
        AnalyticField::scalar(n, |_| 0.0)
    }

    pub fn constant_scalar(n: usize, c: f64) -> AnalyticField {
        AnalyticField::scalar(n, move |_| c)
    }

    /// A generic spinor of width [`spinor_width`]`(n)`.
    pub fn psi(n: usize) -> AnalyticField {
        let w = spinor_width(n);
        AnalyticField::spinor(n, move |x| {
            (0..w)
                .map(|c| {
                    let ph: f64 = x.iter().enumerate().map(|(i, v)| (0.2 + 0.1 * (c + i) as f64) * v).sum();
                    C64::from_polar(0.5 + 0.1 * (c as f64 + x[0]).cos(), ph)
                })
                .collect()
        })
    }

    /// A generic potential.
    pub fn potential(n: usize) -> AnalyticField {
        AnalyticField::one_form(n, move |x| {
            (0..n)
                .map(|m| (0.5 * x[m] + 0.3 * x[(m + 1) % n]).cos() * 0.4 + 0.1 * (m as f64) * x[0] * x[(m + 1) % n])
                .collect()
        })
    }

    /// A potential that is `2π`-periodic in every spatial direction.
    pub fn periodic_potential(n: usize) -> AnalyticField {
        AnalyticField::one_form(n, move |x| {
            (0..n)
                .map(|m| {
                    let sp: f64 = (1..n).map(|j| ((j + m) as f64 * x[j]).sin() + 0.5 * (j as f64 * x[j] + x[0]).cos()).sum();
                    (1.0 + 0.3 * x[0]) * sp + 0.2 * (m as f64)
                })
                .collect()
        })
        .with_box(vec![-10.0; n], vec![10.0; n])
    }

    pub fn constant_potential(n: usize) -> AnalyticField {
        AnalyticField::one_form(n, move |_| (0..n).map(|m| 0.5 + m as f64).collect())
    }

    pub fn zero_potential(n: usize) -> AnalyticField {
        AnalyticField::one_form(n, move |_| vec![0.0; n])
    }

    pub fn gauge_function(n: usize) -> AnalyticField {
        AnalyticField::scalar(n, move |x| 0.3 * (0.6 * x[0] - 0.4 * x[n - 1]).sin() + 0.05 * x[0] * x[0])
    }

    /// `β = 1 + 0.1 sin x¹`, `a = 1 + 0.05 t` in dimension 4.
    pub fn sliced_chart() -> MetricChart {
        let beta = AnalyticField::scalar(4, |x| 1.0 + 0.1 * x[1].sin());
        let a = AnalyticField::scalar(4, |x| 1.0 + 0.05 * x[0]);
        MetricChart::sliced(beta, a).expect("scalar fields")
    }

    /// `β = 1`, `a = 1 + 0.05 t + 0.02 sin x²` in dimension 4.
    pub fn unit_lapse_chart() -> MetricChart {
        let beta = AnalyticField::scalar(4, |_| 1.0);
        let a = AnalyticField::scalar(4, |x| 1.0 + 0.05 * x[0] + 0.02 * x[2].sin());
        MetricChart::sliced(beta, a).expect("scalar fields")
    }

    /// A few points spread over `[−1, 1]^n`.
    pub fn points(n: usize) -> Vec<Vec<f64>> {
        let base = [0.13, -0.41, 0.77, -0.29, 0.55, 0.02];
        (0..4).map(|p| (0..n).map(|i| base[(p + 2 * i) % base.len()] * (1.0 - 0.1 * p as f64)).collect()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn gamma_matrices_satisfy_clifford_relations() {
        for n in 2..=4 {
            let g = gammas(n);
            let w = spinor_width(n);
            for a in 0..n {
                for b in 0..n {
                    let ac = &g[a] * &g[b] + &g[b] * &g[a];
                    let expect = if a != b { 0.0 } else if a == 0 { 2.0 } else { -2.0 };
                    let target = DMatrix::<C64>::identity(w, w) * C64::new(expect, 0.0);
                    assert!((ac - target).norm() < 1e-15, "n={n} a={a} b={b}");
                }
                // Real currents: γ₀γ_a Hermitian.
                let p = &g[0] * &g[a];
                assert!((p.adjoint() - &p).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn fd_orders_on_polynomials() {
        let f = |x: &[f64]| vec![C64::new(x[0].powi(3), 0.0)];
        let x = [0.7];
        for (order, tol) in [(FdOrder::Second, 1e-5), (FdOrder::Fourth, 1e-9)] {
            let s = Stencil { h: 1e-3, order };
            assert!((s.d1(&f, &x, 0)[0].re - 3.0 * 0.49).abs() < tol);
            assert!((s.d2(&f, &x, 0, 0)[0].re - 6.0 * 0.7).abs() < 1e-5);
        }
        // Second-order stencil error scales like h².
        let g = |x: &[f64]| vec![C64::new(x[0].sin(), 0.0)];
        let e = |h: f64| (Stencil { h, order: FdOrder::Second }.d1(&g, &[0.3], 0)[0].re - 0.3f64.cos()).abs();
        assert!(((e(1e-2) / e(5e-3)).log2() - 2.0).abs() < 0.05);
    }

    #[test]
    fn codifferential_zero_exponent_is_exact() {
        for n in 2..=4 {
            let r = check_conformal_codifferential(&omega(n), &zero_scalar(n), n, &points(n)).unwrap();
            assert!(r.max_residual <= 1e-12, "n={n}: {}", r.max_residual);
        }
    }

    #[test]
    fn codifferential_converges_at_second_order() {
        for n in [3, 4] {
            let r = check_conformal_codifferential(&omega(n), &expo(n), n, &points(n)).unwrap();
            assert!(r.max_residual <= 1e-7, "n={n}: {}", r.max_residual);
            assert!(r.converges_at(1.9), "n={n}: {:?}", r.order);
        }
    }

    #[test]
    fn wrong_dimension_term_is_detected() {
        // The n = 3 formula applied with n = 4 bookkeeping must fail.
        let r = check_conformal_codifferential(&omega(3), &expo(3), 3, &points(3)).unwrap();
        assert!(r.max_residual < 1e-6);
        let om = omega(3);
        let ex = expo(3);
        let bad = check_conformal_codifferential(&om, &ex, 4, &points(3));
        assert!(bad.is_err());
    }

    #[test]
    fn outside_box_is_an_error() {
        let om = omega(2).with_box(vec![-1.0; 2], vec![1.0; 2]);
        let err = check_conformal_codifferential(&om, &expo(2), 2, &[vec![0.0, 3.0]]).unwrap_err();
        assert_eq!(err, Error::OutsideBox(vec![0.0, 3.0]));
    }

    #[test]
    fn gauge_trivial_fixtures() {
        for n in 2..=4 {
            let c = check_dirac_covariance(CovarianceKind::Gauge, &psi(n), &potential(n), &constant_scalar(n, 0.7), 1.3, &points(n)).unwrap();
            assert!(c.max_residual <= 1e-12, "n={n}: {}", c.max_residual);
            let z = check_dirac_covariance(CovarianceKind::Gauge, &psi(n), &potential(n), &gauge_function(n), 0.0, &points(n)).unwrap();
            assert!(z.max_residual <= 1e-12);
        }
    }

    #[test]
    fn gauge_and_conformal_converge() {
        for n in 2..=4 {
            for kind in [CovarianceKind::Gauge, CovarianceKind::Conformal] {
                let param = if kind == CovarianceKind::Gauge { gauge_function(n) } else { expo(n) };
                let r = check_dirac_covariance(kind, &psi(n), &potential(n), &param, 0.8, &points(n)).unwrap();
                assert!(r.max_residual <= 1e-7 && r.converges_at(1.9), "{kind:?} n={n}: {} {:?}", r.max_residual, r.order);
            }
        }
    }

    #[test]
    fn conformal_zero_exponent_is_exact() {
        let r = check_dirac_covariance(CovarianceKind::Conformal, &psi(4), &potential(4), &zero_scalar(4), 0.8, &points(4)).unwrap();
        assert!(r.max_residual <= 1e-12);
    }

    #[test]
    fn current_scaling_exponent() {
        for n in 2..=4 {
            let r = check_dirac_covariance(CovarianceKind::CurrentScaling, &psi(n), &potential(n), &expo(n), 0.5, &points(n)).unwrap();
            assert!(r.max_residual <= 1e-12);
            if n > 2 {
                assert!((r.slope.unwrap() + (n as f64 - 2.0)).abs() < 1e-3, "n={n}: {:?}", r.slope);
            }
        }
    }

    #[test]
    fn constraints_vanish_for_zero_potential() {
        let r = check_constraints_3p1(&zero_potential(4), &MetricChart::minkowski(4), &points(4)).unwrap();
        assert_eq!(r.first.max_residual, 0.0);
        assert_eq!(r.second.max_residual, 0.0);
    }

    #[test]
    fn constraints_on_minkowski() {
        let r = check_constraints_3p1(&potential(4), &MetricChart::minkowski(4), &points(4)).unwrap();
        for rep in [&r.first, &r.second] {
            assert!(rep.max_residual <= 1e-7 && rep.converges_at(1.9), "{}: {} {:?}", rep.label, rep.max_residual, rep.order);
        }
        assert!(r.remark_gap.unwrap().iter().all(|g| *g <= 1e-10), "{:?}", r.remark_gap);
    }

    #[test]
    fn constraints_on_sliced_chart() {
        let r = check_constraints_3p1(&potential(4), &sliced_chart(), &points(4)).unwrap();
        for rep in [&r.first, &r.second_corrected] {
            assert!(rep.max_residual <= 1e-7 && rep.converges_at(1.9), "{}: {} {:?}", rep.label, rep.max_residual, rep.order);
        }
        // The stated lapse-gradient terms leave an O(1) defect when grad β ≠ 0.
        assert!(r.second.max_residual > 1e-3 && !r.second.converges_at(1.0));
        assert!(r.remark_gap.is_none());
    }

    #[test]
    fn constraints_with_unit_lapse() {
        let r = check_constraints_3p1(&potential(4), &unit_lapse_chart(), &points(4)).unwrap();
        for rep in [&r.first, &r.second, &r.second_corrected] {
            assert!(rep.max_residual <= 1e-7 && rep.converges_at(1.9), "{}: {} {:?}", rep.label, rep.max_residual, rep.order);
        }
        let [g1, g2] = r.remark_gap.unwrap();
        assert!(g1 < 1e-8);
        // The simplified second equation carries an extra −2 g_t(∇^tan A, W).
        assert!(g2 > 1e-3);
        assert!(r.remark_gap_corrected.unwrap() < 1e-8);
    }

    #[test]
    fn hodge_box_does_not_close_the_second_equation() {
        let r = check_constraints_with(&potential(4), &unit_lapse_chart(), &points(4), BoxKind::Hodge).unwrap();
        assert!(r.second.max_residual > 1e-4);
    }

    #[test]
    fn obstruction_identity() {
        let z = check_obstruction(&constant_potential(4), &points(4)).unwrap();
        assert!(z.max_residual <= 1e-12);
        for n in 2..=4 {
            let r = check_obstruction(&potential(n), &points(n)).unwrap();
            assert!(r.max_residual <= 1e-7 && r.converges_at(1.9), "n={n}: {} {:?}", r.max_residual, r.order);
        }
    }

    #[test]
    fn periodic_slice_has_no_charge() {
        let q = slice_charge_integral(&periodic_potential(3), 0.3, 24).unwrap();
        assert!(q.abs() <= 1e-8, "{q}");
    }
}
