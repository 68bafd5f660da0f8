//! Bounded-ratio experiments for the product, commutator and composition
//! inequalities used by the energy estimates.
//!
//! Every check evaluates a left-hand side and the right-hand side without
//! its constant on each member of a seeded suite of real trigonometric
//! polynomials, and reports the largest ratio. Each check is repeated on a
//! grid with twice the resolution so that the stability of the empirical
//! constant can be judged. Everything here runs in double precision.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evolve::log_log_slope;
use crate::field::Field;
use crate::grid::{Grid, ScalarKind};
use crate::mollifier::Mollifier;
use crate::scalar::cplx;
use crate::system::multi_indices;

type F64Field = Field<f64>;

/// A reproducible family of random real trigonometric polynomials
/// `Σ_{|ξ_i| ≤ d} a_ξ cos(ξ·x) + b_ξ sin(ξ·x)` with `a, b` uniform in
/// `[−amplitude, amplitude]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RandomSuite {
    pub seed: u64,
    pub count: usize,
    pub max_degree: usize,
    pub amplitude: f64,
    pub dim: usize,
}

impl RandomSuite {
    pub fn new(seed: u64, count: usize, max_degree: usize, amplitude: f64, dim: usize) -> Result<Self> {
        if count == 0 || max_degree == 0 || !(amplitude > 0.0) || !(dim == 1 || dim == 2) {
            return Err(Error::InvalidArgument(
                "suite needs count, degree, amplitude > 0 and dim 1 or 2".into(),
            ));
        }
        Ok(Self { seed, count, max_degree, amplitude, dim })
    }

    /// Smallest power-of-two grid that multiplies two members exactly.
    pub fn base_resolution(&self) -> usize {
        (8 * self.max_degree).next_power_of_two().max(16)
    }

    /// Frequencies of the half-space `ξ > 0` (lexicographically) plus `0`.
    fn frequencies(&self) -> Vec<[i64; 2]> {
        let d = self.max_degree as i64;
        match self.dim {
            1 => (0..=d).map(|k| [k, 0]).collect(),
            _ => {
                let mut v = Vec::new();
                for a in 0..=d {
                    for b in -d..=d {
                        if a > 0 || b >= 0 {
                            v.push([a, b]);
                        }
                    }
                }
                v
            }
        }
    }

    /// Draws the raw coefficients `(ξ, a_ξ, b_ξ)` of every member. The draw
    /// order is independent of any grid.
    pub fn coefficients(&self) -> Vec<Vec<([i64; 2], f64, f64)>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let freqs = self.frequencies();
        (0..self.count)
            .map(|_| {
                freqs
                    .iter()
                    .map(|&xi| {
                        let a = rng.random_range(-self.amplitude..=self.amplitude);
                        let b = if xi == [0, 0] { 0.0 } else { rng.random_range(-self.amplitude..=self.amplitude) };
                        (xi, a, b)
                    })
                    .collect()
            })
            .collect()
    }

    /// Materializes the members on `grid`.
    pub fn members(&self, grid: &Arc<Grid<f64>>) -> Result<Vec<F64Field>> {
        if grid.dim() != self.dim || 2 * self.max_degree + 1 >= grid.modes() {
            return Err(Error::InvalidArgument("grid too coarse for the suite".into()));
        }
        self.coefficients()
            .iter()
            .map(|terms| {
                let mut c = vec![cplx(0.0, 0.0); grid.points()];
                for &(xi, a, b) in terms {
                    let idx = &xi[..self.dim];
                    let neg: Vec<i64> = idx.iter().map(|v| -v).collect();
                    if xi == [0, 0] {
                        c[grid.slot(idx).expect("in band")] += cplx(a, 0.0);
                    } else {
                        // a cos + b sin = ((a − ib)/2) e^{iξx} + ((a + ib)/2) e^{−iξx}
                        c[grid.slot(idx).expect("in band")] += cplx(a / 2.0, -b / 2.0);
                        c[grid.slot(&neg).expect("in band")] += cplx(a / 2.0, b / 2.0);
                    }
                }
                Field::from_coeffs(grid, 1, ScalarKind::Real, c)
            })
            .collect()
    }
}

/// One evaluated ratio.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MemberRatio {
    pub member: usize,
    pub ratio: f64,
    pub resolution: usize,
    pub epsilon: Option<f64>,
}

/// Ratios of a check over a suite at two resolutions.
#[derive(Clone, Debug)]
pub struct RatioReport {
    pub label: String,
    pub entries: Vec<MemberRatio>,
    pub resolution: usize,
    /// Largest ratio at the base resolution.
    pub max_ratio: f64,
    /// Largest ratio at twice the base resolution.
    pub max_ratio_refined: f64,
    /// `|refined − base| / base` (0 when both vanish).
    pub resolution_change: f64,
    /// Per-ε maxima of the unnormalized quantity, for rate fits.
    pub per_epsilon: Vec<(f64, f64)>,
    /// Log-log slope of `per_epsilon`, where applicable.
    pub slope: Option<f64>,
    pub all_finite: bool,
}

impl RatioReport {
    fn assemble(label: String, resolution: usize, entries: Vec<MemberRatio>, per_epsilon: Vec<(f64, f64)>) -> Self {
        let max_at = |r: usize| {
            entries
                .iter()
                .filter(|e| e.resolution == r)
                .fold(0.0f64, |m, e| if e.ratio.is_nan() { f64::NAN } else { m.max(e.ratio) })
        };
        let max_ratio = max_at(resolution);
        let max_ratio_refined = max_at(2 * resolution);
        let resolution_change = if max_ratio == 0.0 && max_ratio_refined == 0.0 {
            0.0
        } else {
            (max_ratio_refined - max_ratio).abs() / max_ratio.abs().max(f64::MIN_POSITIVE)
        };
        let all_finite = entries.iter().all(|e| e.ratio.is_finite());
        let slope = if per_epsilon.len() >= 2 {
            let (x, y): (Vec<f64>, Vec<f64>) = per_epsilon.iter().copied().unzip();
            log_log_slope(&x, &y)
        } else {
            None
        };
        Self { label, entries, resolution, max_ratio, max_ratio_refined, resolution_change, per_epsilon, slope, all_finite }
    }

    /// CSV with columns `member,ratio,resolution,epsilon`.
    pub fn to_csv(&self, header: Option<&str>) -> String {
        let mut s = String::new();
        if let Some(h) = header {
            let _ = writeln!(s, "# {h}");
        }
        s.push_str("member,ratio,resolution,epsilon\n");
        for e in &self.entries {
            let eps = e.epsilon.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(s, "{},{},{},{}", e.member, e.ratio, e.resolution, eps);
        }
        s
    }
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    scaled_ratio(lhs, rhs, 1.0)
}

/// `lhs / rhs`, reading a vanishing right-hand side as exact when the
/// left-hand side is roundoff relative to `scale`.
fn scaled_ratio(lhs: f64, rhs: f64, scale: f64) -> f64 {
    if rhs == 0.0 {
        if lhs <= 1e-12 * scale.max(1.0) {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        lhs / rhs
    }
}

/// `‖∇f‖_{L∞}` as the grid maximum of the Euclidean gradient.
fn grad_sup(f: &F64Field) -> Result<f64> {
    let grads: Vec<F64Field> = (0..f.grid().dim()).map(|j| f.derivative(j)).collect::<Result<_>>()?;
    let refs: Vec<&F64Field> = grads.iter().collect();
    Ok(Field::stack(&refs)?.sup_norm())
}

/// `‖∇f‖_{H^m} = sqrt(Σ_j ‖∂_j f‖²_{H^m})`.
fn grad_sobolev(f: &F64Field, m: usize) -> Result<f64> {
    let mut acc = 0.0;
    for j in 0..f.grid().dim() {
        acc += f.derivative(j)?.sobolev_norm(m).powi(2);
    }
    Ok(acc.sqrt())
}

fn multinomial(alpha: &[usize]) -> f64 {
    let fact = |n: usize| (1..=n).map(|v| v as f64).product::<f64>();
    let k: usize = alpha.iter().sum();
    fact(k) / alpha.iter().map(|&a| fact(a)).product::<f64>()
}

/// `‖∇^k f‖_{L²}`: the L² norm of the full `k`-th derivative tensor.
fn tensor_norm(f: &F64Field, k: usize) -> Result<f64> {
    let dim = f.grid().dim();
    let mut acc = 0.0;
    for alpha in multi_indices(dim, k).into_iter().filter(|a| a.iter().sum::<usize>() == k) {
        acc += multinomial(&alpha) * f.partial(&alpha)?.l2_norm().powi(2);
    }
    Ok(acc.sqrt())
}

fn top_order(dim: usize, k: usize) -> Vec<Vec<usize>> {
    multi_indices(dim, k).into_iter().filter(|a| a.iter().sum::<usize>() == k).collect()
}

/// Which of the three product/composition inequalities to test.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MoserVariant {
    /// `‖fg‖_{H^k} ≤ C(‖f‖_{L∞}‖g‖_{H^k} + ‖f‖_{H^k}‖g‖_{L∞})`.
    First,
    /// `‖∂^α(fg) − f∂^α g‖_{L²} ≤ C(‖∇f‖_{H^{k−1}}‖g‖_{L∞} + ‖∇f‖_{L∞}‖g‖_{H^{k−1}})`.
    Second,
    /// `‖∂^α F(f)‖_{L²} ≤ C(‖f‖_{L∞})·‖∇^{|α|} f‖_{L²}`.
    Third,
}

/// A smooth scalar map `F` with `F(0) = 0`, applied pointwise.
#[derive(Clone)]
pub struct Composer {
    pub name: String,
    pub map: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for Composer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Composer({})", self.name)
    }
}

impl Composer {
    pub fn new(name: &str, map: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.to_string(), map: Arc::new(map) }
    }

    pub fn identity() -> Self {
        Self::new("identity", |u| u)
    }

    /// Bundled composers: `identity`, `sin`, `cube`, `rational` (u/(1+u²)).
    pub fn by_name(name: &str) -> Option<Self> {
        Some(match name {
            "identity" => Self::identity(),
            "sin" => Self::new("sin", f64::sin),
            "cube" => Self::new("cube", |u| u * u * u),
            "rational" => Self::new("rational", |u| u / (1.0 + u * u)),
            _ => return None,
        })
    }

    fn apply(&self, f: &F64Field) -> Result<F64Field> {
        let map = self.map.clone();
        Field::pointwise(&[f], 1, ScalarKind::Real, move |_, v, out| out[0] = cplx(map(v[0].re), 0.0))
    }
}

fn moser_ratio(variant: MoserVariant, k: usize, f: &F64Field, g: &F64Field, composer: Option<&Composer>) -> Result<f64> {
    let dim = f.grid().dim();
    match variant {
        MoserVariant::First => {
            let lhs = f.product(g)?.sobolev_norm(k);
            let rhs = f.sup_norm() * g.sobolev_norm(k) + f.sobolev_norm(k) * g.sup_norm();
            Ok(ratio(lhs, rhs))
        }
        MoserVariant::Second => {
            let fg = f.product(g)?;
            let km1 = k.saturating_sub(1);
            let rhs = grad_sobolev(f, km1)? * g.sup_norm() + grad_sup(f)? * g.sobolev_norm(km1);
            let mut worst = 0.0f64;
            for alpha in top_order(dim, k) {
                let d_fg = fg.partial(&alpha)?;
                let f_dg = f.product(&g.partial(&alpha)?)?;
                let lhs = d_fg.try_sub(&f_dg)?.l2_norm();
                worst = worst.max(scaled_ratio(lhs, rhs, d_fg.l2_norm() + f_dg.l2_norm()));
            }
            Ok(worst)
        }
        MoserVariant::Third => {
            let c = composer.ok_or(Error::MissingComposer)?;
            let ff = c.apply(f)?;
            let rhs = tensor_norm(f, k)?;
            let mut worst = 0.0f64;
            for alpha in top_order(dim, k) {
                worst = worst.max(ratio(ff.partial(&alpha)?.l2_norm(), rhs));
            }
            Ok(worst)
        }
    }
}

/// Largest grid the composition variant may refine to.
pub const MAX_COMPOSER_RESOLUTION: usize = 4096;

fn moser_rows(
    variant: MoserVariant,
    suite: &RandomSuite,
    k: usize,
    composer: Option<&Composer>,
    res: usize,
) -> Result<Vec<MemberRatio>> {
    let grid = Grid::new(suite.dim, res)?;
    let members = suite.members(&grid)?;
    let count = members.len();
    (0..count)
        .into_par_iter()
        .map(|i| {
            let g = &members[(i + 1) % count];
            let r = moser_ratio(variant, k, &members[i], g, composer)?;
            Ok(MemberRatio { member: i, ratio: r, resolution: res, epsilon: None })
        })
        .collect()
}

/// Empirical constant of one Moser estimate over the suite. The first and
/// second variants pair member `i` with member `i + 1` (cyclically).
///
/// Products of suite members are resolved exactly at the base resolution.
/// A composition `F(f)` generally is not band-limited, so the third variant
/// keeps doubling the grid until the maximum ratio moves by less than 1%
/// (or [`MAX_COMPOSER_RESOLUTION`] is reached); the report then holds the
/// last two resolutions.
pub fn check_moser(
    variant: MoserVariant,
    suite: &RandomSuite,
    k: usize,
    composer: Option<&Composer>,
) -> Result<RatioReport> {
    if variant == MoserVariant::Third {
        let c = composer.ok_or(Error::MissingComposer)?;
        let f0 = (c.map)(0.0);
        if f0.abs() > 1e-14 {
            return Err(Error::ComposerNotPunctured(f0));
        }
    }
    if variant != MoserVariant::First && k == 0 {
        return Err(Error::InvalidArgument("derivative order must be at least 1".into()));
    }
    let label = format!("moser_{variant:?}_k{k}").to_lowercase();
    let mut n = suite.base_resolution();
    let mut coarse = moser_rows(variant, suite, k, composer, n)?;
    loop {
        let fine = moser_rows(variant, suite, k, composer, 2 * n)?;
        let entries: Vec<MemberRatio> = coarse.into_iter().chain(fine.iter().copied()).collect();
        let report = RatioReport::assemble(label.clone(), n, entries, Vec::new());
        let settled = !(report.resolution_change > 0.01) || !report.all_finite;
        if variant != MoserVariant::Third || settled || 2 * n >= MAX_COMPOSER_RESOLUTION {
            return Ok(report);
        }
        coarse = fine;
        n *= 2;
    }
}

/// Runs a Moser check with one explicit `(f, g)` pair at its own resolution.
pub fn moser_ratio_pair(
    variant: MoserVariant,
    k: usize,
    f: &F64Field,
    g: &F64Field,
    composer: Option<&Composer>,
) -> Result<f64> {
    moser_ratio(variant, k, f, g, composer)
}

/// Which form of the mollifier commutator bound to test (`p = 2`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommutatorForm {
    /// `‖[A,J_ε]v‖ ≤ C‖A‖_{C⁰}‖v‖`.
    Zeroth,
    /// `‖[A,J_ε]v‖ ≤ C ε ‖A‖_{C¹}‖v‖`.
    Lipschitz,
    /// `‖[A,J_ε]v‖_{H¹} ≤ C‖A‖_{C¹}‖v‖`.
    FirstSobolev,
    /// `‖[A,J_ε]∂_j v‖ ≤ C‖A‖_{C¹}‖v‖`.
    Derivative,
}

/// `[A, J_ε]v = A·J_ε v − J_ε(A·v)`.
pub fn commutator(a: &F64Field, m: &Mollifier<f64>, v: &F64Field) -> Result<F64Field> {
    let left = v.mollify(m).times_scalar_field(a)?;
    let right = v.times_scalar_field(a)?.mollify(m);
    left.try_sub(&right)
}

/// Bundled coefficient fields for commutator checks: `sin` (1D),
/// `two_mode` (1D, `sin x + 0.5 cos 2x`) and `product` (2D, `sin x cos y`).
pub fn a_field_by_name(name: &str, grid: &Arc<Grid<f64>>) -> Option<F64Field> {
    match (name, grid.dim()) {
        ("sin", 1) => Some(Field::from_real_fn(grid, |x| x[0].sin())),
        ("two_mode", 1) => Some(Field::from_real_fn(grid, |x| x[0].sin() + 0.5 * (2.0 * x[0]).cos())),
        ("product", 2) => Some(Field::from_real_fn(grid, |x| x[0].sin() * x[1].cos())),
        _ => None,
    }
}

/// Names accepted by [`a_field_by_name`] with their dimension.
pub const A_FIELDS: &[(&str, usize)] = &[("sin", 1), ("two_mode", 1), ("product", 2)];

fn commutator_quantity(form: CommutatorForm, a: &F64Field, m: &Mollifier<f64>, v: &F64Field) -> Result<f64> {
    Ok(match form {
        CommutatorForm::Zeroth | CommutatorForm::Lipschitz => commutator(a, m, v)?.l2_norm(),
        CommutatorForm::FirstSobolev => commutator(a, m, v)?.sobolev_norm(1),
        CommutatorForm::Derivative => {
            let mut worst = 0.0f64;
            for j in 0..v.grid().dim() {
                worst = worst.max(commutator(a, m, &v.derivative(j)?)?.l2_norm());
            }
            worst
        }
    })
}

fn commutator_norm(form: CommutatorForm, a: &F64Field) -> f64 {
    match form {
        CommutatorForm::Zeroth => a.sup_norm(),
        _ => a.c1_norm(),
    }
}

/// Highest frequency magnitude carried by a field (per axis, max).
pub fn bandwidth(f: &F64Field) -> usize {
    let p = f.grid().points();
    let scale = f.coeffs().iter().fold(0.0f64, |m, c| m.max(c.norm()));
    let mut band = 0usize;
    for (i, c) in f.coeffs().iter().enumerate() {
        if c.norm() > 1e-14 * scale {
            let xi = f.grid().frequency(i % p);
            band = band.max(xi[0].unsigned_abs() as usize).max(xi[1].unsigned_abs() as usize);
        }
    }
    band
}

/// Carrier frequency used for the Lipschitz form at width `ε`.
pub fn carrier_frequency(eps: f64) -> usize {
    (1.0 / eps).round().max(1.0) as usize
}

fn modulate(v: &F64Field, freq: usize) -> Result<F64Field> {
    let carrier = Field::from_real_fn(v.grid(), move |x| (freq as f64 * x[0]).cos());
    v.times_scalar_field(&carrier)
}

/// Commutator check on explicit probe fields. Ratios are normalized by
/// `‖A‖·‖v‖` (and by `ε` for the Lipschitz form). `per_epsilon` records
/// the unnormalized maxima `max_v ‖…‖/(‖A‖‖v‖)` per ε.
pub fn check_commutator_on(
    form: CommutatorForm,
    a_field: &F64Field,
    probes: &[F64Field],
    eps_schedule: &[f64],
) -> Result<RatioReport> {
    if probes.is_empty() || eps_schedule.is_empty() {
        return Err(Error::InvalidArgument("need probes and an ε schedule".into()));
    }
    let n = a_field.grid().modes();
    let dim = a_field.grid().dim();
    let mollifiers: Vec<Mollifier<f64>> = eps_schedule.iter().map(|&e| Mollifier::new(e)).collect::<Result<_>>()?;
    let mut entries = Vec::new();
    let mut per_eps = vec![0.0f64; eps_schedule.len()];
    for res in [n, 2 * n] {
        let grid = Grid::new(dim, res)?;
        let a = a_field.resample(&grid)?;
        let an = commutator_norm(form, &a);
        let vs: Vec<F64Field> = probes.iter().map(|p| p.resample(&grid)).collect::<Result<_>>()?;
        let jobs: Vec<(usize, usize)> =
            (0..vs.len()).flat_map(|i| (0..eps_schedule.len()).map(move |e| (i, e))).collect();
        let rows: Vec<(MemberRatio, f64)> = jobs
            .par_iter()
            .map(|&(i, e)| {
                let q = commutator_quantity(form, &a, &mollifiers[e], &vs[i])?;
                let base = ratio(q, an * vs[i].l2_norm());
                let r = if form == CommutatorForm::Lipschitz { base / eps_schedule[e] } else { base };
                Ok((MemberRatio { member: i, ratio: r, resolution: res, epsilon: Some(eps_schedule[e]) }, base))
            })
            .collect::<Result<_>>()?;
        for (row, base) in rows {
            if res == n {
                let e = eps_schedule.iter().position(|&v| Some(v) == row.epsilon).expect("ε from schedule");
                per_eps[e] = per_eps[e].max(base);
            }
            entries.push(row);
        }
    }
    let per_epsilon = eps_schedule.iter().copied().zip(per_eps).collect();
    Ok(RatioReport::assemble(format!("commutator_{form:?}").to_lowercase(), n, entries, per_epsilon))
}

/// Commutator check over a random suite.
///
/// Band-limited members see the commutator only at order `ε²`, because the
/// kernel is even. For the Lipschitz form each member is therefore also
/// modulated by `cos(Kx)` with `K = round(1/ε)`, which probes the regime
/// where the `ε` rate is sharp; the grid is refined until every modulated
/// product is resolved exactly.
pub fn check_commutator(
    form: CommutatorForm,
    a_field: &F64Field,
    suite: &RandomSuite,
    eps_schedule: &[f64],
) -> Result<RatioReport> {
    if a_field.grid().dim() != suite.dim {
        return Err(Error::GridMismatch);
    }
    if eps_schedule.is_empty() {
        return Err(Error::InvalidArgument("ε schedule is empty".into()));
    }
    let a_band = bandwidth(a_field);
    let carrier_max = if form == CommutatorForm::Lipschitz {
        eps_schedule.iter().map(|&e| carrier_frequency(e)).max().unwrap_or(0)
    } else {
        0
    };
    let need = 2 * (carrier_max + suite.max_degree + a_band + 2);
    let n = need.next_power_of_two().max(suite.base_resolution()).max(a_field.grid().modes());
    let grid = Grid::new(suite.dim, n)?;
    let a = a_field.resample(&grid)?;
    let members = suite.members(&grid)?;
    if form != CommutatorForm::Lipschitz {
        return check_commutator_on(form, &a, &members, eps_schedule);
    }
    // Lipschitz form: plain members at every ε, plus members modulated at
    // the carrier matched to each ε.
    let mut entries = Vec::new();
    let mut per_eps = Vec::new();
    for &eps in eps_schedule {
        let k = carrier_frequency(eps);
        let mut probes = members.clone();
        for m in &members {
            probes.push(modulate(m, k)?);
        }
        let rep = check_commutator_on(form, &a, &probes, &[eps])?;
        per_eps.push(rep.per_epsilon[0]);
        entries.extend(rep.entries);
    }
    Ok(RatioReport::assemble("commutator_lipschitz".into(), n, entries, per_eps))
}

/// `‖(Id − J_ε)f‖_{L²} / (ε‖f‖_{H¹})` over the suite and schedule; the
/// slope is fitted to the per-ε maxima of `‖(Id − J_ε)f‖/‖f‖_{H¹}`.
pub fn check_mollifier_gap(suite: &RandomSuite, eps_schedule: &[f64]) -> Result<RatioReport> {
    if eps_schedule.is_empty() {
        return Err(Error::InvalidArgument("ε schedule is empty".into()));
    }
    let n = suite.base_resolution();
    let mollifiers: Vec<Mollifier<f64>> = eps_schedule.iter().map(|&e| Mollifier::new(e)).collect::<Result<_>>()?;
    let mut entries = Vec::new();
    let mut per_eps = vec![0.0f64; eps_schedule.len()];
    for res in [n, 2 * n] {
        let grid = Grid::new(suite.dim, res)?;
        let members = suite.members(&grid)?;
        for (e, m) in mollifiers.iter().enumerate() {
            for (i, f) in members.iter().enumerate() {
                let gap = f.try_sub(&f.mollify(m))?.l2_norm();
                let base = ratio(gap, f.sobolev_norm(1));
                if res == n {
                    per_eps[e] = per_eps[e].max(base);
                }
                entries.push(MemberRatio {
                    member: i,
                    ratio: base / eps_schedule[e],
                    resolution: res,
                    epsilon: Some(eps_schedule[e]),
                });
            }
        }
    }
    let per_epsilon = eps_schedule.iter().copied().zip(per_eps).collect();
    Ok(RatioReport::assemble("mollifier_gap".into(), n, entries, per_epsilon))
}

/// Dyadic schedule `2^{−from}, …, 2^{−to}`.
pub fn dyadic(from: i32, to: i32) -> Vec<f64> {
    (from..=to).map(|j| 2f64.powi(-j)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn suite(count: usize) -> RandomSuite {
        RandomSuite::new(0, count, 8, 1.0, 1).unwrap()
    }

    #[test]
    fn same_seed_same_suite() {
        let g = Grid::one_d(64).unwrap();
        let a = suite(5).members(&g).unwrap();
        let b = suite(5).members(&g).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.bitwise_eq(y)));
        let c = RandomSuite { seed: 1, ..suite(5) }.members(&g).unwrap();
        assert!(!a[0].bitwise_eq(&c[0]));
    }

    #[test]
    fn members_match_their_coefficients() {
        let g = Grid::one_d(64).unwrap();
        let s = suite(1);
        let f = &s.members(&g).unwrap()[0];
        let terms = &s.coefficients()[0];
        let x = 0.77;
        let direct: f64 = terms.iter().map(|&(xi, a, b)| a * (xi[0] as f64 * x).cos() + b * (xi[0] as f64 * x).sin()).sum();
        assert!((f.eval_at(&[x])[0].re - direct).abs() < 1e-12);
    }

    #[test]
    fn second_variant_with_constant_f_vanishes() {
        let g = Grid::one_d(64).unwrap();
        let f = Field::constant(&g, 2.0);
        for m in suite(5).members(&g).unwrap() {
            let fg = f.product(&m).unwrap();
            let d_fg = fg.partial(&[3]).unwrap();
            let lhs = d_fg.try_sub(&f.product(&m.partial(&[3]).unwrap()).unwrap()).unwrap();
            assert!(lhs.l2_norm() <= 1e-13 * d_fg.l2_norm());
            assert_eq!(moser_ratio_pair(MoserVariant::Second, 3, &f, &m, None).unwrap(), 0.0);
        }
    }

    #[test]
    fn third_variant_identity_is_exactly_one() {
        let rep = check_moser(MoserVariant::Third, &suite(10), 3, Some(&Composer::identity())).unwrap();
        for e in &rep.entries {
            assert!((e.ratio - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn third_variant_needs_punctured_composer() {
        assert_eq!(check_moser(MoserVariant::Third, &suite(2), 2, None).unwrap_err(), Error::MissingComposer);
        let shifted = Composer::new("cos", f64::cos);
        assert!(matches!(
            check_moser(MoserVariant::Third, &suite(2), 2, Some(&shifted)),
            Err(Error::ComposerNotPunctured(_))
        ));
    }

    #[test]
    fn constant_a_has_zero_commutator() {
        let g = Grid::one_d(64).unwrap();
        let a = Field::constant(&g, 3.0);
        for form in [CommutatorForm::Zeroth, CommutatorForm::Lipschitz, CommutatorForm::FirstSobolev, CommutatorForm::Derivative] {
            let rep = check_commutator(form, &a, &suite(4), &dyadic(3, 5)).unwrap();
            assert!(rep.entries.iter().all(|e| e.ratio < 1e-13), "{form:?}");
        }
    }

    #[test]
    fn commutator_of_single_mode_against_closed_form() {
        // A = sin, v = e^{iqx}: [A,J]v = (θ̂(εq) − θ̂(ε(q+1)))e^{i(q+1)x}/(2i) − (θ̂(εq) − θ̂(ε(q−1)))e^{i(q−1)x}/(2i).
        let g = Grid::one_d(64).unwrap();
        let a = Field::from_real_fn(&g, |x: &[f64]| x[0].sin());
        let q = 5i64;
        let v = Field::from_modes(&g, ScalarKind::Complex, &[(&[q], cplx(1.0, 0.0))]).unwrap();
        let eps = 0.2;
        let c = commutator(&a, &Mollifier::new(eps).unwrap(), &v).unwrap();
        let th = |k: i64| crate::mollifier::kernel_hat(1, eps * k as f64);
        let up = (th(q) - th(q + 1)) / 2.0;
        let down = (th(q) - th(q - 1)) / 2.0;
        let expect = (up * up + down * down).sqrt() * std::f64::consts::TAU.sqrt();
        assert!((c.l2_norm() - expect).abs() < 1e-13);
    }
}
