//! Time integration of the smoothed systems and the drivers built on it.
//!
//! The integrator is the Dormand–Prince 5(4) pair with its embedded error
//! estimate. Snapshots land exactly on multiples of the snapshot interval.
//! Integration stops early when the grid-sampled `C¹` norm crosses the
//! breakdown threshold (or the state stops being finite); the crossing time
//! is then refined by bisection inside the last accepted step.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::mollifier::Mollifier;
use crate::scalar::{czero, Cplx, Real};
use crate::system::{mollified_rhs, weighted_energy, HyperbolicSystem};

/// How the breakdown threshold on `‖u‖_{C¹}` is fixed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BreakdownThreshold {
    /// A fixed value.
    Absolute(f64),
    /// A multiple of the initial `C¹` norm.
    RelativeToInitial(f64),
}

impl BreakdownThreshold {
    pub fn resolve(&self, initial_c1: f64) -> f64 {
        match *self {
            BreakdownThreshold::Absolute(v) => v,
            BreakdownThreshold::RelativeToInitial(f) => f * initial_c1,
        }
    }
}

/// Integrator settings.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveControls {
    pub rk_abs_tol: f64,
    pub rk_rel_tol: f64,
    pub max_step: f64,
    pub breakdown: BreakdownThreshold,
    pub snapshot_interval: f64,
    /// Sobolev order of the logged norms.
    pub k_monitor: usize,
}

impl Default for SolveControls {
    fn default() -> Self {
        Self {
            rk_abs_tol: 1e-10,
            rk_rel_tol: 1e-8,
            max_step: 0.05,
            breakdown: BreakdownThreshold::RelativeToInitial(1e3),
            snapshot_interval: 0.05,
            k_monitor: 4,
        }
    }
}

impl SolveControls {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidControls(format!("{name} must be positive, got {v}")))
            }
        };
        positive("rk_abs_tol", self.rk_abs_tol)?;
        positive("rk_rel_tol", self.rk_rel_tol)?;
        positive("max_step", self.max_step)?;
        positive("snapshot_interval", self.snapshot_interval)?;
        match self.breakdown {
            BreakdownThreshold::Absolute(v) | BreakdownThreshold::RelativeToInitial(v) => {
                positive("breakdown threshold", v)
            }
        }
    }
}

/// Why an integration stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    ReachedEnd,
    Breakdown,
    StepFailure,
}

/// Snapshots and monitor logs of one run.
#[derive(Clone, Debug)]
pub struct Trajectory<T: Real> {
    pub times: Vec<f64>,
    pub states: Vec<Field<T>>,
    pub hk_log: Vec<f64>,
    pub c1_log: Vec<f64>,
    pub energy_weighted_log: Vec<f64>,
    pub terminated_by: Termination,
    /// Threshold actually used for the `C¹` monitor.
    pub c1_threshold: f64,
    pub k_monitor: usize,
    pub epsilon: f64,
    pub positivity_floor: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl<T: Real> Trajectory<T> {
    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory has at least the initial snapshot")
    }

    pub fn final_state(&self) -> &Field<T> {
        self.states.last().expect("trajectory has at least the initial snapshot")
    }

    /// Breakdown time if the run ended by crossing the threshold.
    pub fn breakdown_time(&self) -> Option<f64> {
        (self.terminated_by == Termination::Breakdown).then(|| self.final_time())
    }

    /// Bitwise equality of times, states and logs.
    pub fn bitwise_eq(&self, other: &Self) -> bool {
        let same = |a: &[f64], b: &[f64]| {
            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
        };
        self.terminated_by == other.terminated_by
            && same(&self.times, &other.times)
            && same(&self.hk_log, &other.hk_log)
            && same(&self.c1_log, &other.c1_log)
            && same(&self.energy_weighted_log, &other.energy_weighted_log)
            && self.states.len() == other.states.len()
            && self.states.iter().zip(&other.states).all(|(a, b)| a.bitwise_eq(b))
    }

    /// `max_t ‖u(t) − v(t)‖_{L²}` over common snapshot times.
    pub fn max_l2_gap(&self, other: &Self) -> Result<f64> {
        let mut gap = 0.0f64;
        let mut j = 0;
        for (i, &t) in self.times.iter().enumerate() {
            while j < other.times.len() && other.times[j] < t - 1e-12 {
                j += 1;
            }
            if j < other.times.len() && (other.times[j] - t).abs() <= 1e-12 {
                let d = self.states[i].try_sub(&other.states[j])?.l2_norm().to_f64_lossy();
                gap = if d.is_nan() { f64::NAN } else { gap.max(d) };
            }
        }
        Ok(gap)
    }

    /// CSV with columns `t,hk_norm,c1_norm,weighted_energy`.
    pub fn to_csv(&self, header: Option<&str>) -> String {
        let mut s = String::new();
        if let Some(h) = header {
            let _ = writeln!(s, "# {h}");
        }
        s.push_str("t,hk_norm,c1_norm,weighted_energy\n");
        for i in 0..self.times.len() {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                self.times[i], self.hk_log[i], self.c1_log[i], self.energy_weighted_log[i]
            );
        }
        s
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Stepper<'a, T: Real> {
    sys: &'a HyperbolicSystem<T>,
    m: &'a Mollifier<T>,
    atol: f64,
    rtol: f64,
}

struct StepResult<T: Real> {
    y: Field<T>,
    k_last: Field<T>,
    err: f64,
}

fn combine<T: Real>(base: &Field<T>, h: f64, coeffs: &[f64], ks: &[Field<T>]) -> Field<T> {
    let mut out = base.clone();
    let dst = out.coeffs_mut();
    for (&a, k) in coeffs.iter().zip(ks) {
        if a == 0.0 {
            continue;
        }
        let s = T::lit(a * h);
        for (d, v) in dst.iter_mut().zip(k.coeffs()) {
            *d += *v * s;
        }
    }
    out
}

impl<T: Real> Stepper<'_, T> {
    fn rhs(&self, t: f64, u: &Field<T>) -> Result<Field<T>> {
        mollified_rhs(self.sys, self.m, T::lit(t), u)
    }

    /// One Dormand–Prince step from `(t, y)` with first stage `k1`.
    fn step(&self, t: f64, y: &Field<T>, k1: &Field<T>, h: f64) -> Result<StepResult<T>> {
        let mut ks: Vec<Field<T>> = Vec::with_capacity(7);
        ks.push(k1.clone());
        for s in 1..6 {
            let ys = combine(y, h, &A[s][..s], &ks);
            ks.push(self.rhs(t + C[s] * h, &ys)?);
        }
        let y_new = combine(y, h, &A[6][..6], &ks);
        let k7 = self.rhs(t + h, &y_new)?;
        ks.push(k7.clone());
        let mut acc = 0.0f64;
        let mut count = 0usize;
        let n = y.coeffs().len();
        for i in 0..n {
            let mut e: Cplx<T> = czero();
            for (s, k) in ks.iter().enumerate() {
                if E[s] != 0.0 {
                    e += k.coeffs()[i] * T::lit(E[s] * h);
                }
            }
            let scale = self.atol
                + self.rtol
                    * y.coeffs()[i].norm().to_f64_lossy().max(y_new.coeffs()[i].norm().to_f64_lossy());
            let r = e.norm().to_f64_lossy() / scale;
            acc += r * r;
            count += 1;
        }
        let err = (acc / count.max(1) as f64).sqrt();
        Ok(StepResult { y: y_new, k_last: k7, err })
    }
}

fn monitors<T: Real>(
    sys: &HyperbolicSystem<T>,
    t: f64,
    u: &Field<T>,
    k: usize,
) -> Result<(f64, f64, f64)> {
    let hk = u.sobolev_norm(k).to_f64_lossy();
    let c1 = u.c1_norm().to_f64_lossy();
    let e = if u.is_finite() {
        weighted_energy(sys, T::lit(t), u, k)?.to_f64_lossy()
    } else {
        f64::NAN
    };
    Ok((hk, c1, e))
}

fn exceeds(c1: f64, threshold: f64) -> bool {
    !(c1 <= threshold)
}

/// Integrates `∂_t u = mollified_rhs(t, u)` from `u(0) = f` to `t_end`.
///
/// A run that drives the step below `1e−12·t_end` returns normally with
/// [`Termination::StepFailure`]; errors are reserved for invalid input and
/// for a leading coefficient that loses positivity.
pub fn integrate<T: Real>(
    sys: &HyperbolicSystem<T>,
    f: &Field<T>,
    m: &Mollifier<T>,
    t_end: f64,
    ctl: &SolveControls,
) -> Result<Trajectory<T>> {
    ctl.validate()?;
    let c1_0 = f.c1_norm().to_f64_lossy();
    let threshold = ctl.breakdown.resolve(c1_0);
    integrate_with_threshold(sys, f, m, t_end, ctl, threshold)
}

fn integrate_with_threshold<T: Real>(
    sys: &HyperbolicSystem<T>,
    f: &Field<T>,
    m: &Mollifier<T>,
    t_end: f64,
    ctl: &SolveControls,
    threshold: f64,
) -> Result<Trajectory<T>> {
    ctl.validate()?;
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidControls(format!("t_end must be positive, got {t_end}")));
    }
    if f.grid().dim() != sys.dim() || f.width() != sys.width() {
        return Err(Error::GridMismatch);
    }
    let k = ctl.k_monitor;
    let (hk0, c1_0, e0) = monitors(sys, 0.0, f, k)?;
    if !(threshold > c1_0) {
        return Err(Error::InvalidControls(format!(
            "breakdown threshold {threshold} must exceed the initial C¹ norm {c1_0}"
        )));
    }
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![f.clone()],
        hk_log: vec![hk0],
        c1_log: vec![c1_0],
        energy_weighted_log: vec![e0],
        terminated_by: Termination::ReachedEnd,
        c1_threshold: threshold,
        k_monitor: k,
        epsilon: m.epsilon(),
        positivity_floor: sys.positivity_floor().to_f64_lossy(),
        accepted_steps: 0,
        rejected_steps: 0,
    };
    let stepper = Stepper { sys, m, atol: ctl.rk_abs_tol, rtol: ctl.rk_rel_tol };
    let h_min = 1e-12 * t_end;
    let n_snap = (t_end / ctl.snapshot_interval - 1e-9).ceil().max(1.0) as usize;
    let snap_time = |i: usize| if i >= n_snap { t_end } else { i as f64 * ctl.snapshot_interval };

    let mut t = 0.0f64;
    let mut y = f.clone();
    let mut k1 = stepper.rhs(t, &y)?;
    let mut h = initial_step(&y, &k1, ctl, t_end);
    let mut next_snap = 1usize;

    while next_snap <= n_snap {
        let target = snap_time(next_snap);
        let mut hs = h.min(ctl.max_step);
        let mut hits = false;
        if t + hs >= target - 1e-14 * t_end.max(1.0) {
            hs = target - t;
            hits = true;
        }
        if hs < h_min {
            traj.terminated_by = Termination::StepFailure;
            break;
        }
        let res = stepper.step(t, &y, &k1, hs)?;
        let finite = res.y.is_finite() && res.err.is_finite();
        if finite && res.err > 1.0 {
            traj.rejected_steps += 1;
            h = hs * (0.9 * res.err.powf(-0.2)).clamp(0.2, 1.0);
            continue;
        }
        let c1_new = if finite { res.y.c1_norm().to_f64_lossy() } else { f64::NAN };
        if !finite || exceeds(c1_new, threshold) {
            if !finite && hs > 4.0 * h_min {
                // A blown-up trial step may simply be too long: retry shorter
                // before declaring a breakdown.
                traj.rejected_steps += 1;
                h = hs * 0.25;
                continue;
            }
            let (tb, yb) = bisect_crossing(&stepper, t, &y, &k1, hs, threshold)?;
            let (hk, c1, e) = monitors(sys, tb, &yb, k)?;
            traj.times.push(tb);
            traj.states.push(yb);
            traj.hk_log.push(hk);
            traj.c1_log.push(c1);
            traj.energy_weighted_log.push(e);
            traj.terminated_by = Termination::Breakdown;
            return Ok(traj);
        }
        traj.accepted_steps += 1;
        t = if hits { target } else { t + hs };
        y = res.y;
        k1 = res.k_last;
        let factor = if res.err == 0.0 { 5.0 } else { (0.9 * res.err.powf(-0.2)).clamp(0.2, 5.0) };
        if !hits || factor < 1.0 {
            h = hs * factor;
        }
        if hits {
            let (hk, c1, e) = monitors(sys, t, &y, k)?;
            traj.times.push(t);
            traj.states.push(y.clone());
            traj.hk_log.push(hk);
            traj.c1_log.push(c1);
            traj.energy_weighted_log.push(e);
            next_snap += 1;
        }
    }
    Ok(traj)
}

fn initial_step<T: Real>(y: &Field<T>, k1: &Field<T>, ctl: &SolveControls, t_end: f64) -> f64 {
    let d0 = y.l2_norm().to_f64_lossy();
    let d1 = k1.l2_norm().to_f64_lossy();
    let guess = if d0 < 1e-5 || d1 < 1e-5 { 1e-3 } else { 0.01 * d0 / d1 };
    guess.min(ctl.max_step).min(ctl.snapshot_interval).min(t_end).max(1e-12 * t_end)
}

/// Locates the threshold crossing inside `[t, t + h]` by bisection on the
/// length of a single step from `(t, y)`.
fn bisect_crossing<T: Real>(
    stepper: &Stepper<'_, T>,
    t: f64,
    y: &Field<T>,
    k1: &Field<T>,
    h: f64,
    threshold: f64,
) -> Result<(f64, Field<T>)> {
    let (mut lo, mut hi) = (0.0f64, h);
    let mut y_hi: Option<Field<T>> = None;
    for _ in 0..60 {
        if hi - lo <= 1e-12 * (t + h).max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let trial = stepper.step(t, y, k1, mid)?.y;
        let c1 = if trial.is_finite() { trial.c1_norm().to_f64_lossy() } else { f64::NAN };
        if exceeds(c1, threshold) {
            hi = mid;
            y_hi = Some(trial);
        } else {
            lo = mid;
        }
    }
    let state = match y_hi {
        Some(s) => s,
        None => stepper.step(t, y, k1, hi)?.y,
    };
    Ok((t + hi, state))
}

/// Result of an ε-family run.
#[derive(Clone, Debug)]
pub struct FamilyReport<T: Real> {
    pub epsilons: Vec<f64>,
    pub members: Vec<Trajectory<T>>,
    /// `‖u_{ε_i} − u_{ε_{i+1}}‖_{C⁰L²}` for consecutive members.
    pub gaps: Vec<f64>,
    /// Log-log slope of the gaps against `ε_i`; `None` with fewer than two
    /// gaps or an incomplete family.
    pub fitted_order: Option<f64>,
    pub complete: bool,
}

impl<T: Real> FamilyReport<T> {
    /// The finest-ε member.
    pub fn accepted(&self) -> &Trajectory<T> {
        self.members.last().expect("family has at least one member")
    }

    /// CSV with columns `epsilon,gap_to_next,final_hk_norm,terminated_by`.
    pub fn to_csv(&self, header: Option<&str>) -> String {
        let mut s = String::new();
        if let Some(h) = header {
            let _ = writeln!(s, "# {h}");
        }
        s.push_str("epsilon,gap_to_next,final_hk_norm,terminated_by\n");
        for (i, tr) in self.members.iter().enumerate() {
            let gap = self.gaps.get(i).map(|g| g.to_string()).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{},{:?}",
                self.epsilons[i],
                gap,
                tr.hk_log.last().copied().unwrap_or(f64::NAN),
                tr.terminated_by
            );
        }
        s
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0 && a.is_finite() && b.is_finite())
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Runs [`integrate`] for every ε of a decreasing schedule and measures
/// the convergence of the family.
pub fn solve_family<T: Real>(
    sys: &HyperbolicSystem<T>,
    f: &Field<T>,
    eps_schedule: &[f64],
    t_end: f64,
    ctl: &SolveControls,
) -> Result<FamilyReport<T>> {
    if eps_schedule.is_empty() {
        return Err(Error::InvalidArgument("ε schedule is empty".into()));
    }
    if eps_schedule.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument("ε schedule must be strictly decreasing".into()));
    }
    let members: Vec<Trajectory<T>> = eps_schedule
        .par_iter()
        .map(|&eps| integrate(sys, f, &Mollifier::new(eps)?, t_end, ctl))
        .collect::<Result<_>>()?;
    let complete = members.iter().all(|m| m.terminated_by == Termination::ReachedEnd);
    let gaps: Vec<f64> = members
        .windows(2)
        .map(|w| w[0].max_l2_gap(&w[1]))
        .collect::<Result<_>>()?;
    let fitted_order = if complete && gaps.len() >= 2 {
        log_log_slope(&eps_schedule[..gaps.len()], &gaps)
    } else {
        None
    };
    Ok(FamilyReport { epsilons: eps_schedule.to_vec(), members, gaps, fitted_order, complete })
}

/// Outcome of a breakdown scan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BreakdownOutcome {
    Breakdown { time: f64 },
    NoBreakdown { t_max: f64 },
    StepFailure { time: f64 },
}

#[derive(Clone, Debug)]
pub struct BreakdownReport<T: Real> {
    pub outcome: BreakdownOutcome,
    pub threshold: f64,
    pub trajectory: Trajectory<T>,
}

impl<T: Real> BreakdownReport<T> {
    pub fn breakdown_time(&self) -> Option<f64> {
        match self.outcome {
            BreakdownOutcome::Breakdown { time } => Some(time),
            _ => None,
        }
    }
}

fn outcome_of<T: Real>(traj: &Trajectory<T>, t_max: f64) -> BreakdownOutcome {
    match traj.terminated_by {
        Termination::Breakdown => BreakdownOutcome::Breakdown { time: traj.final_time() },
        Termination::StepFailure => BreakdownOutcome::StepFailure { time: traj.final_time() },
        Termination::ReachedEnd => BreakdownOutcome::NoBreakdown { t_max },
    }
}

/// Watches the unsmoothed spectral system for the `C¹` breakdown criterion.
pub fn breakdown_scan<T: Real>(
    sys: &HyperbolicSystem<T>,
    f: &Field<T>,
    ctl: &SolveControls,
    t_max: f64,
) -> Result<BreakdownReport<T>> {
    let traj = integrate(sys, f, &Mollifier::identity(), t_max, ctl)?;
    Ok(BreakdownReport { outcome: outcome_of(&traj, t_max), threshold: traj.c1_threshold, trajectory: traj })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LifetimePoint {
    pub amplitude: f64,
    pub hk_norm: f64,
    /// Observed lifetime; equals `t_max` for survivors.
    pub lifetime: f64,
    pub survived: bool,
    pub step_failure: bool,
}

#[derive(Clone, Debug)]
pub struct LifetimeReport {
    pub points: Vec<LifetimePoint>,
    /// Smaller initial norm never yields a shorter lifetime.
    pub monotone: bool,
}

impl LifetimeReport {
    /// CSV with columns `amplitude,hk_norm,lifetime,survived`.
    pub fn to_csv(&self, header: Option<&str>) -> String {
        let mut s = String::new();
        if let Some(h) = header {
            let _ = writeln!(s, "# {h}");
        }
        s.push_str("amplitude,hk_norm,lifetime,survived\n");
        for p in &self.points {
            let _ = writeln!(s, "{},{},{},{}", p.amplitude, p.hk_norm, p.lifetime, p.survived);
        }
        s
    }
}

/// Observed lifetime of `a·f_base` for each amplitude, around the zero
/// solution of a semilinear punctured system.
///
/// A relative threshold is resolved against `‖f_base‖_{C¹}` so that every
/// amplitude, including zero, is watched against the same level.
pub fn lifetime_curve<T: Real>(
    sys: &HyperbolicSystem<T>,
    f_base: &Field<T>,
    amplitudes: &[f64],
    ctl: &SolveControls,
    t_max: f64,
) -> Result<LifetimeReport> {
    if !sys.is_semilinear() {
        return Err(Error::HypothesisViolated("system is not semilinear".into()));
    }
    if !sys.is_punctured() {
        return Err(Error::HypothesisViolated("source does not vanish at zero".into()));
    }
    ctl.validate()?;
    let threshold = ctl.breakdown.resolve(f_base.c1_norm().to_f64_lossy());
    let k = ctl.k_monitor;
    let points: Vec<LifetimePoint> = amplitudes
        .par_iter()
        .map(|&a| {
            let f = f_base.scale(T::lit(a));
            let traj = integrate_with_threshold(sys, &f, &Mollifier::identity(), t_max, ctl, threshold)?;
            let outcome = outcome_of(&traj, t_max);
            let (lifetime, survived, step_failure) = match outcome {
                BreakdownOutcome::Breakdown { time } => (time, false, false),
                BreakdownOutcome::StepFailure { time } => (time, false, true),
                BreakdownOutcome::NoBreakdown { t_max } => (t_max, true, false),
            };
            Ok(LifetimePoint {
                amplitude: a,
                hk_norm: f.sobolev_norm(k).to_f64_lossy(),
                lifetime,
                survived,
                step_failure,
            })
        })
        .collect::<Result<_>>()?;
    let mut order: Vec<&LifetimePoint> = points.iter().collect();
    order.sort_by(|a, b| a.hk_norm.total_cmp(&b.hk_norm));
    let monotone = order.windows(2).all(|w| w[1].lifetime <= w[0].lifetime + 1e-12 * t_max);
    Ok(LifetimeReport { points, monotone })
}

#[derive(Clone, Debug)]
pub struct DivergenceReport {
    /// `‖δ_i‖_{L²}` per perturbation.
    pub delta_norms: Vec<f64>,
    /// `max_t ‖u(t) − u_i(t)‖_{L²}` per perturbation.
    pub divergences: Vec<f64>,
    /// Ratio divergence / ‖δ‖ (NaN for δ = 0).
    pub growth_constants: Vec<f64>,
    /// Whether repeating the unperturbed run reproduced it bit for bit.
    pub repeat_bitwise_identical: bool,
}

/// Solves from `f` and from each `f + δ_i` and measures the divergence.
pub fn uniqueness_probe<T: Real>(
    sys: &HyperbolicSystem<T>,
    f: &Field<T>,
    deltas: &[Field<T>],
    m: &Mollifier<T>,
    t_end: f64,
    ctl: &SolveControls,
) -> Result<DivergenceReport> {
    let base = integrate(sys, f, m, t_end, ctl)?;
    let repeat = integrate(sys, f, m, t_end, ctl)?;
    let threshold = base.c1_threshold;
    let runs: Vec<(f64, f64)> = deltas
        .par_iter()
        .map(|d| {
            let g = f.try_add(d)?;
            let tr = integrate_with_threshold(sys, &g, m, t_end, ctl, threshold)?;
            Ok((d.l2_norm().to_f64_lossy(), base.max_l2_gap(&tr)?))
        })
        .collect::<Result<_>>()?;
    let delta_norms: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let divergences: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let growth_constants = runs
        .iter()
        .map(|&(n, d)| if n > 0.0 { d / n } else { f64::NAN })
        .collect();
    Ok(DivergenceReport {
        delta_norms,
        divergences,
        growth_constants,
        repeat_bitwise_identical: base.bitwise_eq(&repeat),
    })
}

/// Self-consistency audit of the energy inequality
/// `dE/dt ≤ Φ(‖u‖_{C¹})·(1 + E)` with `Φ(c) = κ(1 + c)`.
#[derive(Clone, Debug)]
pub struct AuditReport {
    /// Fitted constant `κ` (largest left-endpoint ratio).
    pub kappa: f64,
    /// Bihari-type envelope for `E` integrated from the fitted `Φ`.
    pub envelope: Vec<f64>,
    /// Snapshots where `E` exceeds the envelope.
    pub violations: Vec<usize>,
    /// Snapshots where `‖u‖²_{H^k}` exceeds `envelope / floor`.
    pub hk_violations: Vec<usize>,
    /// Whether every logged norm is finite.
    pub finite: bool,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.finite && self.violations.is_empty() && self.hk_violations.is_empty()
    }
}

/// Fits `Φ` on the logged energies and checks the integrated envelope.
///
/// With left-endpoint differences `r_i = (E_{i+1} − E_i)/Δt_i / (1 + E_i)`
/// and `κ = max_i r_i / (1 + c_i)`, the envelope
/// `1 + E_env(t_j) = (1 + E_0) exp(κ Σ_{i<j} (1 + c_i) Δt_i)` dominates the
/// data by construction; a violation therefore flags an inconsistent log
/// (non-finite values, or energies that are not attained by the recorded
/// monitors).
pub fn energy_inequality_audit<T: Real>(traj: &Trajectory<T>) -> AuditReport {
    let e = &traj.energy_weighted_log;
    let c = &traj.c1_log;
    let t = &traj.times;
    let n = t.len();
    let finite = e.iter().chain(c).chain(traj.hk_log.iter()).all(|v| v.is_finite());
    let mut kappa = 0.0f64;
    for i in 0..n.saturating_sub(1) {
        let dt = t[i + 1] - t[i];
        if dt <= 0.0 {
            continue;
        }
        let r = (e[i + 1] - e[i]) / dt / (1.0 + e[i]);
        kappa = kappa.max(r / (1.0 + c[i]));
    }
    let mut envelope = Vec::with_capacity(n);
    let mut integral = 0.0;
    for j in 0..n {
        if j > 0 {
            integral += (1.0 + c[j - 1]) * (t[j] - t[j - 1]);
        }
        envelope.push((1.0 + e.first().copied().unwrap_or(0.0)) * (kappa * integral).exp() - 1.0);
    }
    let slack = |v: f64| 1e-9 * (1.0 + v.abs());
    let violations = (0..n).filter(|&j| !(e[j] <= envelope[j] + slack(envelope[j]))).collect();
    let floor = traj.positivity_floor;
    let hk_violations = (0..n)
        .filter(|&j| {
            let bound = envelope[j] / floor;
            !(traj.hk_log[j].powi(2) <= bound + slack(bound))
        })
        .collect();
    AuditReport { kappa, envelope, violations, hk_violations, finite }
}
