//! Exhaustion and region bookkeeping for the global-extension induction,
//! realised in the upper half of 1+1 Minkowski space.
//!
//! The initial slice is `S_∞ = {t = 0}`, the time function is `T = ln t`,
//! `C_n = (−R_n, R_n)` and `K_n = D⁺(C_n) = {|x| < R_n − t}`. The slices
//! `S_n = {t = t_n}` descend towards `S_∞`. Every region is a finite union of
//! intervals with closed-form endpoints.

use std::fmt::{self, Write as _};
use std::sync::Arc;

use crate::error::{Error, Result};

/// One endpoint-tagged interval; `lo` may be `−∞` and `hi` may be `+∞`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn new(lo: f64, lo_closed: bool, hi: f64, hi_closed: bool) -> Self {
        Self { lo, hi, lo_closed: lo_closed && lo.is_finite(), hi_closed: hi_closed && hi.is_finite() }
    }

    pub fn open(lo: f64, hi: f64) -> Self {
        Self::new(lo, false, hi, false)
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && !(self.lo_closed && self.hi_closed))
    }

    pub fn length(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.hi - self.lo
        }
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        let (lo, lo_closed) = match self.lo.partial_cmp(&other.lo) {
            Some(std::cmp::Ordering::Greater) => (self.lo, self.lo_closed),
            Some(std::cmp::Ordering::Less) => (other.lo, other.lo_closed),
            _ => (self.lo, self.lo_closed && other.lo_closed),
        };
        let (hi, hi_closed) = match self.hi.partial_cmp(&other.hi) {
            Some(std::cmp::Ordering::Less) => (self.hi, self.hi_closed),
            Some(std::cmp::Ordering::Greater) => (other.hi, other.hi_closed),
            _ => (self.hi, self.hi_closed && other.hi_closed),
        };
        Interval { lo, hi, lo_closed, hi_closed }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l = if self.lo_closed { '[' } else { '(' };
        let r = if self.hi_closed { ']' } else { ')' };
        write!(f, "{l}{}, {}{r}", self.lo, self.hi)
    }
}

/// A finite union of disjoint intervals, sorted by left endpoint.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct IntervalSet(pub Vec<Interval>);

impl IntervalSet {
    /// `{x : a ≤ |x| < b}`, with `a ≤ 0` meaning the full interval `(−b, b)`.
    pub fn annulus(a: f64, b: f64) -> Self {
        if a <= 0.0 {
            return Self(vec![Interval::open(-b, b)]);
        }
        Self(vec![Interval::new(-b, false, -a, true), Interval::new(a, true, b, false)]).normalized()
    }

    /// `{x : |x| ≥ c}`.
    pub fn exterior(c: f64) -> Self {
        if c <= 0.0 {
            return Self(vec![Interval::open(f64::NEG_INFINITY, f64::INFINITY)]);
        }
        Self(vec![Interval::new(f64::NEG_INFINITY, false, -c, true), Interval::new(c, true, f64::INFINITY, false)])
    }

    fn normalized(mut self) -> Self {
        self.0.retain(|i| !i.is_empty());
        self
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(Interval::is_empty)
    }

    pub fn intersect(&self, other: &IntervalSet) -> IntervalSet {
        let mut out = Vec::new();
        for a in &self.0 {
            for b in &other.0 {
                let c = a.intersect(b);
                if !c.is_empty() {
                    out.push(c);
                }
            }
        }
        out.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        IntervalSet(out)
    }

    pub fn meets(&self, other: &IntervalSet) -> bool {
        !self.intersect(other).is_empty()
    }

    pub fn measure(&self) -> f64 {
        self.0.iter().map(Interval::length).sum()
    }

    /// Largest endpoint distance to another set with the same shape.
    pub fn endpoint_distance(&self, other: &IntervalSet) -> Option<f64> {
        if self.0.len() != other.0.len() {
            return None;
        }
        let mut d = 0.0f64;
        for (a, b) in self.0.iter().zip(&other.0) {
            if a.lo_closed != b.lo_closed || a.hi_closed != b.hi_closed {
                return None;
            }
            for (x, y) in [(a.lo, b.lo), (a.hi, b.hi)] {
                if x.is_infinite() || y.is_infinite() {
                    if x != y {
                        return None;
                    }
                } else {
                    d = d.max((x - y).abs());
                }
            }
        }
        Some(d)
    }
}

impl fmt::Display for IntervalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "∅");
        }
        let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        write!(f, "{}", parts.join(" ∪ "))
    }
}

/// The slice a region lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Carrier {
    /// `S_∞ = {t = 0}`.
    Initial,
    /// `S_k = {t = t_k}`.
    Slice(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pub carrier: Carrier,
    pub set: IntervalSet,
}

/// Radii, slice parameters and region families of the construction.
#[derive(Clone, Debug)]
pub struct CausalPlan {
    /// `R_1 < R_2 < …`, at least `n_max + 1` of them.
    pub radii: Vec<f64>,
    /// `r_1, …, r_{n_max+1}`.
    pub r_seq: Vec<f64>,
    /// `t_n = e^{r_n}`.
    pub t_seq: Vec<f64>,
    /// `τ_1, …, τ_{n_max}`.
    pub tau: Vec<f64>,
    pub n_max: usize,
    /// `regions[n−1][i−1] = A_i^{(n)}` for `1 ≤ i ≤ n+1`.
    pub regions: Vec<Vec<Region>>,
}

/// `τ_n = min T` over `J⁺(C̄_n) ∩ ∂K_{n+1}`, reached where the forward cone
/// of `C̄_n` meets the boundary of `D⁺(C_{n+1})`.
pub fn tau(r_n: f64, r_next: f64) -> f64 {
    ((r_next - r_n) / 2.0).ln()
}

/// Builds the plan for `n_max` steps.
pub fn plan(radii: &[f64], r1: f64, n_max: usize) -> Result<CausalPlan> {
    if n_max == 0 {
        return Err(Error::InvalidArgument("n_max must be at least 1".into()));
    }
    if radii.len() < n_max + 1 {
        return Err(Error::InvalidArgument(format!("need {} radii for {n_max} steps", n_max + 1)));
    }
    if !(radii[0] > 0.0) || radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("radii must be positive and strictly increasing".into()));
    }
    if !(r1 < radii[0].ln()) {
        return Err(Error::HypothesisViolated(format!("r_1 = {r1} must lie below sup T on D⁺(C_1) = ln R_1 = {}", radii[0].ln())));
    }
    let radii = radii[..=n_max].to_vec();
    let mut r_seq = vec![r1];
    let mut t_seq = vec![r1.exp()];
    let mut taus = Vec::with_capacity(n_max);
    for n in 0..n_max {
        let tn = tau(radii[n], radii[n + 1]);
        taus.push(tn);
        let step = r_seq[n] - 1.0;
        // Keep t exact on the branch where separation is tight.
        let (r, t) = if tn < step { (tn, (radii[n + 1] - radii[n]) / 2.0) } else { (step, step.exp()) };
        r_seq.push(r);
        t_seq.push(t);
    }
    let mut p = CausalPlan { radii, r_seq, t_seq, tau: taus, n_max, regions: Vec::new() };
    p.rebuild_regions();
    Ok(p)
}

impl CausalPlan {
    /// `A_i` on `S_∞`, for `1 ≤ i ≤ n_max + 1`.
    pub fn initial_region(&self, i: usize) -> IntervalSet {
        if i == 1 {
            IntervalSet(vec![Interval::open(-self.radii[0], self.radii[0])])
        } else {
            // J⁻(S_{i−1} ∖ K_{i−1}) ∩ C_i.
            IntervalSet::annulus(self.radii[i - 2] - 2.0 * self.t_seq[i - 2], self.radii[i - 1])
        }
    }

    /// `A_{n+1}^{(n)} = J⁻(S_n ∖ K_n) ∩ S_{n+1}`.
    pub fn terminal_region(&self, n: usize) -> IntervalSet {
        IntervalSet::exterior(self.radii[n - 1] - 2.0 * self.t_seq[n - 1] + self.t_seq[n])
    }

    /// `A_i^{(n)}`.
    pub fn region(&self, i: usize, n: usize) -> &Region {
        &self.regions[n - 1][i - 1]
    }

    /// `D_i = C_i ∖ C_{i−1}` with `C_0 = ∅`.
    pub fn annulus(&self, i: usize) -> IntervalSet {
        if i == 1 {
            IntervalSet(vec![Interval::open(-self.radii[0], self.radii[0])])
        } else {
            IntervalSet::annulus(self.radii[i - 2], self.radii[i - 1])
        }
    }

    /// Overrides `t_k` (and `r_k`) and recomputes the regions, leaving the
    /// other slices alone.
    pub fn with_slice_time(mut self, k: usize, t: f64) -> Self {
        self.t_seq[k - 1] = t;
        self.r_seq[k - 1] = t.ln();
        self.rebuild_regions();
        self
    }

    fn rebuild_regions(&mut self) {
        self.regions = (1..=self.n_max)
            .map(|n| {
                let mut row: Vec<Region> = (1..=n).map(|i| Region { carrier: Carrier::Initial, set: self.initial_region(i) }).collect();
                row.push(Region { carrier: Carrier::Slice(n + 1), set: self.terminal_region(n) });
                row
            })
            .collect();
    }

    /// CSV with one row per region: `n,r_n,t_n,i,carrier,endpoints`.
    pub fn to_csv(&self, header: Option<&str>) -> String {
        let mut s = String::new();
        if let Some(h) = header {
            let _ = writeln!(s, "# {h}");
        }
        s.push_str("n,r_n,t_n,tau_n,i,carrier,region\n");
        for n in 1..=self.n_max {
            for i in 1..=n + 1 {
                let reg = self.region(i, n);
                let carrier = match reg.carrier {
                    Carrier::Initial => "S_inf".to_string(),
                    Carrier::Slice(k) => format!("S_{k}"),
                };
                let _ = writeln!(
                    s,
                    "{n},{},{},{},{i},{carrier},\"{}\"",
                    self.r_seq[n - 1],
                    self.t_seq[n - 1],
                    self.tau[n - 1],
                    reg.set
                );
            }
        }
        s
    }

    /// Text picture of the slices and of the regions at step `n`.
    pub fn diagram(&self, n: usize, width: usize) -> String {
        let n = n.clamp(1, self.n_max);
        let width = width.max(20);
        let span = self.radii[n.min(self.radii.len() - 1)];
        let col = |x: f64| (((x + span) / (2.0 * span)) * (width - 1) as f64).round() as isize;
        let mut s = String::new();
        let _ = writeln!(s, "step {n}: x ∈ [−{span}, {span}]");
        for k in (1..=n + 1).rev() {
            let _ = writeln!(s, "S_{k:<3} t = {:<12.6e} r = {:.6}", self.t_seq[k - 1], self.r_seq[k - 1]);
        }
        for i in 1..=n + 1 {
            let reg = self.region(i, n);
            let mut line = vec![' '; width];
            for iv in &reg.set.0 {
                let (a, b) = (col(iv.lo.max(-span)), col(iv.hi.min(span)));
                for c in a.max(0)..=b.min(width as isize - 1) {
                    line[c as usize] = '=';
                }
            }
            let tag = match reg.carrier {
                Carrier::Initial => "S_∞".to_string(),
                Carrier::Slice(k) => format!("S_{k}"),
            };
            let _ = writeln!(s, "A_{i:<3}|{}| on {tag}: {}", line.iter().collect::<String>(), reg.set);
        }
        s
    }
}

/// `R_{n+1} − 2t_{n+1} ≥ R_n` for each `n < n_max`: the past of the part of
/// `S_{n+1}` outside `K_{n+1}` stays out of `C_n`.
pub fn verify_separation(p: &CausalPlan) -> Vec<bool> {
    (1..p.n_max).map(|n| p.radii[n] - 2.0 * p.t_seq[n] >= p.radii[n - 1]).collect()
}

/// Outcome of the stabilization and annulus checks.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilizationReport {
    pub regions_stable: bool,
    /// For each annulus `D_i`, the indices `j` with `D_i ∩ A_j ≠ ∅`.
    pub annulus_hits: Vec<Vec<usize>>,
    pub annulus_ok: bool,
}

impl StabilizationReport {
    pub fn holds(&self) -> bool {
        self.regions_stable && self.annulus_ok
    }
}

/// Interval-exact equality `A_i^{(n)} = A_i^{(m)}` for `m, n > i + 1`, and
/// the annulus property: `D_i` meets only `A_i` and `A_{i+1}`.
pub fn verify_stabilization(p: &CausalPlan) -> Result<StabilizationReport> {
    if p.n_max < 4 {
        return Err(Error::InvalidArgument("stabilization needs n_max ≥ 4".into()));
    }
    let mut regions_stable = true;
    for i in 1..=p.n_max {
        for n in (i + 2)..=p.n_max {
            for m in (n + 1)..=p.n_max {
                regions_stable &= p.region(i, n) == p.region(i, m);
            }
        }
    }
    let mut hits = Vec::new();
    let mut annulus_ok = true;
    let last = p.n_max;
    for i in 1..last {
        let d = p.annulus(i);
        let h: Vec<usize> = (1..=last).filter(|&j| d.meets(&p.region(j, last).set) && p.region(j, last).carrier == Carrier::Initial).collect();
        annulus_ok &= h.iter().all(|&j| j == i || j == i + 1);
        hits.push(h);
    }
    Ok(StabilizationReport { regions_stable, annulus_hits: hits, annulus_ok })
}

/// Required bound on a region so that the solution obeys `target` downstream.
pub type Propagator = Arc<dyn Fn(&Region, f64) -> f64 + Send + Sync>;

/// `required = target`.
pub fn identity_propagator() -> Propagator {
    Arc::new(|_, b| b)
}

/// `required = target / 2`.
pub fn halving_propagator() -> Propagator {
    Arc::new(|_, b| b / 2.0)
}

/// `required = target / (1 + κ·|region|)` on bounded regions, `target / (1 + κ)`
/// otherwise.
pub fn size_damped_propagator(kappa: f64) -> Propagator {
    Arc::new(move |r, b| {
        let m = r.set.measure();
        b / (1.0 + kappa * if m.is_finite() { m } else { 1.0 })
    })
}

/// Bounds `a_i^{(n)}` for every step, their limits, and the annulus bounds.
#[derive(Clone, Debug)]
pub struct ControlSequence {
    pub delta: f64,
    /// `a_table[n−1] = (a_1^{(n)}, …, a_{n+1}^{(n)})`.
    pub a_table: Vec<Vec<f64>>,
    /// Stabilized `a_i` for `1 ≤ i ≤ n_max`.
    pub limits: Vec<f64>,
    /// `C⁴` bound per region, `a_i / √(5 |A_i|)`.
    pub c4_bounds: Vec<f64>,
    /// `b̲_i`, the smaller bound active on `D_i`, for `1 ≤ i < n_max`.
    pub b_table: Vec<f64>,
}

impl ControlSequence {
    /// `a_i^{(n)} = a_i^{(m)}` whenever `i ≤ min(n, m) − 2`.
    pub fn is_stable(&self) -> bool {
        let steps = self.a_table.len();
        (1..=steps).all(|n| {
            (n..=steps).all(|m| (1..=n.saturating_sub(2)).all(|i| self.a_table[n - 1][i - 1] == self.a_table[m - 1][i - 1]))
        })
    }

    pub fn to_csv(&self, header: Option<&str>) -> String {
        let mut s = String::new();
        if let Some(h) = header {
            let _ = writeln!(s, "# {h}");
        }
        s.push_str("n,i,a\n");
        for (n, row) in self.a_table.iter().enumerate() {
            for (i, a) in row.iter().enumerate() {
                let _ = writeln!(s, "{},{},{a}", n + 1, i + 1);
            }
        }
        s
    }
}

/// Runs the induction: at step 1 the bound `δ` at `S_1` is split as `δ/2`
/// on `S_1 ∩ K_1` and on `S_1 ∖ K_1`, transported to `A_1^{(1)}` and
/// `A_2^{(1)}`. Each later step keeps `a_i` for `i ≤ n` and transports
/// `a_{n+1}^{(n)}` to the inner region `A_{n+1}^{(n+1)}` and to the outer
/// region `A_{n+2}^{(n+1)}`.
pub fn propagate_bounds(p: &CausalPlan, delta: f64, propagator: &Propagator) -> Result<ControlSequence> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument("δ must be positive".into()));
    }
    // Monotonicity probes on every region that is used.
    for row in &p.regions {
        for reg in row {
            for b in [delta / 8.0, delta / 2.0, delta] {
                let (lo, hi) = (propagator(reg, b), propagator(reg, 2.0 * b));
                if !(lo > 0.0) || lo > hi {
                    return Err(Error::InvalidArgument(format!("propagator is not positive and monotone on {}", reg.set)));
                }
            }
        }
    }
    let mut table = vec![vec![propagator(p.region(1, 1), delta / 2.0), propagator(p.region(2, 1), delta / 2.0)]];
    for n in 1..p.n_max {
        let prev = &table[n - 1];
        let target = prev[n];
        let mut row = prev[..n].to_vec();
        row.push(propagator(p.region(n + 1, n + 1), target));
        row.push(propagator(p.region(n + 2, n + 1), target));
        table.push(row);
    }
    let limits: Vec<f64> = table.last().map(|r| r[..p.n_max].to_vec()).unwrap_or_default();
    let c4: Vec<f64> = limits.iter().enumerate().map(|(k, a)| a / (5.0 * p.initial_region(k + 1).measure()).sqrt()).collect();
    let b_table = (1..p.n_max).map(|i| c4[i - 1].min(c4[i])).collect();
    Ok(ControlSequence { delta, a_table: table, limits, c4_bounds: c4, b_table })
}

/// Plan with `R_n = n`.
pub fn unit_radii(n: usize) -> Vec<f64> {
    (1..=n).map(|k| k as f64).collect()
}
