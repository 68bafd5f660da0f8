//! Sectioned `key = value` experiment configs.
//!
//! Every section is read through a [`Reader`] that records the keys it
//! consumed; whatever is left over afterwards is an unknown key and rejects
//! the whole file before any computation starts.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use hypercauchy::evolve::{BreakdownThreshold, SolveControls};
use ini::{Ini, Properties};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

fn err<T>(msg: impl Into<String>) -> Result<T> {
    Err(ConfigError(msg.into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Solve,
    Family,
    Breakdown,
    Lifetime,
    Moser,
    Commutator,
    DmDemo,
    Geometry,
    Causal,
    All,
}

impl Kind {
    pub const NAMES: [&'static str; 10] =
        ["solve", "family", "breakdown", "lifetime", "moser", "commutator", "dm_demo", "geometry", "causal", "all"];

    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "solve" => Self::Solve,
            "family" => Self::Family,
            "breakdown" => Self::Breakdown,
            "lifetime" => Self::Lifetime,
            "moser" => Self::Moser,
            "commutator" => Self::Commutator,
            "dm_demo" => Self::DmDemo,
            "geometry" => Self::Geometry,
            "causal" => Self::Causal,
            "all" => Self::All,
            other => return err(format!("unknown kind `{other}` (expected one of {})", Self::NAMES.join(", "))),
        })
    }

    pub fn name(self) -> &'static str {
        Self::NAMES[self as usize]
    }
}

/// Reads typed values from one section and remembers which keys it saw.
pub struct Reader<'a> {
    section: &'a str,
    props: Option<&'a Properties>,
    seen: BTreeSet<&'static str>,
}

impl<'a> Reader<'a> {
    pub fn new(ini: &'a Ini, section: &'a str) -> Self {
        Self { section, props: ini.section(Some(section)), seen: BTreeSet::new() }
    }

    fn raw(&mut self, key: &'static str) -> Option<&'a str> {
        self.seen.insert(key);
        self.props.and_then(|p| p.get(key)).map(str::trim)
    }

    fn bad<T>(&self, key: &str, what: &str, v: &str) -> Result<T> {
        err(format!("[{}] {key} = {v}: expected {what}", self.section))
    }

    pub fn string(&mut self, key: &'static str, default: &str) -> String {
        self.raw(key).unwrap_or(default).to_string()
    }

    pub fn choice(&mut self, key: &'static str, default: &str, allowed: &[&str]) -> Result<String> {
        let v = self.string(key, default);
        if allowed.contains(&v.as_str()) {
            Ok(v)
        } else {
            self.bad(key, &format!("one of {}", allowed.join(", ")), &v)
        }
    }

    pub fn opt_f64(&mut self, key: &'static str) -> Result<Option<f64>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => match v.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(Some(x)),
                _ => self.bad(key, "a finite number", v),
            },
        }
    }

    pub fn f64(&mut self, key: &'static str, default: f64) -> Result<f64> {
        Ok(self.opt_f64(key)?.unwrap_or(default))
    }

    pub fn opt_positive(&mut self, key: &'static str) -> Result<Option<f64>> {
        match self.opt_f64(key)? {
            Some(x) if x <= 0.0 => self.bad(key, "a positive number", &x.to_string()),
            v => Ok(v),
        }
    }

    pub fn positive(&mut self, key: &'static str, default: f64) -> Result<f64> {
        Ok(self.opt_positive(key)?.unwrap_or(default))
    }

    pub fn count(&mut self, key: &'static str, default: usize) -> Result<usize> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => match v.parse::<usize>() {
                Ok(n) if n > 0 => Ok(n),
                _ => self.bad(key, "a positive integer", v),
            },
        }
    }

    pub fn int(&mut self, key: &'static str, default: i64) -> Result<i64> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().or_else(|_| self.bad(key, "an integer", v)),
        }
    }

    /// Comma- or whitespace-separated positive numbers.
    pub fn positive_list(&mut self, key: &'static str, default: &[f64]) -> Result<Vec<f64>> {
        let Some(v) = self.raw(key) else { return Ok(default.to_vec()) };
        let items: Vec<&str> = v.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        if items.is_empty() {
            return self.bad(key, "a non-empty list", v);
        }
        items
            .into_iter()
            .map(|s| match s.parse::<f64>() {
                Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
                _ => self.bad(key, "a list of positive numbers", v),
            })
            .collect()
    }

    /// Rejects keys that were never asked for.
    pub fn finish(self) -> Result<()> {
        if let Some(p) = self.props {
            for (k, _) in p.iter() {
                if !self.seen.contains(k) {
                    return err(format!("[{}] unknown key `{k}`", self.section));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SolveParams {
    pub system: String,
    pub modes: usize,
    pub initial: String,
    pub amplitude: f64,
    pub t_end: f64,
    pub epsilon: Option<f64>,
    pub hk_drift_tol: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct FamilyParams {
    pub system: String,
    pub modes: usize,
    pub initial: String,
    pub amplitude: f64,
    pub t_end: f64,
    pub epsilons: Vec<f64>,
    pub min_order: f64,
}

#[derive(Clone, Debug)]
pub struct BreakdownParams {
    pub system: String,
    pub modes: usize,
    pub initial: String,
    pub amplitude: f64,
    pub t_max: f64,
    /// `None` expects no breakdown up to `t_max`.
    pub window: Option<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct LifetimeParams {
    pub system: String,
    pub modes: usize,
    pub initial: String,
    pub amplitudes: Vec<f64>,
    pub t_max: f64,
    /// Relative tolerance against `1/(amplitude·c)` for constant data.
    pub inverse_tol: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct SuiteParams {
    pub count: usize,
    pub max_degree: usize,
    pub amplitude: f64,
    pub dim: usize,
}

#[derive(Clone, Debug)]
pub struct MoserParams {
    pub variant: String,
    pub k: usize,
    pub composer: String,
    pub suite: SuiteParams,
    pub max_change: f64,
}

#[derive(Clone, Debug)]
pub struct CommutatorParams {
    pub form: String,
    pub a_field: String,
    pub suite: SuiteParams,
    pub eps_from: i32,
    pub eps_to: i32,
    pub max_change: f64,
    pub min_slope: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct DmParams {
    pub modes: usize,
    pub t_end: f64,
    pub amplitude: f64,
    pub charge: f64,
    pub shift: f64,
    pub drift_tol: f64,
    pub lorenz_tol: f64,
}

#[derive(Clone, Debug)]
pub struct GeometryParams {
    pub min_order: f64,
    pub max_residual: f64,
    pub trivial_max: f64,
    pub slice_nodes: usize,
    pub slice_tol: f64,
}

#[derive(Clone, Debug)]
pub struct CausalParams {
    pub n_max: usize,
    pub r1: f64,
    pub delta: f64,
    pub propagator: String,
    pub kappa: f64,
    pub diagram_step: usize,
    pub diagram_width: usize,
}

#[derive(Clone, Debug)]
pub enum Experiment {
    Solve(SolveParams),
    Family(FamilyParams),
    Breakdown(BreakdownParams),
    Lifetime(LifetimeParams),
    Moser(MoserParams),
    Commutator(CommutatorParams),
    DmDemo(DmParams),
    Geometry(GeometryParams),
    Causal(CausalParams),
}

#[derive(Clone, Debug)]
pub struct Config {
    pub kind: Kind,
    pub name: String,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub controls: SolveControls,
    pub experiment: Option<Experiment>,
}

pub const SYSTEMS: [&str; 7] =
    ["advection", "advection2d", "wave_pair", "burgers", "square_growth", "pure_growth", "variable_pair"];
pub const PROFILES: [&str; 4] = ["sin", "cos", "two_mode", "constant"];
pub const VARIANTS: [&str; 3] = ["first", "second", "third"];
pub const COMPOSERS: [&str; 4] = ["identity", "sin", "cube", "rational"];
pub const FORMS: [&str; 5] = ["zeroth", "lipschitz", "first_sobolev", "derivative", "mollifier_gap"];
pub const A_FIELDS: [&str; 3] = ["sin", "two_mode", "product"];
pub const PROPAGATORS: [&str; 4] = ["identity", "halving", "damped", "all"];

fn controls(ini: &Ini) -> Result<SolveControls> {
    let d = SolveControls::default();
    let mut r = Reader::new(ini, "controls");
    let absolute = r.opt_positive("threshold_absolute")?;
    let relative = r.opt_positive("threshold_relative")?;
    let breakdown = match (absolute, relative) {
        (Some(_), Some(_)) => return err("[controls] give threshold_absolute or threshold_relative, not both"),
        (Some(a), None) => BreakdownThreshold::Absolute(a),
        (None, Some(q)) => BreakdownThreshold::RelativeToInitial(q),
        (None, None) => d.breakdown,
    };
    let ctl = SolveControls {
        rk_abs_tol: r.positive("rk_abs_tol", d.rk_abs_tol)?,
        rk_rel_tol: r.positive("rk_rel_tol", d.rk_rel_tol)?,
        max_step: r.positive("max_step", d.max_step)?,
        snapshot_interval: r.positive("snapshot_interval", d.snapshot_interval)?,
        k_monitor: r.count("k_monitor", d.k_monitor)?,
        breakdown,
    };
    r.finish()?;
    ctl.validate().map_err(|e| ConfigError(format!("[controls] {e}")))?;
    Ok(ctl)
}

fn suite(r: &mut Reader<'_>, count: usize) -> Result<SuiteParams> {
    let s = SuiteParams {
        count: r.count("count", count)?,
        max_degree: r.count("max_degree", 8)?,
        amplitude: r.positive("amplitude", 1.0)?,
        dim: r.count("dim", 1)?,
    };
    if s.dim > 2 {
        return err("suite dimension must be 1 or 2");
    }
    Ok(s)
}

fn experiment(ini: &Ini, kind: Kind) -> Result<Option<Experiment>> {
    let mut r = Reader::new(ini, kind.name());
    let e = match kind {
        Kind::All => return Ok(None),
        Kind::Solve => Experiment::Solve(SolveParams {
            system: r.choice("system", "advection", &SYSTEMS)?,
            modes: r.count("modes", 64)?,
            initial: r.choice("initial", "sin", &PROFILES)?,
            amplitude: r.f64("amplitude", 1.0)?,
            t_end: r.positive("t_end", 1.0)?,
            epsilon: r.opt_positive("epsilon")?,
            hk_drift_tol: r.opt_positive("hk_drift_tol")?,
        }),
        Kind::Family => {
            let p = FamilyParams {
                system: r.choice("system", "burgers", &SYSTEMS)?,
                modes: r.count("modes", 64)?,
                initial: r.choice("initial", "sin", &PROFILES)?,
                amplitude: r.f64("amplitude", 1.0)?,
                t_end: r.positive("t_end", 0.5)?,
                epsilons: r.positive_list("epsilons", &[0.2, 0.1, 0.05, 0.025, 0.0125])?,
                min_order: r.positive("min_order", 0.45)?,
            };
            if p.epsilons.windows(2).any(|w| !(w[1] < w[0])) {
                return err("[family] epsilons must be strictly decreasing");
            }
            Experiment::Family(p)
        }
        Kind::Breakdown => {
            let system = r.choice("system", "burgers", &SYSTEMS)?;
            let modes = r.count("modes", 1024)?;
            let initial = r.choice("initial", "sin", &PROFILES)?;
            let amplitude = r.f64("amplitude", 1.0)?;
            let t_max = r.positive("t_max", 2.0)?;
            let expect = r.choice("expect", "breakdown", &["breakdown", "none"])?;
            let lo = r.opt_positive("window_lo")?;
            let hi = r.opt_positive("window_hi")?;
            let window = match (expect.as_str(), lo, hi) {
                ("none", None, None) => None,
                ("none", _, _) => return err("[breakdown] window_lo/window_hi need expect = breakdown"),
                (_, Some(a), Some(b)) if a < b => Some((a, b)),
                (_, None, None) => Some((0.0, t_max)),
                _ => return err("[breakdown] need window_lo < window_hi"),
            };
            Experiment::Breakdown(BreakdownParams { system, modes, initial, amplitude, t_max, window })
        }
        Kind::Lifetime => {
            let p = LifetimeParams {
                system: r.choice("system", "square_growth", &SYSTEMS)?,
                modes: r.count("modes", 16)?,
                initial: r.choice("initial", "constant", &PROFILES)?,
                amplitudes: r.positive_list("amplitudes", &[0.5, 1.0, 2.0])?,
                t_max: r.positive("t_max", 4.0)?,
                inverse_tol: r.opt_positive("inverse_tol")?,
            };
            if p.inverse_tol.is_some() && p.initial != "constant" {
                return err("[lifetime] inverse_tol compares against 1/c and needs initial = constant");
            }
            Experiment::Lifetime(p)
        }
        Kind::Moser => Experiment::Moser(MoserParams {
            variant: r.choice("variant", "first", &VARIANTS)?,
            k: r.count("k", 2)?,
            composer: r.choice("composer", "sin", &COMPOSERS)?,
            suite: suite(&mut r, 100)?,
            max_change: r.positive("max_change", 0.05)?,
        }),
        Kind::Commutator => {
            let p = CommutatorParams {
                form: r.choice("form", "lipschitz", &FORMS)?,
                a_field: r.choice("a_field", "sin", &A_FIELDS)?,
                suite: suite(&mut r, 20)?,
                eps_from: r.int("eps_from", 3)? as i32,
                eps_to: r.int("eps_to", 8)? as i32,
                max_change: r.positive("max_change", 0.05)?,
                min_slope: r.opt_positive("min_slope")?,
            };
            if !(0 <= p.eps_from && p.eps_from <= p.eps_to && p.eps_to <= 16) {
                return err("[commutator] need 0 ≤ eps_from ≤ eps_to ≤ 16");
            }
            if (p.a_field == "product") != (p.suite.dim == 2) && p.form != "mollifier_gap" {
                return err("[commutator] a_field = product needs dim = 2, the others dim = 1");
            }
            Experiment::Commutator(p)
        }
        Kind::DmDemo => Experiment::DmDemo(DmParams {
            modes: r.count("modes", 64)?,
            t_end: r.positive("t_end", 1.0)?,
            amplitude: r.positive("amplitude", 0.3)?,
            charge: r.positive("charge", 1.0)?,
            shift: r.f64("shift", 0.9)?,
            drift_tol: r.positive("drift_tol", 1e-6)?,
            lorenz_tol: r.positive("lorenz_tol", 1e-4)?,
        }),
        Kind::Geometry => Experiment::Geometry(GeometryParams {
            min_order: r.positive("min_order", 1.9)?,
            max_residual: r.positive("max_residual", 1e-7)?,
            trivial_max: r.positive("trivial_max", 1e-12)?,
            slice_nodes: r.count("slice_nodes", 24)?,
            slice_tol: r.positive("slice_tol", 1e-8)?,
        }),
        Kind::Causal => Experiment::Causal(CausalParams {
            n_max: r.count("n_max", 50)?,
            r1: r.f64("r1", -1.0)?,
            delta: r.positive("delta", 1.0)?,
            propagator: r.choice("propagator", "all", &PROPAGATORS)?,
            kappa: r.positive("kappa", 0.5)?,
            diagram_step: r.count("diagram_step", 3)?,
            diagram_width: r.count("diagram_width", 72)?,
        }),
    };
    r.finish()?;
    Ok(Some(e))
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| ConfigError(format!("malformed config: {e}")))?;
        if let Some((k, _)) = ini.general_section().iter().next() {
            return err(format!("key `{k}` appears before any [section]"));
        }
        let mut ex = Reader::new(&ini, "experiment");
        let Some(kind) = ex.raw("kind") else { return err("[experiment] kind is required") };
        let kind = Kind::parse(kind)?;
        let name = ex.string("name", kind.name());
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return err(format!("[experiment] name = {name}: use letters, digits, `_` or `-`"));
        }
        let seed = ex.int("seed", 0)?;
        if seed < 0 {
            return err("[experiment] seed must be non-negative");
        }
        ex.finish()?;

        let mut out = Reader::new(&ini, "output");
        let out_dir = out.raw("dir").map(PathBuf::from);
        out.finish()?;

        let controls = controls(&ini)?;
        let experiment = experiment(&ini, kind)?;

        let mut allowed = vec!["experiment", "output", "controls"];
        if kind != Kind::All {
            allowed.push(kind.name());
        }
        for s in ini.sections().flatten() {
            if !allowed.contains(&s) {
                return err(format!("unknown section [{s}] for kind = {}", kind.name()));
            }
        }
        if kind == Kind::All && ini.section(Some("controls")).is_some() {
            return err("kind = all uses fixed controls; remove [controls]");
        }
        Ok(Self { kind, name, seed: seed as u64, out_dir, controls, experiment })
    }
}
