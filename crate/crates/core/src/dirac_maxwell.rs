//! Massless Dirac–Maxwell on `ℝ_t × 𝕋¹` in Lorenz gauge.
//!
//! Conventions, all checked by tests rather than assumed:
//!
//! * Clifford relation `X·Y + Y·X = −2g(X,Y)` with signature `(−,+)`, so
//!   `γ₀² = I` and `γ₁² = −I`. The spinor pairing is `⟨ψ,φ⟩ = φ* P ψ`.
//! * Covariant derivative `∂_μ + iμ_l A_μ`, so the Dirac equation reads
//!   `∂_t ψ = γ₀γ₁(∂_x + iμA_x)ψ − iμA_t ψ`, and gauge transformations act
//!   as `ψ ↦ e^{−iμf}ψ`, `A ↦ A + df`.
//! * Currents `J_t = Σ μ_l ⟨γ₀ψ,ψ⟩`, `J_x = Σ μ_l ⟨γ₁ψ,ψ⟩`, which satisfy
//!   `∂_t J_t − ∂_x J_x = 0`; accordingly `d*A = ∂_t A_t − ∂_x A_x`.
//! * The potential obeys `(∂_t² − ∂_x²)A_μ = J_μ`, which is the Lorenz-gauge
//!   Maxwell system for this sign of the coupling.
//!
//! The packed state has width `2N + 6`: the `N` spinors, then
//! `A_t, A_x, ∂_tA_t, ∂_tA_x, ∂_xA_t, ∂_xA_x`.

use std::fmt::Write as _;
use std::sync::Arc;

use ini::Ini;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::evolve::{integrate, SolveControls, Trajectory};
use crate::field::Field;
use crate::grid::{Grid, ScalarKind};
use crate::linalg::CMat;
use crate::mollifier::Mollifier;
use crate::scalar::{cplx, czero, Cplx, Real};
use crate::system::{Coefficient, HyperbolicSystem};

/// Tolerance for the algebraic checks on a representation.
pub const CLIFFORD_TOL: f64 = 1e-13;

/// A two-dimensional spinor representation of `Cl(1,1)` with its pairing.
#[derive(Clone, Debug, PartialEq)]
pub struct CliffordRep<T: Real> {
    gamma0: CMat<T>,
    gamma1: CMat<T>,
    pairing: CMat<T>,
}

impl<T: Real> CliffordRep<T> {
    /// Validates the Clifford relations, the Hermitian pairing, positivity
    /// of `P γ₀` and reality of both frame currents.
    pub fn new(gamma0: CMat<T>, gamma1: CMat<T>, pairing: CMat<T>) -> Result<Self> {
        if gamma0.dim() != 2 || gamma1.dim() != 2 || pairing.dim() != 2 {
            return Err(Error::InvalidClifford("matrices must be 2×2".into()));
        }
        let id = CMat::identity(2);
        let err = |m: CMat<T>| m.max_abs().to_f64_lossy();
        let checks = [
            ("gamma0² = I", err(gamma0.matmul(&gamma0).sub(&id))),
            ("gamma1² = −I", err(gamma1.matmul(&gamma1).add(&id))),
            ("anticommutator", err(gamma0.matmul(&gamma1).add(&gamma1.matmul(&gamma0)))),
            ("pairing Hermitian", pairing.hermitian_defect().to_f64_lossy()),
        ];
        for (what, e) in checks {
            if e > CLIFFORD_TOL {
                return Err(Error::InvalidClifford(format!("{what} violated by {e:e}")));
            }
        }
        let rep = Self { gamma0, gamma1, pairing };
        let beta = rep.beta();
        if !(beta.min_eigenvalue() > 0.0) {
            return Err(Error::InvalidClifford("⟨e₀·ψ, ψ⟩ is not positive definite".into()));
        }
        // Reality of j_ψ(e_a) on random spinors.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..32 {
            let psi: Vec<Cplx<T>> = (0..2)
                .map(|_| cplx(T::lit(rng.random_range(-1.0..1.0)), T::lit(rng.random_range(-1.0..1.0))))
                .collect();
            for g in [&rep.gamma0, &rep.gamma1] {
                let j = rep.pair(&g.mul_vec(&psi), &psi);
                if j.im.abs().to_f64_lossy() > CLIFFORD_TOL {
                    return Err(Error::InvalidClifford(format!("current has imaginary part {:e}", j.im.to_f64_lossy())));
                }
            }
        }
        Ok(rep)
    }

    /// `γ₀ = [[0,1],[1,0]]`, `γ₁ = [[0,1],[−1,0]]`, pairing `σ_x`. Then
    /// `P γ₀ = I` and `P γ₁ = −σ_z`: component 0 moves right, component 1
    /// moves left.
    pub fn standard() -> Self {
        let (o, z) = (T::one(), T::zero());
        let g0 = CMat::from_real_rows(&[&[z, o], &[o, z]]);
        let g1 = CMat::from_real_rows(&[&[z, o], &[-o, z]]);
        Self::new(g0.clone(), g1, g0).expect("standard representation is valid")
    }

    pub fn gamma0(&self) -> &CMat<T> {
        &self.gamma0
    }

    pub fn gamma1(&self) -> &CMat<T> {
        &self.gamma1
    }

    pub fn pairing(&self) -> &CMat<T> {
        &self.pairing
    }

    /// `⟨ψ, φ⟩ = φ* P ψ`.
    pub fn pair(&self, psi: &[Cplx<T>], phi: &[Cplx<T>]) -> Cplx<T> {
        let p_psi = self.pairing.mul_vec(psi);
        phi.iter().zip(&p_psi).fold(czero(), |acc, (a, b)| acc + a.conj() * b)
    }

    /// Matrix of `β(ψ,φ) = ⟨e₀·ψ, φ⟩`, i.e. `P γ₀`.
    pub fn beta(&self) -> CMat<T> {
        self.pairing.matmul(&self.gamma0)
    }

    /// Matrix of `ψ ↦ ⟨e₁·ψ, ψ⟩`, i.e. `P γ₁`.
    pub fn flux(&self) -> CMat<T> {
        self.pairing.matmul(&self.gamma1)
    }
}

/// One massless charged spinor.
#[derive(Clone, Debug)]
pub struct Species<T: Real> {
    pub charge_mu: T,
    pub mass: T,
    pub spinor: Field<T>,
}

impl<T: Real> Species<T> {
    pub fn new(charge_mu: T, spinor: Field<T>) -> Result<Self> {
        if spinor.width() != 2 || spinor.grid().dim() != 1 {
            return Err(Error::InvalidArgument("a spinor is a width-2 field on the circle".into()));
        }
        if !charge_mu.is_finite() {
            return Err(Error::InvalidArgument("charge must be finite".into()));
        }
        Ok(Self { charge_mu, mass: T::zero(), spinor: spinor.into_complex() })
    }
}

/// Spinors plus the prolonged electromagnetic potential.
#[derive(Clone, Debug)]
pub struct DMState<T: Real> {
    pub species: Vec<Species<T>>,
    /// `(A_t, A_x)`.
    pub potential: [Field<T>; 2],
    /// `(∂_t A_t, ∂_t A_x)`.
    pub potential_dt: [Field<T>; 2],
    /// `(∂_x A_t, ∂_x A_x)`.
    pub potential_dx: [Field<T>; 2],
}

const POTENTIAL_BLOCK: usize = 6;

impl<T: Real> DMState<T> {
    /// Zero spinors and potential for the given charges.
    pub fn zeros(grid: &Arc<Grid<T>>, charges: &[T]) -> Result<Self> {
        let species = charges
            .iter()
            .map(|&mu| Species::new(mu, Field::zeros(grid, 2, ScalarKind::Complex)))
            .collect::<Result<_>>()?;
        let z = || Field::zeros(grid, 1, ScalarKind::Real);
        Ok(Self { species, potential: [z(), z()], potential_dt: [z(), z()], potential_dx: [z(), z()] })
    }

    /// Spinors with a given potential; the `x`-derivative block is computed.
    pub fn from_parts(species: Vec<Species<T>>, potential: [Field<T>; 2], potential_dt: [Field<T>; 2]) -> Result<Self> {
        let potential_dx = [potential[0].derivative(0)?, potential[1].derivative(0)?];
        let s = Self { species, potential, potential_dt, potential_dx };
        s.check()?;
        Ok(s)
    }

    fn check(&self) -> Result<()> {
        let g = self.grid();
        if g.dim() != 1 {
            return Err(Error::InvalidArgument("the Dirac–Maxwell state lives on the circle".into()));
        }
        let pots = self.potential.iter().chain(&self.potential_dt).chain(&self.potential_dx);
        for f in pots {
            if f.width() != 1 || f.grid().modes() != g.modes() {
                return Err(Error::GridMismatch);
            }
        }
        for s in &self.species {
            if s.spinor.grid().modes() != g.modes() {
                return Err(Error::GridMismatch);
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        self.potential[0].grid()
    }

    pub fn charges(&self) -> Vec<T> {
        self.species.iter().map(|s| s.charge_mu).collect()
    }

    /// Packs into one complex field of width `2N + 6`.
    pub fn pack(&self) -> Result<Field<T>> {
        self.check()?;
        let pots: Vec<Field<T>> = self
            .potential
            .iter()
            .chain(&self.potential_dt)
            .chain(&self.potential_dx)
            .map(|f| f.clone().into_complex())
            .collect();
        let mut parts: Vec<&Field<T>> = self.species.iter().map(|s| &s.spinor).collect();
        parts.extend(pots.iter());
        Ok(Field::stack(&parts)?.into_complex())
    }

    /// Inverse of [`DMState::pack`]. Potentials are projected to real fields.
    pub fn unpack(u: &Field<T>, charges: &[T]) -> Result<Self> {
        let n = charges.len();
        if u.width() != 2 * n + POTENTIAL_BLOCK {
            return Err(Error::GridMismatch);
        }
        let species = charges
            .iter()
            .enumerate()
            .map(|(l, &mu)| Species::new(mu, u.components(2 * l..2 * l + 2)))
            .collect::<Result<_>>()?;
        let b = 2 * n;
        let pot = |i: usize| u.component(b + i).real_part();
        Ok(Self {
            species,
            potential: [pot(0), pot(1)],
            potential_dt: [pot(2), pot(3)],
            potential_dx: [pot(4), pot(5)],
        })
    }

    /// `max_μ sup|∂_x A_μ − (potential_dx)_μ|`.
    pub fn prolongation_defect(&self) -> Result<f64> {
        let mut worst = 0.0f64;
        for mu in 0..2 {
            let d = self.potential[mu].derivative(0)?.max_abs_diff(&self.potential_dx[mu])?;
            worst = worst.max(d.to_f64_lossy());
        }
        Ok(worst)
    }
}

/// Assembles the Dirac-wave system for the given charges: Dirac blocks
/// `P γ₀ ∂_t ψ = P γ₁ ∂_x ψ + …` and the first prolongation of the wave
/// equations, with every coupling term in the (punctured) source.
pub fn build_dm_system<T: Real>(charges: &[T], rep: &CliffordRep<T>) -> Result<HyperbolicSystem<T>> {
    let rep = CliffordRep::new(rep.gamma0.clone(), rep.gamma1.clone(), rep.pairing.clone())?;
    let n = charges.len();
    let width = 2 * n + POTENTIAL_BLOCK;
    let b = 2 * n;
    let beta = rep.beta();
    let flux = rep.flux();
    let mut a0 = CMat::identity(width);
    let mut a1 = CMat::zeros(width);
    for l in 0..n {
        for i in 0..2 {
            for j in 0..2 {
                a0.set(2 * l + i, 2 * l + j, beta.get(i, j));
                a1.set(2 * l + i, 2 * l + j, flux.get(i, j));
            }
        }
    }
    let one = cplx(T::one(), T::zero());
    for (i, j) in [(b + 2, b + 4), (b + 4, b + 2), (b + 3, b + 5), (b + 5, b + 3)] {
        a1.set(i, j, one);
    }
    let floor = T::lit(beta.min_eigenvalue().min(1.0));
    // P γ₀ (A_t − A_x γ₀γ₁), multiplied by −iμ in the source.
    let g01 = rep.gamma0.matmul(&rep.gamma1);
    let charges: Vec<T> = charges.to_vec();
    let source = move |_t: T, _x: &[T], u: &[Cplx<T>], out: &mut [Cplx<T>]| {
        let at = u[b].re;
        let ax = u[b + 1].re;
        let minus_i = cplx(T::zero(), -T::one());
        let mut jt = T::zero();
        let mut jx = T::zero();
        for (l, &mu) in charges.iter().enumerate() {
            let psi = &u[2 * l..2 * l + 2];
            let rot = g01.mul_vec(psi);
            let inner = [psi[0] * at - rot[0] * ax, psi[1] * at - rot[1] * ax];
            let coupled = beta.mul_vec(&inner);
            out[2 * l] = coupled[0] * minus_i * mu;
            out[2 * l + 1] = coupled[1] * minus_i * mu;
            jt += mu * quad(&beta, psi);
            jx += mu * quad(&flux, psi);
        }
        out[b] = u[b + 2];
        out[b + 1] = u[b + 3];
        out[b + 2] = cplx(jt, T::zero());
        out[b + 3] = cplx(jx, T::zero());
        out[b + 4] = czero();
        out[b + 5] = czero();
    };
    Ok(HyperbolicSystem::new(
        1,
        width,
        ScalarKind::Complex,
        Coefficient::Constant(a0),
        vec![Coefficient::Constant(a1)],
        floor,
    )?
    .with_source(source, true))
}

/// `Re(ψ* M ψ)` for a Hermitian `M`.
fn quad<T: Real>(m: &CMat<T>, psi: &[Cplx<T>]) -> T {
    let mp = m.mul_vec(psi);
    psi.iter().zip(&mp).fold(T::zero(), |acc, (a, b)| acc + (a.conj() * b).re)
}

/// `∫ ψ* M ψ dx` by Parseval.
fn integrated_quad<T: Real>(m: &CMat<T>, psi: &Field<T>) -> f64 {
    let p = psi.grid().points();
    let c = psi.coeffs();
    let mut acc = 0.0;
    for slot in 0..p {
        let v = [c[slot], c[p + slot]];
        acc += quad(m, &v).to_f64_lossy();
    }
    acc * psi.grid().volume().to_f64_lossy()
}

/// `∫ ⟨e₀·ψ^l, ψ^l⟩` for every species.
pub fn species_norms<T: Real>(state: &DMState<T>, rep: &CliffordRep<T>) -> Vec<f64> {
    let beta = rep.beta();
    state.species.iter().map(|s| integrated_quad(&beta, &s.spinor)).collect()
}

/// `∫ Σ_l μ_l ⟨e₀·ψ^l, ψ^l⟩ dx`.
pub fn total_charge<T: Real>(state: &DMState<T>, rep: &CliffordRep<T>) -> f64 {
    species_norms(state, rep)
        .iter()
        .zip(&state.species)
        .map(|(n, s)| s.charge_mu.to_f64_lossy() * n)
        .sum()
}

/// The current one-form `(J_t, J_x)` as real fields (dealiased).
pub fn currents<T: Real>(state: &DMState<T>, rep: &CliffordRep<T>) -> Result<[Field<T>; 2]> {
    let grid = state.grid().clone();
    let mut jt = Field::zeros(&grid, 1, ScalarKind::Real);
    let mut jx = Field::zeros(&grid, 1, ScalarKind::Real);
    let (beta, flux) = (rep.beta(), rep.flux());
    for s in &state.species {
        let mu = s.charge_mu;
        let (b, f) = (beta.clone(), flux.clone());
        let pair = Field::pointwise(&[&s.spinor], 2, ScalarKind::Real, move |_, v, out| {
            out[0] = cplx(mu * quad(&b, v), T::zero());
            out[1] = cplx(mu * quad(&f, v), T::zero());
        })?;
        jt = jt.try_add(&pair.component(0))?;
        jx = jx.try_add(&pair.component(1))?;
    }
    Ok([jt, jx])
}

/// `d*A = ∂_t A_t − ∂_x A_x` from the prolonged blocks, and its sup norm.
pub fn lorenz_residual<T: Real>(state: &DMState<T>) -> Result<(Field<T>, f64)> {
    let r = state.potential_dt[0].try_sub(&state.potential_dx[1])?;
    let s = r.sup_norm().to_f64_lossy();
    Ok((r, s))
}

/// Gauge transformation by a potential `f` with `(∂_t² − ∂_x²)f = 0`, so
/// that the transformed pair again solves the Lorenz-gauge system. The
/// second time derivative is therefore taken to be `∂_x² f`.
pub fn gauge_transform<T: Real>(state: &DMState<T>, f: &Field<T>, f_dt: &Field<T>) -> Result<DMState<T>> {
    let f_dtt = f.derivative(0)?.derivative(0)?;
    gauge_transform_with(state, f, f_dt, &f_dtt)
}

/// Gauge transformation with an explicit `∂_t² f`.
pub fn gauge_transform_with<T: Real>(
    state: &DMState<T>,
    f: &Field<T>,
    f_dt: &Field<T>,
    f_dtt: &Field<T>,
) -> Result<DMState<T>> {
    for g in [f, f_dt, f_dtt] {
        if g.width() != 1 || g.grid().modes() != state.grid().modes() {
            return Err(Error::GridMismatch);
        }
    }
    let (f, f_dt, f_dtt) = (f.real_part(), f_dt.real_part(), f_dtt.real_part());
    let fx = f.derivative(0)?;
    let fxx = fx.derivative(0)?;
    let ftx = f_dt.derivative(0)?;
    let species = state
        .species
        .iter()
        .map(|s| {
            let mu = s.charge_mu;
            let spinor = Field::pointwise(&[&s.spinor, &f], 2, ScalarKind::Complex, move |_, v, out| {
                let phase = Cplx::from_polar(T::one(), -mu * v[2].re);
                out[0] = v[0] * phase;
                out[1] = v[1] * phase;
            })?;
            Species::new(mu, spinor)
        })
        .collect::<Result<_>>()?;
    Ok(DMState {
        species,
        potential: [state.potential[0].try_add(&f_dt)?, state.potential[1].try_add(&fx)?],
        potential_dt: [state.potential_dt[0].try_add(&f_dtt)?, state.potential_dt[1].try_add(&ftx)?],
        potential_dx: [state.potential_dx[0].try_add(&ftx)?, state.potential_dx[1].try_add(&fxx)?],
    })
}

/// The two 1+1 constraint residual fields at an initial slice:
/// `r₁ = d*A` and `r₂ = ∂_t(d*A) = ∂_x(∂_x A_t) − ∂_x(∂_t A_x) + J_t`,
/// the second rewritten through the wave equation for `A_t`.
pub fn constraint_fields<T: Real>(state: &DMState<T>, rep: &CliffordRep<T>) -> Result<(Field<T>, Field<T>)> {
    let (r1, _) = lorenz_residual(state)?;
    let [jt, _] = currents(state, rep)?;
    let r2 = state.potential_dx[0]
        .derivative(0)?
        .try_sub(&state.potential_dt[1].derivative(0)?)?
        .try_add(&jt)?;
    Ok((r1, r2))
}

/// Sup norms of the two constraint residuals.
pub fn constraint_residual_1p1<T: Real>(state: &DMState<T>, rep: &CliffordRep<T>) -> Result<(f64, f64)> {
    let (r1, r2) = constraint_fields(state, rep)?;
    Ok((r1.sup_norm().to_f64_lossy(), r2.sup_norm().to_f64_lossy()))
}

/// `∫ r₂ dx`. The divergence terms integrate to zero, leaving the total
/// charge: constraint-satisfying data on the circle must be neutral.
pub fn constraint2_integral<T: Real>(state: &DMState<T>, rep: &CliffordRep<T>) -> Result<f64> {
    let (_, r2) = constraint_fields(state, rep)?;
    let g = r2.grid();
    let zero = vec![0i64; g.dim()];
    Ok(r2.coeff(0, &zero).re.to_f64_lossy() * g.volume().to_f64_lossy())
}

/// Initial data satisfying both constraints for the given spinors:
/// `A_x = ∂_t A_t = ∂_t A_x = 0` and `∂_x² A_t = −J_t` with zero mean.
/// Fails unless the spinors carry zero total charge.
pub fn constrained_initial_data<T: Real>(species: Vec<Species<T>>, rep: &CliffordRep<T>) -> Result<DMState<T>> {
    let grid = species
        .first()
        .map(|s| s.spinor.grid().clone())
        .ok_or_else(|| Error::InvalidArgument("need at least one species".into()))?;
    let mut state = DMState::zeros(&grid, &[])?;
    state.species = species;
    let q = total_charge(&state, rep);
    let scale = species_norms(&state, rep).iter().zip(&state.species).map(|(n, s)| n * s.charge_mu.to_f64_lossy().abs()).sum::<f64>();
    if q.abs() > 1e-12 * scale.max(1.0) {
        return Err(Error::HypothesisViolated(format!("total charge {q:e} is not zero")));
    }
    let [jt, _] = currents(&state, rep)?;
    let p = grid.points();
    let mut c = vec![czero(); p];
    for (slot, v) in c.iter_mut().enumerate() {
        let xi = grid.frequency(slot)[0];
        if xi != 0 {
            *v = jt.coeffs()[slot] / T::from_count((xi * xi) as usize);
        }
    }
    let at = Field::from_coeffs(&grid, 1, ScalarKind::Real, c)?;
    let z = Field::zeros(&grid, 1, ScalarKind::Real);
    DMState::from_parts(state.species, [at, z.clone()], [z.clone(), z])
}

/// A Dirac–Maxwell run with its conservation monitors.
#[derive(Clone, Debug)]
pub struct DMTrajectory<T: Real> {
    pub trajectory: Trajectory<T>,
    pub charges: Vec<T>,
    pub charge_log: Vec<f64>,
    /// `species_norm_log[i][l]` at snapshot `i`.
    pub species_norm_log: Vec<Vec<f64>>,
    pub lorenz_log: Vec<f64>,
}

impl<T: Real> DMTrajectory<T> {
    pub fn state(&self, i: usize) -> Result<DMState<T>> {
        DMState::unpack(&self.trajectory.states[i], &self.charges)
    }

    pub fn final_state(&self) -> Result<DMState<T>> {
        self.state(self.trajectory.states.len() - 1)
    }

    /// Largest relative drift of the total charge (relative to the summed
    /// absolute species charges, so that neutral data is meaningful).
    pub fn charge_drift(&self) -> f64 {
        let scale: f64 = self.species_norm_log[0]
            .iter()
            .zip(&self.charges)
            .map(|(n, mu)| n * mu.to_f64_lossy().abs())
            .sum::<f64>()
            .max(f64::MIN_POSITIVE);
        self.charge_log.iter().map(|q| (q - self.charge_log[0]).abs() / scale).fold(0.0, f64::max)
    }

    /// Largest relative drift of any species norm.
    pub fn norm_drift(&self) -> f64 {
        let first = &self.species_norm_log[0];
        self.species_norm_log
            .iter()
            .flat_map(|row| row.iter().zip(first).map(|(n, n0)| (n - n0).abs() / n0.abs().max(f64::MIN_POSITIVE)))
            .fold(0.0, f64::max)
    }

    /// CSV with columns `t,charge,norm_0,…,lorenz_sup`.
    pub fn to_csv(&self, header: Option<&str>) -> String {
        let mut s = String::new();
        if let Some(h) = header {
            let _ = writeln!(s, "# {h}");
        }
        s.push_str("t,charge");
        for l in 0..self.charges.len() {
            let _ = write!(s, ",norm_{l}");
        }
        s.push_str(",lorenz_sup\n");
        for (i, t) in self.trajectory.times.iter().enumerate() {
            let _ = write!(s, "{t},{}", self.charge_log[i]);
            for n in &self.species_norm_log[i] {
                let _ = write!(s, ",{n}");
            }
            let _ = writeln!(s, ",{}", self.lorenz_log[i]);
        }
        s
    }
}

/// Evolves the Dirac-wave system and logs charge, species norms and the
/// Lorenz residual at every snapshot.
pub fn evolve_dm<T: Real>(
    initial: &DMState<T>,
    t_end: f64,
    ctl: &SolveControls,
    m: &Mollifier<T>,
    rep: &CliffordRep<T>,
) -> Result<DMTrajectory<T>> {
    let charges = initial.charges();
    let sys = build_dm_system(&charges, rep)?;
    let trajectory = integrate(&sys, &initial.pack()?, m, t_end, ctl)?;
    let mut charge_log = Vec::new();
    let mut species_norm_log = Vec::new();
    let mut lorenz_log = Vec::new();
    for u in &trajectory.states {
        let s = DMState::unpack(u, &charges)?;
        charge_log.push(total_charge(&s, rep));
        species_norm_log.push(species_norms(&s, rep));
        lorenz_log.push(lorenz_residual(&s)?.1);
    }
    Ok(DMTrajectory { trajectory, charges, charge_log, species_norm_log, lorenz_log })
}

fn spectrum_section<T: Real>(ini: &mut Ini, name: &str, f: &Field<T>, c: usize, tol: f64) {
    let grid = f.grid();
    let p = grid.points();
    let mut sec = ini.with_section(Some(name));
    for slot in 0..p {
        let z = f.component_coeffs(c)[slot];
        if z.norm().to_f64_lossy() > tol {
            sec.set(grid.frequency(slot)[0].to_string(), format!("{} {}", z.re, z.im));
        }
    }
}

/// Writes the state as a plain-text spectrum: a `[meta]` section with
/// `modes` and `charges`, then one section per component (`psi.<l>.<c>`,
/// `A_t`, `A_x`, `dt_A_t`, `dt_A_x`) mapping mode index to `re im`.
pub fn write_spectra<T: Real>(state: &DMState<T>) -> String {
    let mut ini = Ini::new();
    let charges: Vec<String> = state.species.iter().map(|s| s.charge_mu.to_string()).collect();
    ini.with_section(Some("meta"))
        .set("modes", state.grid().modes().to_string())
        .set("charges", charges.join(" "));
    for (l, s) in state.species.iter().enumerate() {
        for c in 0..2 {
            spectrum_section(&mut ini, &format!("psi.{l}.{c}"), &s.spinor, c, 0.0);
        }
    }
    let pots = [("A_t", &state.potential[0]), ("A_x", &state.potential[1])];
    let dts = [("dt_A_t", &state.potential_dt[0]), ("dt_A_x", &state.potential_dt[1])];
    for (name, f) in pots.into_iter().chain(dts) {
        spectrum_section(&mut ini, name, f, 0, 0.0);
    }
    let mut buf = Vec::new();
    ini.write_to(&mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ini output is UTF-8")
}

fn parse_num<T: Real>(s: &str, what: &str) -> Result<T> {
    s.trim()
        .parse::<f64>()
        .map(T::lit)
        .map_err(|_| Error::Parse(format!("{what}: cannot read `{s}` as a number")))
}

fn read_spectrum<T: Real>(ini: &Ini, name: &str, grid: &Arc<Grid<T>>, out: &mut [Cplx<T>]) -> Result<()> {
    let Some(sec) = ini.section(Some(name)) else { return Ok(()) };
    for (k, v) in sec.iter() {
        let xi: i64 = k.trim().parse().map_err(|_| Error::Parse(format!("[{name}]: bad mode index `{k}`")))?;
        let slot = grid
            .slot(&[xi])
            .ok_or_else(|| Error::Parse(format!("[{name}]: mode {xi} outside the grid")))?;
        let parts: Vec<&str> = v.split_whitespace().collect();
        if parts.len() != 2 {
            return Err(Error::Parse(format!("[{name}] {k}: expected `re im`, got `{v}`")));
        }
        out[slot] = cplx(parse_num(parts[0], name)?, parse_num(parts[1], name)?);
    }
    Ok(())
}

/// Reads a spectrum file written by [`write_spectra`]. Missing component
/// sections are zero; the `x`-derivative block is recomputed.
pub fn read_spectra<T: Real>(text: &str) -> Result<DMState<T>> {
    let ini = Ini::load_from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let meta = ini.section(Some("meta")).ok_or_else(|| Error::Parse("missing [meta] section".into()))?;
    let modes: usize = meta
        .get("modes")
        .ok_or_else(|| Error::Parse("[meta] needs `modes`".into()))?
        .trim()
        .parse()
        .map_err(|_| Error::Parse("[meta] modes must be an integer".into()))?;
    let charges: Vec<T> = meta
        .get("charges")
        .unwrap_or("")
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(s, "charges"))
        .collect::<Result<_>>()?;
    let grid = Grid::one_d(modes)?;
    let p = grid.points();
    let mut species = Vec::new();
    for (l, &mu) in charges.iter().enumerate() {
        let mut c = vec![czero(); 2 * p];
        for comp in 0..2 {
            read_spectrum(&ini, &format!("psi.{l}.{comp}"), &grid, &mut c[comp * p..(comp + 1) * p])?;
        }
        species.push(Species::new(mu, Field::from_coeffs(&grid, 2, ScalarKind::Complex, c)?)?);
    }
    let real = |name: &str| -> Result<Field<T>> {
        let mut c = vec![czero(); p];
        read_spectrum(&ini, name, &grid, &mut c)?;
        Field::from_coeffs(&grid, 1, ScalarKind::Real, c)
    };
    let potential = [real("A_t")?, real("A_x")?];
    let potential_dt = [real("dt_A_t")?, real("dt_A_x")?];
    DMState::from_parts(species, potential, potential_dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{default_samples, validate_system};
    use std::f64::consts::TAU;

    fn rep() -> CliffordRep<f64> {
        CliffordRep::standard()
    }

    fn bump_spinor(grid: &Arc<Grid<f64>>, a: f64, shift: f64) -> Field<f64> {
        Field::from_fn(grid, 2, ScalarKind::Complex, |x, out| {
            out[0] = cplx(a * (x[0] + shift).cos(), 0.5 * a * (2.0 * x[0]).sin());
            out[1] = cplx(0.3 * a * x[0].sin(), a * (x[0] - shift).cos());
        })
        .unwrap()
    }

    #[test]
    fn standard_rep_satisfies_relations() {
        let r = rep();
        assert_eq!(r.beta(), CMat::identity(2));
        assert_eq!(r.flux(), crate::linalg::pauli::sigma_z().scale(-1.0));
    }

    #[test]
    fn bad_reps_are_rejected() {
        let id = CMat::<f64>::identity(2);
        let g1 = rep().gamma1().clone();
        assert!(matches!(CliffordRep::new(id.clone(), g1.clone(), id.clone()), Err(Error::InvalidClifford(_))));
        // γ₀ valid but the pairing makes ⟨e₀·ψ,ψ⟩ indefinite.
        let g0 = rep().gamma0().clone();
        let neg = g0.scale(-1.0);
        assert!(matches!(CliffordRep::new(g0, g1, neg), Err(Error::InvalidClifford(_))));
    }

    #[test]
    fn system_is_valid_semilinear_and_punctured() {
        let sys = build_dm_system(&[1.0, -1.0], &rep()).unwrap();
        assert!(sys.is_semilinear() && sys.is_punctured());
        let probe: Vec<Cplx<f64>> = (0..10).map(|i| cplx(0.1 * i as f64, -0.05)).collect();
        let report = validate_system(&sys, &default_samples(&sys, &[probe])).unwrap();
        assert!(report.passed(), "{report:?}");
        let mut out = vec![cplx(1.0, 1.0); 10];
        sys.eval_source(0.3, &[1.0], &[czero(); 10], &mut out);
        assert!(out.iter().all(|z| z.norm() <= 1e-14));
    }

    #[test]
    fn charge_of_constant_spinor() {
        let g = Grid::one_d(16).unwrap();
        let a = 0.7;
        let spinor = Field::from_fn(&g, 2, ScalarKind::Complex, |_, out| out[0] = cplx(a, 0.0)).unwrap();
        let mut s = DMState::zeros(&g, &[]).unwrap();
        s.species.push(Species::new(1.0, spinor).unwrap());
        assert!((total_charge(&s, &rep()) - TAU * a * a).abs() < 1e-13);
        assert_eq!(total_charge(&DMState::zeros(&g, &[1.0]).unwrap(), &rep()), 0.0);
    }

    #[test]
    fn charge_matches_node_quadrature() {
        let g = Grid::one_d(32).unwrap();
        let psi = bump_spinor(&g, 0.4, 0.2);
        let mut s = DMState::zeros(&g, &[]).unwrap();
        s.species.push(Species::new(1.5, psi.clone()).unwrap());
        let vals = psi.values();
        let p = g.points();
        let quadrature: f64 = (0..p).map(|i| vals[i].norm_sqr() + vals[p + i].norm_sqr()).sum::<f64>() * TAU / p as f64;
        assert!((total_charge(&s, &rep()) - 1.5 * quadrature).abs() < 1e-12);
    }

    #[test]
    fn opposite_identical_species_cancel() {
        let g = Grid::one_d(32).unwrap();
        let psi = bump_spinor(&g, 0.4, 0.2);
        let mut s = DMState::zeros(&g, &[]).unwrap();
        s.species.push(Species::new(1.0, psi.clone()).unwrap());
        s.species.push(Species::new(-1.0, psi).unwrap());
        assert_eq!(total_charge(&s, &rep()), 0.0);
    }

    #[test]
    fn pack_unpack_round_trip() {
        let g = Grid::one_d(16).unwrap();
        let mut s = DMState::zeros(&g, &[1.0, -1.0]).unwrap();
        s.species[0].spinor = bump_spinor(&g, 0.3, 0.0);
        s.potential[1] = Field::from_real_fn(&g, |x| x[0].sin());
        s.potential_dx[1] = s.potential[1].derivative(0).unwrap();
        let back = DMState::unpack(&s.pack().unwrap(), &[1.0, -1.0]).unwrap();
        assert!(back.species[0].spinor.bitwise_eq(&s.species[0].spinor));
        assert!(back.potential[1].max_abs_diff(&s.potential[1]).unwrap() < 1e-15);
        assert_eq!(back.prolongation_defect().unwrap(), s.prolongation_defect().unwrap());
    }

    #[test]
    fn lorenz_residual_examples() {
        let g = Grid::one_d(16).unwrap();
        let mut s = DMState::zeros(&g, &[]).unwrap();
        s.potential[1] = Field::constant(&g, 2.0);
        assert_eq!(lorenz_residual(&s).unwrap().1, 0.0);
        let h = Field::from_real_fn(&g, |x: &[f64]| (2.0 * x[0]).cos() + 0.1);
        s.potential_dt[0] = h.clone();
        let (r, _) = lorenz_residual(&s).unwrap();
        assert!(r.max_abs_diff(&h).unwrap() < 1e-15);
    }

    #[test]
    fn gauge_by_constant_is_a_phase() {
        let g = Grid::one_d(16).unwrap();
        let mut s = DMState::zeros(&g, &[2.0]).unwrap();
        s.species[0].spinor = bump_spinor(&g, 0.3, 0.1);
        let c = 0.4;
        let f = Field::constant(&g, c);
        let z = Field::zeros(&g, 1, ScalarKind::Real);
        let t = gauge_transform(&s, &f, &z).unwrap();
        let expect = s.species[0].spinor.scale_complex(Cplx::from_polar(1.0, -2.0 * c));
        assert!(t.species[0].spinor.max_abs_diff(&expect).unwrap() < 1e-14);
        for mu in 0..2 {
            assert!(t.potential[mu].max_abs_diff(&s.potential[mu]).unwrap() < 1e-15);
        }
        let id = gauge_transform(&s, &z, &z).unwrap();
        assert!(id.species[0].spinor.max_abs_diff(&s.species[0].spinor).unwrap() < 1e-15);
    }

    #[test]
    fn gauge_shift_changes_lorenz_residual_by_box() {
        // f = e^{t/2}·sin(2x) at t = 0: □f = (1/4 + 4) sin(2x).
        let g = Grid::one_d(32).unwrap();
        let s = DMState::zeros(&g, &[]).unwrap();
        let f = Field::from_real_fn(&g, |x: &[f64]| (2.0 * x[0]).sin());
        let f_dt = f.scale(0.5);
        let f_dtt = f.scale(0.25);
        let t = gauge_transform_with(&s, &f, &f_dt, &f_dtt).unwrap();
        let (r, _) = lorenz_residual(&t).unwrap();
        // Centered differences of the analytic f in t and x.
        let h = 1e-3;
        let ff = |t: f64, x: f64| (t / 2.0).exp() * (2.0 * x).sin();
        for i in 0..32 {
            let x = g.node(i)[0];
            let ftt = (ff(h, x) - 2.0 * ff(0.0, x) + ff(-h, x)) / (h * h);
            let fxx = (ff(0.0, x + h) - 2.0 * ff(0.0, x) + ff(0.0, x - h)) / (h * h);
            assert!((r.real_values(0)[i] - (ftt - fxx)).abs() < 1e-5);
        }
    }

    #[test]
    fn zero_state_has_no_constraint_residual() {
        let g = Grid::one_d(16).unwrap();
        let s = DMState::zeros(&g, &[1.0, -1.0]).unwrap();
        assert_eq!(constraint_residual_1p1(&s, &rep()).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn constraint_integral_is_total_charge() {
        let g = Grid::one_d(32).unwrap();
        let mut s = DMState::zeros(&g, &[]).unwrap();
        s.species.push(Species::new(1.0, bump_spinor(&g, 0.5, 0.0)).unwrap());
        s.potential_dx[0] = Field::from_real_fn(&g, |x| x[0].cos() + 0.7);
        s.potential_dt[1] = Field::from_real_fn(&g, |x| (3.0 * x[0]).sin() - 0.2);
        let q = total_charge(&s, &rep());
        assert!((constraint2_integral(&s, &rep()).unwrap() - q).abs() < 1e-10);
        assert!(q > 0.1);
    }

    #[test]
    fn constrained_data_satisfies_constraints() {
        let g = Grid::one_d(32).unwrap();
        let sp = vec![
            Species::new(1.0, bump_spinor(&g, 0.3, 0.0)).unwrap(),
            Species::new(-1.0, bump_spinor(&g, 0.3, 0.9)).unwrap(),
        ];
        let s = constrained_initial_data(sp, &rep()).unwrap();
        let (r1, r2) = constraint_residual_1p1(&s, &rep()).unwrap();
        assert!(r1 < 1e-14 && r2 < 1e-13, "{r1} {r2}");
        let charged = vec![Species::new(1.0, bump_spinor(&g, 0.3, 0.0)).unwrap()];
        assert!(matches!(constrained_initial_data(charged, &rep()), Err(Error::HypothesisViolated(_))));
    }

    #[test]
    fn spectra_round_trip() {
        let g = Grid::one_d(16).unwrap();
        let mut s = DMState::zeros(&g, &[1.0, -0.5]).unwrap();
        s.species[1].spinor = bump_spinor(&g, 0.3, 0.4);
        s.potential[0] = Field::from_real_fn(&g, |x| 0.2 * x[0].cos());
        s.potential_dt[1] = Field::from_real_fn(&g, |x| 0.1 * (2.0 * x[0]).sin());
        let s = DMState::from_parts(s.species, s.potential, s.potential_dt).unwrap();
        let text = write_spectra(&s);
        let back: DMState<f64> = read_spectra(&text).unwrap();
        assert_eq!(back.charges(), vec![1.0, -0.5]);
        assert!(back.pack().unwrap().max_abs_diff(&s.pack().unwrap()).unwrap() < 1e-15);
        assert!(matches!(read_spectra::<f64>("[meta]\nmodes = 16\n[A_t]\n1 = x 0\n"), Err(Error::Parse(_))));
    }
}
