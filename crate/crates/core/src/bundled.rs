//! Ready-made systems used by the tests, the acceptance suite and the CLI.

use crate::grid::ScalarKind;
use crate::linalg::CMat;
use crate::scalar::Real;
use crate::system::{Coefficient, HyperbolicSystem};

/// Transport `∂_t u = ∂_{x₁} u` of a real scalar (`A₀ = I`, `A₁ = I`).
pub fn advection<T: Real>(dim: usize) -> HyperbolicSystem<T> {
    let mut a = vec![Coefficient::Constant(CMat::identity(1))];
    for _ in 1..dim {
        a.push(Coefficient::Constant(CMat::zeros(1)));
    }
    HyperbolicSystem::new(dim, 1, ScalarKind::Real, Coefficient::Constant(CMat::identity(1)), a, T::one())
        .expect("advection system is well formed")
}

/// One-dimensional wave system in characteristic-free form:
/// `∂_t (p, q) = [[0, 1], [1, 0]] ∂_x (p, q)`.
pub fn wave_pair<T: Real>() -> HyperbolicSystem<T> {
    let (o, z) = (T::one(), T::zero());
    HyperbolicSystem::new(
        1,
        2,
        ScalarKind::Real,
        Coefficient::Constant(CMat::identity(2)),
        vec![Coefficient::Constant(CMat::from_real_rows(&[&[z, o], &[o, z]]))],
        o,
    )
    .expect("wave pair is well formed")
}

/// Inviscid Burgers-type equation `∂_t u = u ∂_x u`.
pub fn burgers<T: Real>() -> HyperbolicSystem<T> {
    HyperbolicSystem::new(
        1,
        1,
        ScalarKind::Real,
        Coefficient::Constant(CMat::identity(1)),
        vec![Coefficient::state(|_, _, u| {
            let mut m = CMat::zeros(1);
            m.set(0, 0, crate::scalar::cplx(u[0].re, T::zero()));
            m
        })],
        T::one(),
    )
    .expect("burgers system is well formed")
}

/// Semilinear `∂_t u = ∂_x u + u²`; constant data `c` blow up at `t = 1/c`.
pub fn square_growth<T: Real>() -> HyperbolicSystem<T> {
    advection::<T>(1).with_source(|_, _, u, out| out[0] = u[0] * u[0], true)
}

/// Linear ODE `∂_t u = u` with no transport.
pub fn pure_growth<T: Real>() -> HyperbolicSystem<T> {
    HyperbolicSystem::new(
        1,
        1,
        ScalarKind::Real,
        Coefficient::Constant(CMat::identity(1)),
        vec![Coefficient::Constant(CMat::zeros(1))],
        T::one(),
    )
    .expect("growth system is well formed")
    .with_source(|_, _, u, out| out[0] = u[0], true)
}

/// Variable-coefficient symmetric system `A₀ ∂_t u = A₁ ∂_x u` with
/// `A₀ = diag(2 + sin x, 1)` and `A₁ = [[1, cos x/2], [cos x/2, −1]]`.
pub fn variable_pair<T: Real>() -> HyperbolicSystem<T> {
    HyperbolicSystem::new(
        1,
        2,
        ScalarKind::Real,
        Coefficient::space_time(|_, x: &[T]| CMat::from_real_diag(&[T::lit(2.0) + x[0].sin(), T::one()])),
        vec![Coefficient::space_time(|_, x: &[T]| {
            let c = x[0].cos() * T::lit(0.5);
            CMat::from_real_rows(&[&[T::one(), c], &[c, -T::one()]])
        })],
        T::one(),
    )
    .expect("variable pair is well formed")
}

/// Names accepted by [`by_name`].
pub const NAMES: [&str; 6] = ["advection", "wave_pair", "burgers", "square_growth", "pure_growth", "variable_pair"];

/// Looks a bundled one-dimensional system up by name.
pub fn by_name<T: Real>(name: &str) -> Option<HyperbolicSystem<T>> {
    Some(match name {
        "advection" => advection(1),
        "advection2d" => advection(2),
        "wave_pair" => wave_pair(),
        "burgers" => burgers(),
        "square_growth" => square_growth(),
        "pure_growth" => pure_growth(),
        "variable_pair" => variable_pair(),
        _ => return None,
    })
}
