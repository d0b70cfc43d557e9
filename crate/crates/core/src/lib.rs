//! Evolution of one-particle density matrices under nonhermitian,
//! particle-hole symmetric master equations for fermions and bosons.
//!
//! ```
//! use qme::{evolve, DensityMatrix, EvolutionSpec, HermitianOperator, NonlinearMaster, Statistics, TransitionNetwork};
//!
//! // one fermion hopping from orbital 0 to orbital 1 at unit rate
//! let net = TransitionNetwork::from_rates(2, [(1, 0, 1.0)])?;
//! let eq = NonlinearMaster { h: HermitianOperator::zeros(2), rates: net, statistics: Statistics::Fermion };
//! let rho = DensityMatrix::diagonal(&[1.0, 0.0], Statistics::Fermion)?;
//! let traj = evolve(&EvolutionSpec::new(0.0, 3.0, 1e-3)?, &eq, &rho)?;
//! let n_f = traj.final_state()[(1, 1)].re;
//! assert!((n_f - (1.0 - 1.0 / 4.0)).abs() < 1e-8);
//! # Ok::<(), qme::Error>(())
//! ```

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod fock_oracle;
pub mod integrator;
pub mod operators;
pub mod scenario;

#[cfg(test)]
mod test_util;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/operators.md")]
    pub struct Operators;
    #[doc = include_str!("../../../book/src/equations.md")]
    pub struct Equations;
    #[doc = include_str!("../../../book/src/integrator.md")]
    pub struct Integrator;
    #[doc = include_str!("../../../book/src/fock_oracle.md")]
    pub struct FockOracle;
    #[doc = include_str!("../../../book/src/analysis.md")]
    pub struct Analysis;
    #[doc = include_str!("../../../book/src/scenarios.md")]
    pub struct Scenarios;
}

pub use analysis::{
    appendix_d_scenario, bounds_monitor, crossing_time, dephasing_scenario, duality_check,
    low_density_slope, DiagnosticSeries,
};
pub use dynamics::{
    build_relaxation_operators, hole_transform, rewrite_a_prime, rhs_general, rhs_generalized,
    rhs_hole_form, rhs_lindblad, rhs_markoff, rhs_meanfield_nonhermitian, rhs_nonlinear_master,
    rhs_quasiclassical, rhs_rewritten, DephasingRates, GeneralEquation, GeneralizedJumps,
    GeneralizedJumpsHole, HoleEquation, JumpOperatorSet, Lindblad, Markoff, MeanFieldNonhermitian,
    ModulatedRates, NonlinearHoleMaster, NonlinearMaster, Quasiclassical, RateProvider,
    RelaxationOperators, Statistics, TransitionNetwork,
};
pub use error::{Error, Result};
pub use fock_oracle::{FockModel, FockOracle, ManyBodyState};
pub use num_complex::Complex64;
pub use integrator::{evolve, evolve_matrix, step_rk4, EvolutionSpec, FnRhs, Rhs, Trajectory};
pub use operators::{
    anticommutator, commutator, hermitian_eig, positivity_report, ComplexMatrix, DensityMatrix,
    HermitianOperator, Spectrum,
};
