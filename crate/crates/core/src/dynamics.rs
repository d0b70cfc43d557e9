//! Right-hand sides of the one-particle evolution equations.
//!
//! Every equation shares the Liouville term `(1/i)[H, ρ]` and differs in how
//! loss and gain enter:
//!
//! | builder | relaxation term |
//! |---|---|
//! | [`rhs_meanfield_nonhermitian`] | `{ρ, A}` (loss only) |
//! | [`rhs_general`] | `{ρ, A_p} − {I ± ρ, A_p̄}` |
//! | [`rhs_hole_form`] | `{ρ̄, A_p̄} − {I − ρ̄, A_p}` |
//! | [`rhs_nonlinear_master`] | general form with `A_p`, `A_p̄` built from a [`TransitionNetwork`] |
//! | [`rhs_generalized`] | general form with `A_p`, `A_p̄` built from jump operators |
//! | [`rhs_markoff`] | linear network equation plus pure dephasing |
//! | [`rhs_lindblad`] | linear jump-operator equation |
//!
//! `±` is `+` for bosons and `−` for fermions; it is taken from
//! [`Statistics::sign`] everywhere.
//!
//! The state argument is a raw matrix rather than a [`DensityMatrix`]: the
//! builders are evaluated on Runge-Kutta stage states and on trajectories that
//! leave the physical cone, and bounds are checked by the caller, never
//! enforced here.

use std::borrow::Cow;
use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::Rhs;
use crate::operators::{
    anticommutator, check_matrix, check_same_dim, max_abs, projector, ComplexMatrix,
    ComplexVector, DensityMatrix, HermitianOperator, I,
};

/// Gram-matrix tolerance for network bases.
pub const BASIS_TOLERANCE: f64 = 1e-10;

/// Slack allowed on occupation bounds in the quasiclassical equation.
pub const OCCUPATION_TOLERANCE: f64 = 1e-10;

/// Particle statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistics {
    Fermion,
    Boson,
}

impl Statistics {
    /// `−1` for fermions, `+1` for bosons.
    pub fn sign(self) -> f64 {
        match self {
            Statistics::Fermion => -1.0,
            Statistics::Boson => 1.0,
        }
    }

    /// `1 ± n`: Pauli blocking or Bose enhancement of a target occupation.
    pub fn blocking(self, occupation: f64) -> f64 {
        1.0 + self.sign() * occupation
    }

    /// `I ± ρ`.
    pub fn identity_plus(self, rho: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix::identity(rho.nrows(), rho.ncols()) + rho.scale(self.sign())
    }

    pub fn name(self) -> &'static str {
        match self {
            Statistics::Fermion => "fermion",
            Statistics::Boson => "boson",
        }
    }
}

/// Directed transition rates `w_{n′n}` (jump `n → n′`) on an orthonormal set
/// of orbitals.
///
/// The orbitals are the columns of `basis`; `None` means the computational
/// basis. `(n′, n)` and `(n, n′)` are independent entries.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionNetwork {
    dim: usize,
    basis: Option<ComplexMatrix>,
    rates: BTreeMap<(usize, usize), f64>,
}

impl TransitionNetwork {
    /// Empty network on the computational basis.
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            basis: None,
            rates: BTreeMap::new(),
        }
    }

    /// Empty network on the orthonormal columns of `basis`.
    pub fn with_basis(basis: ComplexMatrix) -> Result<Self> {
        check_matrix(&basis)?;
        let dim = basis.nrows();
        let gram = basis.adjoint() * &basis;
        let defect = max_abs(&(gram - ComplexMatrix::identity(dim, dim)));
        if defect > BASIS_TOLERANCE {
            return Err(Error::NotOrthonormal { defect });
        }
        Ok(Self {
            dim,
            basis: Some(basis),
            rates: BTreeMap::new(),
        })
    }

    /// Computational-basis network from `(to, from, rate)` triples.
    pub fn from_rates(dim: usize, rates: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut net = Self::new(dim);
        for (to, from, w) in rates {
            net.add_rate(to, from, w)?;
        }
        Ok(net)
    }

    /// Sets `w_{to,from}`, the rate of the jump `from → to`.
    pub fn add_rate(&mut self, to: usize, from: usize, rate: f64) -> Result<()> {
        for index in [to, from] {
            if index >= self.dim {
                return Err(Error::IndexOutOfRange {
                    index,
                    dim: self.dim,
                });
            }
        }
        if to == from {
            return Err(Error::SelfTransition { index: to });
        }
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(Error::NegativeRate { to, from, rate });
        }
        self.rates.insert((to, from), rate);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn basis(&self) -> Option<&ComplexMatrix> {
        self.basis.as_ref()
    }

    /// `((to, from), w)` in ascending key order.
    pub fn rates(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.rates.iter().map(|(&k, &w)| (k, w))
    }

    pub fn rate(&self, to: usize, from: usize) -> f64 {
        self.rates.get(&(to, from)).copied().unwrap_or(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.rates.values().all(|&w| w == 0.0)
    }

    /// `|n⟩`.
    pub fn ket(&self, n: usize) -> ComplexVector {
        match &self.basis {
            Some(b) => b.column(n).into_owned(),
            None => crate::operators::basis_ket(self.dim, n),
        }
    }

    /// `R[(to, from)] = w_{to,from}`.
    pub fn rate_matrix(&self) -> DMatrix<f64> {
        let mut w = DMatrix::zeros(self.dim, self.dim);
        for (&(to, from), &rate) in &self.rates {
            w[(to, from)] = rate;
        }
        w
    }

    /// Same network with every rate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.rates.values_mut().for_each(|w| *w *= factor);
        out
    }

    /// `M` expressed in the network basis, `B† M B`.
    pub(crate) fn to_network_basis(&self, m: &ComplexMatrix) -> ComplexMatrix {
        match &self.basis {
            Some(b) => b.adjoint() * m * b,
            None => m.clone(),
        }
    }

    pub(crate) fn from_network_basis(&self, m: &ComplexMatrix) -> ComplexMatrix {
        match &self.basis {
            Some(b) => b * m * b.adjoint(),
            None => m.clone(),
        }
    }

    /// `⟨n|ρ|n⟩` for every orbital.
    pub fn occupations(&self, rho: &ComplexMatrix) -> Vec<f64> {
        let local = self.to_network_basis(rho);
        (0..self.dim).map(|n| local[(n, n)].re).collect()
    }

    /// `Σ_n c_n |n⟩⟨n|`.
    fn diagonal_operator(&self, coefficients: &[f64]) -> ComplexMatrix {
        let local = crate::operators::diagonal_matrix(coefficients);
        self.from_network_basis(&local)
    }
}

/// Supplies the transition network at a given time.
///
/// Runs in this crate hold rates fixed, but builders take the network through
/// this trait so a schedule `w_{n′n}(t)` can be evaluated at every integrator
/// stage time.
pub trait RateProvider {
    fn network_at(&self, t: f64) -> Cow<'_, TransitionNetwork>;
}

impl RateProvider for TransitionNetwork {
    fn network_at(&self, _t: f64) -> Cow<'_, TransitionNetwork> {
        Cow::Borrowed(self)
    }
}

/// `w_{n′n}(t) = envelope(t) · w_{n′n}`.
pub struct ModulatedRates<F> {
    pub base: TransitionNetwork,
    pub envelope: F,
}

impl<F: Fn(f64) -> f64> RateProvider for ModulatedRates<F> {
    fn network_at(&self, t: f64) -> Cow<'_, TransitionNetwork> {
        Cow::Owned(self.base.scaled((self.envelope)(t)))
    }
}

/// Arbitrary operators `W_l` for the jump-operator equations.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpOperatorSet {
    dim: usize,
    operators: Vec<ComplexMatrix>,
}

impl JumpOperatorSet {
    pub fn new(dim: usize, operators: Vec<ComplexMatrix>) -> Result<Self> {
        for w in &operators {
            check_matrix(w)?;
            if w.nrows() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: w.nrows(),
                });
            }
        }
        Ok(Self { dim, operators })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            operators: Vec::new(),
        }
    }

    /// Rank-one operators `W = √w_{n′n} |n⟩⟨n′|`, one per network entry.
    ///
    /// With these, [`rhs_generalized`] reproduces [`rhs_nonlinear_master`]
    /// and [`rhs_lindblad`] reproduces [`rhs_markoff`] without dephasing.
    pub fn from_network(net: &TransitionNetwork) -> Self {
        let operators = net
            .rates()
            .map(|((to, from), w)| (net.ket(from) * net.ket(to).adjoint()).scale(w.sqrt()))
            .collect();
        Self {
            dim: net.dim(),
            operators,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn operators(&self) -> &[ComplexMatrix] {
        &self.operators
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }
}

/// Symmetric pure-dephasing rates `Γ_{n′n} = Γ_{nn′}` in a network basis.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DephasingRates {
    gamma: BTreeMap<(usize, usize), f64>,
}

impl DephasingRates {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets `Γ_{ab} = Γ_{ba} = gamma`.
    pub fn set(&mut self, a: usize, b: usize, gamma: f64) -> Result<()> {
        if a == b {
            return Err(Error::InvalidDephasing {
                a,
                b,
                reason: "pair must join distinct orbitals".into(),
            });
        }
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidDephasing {
                a,
                b,
                reason: format!("negative or non-finite rate {gamma}"),
            });
        }
        self.gamma.insert((a, b), gamma);
        self.gamma.insert((b, a), gamma);
        Ok(())
    }

    /// Builds from ordered entries; when both orientations of a pair appear
    /// they must agree.
    pub fn from_entries(entries: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut out = Self::new();
        let mut seen: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (a, b, g) in entries {
            if let Some(&other) = seen.get(&(b, a)) {
                if other != g {
                    return Err(Error::InvalidDephasing {
                        a,
                        b,
                        reason: format!("asymmetric rates {g} vs {other}"),
                    });
                }
            }
            seen.insert((a, b), g);
            out.set(a, b, g)?;
        }
        Ok(out)
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.gamma.get(&(a, b)).copied().unwrap_or(0.0)
    }

    /// Each unordered pair once, as `(a, b, Γ)` with `a < b`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.gamma
            .iter()
            .filter(|(&(a, b), _)| a < b)
            .map(|(&(a, b), &g)| (a, b, g))
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.values().all(|&g| g == 0.0)
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        match self.gamma.keys().find(|&&(a, b)| a >= dim || b >= dim) {
            Some(&(a, b)) => Err(Error::IndexOutOfRange {
                index: a.max(b),
                dim,
            }),
            None => Ok(()),
        }
    }
}

fn check_dim(expected: usize, m: &ComplexMatrix) -> Result<()> {
    if m.nrows() != expected || m.ncols() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: m.nrows(),
        });
    }
    Ok(())
}

/// `(1/i)[H, ρ] = −i(Hρ − ρH)`.
pub fn liouville(h: &ComplexMatrix, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_same_dim(h, rho)?;
    Ok((h * rho - rho * h) * (-I))
}

/// `(1/i)[H, ρ] + {ρ, A}`: mean-field flow under `H + iA`.
///
/// With `A` negative semidefinite this only removes particles; it cannot
/// populate an empty orbital.
pub fn rhs_meanfield_nonhermitian(
    h: &HermitianOperator,
    a: &HermitianOperator,
    rho: &ComplexMatrix,
) -> Result<ComplexMatrix> {
    check_dim(h.dim(), rho)?;
    check_dim(h.dim(), a.matrix())?;
    Ok(liouville(h.matrix(), rho)? + anticommutator(rho, a.matrix())?)
}

/// `(1/i)[H, ρ] + {ρ, A_p} − {I ± ρ, A_p̄}`.
pub fn rhs_general(
    h: &HermitianOperator,
    a_p: &HermitianOperator,
    a_pbar: &HermitianOperator,
    rho: &ComplexMatrix,
    stats: Statistics,
) -> Result<ComplexMatrix> {
    let d = h.dim();
    check_dim(d, rho)?;
    check_dim(d, a_p.matrix())?;
    check_dim(d, a_pbar.matrix())?;
    Ok(liouville(h.matrix(), rho)? + anticommutator(rho, a_p.matrix())?
        - anticommutator(&stats.identity_plus(rho), a_pbar.matrix())?)
}

/// `ρ̄ = I − ρ`.
pub fn hole_transform(rho: &DensityMatrix) -> Result<DensityMatrix> {
    if rho.statistics() != Statistics::Fermion {
        return Err(Error::WrongStatistics {
            expected: "fermion",
        });
    }
    let d = rho.dim();
    let hole = ComplexMatrix::identity(d, d) - rho.matrix();
    DensityMatrix::new(hole, Statistics::Fermion)
}

/// Hole-picture fermion equation
/// `(1/i)[H, ρ̄] + {ρ̄, A_p̄} − {I − ρ̄, A_p}`.
///
/// For `ρ̄ = I − ρ` this is exactly the negative of [`rhs_general`] on `ρ`,
/// i.e. the particle and hole descriptions evolve consistently.
pub fn rhs_hole_form(
    h: &HermitianOperator,
    a_p: &HermitianOperator,
    a_pbar: &HermitianOperator,
    rho_bar: &ComplexMatrix,
) -> Result<ComplexMatrix> {
    rhs_general(h, a_pbar, a_p, rho_bar, Statistics::Fermion)
}

/// Loss (`a_p`) and gain (`a_pbar`) operators.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationOperators {
    pub a_p: HermitianOperator,
    pub a_pbar: HermitianOperator,
}

/// State-dependent relaxation operators of a transition network:
///
/// ```text
/// A_p̄ = −½ Σ w_{n′n} ⟨n|ρ|n⟩ |n′⟩⟨n′|
/// A_p = −½ Σ w_{n′n} (1 ± ⟨n′|ρ|n′⟩) |n⟩⟨n|
/// ```
pub fn build_relaxation_operators(
    net: &TransitionNetwork,
    rho: &ComplexMatrix,
    stats: Statistics,
) -> Result<RelaxationOperators> {
    check_dim(net.dim(), rho)?;
    let occ = net.occupations(rho);
    let mut loss = vec![0.0; net.dim()];
    let mut gain = vec![0.0; net.dim()];
    for ((to, from), w) in net.rates() {
        if !(w >= 0.0) {
            return Err(Error::NegativeRate { to, from, rate: w });
        }
        loss[from] -= 0.5 * w * stats.blocking(occ[to]);
        gain[to] -= 0.5 * w * occ[from];
    }
    Ok(RelaxationOperators {
        a_p: HermitianOperator::from_hermitized(&net.diagonal_operator(&loss)),
        a_pbar: HermitianOperator::from_hermitized(&net.diagonal_operator(&gain)),
    })
}

/// Nonlinear master equation: [`rhs_general`] with operators from
/// [`build_relaxation_operators`]. Traceless.
pub fn rhs_nonlinear_master(
    h: &HermitianOperator,
    net: &TransitionNetwork,
    rho: &ComplexMatrix,
    stats: Statistics,
) -> Result<ComplexMatrix> {
    let ops = build_relaxation_operators(net, rho, stats)?;
    rhs_general(h, &ops.a_p, &ops.a_pbar, rho, stats)
}

/// Jump-operator generalization
///
/// ```text
/// (1/i)[H, ρ] − ½ Σ_l {ρ, W_l (I ± ρ) W_l†} + ½ Σ_l {I ± ρ, W_l† ρ W_l}
/// ```
pub fn rhs_generalized(
    h: &HermitianOperator,
    jumps: &JumpOperatorSet,
    rho: &ComplexMatrix,
    stats: Statistics,
) -> Result<ComplexMatrix> {
    let d = h.dim();
    check_dim(d, rho)?;
    if jumps.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: jumps.dim(),
        });
    }
    let blocked = stats.identity_plus(rho);
    let mut loss = ComplexMatrix::zeros(d, d);
    let mut gain = ComplexMatrix::zeros(d, d);
    for w in jumps.operators() {
        let w_dag = w.adjoint();
        loss += w * &blocked * &w_dag;
        gain += &w_dag * rho * w;
    }
    Ok(liouville(h.matrix(), rho)? - anticommutator(rho, &loss)?.scale(0.5)
        + anticommutator(&blocked, &gain)?.scale(0.5))
}

/// Linear network equation with pure dephasing:
///
/// ```text
/// (1/i)[H, ρ] − ½ Σ w_{n′n} {ρ, |n⟩⟨n|} + Σ w_{n′n} ⟨n|ρ|n⟩ |n′⟩⟨n′|
///             − Σ_{n≠n′} Γ_{n′n} ⟨n|ρ|n′⟩ |n⟩⟨n′|
/// ```
///
/// Dephasing pairs refer to orbitals of `net`.
pub fn rhs_markoff(
    h: &HermitianOperator,
    net: &TransitionNetwork,
    dephasing: &DephasingRates,
    rho: &ComplexMatrix,
) -> Result<ComplexMatrix> {
    let d = h.dim();
    check_dim(d, rho)?;
    if net.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: net.dim(),
        });
    }
    dephasing.check_dim(d)?;
    let mut out = liouville(h.matrix(), rho)?;
    for ((to, from), w) in net.rates() {
        if w == 0.0 {
            continue;
        }
        let p_from = projector(&net.ket(from));
        let p_to = projector(&net.ket(to));
        let occ_from = crate::operators::expectation(rho, &net.ket(from));
        out -= anticommutator(rho, &p_from)?.scale(0.5 * w);
        out += p_to * (occ_from * w);
    }
    if !dephasing.is_empty() {
        let local = net.to_network_basis(rho);
        let mut damped = ComplexMatrix::zeros(d, d);
        for (a, b, g) in dephasing.pairs() {
            damped[(a, b)] = local[(a, b)] * g;
            damped[(b, a)] = local[(b, a)] * g;
        }
        out -= net.from_network_basis(&damped);
    }
    Ok(out)
}

/// `(1/i)[H, ρ] − ½ Σ_l {ρ, W_l W_l†} + Σ_l W_l† ρ W_l`.
pub fn rhs_lindblad(
    h: &HermitianOperator,
    jumps: &JumpOperatorSet,
    rho: &ComplexMatrix,
) -> Result<ComplexMatrix> {
    let d = h.dim();
    check_dim(d, rho)?;
    if jumps.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: jumps.dim(),
        });
    }
    let mut out = liouville(h.matrix(), rho)?;
    for w in jumps.operators() {
        let w_dag = w.adjoint();
        out -= anticommutator(rho, &(w * &w_dag))?.scale(0.5);
        out += &w_dag * rho * w;
    }
    Ok(out)
}

fn check_rate_matrix(w: &DMatrix<f64>, dim: usize) -> Result<()> {
    if w.nrows() != dim || w.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: w.nrows(),
        });
    }
    for to in 0..dim {
        for from in 0..dim {
            let rate = w[(to, from)];
            if !(rate >= 0.0) || !rate.is_finite() {
                return Err(Error::NegativeRate { to, from, rate });
            }
            if to == from && rate != 0.0 {
                return Err(Error::SelfTransition { index: to });
            }
        }
    }
    Ok(())
}

/// Quasiclassical occupation equation
///
/// ```text
/// df_p/dt = Σ_p′ w_{pp′} (1 ± f_p) f_p′ − Σ_p′ w_{p′p} (1 ± f_p′) f_p
/// ```
///
/// `w[(p, p′)]` is the rate of `p′ → p`, the layout of
/// [`TransitionNetwork::rate_matrix`].
pub fn rhs_quasiclassical(f: &[f64], w: &DMatrix<f64>, stats: Statistics) -> Result<Vec<f64>> {
    let n = f.len();
    check_rate_matrix(w, n)?;
    for (index, &value) in f.iter().enumerate() {
        let upper_ok = stats == Statistics::Boson || value <= 1.0 + OCCUPATION_TOLERANCE;
        if !(value >= -OCCUPATION_TOLERANCE) || !upper_ok || !value.is_finite() {
            return Err(Error::InvalidOccupation { index, value });
        }
    }
    Ok(quasiclassical_unchecked(f, w, stats))
}

fn quasiclassical_unchecked(f: &[f64], w: &DMatrix<f64>, stats: Statistics) -> Vec<f64> {
    let n = f.len();
    (0..n)
        .map(|p| {
            let mut rate = 0.0;
            for q in 0..n {
                if q == p {
                    continue;
                }
                rate += w[(p, q)] * stats.blocking(f[p]) * f[q];
                rate -= w[(q, p)] * stats.blocking(f[q]) * f[p];
            }
            rate
        })
        .collect()
}

/// `A′ = A_p ∓ A_p̄` (`−` bosons, `+` fermions), so that the general equation
/// reads `(1/i)[H, ρ] + {ρ, A′} − 2 A_p̄`.
pub fn rewrite_a_prime(
    a_p: &HermitianOperator,
    a_pbar: &HermitianOperator,
    stats: Statistics,
) -> Result<HermitianOperator> {
    check_dim(a_p.dim(), a_pbar.matrix())?;
    Ok(HermitianOperator::from_hermitized(
        &(a_p.matrix() - a_pbar.matrix().scale(stats.sign())),
    ))
}

/// `(1/i)[H, ρ] + {ρ, A′} − 2 A_p̄`.
pub fn rhs_rewritten(
    h: &HermitianOperator,
    a_prime: &HermitianOperator,
    a_pbar: &HermitianOperator,
    rho: &ComplexMatrix,
) -> Result<ComplexMatrix> {
    let d = h.dim();
    check_dim(d, rho)?;
    check_dim(d, a_prime.matrix())?;
    check_dim(d, a_pbar.matrix())?;
    Ok(liouville(h.matrix(), rho)? + anticommutator(rho, a_prime.matrix())?
        - a_pbar.matrix().scale(2.0))
}

/// Mean-field evolution under `H + iA`.
#[derive(Debug, Clone)]
pub struct MeanFieldNonhermitian {
    pub h: HermitianOperator,
    pub a: HermitianOperator,
}

impl Rhs for MeanFieldNonhermitian {
    fn evaluate(&self, _t: f64, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        rhs_meanfield_nonhermitian(&self.h, &self.a, rho)
    }
}

/// General equation with fixed relaxation operators.
#[derive(Debug, Clone)]
pub struct GeneralEquation {
    pub h: HermitianOperator,
    pub a_p: HermitianOperator,
    pub a_pbar: HermitianOperator,
    pub statistics: Statistics,
}

impl Rhs for GeneralEquation {
    fn evaluate(&self, _t: f64, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        rhs_general(&self.h, &self.a_p, &self.a_pbar, rho, self.statistics)
    }
}

/// Hole-picture companion of [`GeneralEquation`] (fermions), acting on `ρ̄`.
#[derive(Debug, Clone)]
pub struct HoleEquation {
    pub h: HermitianOperator,
    pub a_p: HermitianOperator,
    pub a_pbar: HermitianOperator,
}

impl Rhs for HoleEquation {
    fn evaluate(&self, _t: f64, rho_bar: &ComplexMatrix) -> Result<ComplexMatrix> {
        rhs_hole_form(&self.h, &self.a_p, &self.a_pbar, rho_bar)
    }
}

/// Nonlinear master equation with rates from a [`RateProvider`].
#[derive(Debug, Clone)]
pub struct NonlinearMaster<R = TransitionNetwork> {
    pub h: HermitianOperator,
    pub rates: R,
    pub statistics: Statistics,
}

impl<R: RateProvider> Rhs for NonlinearMaster<R> {
    fn evaluate(&self, t: f64, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        rhs_nonlinear_master(&self.h, &self.rates.network_at(t), rho, self.statistics)
    }
}

/// Hole-picture companion of the fermion [`NonlinearMaster`]: evolves
/// `ρ̄`, building the relaxation operators from `ρ = I − ρ̄`.
#[derive(Debug, Clone)]
pub struct NonlinearHoleMaster<R = TransitionNetwork> {
    pub h: HermitianOperator,
    pub rates: R,
}

impl<R: RateProvider> Rhs for NonlinearHoleMaster<R> {
    fn evaluate(&self, t: f64, rho_bar: &ComplexMatrix) -> Result<ComplexMatrix> {
        let d = rho_bar.nrows();
        let rho = ComplexMatrix::identity(d, d) - rho_bar;
        let ops = build_relaxation_operators(&self.rates.network_at(t), &rho, Statistics::Fermion)?;
        rhs_hole_form(&self.h, &ops.a_p, &ops.a_pbar, rho_bar)
    }
}

#[derive(Debug, Clone)]
pub struct GeneralizedJumps {
    pub h: HermitianOperator,
    pub jumps: JumpOperatorSet,
    pub statistics: Statistics,
}

impl Rhs for GeneralizedJumps {
    fn evaluate(&self, _t: f64, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        rhs_generalized(&self.h, &self.jumps, rho, self.statistics)
    }
}

/// Hole-picture companion of fermion [`GeneralizedJumps`]: with
/// `A_p = −½ Σ W(I − ρ)W†` and `A_p̄ = −½ Σ W†ρW` evaluated at `ρ = I − ρ̄`.
#[derive(Debug, Clone)]
pub struct GeneralizedJumpsHole {
    pub h: HermitianOperator,
    pub jumps: JumpOperatorSet,
}

impl Rhs for GeneralizedJumpsHole {
    fn evaluate(&self, _t: f64, rho_bar: &ComplexMatrix) -> Result<ComplexMatrix> {
        let d = rho_bar.nrows();
        let rho = ComplexMatrix::identity(d, d) - rho_bar;
        let mut a_p = ComplexMatrix::zeros(d, d);
        let mut a_pbar = ComplexMatrix::zeros(d, d);
        for w in self.jumps.operators() {
            let w_dag = w.adjoint();
            a_p -= (w * rho_bar * &w_dag).scale(0.5);
            a_pbar -= (&w_dag * &rho * w).scale(0.5);
        }
        rhs_hole_form(
            &self.h,
            &HermitianOperator::from_hermitized(&a_p),
            &HermitianOperator::from_hermitized(&a_pbar),
            rho_bar,
        )
    }
}

#[derive(Debug, Clone)]
pub struct Markoff<R = TransitionNetwork> {
    pub h: HermitianOperator,
    pub rates: R,
    pub dephasing: DephasingRates,
}

impl<R: RateProvider> Rhs for Markoff<R> {
    fn evaluate(&self, t: f64, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        rhs_markoff(&self.h, &self.rates.network_at(t), &self.dephasing, rho)
    }
}

#[derive(Debug, Clone)]
pub struct Lindblad {
    pub h: HermitianOperator,
    pub jumps: JumpOperatorSet,
}

impl Rhs for Lindblad {
    fn evaluate(&self, _t: f64, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        rhs_lindblad(&self.h, &self.jumps, rho)
    }
}

/// Quasiclassical equation acting on the diagonal of the state; off-diagonal
/// entries are ignored and the derivative is diagonal.
#[derive(Debug, Clone)]
pub struct Quasiclassical {
    pub rates: DMatrix<f64>,
    pub statistics: Statistics,
}

impl Rhs for Quasiclassical {
    fn evaluate(&self, _t: f64, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        let f: Vec<f64> = (0..rho.nrows()).map(|p| rho[(p, p)].re).collect();
        let df = rhs_quasiclassical(&f, &self.rates, self.statistics)?;
        Ok(ComplexMatrix::from_diagonal(&ComplexVector::from_iterator(
            df.len(),
            df.iter().map(|&x| Complex64::new(x, 0.0)),
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{
        basis_ket, diagonal_matrix, expectation, hermiticity_defect, real_trace,
    };
    use crate::test_util::{random_hermitian, random_network, random_state, rng};
    use proptest::prelude::*;
    use rand::Rng;

    fn phi_state(dim: usize) -> ComplexVector {
        // normalized, not a basis vector
        let v = ComplexVector::from_fn(dim, |i, _| Complex64::new(1.0 + i as f64, 0.5 * i as f64));
        let n = v.norm();
        v.unscale(n)
    }

    #[test]
    fn sign_is_minus_for_fermions_plus_for_bosons() {
        assert_eq!(Statistics::Fermion.sign(), -1.0);
        assert_eq!(Statistics::Boson.sign(), 1.0);
        assert_eq!(Statistics::Fermion.blocking(1.0), 0.0);
        assert_eq!(Statistics::Boson.blocking(3.0), 4.0);
    }

    #[test]
    fn meanfield_loss_rate() {
        let phi = phi_state(3);
        let h = HermitianOperator::zeros(3);
        let a = HermitianOperator::scaled_projector(&phi, -0.5);
        let rho = projector(&phi);
        let d = rhs_meanfield_nonhermitian(&h, &a, &rho).unwrap();
        assert!((expectation(&d, &phi).re + 1.0).abs() < 1e-14);
    }

    #[test]
    fn meanfield_without_relaxation_is_traceless() {
        let mut r = rng(3);
        let h = HermitianOperator::new(random_hermitian(&mut r, 4)).unwrap();
        let rho = random_state(&mut r, 4, Statistics::Fermion);
        let d = rhs_meanfield_nonhermitian(&h, &HermitianOperator::zeros(4), &rho).unwrap();
        assert!(d.trace().norm() < 1e-14);
    }

    #[test]
    fn meanfield_cannot_fill_empty_orbital() {
        let phi = phi_state(3);
        let h = HermitianOperator::zeros(3);
        let a = HermitianOperator::scaled_projector(&phi, -0.5);
        let q = ComplexMatrix::identity(3, 3) - projector(&phi);
        let rho = &q * diagonal_matrix(&[0.4, 0.7, 0.2]) * &q;
        let d = rhs_meanfield_nonhermitian(&h, &a, &rho).unwrap();
        assert!(expectation(&d, &phi).norm() < 1e-15);
    }

    #[test]
    fn general_fermion_gain_is_pauli_blocked() {
        let phi = phi_state(3);
        let z = HermitianOperator::zeros(3);
        let a_pbar = HermitianOperator::scaled_projector(&phi, -0.5 * 0.8);
        let rho = diagonal_matrix(&[0.3, 0.6, 0.1]);
        let n = expectation(&rho, &phi).re;
        let d = rhs_general(&z, &z, &a_pbar, &rho, Statistics::Fermion).unwrap();
        assert!((expectation(&d, &phi).re - 0.8 * (1.0 - n)).abs() < 1e-14);
    }

    #[test]
    fn general_boson_gain_is_enhanced() {
        let phi = phi_state(3);
        let z = HermitianOperator::zeros(3);
        let a_pbar = HermitianOperator::scaled_projector(&phi, -0.5 * 1.3);
        let rho = diagonal_matrix(&[2.0, 0.6, 1.1]);
        let n = expectation(&rho, &phi).re;
        let d = rhs_general(&z, &z, &a_pbar, &rho, Statistics::Boson).unwrap();
        assert!((expectation(&d, &phi).re - 1.3 * (1.0 + n)).abs() < 1e-13);
    }

    #[test]
    fn general_without_relaxation_is_liouville() {
        let mut r = rng(4);
        let h = HermitianOperator::new(random_hermitian(&mut r, 3)).unwrap();
        let z = HermitianOperator::zeros(3);
        let rho = random_state(&mut r, 3, Statistics::Boson);
        let d = rhs_general(&h, &z, &z, &rho, Statistics::Boson).unwrap();
        assert_eq!(d, liouville(h.matrix(), &rho).unwrap());
    }

    #[test]
    fn hole_transform_examples() {
        let f = Statistics::Fermion;
        let empty = DensityMatrix::zeros(2, f);
        assert_eq!(hole_transform(&empty).unwrap().matrix(), &ComplexMatrix::identity(2, 2));
        let full = DensityMatrix::diagonal(&[1.0, 1.0], f).unwrap();
        assert_eq!(max_abs(hole_transform(&full).unwrap().matrix()), 0.0);
        let rho = DensityMatrix::diagonal(&[0.3, 0.9], f).unwrap();
        let hole = hole_transform(&rho).unwrap();
        assert!(max_abs(&(hole.matrix() - diagonal_matrix(&[0.7, 0.1]))) < 1e-15);
        let back = hole_transform(&hole).unwrap();
        assert!(max_abs(&(back.matrix() - rho.matrix())) < 1e-15);
        let boson = DensityMatrix::diagonal(&[0.3], Statistics::Boson).unwrap();
        assert!(matches!(hole_transform(&boson), Err(Error::WrongStatistics { .. })));
    }

    #[test]
    fn hole_form_examples() {
        let phi = phi_state(2);
        let z = HermitianOperator::zeros(2);
        let rho_bar = diagonal_matrix(&[0.25, 0.5]);
        let nbar = expectation(&rho_bar, &phi).re;
        // particle loss is hole gain
        let a_p = HermitianOperator::scaled_projector(&phi, -0.5 * 0.7);
        let d = rhs_hole_form(&z, &a_p, &z, &rho_bar).unwrap();
        assert!((expectation(&d, &phi).re - 0.7 * (1.0 - nbar)).abs() < 1e-14);
        // particle gain is hole loss
        let a_pbar = HermitianOperator::scaled_projector(&phi, -0.5 * 0.9);
        let d = rhs_hole_form(&z, &z, &a_pbar, &rho_bar).unwrap();
        assert!((expectation(&d, &phi).re + 0.9 * nbar).abs() < 1e-14);
        let d = rhs_hole_form(&z, &z, &z, &rho_bar).unwrap();
        assert_eq!(max_abs(&d), 0.0);
    }

    #[test]
    fn relaxation_operators_single_transition() {
        let net = TransitionNetwork::from_rates(2, [(1, 0, 2.0)]).unwrap();
        let rho = diagonal_matrix(&[1.0, 0.0]);
        let ops = build_relaxation_operators(&net, &rho, Statistics::Fermion).unwrap();
        assert!(max_abs(&(ops.a_pbar.matrix() - diagonal_matrix(&[0.0, -1.0]))) < 1e-15);
        assert!(max_abs(&(ops.a_p.matrix() - diagonal_matrix(&[-1.0, 0.0]))) < 1e-15);

        let rho = diagonal_matrix(&[1.0, 3.0]);
        let ops = build_relaxation_operators(&net, &rho, Statistics::Boson).unwrap();
        assert!(max_abs(&(ops.a_p.matrix() - diagonal_matrix(&[-0.5 * 2.0 * 4.0, 0.0]))) < 1e-15);

        let zero = TransitionNetwork::new(2);
        let ops = build_relaxation_operators(&zero, &rho, Statistics::Boson).unwrap();
        assert_eq!(max_abs(ops.a_p.matrix()), 0.0);
        assert_eq!(max_abs(ops.a_pbar.matrix()), 0.0);
    }

    #[test]
    fn network_validation() {
        let mut net = TransitionNetwork::new(3);
        assert!(matches!(net.add_rate(1, 0, -1.0), Err(Error::NegativeRate { to: 1, from: 0, .. })));
        assert!(matches!(net.add_rate(1, 1, 1.0), Err(Error::SelfTransition { .. })));
        assert!(matches!(net.add_rate(3, 1, 1.0), Err(Error::IndexOutOfRange { .. })));
        let skew = crate::operators::real_matrix(&[&[1.0, 0.1], &[0.0, 1.0]]);
        assert!(matches!(TransitionNetwork::with_basis(skew), Err(Error::NotOrthonormal { .. })));
    }

    #[test]
    fn two_state_nonlinear_rates() {
        let h = HermitianOperator::zeros(2);
        let net = TransitionNetwork::from_rates(2, [(1, 0, 0.7)]).unwrap();
        for stats in [Statistics::Fermion, Statistics::Boson] {
            let d = rhs_nonlinear_master(&h, &net, &diagonal_matrix(&[1.0, 0.0]), stats).unwrap();
            assert!((d[(1, 1)].re - 0.7).abs() < 1e-15);
            assert!((d[(0, 0)].re + 0.7).abs() < 1e-15);
        }
        let d = rhs_nonlinear_master(&h, &net, &diagonal_matrix(&[0.6, 1.0]), Statistics::Fermion)
            .unwrap();
        assert!(d[(1, 1)].norm() < 1e-15);
        let empty = TransitionNetwork::new(2);
        let mut r = rng(5);
        let h = HermitianOperator::new(random_hermitian(&mut r, 2)).unwrap();
        let rho = random_state(&mut r, 2, Statistics::Fermion);
        let d = rhs_nonlinear_master(&h, &empty, &rho, Statistics::Fermion).unwrap();
        assert!(max_abs(&(d - liouville(h.matrix(), &rho).unwrap())) < 1e-15);
    }

    #[test]
    fn empty_jump_sets_give_liouville() {
        let mut r = rng(6);
        let h = HermitianOperator::new(random_hermitian(&mut r, 3)).unwrap();
        let rho = random_state(&mut r, 3, Statistics::Boson);
        let l = liouville(h.matrix(), &rho).unwrap();
        let jumps = JumpOperatorSet::empty(3);
        assert_eq!(rhs_generalized(&h, &jumps, &rho, Statistics::Boson).unwrap(), l);
        assert_eq!(rhs_lindblad(&h, &jumps, &rho).unwrap(), l);
    }

    #[test]
    fn markoff_pure_dephasing() {
        let h = HermitianOperator::zeros(2);
        let net = TransitionNetwork::new(2);
        let mut deph = DephasingRates::new();
        deph.set(0, 1, 0.4).unwrap();
        let rho = crate::operators::real_matrix(&[&[0.6, 0.3], &[0.3, 0.4]]);
        let d = rhs_markoff(&h, &net, &deph, &rho).unwrap();
        assert!((d[(0, 1)].re + 0.4 * 0.3).abs() < 1e-15);
        assert!((d[(1, 0)].re + 0.4 * 0.3).abs() < 1e-15);
        assert_eq!(d[(0, 0)].norm(), 0.0);
        assert_eq!(d[(1, 1)].norm(), 0.0);
    }

    #[test]
    fn markoff_single_transition_and_linearity() {
        let h = HermitianOperator::zeros(2);
        let net = TransitionNetwork::from_rates(2, [(1, 0, 1.5)]).unwrap();
        let deph = DephasingRates::new();
        let d = rhs_markoff(&h, &net, &deph, &diagonal_matrix(&[1.0, 0.0])).unwrap();
        assert!((d[(1, 1)].re - 1.5).abs() < 1e-15);
        let d = rhs_markoff(&h, &net, &deph, &ComplexMatrix::zeros(2, 2)).unwrap();
        assert_eq!(max_abs(&d), 0.0);
    }

    #[test]
    fn dephasing_validation() {
        let mut deph = DephasingRates::new();
        assert!(deph.set(1, 1, 1.0).is_err());
        assert!(deph.set(0, 1, -1.0).is_err());
        assert!(DephasingRates::from_entries([(0, 1, 1.0), (1, 0, 2.0)]).is_err());
        let ok = DephasingRates::from_entries([(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        assert_eq!(ok.get(1, 0), 1.0);
        assert_eq!(ok.pairs().count(), 1);
    }

    #[test]
    fn quasiclassical_examples() {
        let mut w = DMatrix::zeros(2, 2);
        w[(0, 1)] = 1.0;
        w[(1, 0)] = 1.0;
        let df = rhs_quasiclassical(&[1.0, 0.0], &w, Statistics::Fermion).unwrap();
        assert_eq!(df, vec![-1.0, 1.0]);
        // detailed balance: w12 f2 (1 ± f1) = w21 f1 (1 ± f2)
        let mut w = DMatrix::zeros(2, 2);
        w[(0, 1)] = 2.0;
        w[(1, 0)] = 1.0;
        for (stats, f) in [
            (Statistics::Fermion, [2.0 / 3.0, 0.5]),
            (Statistics::Boson, [2.0, 0.5]),
        ] {
            let df = rhs_quasiclassical(&f, &w, stats).unwrap();
            assert!(df.iter().all(|x| x.abs() < 1e-15), "{stats:?}: {df:?}");
        }
        let df = rhs_quasiclassical(&[0.3, 0.8], &DMatrix::zeros(2, 2), Statistics::Fermion).unwrap();
        assert_eq!(df, vec![0.0, 0.0]);
    }

    #[test]
    fn quasiclassical_rejects_bad_input() {
        let mut w = DMatrix::zeros(2, 2);
        w[(0, 1)] = -1.0;
        assert!(matches!(
            rhs_quasiclassical(&[0.1, 0.2], &w, Statistics::Boson),
            Err(Error::NegativeRate { .. })
        ));
        let w = DMatrix::zeros(2, 2);
        assert!(rhs_quasiclassical(&[1.2, 0.2], &w, Statistics::Fermion).is_err());
        assert!(rhs_quasiclassical(&[1.2, 0.2], &w, Statistics::Boson).is_ok());
        assert!(rhs_quasiclassical(&[-0.1, 0.2], &w, Statistics::Boson).is_err());
    }

    #[test]
    fn a_prime_examples() {
        let mut r = rng(7);
        let x = HermitianOperator::new(random_hermitian(&mut r, 3)).unwrap();
        let z = HermitianOperator::zeros(3);
        for stats in [Statistics::Fermion, Statistics::Boson] {
            let a = rewrite_a_prime(&x, &z, stats).unwrap();
            assert_eq!(a.matrix(), x.matrix());
        }
        let a = rewrite_a_prime(&x, &x, Statistics::Fermion).unwrap();
        assert!(max_abs(&(a.matrix() - x.matrix().scale(2.0))) < 1e-15);
        let a = rewrite_a_prime(&x, &x, Statistics::Boson).unwrap();
        assert!(max_abs(a.matrix()) < 1e-15);
    }

    #[test]
    fn dimension_mismatches_are_reported() {
        let h = HermitianOperator::zeros(2);
        let rho = ComplexMatrix::zeros(3, 3);
        assert!(rhs_meanfield_nonhermitian(&h, &h, &rho).is_err());
        assert!(rhs_general(&h, &h, &h, &rho, Statistics::Fermion).is_err());
        assert!(rhs_nonlinear_master(&h, &TransitionNetwork::new(2), &rho, Statistics::Fermion).is_err());
        assert!(rhs_lindblad(&h, &JumpOperatorSet::empty(3), &ComplexMatrix::zeros(2, 2)).is_err());
        assert!(JumpOperatorSet::new(2, vec![ComplexMatrix::zeros(3, 3)]).is_err());
    }

    #[test]
    fn modulated_rates_scale_with_time() {
        let base = TransitionNetwork::from_rates(2, [(1, 0, 1.0)]).unwrap();
        let eq = NonlinearMaster {
            h: HermitianOperator::zeros(2),
            rates: ModulatedRates { base, envelope: |t: f64| 2.0 * t },
            statistics: Statistics::Boson,
        };
        let d = eq.evaluate(1.5, &diagonal_matrix(&[1.0, 0.0])).unwrap();
        assert!((d[(1, 1)].re - 3.0).abs() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn outputs_are_hermitian_and_traceless(seed in any::<u64>(), dim in 2usize..7, boson in any::<bool>()) {
            let stats = if boson { Statistics::Boson } else { Statistics::Fermion };
            let mut r = rng(seed);
            let h = HermitianOperator::new(random_hermitian(&mut r, dim)).unwrap();
            let net = random_network(&mut r, dim);
            let rho = random_state(&mut r, dim, stats);
            let jumps = JumpOperatorSet::new(dim, (0..3).map(|_| crate::test_util::random_complex(&mut r, dim)).collect()).unwrap();
            let outs = [
                rhs_nonlinear_master(&h, &net, &rho, stats).unwrap(),
                rhs_generalized(&h, &jumps, &rho, stats).unwrap(),
                rhs_lindblad(&h, &jumps, &rho).unwrap(),
                rhs_markoff(&h, &net, &DephasingRates::new(), &rho).unwrap(),
            ];
            for d in &outs {
                prop_assert!(hermiticity_defect(d) <= 1e-12);
                prop_assert!(real_trace(d).abs() <= 1e-12);
            }
        }

        #[test]
        fn particle_hole_duality(seed in any::<u64>(), dim in 1usize..7) {
            let mut r = rng(seed);
            let h = HermitianOperator::new(random_hermitian(&mut r, dim)).unwrap();
            let a_p = HermitianOperator::new(random_hermitian(&mut r, dim)).unwrap();
            let a_pbar = HermitianOperator::new(random_hermitian(&mut r, dim)).unwrap();
            let rho = random_state(&mut r, dim, Statistics::Fermion);
            let hole = ComplexMatrix::identity(dim, dim) - &rho;
            let lhs = rhs_general(&h, &a_p, &a_pbar, &rho, Statistics::Fermion).unwrap();
            let rhs = rhs_hole_form(&h, &a_p, &a_pbar, &hole).unwrap();
            prop_assert!(max_abs(&(lhs + rhs)) <= 1e-12);
        }

        #[test]
        fn homogeneous_reduction(seed in any::<u64>(), dim in 2usize..8, boson in any::<bool>()) {
            let stats = if boson { Statistics::Boson } else { Statistics::Fermion };
            let mut r = rng(seed);
            let mut net = TransitionNetwork::new(dim);
            for to in 0..dim {
                for from in 0..dim {
                    if to != from { net.add_rate(to, from, r.gen_range(0.0..1.0)).unwrap(); }
                }
            }
            let f: Vec<f64> = (0..dim).map(|_| r.gen_range(0.0..1.0)).collect();
            let energies: Vec<f64> = (0..dim).map(|_| r.gen_range(-1.0..1.0)).collect();
            let h = HermitianOperator::diagonal(&energies);
            let d = rhs_nonlinear_master(&h, &net, &diagonal_matrix(&f), stats).unwrap();
            let df = rhs_quasiclassical(&f, &net.rate_matrix(), stats).unwrap();
            for p in 0..dim {
                prop_assert!((d[(p, p)].re - df[p]).abs() <= 1e-12);
            }
            prop_assert!(df.iter().sum::<f64>().abs() <= 1e-12);
        }

        #[test]
        fn meanfield_cannot_populate_empty_orbital(seed in any::<u64>(), dim in 2usize..7) {
            let mut r = rng(seed);
            let h = HermitianOperator::new(random_hermitian(&mut r, dim)).unwrap();
            let a = HermitianOperator::new(random_hermitian(&mut r, dim)).unwrap();
            let u = crate::test_util::random_unitary(&mut r, dim);
            let phi: ComplexVector = u.column(0).into_owned();
            let q = ComplexMatrix::identity(dim, dim) - projector(&phi);
            let rho = &q * random_state(&mut r, dim, Statistics::Boson) * &q;
            let d = rhs_meanfield_nonhermitian(&h, &a, &rho).unwrap();
            prop_assert!(expectation(&d, &phi).norm() <= 1e-13);
        }
    }

    #[test]
    fn rank_one_jumps_match_network_basis_vectors() {
        let net = TransitionNetwork::from_rates(3, [(2, 0, 4.0)]).unwrap();
        let jumps = JumpOperatorSet::from_network(&net);
        let expected = basis_ket(3, 0) * basis_ket(3, 2).adjoint() * Complex64::new(2.0, 0.0);
        assert_eq!(jumps.operators()[0], expected);
    }
}
