//! Exact second-quantized master equation on small Fock spaces.
//!
//! Used as an independent check of the one-particle equations: the many-body
//! density matrix `ρ_S` evolves under a Lindblad equation with jump operators
//! `√w_{n′n} c†_{n′} c_n`, and its one-particle reduction
//! `⟨n|ρ_p|n′⟩ = Tr c†_n c_{n′} ρ_S` is compared against the reduced equations.
//!
//! Basis ordering: a Fock state with occupations `(n_0, n_1, …)` has index
//! `Σ_k n_k L^k` with `L = 2` for fermions and `L = cutoff + 1` for bosons
//! (little-endian mixed radix). The fermionic operator `c_k` carries the
//! parity sign of the modes `j < k`.

use crate::dynamics::{rhs_quasiclassical, Statistics, TransitionNetwork};
use crate::error::{Error, Result};
use crate::integrator::Rhs;
use crate::operators::{
    check_matrix, eigh_unchecked, hermiticity_defect, max_abs, ComplexMatrix, DensityMatrix,
    DEFAULT_TOLERANCE, ONE,
};
use num_complex::Complex64;
use serde::Serialize;

pub const MAX_MODES: usize = 4;
pub const MAX_FOCK_DIM: usize = 10_000;
pub const DEFAULT_BOSON_CUTOFF: usize = 4;

/// Population in a mode's top occupancy level above which a boson run is
/// flagged as contaminated by the cutoff.
pub const CUTOFF_CONTAMINATION: f64 = 0.01;

/// Off-diagonal / factorization slack for recognizing product states.
const PRODUCT_TOLERANCE: f64 = 1e-12;

/// Noninteracting identical particles in `modes` orbitals, coupled to a
/// reservoir through transition rates.
#[derive(Debug, Clone, PartialEq)]
pub struct FockModel {
    pub statistics: Statistics,
    pub energies: Vec<f64>,
    /// Max occupancy per mode; bosons only.
    pub boson_cutoff: usize,
    /// Computational-basis network over the modes.
    pub rates: TransitionNetwork,
}

impl FockModel {
    pub fn new(statistics: Statistics, energies: Vec<f64>, rates: TransitionNetwork) -> Result<Self> {
        let model = Self {
            statistics,
            energies,
            boson_cutoff: DEFAULT_BOSON_CUTOFF,
            rates,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn with_cutoff(mut self, cutoff: usize) -> Result<Self> {
        self.boson_cutoff = cutoff;
        self.validate()?;
        Ok(self)
    }

    pub fn modes(&self) -> usize {
        self.energies.len()
    }

    pub fn validate(&self) -> Result<()> {
        let modes = self.modes();
        if modes == 0 {
            return Err(Error::InvalidInput("a Fock model needs at least one mode".into()));
        }
        if modes > MAX_MODES {
            return Err(Error::Resource(format!(
                "{modes} modes requested, at most {MAX_MODES} supported"
            )));
        }
        if let Some(e) = self.energies.iter().find(|e| !e.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite mode energy {e}")));
        }
        if self.rates.dim() != modes {
            return Err(Error::DimensionMismatch {
                expected: modes,
                found: self.rates.dim(),
            });
        }
        if self.rates.basis().is_some() {
            return Err(Error::InvalidInput(
                "Fock-model rates must refer to the mode basis".into(),
            ));
        }
        if self.statistics == Statistics::Boson && self.boson_cutoff == 0 {
            return Err(Error::InvalidInput("boson cutoff must be at least 1".into()));
        }
        let dim = (self.levels() as f64).powi(modes as i32);
        if dim > MAX_FOCK_DIM as f64 {
            return Err(Error::Resource(format!(
                "Fock dimension {dim} exceeds {MAX_FOCK_DIM}"
            )));
        }
        Ok(())
    }

    /// Occupancy levels per mode.
    pub fn levels(&self) -> usize {
        match self.statistics {
            Statistics::Fermion => 2,
            Statistics::Boson => self.boson_cutoff + 1,
        }
    }

    pub fn fock_dim(&self) -> usize {
        self.levels().pow(self.modes() as u32)
    }

    /// Occupation numbers of basis state `index`.
    pub fn occupations_of(&self, mut index: usize) -> Vec<usize> {
        let levels = self.levels();
        (0..self.modes())
            .map(|_| {
                let n = index % levels;
                index /= levels;
                n
            })
            .collect()
    }

    pub fn index_of(&self, occupations: &[usize]) -> usize {
        let levels = self.levels();
        occupations.iter().rev().fold(0, |acc, &n| acc * levels + n)
    }
}

/// Annihilation operators `c_0, …, c_{modes−1}` on the Fock space.
pub fn build_mode_operators(model: &FockModel) -> Result<Vec<ComplexMatrix>> {
    model.validate()?;
    let dim = model.fock_dim();
    let levels = model.levels();
    let mut ops = Vec::with_capacity(model.modes());
    for k in 0..model.modes() {
        let stride = levels.pow(k as u32);
        let mut c = ComplexMatrix::zeros(dim, dim);
        for index in 0..dim {
            let occ = model.occupations_of(index);
            let n = occ[k];
            if n == 0 {
                continue;
            }
            let amplitude = match model.statistics {
                Statistics::Fermion => {
                    let parity: usize = occ[..k].iter().sum();
                    if parity % 2 == 0 {
                        1.0
                    } else {
                        -1.0
                    }
                }
                Statistics::Boson => (n as f64).sqrt(),
            };
            c[(index - stride, index)] = Complex64::new(amplitude, 0.0);
        }
        ops.push(c);
    }
    Ok(ops)
}

/// Normalized many-body density matrix `ρ_S`.
#[derive(Debug, Clone, PartialEq)]
pub struct ManyBodyState {
    rho: ComplexMatrix,
}

impl ManyBodyState {
    /// Validates hermiticity, positivity, and unit trace.
    pub fn new(model: &FockModel, rho: ComplexMatrix) -> Result<Self> {
        check_matrix(&rho)?;
        if rho.nrows() != model.fock_dim() {
            return Err(Error::DimensionMismatch {
                expected: model.fock_dim(),
                found: rho.nrows(),
            });
        }
        let defect = hermiticity_defect(&rho);
        if defect > DEFAULT_TOLERANCE {
            return Err(Error::NotHermitian {
                defect,
                tolerance: DEFAULT_TOLERANCE,
            });
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > DEFAULT_TOLERANCE || tr.im.abs() > DEFAULT_TOLERANCE {
            return Err(Error::InvalidTrace { re: tr.re, im: tr.im });
        }
        let min = eigh_unchecked(&rho).min();
        if min < -DEFAULT_TOLERANCE {
            return Err(Error::NotPositive { min_eigenvalue: min });
        }
        Ok(Self { rho })
    }

    /// `|ψ⟩⟨ψ|` for normalized amplitudes in the Fock basis.
    pub fn pure(model: &FockModel, amplitudes: &[Complex64]) -> Result<Self> {
        let psi = nalgebra::DVector::from_column_slice(amplitudes);
        Self::new(model, &psi * psi.adjoint())
    }

    /// Fock basis state with the given occupations.
    pub fn basis_state(model: &FockModel, occupations: &[usize]) -> Result<Self> {
        if occupations.len() != model.modes() || occupations.iter().any(|&n| n >= model.levels()) {
            return Err(Error::InvalidState(format!(
                "occupations {occupations:?} do not fit the model"
            )));
        }
        let mut rho = ComplexMatrix::zeros(model.fock_dim(), model.fock_dim());
        let i = model.index_of(occupations);
        rho[(i, i)] = ONE;
        Ok(Self { rho })
    }

    /// Uncorrelated, Fock-diagonal state from per-mode level distributions.
    pub fn product(model: &FockModel, distributions: &[Vec<f64>]) -> Result<Self> {
        if distributions.len() != model.modes() {
            return Err(Error::DimensionMismatch {
                expected: model.modes(),
                found: distributions.len(),
            });
        }
        for (k, p) in distributions.iter().enumerate() {
            let total: f64 = p.iter().sum();
            if p.len() > model.levels() || p.iter().any(|&x| !(x >= 0.0)) || (total - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidState(format!(
                    "mode {k}: level distribution {p:?} is not a probability vector over {} levels",
                    model.levels()
                )));
            }
        }
        let dim = model.fock_dim();
        let mut rho = ComplexMatrix::zeros(dim, dim);
        for index in 0..dim {
            let prob: f64 = model
                .occupations_of(index)
                .iter()
                .zip(distributions)
                .map(|(&n, p)| p.get(n).copied().unwrap_or(0.0))
                .product();
            rho[(index, index)] = Complex64::new(prob, 0.0);
        }
        Ok(Self { rho })
    }

    /// Fermion product state with mode occupations `f_k ∈ [0, 1]`.
    pub fn fermion_product(model: &FockModel, occupations: &[f64]) -> Result<Self> {
        if model.statistics != Statistics::Fermion {
            return Err(Error::WrongStatistics { expected: "fermion" });
        }
        let dists: Vec<Vec<f64>> = occupations.iter().map(|&f| vec![1.0 - f, f]).collect();
        Self::product(model, &dists)
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.rho
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.rho
    }
}

/// Result of [`closure_residual_at_t0`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosureReport {
    /// `max_n |exact − reduced|`.
    pub residual: f64,
    /// `d⟨n|ρ_p|n⟩/dt` from the many-body equation.
    pub exact: Vec<f64>,
    /// Same from the semiclassical closure on the reduced occupations.
    pub reduced: Vec<f64>,
    /// False flags a correlated or coherent initial state; the residual then
    /// measures the closure error rather than roundoff.
    pub product_state: bool,
    pub cutoff_contaminated: bool,
}

/// Prebuilt operators for one [`FockModel`].
#[derive(Debug, Clone)]
pub struct FockOracle {
    model: FockModel,
    modes: Vec<ComplexMatrix>,
    numbers: Vec<ComplexMatrix>,
    hamiltonian: ComplexMatrix,
    jumps: Vec<ComplexMatrix>,
}

impl FockOracle {
    pub fn new(model: FockModel) -> Result<Self> {
        let modes = build_mode_operators(&model)?;
        let numbers: Vec<ComplexMatrix> = modes.iter().map(|c| c.adjoint() * c).collect();
        let dim = model.fock_dim();
        let mut hamiltonian = ComplexMatrix::zeros(dim, dim);
        for (eps, n) in model.energies.iter().zip(&numbers) {
            hamiltonian += n.scale(*eps);
        }
        let jumps = model
            .rates
            .rates()
            .filter(|&(_, w)| w > 0.0)
            .map(|((to, from), w)| (modes[to].adjoint() * &modes[from]).scale(w.sqrt()))
            .collect();
        Ok(Self {
            model,
            modes,
            numbers,
            hamiltonian,
            jumps,
        })
    }

    pub fn model(&self) -> &FockModel {
        &self.model
    }

    pub fn mode_operators(&self) -> &[ComplexMatrix] {
        &self.modes
    }

    /// `H_S = Σ ε_n c†_n c_n`.
    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.hamiltonian
    }

    /// `N = Σ c†_n c_n`.
    pub fn total_number(&self) -> ComplexMatrix {
        let dim = self.model.fock_dim();
        self.numbers
            .iter()
            .fold(ComplexMatrix::zeros(dim, dim), |acc, n| acc + n)
    }

    /// `(1/i)[H_S, ρ] − ½ Σ {𝒜†𝒜, ρ} + Σ 𝒜 ρ 𝒜†`.
    pub fn rhs(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        let dim = self.model.fock_dim();
        if rho.nrows() != dim || rho.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: rho.nrows(),
            });
        }
        let h = &self.hamiltonian;
        let mut out = (h * rho - rho * h) * Complex64::new(0.0, -1.0);
        for a in &self.jumps {
            let a_dag = a.adjoint();
            let ada = &a_dag * a;
            out -= (&ada * rho + rho * &ada).scale(0.5);
            out += a * rho * &a_dag;
        }
        Ok(out)
    }

    /// `⟨n|ρ_p|n′⟩ = Tr c†_n c_{n′} ρ_S`.
    pub fn reduce_matrix(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let m = self.model.modes();
        ComplexMatrix::from_fn(m, m, |n, n2| {
            (self.modes[n].adjoint() * &self.modes[n2] * rho).trace()
        })
    }

    pub fn reduce_one_particle(&self, state: &ManyBodyState) -> DensityMatrix {
        DensityMatrix::from_trusted(&self.reduce_matrix(state.matrix()), self.model.statistics)
    }

    /// `d⟨n|ρ_p|n⟩/dt = Tr N_n · dρ_S/dt`.
    pub fn occupation_derivatives(&self, rho: &ComplexMatrix) -> Result<Vec<f64>> {
        let d = self.rhs(rho)?;
        Ok(self.numbers.iter().map(|n| (n * &d).trace().re).collect())
    }

    pub fn closure_residual_at_t0(&self, state: &ManyBodyState) -> Result<ClosureReport> {
        let exact = self.occupation_derivatives(state.matrix())?;
        let rho_p = self.reduce_matrix(state.matrix());
        let f: Vec<f64> = (0..self.model.modes()).map(|n| rho_p[(n, n)].re).collect();
        let reduced = rhs_quasiclassical(&f, &self.model.rates.rate_matrix(), self.model.statistics)?;
        let residual = exact
            .iter()
            .zip(&reduced)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        Ok(ClosureReport {
            residual,
            exact,
            reduced,
            product_state: self.is_product_diagonal(state.matrix()),
            cutoff_contaminated: self.is_cutoff_contaminated(state.matrix()),
        })
    }

    /// Whether `ρ` is Fock-diagonal and factorizes into single-mode marginals.
    pub fn is_product_diagonal(&self, rho: &ComplexMatrix) -> bool {
        let dim = self.model.fock_dim();
        for j in 0..dim {
            for i in 0..dim {
                if i != j && rho[(i, j)].norm() > PRODUCT_TOLERANCE {
                    return false;
                }
            }
        }
        let levels = self.model.levels();
        let modes = self.model.modes();
        let mut marginals = vec![vec![0.0; levels]; modes];
        for index in 0..dim {
            let p = rho[(index, index)].re;
            for (k, &n) in self.model.occupations_of(index).iter().enumerate() {
                marginals[k][n] += p;
            }
        }
        (0..dim).all(|index| {
            let prod: f64 = self
                .model
                .occupations_of(index)
                .iter()
                .enumerate()
                .map(|(k, &n)| marginals[k][n])
                .product();
            (prod - rho[(index, index)].re).abs() <= PRODUCT_TOLERANCE
        })
    }

    /// Largest population held by any single mode's top occupancy level.
    pub fn top_level_population(&self, rho: &ComplexMatrix) -> f64 {
        if self.model.statistics != Statistics::Boson {
            return 0.0;
        }
        let top = self.model.boson_cutoff;
        let mut per_mode = vec![0.0; self.model.modes()];
        for index in 0..self.model.fock_dim() {
            for (k, &n) in self.model.occupations_of(index).iter().enumerate() {
                if n == top {
                    per_mode[k] += rho[(index, index)].re;
                }
            }
        }
        per_mode.into_iter().fold(0.0, f64::max)
    }

    pub fn is_cutoff_contaminated(&self, rho: &ComplexMatrix) -> bool {
        self.top_level_population(rho) >= CUTOFF_CONTAMINATION
    }

    /// Largest deviation from the canonical (anti)commutation relations.
    ///
    /// For bosons only matrix elements between states with every mode below
    /// the cutoff are compared; the truncated ladder necessarily breaks
    /// `[c, c†] = 1` on the top level.
    pub fn canonical_relation_defect(&self) -> f64 {
        let dim = self.model.fock_dim();
        let below_cutoff: Vec<bool> = (0..dim)
            .map(|i| match self.model.statistics {
                Statistics::Fermion => true,
                Statistics::Boson => self
                    .model
                    .occupations_of(i)
                    .iter()
                    .all(|&n| n < self.model.boson_cutoff),
            })
            .collect();
        let sign = match self.model.statistics {
            Statistics::Fermion => 1.0,
            Statistics::Boson => -1.0,
        };
        let mut defect: f64 = 0.0;
        for (a, ca) in self.modes.iter().enumerate() {
            for (b, cb) in self.modes.iter().enumerate() {
                let cb_dag = cb.adjoint();
                let mut mixed = ca * &cb_dag + (&cb_dag * ca).scale(sign);
                if a == b {
                    mixed -= ComplexMatrix::identity(dim, dim);
                }
                let pure = ca * cb + (cb * ca).scale(sign);
                for j in 0..dim {
                    for i in 0..dim {
                        if below_cutoff[i] && below_cutoff[j] {
                            defect = defect.max(mixed[(i, j)].norm()).max(pure[(i, j)].norm());
                        }
                    }
                }
            }
        }
        defect
    }

    /// `‖[N, ρ]‖_max`; zero for states with definite particle-number blocks.
    pub fn number_coherence(&self, rho: &ComplexMatrix) -> f64 {
        let n = self.total_number();
        max_abs(&(&n * rho - rho * &n))
    }
}

impl Rhs for FockOracle {
    fn evaluate(&self, _t: f64, state: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.rhs(state)
    }
}

/// Exact many-body time derivative of `ρ_S`.
pub fn rhs_fock_lindblad(model: &FockModel, state: &ManyBodyState) -> Result<ComplexMatrix> {
    FockOracle::new(model.clone())?.rhs(state.matrix())
}

pub fn reduce_one_particle(model: &FockModel, state: &ManyBodyState) -> Result<DensityMatrix> {
    Ok(FockOracle::new(model.clone())?.reduce_one_particle(state))
}

/// Compares exact occupation derivatives at `t = 0` with the semiclassical
/// closure `Σ w_{nn′}(1 ± f_n) f_{n′} − Σ w_{n′n}(1 ± f_{n′}) f_n` on the
/// reduced occupations. Exact for uncorrelated Fock-diagonal states.
pub fn closure_residual_at_t0(model: &FockModel, state: &ManyBodyState) -> Result<ClosureReport> {
    FockOracle::new(model.clone())?.closure_residual_at_t0(state)
}
