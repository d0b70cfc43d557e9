//! JSON scenario files and the run driver behind the `qme` binary.
//!
//! Orbital indices in scenario files are one-based. See the book chapter on
//! scenarios for the schema and the CSV column layout.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analysis::{
    bounds_monitor, crossing_time, diagonal_mismatch, duality_residuals, low_density_slope,
    LowDensityFit, Violation,
};
use crate::dynamics::{
    DephasingRates, GeneralEquation, GeneralizedJumps, GeneralizedJumpsHole, HoleEquation,
    JumpOperatorSet, Lindblad, Markoff, MeanFieldNonhermitian, NonlinearHoleMaster,
    NonlinearMaster, Quasiclassical, Statistics, TransitionNetwork,
};
use crate::error::{Error, Result};
use crate::fock_oracle::{ClosureReport, FockModel, FockOracle, ManyBodyState};
use crate::integrator::{
    evolve_matrix, EvolutionSpec, Rhs, SnapshotDiagnostics, StepHalving, Trajectory, DEFAULT_DT,
};
use crate::operators::{
    hermiticity_defect, max_abs, ComplexMatrix, DensityMatrix, HermitianOperator,
    DEFAULT_TOLERANCE,
};
use crate::analysis::appendix_d_initial;
use num_complex::Complex64;

/// Environment variable naming the default output root.
pub const OUT_DIR_ENV: &str = "QME_OUT_DIR";

/// Integrator keys that may be overridden without the `integrator.` prefix.
const INTEGRATOR_SHORTHANDS: [&str; 4] = ["t0", "t1", "dt", "record_every"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquationKind {
    MeanfieldNonhermitian,
    General,
    NonlinearMaster,
    GeneralizedJumps,
    Markoff,
    Lindblad,
    Quasiclassical,
    FockOracle,
}

impl EquationKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::MeanfieldNonhermitian => "meanfield_nonhermitian",
            Self::General => "general",
            Self::NonlinearMaster => "nonlinear_master",
            Self::GeneralizedJumps => "generalized_jumps",
            Self::Markoff => "markoff",
            Self::Lindblad => "lindblad",
            Self::Quasiclassical => "quasiclassical",
            Self::FockOracle => "fock_oracle",
        }
    }

    /// `(required, optional)` parameter groups.
    fn groups(self) -> (&'static [&'static str], &'static [&'static str]) {
        match self {
            Self::MeanfieldNonhermitian => (&["hamiltonian", "a"], &[]),
            Self::General => (&["hamiltonian", "a_p", "a_pbar"], &[]),
            Self::NonlinearMaster => (&["hamiltonian", "rates"], &["basis"]),
            Self::GeneralizedJumps | Self::Lindblad => (&["hamiltonian", "jumps"], &[]),
            Self::Markoff => (&["hamiltonian"], &["rates", "basis", "dephasing"]),
            Self::Quasiclassical => (&["rates"], &[]),
            Self::FockOracle => (&["fock"], &["rates"]),
        }
    }
}

/// Dense matrix as separate real and imaginary row lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

impl MatrixSpec {
    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        let rows = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect())
                .collect()
        };
        let im = rows(|z| z.im);
        let has_im = im.iter().flatten().any(|&x| x != 0.0);
        Self {
            re: rows(|z| z.re),
            im: has_im.then_some(im),
        }
    }

    pub fn to_matrix(&self, field: &str, dim: usize) -> Result<ComplexMatrix> {
        let shape_ok = |rows: &Vec<Vec<f64>>| rows.len() == dim && rows.iter().all(|r| r.len() == dim);
        if !shape_ok(&self.re) || self.im.as_ref().is_some_and(|im| !shape_ok(im)) {
            return Err(config(field, format!("expected a {dim}x{dim} matrix")));
        }
        let m = ComplexMatrix::from_fn(dim, dim, |i, j| {
            let im = self.im.as_ref().map_or(0.0, |im| im[i][j]);
            Complex64::new(self.re[i][j], im)
        });
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(config(field, "non-finite entry"));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// The three-orbital dephasing counterexample (diagonal 1/3,
    /// `ρ_12 = ρ_13 = 10/27`, `ρ_23 = 2/9`).
    AppendixD,
    /// Zero matrix.
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    Preset(Preset),
    Diagonal(Vec<f64>),
    Matrix(MatrixSpec),
    /// Per-mode occupancy distributions (Fock oracle only).
    FockProduct(Vec<Vec<f64>>),
    /// Fock basis state by occupation numbers (Fock oracle only).
    FockBasis(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianSpec {
    Zero,
    Diagonal(Vec<f64>),
    Matrix(MatrixSpec),
}

/// `w_{to,from}` for the transition `from → to`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateEntry {
    pub to: usize,
    pub from: usize,
    pub w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DephasingEntry {
    pub a: usize,
    pub b: usize,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FockSpec {
    pub energies: Vec<f64>,
    /// Max occupancy per boson mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalvingSpec {
    pub tolerance: f64,
    pub max_halvings: u32,
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    #[serde(default)]
    pub t0: f64,
    pub t1: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "one")]
    pub record_every: usize,
    #[serde(default = "yes")]
    pub hermitize: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub halving: Option<HalvingSpec>,
}

impl IntegratorSpec {
    pub fn to_spec(&self) -> Result<EvolutionSpec> {
        let mut spec = EvolutionSpec::new(self.t0, self.t1, self.dt)
            .map_err(|e| config("integrator", e.to_string()))?
            .record_every(self.record_every);
        spec.hermitize_each_step = self.hermitize;
        spec.halving = self.halving.map(|h| StepHalving {
            tolerance: h.tolerance,
            max_halvings: h.max_halvings,
        });
        spec.validate().map_err(|e| config("integrator", e.to_string()))?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossCheck {
    /// Compare the diagonal with the quasiclassical occupation equation.
    Quasiclassical,
    /// Compare the full state with the linear network equation.
    Markoff,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checks {
    /// Bound violations are expected; they do not change the exit code and
    /// the initial state need not be positive.
    #[serde(default)]
    pub expect_violations: bool,
    /// Also evolve the hole picture and report `‖ρ_p + ρ_p̄ − I‖`.
    #[serde(default)]
    pub duality: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_check: Option<CrossCheck>,
    /// Fit the low-density residual slope at the normalized initial state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub low_density_epsilons: Option<Vec<f64>>,
}

fn states_csv() -> String {
    "states.csv".into()
}

fn diagnostics_csv() -> String {
    "diagnostics.csv".into()
}

fn summary_json() -> String {
    "summary.json".into()
}

/// File names inside the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "states_csv")]
    pub states: String,
    #[serde(default = "diagnostics_csv")]
    pub diagnostics: String,
    #[serde(default = "summary_json")]
    pub summary: String,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            states: states_csv(),
            diagnostics: diagnostics_csv(),
            summary: summary_json(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub equation: EquationKind,
    pub statistics: Statistics,
    pub dimension: usize,
    pub initial: InitialState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<HamiltonianSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<MatrixSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_p: Option<MatrixSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_pbar: Option<MatrixSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<Vec<RateEntry>>,
    /// Network basis; column `k` is orbital `k + 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<MatrixSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jumps: Option<Vec<MatrixSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dephasing: Option<Vec<DephasingEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fock: Option<FockSpec>,
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub checks: Checks,
}

fn config(field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        message: message.into(),
    }
}

fn in_field(field: &str) -> impl FnOnce(Error) -> Error + '_ {
    move |e| config(field, e.to_string())
}

/// Everything needed to integrate one scenario.
struct Model {
    rhs: Box<dyn Rhs>,
    hole: Option<Box<dyn Rhs>>,
    initial: ComplexMatrix,
    network: Option<TransitionNetwork>,
    h: Option<HermitianOperator>,
    fock: Option<(FockOracle, ManyBodyState)>,
}

impl Scenario {
    fn present_groups(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let mut mark = |present: bool, name: &'static str| {
            if present {
                out.push(name);
            }
        };
        mark(self.hamiltonian.is_some(), "hamiltonian");
        mark(self.a.is_some(), "a");
        mark(self.a_p.is_some(), "a_p");
        mark(self.a_pbar.is_some(), "a_pbar");
        mark(self.rates.is_some(), "rates");
        mark(self.basis.is_some(), "basis");
        mark(self.jumps.is_some(), "jumps");
        mark(self.dephasing.is_some(), "dephasing");
        mark(self.fock.is_some(), "fock");
        out
    }

    fn check_groups(&self) -> Result<()> {
        let (required, optional) = self.equation.groups();
        let present = self.present_groups();
        if let Some(missing) = required.iter().find(|g| !present.contains(g)) {
            return Err(config(
                missing,
                format!("required by equation {}", self.equation.name()),
            ));
        }
        if let Some(extra) = present
            .iter()
            .find(|g| !required.contains(g) && !optional.contains(g))
        {
            return Err(config(
                extra,
                format!("not used by equation {}", self.equation.name()),
            ));
        }
        Ok(())
    }

    fn check_checks(&self) -> Result<()> {
        let eq = self.equation;
        if self.checks.duality {
            if self.statistics != Statistics::Fermion {
                return Err(config("checks.duality", "the hole picture exists for fermions only"));
            }
            if !matches!(
                eq,
                EquationKind::General | EquationKind::NonlinearMaster | EquationKind::GeneralizedJumps
            ) {
                return Err(config(
                    "checks.duality",
                    format!("no hole-picture form for equation {}", eq.name()),
                ));
            }
        }
        if let Some(kind) = self.checks.cross_check {
            if eq != EquationKind::NonlinearMaster {
                return Err(config("checks.cross_check", "requires equation nonlinear_master"));
            }
            if kind == CrossCheck::Quasiclassical && self.basis.is_some() {
                return Err(config(
                    "checks.cross_check",
                    "quasiclassical comparison needs rates in the computational basis",
                ));
            }
        }
        if self.checks.low_density_epsilons.is_some() && eq != EquationKind::NonlinearMaster {
            return Err(config("checks.low_density_epsilons", "requires equation nonlinear_master"));
        }
        Ok(())
    }

    fn hermitian(&self, field: &str, spec: &MatrixSpec) -> Result<HermitianOperator> {
        HermitianOperator::new(spec.to_matrix(field, self.dimension)?).map_err(in_field(field))
    }

    fn hamiltonian(&self) -> Result<HermitianOperator> {
        let d = self.dimension;
        match self.hamiltonian.as_ref().expect("checked by check_groups") {
            HamiltonianSpec::Zero => Ok(HermitianOperator::zeros(d)),
            HamiltonianSpec::Diagonal(diag) => {
                if diag.len() != d || diag.iter().any(|x| !x.is_finite()) {
                    return Err(config("hamiltonian", format!("expected {d} finite diagonal entries")));
                }
                Ok(HermitianOperator::diagonal(diag))
            }
            HamiltonianSpec::Matrix(m) => self.hermitian("hamiltonian", m),
        }
    }

    fn network(&self, dim: usize) -> Result<TransitionNetwork> {
        let mut net = match &self.basis {
            Some(b) => TransitionNetwork::with_basis(b.to_matrix("basis", dim)?).map_err(in_field("basis"))?,
            None => TransitionNetwork::new(dim),
        };
        for (k, r) in self.rates.iter().flatten().enumerate() {
            let label = format!("rates[({},{})]", r.to, r.from);
            if r.to == 0 || r.from == 0 || r.to > dim || r.from > dim {
                return Err(config(
                    &format!("rates[{k}]"),
                    format!("orbital labels ({},{}) must lie in 1..={dim}", r.to, r.from),
                ));
            }
            if net.rate(r.to - 1, r.from - 1) != 0.0 {
                return Err(config(&label, "duplicate transition"));
            }
            net.add_rate(r.to - 1, r.from - 1, r.w).map_err(|e| match e {
                Error::NegativeRate { rate, .. } => config(&label, format!("negative or non-finite rate {rate}")),
                Error::SelfTransition { .. } => config(&label, "self-transitions are not allowed"),
                other => config(&label, other.to_string()),
            })?;
        }
        Ok(net)
    }

    fn dephasing(&self) -> Result<DephasingRates> {
        let d = self.dimension;
        let mut entries = Vec::new();
        for r in self.dephasing.iter().flatten() {
            let label = format!("dephasing[({},{})]", r.a, r.b);
            if r.a == 0 || r.b == 0 || r.a > d || r.b > d {
                return Err(config(&label, format!("orbital labels must lie in 1..={d}")));
            }
            entries.push((r.a - 1, r.b - 1, r.gamma));
        }
        DephasingRates::from_entries(entries).map_err(|e| match e {
            Error::InvalidDephasing { a, b, reason } => {
                config(&format!("dephasing[({},{})]", a + 1, b + 1), reason)
            }
            other => config("dephasing", other.to_string()),
        })
    }

    fn jumps(&self) -> Result<JumpOperatorSet> {
        let ops = self
            .jumps
            .iter()
            .flatten()
            .enumerate()
            .map(|(k, m)| m.to_matrix(&format!("jumps[{k}]"), self.dimension))
            .collect::<Result<Vec<_>>>()?;
        JumpOperatorSet::new(self.dimension, ops).map_err(in_field("jumps"))
    }

    fn initial_matrix(&self) -> Result<ComplexMatrix> {
        let d = self.dimension;
        let m = match &self.initial {
            InitialState::Preset(Preset::AppendixD) => {
                if d != 3 {
                    return Err(config("initial", "preset appendix_d needs dimension 3"));
                }
                appendix_d_initial()
            }
            InitialState::Preset(Preset::Empty) => ComplexMatrix::zeros(d, d),
            InitialState::Diagonal(diag) => {
                if diag.len() != d {
                    return Err(config("initial", format!("expected {d} diagonal entries")));
                }
                crate::operators::diagonal_matrix(diag)
            }
            InitialState::Matrix(spec) => spec.to_matrix("initial", d)?,
            InitialState::FockProduct(_) | InitialState::FockBasis(_) => {
                return Err(config("initial", "Fock-space initial states need equation fock_oracle"));
            }
        };
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(config("initial", "non-finite entry"));
        }
        if self.checks.expect_violations {
            DensityMatrix::new_unchecked(m.clone(), self.statistics).map_err(in_field("initial"))?;
        } else {
            DensityMatrix::new(m.clone(), self.statistics).map_err(in_field("initial"))?;
        }
        Ok(m)
    }

    fn fock_model(&self) -> Result<(FockOracle, ManyBodyState)> {
        let spec = self.fock.as_ref().expect("checked by check_groups");
        if spec.energies.len() != self.dimension {
            return Err(config(
                "fock.energies",
                format!("expected {} mode energies (one per orbital)", self.dimension),
            ));
        }
        let net = self.network(self.dimension)?;
        let mut model = FockModel::new(self.statistics, spec.energies.clone(), net).map_err(in_field("fock"))?;
        match (self.statistics, spec.cutoff) {
            (Statistics::Boson, Some(c)) => model = model.with_cutoff(c).map_err(in_field("fock.cutoff"))?,
            (Statistics::Fermion, Some(_)) => return Err(config("fock.cutoff", "only meaningful for bosons")),
            _ => {}
        }
        let state = match &self.initial {
            InitialState::FockProduct(dists) => ManyBodyState::product(&model, dists),
            InitialState::FockBasis(occ) => ManyBodyState::basis_state(&model, occ),
            _ => {
                return Err(config(
                    "initial",
                    "equation fock_oracle needs a fock_product or fock_basis initial state",
                ))
            }
        }
        .map_err(in_field("initial"))?;
        Ok((FockOracle::new(model).map_err(in_field("fock"))?, state))
    }

    /// Checks every field and cross-field constraint.
    pub fn validate(&self) -> Result<()> {
        self.build().map(|_| ())
    }

    fn build(&self) -> Result<Model> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name == ".." {
            return Err(config("name", "must be a non-empty plain file name"));
        }
        if self.dimension == 0 {
            return Err(config("dimension", "must be positive"));
        }
        self.check_groups()?;
        self.check_checks()?;
        self.integrator.to_spec()?;
        let stats = self.statistics;

        if self.equation == EquationKind::FockOracle {
            let (oracle, state) = self.fock_model()?;
            return Ok(Model {
                rhs: Box::new(oracle.clone()),
                hole: None,
                initial: state.matrix().clone(),
                network: None,
                h: None,
                fock: Some((oracle, state)),
            });
        }

        let initial = self.initial_matrix()?;
        let mut model = Model {
            rhs: Box::new(crate::integrator::FnRhs(|_t: f64, s: &ComplexMatrix| Ok(s.clone()))),
            hole: None,
            initial,
            network: None,
            h: None,
            fock: None,
        };
        match self.equation {
            EquationKind::MeanfieldNonhermitian => {
                let a = self.hermitian("a", self.a.as_ref().unwrap())?;
                model.rhs = Box::new(MeanFieldNonhermitian { h: self.hamiltonian()?, a });
            }
            EquationKind::General => {
                let h = self.hamiltonian()?;
                let a_p = self.hermitian("a_p", self.a_p.as_ref().unwrap())?;
                let a_pbar = self.hermitian("a_pbar", self.a_pbar.as_ref().unwrap())?;
                model.hole = Some(Box::new(HoleEquation {
                    h: h.clone(),
                    a_p: a_p.clone(),
                    a_pbar: a_pbar.clone(),
                }));
                model.rhs = Box::new(GeneralEquation { h, a_p, a_pbar, statistics: stats });
            }
            EquationKind::NonlinearMaster => {
                let h = self.hamiltonian()?;
                let net = self.network(self.dimension)?;
                model.hole = Some(Box::new(NonlinearHoleMaster { h: h.clone(), rates: net.clone() }));
                model.rhs = Box::new(NonlinearMaster { h: h.clone(), rates: net.clone(), statistics: stats });
                model.network = Some(net);
                model.h = Some(h);
            }
            EquationKind::GeneralizedJumps => {
                let h = self.hamiltonian()?;
                let jumps = self.jumps()?;
                model.hole = Some(Box::new(GeneralizedJumpsHole { h: h.clone(), jumps: jumps.clone() }));
                model.rhs = Box::new(GeneralizedJumps { h, jumps, statistics: stats });
            }
            EquationKind::Markoff => {
                model.rhs = Box::new(Markoff {
                    h: self.hamiltonian()?,
                    rates: self.network(self.dimension)?,
                    dephasing: self.dephasing()?,
                });
            }
            EquationKind::Lindblad => {
                model.rhs = Box::new(Lindblad { h: self.hamiltonian()?, jumps: self.jumps()? });
            }
            EquationKind::Quasiclassical => {
                let off_diagonal = model.initial.clone() - ComplexMatrix::from_diagonal(&model.initial.diagonal());
                if max_abs(&off_diagonal) > 0.0 {
                    return Err(config("initial", "quasiclassical runs need a diagonal initial state"));
                }
                model.rhs = Box::new(Quasiclassical {
                    rates: self.network(self.dimension)?.rate_matrix(),
                    statistics: stats,
                });
            }
            EquationKind::FockOracle => unreachable!("handled above"),
        }
        if !self.checks.duality {
            model.hole = None;
        }
        Ok(model)
    }
}

/// Parses scenario JSON text and validates it.
pub fn parse_scenario_str(text: &str) -> Result<Scenario> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    scenario_from_value(value)
}

fn scenario_from_value(value: Value) -> Result<Scenario> {
    let scenario: Scenario = serde_json::from_value(value).map_err(|e| Error::Parse(e.to_string()))?;
    scenario.validate()?;
    Ok(scenario)
}

/// Loads a scenario file; a bare bundled name such as `appendix_d` or
/// `appendix_d.json` that does not exist on disk resolves to the bundled
/// copy.
pub fn load_scenario_value(path: &Path) -> Result<Value> {
    let text = match fs::read_to_string(path) {
        Ok(text) => text,
        Err(err) => match bundled_for_path(path) {
            Some(text) => text.to_string(),
            None => {
                return Err(Error::Io {
                    path: path.display().to_string(),
                    message: err.to_string(),
                })
            }
        },
    };
    serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))
}

pub fn parse_scenario(path: &Path) -> Result<Scenario> {
    scenario_from_value(load_scenario_value(path)?)
}

/// Loads `path`, applies `key=value` overrides, then validates.
pub fn parse_with_overrides(path: &Path, overrides: &[String]) -> Result<Scenario> {
    let mut value = load_scenario_value(path)?;
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    scenario_from_value(value)
}

/// Sets a dot-path key in a scenario document. The value is parsed as JSON
/// and falls back to a plain string. `t0`, `t1`, `dt` and `record_every`
/// address the integrator block.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| config("override", format!("expected key=value, got {assignment:?}")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(config("override", "empty key"));
    }
    let mut path: Vec<&str> = key.split('.').collect();
    if path.len() == 1 && INTEGRATOR_SHORTHANDS.contains(&path[0]) {
        path.insert(0, "integrator");
    }
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.to_string()));
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut node = doc;
    for seg in parents {
        node = match node {
            Value::Object(map) => map
                .entry(seg.to_string())
                .or_insert_with(|| Value::Object(Default::default())),
            Value::Array(items) => {
                let i: usize = seg
                    .parse()
                    .map_err(|_| config(key, format!("{seg:?} is not an array index")))?;
                let len = items.len();
                items
                    .get_mut(i)
                    .ok_or_else(|| config(key, format!("index {i} out of range ({len} items)")))?
            }
            _ => return Err(config(key, format!("cannot descend into {seg:?}"))),
        };
    }
    match node {
        Value::Object(map) => {
            map.insert(last.to_string(), value);
        }
        Value::Array(items) => {
            let i: usize = last
                .parse()
                .map_err(|_| config(key, format!("{last:?} is not an array index")))?;
            let len = items.len();
            *items
                .get_mut(i)
                .ok_or_else(|| config(key, format!("index {i} out of range ({len} items)")))? = value;
        }
        _ => return Err(config(key, "parent is not an object or array")),
    }
    Ok(())
}

macro_rules! bundled {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../../../scenarios/", $name, ".json")))),*]
    };
}

static BUNDLED: &[(&str, &str)] = bundled![
    "appendix_d",
    "dephasing_crossing",
    "fock_closure_2mode",
    "generalized_jumps_boson",
    "generalized_jumps_fermion",
    "homogeneous_chain",
    "low_density_sweep",
    "two_state_boson",
    "two_state_fermion",
];

/// `(name, JSON text)` of every bundled scenario.
pub fn bundled_scenarios() -> &'static [(&'static str, &'static str)] {
    BUNDLED
}

pub fn bundled(name: &str) -> Option<&'static str> {
    let name = name.strip_suffix(".json").unwrap_or(name);
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

fn bundled_for_path(path: &Path) -> Option<&'static str> {
    if path.components().count() != 1 {
        return None;
    }
    bundled(path.to_str()?)
}

/// `explicit`, else `$QME_OUT_DIR/<name>`, else `out/<name>`.
pub fn resolve_out_dir(explicit: Option<&Path>, name: &str) -> PathBuf {
    match explicit {
        Some(p) => p.to_path_buf(),
        None => match std::env::var_os(OUT_DIR_ENV) {
            Some(root) if !root.is_empty() => PathBuf::from(root).join(name),
            _ => PathBuf::from("out").join(name),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossCheckReport {
    pub kind: CrossCheck,
    /// Largest diagonal difference over all snapshots.
    pub max_diagonal_mismatch: f64,
    /// Largest entrywise difference over all snapshots.
    pub max_state_difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub name: String,
    pub equation: EquationKind,
    pub statistics: Statistics,
    pub dimension: usize,
    pub steps: usize,
    pub snapshots: usize,
    pub t_final: f64,
    /// Ascending spectrum of the final one-particle state.
    pub final_spectrum: Vec<f64>,
    pub min_eig_final: f64,
    pub max_eig_final: f64,
    pub min_eig_overall: f64,
    pub max_eig_overall: f64,
    pub max_trace_drift: f64,
    pub max_hermiticity_defect: f64,
    pub violations: Vec<Violation>,
    pub expect_violations: bool,
    pub unexpected_violations: bool,
    /// First time the smallest eigenvalue turns negative.
    pub crossing_time: Option<f64>,
    pub duality_residual_max: Option<f64>,
    pub cross_check: Option<CrossCheckReport>,
    pub low_density: Option<LowDensityFit>,
    /// Closure residual at `t0` (Fock oracle runs).
    pub closure: Option<ClosureReport>,
    pub wall_time_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub summary: Summary,
    pub trajectory: Trajectory,
}

impl RunOutcome {
    /// 0 on success, 2 when bounds were violated without being expected.
    pub fn exit_code(&self) -> i32 {
        if self.summary.unexpected_violations {
            2
        } else {
            0
        }
    }
}

fn io_err(path: &Path) -> impl Fn(String) -> Error + '_ {
    move |message| Error::Io {
        path: path.display().to_string(),
        message,
    }
}

/// Seventeen significant digits.
fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_states(path: &Path, traj: &Trajectory) -> Result<()> {
    let err = io_err(path);
    let mut w = csv::Writer::from_path(path).map_err(|e| err(e.to_string()))?;
    let d = traj.states.first().map_or(0, |s| s.nrows());
    let mut header = vec!["t".to_string()];
    for i in 1..=d {
        for j in 1..=d {
            header.push(format!("re_{i}_{j}"));
            header.push(format!("im_{i}_{j}"));
        }
    }
    w.write_record(&header).map_err(|e| err(e.to_string()))?;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let mut row = Vec::with_capacity(1 + 2 * d * d);
        row.push(fmt_f64(*t));
        for i in 0..d {
            for j in 0..d {
                row.push(fmt_f64(s[(i, j)].re));
                row.push(fmt_f64(s[(i, j)].im));
            }
        }
        w.write_record(&row).map_err(|e| err(e.to_string()))?;
    }
    w.flush().map_err(|e| err(e.to_string()))
}

fn write_diagnostics(path: &Path, traj: &Trajectory, duality: Option<&[f64]>) -> Result<()> {
    let err = io_err(path);
    let mut w = csv::Writer::from_path(path).map_err(|e| err(e.to_string()))?;
    let mut header = vec!["t", "trace", "min_eig", "max_eig", "herm_defect"];
    if duality.is_some() {
        header.push("duality_residual");
    }
    w.write_record(&header).map_err(|e| err(e.to_string()))?;
    for (k, (t, d)) in traj.times.iter().zip(&traj.diagnostics).enumerate() {
        let mut row = vec![
            fmt_f64(*t),
            fmt_f64(d.trace),
            fmt_f64(d.min_eigenvalue),
            fmt_f64(d.max_eigenvalue),
            fmt_f64(d.hermiticity_defect),
        ];
        if let Some(res) = duality {
            row.push(fmt_f64(res[k]));
        }
        w.write_record(&row).map_err(|e| err(e.to_string()))?;
    }
    w.flush().map_err(|e| err(e.to_string()))
}

fn max_state_difference(a: &Trajectory, b: &Trajectory) -> f64 {
    a.states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| max_abs(&(x - y)))
        .fold(0.0, f64::max)
}

/// Integrates a validated scenario and writes `states.csv`,
/// `diagnostics.csv` and `summary.json` into `out_dir`.
pub fn run(scenario: &Scenario, out_dir: &Path) -> Result<RunOutcome> {
    let started = Instant::now();
    let model = scenario.build()?;
    let spec = scenario.integrator.to_spec()?;
    let stats = scenario.statistics;
    let mut traj = evolve_matrix(&spec, &*model.rhs, &model.initial, stats)?;

    let mut closure = None;
    if let Some((oracle, state)) = &model.fock {
        closure = Some(oracle.closure_residual_at_t0(state)?);
        let reduced: Vec<ComplexMatrix> = traj.states.iter().map(|s| oracle.reduce_matrix(s)).collect();
        traj.diagnostics = reduced.iter().map(SnapshotDiagnostics::of).collect();
        traj.states = reduced;
    }

    let duality = match &model.hole {
        Some(hole) => {
            let d = model.initial.nrows();
            let rho_bar = ComplexMatrix::identity(d, d) - &model.initial;
            let hole_traj = evolve_matrix(&spec, &**hole, &rho_bar, stats)?;
            Some(duality_residuals(&traj, &hole_traj)?)
        }
        None => None,
    };

    let cross_check = match scenario.checks.cross_check {
        Some(kind) => {
            let net = model.network.clone().expect("nonlinear_master has a network");
            let other = match kind {
                CrossCheck::Quasiclassical => {
                    let diag = ComplexMatrix::from_diagonal(&model.initial.diagonal());
                    let qc = Quasiclassical { rates: net.rate_matrix(), statistics: stats };
                    evolve_matrix(&spec, &qc, &diag, stats)?
                }
                CrossCheck::Markoff => {
                    let linear = Markoff {
                        h: model.h.clone().expect("nonlinear_master has a hamiltonian"),
                        rates: net,
                        dephasing: DephasingRates::new(),
                    };
                    evolve_matrix(&spec, &linear, &model.initial, stats)?
                }
            };
            Some(CrossCheckReport {
                kind,
                max_diagonal_mismatch: diagonal_mismatch(&traj, &other)?,
                max_state_difference: max_state_difference(&traj, &other),
            })
        }
        None => None,
    };

    let low_density = match &scenario.checks.low_density_epsilons {
        Some(eps) => {
            let tr = crate::operators::real_trace(&model.initial);
            if !(tr > 0.0) {
                return Err(config("checks.low_density_epsilons", "initial state has zero trace"));
            }
            let sigma = DensityMatrix::new(model.initial.scale(1.0 / tr), stats)
                .map_err(in_field("initial"))?;
            let net = model.network.as_ref().expect("nonlinear_master has a network");
            let h = model.h.as_ref().expect("nonlinear_master has a hamiltonian");
            Some(low_density_slope(h, net, &sigma, eps).map_err(in_field("checks.low_density_epsilons"))?)
        }
        None => None,
    };

    let violations = bounds_monitor(&traj, stats);
    let final_spectrum = crate::operators::hermitian_eig_matrix(
        &crate::operators::hermitize(traj.final_state()),
        DEFAULT_TOLERANCE,
    )?
    .eigenvalues;
    debug_assert!(hermiticity_defect(traj.final_state()).is_finite());
    let mut summary = Summary {
        name: scenario.name.clone(),
        equation: scenario.equation,
        statistics: stats,
        dimension: scenario.dimension,
        steps: spec.step_count(),
        snapshots: traj.len(),
        t_final: traj.final_time(),
        min_eig_final: final_spectrum[0],
        max_eig_final: *final_spectrum.last().expect("non-empty spectrum"),
        final_spectrum,
        min_eig_overall: traj.min_eigenvalue(),
        max_eig_overall: traj.max_eigenvalue(),
        max_trace_drift: traj.max_trace_drift(),
        max_hermiticity_defect: traj.max_hermiticity_defect(),
        unexpected_violations: !violations.is_empty() && !scenario.checks.expect_violations,
        violations,
        expect_violations: scenario.checks.expect_violations,
        crossing_time: crossing_time(&traj),
        duality_residual_max: duality.as_ref().map(|r| r.iter().copied().fold(0.0, f64::max)),
        cross_check,
        low_density,
        closure,
        wall_time_seconds: 0.0,
    };

    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir)(e.to_string()))?;
    write_states(&out_dir.join(&scenario.output.states), &traj)?;
    write_diagnostics(&out_dir.join(&scenario.output.diagnostics), &traj, duality.as_deref())?;
    summary.wall_time_seconds = started.elapsed().as_secs_f64();
    let summary_path = out_dir.join(&scenario.output.summary);
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(&summary_path, json + "\n").map_err(|e| io_err(&summary_path)(e.to_string()))?;

    Ok(RunOutcome {
        out_dir: out_dir.to_path_buf(),
        summary,
        trajectory: traj,
    })
}
