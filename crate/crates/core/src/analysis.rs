//! Trajectory-level checks: bounds, particle-hole duality, the low-density
//! limit, and the pure-dephasing counterexample.

use serde::Serialize;

use crate::dynamics::{rhs_markoff, rhs_nonlinear_master, DephasingRates, Markoff, Statistics, TransitionNetwork};
use crate::error::{Error, Result};
use crate::integrator::{evolve, EvolutionSpec, Trajectory};
use crate::operators::{
    eigh_unchecked, max_abs, real_matrix, ComplexMatrix, DensityMatrix, HermitianOperator,
};

/// Eigenvalue excursions smaller than this are treated as roundoff.
pub const VIOLATION_THRESHOLD: f64 = 1e-8;

/// Residuals below this floor are dropped from the low-density fit.
pub const RESIDUAL_FLOOR: f64 = 1e-14;

/// Time-grid agreement required to compare two trajectories.
const TIME_MATCH: f64 = 1e-12;

/// Per-snapshot diagnostics, aligned with a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticSeries {
    pub times: Vec<f64>,
    pub trace_drift: Vec<f64>,
    pub min_eigenvalue: Vec<f64>,
    pub max_eigenvalue: Vec<f64>,
    pub hermiticity_defect: Vec<f64>,
    /// `‖ρ_p + ρ_p̄ − I‖_max` against a hole-picture run.
    pub duality_residual: Option<Vec<f64>>,
}

impl DiagnosticSeries {
    pub fn from_trajectory(traj: &Trajectory) -> Self {
        let t0 = traj.diagnostics.first().map_or(0.0, |d| d.trace);
        Self {
            times: traj.times.clone(),
            trace_drift: traj.diagnostics.iter().map(|d| d.trace - t0).collect(),
            min_eigenvalue: traj.diagnostics.iter().map(|d| d.min_eigenvalue).collect(),
            max_eigenvalue: traj.diagnostics.iter().map(|d| d.max_eigenvalue).collect(),
            hermiticity_defect: traj.diagnostics.iter().map(|d| d.hermiticity_defect).collect(),
            duality_residual: None,
        }
    }

    pub fn with_duality(mut self, particle: &Trajectory, hole: &Trajectory) -> Result<Self> {
        self.duality_residual = Some(duality_residuals(particle, hole)?);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

fn check_aligned(a: &Trajectory, b: &Trajectory) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::InvalidTimeGrid(format!(
            "trajectories have {} and {} snapshots",
            a.len(),
            b.len()
        )));
    }
    if let Some((ta, tb)) = a
        .times
        .iter()
        .zip(&b.times)
        .find(|(ta, tb)| (*ta - *tb).abs() > TIME_MATCH)
    {
        return Err(Error::InvalidTimeGrid(format!(
            "snapshot times differ: {ta} vs {tb}"
        )));
    }
    Ok(())
}

/// `‖ρ_p(t) + ρ_p̄(t) − I‖_max` at every snapshot.
pub fn duality_residuals(particle: &Trajectory, hole: &Trajectory) -> Result<Vec<f64>> {
    if particle.statistics != Statistics::Fermion || hole.statistics != Statistics::Fermion {
        return Err(Error::WrongStatistics { expected: "fermion" });
    }
    check_aligned(particle, hole)?;
    Ok(particle
        .states
        .iter()
        .zip(&hole.states)
        .map(|(p, h)| {
            let d = p.nrows();
            max_abs(&(p + h - ComplexMatrix::identity(d, d)))
        })
        .collect())
}

/// Largest duality residual over a fermion particle/hole trajectory pair.
pub fn duality_check(particle: &Trajectory, hole: &Trajectory) -> Result<f64> {
    Ok(duality_residuals(particle, hole)?
        .into_iter()
        .fold(0.0, f64::max))
}

/// Largest difference between the diagonals of two aligned trajectories.
pub fn diagonal_mismatch(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    check_aligned(a, b)?;
    let mut worst: f64 = 0.0;
    for (sa, sb) in a.states.iter().zip(&b.states) {
        if sa.nrows() != sb.nrows() {
            return Err(Error::DimensionMismatch {
                expected: sa.nrows(),
                found: sb.nrows(),
            });
        }
        for p in 0..sa.nrows() {
            worst = worst.max((sa[(p, p)].re - sb[(p, p)].re).abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    NegativeEigenvalue,
    AboveFermiBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub t: f64,
    pub kind: ViolationKind,
    pub eigenvalue: f64,
}

/// Snapshots whose spectrum leaves `[0, ∞)` (or `[0, 1]` for fermions) by
/// more than [`VIOLATION_THRESHOLD`].
pub fn bounds_monitor(traj: &Trajectory, stats: Statistics) -> Vec<Violation> {
    let mut out = Vec::new();
    for (&t, d) in traj.times.iter().zip(&traj.diagnostics) {
        if d.min_eigenvalue < -VIOLATION_THRESHOLD {
            out.push(Violation {
                t,
                kind: ViolationKind::NegativeEigenvalue,
                eigenvalue: d.min_eigenvalue,
            });
        }
        if stats == Statistics::Fermion && d.max_eigenvalue > 1.0 + VIOLATION_THRESHOLD {
            out.push(Violation {
                t,
                kind: ViolationKind::AboveFermiBound,
                eigenvalue: d.max_eigenvalue,
            });
        }
    }
    out
}

/// First time the smallest eigenvalue goes from `≥ 0` to `< 0`.
///
/// Located by bisection on the straight line between the bracketing
/// snapshots. `None` if the trajectory never changes sign (including one that
/// starts negative).
pub fn crossing_time(traj: &Trajectory) -> Option<f64> {
    let min_at = |k: usize| traj.diagnostics[k].min_eigenvalue;
    let k = (0..traj.len().saturating_sub(1)).find(|&k| min_at(k) >= 0.0 && min_at(k + 1) < 0.0)?;
    let (a, b) = (&traj.states[k], &traj.states[k + 1]);
    let f = |s: f64| eigh_unchecked(&(a.scale(1.0 - s) + b.scale(s))).min();
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if f(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (t0, t1) = (traj.times[k], traj.times[k + 1]);
    Some(t0 + 0.5 * (lo + hi) * (t1 - t0))
}

/// Log-log least-squares fit of the low-density residual.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowDensityFit {
    /// `None` when fewer than two residuals clear [`RESIDUAL_FLOOR`].
    pub slope: Option<f64>,
    /// `(ε, ‖RHS_nonlinear(εσ) − RHS_linear(εσ)‖_max)` for every ε tried.
    pub points: Vec<(f64, f64)>,
}

impl LowDensityFit {
    pub fn is_degenerate(&self) -> bool {
        self.slope.is_none()
    }
}

/// Residual between the nonlinear master equation and its linear
/// (low-density) counterpart at `εσ`, for each ε, with its fitted log-log
/// slope. The difference is quadratic in the state, so the slope is 2.
pub fn low_density_slope(
    h: &HermitianOperator,
    net: &TransitionNetwork,
    sigma: &DensityMatrix,
    epsilons: &[f64],
) -> Result<LowDensityFit> {
    if epsilons.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
        return Err(Error::InvalidInput("ε values must be positive and finite".into()));
    }
    let (lo, hi) = epsilons
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    if epsilons.is_empty() || hi / lo < 1e3 * (1.0 - 1e-9) {
        return Err(Error::InvalidInput(format!(
            "ε values must span at least three decades, got [{lo:e}, {hi:e}]"
        )));
    }
    let none = DephasingRates::new();
    let mut points = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let rho = sigma.matrix().scale(eps);
        let nonlinear = rhs_nonlinear_master(h, net, &rho, sigma.statistics())?;
        let linear = rhs_markoff(h, net, &none, &rho)?;
        points.push((eps, max_abs(&(nonlinear - linear))));
    }
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(_, r)| r >= RESIDUAL_FLOOR)
        .map(|&(e, r)| (e.ln(), r.ln()))
        .collect();
    let slope = (logs.len() >= 2).then(|| {
        let n = logs.len() as f64;
        let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
        let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    Ok(LowDensityFit { slope, points })
}

/// Pure dephasing between orbitals 2 and 3 of a three-orbital system with
/// coherences to orbital 1.
#[derive(Debug, Clone)]
pub struct DephasingScenario {
    /// Not necessarily positive semidefinite.
    pub initial: DensityMatrix,
    pub equation: Markoff,
    pub gamma: f64,
    /// Coherence between orbital 1 and orbitals 2, 3.
    pub outer_coherence: f64,
    /// Suggested integration horizon, `50/Γ`.
    pub horizon: f64,
}

/// Initial matrix of the standard dephasing counterexample: diagonal `1/3`,
/// `ρ_12 = ρ_13 = 10/27`, `ρ_23 = 2/9`.
pub fn appendix_d_initial() -> ComplexMatrix {
    dephasing_initial(10.0 / 27.0, 2.0 / 9.0)
}

fn dephasing_initial(a: f64, b: f64) -> ComplexMatrix {
    let c = 1.0 / 3.0;
    real_matrix(&[&[c, a, a], &[a, c, b], &[a, b, c]])
}

/// The standard counterexample with `Γ = 1` and no Hamiltonian.
pub fn appendix_d_scenario() -> DephasingScenario {
    dephasing_scenario(10.0 / 27.0, 2.0 / 9.0, 1.0, &[0.0; 3]).expect("fixed parameters are valid")
}

/// Counterexample family: diagonal `1/3`, `ρ_12 = ρ_13 = a`, `ρ_23 = b`,
/// dephasing rate `Γ` on the pair (2, 3), diagonal `H₀ = diag(energies)`,
/// no transitions.
pub fn dephasing_scenario(a: f64, b: f64, gamma: f64, energies: &[f64; 3]) -> Result<DephasingScenario> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidDephasing {
            a: 1,
            b: 2,
            reason: format!("Γ must be positive, got {gamma}"),
        });
    }
    let mut dephasing = DephasingRates::new();
    dephasing.set(1, 2, gamma)?;
    Ok(DephasingScenario {
        initial: DensityMatrix::new_unchecked(dephasing_initial(a, b), Statistics::Fermion)?,
        equation: Markoff {
            h: HermitianOperator::diagonal(energies),
            rates: TransitionNetwork::new(3),
            dephasing,
        },
        gamma,
        outer_coherence: a,
        horizon: 50.0 / gamma,
    })
}

impl DephasingScenario {
    /// `{1/3 − √2 a, 1/3, 1/3 + √2 a}`: the spectrum once `ρ_23` has decayed.
    pub fn limit_spectrum(&self) -> [f64; 3] {
        let c = 1.0 / 3.0;
        let r = 2f64.sqrt() * self.outer_coherence.abs();
        [c - r, c, c + r]
    }

    /// Integrates to the horizon; the initial state is not required to be
    /// physical.
    pub fn run(&self, dt: f64, record_every: usize) -> Result<Trajectory> {
        let mut spec = EvolutionSpec::new(0.0, self.horizon, dt)?.record_every(record_every);
        spec.allow_invalid_initial = true;
        evolve(&spec, &self.equation, &self.initial)
    }
}
