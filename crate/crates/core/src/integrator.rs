//! Fixed-step classical Runge-Kutta time stepping with optional step halving.
//!
//! States are raw complex matrices. After every step the state may be replaced
//! by its hermitian part `(M + M†)/2`; positivity is never projected, so
//! violations stay visible to [`crate::analysis::bounds_monitor`].

use crate::dynamics::Statistics;
use crate::error::{Error, Result};
use crate::operators::{
    check_matrix, eigh_unchecked, hermiticity_defect, hermitize, max_abs, real_trace,
    ComplexMatrix, DensityMatrix,
};

/// Default step in inverse-rate units.
pub const DEFAULT_DT: f64 = 1e-3;

/// Time derivative of a state.
pub trait Rhs {
    fn evaluate(&self, t: f64, state: &ComplexMatrix) -> Result<ComplexMatrix>;
}

impl<T: Rhs + ?Sized> Rhs for &T {
    fn evaluate(&self, t: f64, state: &ComplexMatrix) -> Result<ComplexMatrix> {
        (**self).evaluate(t, state)
    }
}

impl<T: Rhs + ?Sized> Rhs for Box<T> {
    fn evaluate(&self, t: f64, state: &ComplexMatrix) -> Result<ComplexMatrix> {
        (**self).evaluate(t, state)
    }
}

/// Adapts a closure to [`Rhs`].
pub struct FnRhs<F>(pub F);

impl<F> Rhs for FnRhs<F>
where
    F: Fn(f64, &ComplexMatrix) -> Result<ComplexMatrix>,
{
    fn evaluate(&self, t: f64, state: &ComplexMatrix) -> Result<ComplexMatrix> {
        (self.0)(t, state)
    }
}

/// Step halving: a step is split in two when one full step and two half
/// steps disagree by more than `tolerance` (max-norm), at most
/// `max_halvings` times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepHalving {
    pub tolerance: f64,
    pub max_halvings: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionSpec {
    pub t0: f64,
    pub t1: f64,
    pub dt: f64,
    pub hermitize_each_step: bool,
    /// Record a snapshot every this many steps (the final state is always
    /// recorded).
    pub record_every: usize,
    pub halving: Option<StepHalving>,
    /// Start from an initial state that fails the density-matrix invariants
    /// instead of rejecting it.
    pub allow_invalid_initial: bool,
}

impl EvolutionSpec {
    pub fn new(t0: f64, t1: f64, dt: f64) -> Result<Self> {
        let spec = Self {
            t0,
            t1,
            dt,
            hermitize_each_step: true,
            record_every: 1,
            halving: None,
            allow_invalid_initial: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn record_every(mut self, n: usize) -> Self {
        self.record_every = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidTimeGrid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t1 > self.t0) || !self.t0.is_finite() || !self.t1.is_finite() {
            return Err(Error::InvalidTimeGrid(format!(
                "need t1 > t0, got t0 = {}, t1 = {}",
                self.t0, self.t1
            )));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidTimeGrid("record_every must be positive".into()));
        }
        Ok(())
    }

    /// Number of steps; the last one may be shorter than `dt`.
    pub fn step_count(&self) -> usize {
        let n = ((self.t1 - self.t0) / self.dt * (1.0 - 1e-12)).ceil();
        (n as usize).max(1)
    }

    fn time_of_step(&self, k: usize, steps: usize) -> f64 {
        if k >= steps {
            self.t1
        } else {
            self.t0 + k as f64 * self.dt
        }
    }
}

fn finite_or_diverged(m: ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(m)
    } else {
        Err(Error::Diverged { t })
    }
}

/// One classical four-stage Runge-Kutta step from `t` to `t + dt`.
pub fn step_rk4<R: Rhs + ?Sized>(
    state: &ComplexMatrix,
    rhs: &R,
    t: f64,
    dt: f64,
    hermitize_result: bool,
) -> Result<ComplexMatrix> {
    if !(dt > 0.0) {
        return Err(Error::InvalidTimeGrid(format!("dt must be positive, got {dt}")));
    }
    let half = 0.5 * dt;
    let k1 = finite_or_diverged(rhs.evaluate(t, state)?, t)?;
    let k2 = finite_or_diverged(rhs.evaluate(t + half, &(state + k1.scale(half)))?, t + half)?;
    let k3 = finite_or_diverged(rhs.evaluate(t + half, &(state + k2.scale(half)))?, t + half)?;
    let k4 = finite_or_diverged(rhs.evaluate(t + dt, &(state + k3.scale(dt)))?, t + dt)?;
    let next = state + (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(dt / 6.0);
    let next = finite_or_diverged(next, t + dt)?;
    Ok(if hermitize_result { hermitize(&next) } else { next })
}

fn controlled_step<R: Rhs + ?Sized>(
    state: &ComplexMatrix,
    rhs: &R,
    t: f64,
    dt: f64,
    hermitize_result: bool,
    halving: StepHalving,
) -> Result<ComplexMatrix> {
    let full = step_rk4(state, rhs, t, dt, hermitize_result)?;
    let mid = step_rk4(state, rhs, t, 0.5 * dt, hermitize_result)?;
    let two_halves = step_rk4(&mid, rhs, t + 0.5 * dt, 0.5 * dt, hermitize_result)?;
    if max_abs(&(&full - &two_halves)) <= halving.tolerance || halving.max_halvings == 0 {
        return Ok(two_halves);
    }
    let deeper = StepHalving {
        max_halvings: halving.max_halvings - 1,
        ..halving
    };
    let mid = controlled_step(state, rhs, t, 0.5 * dt, hermitize_result, deeper)?;
    controlled_step(&mid, rhs, t + 0.5 * dt, 0.5 * dt, hermitize_result, deeper)
}

/// Per-snapshot diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotDiagnostics {
    pub trace: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub hermiticity_defect: f64,
}

impl SnapshotDiagnostics {
    pub fn of(state: &ComplexMatrix) -> Self {
        let spectrum = eigh_unchecked(state);
        Self {
            trace: real_trace(state),
            min_eigenvalue: spectrum.min(),
            max_eigenvalue: spectrum.max(),
            hermiticity_defect: hermiticity_defect(state),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub statistics: Statistics,
    pub times: Vec<f64>,
    pub states: Vec<ComplexMatrix>,
    pub diagnostics: Vec<SnapshotDiagnostics>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &ComplexMatrix {
        self.states.last().expect("trajectory has at least the initial snapshot")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory has at least the initial snapshot")
    }

    /// `max_t |tr ρ(t) − tr ρ(t0)|`.
    pub fn max_trace_drift(&self) -> f64 {
        let t0 = self.diagnostics[0].trace;
        self.diagnostics
            .iter()
            .map(|d| (d.trace - t0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_hermiticity_defect(&self) -> f64 {
        self.diagnostics
            .iter()
            .map(|d| d.hermiticity_defect)
            .fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.diagnostics
            .iter()
            .map(|d| d.min_eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.diagnostics
            .iter()
            .map(|d| d.max_eigenvalue)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Diagonal entry `(p, p)` of every snapshot.
    pub fn diagonal_series(&self, p: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[(p, p)].re).collect()
    }
}

/// Integrates `rhs` from `spec.t0` to exactly `spec.t1`.
///
/// The initial state is validated first unless
/// [`EvolutionSpec::allow_invalid_initial`] is set.
pub fn evolve<R: Rhs + ?Sized>(
    spec: &EvolutionSpec,
    rhs: &R,
    initial: &DensityMatrix,
) -> Result<Trajectory> {
    spec.validate()?;
    if !spec.allow_invalid_initial {
        initial.validate()?;
    }
    evolve_matrix(spec, rhs, initial.matrix(), initial.statistics())
}

/// [`evolve`] on a raw hermitian matrix, without density-matrix checks.
pub fn evolve_matrix<R: Rhs + ?Sized>(
    spec: &EvolutionSpec,
    rhs: &R,
    initial: &ComplexMatrix,
    statistics: Statistics,
) -> Result<Trajectory> {
    spec.validate()?;
    check_matrix(initial)?;
    let steps = spec.step_count();
    let capacity = steps / spec.record_every + 2;
    let mut traj = Trajectory {
        statistics,
        times: Vec::with_capacity(capacity),
        states: Vec::with_capacity(capacity),
        diagnostics: Vec::with_capacity(capacity),
    };
    let mut state = initial.clone();
    traj.times.push(spec.t0);
    traj.diagnostics.push(SnapshotDiagnostics::of(&state));
    traj.states.push(state.clone());

    for k in 0..steps {
        let t = spec.time_of_step(k, steps);
        let t_next = spec.time_of_step(k + 1, steps);
        let h = t_next - t;
        state = match spec.halving {
            Some(halving) => controlled_step(&state, rhs, t, h, spec.hermitize_each_step, halving)?,
            None => step_rk4(&state, rhs, t, h, spec.hermitize_each_step)?,
        };
        if (k + 1) % spec.record_every == 0 || k + 1 == steps {
            traj.times.push(t_next);
            traj.diagnostics.push(SnapshotDiagnostics::of(&state));
            traj.states.push(state.clone());
        }
    }
    Ok(traj)
}
