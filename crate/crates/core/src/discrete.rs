//! The discrete equations of motion with time as a dynamical variable.
//!
//! With `K_n = l(𝒫_n² + 𝒱(τ_n))` the two-step recurrence is explicit. One
//! forward step, given states `n-1` and `n`, solves in the order
//!
//! 1. `τ_{n+1} = τ_{n-1} + 2l 𝒫_n`
//! 2. `x_{n+1} = x_{n-1} + (τ_{n+1} − τ_{n-1}) p_n`
//! 3. `p_{n+1} = p_{n-1} − (τ_{n+1} − τ_{n-1}) V'(x_n)`
//! 4. `𝒫_{n+1} = 𝒫_{n-1} + E_{n+1} − E_n − l 𝒱'(τ_n)`
//!
//! where step 4 uses the freshly computed `(x_{n+1}, p_{n+1})` inside
//! `E_{n+1}`. The backward step solves the same relations for index `n-1`.

use alloc::vec::Vec;

use crate::bracket::{self, FiniteDiff};
use crate::continuum::{self, ContinuumState};
use crate::error::{Error, Result};
use crate::math;
use crate::model::{energy_e_n, hamiltonian_h_n, DiscreteState, PotentialSpec};

/// Potentials and fundamental step of a discrete system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteSystem {
    pub v: PotentialSpec,
    pub vtau: PotentialSpec,
    pub l: f64,
}

impl DiscreteSystem {
    pub fn new(v: PotentialSpec, vtau: PotentialSpec, l: f64) -> Result<Self> {
        v.validate()?;
        vtau.validate()?;
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::InvalidParameter {
                name: "l",
                reason: "must be finite and > 0",
            });
        }
        Ok(Self { v, vtau, l })
    }

    fn energy(&self, a: &DiscreteState, b: &DiscreteState) -> f64 {
        energy_e_n(b.p, a.p, b.x, a.x, &self.v)
    }

    /// State `n+1` from states `n-1` and `n`.
    pub fn step_forward(&self, prev: &DiscreteState, curr: &DiscreteState) -> Result<DiscreteState> {
        check_consecutive(prev, curr)?;
        let l = self.l;
        let tau = prev.tau + 2.0 * l * curr.pcal;
        let dtau = tau - prev.tau;
        let x = prev.x + dtau * curr.p;
        let p = prev.p - dtau * self.v.gradient(curr.x);
        let mut next = DiscreteState::new(curr.n + 1, x, tau, p, 0.0);
        next.pcal = prev.pcal + self.energy(curr, &next) - self.energy(prev, curr) - l * self.vtau.gradient(curr.tau);
        Ok(next)
    }

    /// State `n-1` from states `n` and `n+1`.
    pub fn step_backward(&self, next: &DiscreteState, curr: &DiscreteState) -> Result<DiscreteState> {
        check_consecutive(curr, next)?;
        if curr.n == 0 {
            return Err(Error::InvalidParameter {
                name: "n",
                reason: "cannot step back before index 0",
            });
        }
        let l = self.l;
        let tau = next.tau - 2.0 * l * curr.pcal;
        let dtau = next.tau - tau;
        let x = next.x - dtau * curr.p;
        let p = next.p + dtau * self.v.gradient(curr.x);
        let mut prev = DiscreteState::new(curr.n - 1, x, tau, p, 0.0);
        prev.pcal = next.pcal - self.energy(curr, next) + self.energy(&prev, curr) + l * self.vtau.gradient(curr.tau);
        Ok(prev)
    }

    /// Runs `steps` forward steps from two seeds; the result has
    /// `steps + 2` states.
    pub fn run(&self, seed0: DiscreteState, seed1: DiscreteState, steps: usize) -> Result<DiscreteTrajectory> {
        check_consecutive(&seed0, &seed1)?;
        for s in [&seed0, &seed1] {
            if !s.is_finite() {
                return Err(Error::NonFinite { step: s.n });
            }
        }
        let mut states = Vec::with_capacity(steps + 2);
        states.push(seed0);
        states.push(seed1);
        for _ in 0..steps {
            let k = states.len();
            let next = self.step_forward(&states[k - 2], &states[k - 1])?;
            if !next.is_finite() {
                return Err(Error::NonFinite { step: next.n });
            }
            states.push(next);
        }
        Ok(DiscreteTrajectory { states, system: *self })
    }

    /// Steps backward from the last two states of `traj` until the first two
    /// are recovered; returns the reconstructed states in index order.
    pub fn run_backward(
        &self,
        last_prev: DiscreteState,
        last: DiscreteState,
        steps: usize,
    ) -> Result<Vec<DiscreteState>> {
        check_consecutive(&last_prev, &last)?;
        let mut rev = Vec::with_capacity(steps + 2);
        rev.push(last);
        rev.push(last_prev);
        for _ in 0..steps {
            let k = rev.len();
            let prev = self.step_backward(&rev[k - 2], &rev[k - 1])?;
            if !prev.is_finite() {
                return Err(Error::NonFinite { step: prev.n });
            }
            rev.push(prev);
        }
        rev.reverse();
        Ok(rev)
    }

    /// Second seed from the first: one step of length `l` of the continuum
    /// equations with a fourth-order one-step method.
    pub fn bootstrap_state1(&self, state0: &DiscreteState) -> Result<DiscreteState> {
        let start = ContinuumState::new(0.0, state0.x, state0.tau, state0.p, state0.pcal);
        let next = continuum::continuum_step(&start, &self.v, &self.vtau, self.l);
        if !next.is_finite() {
            return Err(Error::NonFinite { step: state0.n + 1 });
        }
        Ok(DiscreteState::new(state0.n + 1, next.x, next.tau, next.p, next.pcal))
    }

    /// `run` with the second seed supplied by [`Self::bootstrap_state1`].
    pub fn run_from(&self, state0: DiscreteState, steps: usize) -> Result<DiscreteTrajectory> {
        let state1 = self.bootstrap_state1(&state0)?;
        self.run(state0, state1, steps)
    }
}

fn check_consecutive(a: &DiscreteState, b: &DiscreteState) -> Result<()> {
    if b.n != a.n + 1 {
        return Err(Error::NonConsecutive {
            expected: a.n + 1,
            found: b.n,
        });
    }
    Ok(())
}

/// A solution (or candidate solution) with consecutive indices, length ≥ 2.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteTrajectory {
    states: Vec<DiscreteState>,
    system: DiscreteSystem,
}

impl DiscreteTrajectory {
    pub fn new(states: Vec<DiscreteState>, system: DiscreteSystem) -> Result<Self> {
        if states.len() < 2 {
            return Err(Error::InvalidParameter {
                name: "states",
                reason: "a trajectory needs at least two states",
            });
        }
        for w in states.windows(2) {
            check_consecutive(&w[0], &w[1])?;
        }
        Ok(Self { states, system })
    }

    pub fn states(&self) -> &[DiscreteState] {
        &self.states
    }

    pub fn system(&self) -> &DiscreteSystem {
        &self.system
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn into_states(self) -> Vec<DiscreteState> {
        self.states
    }
}

fn step_action(sys: &DiscreteSystem, prev: &DiscreteState, curr: &DiscreteState) -> f64 {
    let h = hamiltonian_h_n(curr, prev, &sys.v, &sys.vtau, sys.l).unwrap_or(f64::NAN);
    (curr.p + prev.p) * (curr.x - prev.x) + (curr.pcal + prev.pcal) * (curr.tau - prev.tau) - h
}

/// `A = Σ_{n>0} [(p_n + p_{n-1})Δx_n + (𝒫_n + 𝒫_{n-1})Δτ_n − H_n]`.
pub fn discrete_action(traj: &DiscreteTrajectory) -> f64 {
    traj.states
        .windows(2)
        .map(|w| step_action(&traj.system, &w[0], &w[1]))
        .sum()
}

/// Largest first-order variation of the action over interior coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationarityReport {
    pub max_abs: f64,
    /// Step index and coordinate (`0..4` for `x, tau, p, pcal`) where the
    /// maximum occurred.
    pub at: (u64, usize),
}

/// Central-difference derivative of the action with respect to every
/// coordinate of every interior state (endpoints held fixed).
///
/// Only the two steps that contain state `n` depend on it, so each
/// derivative differences that local window; this is the same derivative
/// as differencing the full sum, without its rounding noise.
pub fn action_stationarity_check(traj: &DiscreteTrajectory, eps: f64) -> StationarityReport {
    let sys = &traj.system;
    let s = &traj.states;
    let mut report = StationarityReport {
        max_abs: 0.0,
        at: (0, 0),
    };
    for n in 1..s.len().saturating_sub(1) {
        for k in 0..4 {
            let local = |z: f64| {
                let mut c = s[n].coords();
                c[k] = z;
                let mid = DiscreteState::from_coords(s[n].n, c);
                step_action(sys, &s[n - 1], &mid) + step_action(sys, &mid, &s[n + 1])
            };
            let z = s[n].coords()[k];
            let (zp, zm) = (z + eps, z - eps);
            let d = math::abs((local(zp) - local(zm)) / (zp - zm));
            if d > report.max_abs {
                report = StationarityReport {
                    max_abs: d,
                    at: (s[n].n, k),
                };
            }
        }
    }
    report
}

/// Flat `(x, tau, p, pcal)` per state, with canonical pairs `(x, p)` and
/// `(tau, pcal)`.
fn flatten(states: &[DiscreteState]) -> (Vec<f64>, Vec<(usize, usize)>) {
    let mut z = Vec::with_capacity(4 * states.len());
    let mut pairs = Vec::with_capacity(2 * states.len());
    for (i, s) in states.iter().enumerate() {
        z.extend_from_slice(&s.coords());
        pairs.push((4 * i, 4 * i + 2));
        pairs.push((4 * i + 1, 4 * i + 3));
    }
    (z, pairs)
}

fn unflatten(template: &[DiscreteState], z: &[f64]) -> Vec<DiscreteState> {
    template
        .iter()
        .enumerate()
        .map(|(i, s)| DiscreteState::from_coords(s.n, [z[4 * i], z[4 * i + 1], z[4 * i + 2], z[4 * i + 3]]))
        .collect()
}

/// Poisson bracket on the phase space spanned by `{x_n, τ_n; p_n, 𝒫_n}` of
/// the given states, by central differences.
pub fn discrete_poisson_bracket<F, G>(f: F, g: G, point: &[DiscreteState], h: f64) -> f64
where
    F: Fn(&[DiscreteState]) -> f64,
    G: Fn(&[DiscreteState]) -> f64,
{
    let (z, pairs) = flatten(point);
    let ff = |w: &[f64]| f(&unflatten(point, w));
    let gg = |w: &[f64]| g(&unflatten(point, w));
    bracket::poisson_bracket(&ff, &gg, &z, &pairs, FiniteDiff::new(h))
}

/// Closed-form solution of the recurrence for `V` and `𝒱` each zero or
/// linear, from seeds lying on the affine/quadratic branch:
/// `p_1 = p_0 − l𝒫_0 V'`, `𝒫_1 = 𝒫_0 − l𝒱'/2`, `τ_1 = τ_0 + l(𝒫_0 + 𝒫_1)/2`
/// and matching `x_1`. Returns `None` when the potentials are not of that
/// kind or both forces are nonzero (the branch is then not polynomial).
pub fn constant_force_solution(sys: &DiscreteSystem, state0: &DiscreteState, n: u64) -> Option<DiscreteState> {
    use crate::model::PotentialKind::*;
    let force_ok = |k| matches!(k, Zero | Constant | Linear);
    if !force_ok(sys.v.kind) || !force_ok(sys.vtau.kind) {
        return None;
    }
    let f = sys.v.gradient(0.0);
    let g = sys.vtau.gradient(0.0);
    if f != 0.0 && g != 0.0 {
        return None;
    }
    let l = sys.l;
    let nf = n as f64;
    // 𝒫 steps by −l g/2 per index; τ is its running sum.
    let pcal = state0.pcal - nf * l * g / 2.0;
    let tau = state0.tau + l * nf * state0.pcal - l * l * g * nf * nf / 4.0;
    let (x, p) = if g == 0.0 {
        // 𝒫 constant, p arithmetic, x quadratic
        let a = l * state0.pcal;
        (
            state0.x + a * nf * state0.p - a * a * f * nf * nf / 2.0,
            state0.p - a * f * nf,
        )
    } else {
        // f == 0: p constant, x follows τ
        (state0.x + state0.p * (tau - state0.tau), state0.p)
    };
    Some(DiscreteState::new(state0.n + n, x, tau, p, pcal))
}

/// Second seed on the polynomial branch used by [`constant_force_solution`].
pub fn constant_force_seed(sys: &DiscreteSystem, state0: &DiscreteState) -> Option<DiscreteState> {
    constant_force_solution(sys, state0, 1)
}

/// General closed form for `V = 𝒱 = 0` with arbitrary seeds: momenta
/// alternate between their two seed values and positions advance on each
/// parity sub-lattice independently.
pub fn free_solution(l: f64, seed0: &DiscreteState, seed1: &DiscreteState, n: u64) -> DiscreteState {
    let k = (n / 2) as f64;
    let (base, other) = if n.is_multiple_of(2) {
        (seed0, seed1)
    } else {
        (seed1, seed0)
    };
    // every step on this sub-lattice uses the other sub-lattice's momenta
    let dtau = 2.0 * l * other.pcal;
    DiscreteState::new(
        seed0.n + n,
        base.x + k * dtau * other.p,
        base.tau + k * dtau,
        base.p,
        base.pcal,
    )
}

/// Seeds `(n, n+1)` at the tail of a trajectory.
pub fn tail(states: &[DiscreteState]) -> Option<(DiscreteState, DiscreteState)> {
    match states {
        [.., a, b] => Some((*a, *b)),
        _ => None,
    }
}

/// Max-norm distance between two equally long state sequences.
pub fn max_norm_distance(a: &[DiscreteState], b: &[DiscreteState]) -> f64 {
    a.iter().zip(b).map(|(s, t)| s.max_abs_diff(t)).fold(0.0, f64::max)
}
