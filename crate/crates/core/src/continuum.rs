//! Continuum limit `l → 0` with external time `t = n l`.
//!
//! For `K = l(𝒫² + 𝒱(τ))` the internal time obeys `τ̇ = 𝒫`,
//! `𝒫̇ = −½ 𝒱'(τ)` and acts as a lapse for `(x, p)`:
//! `ẋ = τ̇ p`, `ṗ = −τ̇ V'(x)`. Both `p²/2 + V(x)` and `𝒫² + 𝒱(τ)` are
//! conserved. All flows here use the classical fourth-order Runge-Kutta
//! method with a fixed step.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::model::{DiscreteState, PotentialSpec};
use crate::rk4;

/// A point of the joint continuum flow `(x, τ; p, 𝒫)` at external time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuumState {
    pub t: f64,
    pub x: f64,
    pub tau: f64,
    pub p: f64,
    pub pcal: f64,
}

impl ContinuumState {
    pub const fn new(t: f64, x: f64, tau: f64, p: f64, pcal: f64) -> Self {
        Self { t, x, tau, p, pcal }
    }

    /// `(x, tau, p, pcal)`.
    pub fn coords(&self) -> [f64; 4] {
        [self.x, self.tau, self.p, self.pcal]
    }

    pub fn from_coords(t: f64, c: &[f64]) -> Self {
        Self::new(t, c[0], c[1], c[2], c[3])
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.coords().iter().all(|c| c.is_finite())
    }

    pub fn xp_energy(&self, v: &PotentialSpec) -> f64 {
        0.5 * self.p * self.p + v.eval(self.x)
    }

    pub fn tau_energy(&self, vtau: &PotentialSpec) -> f64 {
        self.pcal * self.pcal + vtau.eval(self.tau)
    }

    pub fn to_discrete(&self, n: u64) -> DiscreteState {
        DiscreteState::new(n, self.x, self.tau, self.p, self.pcal)
    }
}

fn joint_rhs(v: &PotentialSpec, vtau: &PotentialSpec, y: &[f64; 4]) -> [f64; 4] {
    let [x, tau, p, pcal] = *y;
    [pcal * p, pcal, -pcal * v.gradient(x), -0.5 * vtau.gradient(tau)]
}

/// One fourth-order step of the joint flow.
pub fn continuum_step(s: &ContinuumState, v: &PotentialSpec, vtau: &PotentialSpec, dt: f64) -> ContinuumState {
    let y = rk4::step(|_t, y| joint_rhs(v, vtau, y), s.t, &s.coords(), dt);
    ContinuumState::from_coords(s.t + dt, &y)
}

/// `steps` fixed steps of the joint flow; the result includes the start.
pub fn integrate_continuum(
    start: ContinuumState,
    v: &PotentialSpec,
    vtau: &PotentialSpec,
    dt: f64,
    steps: usize,
) -> Result<Vec<ContinuumState>> {
    check_dt(dt)?;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(start);
    let mut s = start;
    for k in 0..steps {
        s = continuum_step(&s, v, vtau, dt);
        // keep t on the grid rather than accumulating dt
        s.t = start.t + (k + 1) as f64 * dt;
        if !s.is_finite() {
            return Err(Error::NonFiniteAt { t: s.t });
        }
        out.push(s);
    }
    Ok(out)
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter {
            name: "dt",
            reason: "must be finite and > 0",
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LapseSample {
    pub t: f64,
    pub tau: f64,
    pub pcal: f64,
    /// `dτ/dt`, stored rather than re-derived; equals `pcal`.
    pub tau_dot: f64,
}

/// `τ(t) = τ̄ sin(ωt)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormLapse {
    pub taubar: f64,
    pub omega: f64,
}

impl ClosedFormLapse {
    pub fn tau(&self, t: f64) -> f64 {
        self.taubar * math::sin(self.omega * t)
    }

    pub fn tau_dot(&self, t: f64) -> f64 {
        self.taubar * self.omega * math::cos(self.omega * t)
    }
}

/// Dense samples of the internal-time flow on a uniform external-time grid.
///
/// Lookups between samples interpolate linearly, except for a closed-form
/// lapse, which is evaluated exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct LapseSolution {
    samples: Vec<LapseSample>,
    dt: f64,
    closed_form: Option<ClosedFormLapse>,
}

impl LapseSolution {
    /// Samples `τ̄ sin(ωt)` at `t = k dt`, `k = 0..=steps`.
    pub fn closed_form(taubar: f64, omega: f64, dt: f64, steps: usize) -> Result<Self> {
        check_dt(dt)?;
        let cf = ClosedFormLapse { taubar, omega };
        let samples = (0..=steps)
            .map(|k| {
                let t = k as f64 * dt;
                let tau_dot = cf.tau_dot(t);
                LapseSample {
                    t,
                    tau: cf.tau(t),
                    pcal: tau_dot,
                    tau_dot,
                }
            })
            .collect();
        Ok(Self {
            samples,
            dt,
            closed_form: Some(cf),
        })
    }

    pub fn samples(&self) -> &[LapseSample] {
        &self.samples
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn closed_form_params(&self) -> Option<ClosedFormLapse> {
        self.closed_form
    }

    pub fn start(&self) -> f64 {
        self.samples[0].t
    }

    pub fn end(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    /// `(τ, dτ/dt)` at external time `t`.
    pub fn at(&self, t: f64) -> Result<(f64, f64)> {
        let (start, end) = (self.start(), self.end());
        let slack = 1e-9 * self.dt;
        if !(t >= start - slack && t <= end + slack) {
            return Err(Error::OutOfSpan { t, start, end });
        }
        if let Some(cf) = self.closed_form {
            return Ok((cf.tau(t), cf.tau_dot(t)));
        }
        let last = self.samples.len() - 1;
        if last == 0 {
            let s = self.samples[0];
            return Ok((s.tau, s.tau_dot));
        }
        let pos = (t - start) / self.dt;
        let k = (pos as usize).min(last - 1);
        let u = (pos - k as f64).clamp(0.0, 1.0);
        let (a, b) = (self.samples[k], self.samples[k + 1]);
        Ok((a.tau + u * (b.tau - a.tau), a.tau_dot + u * (b.tau_dot - a.tau_dot)))
    }

    pub fn tau_dot_at(&self, t: f64) -> Result<f64> {
        self.at(t).map(|(_, d)| d)
    }
}

/// Integrates `τ̇ = 𝒫`, `𝒫̇ = −½ 𝒱'(τ)` from `t = 0`.
pub fn integrate_internal_time(
    tau0: f64,
    pcal0: f64,
    vtau: &PotentialSpec,
    dt: f64,
    steps: usize,
) -> Result<LapseSolution> {
    check_dt(dt)?;
    vtau.validate()?;
    let f = |_t: f64, y: &[f64; 2]| [y[1], -0.5 * vtau.gradient(y[0])];
    let mut samples = Vec::with_capacity(steps + 1);
    let mut y = [tau0, pcal0];
    samples.push(LapseSample {
        t: 0.0,
        tau: tau0,
        pcal: pcal0,
        tau_dot: pcal0,
    });
    for k in 0..steps {
        let t = k as f64 * dt;
        y = rk4::step(f, t, &y, dt);
        if !(y[0].is_finite() && y[1].is_finite()) {
            return Err(Error::NonFiniteAt { t: t + dt });
        }
        samples.push(LapseSample {
            t: (k + 1) as f64 * dt,
            tau: y[0],
            pcal: y[1],
            tau_dot: y[1],
        });
    }
    Ok(LapseSolution {
        samples,
        dt,
        closed_form: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XpSample {
    pub t: f64,
    pub x: f64,
    pub p: f64,
}

/// Integrates `ẋ = τ̇ p`, `ṗ = −τ̇ V'(x)` on the lapse grid (same `dt`, one
/// output per lapse sample).
pub fn integrate_xp_with_lapse(x0: f64, p0: f64, v: &PotentialSpec, lapse: &LapseSolution) -> Result<Vec<XpSample>> {
    v.validate()?;
    let samples = lapse.samples();
    let mut out = Vec::with_capacity(samples.len());
    let mut y = [x0, p0];
    out.push(XpSample {
        t: samples[0].t,
        x: x0,
        p: p0,
    });
    for w in samples.windows(2) {
        let (t0, t1) = (w[0].t, w[1].t);
        let dt = t1 - t0;
        let (a0, a1) = (w[0].tau_dot, w[1].tau_dot);
        let amid = lapse.tau_dot_at(t0 + 0.5 * dt)?;
        let stage = |s: f64| {
            if s == t0 {
                a0
            } else if s == t0 + dt {
                a1
            } else {
                amid
            }
        };
        y = rk4::step(
            |s, y: &[f64; 2]| {
                let a = stage(s);
                [a * y[1], -a * v.gradient(y[0])]
            },
            t0,
            &y,
            dt,
        );
        if !(y[0].is_finite() && y[1].is_finite()) {
            return Err(Error::NonFiniteAt { t: t1 });
        }
        out.push(XpSample {
            t: t1,
            x: y[0],
            p: y[1],
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSample {
    pub t: f64,
    pub tau: f64,
    pub x: f64,
    /// `dx/dτ`
    pub v: f64,
}

/// Solves `d²x/dτ² = −V'(x)` on a uniform internal-time grid covering the
/// lapse's range of `τ`, then reads `x(τ(t))` back at every lapse sample by
/// cubic Hermite interpolation. The result depends on `t` only through
/// `τ(t)`, so a reversal of the lapse retraces the same curve.
pub fn integrate_internal_frame(
    x0: f64,
    v0: f64,
    v: &PotentialSpec,
    lapse: &LapseSolution,
) -> Result<Vec<FrameSample>> {
    v.validate()?;
    let samples = lapse.samples();
    let tau0 = samples[0].tau;
    let (lo, hi) = samples
        .iter()
        .fold((tau0, tau0), |(lo, hi), s| (lo.min(s.tau), hi.max(s.tau)));
    let speed = samples.iter().map(|s| math::abs(s.tau_dot)).fold(0.0, f64::max);
    let h = lapse.dt() * speed;
    if !(h > 0.0) {
        // τ never moves: nothing to integrate
        return Ok(samples
            .iter()
            .map(|s| FrameSample {
                t: s.t,
                tau: s.tau,
                x: x0,
                v: v0,
            })
            .collect());
    }
    let f = |_s: f64, y: &[f64; 2]| [y[1], -v.gradient(y[0])];
    let march = |count: usize, step: f64| -> Result<Vec<[f64; 2]>> {
        let mut nodes = Vec::with_capacity(count + 1);
        let mut y = [x0, v0];
        nodes.push(y);
        for j in 0..count {
            y = rk4::step(f, tau0 + j as f64 * step, &y, step);
            if !(y[0].is_finite() && y[1].is_finite()) {
                return Err(Error::NonFiniteAt { t: f64::NAN });
            }
            nodes.push(y);
        }
        Ok(nodes)
    };
    let up = march(math::ceil((hi - tau0) / h) as usize + 1, h)?;
    let down = march(math::ceil((tau0 - lo) / h) as usize + 1, -h)?;

    let node = |j: i64| -> [f64; 2] {
        if j >= 0 {
            up[j as usize]
        } else {
            down[(-j) as usize]
        }
    };
    let mut out = Vec::with_capacity(samples.len());
    for s in samples {
        let pos = (s.tau - tau0) / h;
        let j = (math::round(pos - 0.5) as i64).clamp(-(down.len() as i64 - 1), up.len() as i64 - 2);
        let u = pos - j as f64;
        let (a, b) = (node(j), node(j + 1));
        let x = hermite(u, a[0], b[0], a[1] * h, b[1] * h);
        let vel = hermite(u, a[1], b[1], -v.gradient(a[0]) * h, -v.gradient(b[0]) * h);
        out.push(FrameSample {
            t: s.t,
            tau: s.tau,
            x,
            v: vel,
        });
    }
    Ok(out)
}

fn hermite(u: f64, y0: f64, y1: f64, m0: f64, m1: f64) -> f64 {
    let u2 = u * u;
    let u3 = u2 * u;
    (2.0 * u3 - 3.0 * u2 + 1.0) * y0 + (u3 - 2.0 * u2 + u) * m0 + (-2.0 * u3 + 3.0 * u2) * y1 + (u3 - u2) * m1
}

/// `H_c(x, p; t) = τ̇(t) [p²/2 + V(x)]`.
pub fn effective_hamiltonian(x: f64, p: f64, t: f64, v: &PotentialSpec, lapse: &LapseSolution) -> Result<f64> {
    Ok(lapse.tau_dot_at(t)? * (0.5 * p * p + v.eval(x)))
}

/// Discrete runs against a continuum reference at fixed external time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceScenario {
    pub v: PotentialSpec,
    pub vtau: PotentialSpec,
    /// Initial `(x, τ, p, 𝒫)` at `t = 0`; the index is ignored.
    pub start: DiscreteState,
    pub t_final: f64,
    /// Step of the fourth-order reference integration.
    pub reference_dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObservedOrder {
    /// Every error is at rounding level.
    Exact,
    /// Least-squares slope of `log₂ error` against `log₂ l`.
    Order(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    /// `(l, max-norm error at t_final)` per resolution.
    pub errors: Vec<(f64, f64)>,
    /// `log₂(e_k / e_{k+1})` for successive resolutions.
    pub pairwise: Vec<f64>,
    pub order: ObservedOrder,
}

const EXACT_LEVEL: f64 = 1e-12;

pub fn convergence_study(scenario: &ConvergenceScenario, resolutions: &[f64]) -> Result<ConvergenceReport> {
    use crate::discrete::DiscreteSystem;

    if resolutions.len() < 3 {
        return Err(Error::TooFewResolutions(resolutions.len()));
    }
    for (i, w) in resolutions.windows(2).enumerate() {
        if math::abs(w[0] / w[1] - 2.0) > 1e-9 {
            return Err(Error::NotHalving(i + 1));
        }
    }
    check_dt(scenario.reference_dt)?;
    let t_final = scenario.t_final;
    let ref_steps = math::ceil(t_final / scenario.reference_dt) as usize;
    let start = ContinuumState::new(
        0.0,
        scenario.start.x,
        scenario.start.tau,
        scenario.start.p,
        scenario.start.pcal,
    );
    let reference = integrate_continuum(
        start,
        &scenario.v,
        &scenario.vtau,
        t_final / ref_steps as f64,
        ref_steps,
    )?;
    let target = reference[reference.len() - 1];

    let mut errors = Vec::with_capacity(resolutions.len());
    for &l in resolutions {
        let n = math::round(t_final / l);
        if n < 1.0 || math::abs(n * l - t_final) > 1e-9 * t_final {
            return Err(Error::InvalidParameter {
                name: "t_final",
                reason: "must be a positive multiple of every resolution",
            });
        }
        let sys = DiscreteSystem::new(scenario.v, scenario.vtau, l)?;
        let traj = sys.run_from(DiscreteState { n: 0, ..scenario.start }, n as usize - 1)?;
        let last = traj.states()[traj.len() - 1];
        let err = last.max_abs_diff(&target.to_discrete(last.n));
        errors.push((l, err));
    }

    let scale = target.coords().iter().fold(1.0, |m: f64, c| m.max(math::abs(*c)));
    if errors.iter().all(|&(_, e)| e <= EXACT_LEVEL * scale) {
        return Ok(ConvergenceReport {
            errors,
            pairwise: Vec::new(),
            order: ObservedOrder::Exact,
        });
    }
    for (i, w) in errors.windows(2).enumerate() {
        if !(w[1].1 < w[0].1) {
            return Err(Error::NonMonotoneError(i + 1));
        }
    }
    let pairwise = errors.windows(2).map(|w| math::log2(w[0].1 / w[1].1)).collect();
    let pts: Vec<(f64, f64)> = errors.iter().map(|&(l, e)| (math::log2(l), math::log2(e))).collect();
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let (num, den) = pts.iter().fold((0.0, 0.0), |(n, d), &(x, y)| {
        (n + (x - mx) * (y - my), d + (x - mx) * (x - mx))
    });
    Ok(ConvergenceReport {
        errors,
        pairwise,
        order: ObservedOrder::Order(num / den),
    })
}
