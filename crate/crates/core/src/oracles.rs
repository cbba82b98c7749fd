//! Reference solutions for the hybrid model.
//!
//! With `ζ = 1` the classical oscillator obeys `d²x/dτ² = −Ω²x − λÕ`, where
//! `Õ = X₁P₂ − X₂P₁` is read off the q-bit and `τ = ω⁻¹ sin(ωt)`. Its
//! retarded solution is
//!
//! ```text
//! x(t) = x₁ cos(Ωτ(t) + φ) − (λ/Ω) ∫ sin(Ω(τ(t) − s)) Õ(s) ds
//! p(t) = −x₁Ω sin(Ωτ(t) + φ) − λ ∫ cos(Ω(τ(t) − s)) Õ(s) ds
//! ```
//!
//! The integral runs along the recorded history in external time, with the
//! signed increment `ds = τ(t_{k+1}) − τ(t_k)`, from the start of the run
//! (before which `Õ` is taken to vanish). `t(s)` is never inverted.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::model::{HybridState, ModelParams};

/// `Õ(t)` sampled along a run, with `s = τ(t)` alongside.
#[derive(Debug, Clone, PartialEq)]
pub struct OtildeHistory {
    t: Vec<f64>,
    s: Vec<f64>,
    otilde: Vec<f64>,
}

impl OtildeHistory {
    pub fn new(t: Vec<f64>, s: Vec<f64>, otilde: Vec<f64>) -> Result<Self> {
        if t.is_empty() || t.len() != s.len() || t.len() != otilde.len() {
            return Err(Error::InvalidParameter {
                name: "history",
                reason: "needs equally long, non-empty columns",
            });
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter {
                name: "history",
                reason: "times must be strictly increasing",
            });
        }
        Ok(Self { t, s, otilde })
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn s_grid(&self) -> &[f64] {
        &self.s
    }

    pub fn values(&self) -> &[f64] {
        &self.otilde
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.t[0]
    }

    pub fn end(&self) -> f64 {
        self.t[self.t.len() - 1]
    }

    /// Every `stride`-th sample, always keeping the last one.
    pub fn subsample(&self, stride: usize) -> Self {
        let stride = stride.max(1);
        let last = self.len() - 1;
        let mut idx: Vec<usize> = (0..=last).step_by(stride).collect();
        if idx[idx.len() - 1] != last {
            idx.push(last);
        }
        Self {
            t: idx.iter().map(|&i| self.t[i]).collect(),
            s: idx.iter().map(|&i| self.s[i]).collect(),
            otilde: idx.iter().map(|&i| self.otilde[i]).collect(),
        }
    }
}

pub fn otilde(s: &HybridState) -> f64 {
    s.qx[0] * s.qp[1] - s.qx[1] * s.qp[0]
}

/// Tabulates `Õ` and `τ(t) = ω⁻¹ sin(ωt)` along a recorded run.
pub fn otilde_history(run: &[HybridState], params: &ModelParams) -> Result<OtildeHistory> {
    OtildeHistory::new(
        run.iter().map(|s| s.t).collect(),
        run.iter().map(|s| params.internal_time(s.t)).collect(),
        run.iter().map(otilde).collect(),
    )
}

/// `(x₁, φ)` such that the homogeneous solution passes through `(x0, p0)`
/// at internal time `tau0`: `x₁ = hypot(x0, p0/Ω)`,
/// `φ = atan2(−p0/Ω, x0) − Ω tau0`.
pub fn fit_homogeneous(x0: f64, p0: f64, big_omega: f64, tau0: f64) -> Result<(f64, f64)> {
    if !(big_omega > 0.0) {
        return Err(Error::InvalidParameter {
            name: "Omega",
            reason: "must be > 0 for the oscillator solution",
        });
    }
    let v = p0 / big_omega;
    Ok((math::hypot(x0, v), math::atan2(-v, x0) - big_omega * tau0))
}

fn check_green_params(params: &ModelParams) -> Result<()> {
    params.validate()?;
    if !(params.big_omega > 0.0) {
        return Err(Error::InvalidParameter {
            name: "Omega",
            reason: "must be > 0 for the oscillator solution",
        });
    }
    if params.zeta != 1.0 {
        return Err(Error::InvalidParameter {
            name: "zeta",
            reason: "the retarded solution assumes zeta = 1",
        });
    }
    Ok(())
}

/// Trapezoid sums `(∫ sin(Ω(τ−s))Õ ds, ∫ cos(Ω(τ−s))Õ ds)` from the start
/// of the history up to `t`, linear in the last partial interval.
fn retarded_integrals(t: f64, params: &ModelParams, hist: &OtildeHistory) -> Result<(f64, f64)> {
    let (start, end) = (hist.start(), hist.end());
    let slack = 1e-12 * (1.0 + math::abs(end));
    if !(t >= start - slack && t <= end + slack) {
        return Err(Error::OutOfSpan { t, start, end });
    }
    let w = params.big_omega;
    let tau = params.internal_time(t);
    let kern = |s: f64, o: f64| {
        let a = w * (tau - s);
        (math::sin(a) * o, math::cos(a) * o)
    };
    let (ts, ss, os) = (hist.times(), hist.s_grid(), hist.values());
    let (mut is, mut ic) = (0.0, 0.0);
    let mut prev = kern(ss[0], os[0]);
    for k in 0..ts.len() - 1 {
        if ts[k] >= t {
            break;
        }
        let (s1, o1) = if ts[k + 1] <= t {
            (ss[k + 1], os[k + 1])
        } else {
            let u = (t - ts[k]) / (ts[k + 1] - ts[k]);
            (tau, os[k] + u * (os[k + 1] - os[k]))
        };
        let next = kern(s1, o1);
        let ds = s1 - ss[k];
        is += 0.5 * ds * (prev.0 + next.0);
        ic += 0.5 * ds * (prev.1 + next.1);
        prev = next;
    }
    Ok((is, ic))
}

/// Retarded solution for `x(t)`; uses `params.x1` and `params.phi`.
pub fn green_x(t: f64, params: &ModelParams, hist: &OtildeHistory) -> Result<f64> {
    check_green_params(params)?;
    let (is, _) = retarded_integrals(t, params, hist)?;
    let w = params.big_omega;
    let tau = params.internal_time(t);
    Ok(params.x1 * math::cos(w * tau + params.phi) - params.lambda / w * is)
}

/// Retarded solution for `p(t) = dx/dτ`; uses `params.x1` and `params.phi`.
pub fn green_p(t: f64, params: &ModelParams, hist: &OtildeHistory) -> Result<f64> {
    check_green_params(params)?;
    let (_, ic) = retarded_integrals(t, params, hist)?;
    let w = params.big_omega;
    let tau = params.internal_time(t);
    Ok(-params.x1 * w * math::sin(w * tau + params.phi) - params.lambda * ic)
}

/// `B(t) = λ x₁ cos(ωt) cos(Ω ω⁻¹ sin(ωt))`.
pub fn effective_b(t: f64, params: &ModelParams) -> f64 {
    params.lambda * params.x1 * params.lapse(t) * math::cos(params.big_omega * params.internal_time(t))
}

/// Upper eigenvalue of `−E₀σ₃ + Bσ₂`; the lower one is its negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenvalueShift {
    /// `|E₀| (1 + B²/(2E₀²))`
    pub expanded: f64,
    /// `√(E₀² + B²)`
    pub exact: f64,
}

pub fn eigenvalue_shift(e0: f64, b: f64) -> Result<EigenvalueShift> {
    if e0 == 0.0 || !e0.is_finite() || !b.is_finite() {
        return Err(Error::InvalidParameter {
            name: "E0",
            reason: "must be finite and non-zero",
        });
    }
    Ok(EigenvalueShift {
        expanded: math::abs(e0) * (1.0 + b * b / (2.0 * e0 * e0)),
        exact: math::hypot(e0, b),
    })
}
