//! Liouville transport by characteristics.
//!
//! A density is represented by weighted sample points. Each point follows
//! one of the engines' flows; weights are fixed at sampling time and never
//! written again, so normalization and positivity hold exactly.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::continuum::{integrate_continuum, ContinuumState};
use crate::discrete::DiscreteSystem;
use crate::error::{Error, Result};
use crate::hybrid::{hybrid_rhs, integrate_hybrid_with, HybridModel};
use crate::math;
use crate::model::{DiscreteState, HybridState, PotentialSpec};

/// Identifier of the generator behind [`sample_initial`], recorded in outputs.
pub const RNG_ALGORITHM: &str = "ChaCha20Rng";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityShape {
    /// Independent normals; `widths` are standard deviations.
    Gaussian,
    /// Uniform on `[center − width, center + width]` per coordinate.
    UniformBox,
    /// Every member at `center`.
    Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensitySpec {
    pub shape: DensityShape,
    pub center: Vec<f64>,
    pub widths: Vec<f64>,
    pub seed: u64,
}

impl DensitySpec {
    pub fn point(center: Vec<f64>) -> Self {
        let widths = alloc::vec![0.0; center.len()];
        Self {
            shape: DensityShape::Point,
            center,
            widths,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "center",
                reason: "must be finite",
            });
        }
        if self.shape != DensityShape::Point {
            if self.widths.len() != self.center.len() {
                return Err(Error::InvalidParameter {
                    name: "widths",
                    reason: "must have one entry per coordinate",
                });
            }
            if self.widths.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "widths",
                    reason: "must be finite and > 0",
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MemberState {
    /// Two consecutive states of the recurrence.
    Discrete {
        prev: DiscreteState,
        curr: DiscreteState,
    },
    Continuum(ContinuumState),
    Hybrid(HybridState),
}

impl MemberState {
    /// Flat coordinates the flow acts on: 8 for a discrete pair
    /// (`prev` then `curr`, each `(x, τ, p, 𝒫)`), 4 for a continuum point,
    /// 6 for a hybrid point.
    pub fn flat(&self) -> Vec<f64> {
        match self {
            MemberState::Discrete { prev, curr } => prev.coords().iter().chain(curr.coords().iter()).copied().collect(),
            MemberState::Continuum(s) => s.coords().to_vec(),
            MemberState::Hybrid(s) => s.coords().to_vec(),
        }
    }

    /// Same variant and index/time as `self`, with new flat coordinates.
    pub fn with_flat(&self, z: &[f64]) -> Self {
        match self {
            MemberState::Discrete { prev, curr } => MemberState::Discrete {
                prev: DiscreteState::from_coords(prev.n, [z[0], z[1], z[2], z[3]]),
                curr: DiscreteState::from_coords(curr.n, [z[4], z[5], z[6], z[7]]),
            },
            MemberState::Continuum(s) => MemberState::Continuum(ContinuumState::from_coords(s.t, z)),
            MemberState::Hybrid(s) => MemberState::Hybrid(HybridState::from_coords(s.t, z)),
        }
    }

    pub fn hybrid(&self) -> Option<&HybridState> {
        match self {
            MemberState::Hybrid(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleMember {
    weight: f64,
    pub state: MemberState,
}

impl EnsembleMember {
    pub fn weight(&self) -> f64 {
        self.weight
    }
}

/// Which flow carries the members. The horizon passed to
/// [`Engine::advance`] is always external time; the discrete engine takes
/// `round(horizon / l)` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Engine {
    Discrete(DiscreteSystem),
    Continuum {
        v: PotentialSpec,
        vtau: PotentialSpec,
        dt: f64,
    },
    Hybrid {
        model: HybridModel,
        dt: f64,
        tolerance: f64,
    },
}

impl Engine {
    /// Number of coordinates a [`DensitySpec`] must describe:
    /// `(x, τ, p, 𝒫)` for the discrete and continuum engines,
    /// `(x, p, X1, X2, P1, P2)` for the hybrid one.
    pub fn sample_dim(&self) -> usize {
        match self {
            Engine::Hybrid { .. } => 6,
            _ => 4,
        }
    }

    /// Builds a member state at `t = 0` from sampled coordinates. Discrete
    /// members get their second state from the fourth-order bootstrap;
    /// hybrid members are projected onto the `C = 1` sphere.
    pub fn state_from_sample(&self, z: &[f64]) -> Result<MemberState> {
        match self {
            Engine::Discrete(sys) => {
                let s0 = DiscreteState::new(0, z[0], z[1], z[2], z[3]);
                let s1 = sys.bootstrap_state1(&s0)?;
                Ok(MemberState::Discrete { prev: s0, curr: s1 })
            }
            Engine::Continuum { .. } => Ok(MemberState::Continuum(ContinuumState::new(0.0, z[0], z[1], z[2], z[3]))),
            Engine::Hybrid { .. } => Ok(MemberState::Hybrid(HybridState::from_coords(0.0, z).normalized()?)),
        }
    }

    fn steps(&self, horizon: f64) -> Result<usize> {
        if !(horizon >= 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidParameter {
                name: "horizon",
                reason: "must be finite and >= 0",
            });
        }
        let step = match self {
            Engine::Discrete(sys) => sys.l,
            Engine::Continuum { dt, .. } | Engine::Hybrid { dt, .. } => *dt,
        };
        Ok(math::round(horizon / step) as usize)
    }

    /// Advances one member over `horizon` units of external time.
    pub fn advance(&self, state: &MemberState, horizon: f64) -> Result<MemberState> {
        let steps = self.steps(horizon)?;
        match (self, state) {
            (Engine::Discrete(sys), MemberState::Discrete { prev, curr }) => {
                let traj = sys.run(*prev, *curr, steps)?;
                let s = traj.states();
                let n = s.len();
                Ok(MemberState::Discrete {
                    prev: s[n - 2],
                    curr: s[n - 1],
                })
            }
            (Engine::Continuum { v, vtau, dt }, MemberState::Continuum(s)) => {
                let run = integrate_continuum(*s, v, vtau, *dt, steps)?;
                Ok(MemberState::Continuum(run[run.len() - 1]))
            }
            (Engine::Hybrid { model, dt, tolerance }, MemberState::Hybrid(s)) => {
                let run = integrate_hybrid_with(*s, model, *dt, steps, *tolerance, hybrid_rhs)?;
                Ok(MemberState::Hybrid(run[run.len() - 1]))
            }
            _ => Err(Error::InvalidParameter {
                name: "engine",
                reason: "member state does not match the engine",
            }),
        }
    }
}

/// `n` members with equal weights `1/n`. Sampling is deterministic given
/// `spec.seed` ([`RNG_ALGORITHM`] seeded from the 64-bit seed).
pub fn sample_initial(spec: &DensitySpec, n: usize, engine: &Engine) -> Result<Vec<EnsembleMember>> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::EmptyEnsemble);
    }
    if spec.center.len() != engine.sample_dim() {
        return Err(Error::InvalidParameter {
            name: "center",
            reason: "dimension does not match the engine",
        });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let weight = 1.0 / n as f64;
    let mut out = Vec::with_capacity(n);
    let mut z = spec.center.clone();
    for _ in 0..n {
        for (k, zk) in z.iter_mut().enumerate() {
            let (c, w) = (spec.center[k], spec.widths.get(k).copied().unwrap_or(0.0));
            *zk = match spec.shape {
                DensityShape::Point => c,
                DensityShape::Gaussian => {
                    let g: f64 = rng.sample(StandardNormal);
                    c + w * g
                }
                DensityShape::UniformBox => c + w * rng.random_range(-1.0..=1.0),
            };
        }
        out.push(EnsembleMember {
            weight,
            state: engine.state_from_sample(&z)?,
        });
    }
    Ok(out)
}

/// Advances every member independently. Weights are copied unchanged.
pub fn propagate_ensemble(members: &[EnsembleMember], engine: &Engine, horizon: f64) -> Result<Vec<EnsembleMember>> {
    members
        .iter()
        .enumerate()
        .map(|(index, m)| {
            engine
                .advance(&m.state, horizon)
                .map(|state| EnsembleMember {
                    weight: m.weight,
                    state,
                })
                .map_err(|e| Error::Member {
                    index,
                    source: alloc::boxed::Box::new(e),
                })
        })
        .collect()
}

/// Weighted mean, summed in member order.
pub fn ensemble_expectation<F>(members: &[EnsembleMember], observable: F) -> Result<f64>
where
    F: Fn(&MemberState) -> f64,
{
    if members.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let (mut num, mut den) = (0.0, 0.0);
    for m in members {
        num += m.weight * observable(&m.state);
        den += m.weight;
    }
    Ok(num / den)
}

pub fn total_weight(members: &[EnsembleMember]) -> f64 {
    members.iter().map(|m| m.weight).sum()
}

/// Determinant of the central-difference Jacobian of `flow` at `point`.
/// Coordinate `k` is displaced by `±h max(1, |z_k|)`.
pub fn flow_jacobian_det<F>(flow: F, point: &[f64], h: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if !(h > 0.0) {
        return Err(Error::InvalidParameter {
            name: "h",
            reason: "must be > 0",
        });
    }
    let d = point.len();
    let mut jac = DMatrix::<f64>::zeros(d, d);
    let mut w = point.to_vec();
    for k in 0..d {
        let step = h * f64::max(1.0, math::abs(point[k]));
        let (plus, minus) = (point[k] + step, point[k] - step);
        w[k] = plus;
        let fp = flow(&w)?;
        w[k] = minus;
        let fm = flow(&w)?;
        w[k] = point[k];
        for i in 0..d {
            jac[(i, k)] = (fp[i] - fm[i]) / (plus - minus);
        }
    }
    Ok(jac.determinant())
}

/// Jacobian determinant of an engine's flow over `horizon`, in the flat
/// coordinates of [`MemberState::flat`]. The hybrid constraint guard is
/// disabled here because displaced points leave the `C = 1` sphere.
pub fn engine_flow_jacobian_det(engine: &Engine, state: &MemberState, horizon: f64, h: f64) -> Result<f64> {
    let engine = match *engine {
        Engine::Hybrid { model, dt, .. } => Engine::Hybrid {
            model,
            dt,
            tolerance: f64::INFINITY,
        },
        other => other,
    };
    let flow = |z: &[f64]| engine.advance(&state.with_flat(z), horizon).map(|s| s.flat());
    flow_jacobian_det(flow, &state.flat(), h)
}
