//! Invariant checks behind `timemachine verify`.
//!
//! The hybrid checks take the rhs as a parameter, so a deliberately broken
//! rhs can be fed through them to confirm that they notice.

use std::f64::consts::PI;

use timemachine_core::bracket::{jacobi_residual, FiniteDiff};
use timemachine_core::continuum::{
    convergence_study, integrate_continuum, integrate_internal_time, integrate_xp_with_lapse, ContinuumState,
    ConvergenceScenario, LapseSolution, ObservedOrder,
};
use timemachine_core::discrete::{free_solution, DiscreteSystem};
use timemachine_core::ensemble::{
    engine_flow_jacobian_det, propagate_ensemble, sample_initial, total_weight, DensityShape, DensitySpec, Engine,
    MemberState,
};
use timemachine_core::hybrid::{
    bracket_flow, generalized_bracket, integrate_hybrid_with, integrate_qbit_driven, integrate_schrodinger,
    qbit_expectation, retrace_defect, HybridModel, QbitSample, RhsFn, ALL_PAIRS,
};
use timemachine_core::oracles::{eigenvalue_shift, green_x, otilde_history};
use timemachine_core::{DiscreteState, HybridState, ModelParams, ObservableMatrix, PotentialSpec, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Quick,
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub module: &'static str,
    pub name: &'static str,
    /// NaN when the check could not run (e.g. the integration failed).
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckResult {
    fn new(module: &'static str, name: &'static str, measured: Result<f64>, tolerance: f64) -> Self {
        let measured = measured.unwrap_or(f64::NAN);
        Self {
            module,
            name,
            measured,
            tolerance,
            pass: measured <= tolerance,
        }
    }
}

type CheckFn = fn(RhsFn) -> Result<f64>;

struct Check {
    module: &'static str,
    name: &'static str,
    tolerance: f64,
    level: Level,
    run: CheckFn,
}

const CHECKS: &[Check] = &[
    Check {
        module: "core-model",
        name: "sigma2/2 expectation identity",
        tolerance: 1e-12,
        level: Level::Quick,
        run: otilde_identity,
    },
    Check {
        module: "discrete-engine",
        name: "reversibility",
        tolerance: 1e-8,
        level: Level::Quick,
        run: discrete_reversibility,
    },
    Check {
        module: "discrete-engine",
        name: "free solution",
        tolerance: 1e-12,
        level: Level::Quick,
        run: discrete_free,
    },
    Check {
        module: "continuum-engine",
        name: "lapse oracle",
        tolerance: 1e-8,
        level: Level::Quick,
        run: lapse_oracle,
    },
    Check {
        module: "continuum-engine",
        name: "sub-energy drift per unit time",
        tolerance: 1e-9,
        level: Level::Quick,
        run: sub_energies,
    },
    Check {
        module: "continuum-engine",
        name: "convergence order |q - 2|",
        tolerance: 0.3,
        level: Level::Full,
        run: convergence_order,
    },
    Check {
        module: "hybrid-engine",
        name: "rhs matches bracket flow",
        tolerance: 1e-6,
        level: Level::Quick,
        run: flow_matches_bracket,
    },
    Check {
        module: "hybrid-engine",
        name: "Jacobi identity",
        tolerance: 1e-5,
        level: Level::Quick,
        run: jacobi,
    },
    Check {
        module: "hybrid-engine",
        name: "sector separation",
        tolerance: 1e-10,
        level: Level::Quick,
        run: sector_separation,
    },
    Check {
        module: "hybrid-engine",
        name: "constraint drift per unit time",
        tolerance: 1e-9,
        level: Level::Quick,
        run: constraint_drift,
    },
    Check {
        module: "hybrid-engine",
        name: "uncoupled oscillator oracle",
        tolerance: 1e-6,
        level: Level::Quick,
        run: uncoupled_oracle,
    },
    Check {
        module: "hybrid-engine",
        name: "Hamilton / Schrodinger agreement",
        tolerance: 1e-8,
        level: Level::Full,
        run: schrodinger,
    },
    Check {
        module: "hybrid-engine",
        name: "uncoupled retrace defect",
        tolerance: 1e-6,
        level: Level::Full,
        run: retrace_free,
    },
    Check {
        module: "oracles",
        name: "eigenvalue shift expansion",
        tolerance: 1.0,
        level: Level::Quick,
        run: eigenvalue_margin,
    },
    Check {
        module: "oracles",
        name: "retarded solution residual",
        tolerance: 1e-3,
        level: Level::Quick,
        run: green_coarse,
    },
    Check {
        module: "oracles",
        name: "quadrature halving ratio |r - 4|",
        tolerance: 0.4,
        level: Level::Full,
        run: quadrature_ratio,
    },
    Check {
        module: "ensemble",
        name: "weights preserved",
        tolerance: 0.0,
        level: Level::Quick,
        run: weights_preserved,
    },
    Check {
        module: "ensemble",
        name: "continuum Jacobian |det - 1|",
        tolerance: 1e-6,
        level: Level::Quick,
        run: continuum_jacobian,
    },
    Check {
        module: "ensemble",
        name: "hybrid Jacobian |det - 1|",
        tolerance: 1e-6,
        level: Level::Full,
        run: hybrid_jacobian,
    },
];

/// Runs every check at `level` (full includes the quick ones).
pub fn run_checks(level: Level, rhs: RhsFn) -> Vec<CheckResult> {
    CHECKS
        .iter()
        .filter(|c| level == Level::Full || c.level == Level::Quick)
        .map(|c| CheckResult::new(c.module, c.name, (c.run)(rhs), c.tolerance))
        .collect()
}

fn model(lambda: f64) -> HybridModel {
    HybridModel::with_default_observable(ModelParams {
        lambda,
        ..ModelParams::default()
    })
    .expect("default parameters are valid")
}

fn reference_qbit() -> HybridState {
    HybridState::new(0.0, 1.0, 0.0, [1.0, 0.0], [0.0, 1.0])
}

/// Deterministic spread of unit-constraint points.
fn probe_points(n: usize) -> Vec<HybridState> {
    (1..=n)
        .map(|k| {
            let z: [f64; 7] = core::array::from_fn(|j| (k as f64 * (1.0 + j as f64) * 0.618_033_988_749_895).sin());
            HybridState::new(3.0 * (z[6] + 1.0), z[0], z[1], [z[2], z[3] + 1.5], [z[4], z[5]])
                .normalized()
                .expect("q-bit part is non-zero")
        })
        .collect()
}

fn per_unit_time(drifts: impl Iterator<Item = (f64, f64)>) -> f64 {
    drifts.map(|(t, d)| d / t.max(1.0)).fold(0.0, f64::max)
}

fn otilde_identity(_: RhsFn) -> Result<f64> {
    let o = ObservableMatrix::sigma2_half();
    Ok(probe_points(200)
        .iter()
        .map(|s| (qbit_expectation(&o, s) - (s.qx[0] * s.qp[1] - s.qx[1] * s.qp[0])).abs())
        .fold(0.0, f64::max))
}

fn discrete_reversibility(_: RhsFn) -> Result<f64> {
    let sys = DiscreteSystem::new(PotentialSpec::harmonic(0.5)?, PotentialSpec::harmonic(1.0)?, 1e-2)?;
    let traj = sys.run_from(DiscreteState::new(0, 0.8, 0.3, -0.6, 0.9), 2000)?;
    let st = traj.states();
    let n = st.len();
    let back = sys.run_backward(st[n - 2], st[n - 1], n - 2)?;
    Ok(back[0].max_abs_diff(&st[0]).max(back[1].max_abs_diff(&st[1])))
}

fn discrete_free(_: RhsFn) -> Result<f64> {
    let l = 0.1;
    let sys = DiscreteSystem::new(PotentialSpec::zero(), PotentialSpec::zero(), l)?;
    let s0 = DiscreteState::new(0, 0.0, 0.0, 1.0, 1.0);
    let s1 = DiscreteState::new(1, 0.1, 0.2, 1.0, 1.0);
    let traj = sys.run(s0, s1, 100)?;
    Ok(traj
        .states()
        .iter()
        .map(|s| {
            let e = free_solution(l, &s0, &s1, s.n);
            s.max_abs_diff(&e) / e.coords().iter().fold(1.0f64, |m, c| m.max(c.abs()))
        })
        .fold(0.0, f64::max))
}

fn lapse_oracle(_: RhsFn) -> Result<f64> {
    let dt = 1e-3;
    let lapse = integrate_internal_time(
        0.0,
        1.0,
        &PotentialSpec::harmonic(1.0)?,
        dt,
        (2.0 * PI / dt).ceil() as usize,
    )?;
    Ok(lapse
        .samples()
        .iter()
        .map(|s| (s.tau - s.t.sin()).abs())
        .fold(0.0, f64::max))
}

fn sub_energies(_: RhsFn) -> Result<f64> {
    let dt = 1e-3;
    let steps = (2.0 * PI / dt).ceil() as usize;
    let v = PotentialSpec::harmonic(0.5)?;
    let vtau = PotentialSpec::harmonic(1.0)?;
    let joint = integrate_continuum(ContinuumState::new(0.0, 1.0, 0.0, 0.3, 1.0), &v, &vtau, dt, steps)?;
    let (ex, et) = (joint[0].xp_energy(&v), joint[0].tau_energy(&vtau));
    let mut worst = per_unit_time(joint.iter().map(|s| (s.t, (s.xp_energy(&v) - ex).abs())));
    worst = worst.max(per_unit_time(
        joint.iter().map(|s| (s.t, (s.tau_energy(&vtau) - et).abs())),
    ));
    let xp = integrate_xp_with_lapse(1.0, 0.3, &v, &LapseSolution::closed_form(1.0, 1.0, dt, steps)?)?;
    let e0 = 0.5 * xp[0].p * xp[0].p + v.eval(xp[0].x);
    Ok(worst.max(per_unit_time(
        xp.iter().map(|s| (s.t, (0.5 * s.p * s.p + v.eval(s.x) - e0).abs())),
    )))
}

fn convergence_order(_: RhsFn) -> Result<f64> {
    let sc = ConvergenceScenario {
        v: PotentialSpec::harmonic(0.5)?,
        vtau: PotentialSpec::harmonic(1.0)?,
        start: DiscreteState::new(0, 1.0, 0.0, 0.0, 1.0),
        t_final: 1.0,
        reference_dt: 1e-4,
    };
    Ok(match convergence_study(&sc, &[1e-2, 5e-3, 2.5e-3])?.order {
        ObservedOrder::Order(q) => (q - 2.0).abs(),
        ObservedOrder::Exact => f64::INFINITY,
    })
}

fn flow_matches_bracket(rhs: RhsFn) -> Result<f64> {
    let m = model(0.1);
    Ok(probe_points(20)
        .iter()
        .map(|s| {
            let b = bracket_flow(s, &m, FiniteDiff::default());
            b.iter()
                .zip(rhs(s, &m).as_array())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max))
}

fn jacobi(_: RhsFn) -> Result<f64> {
    let f = |w: &[f64]| w[0] * w[1] * w[2] + w[3] * w[3] * w[4];
    let g = |w: &[f64]| w[5] * w[0] * w[0] - w[1] * w[4];
    let h = |w: &[f64]| w[2] * w[3] * w[5] + w[1];
    let fd = FiniteDiff::default();
    Ok(probe_points(10)
        .iter()
        .map(|s| jacobi_residual(&f, &g, &h, &s.coords(), &ALL_PAIRS, fd).abs())
        .fold(0.0, f64::max))
}

fn hybrid_run(lambda: f64, dt: f64, steps: usize, rhs: RhsFn) -> Result<Vec<HybridState>> {
    integrate_hybrid_with(reference_qbit(), &model(lambda), dt, steps, 1e-6, rhs)
}

fn constraint_drift(rhs: RhsFn) -> Result<f64> {
    let dt = 1e-3;
    let run = hybrid_run(0.1, dt, (2.0 * PI / dt).round() as usize, rhs)?;
    Ok(per_unit_time(run.iter().map(|s| (s.t, (s.constraint() - 1.0).abs()))))
}

fn uncoupled_oracle(rhs: RhsFn) -> Result<f64> {
    let dt = 1e-4;
    let run = hybrid_run(0.0, dt, (2.0 * PI / dt).round() as usize, rhs)?;
    Ok(run
        .iter()
        .map(|s| (s.x - (5.0 * s.t.sin()).cos()).abs())
        .fold(0.0, f64::max))
}

fn schrodinger(_: RhsFn) -> Result<f64> {
    let m = model(0.1);
    let driver = |t: f64| (5.0 * t.sin()).cos();
    let dt = 1e-4;
    let steps = (2.0 * PI / dt).round() as usize;
    let start = QbitSample {
        t: 0.0,
        qx: [1.0, 0.0],
        qp: [0.0, 1.0],
    };
    let a = integrate_qbit_driven(start, &m, &driver, dt, steps);
    let b = integrate_schrodinger(start, &m, &driver, dt, steps);
    Ok(a.iter().zip(&b).map(|(u, v)| u.max_abs_diff(v)).fold(0.0, f64::max))
}

fn retrace_free(rhs: RhsFn) -> Result<f64> {
    Ok(retrace_defect(&hybrid_run(0.0, PI / 31416.0, 31416, rhs)?))
}

/// Worst `|expanded − exact| / (1.5 B⁴/8)`; must stay below 1.
fn eigenvalue_margin(_: RhsFn) -> Result<f64> {
    let mut worst = 0.0f64;
    for b in [0.05, 0.1, 0.2, 0.3] {
        let e = eigenvalue_shift(1.0, b)?;
        worst = worst.max((e.expanded - e.exact).abs() / (1.5 * b.powi(4) / 8.0));
    }
    Ok(worst)
}

fn green_coarse(rhs: RhsFn) -> Result<f64> {
    let m = model(0.1);
    let run = hybrid_run(0.1, 1e-3, (2.0 * PI / 1e-3).round() as usize, rhs)?;
    let hist = otilde_history(&run, &m.params)?;
    let mut worst = 0.0f64;
    for s in run.iter().step_by(50) {
        worst = worst.max((green_x(s.t, &m.params, &hist)? - s.x).abs() / m.params.x1);
    }
    Ok(worst)
}

fn quadrature_ratio(rhs: RhsFn) -> Result<f64> {
    let m = model(0.1);
    let dt = 1e-4;
    let run = hybrid_run(0.1, dt, (2.0 * PI / dt).round() as usize, rhs)?;
    let full = otilde_history(&run, &m.params)?;
    let coarse_err = |stride: usize| -> Result<f64> {
        let h = full.subsample(stride);
        let mut worst = 0.0f64;
        for s in run.iter().step_by(800) {
            worst = worst.max((green_x(s.t, &m.params, &h)? - green_x(s.t, &m.params, &full)?).abs());
        }
        Ok(worst)
    };
    Ok((coarse_err(40)? / coarse_err(20)? - 4.0).abs())
}

fn weights_preserved(_: RhsFn) -> Result<f64> {
    let engine = Engine::Continuum {
        v: PotentialSpec::harmonic(0.5)?,
        vtau: PotentialSpec::harmonic(1.0)?,
        dt: 1e-2,
    };
    let spec = DensitySpec {
        shape: DensityShape::Gaussian,
        center: vec![1.0, 0.0, 0.0, 1.0],
        widths: vec![0.1; 4],
        seed: 11,
    };
    let members = sample_initial(&spec, 32, &engine)?;
    let out = propagate_ensemble(&members, &engine, 1.0)?;
    let per_member = members
        .iter()
        .zip(&out)
        .map(|(a, b)| (a.weight() - b.weight()).abs())
        .fold(0.0, f64::max);
    Ok(per_member.max((total_weight(&members) - total_weight(&out)).abs()))
}

fn continuum_jacobian(_: RhsFn) -> Result<f64> {
    let engine = Engine::Continuum {
        v: PotentialSpec::harmonic(0.5)?,
        vtau: PotentialSpec::harmonic(1.0)?,
        dt: 1e-3,
    };
    let s = MemberState::Continuum(ContinuumState::new(0.0, 1.0, 0.0, 0.0, 1.0));
    Ok((engine_flow_jacobian_det(&engine, &s, 2.0, 1e-5)? - 1.0).abs())
}

fn hybrid_jacobian(_: RhsFn) -> Result<f64> {
    let engine = Engine::Hybrid {
        model: model(0.1),
        dt: 1e-4,
        tolerance: 1e-6,
    };
    let s = MemberState::Hybrid(reference_qbit());
    Ok((engine_flow_jacobian_det(&engine, &s, 2.0 * PI, 1e-5)? - 1.0).abs())
}

/// Cross bracket of a purely classical and a purely quantum function.
fn sector_separation(_: RhsFn) -> Result<f64> {
    let cl = |w: &[f64]| w[0] * w[0] * w[1] - w[0];
    let qm = |w: &[f64]| w[2] * w[5] - w[3] * w[4];
    Ok(probe_points(10)
        .iter()
        .map(|s| generalized_bracket(&cl, &qm, s, FiniteDiff::default()).abs())
        .fold(0.0, f64::max))
}
