//! The scenario registry and the code that runs each scenario.

use std::time::Instant;

use timemachine_core::continuum::{
    integrate_internal_frame, integrate_internal_time, integrate_xp_with_lapse, LapseSolution,
};
use timemachine_core::discrete::{constant_force_seed, DiscreteSystem};
use timemachine_core::ensemble::{
    ensemble_expectation, propagate_ensemble, sample_initial, total_weight, Engine, EnsembleMember, MemberState,
    RNG_ALGORITHM,
};
use timemachine_core::hybrid::{hybrid_hamiltonian_total, hybrid_rhs, integrate_hybrid_with, HybridModel};
use timemachine_core::model::{energy_e_n, hamiltonian_h_n, kappa_k_n, PotentialKind};
use timemachine_core::{DiscreteState, HybridState, PotentialSpec};

use crate::config::{reject, FieldError, ScenarioConfig, Validated};
use crate::record::{Metadata, RunRecord};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    FreeDiscrete,
    ConstantForceDiscrete,
    HarmonicLapse,
    TimeMachineContinuum,
    HybridQbit,
    EnsembleDiscrete,
    EnsembleContinuum,
    EnsembleHybrid,
}

pub const SCENARIOS: [(ScenarioKind, &str, &str); 8] = [
    (
        ScenarioKind::FreeDiscrete,
        "free-discrete",
        "discrete recurrence without forces",
    ),
    (
        ScenarioKind::ConstantForceDiscrete,
        "constant-force-discrete",
        "discrete recurrence with a constant force on x or on tau, seeded on the exact polynomial solution",
    ),
    (
        ScenarioKind::HarmonicLapse,
        "harmonic-lapse",
        "internal time from a harmonic potential, driving (x, p) in V",
    ),
    (
        ScenarioKind::TimeMachineContinuum,
        "time-machine-continuum",
        "tau = taubar sin(omega t) driving an oscillator of frequency Omega, plus the internal-frame solution",
    ),
    (
        ScenarioKind::HybridQbit,
        "hybrid-qbit",
        "oscillator time machine coupled to a q-bit",
    ),
    (
        ScenarioKind::EnsembleDiscrete,
        "ensemble-discrete",
        "sampled density carried by the discrete recurrence",
    ),
    (
        ScenarioKind::EnsembleContinuum,
        "ensemble-continuum",
        "sampled density carried by the joint continuum flow",
    ),
    (
        ScenarioKind::EnsembleHybrid,
        "ensemble-hybrid",
        "sampled density carried by the hybrid flow",
    ),
];

const HYBRID_CONVENTION: &str = "classical part zeta/2 cos(omega t) (p^2 + Omega^2 x^2)";
const CONTINUUM_CONVENTION: &str = "V(x) = Omega^2 x^2 / 2";

impl ScenarioKind {
    pub fn parse(name: &str) -> Option<Self> {
        SCENARIOS.iter().find(|(_, n, _)| *n == name).map(|(k, _, _)| *k)
    }

    pub fn name(self) -> &'static str {
        SCENARIOS
            .iter()
            .find(|(k, _, _)| *k == self)
            .map(|(_, n, _)| *n)
            .expect("registered")
    }

    pub fn is_ensemble(self) -> bool {
        matches!(
            self,
            ScenarioKind::EnsembleDiscrete | ScenarioKind::EnsembleContinuum | ScenarioKind::EnsembleHybrid
        )
    }

    pub fn sample_dim(self) -> usize {
        match self {
            ScenarioKind::EnsembleHybrid | ScenarioKind::HybridQbit => 6,
            _ => 4,
        }
    }

    pub(crate) fn check_requirements(
        self,
        cfg: &ScenarioConfig,
        v: &PotentialSpec,
        vtau: &PotentialSpec,
        errors: &mut Vec<FieldError>,
    ) {
        let forceless = |p: &PotentialSpec| matches!(p.kind, PotentialKind::Zero | PotentialKind::Constant);
        let polynomial = |p: &PotentialSpec| !matches!(p.kind, PotentialKind::Harmonic);
        match self {
            ScenarioKind::FreeDiscrete => {
                if !forceless(v) {
                    reject(
                        errors,
                        "potential.kind",
                        "free-discrete needs a zero or constant potential",
                    );
                }
                if !forceless(vtau) {
                    reject(
                        errors,
                        "internal_potential.kind",
                        "free-discrete needs a zero or constant potential",
                    );
                }
            }
            ScenarioKind::ConstantForceDiscrete => {
                if !polynomial(v) {
                    reject(
                        errors,
                        "potential.kind",
                        "constant-force-discrete needs zero, constant or linear",
                    );
                }
                if !polynomial(vtau) {
                    reject(
                        errors,
                        "internal_potential.kind",
                        "constant-force-discrete needs zero, constant or linear",
                    );
                }
                if v.gradient(0.0) != 0.0 && vtau.gradient(0.0) != 0.0 {
                    reject(
                        errors,
                        "internal_potential.c1",
                        "at most one of the two forces may be non-zero",
                    );
                }
            }
            ScenarioKind::HarmonicLapse => {
                if vtau.kind != PotentialKind::Harmonic {
                    reject(
                        errors,
                        "internal_potential.kind",
                        "harmonic-lapse needs a harmonic internal potential",
                    );
                }
            }
            ScenarioKind::HybridQbit => {
                let s = hybrid_initial(cfg);
                if (s.constraint() - 1.0).abs() > cfg.run.constraint_tolerance {
                    reject(
                        errors,
                        "initial",
                        "q-bit coordinates must satisfy (X1^2+X2^2+P1^2+P2^2)/2 = 1",
                    );
                }
            }
            ScenarioKind::TimeMachineContinuum
            | ScenarioKind::EnsembleDiscrete
            | ScenarioKind::EnsembleContinuum
            | ScenarioKind::EnsembleHybrid => {}
        }
    }
}

fn hybrid_initial(cfg: &ScenarioConfig) -> HybridState {
    HybridState::from_coords(0.0, &cfg.initial.hybrid())
}

fn discrete_initial(cfg: &ScenarioConfig) -> DiscreteState {
    DiscreteState::from_coords(0, cfg.initial.discrete())
}

/// Row indices kept by `stride`: multiples of it, plus the last row.
fn kept(k: usize, last: usize, stride: usize) -> bool {
    k.is_multiple_of(stride) || k == last
}

struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Option<f64>>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

fn all(values: &[f64]) -> Vec<Option<f64>> {
    values.iter().map(|v| Some(*v)).collect()
}

/// Runs a validated scenario. Nothing is written to disk here.
pub fn run_scenario(cfg: &Validated) -> Result<RunRecord, CliError> {
    let started = Instant::now();
    let stride = cfg.raw.run.stride as usize;
    let steps = cfg.raw.run.steps as usize;
    let mut convention = None;
    let (mut seed, mut rng) = (None, None);
    let table = match cfg.kind {
        ScenarioKind::FreeDiscrete => {
            let sys = DiscreteSystem::new(cfg.v, cfg.vtau, cfg.params.l)?;
            discrete_table(&sys, sys.run_from(discrete_initial(&cfg.raw), steps)?.states(), stride)?
        }
        ScenarioKind::ConstantForceDiscrete => {
            let sys = DiscreteSystem::new(cfg.v, cfg.vtau, cfg.params.l)?;
            let s0 = discrete_initial(&cfg.raw);
            let s1 = constant_force_seed(&sys, &s0).expect("potentials checked during validation");
            discrete_table(&sys, sys.run(s0, s1, steps)?.states(), stride)?
        }
        ScenarioKind::HarmonicLapse => {
            let s0 = discrete_initial(&cfg.raw);
            let lapse = integrate_internal_time(s0.tau, s0.pcal, &cfg.vtau, cfg.params.dt, steps)?;
            let xp = integrate_xp_with_lapse(s0.x, s0.p, &cfg.v, &lapse)?;
            let mut t = Table::new(&["t", "tau", "pcal", "tau_dot", "x", "p", "E_xp", "E_tau", "Hc"]);
            let last = xp.len() - 1;
            for (_, (l, s)) in lapse
                .samples()
                .iter()
                .zip(&xp)
                .enumerate()
                .filter(|(k, _)| kept(*k, last, stride))
            {
                let e = 0.5 * s.p * s.p + cfg.v.eval(s.x);
                t.push(all(&[
                    l.t,
                    l.tau,
                    l.pcal,
                    l.tau_dot,
                    s.x,
                    s.p,
                    e,
                    l.pcal * l.pcal + cfg.vtau.eval(l.tau),
                    l.tau_dot * e,
                ]));
            }
            t
        }
        ScenarioKind::TimeMachineContinuum => {
            convention = Some(CONTINUUM_CONVENTION.to_string());
            let p = &cfg.params;
            let v = if p.big_omega > 0.0 {
                PotentialSpec::harmonic(0.5 * p.big_omega * p.big_omega)?
            } else {
                PotentialSpec::zero()
            };
            let lapse = LapseSolution::closed_form(p.taubar, p.omega, p.dt, steps)?;
            let (x0, p0) = (p.x1 * p.phi.cos(), 0.0 - p.x1 * p.big_omega * p.phi.sin());
            let xp = integrate_xp_with_lapse(x0, p0, &v, &lapse)?;
            let frame = integrate_internal_frame(x0, p0, &v, &lapse)?;
            let mut t = Table::new(&["t", "tau", "tau_dot", "x", "p", "x_frame", "E_xp", "Hc"]);
            let last = xp.len() - 1;
            for (k, ((l, s), f)) in lapse.samples().iter().zip(&xp).zip(&frame).enumerate() {
                if !kept(k, last, stride) {
                    continue;
                }
                let e = 0.5 * s.p * s.p + v.eval(s.x);
                t.push(all(&[l.t, l.tau, l.tau_dot, s.x, s.p, f.x, e, l.tau_dot * e]));
            }
            t
        }
        ScenarioKind::HybridQbit => {
            convention = Some(HYBRID_CONVENTION.to_string());
            let model = HybridModel::with_default_observable(cfg.params)?;
            let run = integrate_hybrid_with(
                hybrid_initial(&cfg.raw),
                &model,
                cfg.params.dt,
                steps,
                cfg.raw.run.constraint_tolerance,
                hybrid_rhs,
            )?;
            let mut t = Table::new(&["t", "x", "p", "X1", "X2", "P1", "P2", "C", "Hsigma"]);
            let last = run.len() - 1;
            for (k, s) in run.iter().enumerate() {
                if kept(k, last, stride) {
                    t.push(all(&[
                        s.t,
                        s.x,
                        s.p,
                        s.qx[0],
                        s.qx[1],
                        s.qp[0],
                        s.qp[1],
                        s.constraint(),
                        hybrid_hamiltonian_total(s, &model),
                    ]));
                }
            }
            t
        }
        ScenarioKind::EnsembleDiscrete | ScenarioKind::EnsembleContinuum | ScenarioKind::EnsembleHybrid => {
            let density = cfg.density.as_ref().expect("checked during validation");
            seed = Some(density.seed);
            rng = Some(RNG_ALGORITHM.to_string());
            let engine = match cfg.kind {
                ScenarioKind::EnsembleDiscrete => Engine::Discrete(DiscreteSystem::new(cfg.v, cfg.vtau, cfg.params.l)?),
                ScenarioKind::EnsembleContinuum => Engine::Continuum {
                    v: cfg.v,
                    vtau: cfg.vtau,
                    dt: cfg.params.dt,
                },
                _ => {
                    convention = Some(HYBRID_CONVENTION.to_string());
                    Engine::Hybrid {
                        model: HybridModel::with_default_observable(cfg.params)?,
                        dt: cfg.params.dt,
                        tolerance: cfg.raw.run.constraint_tolerance,
                    }
                }
            };
            let members = sample_initial(density, cfg.raw.run.members as usize, &engine)?;
            ensemble_table(&engine, members, steps, stride)?
        }
    };
    Ok(RunRecord {
        metadata: Metadata {
            version: env!("CARGO_PKG_VERSION").to_string(),
            scenario: cfg.kind.name().to_string(),
            convention,
            seed,
            rng,
            wall_time_s: started.elapsed().as_secs_f64(),
        },
        config: cfg.raw.clone(),
        columns: table.columns,
        rows: table.rows,
    })
}

fn discrete_table(sys: &DiscreteSystem, states: &[DiscreteState], stride: usize) -> Result<Table, CliError> {
    let mut t = Table::new(&["n", "t", "x", "tau", "p", "pcal", "E", "K", "H"]);
    let last = states.len() - 1;
    for (k, s) in states.iter().enumerate() {
        if !kept(k, last, stride) {
            continue;
        }
        let (e, h) = if k == 0 {
            (None, None)
        } else {
            let prev = &states[k - 1];
            (
                Some(energy_e_n(s.p, prev.p, s.x, prev.x, &sys.v)),
                Some(hamiltonian_h_n(s, prev, &sys.v, &sys.vtau, sys.l)?),
            )
        };
        t.push(vec![
            Some(s.n as f64),
            Some(s.n as f64 * sys.l),
            Some(s.x),
            Some(s.tau),
            Some(s.p),
            Some(s.pcal),
            e,
            Some(kappa_k_n(s.pcal, s.tau, sys.l, &sys.vtau)),
            h,
        ]);
    }
    Ok(t)
}

fn ensemble_table(
    engine: &Engine,
    mut members: Vec<EnsembleMember>,
    steps: usize,
    stride: usize,
) -> Result<Table, CliError> {
    let step = match engine {
        Engine::Discrete(sys) => sys.l,
        Engine::Continuum { dt, .. } | Engine::Hybrid { dt, .. } => *dt,
    };
    let mut table = match engine {
        Engine::Discrete(_) => Table::new(&["n", "t", "weight", "x", "tau", "p", "pcal"]),
        Engine::Continuum { .. } => Table::new(&["t", "weight", "x", "tau", "p", "pcal", "E_xp", "E_tau"]),
        Engine::Hybrid { .. } => Table::new(&["t", "weight", "x", "p", "X1", "X2", "P1", "P2", "C", "Hsigma"]),
    };
    let mut done = 0;
    loop {
        table.push(ensemble_row(engine, &members)?);
        if done == steps {
            break;
        }
        let chunk = stride.min(steps - done);
        members = propagate_ensemble(&members, engine, chunk as f64 * step)?;
        done += chunk;
    }
    Ok(table)
}

fn ensemble_row(engine: &Engine, members: &[EnsembleMember]) -> Result<Vec<Option<f64>>, CliError> {
    let mean = |f: &dyn Fn(&MemberState) -> f64| ensemble_expectation(members, f);
    let w = total_weight(members);
    let row = match engine {
        Engine::Discrete(sys) => {
            // The older of the two stored states, so that rows sit at n = 0, stride, ...
            let older = |s: &MemberState| match s {
                MemberState::Discrete { prev, .. } => *prev,
                _ => unreachable!("discrete engine"),
            };
            let n = older(&members[0].state).n as f64;
            vec![
                n,
                n * sys.l,
                w,
                mean(&|s| older(s).x)?,
                mean(&|s| older(s).tau)?,
                mean(&|s| older(s).p)?,
                mean(&|s| older(s).pcal)?,
            ]
        }
        Engine::Continuum { v, vtau, .. } => {
            let get = |s: &MemberState| match s {
                MemberState::Continuum(c) => *c,
                _ => unreachable!("continuum engine"),
            };
            vec![
                get(&members[0].state).t,
                w,
                mean(&|s| get(s).x)?,
                mean(&|s| get(s).tau)?,
                mean(&|s| get(s).p)?,
                mean(&|s| get(s).pcal)?,
                mean(&|s| get(s).xp_energy(v))?,
                mean(&|s| get(s).tau_energy(vtau))?,
            ]
        }
        Engine::Hybrid { model, .. } => {
            let get = |s: &MemberState| *s.hybrid().expect("hybrid engine");
            vec![
                get(&members[0].state).t,
                w,
                mean(&|s| get(s).x)?,
                mean(&|s| get(s).p)?,
                mean(&|s| get(s).qx[0])?,
                mean(&|s| get(s).qx[1])?,
                mean(&|s| get(s).qp[0])?,
                mean(&|s| get(s).qp[1])?,
                mean(&|s| get(s).constraint())?,
                mean(&|s| hybrid_hamiltonian_total(&get(s), model))?,
            ]
        }
    };
    Ok(all(&row))
}
