//! Acceptance suite: one line per criterion, non-zero exit on any failure.
//!
//! Run with `cargo test -p timemachine-core --test acceptance`.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use timemachine_core::bracket::{self, FiniteDiff};
use timemachine_core::continuum::{
    convergence_study, integrate_continuum, integrate_internal_time, integrate_xp_with_lapse, ContinuumState,
    ConvergenceScenario, LapseSolution, ObservedOrder,
};
use timemachine_core::discrete::DiscreteSystem;
use timemachine_core::ensemble::{
    engine_flow_jacobian_det, propagate_ensemble, sample_initial, total_weight, DensityShape, DensitySpec, Engine,
    MemberState,
};
use timemachine_core::hybrid::{
    bracket_flow, frozen_hamiltonian, generalized_bracket, hybrid_rhs, integrate_hybrid, integrate_qbit_driven,
    integrate_schrodinger, qbit_expectation, retrace_defect, HybridModel, QbitSample, ALL_PAIRS,
};
use timemachine_core::oracles::{eigenvalue_shift, green_x, otilde_history};
use timemachine_core::{DiscreteState, HybridState, ModelParams, ObservableMatrix, PotentialSpec};

struct Outcome {
    measured: f64,
    bound: String,
    pass: bool,
}

impl Outcome {
    fn at_most(measured: f64, tol: f64) -> Self {
        Self {
            measured,
            bound: format!("<= {tol:e}"),
            pass: measured <= tol,
        }
    }
}

fn hybrid_model(lambda: f64) -> HybridModel {
    HybridModel::with_default_observable(ModelParams {
        lambda,
        ..ModelParams::default()
    })
    .unwrap()
}

fn reference_qbit() -> HybridState {
    HybridState::new(0.0, 1.0, 0.0, [1.0, 0.0], [0.0, 1.0])
}

fn random_unit_state(rng: &mut ChaCha20Rng) -> HybridState {
    loop {
        let z: [f64; 7] = core::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let s = HybridState::new(3.0 * (z[6] + 1.0), z[0], z[1], [z[2], z[3]], [z[4], z[5]]);
        if let Ok(n) = s.normalized() {
            return n;
        }
    }
}

fn reversibility() -> Outcome {
    let sys = DiscreteSystem::new(PotentialSpec::zero(), PotentialSpec::harmonic(1.0).unwrap(), 1e-2).unwrap();
    let s0 = DiscreteState::new(0, 0.8, 0.3, -0.6, 0.9);
    let traj = sys.run_from(s0, 10_000 - 1).unwrap();
    let st = traj.states();
    let n = st.len();
    let back = sys.run_backward(st[n - 2], st[n - 1], n - 2).unwrap();
    let err = back[0].max_abs_diff(&st[0]).max(back[1].max_abs_diff(&st[1]));
    Outcome::at_most(err, 1e-8)
}

/// Independent closed forms of the recurrence for piecewise-constant forces
/// `V' = f`, `𝒱' = g` (not both non-zero), starting from `s0` with the
/// second seed on the same polynomial branch.
fn constant_force_oracle(l: f64, f: f64, g: f64, s0: &DiscreteState, n: u64) -> [f64; 4] {
    let n = n as f64;
    let pcal = s0.pcal - 0.5 * g * l * n;
    let tau = s0.tau + l * s0.pcal * n - 0.25 * g * l * l * n * n;
    let a = l * s0.pcal;
    let p = s0.p - a * f * n;
    let x = if g == 0.0 {
        s0.x + a * s0.p * n - 0.5 * a * a * f * n * n
    } else {
        s0.x + s0.p * (tau - s0.tau)
    };
    [x, tau, p, pcal]
}

fn exact_discrete_cases() -> Outcome {
    let l = 1e-2;
    let s0 = DiscreteState::new(0, 0.3, -0.2, 0.7, 1.1);
    let cases = [
        (PotentialSpec::zero(), PotentialSpec::zero()),
        (PotentialSpec::constant(2.0), PotentialSpec::constant(-1.0)),
        (PotentialSpec::linear(0.4), PotentialSpec::zero()),
        (PotentialSpec::zero(), PotentialSpec::linear(-0.3)),
        (
            PotentialSpec::linear(-0.25).with_offset(1.0),
            PotentialSpec::constant(0.5),
        ),
    ];
    let mut worst = 0.0f64;
    for (v, vtau) in cases {
        let sys = DiscreteSystem::new(v, vtau, l).unwrap();
        let (f, g) = (v.gradient(0.0), vtau.gradient(0.0));
        let s1 = DiscreteState::from_coords(1, constant_force_oracle(l, f, g, &s0, 1));
        let traj = sys.run(s0, s1, 999).unwrap();
        for s in traj.states() {
            let exact = constant_force_oracle(l, f, g, &s0, s.n);
            for (a, b) in s.coords().iter().zip(exact) {
                worst = worst.max((a - b).abs() / b.abs().max(1.0));
            }
        }
    }
    Outcome::at_most(worst, 1e-12)
}

fn convergence() -> Outcome {
    let sc = ConvergenceScenario {
        v: PotentialSpec::harmonic(0.5).unwrap(),
        vtau: PotentialSpec::harmonic(1.0).unwrap(),
        start: DiscreteState::new(0, 1.0, 0.0, 0.0, 1.0),
        t_final: 1.0,
        reference_dt: 1e-4,
    };
    match convergence_study(&sc, &[1e-2, 5e-3, 2.5e-3]) {
        Ok(r) => match r.order {
            ObservedOrder::Order(q) => Outcome {
                measured: q,
                bound: "in [1.7, 2.3]".into(),
                pass: (1.7..=2.3).contains(&q),
            },
            ObservedOrder::Exact => Outcome {
                measured: 0.0,
                bound: "non-exact order expected".into(),
                pass: false,
            },
        },
        Err(e) => Outcome {
            measured: f64::NAN,
            bound: format!("study failed: {e}"),
            pass: false,
        },
    }
}

fn lapse_oracle() -> Outcome {
    let (omega, taubar, dt) = (1.0, 1.0, 1e-3);
    let steps = (2.0 * PI / omega / dt).ceil() as usize;
    let lapse = integrate_internal_time(
        0.0,
        taubar * omega,
        &PotentialSpec::harmonic(omega * omega).unwrap(),
        dt,
        steps,
    )
    .unwrap();
    let worst = lapse
        .samples()
        .iter()
        .map(|s| (s.tau - taubar * (omega * s.t).sin()).abs() / taubar)
        .fold(0.0, f64::max);
    Outcome::at_most(worst, 1e-8)
}

fn hybrid_homogeneous() -> Outcome {
    let model = hybrid_model(0.0);
    let dt = 1e-4;
    let run = integrate_hybrid(reference_qbit(), &model, dt, (4.0 * PI / dt).round() as usize).unwrap();
    // x(0) = 1, p(0) = 0 → x₁ = 1, φ = 0
    let worst = run
        .iter()
        .map(|s| (s.x - (5.0 * (s.t).sin()).cos()).abs())
        .fold(0.0, f64::max);
    Outcome::at_most(worst, 1e-6)
}

fn per_unit_time(drifts: impl Iterator<Item = (f64, f64)>) -> f64 {
    drifts.map(|(t, d)| d / t.max(1.0)).fold(0.0, f64::max)
}

fn constraint_conservation() -> Outcome {
    let model = hybrid_model(0.1);
    let dt = 1e-4;
    let run = integrate_hybrid(reference_qbit(), &model, dt, (4.0 * PI / dt).round() as usize).unwrap();
    Outcome::at_most(
        per_unit_time(run.iter().map(|s| (s.t, (s.constraint() - 1.0).abs()))),
        1e-9,
    )
}

fn sub_energies() -> Outcome {
    let dt = 1e-3;
    let steps = (4.0 * PI / dt).ceil() as usize;
    let v = PotentialSpec::harmonic(0.5).unwrap();
    let vtau = PotentialSpec::harmonic(1.0).unwrap();

    let joint = integrate_continuum(ContinuumState::new(0.0, 1.0, 0.0, 0.3, 1.0), &v, &vtau, dt, steps).unwrap();
    let (ex0, et0) = (joint[0].xp_energy(&v), joint[0].tau_energy(&vtau));
    let mut worst = per_unit_time(joint.iter().map(|s| (s.t, (s.xp_energy(&v) - ex0).abs())));
    worst = worst.max(per_unit_time(
        joint.iter().map(|s| (s.t, (s.tau_energy(&vtau) - et0).abs())),
    ));

    let lapse = integrate_internal_time(0.0, 1.0, &vtau, dt, steps).unwrap();
    let l0 = &lapse.samples()[0];
    let lapse_energy = |s: &timemachine_core::continuum::LapseSample| s.pcal * s.pcal + vtau.eval(s.tau);
    worst = worst.max(per_unit_time(
        lapse
            .samples()
            .iter()
            .map(|s| (s.t, (lapse_energy(s) - lapse_energy(l0)).abs())),
    ));

    let closed = LapseSolution::closed_form(1.0, 1.0, dt, steps).unwrap();
    for lp in [&lapse, &closed] {
        let xp = integrate_xp_with_lapse(1.0, 0.3, &v, lp).unwrap();
        let e0 = 0.5 * xp[0].p * xp[0].p + v.eval(xp[0].x);
        worst = worst.max(per_unit_time(
            xp.iter().map(|s| (s.t, (0.5 * s.p * s.p + v.eval(s.x) - e0).abs())),
        ));
    }
    Outcome::at_most(worst, 1e-9)
}

fn otilde_identity() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(43);
    let o = ObservableMatrix::sigma2_half();
    let worst = (0..1000)
        .map(|_| {
            let s = random_unit_state(&mut rng);
            (qbit_expectation(&o, &s) - (s.qx[0] * s.qp[1] - s.qx[1] * s.qp[0])).abs()
        })
        .fold(0.0, f64::max);
    Outcome::at_most(worst, 1e-12)
}

fn hamilton_schrodinger() -> Outcome {
    let model = hybrid_model(0.1);
    let driver = |t: f64| (5.0 * t.sin()).cos();
    let dt = 1e-4;
    let steps = (2.0 * PI / dt).round() as usize;
    let start = QbitSample {
        t: 0.0,
        qx: [1.0, 0.0],
        qp: [0.0, 1.0],
    };
    let a = integrate_qbit_driven(start, &model, &driver, dt, steps);
    let b = integrate_schrodinger(start, &model, &driver, dt, steps);
    let worst = a.iter().zip(&b).map(|(u, v)| u.max_abs_diff(v)).fold(0.0, f64::max);
    Outcome::at_most(worst, 1e-8)
}

fn bracket_axioms() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let fd = FiniteDiff::default();
    let model = hybrid_model(0.1);
    let mut antisym_exact = true;
    let (mut jacobi, mut cross, mut flow) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..50 {
        let s = random_unit_state(&mut rng);
        let z = s.coords();
        let c: Vec<f64> = (0..18).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cubic = |k: usize| {
            let c = c[6 * k..6 * k + 6].to_vec();
            move |w: &[f64]| {
                c[0] * w[0] * w[1] * w[2]
                    + c[1] * w[3] * w[3] * w[4]
                    + c[2] * w[5] * w[0] * w[0]
                    + c[3] * w[1] * w[4]
                    + c[4] * w[2] * w[3] * w[5]
                    + c[5] * w[1]
            }
        };
        let (f, g, h) = (cubic(0), cubic(1), cubic(2));
        antisym_exact &= generalized_bracket(&f, &g, &s, fd) == -generalized_bracket(&g, &f, &s, fd);
        jacobi = jacobi.max(bracket::jacobi_residual(&f, &g, &h, &z, &ALL_PAIRS, fd).abs());

        let cl = |w: &[f64]| w[0] * w[0] * w[1] + 0.5 * w[1] * w[1] * w[1] - w[0];
        let qm = |w: &[f64]| w[2] * w[5] - w[3] * w[4] + w[2] * w[2] * w[3];
        cross = cross.max(generalized_bracket(&cl, &qm, &s, fd).abs());

        let b = bracket_flow(&s, &model, fd);
        let r = hybrid_rhs(&s, &model).as_array();
        flow = flow.max(b.iter().zip(r).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
        let hh = frozen_hamiltonian(&model, s.t);
        antisym_exact &= generalized_bracket(&hh, &hh, &s, fd) == 0.0;
    }
    let pass = antisym_exact && jacobi <= 1e-5 && cross <= 1e-10 && flow <= 1e-6;
    Outcome {
        measured: jacobi.max(cross).max(flow),
        bound: format!(
            "antisymmetry exact: {antisym_exact}; jacobi {jacobi:.2e} <= 1e-5; cross {cross:.2e} <= 1e-10; flow {flow:.2e} <= 1e-6"
        ),
        pass,
    }
}

fn green_self_consistency() -> Outcome {
    let model = hybrid_model(0.1);
    let params = model.params;
    let dt = 1e-4;
    let run = integrate_hybrid(reference_qbit(), &model, dt, (2.0 * PI / dt).round() as usize).unwrap();
    let full = otilde_history(&run, &params).unwrap();
    let rel = run
        .iter()
        .step_by(100)
        .map(|s| (green_x(s.t, &params, &full).unwrap() - s.x).abs() / params.x1)
        .fold(0.0, f64::max);
    let coarse_err = |stride: usize| {
        let h = full.subsample(stride);
        run.iter()
            .step_by(800)
            .map(|s| (green_x(s.t, &params, &h).unwrap() - green_x(s.t, &params, &full).unwrap()).abs())
            .fold(0.0, f64::max)
    };
    let ratio = coarse_err(40) / coarse_err(20);
    Outcome {
        measured: rel,
        bound: format!("<= 1e-4; halving ratio {ratio:.3} in [3.6, 4.4]"),
        pass: rel <= 1e-4 && (3.6..=4.4).contains(&ratio),
    }
}

fn eigenvalue_expansion() -> Outcome {
    let mut worst_margin = 0.0f64;
    let mut pass = true;
    for b in [0.05, 0.1, 0.2, 0.3] {
        let e = eigenvalue_shift(1.0, b).unwrap();
        // exact upper eigenvalue of −σ₃ + bσ₂ from the characteristic polynomial
        let m = [
            [Complex64::new(-1.0, 0.0), Complex64::new(0.0, -b)],
            [Complex64::new(0.0, b), Complex64::new(1.0, 0.0)],
        ];
        let tr = (m[0][0] + m[1][1]).re;
        let det = (m[0][0] * m[1][1] - m[0][1] * m[1][0]).re;
        let exact = 0.5 * tr + (0.25 * tr * tr - det).sqrt();
        pass &= (e.exact - exact).abs() <= 1e-15;
        let bound = 1.5 * b.powi(4) / 8.0;
        let diff = (e.expanded - e.exact).abs();
        worst_margin = worst_margin.max(diff / bound);
        pass &= diff <= bound;
    }
    let e = eigenvalue_shift(1.0, 0.2).unwrap();
    let exact_102 = (e.expanded - 1.02).abs() <= 1e-15;
    Outcome {
        measured: worst_margin,
        bound: format!("diff/bound <= 1; E(B=0.2) = {} (1.02 expected)", e.expanded),
        pass: pass && exact_102,
    }
}

fn ageing() -> Outcome {
    let dt = PI / 31416.0;
    let defect = |lambda: f64| {
        let run = integrate_hybrid(reference_qbit(), &hybrid_model(lambda), dt, 31416).unwrap();
        retrace_defect(&run)
    };
    let (free, coupled) = (defect(0.0), defect(0.1));
    Outcome {
        measured: free,
        bound: format!("<= 1e-6; coupled {coupled:.3e} >= 100x"),
        pass: free <= 1e-6 && coupled >= 100.0 * free,
    }
}

fn liouville() -> Outcome {
    let period = 2.0 * PI;
    let h = 1e-5;
    let hybrid = Engine::Hybrid {
        model: hybrid_model(0.1),
        dt: 1e-4,
        tolerance: 1e-6,
    };
    let continuum = Engine::Continuum {
        v: PotentialSpec::harmonic(0.5).unwrap(),
        vtau: PotentialSpec::harmonic(1.0).unwrap(),
        dt: 1e-3,
    };
    let discrete = Engine::Discrete(
        DiscreteSystem::new(
            PotentialSpec::harmonic(0.5).unwrap(),
            PotentialSpec::harmonic(1.0).unwrap(),
            1e-2,
        )
        .unwrap(),
    );
    let mut worst = 0.0f64;
    worst = worst.max(
        (engine_flow_jacobian_det(&hybrid, &MemberState::Hybrid(reference_qbit()), period, h).unwrap() - 1.0).abs(),
    );
    let c = MemberState::Continuum(ContinuumState::new(0.0, 1.0, 0.0, 0.0, 1.0));
    worst = worst.max((engine_flow_jacobian_det(&continuum, &c, period, h).unwrap() - 1.0).abs());
    let d = discrete.state_from_sample(&[1.0, 0.0, 0.0, 1.0]).unwrap();
    worst = worst.max((engine_flow_jacobian_det(&discrete, &d, period, h).unwrap() - 1.0).abs());

    let spec = DensitySpec {
        shape: DensityShape::Gaussian,
        center: vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0],
        widths: vec![0.1; 6],
        seed: 2024,
    };
    let members = sample_initial(
        &spec,
        16,
        &Engine::Hybrid {
            model: hybrid_model(0.1),
            dt: 1e-3,
            tolerance: 1e-6,
        },
    )
    .unwrap();
    let out = propagate_ensemble(
        &members,
        &Engine::Hybrid {
            model: hybrid_model(0.1),
            dt: 1e-3,
            tolerance: 1e-6,
        },
        period,
    )
    .unwrap();
    let weights_exact = total_weight(&members) == total_weight(&out)
        && members
            .iter()
            .zip(&out)
            .all(|(a, b)| a.weight() == b.weight() && b.weight() >= 0.0);
    Outcome {
        measured: worst,
        bound: format!("<= 1e-6; weights unchanged and non-negative: {weights_exact}"),
        pass: worst <= 1e-6 && weights_exact,
    }
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 14] = [
        ("discrete reversibility", reversibility),
        ("exactly solvable discrete cases", exact_discrete_cases),
        ("discrete to continuum convergence order", convergence),
        ("lapse oracle", lapse_oracle),
        ("uncoupled hybrid oscillator oracle", hybrid_homogeneous),
        ("q-bit constraint conservation", constraint_conservation),
        ("conserved sub-energies", sub_energies),
        ("sigma2/2 expectation identity", otilde_identity),
        ("Hamilton / Schrodinger equivalence", hamilton_schrodinger),
        ("bracket axioms and separability", bracket_axioms),
        ("retarded solution self-consistency", green_self_consistency),
        ("eigenvalue shift expansion", eigenvalue_expansion),
        ("ageing / retrace asymmetry", ageing),
        ("Liouville volume and weights", liouville),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        if !o.pass {
            failures += 1;
        }
        println!(
            "{} {:>2} {:<40} measured {:<12.4e} {} ({:.2}s)",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            name,
            o.measured,
            o.bound,
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
