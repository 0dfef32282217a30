//! Acceptance suite: one PASS/FAIL line per criterion, with tolerances and
//! runtime limits pinned. Exits nonzero if any criterion fails.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use quantum_ambiguity::classical::{
    biconditional_check, expected_utility, feasibility, ClassicalProbability, PreferencePattern,
};
use quantum_ambiguity::hilbert::{
    born_probability, collapse, inner_product, validate_spectral_family, Complex, Ket, Projector,
    SpectralFamily,
};
use quantum_ambiguity::quantum::{
    expected_ball_counts, expected_utility_q, state_from_polar_rad, subjective_probabilities,
    QuantumState,
};
use quantum_ambiguity::scenarios::{
    BuiltinScenario, ExperimentCounts, QuestionPair, Scenario, UtilityFunction,
};
use quantum_ambiguity::solver::{paper_solutions, solve, verify, Objective, SolverConfig};
use quantum_ambiguity::stats::{analyze, binomial_z_test, mcnemar_tests, MCNEMAR_CHI2};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_time(start: Instant, limit: Duration) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took < limit, || format!("took {took:.2?}, limit {limit:?}"))
}

fn sqrt_u() -> UtilityFunction {
    UtilityFunction::Sqrt
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for id in BuiltinScenario::ALL {
        let s = id.scenario();
        let sol = paper_solutions(&s).map_err(|e| e.to_string())?;
        let (w1, w2) = sol.states(&s).map_err(|e| e.to_string())?;
        let r = verify(&s, &w1, &w2, &sol.target, &sqrt_u(), 5e-3).map_err(|e| e.to_string())?;
        ensure(r.passed, || format!("{id}: {:?}", r.failures()))?;
        for name in ["target_1", "target_2", "orthogonality", "norm_w1", "norm_w2"] {
            ensure(r.check(name).is_some(), || format!("{id}: missing check {name}"))?;
        }
        for c in &r.checks {
            if c.name.starts_with("group") {
                ensure(c.residual <= 2e-3, || format!("{id}: {} = {:e}", c.name, c.residual))?;
            }
            worst = worst.max(c.residual);
        }
    }
    within_time(start, Duration::from_secs(1))?;
    Ok(format!("4/4 published pairs verify at 5e-3 (worst residual {worst:.2e})"))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut seeds = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for id in BuiltinScenario::ALL {
        let s = id.scenario();
        let target = paper_solutions(&s).map_err(|e| e.to_string())?.target;
        let cfg = SolverConfig {
            seed: seeds.random(),
            restarts: 64,
            ..SolverConfig::default()
        };
        let a = solve(&s, &target, &sqrt_u(), &cfg).map_err(|e| e.to_string())?;
        ensure(a.converged, || format!("{id} seed {}: {:?}", cfg.seed, a.residuals))?;
        ensure(a.residuals.max_abs() <= 1e-8, || format!("{id}: residual above 1e-8"))?;
        let v = verify(&s, &a.w1, &a.w2, &target, &sqrt_u(), 1e-8).map_err(|e| e.to_string())?;
        ensure(v.passed, || format!("{id}: converged result fails verify"))?;
        let b = solve(&s, &target, &sqrt_u(), &cfg).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("{id}: repeated solve with seed {} differs", cfg.seed))?;
        worst = worst.max(a.residuals.max_abs());
    }
    within_time(start, Duration::from_secs(30))?;
    Ok(format!("4/4 targets solved, deterministic (worst residual {worst:.1e})"))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    for id in [BuiltinScenario::Ellsberg3, BuiltinScenario::Machina5051] {
        let s = id.scenario();
        let p = PreferencePattern::parse(&s, "f1>f2,f4>f3").map_err(|e| e.to_string())?;
        let r = feasibility(&s, &p, &sqrt_u()).map_err(|e| e.to_string())?;
        ensure(!r.feasible, || format!("{id}: pattern reported feasible"))?;
        ensure(r.grid_agrees() == Some(true), || format!("{id}: grid disagrees"))?;
    }
    for id in [
        BuiltinScenario::Machina5051,
        BuiltinScenario::ReflectionLower,
        BuiltinScenario::ReflectionUpper,
    ] {
        let s = id.scenario();
        // sign(W(f1) − W(f2)) = sign(W(f3) − W(f4)), whatever the question orientation
        let pair = |a: &str, b: &str| QuestionPair {
            first: s.act_index(a).unwrap(),
            second: s.act_index(b).unwrap(),
        };
        let r = biconditional_check(&s, pair("f1", "f2"), pair("f3", "f4"), &sqrt_u())
            .map_err(|e| e.to_string())?;
        let holds = r.holds;
        ensure(holds, || format!("{id}: biconditional fails"))?;
        ensure(r.grid_agrees == Some(true), || format!("{id}: grid disagrees"))?;
    }
    within_time(start, Duration::from_secs(10))?;
    Ok("joint patterns infeasible (ellsberg3, machina5051); biconditional holds on 3 scenarios; grid agrees".into())
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let weights = [
        (BuiltinScenario::Ellsberg3, Some(0.815), Some(0.780), 0.655),
        (BuiltinScenario::Machina5051, Some(0.580), Some(0.630), 0.380),
        (BuiltinScenario::ReflectionLower, Some(0.575), None, 0.615),
        (BuiltinScenario::ReflectionUpper, Some(0.670), None, 0.650),
    ];
    let mut reports = Vec::new();
    for (id, w1, w2, inv) in weights {
        let s = id.scenario();
        let r = analyze(&ExperimentCounts::table(id), &s).map_err(|e| e.to_string())?;
        if let Some(w) = w1 {
            ensure(r.weight_q1 == w, || format!("{id}: weight_q1 {} != {w}", r.weight_q1))?;
        }
        if let Some(w) = w2 {
            ensure(r.weight_q2 == w, || format!("{id}: weight_q2 {} != {w}", r.weight_q2))?;
        }
        ensure(r.inversion_rate == inv, || format!("{id}: inversion {} != {inv}", r.inversion_rate))?;
        reports.push((id, r));
    }
    for (k, printed) in [(116, 2.33e-2), (115, 3.36e-2), (104, 5.73e-1)] {
        let p = binomial_z_test(k, 200, 0.5).map_err(|e| e.to_string())?;
        ensure(((p - printed) / printed).abs() <= 0.05, || format!("z-test {k}/200: {p:e} vs {printed:e}"))?;
    }
    for (id, printed) in [
        (BuiltinScenario::ReflectionLower, 0.6533),
        (BuiltinScenario::ReflectionUpper, 8.18e-3),
    ] {
        let t = mcnemar_tests(&ExperimentCounts::table(id));
        let p = t
            .iter()
            .find(|t| t.name == MCNEMAR_CHI2)
            .and_then(|t| t.p_value)
            .ok_or("missing chi-square variant")?;
        ensure(((p - printed) / printed).abs() <= 0.10, || format!("{id} McNemar {p:e} vs {printed:e}"))?;
    }
    let flagged = |id: BuiltinScenario, quantity: &str| {
        reports
            .iter()
            .find(|(i, _)| *i == id)
            .and_then(|(_, r)| r.paper.iter().find(|c| c.quantity == quantity))
            .is_some_and(|c| c.flagged)
    };
    for (id, quantity, value) in [
        (BuiltinScenario::Ellsberg3, "p_cross", "1.91e-35"),
        (BuiltinScenario::Machina5051, "p_cross", "7.48e-7"),
        (BuiltinScenario::ReflectionLower, "p_q2", "1.58e-1"),
        (BuiltinScenario::ReflectionLower, "weight_q2", "0.630"),
        (BuiltinScenario::ReflectionUpper, "weight_q2", "0.620"),
    ] {
        ensure(flagged(id, quantity), || format!("{id}: {value} not flagged"))?;
    }
    within_time(start, Duration::from_secs(1))?;
    Ok("weights, inversion rates, z-test and McNemar values reproduced; 5 unreproducible values flagged".into())
}

fn criterion_5() -> Outcome {
    let s = BuiltinScenario::Ellsberg3.scenario();
    let sol = paper_solutions(&s).map_err(|e| e.to_string())?;
    let (w1, w2) = sol.states(&s).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    for (w, (y, b)) in [(&w1, (37.3, 22.7)), (&w2, (23.0, 37.0))] {
        let c = expected_ball_counts(w, &s, 60).map_err(|e| e.to_string())?;
        ensure(c[0].event == "Y" && c[1].event == "B", || "unexpected event order".into())?;
        ensure((c[0].count - y).abs() <= 0.2 && (c[1].count - b).abs() <= 0.2, || {
            format!("counts ({:.2}, {:.2}) vs ({y}, {b})", c[0].count, c[1].count)
        })?;
        parts.push(format!("{:.2}/{:.2}", c[0].count, c[1].count));
    }
    Ok(format!("expected yellow/black balls {} and {}", parts[0], parts[1]))
}

fn random_ket(rng: &mut ChaCha8Rng, dim: usize) -> Ket {
    let amps: Vec<Complex> = (0..dim)
        .map(|_| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    Ket::new(amps).unwrap()
}

fn random_unitary(rng: &mut ChaCha8Rng, dim: usize) -> DMatrix<Complex> {
    let m = DMatrix::from_fn(dim, dim, |_, _| {
        Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    m.qr().q()
}

fn random_family(rng: &mut ChaCha8Rng, dim: usize) -> Vec<Projector> {
    let q = random_unitary(rng, dim);
    let mut groups: Vec<Vec<usize>> = vec![vec![]];
    for i in 0..dim {
        if i > 0 && rng.random_bool(0.5) {
            groups.push(vec![]);
        }
        groups.last_mut().unwrap().push(i);
    }
    groups
        .iter()
        .map(|g| {
            let cols = DMatrix::from_fn(dim, g.len(), |r, c| q[(r, g[c])]);
            Projector::new(&cols * cols.adjoint()).unwrap()
        })
        .collect()
}

fn random_state(rng: &mut ChaCha8Rng, s: &Scenario) -> QuantumState {
    let mut moduli = vec![0.0; s.n_events()];
    for c in &s.constraints {
        let w: Vec<f64> = c.event_indices.iter().map(|_| rng.random::<f64>()).collect();
        let total: f64 = w.iter().sum();
        for (&i, wi) in c.event_indices.iter().zip(&w) {
            moduli[i] = (c.total_f64() * wi / total).sqrt();
        }
    }
    let phases: Vec<f64> = (0..s.n_events())
        .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
        .collect();
    state_from_polar_rad(s, &moduli, &phases, 1e-9).unwrap()
}

fn criterion_6() -> Outcome {
    const CASES: usize = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for case in 0..CASES {
        let dim = rng.random_range(1..=6);
        let (a, b, c) = (random_ket(&mut rng, dim), random_ket(&mut rng, dim), random_ket(&mut rng, dim));
        let z = Complex::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        // linear in the ket, anti-linear in the bra
        let lin = inner_product(&a, &(&(z * &b) + &c)).unwrap();
        let lin_expected = z * inner_product(&a, &b).unwrap() + inner_product(&a, &c).unwrap();
        let anti = inner_product(&(&(z * &a) + &c), &b).unwrap();
        let anti_expected =
            z.conj() * inner_product(&a, &b).unwrap() + inner_product(&c, &b).unwrap();
        ensure(
            (lin - lin_expected).norm() < 1e-10 && (anti - anti_expected).norm() < 1e-10,
            || format!("inner-product linearity, case {case}"),
        )?;
    }
    for case in 0..CASES {
        let dim = rng.random_range(1..=6);
        let family = random_family(&mut rng, dim);
        let report = validate_spectral_family(&SpectralFamily::from_projectors(&family));
        ensure(report.passed(), || format!("spectral completeness, case {case}: {report:?}"))?;
        let v = random_ket(&mut rng, dim).normalized().unwrap();
        let total: f64 = family.iter().map(|p| born_probability(p, &v).unwrap()).sum();
        ensure((total - 1.0).abs() < 1e-9, || format!("Born normalisation, case {case}: {total}"))?;
    }
    for case in 0..CASES {
        let dim = rng.random_range(1..=6);
        let family = random_family(&mut rng, dim);
        let v = random_ket(&mut rng, dim).normalized().unwrap();
        for p in &family {
            let Ok(once) = collapse(p, &v) else { continue };
            let twice = collapse(p, &once).unwrap();
            let dev = once
                .amplitudes()
                .iter()
                .zip(twice.amplitudes())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            ensure(dev < 1e-9, || format!("collapse idempotency, case {case}: {dev:e}"))?;
            ensure((born_probability(p, &once).unwrap() - 1.0).abs() < 1e-9, || {
                format!("collapsed state not certain, case {case}")
            })?;
        }
    }
    let scenarios: Vec<Scenario> = BuiltinScenario::ALL.iter().map(|b| b.scenario()).collect();
    for case in 0..CASES {
        let s = &scenarios[case % scenarios.len()];
        let v = random_state(&mut rng, s);
        let shifted: Vec<f64> = (0..s.n_events())
            .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
            .collect();
        let w = v.with_phases(shifted).unwrap();
        let (pv, pw) = (subjective_probabilities(&v), subjective_probabilities(&w));
        ensure(pv.iter().zip(&pw).all(|(a, b)| (a - b).abs() < 1e-10), || {
            format!("phase invariance of probabilities, case {case}")
        })?;
        for act in &s.acts {
            let a = expected_utility_q(&v, act, &sqrt_u()).unwrap();
            let b = expected_utility_q(&w, act, &sqrt_u()).unwrap();
            ensure((a - b).abs() < 1e-10, || format!("phase invariance of W, case {case}"))?;
        }
    }
    for s in &scenarios {
        for case in 0..CASES / 4 {
            let v = random_state(&mut rng, s);
            let p = ClassicalProbability::new(s, subjective_probabilities(&v))
                .map_err(|e| format!("{}: {e}", s.name))?;
            for act in &s.acts {
                let q = expected_utility_q(&v, act, &sqrt_u()).unwrap();
                let c = expected_utility(&p, act, &sqrt_u()).unwrap();
                ensure((q - c).abs() < 1e-10, || {
                    format!("{}: quantum vs classical EU, case {case}", s.name)
                })?;
            }
        }
    }
    Ok(format!(
        "{CASES} cases each: inner-product linearity, spectral completeness + Born normalisation, collapse idempotency, phase invariance; quantum/classical consistency on 4 scenarios"
    ))
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_rel = 0.0f64;
    let h = 1e-6;
    for id in BuiltinScenario::ALL {
        let s = id.scenario();
        let target = paper_solutions(&s).map_err(|e| e.to_string())?.target;
        for target in [target, target.with_orthogonality(false)] {
            let obj = Objective::new(&s, &target, &sqrt_u()).map_err(|e| e.to_string())?;
            for point in 0..10 {
                let x = obj.random_point(&mut rng);
                let j = obj.jacobian(&x);
                for col in 0..obj.n_params() {
                    let (mut hi, mut lo) = (x.clone(), x.clone());
                    hi[col] += h;
                    lo[col] -= h;
                    let (rh, rl) = (obj.residuals(&hi), obj.residuals(&lo));
                    for row in 0..obj.n_residuals() {
                        let fd = (rh[row] - rl[row]) / (2.0 * h);
                        let an = j[(row, col)];
                        let err = (fd - an).abs();
                        let scale = an.abs().max(fd.abs());
                        // near-zero entries: the difference quotient is rounding noise
                        let ok = if scale < 1e-4 {
                            err <= 1e-8
                        } else {
                            let rel = err / scale;
                            worst_rel = worst_rel.max(rel);
                            rel <= 1e-4
                        };
                        ensure(ok, || {
                            format!("{id} point {point} entry ({row},{col}): analytic {an:e}, central {fd:e}")
                        })?;
                    }
                }
            }
        }
    }
    Ok(format!("jacobian matches central differences at 10 points per scenario (worst relative {worst_rel:.1e})"))
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 7] = [
        ("published-solution regression", criterion_1),
        ("solver reproduction", criterion_2),
        ("classical infeasibility", criterion_3),
        ("statistics reproduction", criterion_4),
        ("expected ball counts", criterion_5),
        ("property suites", criterion_6),
        ("finite-difference jacobian", criterion_7),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] criterion {} ({name}): {detail} [{took:.2} s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("[FAIL] criterion {} ({name}): {why} [{took:.2} s]", i + 1);
            }
        }
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
