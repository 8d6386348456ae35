//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use common::*;
use ncagd::agd_monitor::{run_monitored_agd, AgdParams};
use ncagd::driver::{
    proximal_wrap, run_guarded, run_guarded_observed, GuardedConfig, InnerRun, Mode,
};
use ncagd::harness::{run_experiment, ExperimentSpec, MethodSpec, ProblemSpec, SeedRange};
use ncagd::nc_exploit::{cubic_reconstruct, exploit_nc_pair, exploit_nc_pair_3};
use ncagd::problems::{double_well, gen_biweight, ripple, Quadratic, RidgeWell};
use ncagd::{CountingOracle, Objective, Oracle, Vector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'a str, Duration, Box<dyn FnOnce() -> Outcome>);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn v(c: Vec<f64>) -> Vector {
    Vector::new(c).unwrap()
}

/// Witness soundness and value envelope over 1000 practical-mode runs,
/// re-evaluated on the proximal surrogate with a fresh oracle.
fn witness_soundness() -> Outcome {
    let mut witnesses = 0usize;
    let mut failures = Vec::new();
    for seed in 0..1000u64 {
        let inst = gen_biweight(seed);
        let mut fresh = CountingOracle::new(&inst);
        let mut observer = |run: &InnerRun<'_>| {
            let Some(w) = &run.outcome.witness else {
                return;
            };
            witnesses += 1;
            let mut fhat = proximal_wrap(&mut fresh, run.center.clone(), run.alpha).unwrap();
            let sigma = run.outcome.params.strong_convexity;
            let (fv, gv) = fhat.value_and_gradient(&w.v).unwrap();
            let fu = fhat.value(&w.u).unwrap();
            let d = w.u.sub(&w.v);
            let rhs = fv + gv.as_slice().iter().zip(d.as_slice()).map(|(a, b)| a * b).sum::<f64>()
                + 0.5 * sigma * d.norm_sq();
            if !(fu < rhs) {
                failures.push(format!("seed {seed} outer {}: f(u)={fu} ≥ {rhs}", run.outer_step));
            }
            let f0 = fhat.value(&run.outcome.ys[0]).unwrap();
            let t = run.outcome.iters;
            let mut env = fu;
            for y in &run.outcome.ys[1..t.max(1)] {
                env = env.max(fhat.value(y).unwrap());
            }
            if env > f0 {
                failures.push(format!("seed {seed} outer {}: envelope {env} > f(y0) {f0}", run.outer_step));
            }
        };
        let cfg = GuardedConfig::practical(1e-4, 0.01).unwrap();
        let mut o = CountingOracle::new(&inst);
        if let Err(e) = run_guarded_observed(&mut o, &Vector::zeros(30), &cfg, &mut observer) {
            failures.push(format!("seed {seed}: {e}"));
        }
    }
    check(
        failures.is_empty() && witnesses > 0,
        format!(
            "{witnesses} witness pairs checked, {} failures{}",
            failures.len(),
            failures.first().map(|f| format!(", first: {f}")).unwrap_or_default()
        ),
    )
}

/// No witness on convex quadratics; iteration count within the bound + 1
/// with `ψ(z_{t−1})` recomputed from scratch.
fn convex_no_false_positive(rng: &mut ChaCha8Rng) -> Outcome {
    let mut failures = Vec::new();
    let mut worst_ratio: f64 = 0.0;
    for i in 0..10_000 {
        let dim = rng.gen_range(1..=20);
        let kappa = 10f64.powf(rng.gen_range(0.0..=4.0));
        let mut eig: Vec<f64> = (0..dim).map(|_| kappa.powf(rng.gen_range(0.0..1.0))).collect();
        eig[0] = 1.0;
        if dim > 1 {
            eig[dim - 1] = kappa;
        }
        let q = Quadratic::new(eig).unwrap();
        let (l, sigma) = (q.smoothness(), q.strong_convexity());
        let eps = 10f64.powf(rng.gen_range(-8.0..-2.0));
        let x0 = v((0..dim).map(|_| rng.gen_range(-10.0..10.0)).collect());
        let params = AgdParams::new(l, sigma, eps).unwrap();
        let mut o = CountingOracle::new(&q);
        let out = match run_monitored_agd(&mut o, &x0, &params) {
            Ok((out, _)) => out,
            Err(e) => {
                failures.push(format!("instance {i}: {e}"));
                continue;
            }
        };
        if out.witness.is_some() {
            failures.push(format!("instance {i}: witness on a convex quadratic"));
        }
        let t = out.iters;
        if t > 1 {
            let y = &out.ys[t - 1];
            let g = q.gradient(y).unwrap();
            let z: Vec<f64> = y.iter().zip(&g).map(|(y, g)| y - g / l).collect();
            let f0 = q.value(&x0).unwrap();
            let dz: f64 = z.iter().zip(x0.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            let psi = f0 - q.value(&z).unwrap() + 0.5 * sigma * dz;
            let bound = 1.0 + ((l / sigma).sqrt() * (2.0 * l * psi / (eps * eps)).ln()).max(0.0);
            worst_ratio = worst_ratio.max(t as f64 / bound);
            if t as f64 > bound + 1.0 {
                failures.push(format!("instance {i}: t={t} > bound {bound} + 1"));
            }
        }
    }
    check(
        failures.is_empty(),
        format!(
            "10000 quadratics, max t/bound {worst_ratio:.3}, {} failures{}",
            failures.len(),
            failures.first().map(|f| format!(", first: {f}")).unwrap_or_default()
        ),
    )
}

/// A point set and direction where `f` is strongly concave along `δ`.
struct NcCase {
    f: Box<dyn Objective>,
    base: Vec<f64>,
    delta: Vec<f64>,
}

fn nc_case(rng: &mut ChaCha8Rng) -> NcCase {
    if rng.gen_bool(0.5) {
        let dim = rng.gen_range(1..=6);
        let base: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.25..0.25)).collect();
        let mut delta: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = delta.iter().map(|c| c * c).sum::<f64>().sqrt();
        delta.iter_mut().for_each(|c| *c /= n);
        NcCase {
            f: Box::new(double_well(dim)),
            base,
            delta,
        }
    } else {
        let dim = rng.gen_range(2..=6);
        let mut a: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = a.iter().map(|c| c * c).sum::<f64>().sqrt();
        a.iter_mut().for_each(|c| *c /= n);
        let offset = rng.gen_range(-0.5..0.5);
        let mu = rng.gen_range(0.0..5.0);
        let f = RidgeWell::new(a.clone(), offset, mu).unwrap();
        // Start near the ridge top, aᵀx ≈ offset.
        let mut base: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let shift = offset + rng.gen_range(-0.2..0.2) - a.iter().zip(&base).map(|(a, b)| a * b).sum::<f64>();
        base.iter_mut().zip(&a).for_each(|(b, a)| *b += shift * a);
        // Mostly along the ridge direction, with a small valley component.
        let mut delta: Vec<f64> = a
            .iter()
            .map(|ai| ai + 0.2 * rng.gen_range(-1.0..1.0))
            .collect();
        let n = delta.iter().map(|c| c * c).sum::<f64>().sqrt();
        delta.iter_mut().for_each(|c| *c /= n);
        NcCase {
            f: Box::new(f),
            base,
            delta,
        }
    }
}

/// `f(u) < f(v) + ∇f(v)ᵀ(u−v) − (α/2)‖u−v‖²`, evaluated directly.
fn violates_convexity(f: &dyn Objective, u: &[f64], v: &[f64], alpha: f64) -> bool {
    let fu = f.value(u).unwrap();
    let fv = f.value(v).unwrap();
    let gv = f.gradient(v).unwrap();
    let lin: f64 = gv.iter().zip(u.iter().zip(v)).map(|(g, (u, v))| g * (u - v)).sum();
    let d2: f64 = u.iter().zip(v).map(|(u, v)| (u - v) * (u - v)).sum();
    fu < fv + lin - 0.5 * alpha * d2
}

/// Builds `(u, v, η)` meeting a lemma's hypotheses, or `None` on rejection.
fn nc_instance(
    rng: &mut ChaCha8Rng,
    alpha: f64,
    max_sep: impl Fn(f64) -> f64,
    max_eta: f64,
) -> Option<(NcCase, Vec<f64>, Vec<f64>, f64)> {
    let case = nc_case(rng);
    let eta = max_eta * rng.gen_range(0.05..=1.0);
    let sep = max_sep(eta) * rng.gen_range(0.01..=1.0);
    let v: Vec<f64> = case.base.clone();
    let u: Vec<f64> = v.iter().zip(&case.delta).map(|(v, d)| v + sep * d).collect();
    violates_convexity(case.f.as_ref(), &u, &v, alpha).then_some((case, u, v, eta))
}

fn lemma_decreases(rng: &mut ChaCha8Rng) -> Outcome {
    let mut failures = Vec::new();
    let (mut n1, mut n5) = (0, 0);
    let mut attempts = 0;
    let (l2, l3): (f64, f64) = (12.0, 6.0);
    while n1 < 1000 && attempts < 100_000 {
        attempts += 1;
        let alpha = rng.gen_range(0.05..1.5);
        let Some((case, u, vv, eta)) =
            nc_instance(rng, alpha, |_| alpha / (2.0 * l2), alpha / l2)
        else {
            continue;
        };
        assert_eq!(case.f.constants().l2, Some(l2));
        n1 += 1;
        let mut o = CountingOracle::new(case.f.as_ref());
        let fu = case.f.value(&u).unwrap();
        match exploit_nc_pair(&mut o, &v(u.clone()), &v(vv), eta) {
            Ok(r) if r.f_z <= fu - alpha * eta * eta / 12.0 => {}
            Ok(r) => failures.push(format!("lemma 1: f(z)={} > {}", r.f_z, fu - alpha * eta * eta / 12.0)),
            Err(e) => failures.push(format!("lemma 1: {e}")),
        }
    }
    attempts = 0;
    while n5 < 1000 && attempts < 100_000 {
        attempts += 1;
        let alpha = rng.gen_range(0.05..1.5);
        let eta_max = (2.0 * alpha / l3).sqrt();
        let Some((case, u, vv, eta)) = nc_instance(rng, alpha, |eta| eta / 2.0, eta_max) else {
            continue;
        };
        assert_eq!(case.f.constants().l3, Some(l3));
        n5 += 1;
        let mut o = CountingOracle::new(case.f.as_ref());
        let fu = case.f.value(&u).unwrap();
        let fv = case.f.value(&vv).unwrap();
        let bound = (fv - alpha * eta * eta / 4.0).max(fu - alpha * eta * eta / 12.0);
        match exploit_nc_pair_3(&mut o, &v(u), &v(vv), eta) {
            Ok(r) if r.f_z <= bound => {}
            Ok(r) => failures.push(format!("lemma 5: f(z)={} > {bound}", r.f_z)),
            Err(e) => failures.push(format!("lemma 5: {e}")),
        }
    }
    check(
        failures.is_empty() && n1 == 1000 && n5 == 1000,
        format!(
            "{n1} + {n5} constructed instances, {} failures{}",
            failures.len(),
            failures.first().map(|f| format!(", first: {f}")).unwrap_or_default()
        ),
    )
}

fn uniform_start(rng: &mut ChaCha8Rng, dim: usize, r: f64) -> Vector {
    v((0..dim).map(|_| rng.gen_range(-r..r)).collect())
}

/// Per-iteration decrease on double wells in both theoretical modes.
fn per_iteration_progress(rng: &mut ChaCha8Rng) -> Outcome {
    let mut failures = Vec::new();
    let mut iters = 0;
    let (l1, l2, l3): (f64, f64, f64) = (11.0, 12.0, 6.0);
    for eps in [1e-2, 1e-3, 1e-4] {
        for _ in 0..30 {
            let dim = rng.gen_range(1..=10);
            let f = double_well(dim);
            let x0 = uniform_start(rng, dim, 1.5);
            for mode in [Mode::SecondOrder, Mode::ThirdOrder] {
                let (cfg, floor) = match mode {
                    Mode::SecondOrder => {
                        let c = GuardedConfig::second_order(eps, l1, l2).unwrap();
                        let a = 2.0 * (l2 * eps).sqrt();
                        (c, (eps * eps / (5.0 * a)).min(a.powi(3) / (64.0 * l2 * l2)))
                    }
                    _ => {
                        let c = GuardedConfig::third_order(eps, l1, l3).unwrap();
                        let a = 2.0 * l3.cbrt() * eps.powf(2.0 / 3.0);
                        (c, (eps * eps / (5.0 * a)).min(a * a / (32.0 * l3)))
                    }
                };
                let mut o = CountingOracle::new(&f);
                let r = match run_guarded(&mut o, &x0, &cfg) {
                    Ok(r) => r,
                    Err(e) => {
                        failures.push(format!("{mode:?}: {e}"));
                        continue;
                    }
                };
                if !r.converged {
                    failures.push(format!("{mode:?} eps {eps}: did not converge"));
                }
                let k_final = r.iterations.len();
                for it in r.iterations.iter().take(k_final.saturating_sub(1)) {
                    iters += 1;
                    if it.f_next > it.f_prev - floor + 1e-12 {
                        failures.push(format!(
                            "{mode:?} eps {eps} k={}: drop {} < {floor}",
                            it.k,
                            it.f_prev - it.f_next
                        ));
                    }
                }
            }
        }
    }
    check(
        failures.is_empty() && iters > 0,
        format!(
            "{iters} non-final outer iterations, {} failures{}",
            failures.len(),
            failures.first().map(|f| format!(", first: {f}")).unwrap_or_default()
        ),
    )
}

/// Total gradient evaluations against the closed-form budgets.
fn evaluation_budgets(rng: &mut ChaCha8Rng) -> Outcome {
    let (l1, l2, l3): (f64, f64, f64) = (11.0, 12.0, 6.0);
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for _ in 0..10 {
        let dim = rng.gen_range(1..=10);
        let f = double_well(dim);
        let x0 = uniform_start(rng, dim, 1.5);
        let df = f.value(&x0).unwrap() + 0.25 * dim as f64;
        for eps in [1e-2, 1e-3, 1e-4] {
            let log = (500.0 * l1 * df / (eps * eps)).ln();
            let second_ok = eps <= (df.powf(2.0 / 3.0) * l2.cbrt()).min(l1 * l1 / (64.0 * l2));
            let third_ok =
                eps.powf(2.0 / 3.0) <= (df.sqrt() * l3.powf(1.0 / 6.0)).min(l1 / (8.0 * l3.cbrt()));
            let runs = [
                (
                    second_ok,
                    GuardedConfig::second_order(eps, l1, l2).unwrap(),
                    20.0 * df * l1.sqrt() * l2.powf(0.25) * eps.powf(-1.75) * log,
                ),
                (
                    third_ok,
                    GuardedConfig::third_order(eps, l1, l3).unwrap(),
                    20.0 * df * l1.sqrt() * l3.powf(1.0 / 6.0) * eps.powf(-5.0 / 3.0) * log,
                ),
            ];
            for (valid, cfg, bound) in runs {
                if !valid {
                    continue;
                }
                let mut o = CountingOracle::new(&f);
                match run_guarded(&mut o, &x0, &cfg) {
                    Ok(r) => {
                        checked += 1;
                        let used = r.counters.n_gradient as f64;
                        worst = worst.max(used / bound);
                        if !r.converged || used > bound {
                            failures.push(format!("{:?} eps {eps}: {used} > {bound}", cfg.mode));
                        }
                    }
                    Err(e) => failures.push(format!("{:?}: {e}", cfg.mode)),
                }
            }
        }
    }
    check(
        failures.is_empty() && checked > 0,
        format!(
            "{checked} runs in the valid range, max used/bound {worst:.2e}, {} failures{}",
            failures.len(),
            failures.first().map(|f| format!(", first: {f}")).unwrap_or_default()
        ),
    )
}

fn cubic_oracle(rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let c: Vec<f64> = (0..4).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let h = |t: f64| c[0] + c[1] * t + c[2] * t * t + c[3] * t * t * t;
        let theta = rng.gen_range(-3.0..3.0);
        let got = cubic_reconstruct([h(0.0), h(-0.5), h(-1.0), h(-3.0)], theta);
        worst = worst.max((got - h(theta)).abs());
    }
    check(worst <= 1e-9, format!("1000 cubics, max error {worst:.2e}"))
}

fn crippled() -> MethodSpec {
    let mut m = MethodSpec::guarded(Mode::Practical);
    if let MethodSpec::Guarded { nc_exploit, .. } = &mut m {
        *nc_exploit = false;
    }
    m
}

fn step_ordering(dir: &Path) -> Outcome {
    let spec = ExperimentSpec {
        problem: ProblemSpec::Biweight { d: 30, m: 60 },
        methods: vec![
            MethodSpec::Gd { label: None },
            MethodSpec::Ragd { label: None },
            MethodSpec::Ncg { label: None },
            MethodSpec::guarded(Mode::Practical),
            crippled(),
        ],
        seeds: SeedRange { start: 0, end: 100 },
        eps: 1e-4,
        max_steps: 1_000_000,
        output_path: None,
        assert_lemmas: false,
    };
    let rep = run_experiment(&spec, dir, 0).map_err(|e| e.to_string())?;
    let median = |name: &str| {
        rep.summary
            .methods
            .iter()
            .find(|m| m.method == name)
            .and_then(|m| m.median_steps)
            .unwrap_or(f64::INFINITY)
    };
    let (gd, ragd, ncg, ours, crip) = (
        median("gd"),
        median("ragd"),
        median("ncg"),
        median("guarded-practical"),
        median("guarded-practical-no-nc"),
    );
    check(
        ours < gd && ours < crip,
        format!(
            "median steps: guarded-practical {ours}, no-nc {crip}, gd {gd}, ragd {ragd}, ncg {ncg}"
        ),
    )
}

fn gradient_checks(rng: &mut ChaCha8Rng) -> Outcome {
    let mut report = Vec::new();
    let mut worst: f64 = 0.0;
    let mut record = |name: &str, err: f64| {
        worst = worst.max(err);
        report.push(format!("{name} {err:.1e}"));
    };
    let inst = gen_biweight(0);
    let pts = uniform_points(rng, 100, 30, 3.0);
    record("biweight", fd_max_rel_error(&objective_fn(&inst), &pts));
    let q = Quadratic::log_spaced(10, 1e4).unwrap();
    let pts = uniform_points(rng, 100, 10, 3.0);
    record("quadratic", fd_max_rel_error(&objective_fn(&q), &pts));
    let dw = double_well(4);
    let pts = uniform_points(rng, 100, 4, 1.9);
    record("double_well", fd_max_rel_error(&objective_fn(&dw), &pts));
    let rw = RidgeWell::new(vec![0.3, -1.0, 2.0, 0.5], 0.2, 3.0).unwrap();
    let pts = uniform_points(rng, 100, 4, 0.4);
    record("ridge_well", fd_max_rel_error(&objective_fn(&rw), &pts));
    let rp = ripple(5);
    let pts = uniform_points(rng, 100, 5, 4.0);
    record("ripple", fd_max_rel_error(&objective_fn(&rp), &pts));
    let center = uniform_start(rng, 30, 1.0);
    let prox = |x: &[f64]| {
        let mut o = CountingOracle::new(&inst);
        let mut p = proximal_wrap(&mut o, center.clone(), 0.3).unwrap();
        let (val, g) = p.value_and_gradient(&v(x.to_vec())).unwrap();
        (val, g.into_inner())
    };
    let pts = uniform_points(rng, 100, 30, 3.0);
    record("proximal", fd_max_rel_error(&prox, &pts));
    check(worst <= FD_TOL, report.join(", "))
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism(tmp: &Path) -> Outcome {
    let specs = [
        r#"
eps = 1e-4
max_steps = 200000
seeds = { start = 0, end = 8 }
problem = { kind = "biweight" }
methods = [
  { kind = "gd" }, { kind = "ragd" }, { kind = "ncg" },
  { kind = "guarded", mode = "practical" },
  { kind = "guarded", mode = "practical", nc_exploit = false },
]
"#,
        r#"
eps = 1e-3
max_steps = 200000
assert_lemmas = true
seeds = { start = 0, end = 6 }
problem = { kind = "double_well", dim = 4, start_scale = 1.0 }
methods = [
  { kind = "guarded", mode = "second_order" },
  { kind = "guarded", mode = "third_order" },
  { kind = "gd" },
]
"#,
    ];
    let mut files = 0;
    for (i, text) in specs.iter().enumerate() {
        let spec = ExperimentSpec::from_toml(text).map_err(|e| e.to_string())?;
        let a = tmp.join(format!("det{i}a"));
        let b = tmp.join(format!("det{i}b"));
        run_experiment(&spec, &a, 1).map_err(|e| e.to_string())?;
        run_experiment(&spec, &b, 4).map_err(|e| e.to_string())?;
        let (da, db) = (dir_bytes(&a), dir_bytes(&b));
        if da != db {
            return Err(format!("spec {i}: outputs differ between runs"));
        }
        files += da.len();
    }
    Ok(format!("{files} files byte-identical across repeated runs (1 vs 4 threads)"))
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let criteria: Vec<Criterion> = vec![
        ("1 witness soundness and envelope", Duration::from_secs(120), Box::new(witness_soundness)),
        (
            "2 convex no-false-positive and iteration bound",
            Duration::from_secs(60),
            Box::new(|| convex_no_false_positive(&mut rng(2))),
        ),
        (
            "3 curvature-step decreases",
            Duration::from_secs(30),
            Box::new(|| lemma_decreases(&mut rng(3))),
        ),
        (
            "4 per-iteration progress",
            Duration::from_secs(60),
            Box::new(|| per_iteration_progress(&mut rng(4))),
        ),
        (
            "5 evaluation budgets",
            Duration::from_secs(120),
            Box::new(|| evaluation_budgets(&mut rng(5))),
        ),
        ("6 cubic interpolation identity", Duration::from_secs(1), Box::new(|| cubic_oracle(&mut rng(6)))),
        (
            "7 biweight step-count ordering",
            Duration::from_secs(600),
            Box::new({
                let d = tmp.path().join("ordering");
                move || step_ordering(&d)
            }),
        ),
        ("8 gradient correctness", Duration::from_secs(10), Box::new(|| gradient_checks(&mut rng(8)))),
        ("9 determinism", Duration::from_secs(600), Box::new({
            let d = tmp.path().to_path_buf();
            move || determinism(&d)
        })),
    ];
    let mut failed = 0;
    for (name, limit, run) in criteria {
        let start = Instant::now();
        let res = run();
        let took = start.elapsed();
        let (status, detail) = match res {
            Ok(d) if took <= limit => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; took {took:.1?}, limit {limit:?}")),
            Err(d) => ("FAIL", d),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("[{status}] criterion {name}: {detail} ({took:.2?})");
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
