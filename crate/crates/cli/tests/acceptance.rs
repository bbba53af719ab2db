//! Acceptance suite. One PASS/FAIL line per criterion; exits non-zero when a
//! criterion outside `KNOWN_FAILURES` fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use critwave_core::blowup::*;
use critwave_core::energy::{default_delta0, m_exponents, EnergyTracker, MConvention};
use critwave_core::inequalities::*;
use critwave_core::problem::*;
use critwave_core::solver::*;
use critwave_core::weights::*;

// Criterion 1
const EXPONENT_TOL: f64 = 4.0 * f64::EPSILON;
// Criterion 2
const MARGIN_FLOOR: f64 = 0.0;
const POISSON_TOL: f64 = 1e-6;
// Criterion 3
const CORPUS_SIZE: usize = 100;
const CORPUS_SEED: u64 = 2024;
const DILATION_TOL: f64 = 1e-10;
const GAUSSIAN_TOL: f64 = 1e-3;
const IBP_TOL: f64 = 1e-7;
// Criterion 4
const MMS_ORDER: (f64, f64) = (1.9, 2.1);
const ENERGY_TOL: f64 = 1e-6;
const LEAK_TOL: f64 = 1e-10;
// Criterion 5
const DESK_DR: f64 = 1.0 / 128.0;
const DESK_T_MAX: f64 = 200.0;
const DESK_AMPLITUDE: f64 = 8.0;
const M_GROWTH_MAX: f64 = 2.0;
// Criterion 6
const SUBCRITICAL_SLOPE_TOL: f64 = 0.25;
const SYNTHETIC_TOL: f64 = 1e-10;
const CRITICAL_SLOPE_TOL: f64 = 0.35;
const CRITICAL_DR: f64 = 1.0 / 64.0;
const CRITICAL_T_MAX: f64 = 400.0;
const CRITICAL_EPS_MAX: f64 = 0.08;
// Criterion 7
const PROBE_EPS: f64 = 0.05;
const PROBE_EVERY: usize = 2;
const PROBE_DR: f64 = 1.0 / 64.0;
const PROBE_RATIO_SPREAD: f64 = 10.0;
const DERIVATIVE_BAND: (f64, f64) = (0.5, 1.5);

/// Criteria expected to fail at desk scale; see the project README.
const KNOWN_FAILURES: &[&str] = &["6a"];

struct Outcome {
    id: &'static str,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(id: &'static str, name: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { id, name, pass, detail }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

fn criterion_1() -> Vec<Outcome> {
    let pc = [
        ((1usize, 0.0), 3.0),
        ((3, -1.0), 1.5),
        ((1, -1.0), 2.0),
        ((2, 0.0), 2.0),
        ((2, -2.0), 1.5),
        ((3, 0.5), 1.0 + 2.0 / 2.5),
        ((1, -3.0), 1.5),
    ];
    let mut bad = Vec::new();
    for ((dim, alpha), want) in pc {
        let got = critical_exponent(dim, alpha).unwrap();
        if !close(got, want, EXPONENT_TOL) {
            bad.push(format!("p_c({dim},{alpha}) = {got}"));
        }
    }
    // (dim, p, alpha, beta) -> kappa or critical exponent, by hand.
    let lifespan = [
        ((1usize, 1.5, -1.0, 0.0), LifespanBound::Subcritical { kappa: 1.5 }),
        ((1, 1.5, -1.0, 1.0), LifespanBound::Subcritical { kappa: 0.75 }),
        ((3, 1.25, -1.0, 0.0), LifespanBound::Subcritical { kappa: 0.75 }),
        ((1, 2.0, 0.0, 0.0), LifespanBound::Subcritical { kappa: 2.0 }),
        ((1, 2.0, -1.0, 1.0), LifespanBound::Critical { exponent: 1.0 }),
        ((3, 1.5, -1.0, 0.0), LifespanBound::Critical { exponent: 0.5 }),
    ];
    for ((dim, p, alpha, beta), want) in lifespan {
        let got = lifespan_exponent_for(dim, p, alpha, beta).unwrap();
        let ok = got.is_critical() == want.is_critical() && close(got.target_slope(), want.target_slope(), EXPONENT_TOL);
        if !ok {
            bad.push(format!("lifespan({dim},{p},{alpha},{beta}) = {got:?}"));
        }
    }
    vec![outcome(
        "1",
        "exponent formulas",
        bad.is_empty(),
        format!("{} tuples, mismatches {bad:?}", pc.len() + lifespan.len()),
    )]
}

fn criterion_2() -> Vec<Outcome> {
    let mut worst_margin = f64::INFINITY;
    let mut worst_poisson: f64 = 0.0;
    let mut errors = Vec::new();
    for dim in [1usize, 3] {
        for alpha in [-0.5, -1.0, -2.0] {
            let spec = DampingSpec::new(1.0, alpha, 0.0).unwrap();
            let grid = VerificationGrid::standard(100.0, 100.0);
            let w = match calibrate(&spec, dim, 0.25, &grid) {
                Ok(w) => w,
                Err(e) => {
                    errors.push(format!("({dim},{alpha}): {e}"));
                    continue;
                }
            };
            let table = margin_table(&w, &grid).unwrap();
            assert_eq!(table.len(), 512 * 64);
            let s = summarize(&w, &table);
            worst_margin = worst_margin.min(s.min_margin_24).min(s.min_margin_25);
            worst_poisson = worst_poisson.max(poisson_residual(dim, alpha, w.params().r_delta));
        }
    }
    vec![outcome(
        "2",
        "weight calibration",
        errors.is_empty() && worst_margin >= MARGIN_FLOOR && worst_poisson < POISSON_TOL,
        format!("min margin {worst_margin:.3e}, Poisson residual {worst_poisson:.3e}, errors {errors:?}"),
    )]
}

/// Max of `|-Δv + f| / max|f|`, with `Δv` from Richardson-extrapolated centred differences.
fn poisson_residual(dim: usize, alpha: f64, r_delta: f64) -> f64 {
    let corr = newton_correction(dim, alpha, r_delta, 3.0 * r_delta).unwrap();
    let src = Source::Weight { alpha, r_delta };
    let fmax = (0..=1000)
        .map(|i| src.eval(2.0 * r_delta * i as f64 / 1000.0).abs())
        .fold(0.0, f64::max);
    let h = 1e-3 * r_delta.max(1.0);
    let v = |x: f64| corr.value(x).unwrap();
    let fd = |r: f64, h: f64| (v(r + h) - 2.0 * v(r) + v(r - h)) / (h * h) + (dim as f64 - 1.0) / r * (v(r + h) - v(r - h)) / (2.0 * h);
    corr.table(512)
        .into_iter()
        .filter(|(r, _, _)| *r >= 4.0 * h && r + 4.0 * h <= corr.r_max())
        .map(|(r, _, _)| {
            let lap = (4.0 * fd(r, 0.5 * h) - fd(r, h)) / 3.0;
            (src.eval(r) - lap).abs() / fmax
        })
        .fold(0.0, f64::max)
}

fn criterion_3() -> Vec<Outcome> {
    let mut finite = true;
    let mut worst_dilation: f64 = 0.0;
    let mut worst_ibp: f64 = 0.0;
    for dim in 1..=3usize {
        let p = if dim == 1 { 3.0 } else { 2.0 };
        let corpus = TestFunctionCorpus::generate(dim, CORPUS_SIZE, CORPUS_SEED);
        for r in corpus.evaluate(p).unwrap() {
            finite &= r.gn.is_finite() && r.ckn.iter().chain(&r.gamma_step).all(|x| x.is_finite() && *x > 0.0);
            worst_ibp = worst_ibp.max(r.ibp_residual);
        }
        for e in corpus.entries.iter() {
            for k in 1..=3 {
                let base = ckn_ratio(e, k, dim).unwrap();
                for lambda in [0.5, 3.0] {
                    let d = ckn_ratio(&e.dilated(lambda), k, dim).unwrap();
                    worst_dilation = worst_dilation.max((d / base - 1.0).abs());
                }
            }
        }
    }
    let gs0 = gamma_step_ratio(&Entry::standard_gaussian(), 0.0, 1).unwrap();
    let gaussian_ok = (gs0 - 2.0).abs() <= GAUSSIAN_TOL;
    vec![outcome(
        "3",
        "interpolation inequality suite",
        finite && worst_dilation <= DILATION_TOL && gaussian_ok && worst_ibp < IBP_TOL,
        format!(
            "finite {finite}, dilation {worst_dilation:.2e}, gaussian squared k=1 ratio {gs0:.6}, IBP {worst_ibp:.2e}"
        ),
    )]
}

fn manufactured_error(dim: usize, dr: f64) -> f64 {
    let sp = DampingSpec::new(1.0, -1.0, 0.0).unwrap();
    let bump = Profile::bump(1.0, 2.0);
    let p = 2.0;
    let prob = ProblemSpec::new(dim, p, 1.0, bump, Profile::bump(-1.0, 2.0), 2.0).unwrap();
    let forcing: Forcing = Arc::new(move |t: f64, r: f64| {
        let e = (-t).exp();
        let b = bump.value(r);
        e * b - e * bump.laplacian(r, dim) - sp.coefficient(t, r) * e * b - (e * b).abs().powf(p)
    });
    let grid = RadialGrid::covering(dim, dr, 2.0, 1.0).unwrap();
    let opts = SolverOptions {
        forcing: Some(forcing),
        ..SolverOptions::default()
    };
    let mut s = Solver::new(grid.clone(), sp, prob, 0.5 * dr, opts).unwrap();
    let st = s.run(&Controls::new(1.0), |_| {}).unwrap().final_state;
    st.u_curr
        .iter()
        .enumerate()
        .map(|(j, u)| (u - (-st.t).exp() * bump.value(grid.r(j))).abs())
        .fold(0.0, f64::max)
}

fn criterion_4() -> Vec<Outcome> {
    let mut orders = Vec::new();
    for dim in 1..=3 {
        let errs: Vec<f64> = [1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0]
            .iter()
            .map(|&dr| manufactured_error(dim, dr))
            .collect();
        orders.extend(errs.windows(2).map(|w| (w[0] / w[1]).log2()));
    }
    let orders_ok = orders.iter().all(|o| (MMS_ORDER.0..=MMS_ORDER.1).contains(o));

    let sp = DampingSpec::new(1.0, -1.0, 0.0).unwrap();
    let dr = 1.0 / 256.0;
    let prob = ProblemSpec::new(1, 2.0, 1.0, Profile::bump(1.0, 1.0), Profile::ZERO, 1.0).unwrap();
    let grid = RadialGrid::covering(1, dr, 1.0, 2.0).unwrap();
    let rep = energy_identity_residual(&sp, &prob, &grid, 0.5 * dr, 1024, SolverOptions::linear()).unwrap();

    let mut leak: f64 = 0.0;
    for dim in [1, 2, 3] {
        let dr = 1.0 / 64.0;
        let prob = ProblemSpec::new(dim, 2.0, 1.0, Profile::bump(1.0, 4.0), Profile::ZERO, 4.0).unwrap();
        let grid = RadialGrid::covering(dim, dr, 4.0, 20.0).unwrap();
        let vols = grid.cell_volumes();
        let mut s = Solver::new(grid.clone(), sp, prob, 0.5 * dr, SolverOptions::linear()).unwrap();
        let controls = Controls {
            record_every: 16,
            ..Controls::new(20.0)
        };
        s.run(&controls, |v| {
            let lim = 4.0 + v.t + 4.0 * dr;
            let (mut outside, mut total) = (0.0, 0.0);
            for (j, u) in v.u_curr.iter().enumerate() {
                let m = vols[j] * u * u;
                total += m;
                if grid.r(j) > lim {
                    outside += m;
                }
            }
            leak = leak.max((outside / total).sqrt());
        })
        .unwrap();
    }
    vec![outcome(
        "4",
        "solver verification",
        orders_ok && rep.residual < ENERGY_TOL && leak < LEAK_TOL,
        format!(
            "MMS orders {:.3?}, energy residual {:.2e}, leak {leak:.2e}",
            orders, rep.residual
        ),
    )]
}

fn desk_spec(beta: f64) -> DampingSpec {
    DampingSpec::new(1.0, -1.0, beta).unwrap()
}

fn desk_problem(p: f64, eps: f64) -> ProblemSpec {
    ProblemSpec::new(1, p, eps, Profile::bump(DESK_AMPLITUDE, 1.0), Profile::ZERO, 1.0).unwrap()
}

fn subcritical_eps() -> Vec<f64> {
    (0..6).map(|j| 0.2 * 0.5f64.powi(j)).collect()
}

fn criterion_5(sweep: &SweepResult) -> Vec<Outcome> {
    let spec = desk_spec(0.0);
    let p = 3.0;
    let grid = RadialGrid::covering(1, DESK_DR, 1.0, DESK_T_MAX).unwrap();
    let delta0 = default_delta0(1, -1.0, p).unwrap();
    let w = calibrate(&spec, 1, delta0, &VerificationGrid::standard(grid.r_max(), DESK_T_MAX)).unwrap();
    let mut tracker = EnergyTracker::new(&w, &grid, 0.0, p).unwrap();
    let mut s = Solver::new(grid.clone(), spec, desk_problem(p, 0.01), 0.5 * DESK_DR, SolverOptions::default()).unwrap();
    let controls = Controls {
        record_every: 64,
        ..Controls::new(DESK_T_MAX)
    };
    let out = s
        .run(&controls, |v| {
            tracker.observe(v);
        })
        .unwrap();
    let m = tracker.m_series(m_exponents(1, -1.0, 0.0, delta0, MConvention::Printed));
    let at_one = m.iter().find(|(t, _)| *t >= 1.0).unwrap().1;
    let growth = (m.last().unwrap().1 - at_one).exp();
    let decay_ok = out.status == Status::Decayed && growth <= M_GROWTH_MAX;

    let all_blow = sweep.points.iter().all(|q| q.status == Status::Blowup);
    let times: Vec<f64> = sweep.points.iter().filter_map(|q| q.t).collect();
    vec![
        outcome(
            "5a",
            "dichotomy: p = 3 decays",
            decay_ok,
            format!("status {}, M(final)/M(1) = {growth:.4}", out.status.name()),
        ),
        outcome(
            "5b",
            "dichotomy: p = 1.5 blows up",
            all_blow && sweep.monotone(),
            format!("T = {times:.3?}"),
        ),
    ]
}

fn criterion_6(sweep: &SweepResult) -> Vec<Outcome> {
    let (slope, rel) = sweep.fit.map_or((f64::NAN, f64::INFINITY), |f| (f.fitted_slope, f.rel_err));

    let eps: Vec<f64> = (0..6).map(|j| 0.2 * 0.5f64.powi(j)).collect();
    let mut synth: f64 = 0.0;
    for (kappa, c) in [(0.5, 1.0), (1.5, 3.0), (3.0, 0.2)] {
        let pts: Vec<(f64, f64)> = eps.iter().map(|&e| (e, c * e.powf(-kappa))).collect();
        let f = fit_lifespan_slope(&pts, LifespanBound::Subcritical { kappa }).unwrap();
        synth = synth.max((f.fitted_slope + kappa).abs());
    }
    for (a, c) in [(1.0, 0.5), (0.5, 1.0)] {
        let pts: Vec<(f64, f64)> = eps.iter().map(|&e| (e, (c * e.powf(-a)).exp())).collect();
        let f = fit_lifespan_slope(&pts, LifespanBound::Critical { exponent: a }).unwrap();
        synth = synth.max((f.fitted_slope + a).abs());
    }

    let grid = RadialGrid::covering(1, CRITICAL_DR, 1.0, CRITICAL_T_MAX).unwrap();
    let crit_eps: Vec<f64> = (0..5).map(|j| CRITICAL_EPS_MAX * 2f64.powf(-j as f64 / 4.0)).collect();
    let crit = lifespan_sweep(&desk_spec(1.0), &desk_problem(2.0, 0.1), &crit_eps, &grid, &Controls::new(CRITICAL_T_MAX)).unwrap();
    let crit_fit = crit.fit.filter(|f| f.points_used == 5);
    let (cslope, crel) = crit_fit.map_or((f64::NAN, f64::INFINITY), |f| (f.fitted_slope, f.rel_err));
    let crit_times: Vec<f64> = crit.points.iter().filter_map(|q| q.t).collect();
    vec![
        outcome(
            "6a",
            "subcritical lifespan slope",
            rel <= SUBCRITICAL_SLOPE_TOL,
            format!("fitted {slope:.4}, target -1.5, rel err {rel:.3}"),
        ),
        outcome(
            "6b",
            "synthetic slope injection",
            synth <= SYNTHETIC_TOL,
            format!("max error {synth:.2e}"),
        ),
        outcome(
            "6c",
            "critical log log slope",
            crel <= CRITICAL_SLOPE_TOL,
            format!("fitted {cslope:.4}, target -1, rel err {crel:.3}, T = {crit_times:.2?}"),
        ),
    ]
}

fn criterion_7() -> Vec<Outcome> {
    let grid = RadialGrid::covering(1, PROBE_DR, 1.0, DESK_T_MAX).unwrap();
    let controls = Controls::new(DESK_T_MAX);

    let spec = desk_spec(0.0);
    let prob = desk_problem(1.5, PROBE_EPS);
    let (_, rec) = record_run(&spec, &prob, &grid, &controls, RecordOptions::new(PROBE_EVERY, 40.0)).unwrap();
    let ratios: Vec<f64> = [1.0, 2.0, 4.0, 8.0]
        .iter()
        .map(|&r| {
            let probe = TestFunctionProbe::new(r * prob.r0, 1.5, &spec).unwrap();
            probe_inequality(&rec, &probe, &prob, &spec).unwrap().ratio()
        })
        .collect();
    let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);

    let cspec = desk_spec(1.0);
    let cprob = desk_problem(2.0, PROBE_EPS);
    let (_, crec) = record_run(&cspec, &cprob, &grid, &controls, RecordOptions::new(PROBE_EVERY, 40.0)).unwrap();
    let base = TestFunctionProbe::new(cprob.r0, 2.0, &cspec).unwrap();
    let mut samples = 0;
    let mut dominated = true;
    let mut rho = 1.0;
    while rho <= crec.t_covered() {
        let (y, bound) = y_domination(&crec, &base, rho, 1).unwrap();
        dominated &= y <= bound;
        samples += 1;
        rho *= 2.0;
    }

    let mut stable = true;
    for (sp, p) in [(spec, 1.5), (cspec, 2.0)] {
        let consts: Vec<DerivativeConstants> = [1.0, 2.0, 4.0, 8.0]
            .iter()
            .map(|&r| derivative_constants(&TestFunctionProbe::new(r, p, &sp).unwrap(), 1, 301))
            .collect();
        let fields: [fn(&DerivativeConstants) -> f64; 3] = [|c| c.dt, |c| c.dtt, |c| c.laplacian];
        for f in fields {
            let vals: Vec<f64> = consts.iter().map(f).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            stable &= vals
                .iter()
                .all(|v| v.is_finite() && (DERIVATIVE_BAND.0..=DERIVATIVE_BAND.1).contains(&(v / mean)));
        }
    }
    vec![
        outcome(
            "7a",
            "probe ratio bounded",
            hi / lo <= PROBE_RATIO_SPREAD,
            format!("ratios {ratios:.3?}, max/min {:.3}", hi / lo),
        ),
        outcome(
            "7b",
            "Y log-2 domination",
            dominated && samples >= 4,
            format!("{samples} sampled rho"),
        ),
        outcome("7c", "probe derivative constants", stable, String::new()),
    ]
}

const DETERMINISM_CONFIGS: [(&str, &str); 5] = [
    (
        "simulate",
        "[damping]\na0 = 1\nalpha = -1\nbeta = 0\n[problem]\ndim = 1\np = 3\nepsilon = 0.01\nu0_amplitude = 8\n\
         [grid]\ndr = 0.015625\n[controls]\nt_max = 40\n",
    ),
    (
        "sweep",
        "[damping]\na0 = 1\nalpha = -1\nbeta = 0\n[problem]\ndim = 1\np = 1.5\nepsilon = 0.1\nu0_amplitude = 8\n\
         [grid]\ndr = 0.03125\n[controls]\nt_max = 200\n",
    ),
    (
        "verify-weight",
        "[damping]\na0 = 1\nalpha = -1\nbeta = 0\n[problem]\ndim = 3\np = 2\nepsilon = 0.1\n[controls]\nt_max = 100\n",
    ),
    (
        "verify-ineq",
        "[damping]\na0 = 1\nalpha = -1\nbeta = 0\n[problem]\ndim = 1\np = 3\nepsilon = 0.1\n[controls]\ncorpus_size = 30\n",
    ),
    (
        "testfn",
        "[damping]\na0 = 1\nalpha = -1\nbeta = 1\n[problem]\ndim = 1\np = 2\nepsilon = 0.05\nu0_amplitude = 8\n\
         [grid]\ndr = 0.03125\n[controls]\nt_max = 100\n",
    ),
];

fn run_all(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for (sub, text) in DETERMINISM_CONFIGS {
        let cfg = root.join(format!("{sub}.toml"));
        std::fs::write(&cfg, text).unwrap();
        let out = root.join(sub);
        let status = Command::new(env!("CARGO_BIN_EXE_critwave"))
            .args([sub, "--config", cfg.to_str().unwrap(), "--output-dir", out.to_str().unwrap()])
            .status()
            .unwrap();
        assert!(status.success(), "{sub} exited with {status}");
        for e in std::fs::read_dir(&out).unwrap() {
            let e = e.unwrap();
            files.insert(format!("{sub}/{}", e.file_name().to_string_lossy()), std::fs::read(e.path()).unwrap());
        }
    }
    files
}

fn criterion_8() -> Vec<Outcome> {
    let dir = tempfile::tempdir().unwrap();
    let first = run_all(dir.path());
    for (sub, _) in DETERMINISM_CONFIGS {
        std::fs::remove_dir_all(dir.path().join(sub)).unwrap();
    }
    let second = run_all(dir.path());
    let differing: Vec<&String> = first.keys().filter(|k| first.get(*k) != second.get(*k)).collect();
    vec![outcome(
        "8",
        "determinism",
        first.len() == second.len() && differing.is_empty(),
        format!("{} artifacts, differing {differing:?}", first.len()),
    )]
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut results = Vec::new();
    let mut timed = |f: &dyn Fn() -> Vec<Outcome>| {
        let start = Instant::now();
        let out = f();
        let secs = start.elapsed().as_secs_f64();
        for o in out {
            results.push((o, secs));
        }
    };
    timed(&criterion_1);
    timed(&criterion_2);
    timed(&criterion_3);
    timed(&criterion_4);
    let grid = RadialGrid::covering(1, DESK_DR, 1.0, DESK_T_MAX).unwrap();
    let sweep = lifespan_sweep(&desk_spec(0.0), &desk_problem(1.5, 0.1), &subcritical_eps(), &grid, &Controls::new(DESK_T_MAX)).unwrap();
    timed(&|| criterion_5(&sweep));
    timed(&|| criterion_6(&sweep));
    timed(&criterion_7);
    timed(&criterion_8);

    let mut unexpected = Vec::new();
    for (o, secs) in &results {
        let known = KNOWN_FAILURES.contains(&o.id);
        let tag = match (o.pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("criterion {:<3} {tag:<12} {:<32} {:>7.1}s  {}", o.id, o.name, secs, o.detail);
        if !o.pass && !known {
            unexpected.push(o.id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
