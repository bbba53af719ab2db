//! Test-function functionals along computed solutions and the lifespan sweep.

use rayon::prelude::*;
use serde::Serialize;

use crate::energy::least_squares_slope;
use crate::error::{invalid, Error, Result};
use crate::problem::{initial_mass_functional_on, lifespan_exponent, DampingSpec, LifespanBound, ProblemSpec};
use crate::quadrature::{radial_power, simpson_weights, sphere_area};
use crate::smoothstep::{self, Jet};
use crate::solver::{Controls, RadialGrid, SimOutcome, Solver, SolverOptions, StateView, Status};

pub const THREADS_ENV: &str = "CRITWAVE_THREADS";
pub const Y_NODES: usize = 65;

/// Cutoff on `(1/2, 1)`: 1 below, 0 above, quintic in between.
pub fn eta(s: f64) -> Jet {
    smoothstep::window(s, 0.5, 1.0)
}

/// `eta` with the plateau removed.
pub fn eta_star(s: f64) -> f64 {
    if s <= 0.5 {
        0.0
    } else {
        eta(s).value
    }
}

/// Scaled cutoff `psi_R = eta(arg)^{2p'}` with `arg = (|x|^{2-alpha} + t^2)/R^2` for
/// `beta = 1` and `(|x|^{2-alpha} + t)/R` for `beta = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestFunctionProbe {
    pub r_scale: f64,
    pub p: f64,
    pub p_prime: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// Derivatives of `psi_R` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeJet {
    pub psi: f64,
    pub psi_star: f64,
    pub dt: f64,
    pub dtt: f64,
    pub laplacian: f64,
}

impl TestFunctionProbe {
    pub fn new(r_scale: f64, p: f64, spec: &DampingSpec) -> Result<Self> {
        if !(r_scale > 0.0 && r_scale.is_finite()) {
            return Err(invalid("R", "must be positive and finite"));
        }
        if !(p > 1.0) {
            return Err(invalid("p", "must exceed 1"));
        }
        if spec.beta != 0.0 && spec.beta != 1.0 {
            return Err(invalid("beta", format!("probes exist for beta = 0 or 1, got {}", spec.beta)));
        }
        if !(spec.alpha < 2.0) {
            return Err(invalid("alpha", "must be below 2"));
        }
        Ok(Self {
            r_scale,
            p,
            p_prime: p / (p - 1.0),
            alpha: spec.alpha,
            beta: spec.beta,
        })
    }

    pub fn with_scale(&self, r_scale: f64) -> Self {
        Self { r_scale, ..*self }
    }

    fn quadratic(&self) -> bool {
        self.beta == 1.0
    }

    pub fn arg(&self, t: f64, r: f64) -> f64 {
        let x = r.powf(2.0 - self.alpha);
        if self.quadratic() {
            (x + t * t) / (self.r_scale * self.r_scale)
        } else {
            (x + t) / self.r_scale
        }
    }

    pub fn psi(&self, t: f64, r: f64) -> f64 {
        eta(self.arg(t, r)).value.powf(2.0 * self.p_prime)
    }

    pub fn psi_star(&self, t: f64, r: f64) -> f64 {
        eta_star(self.arg(t, r)).powf(2.0 * self.p_prime)
    }

    /// Time-weighted multiplier: `(1+t) psi_R` for `beta = 1`, `psi_R` for `beta = 0`.
    pub fn multiplier(&self, t: f64) -> f64 {
        if self.quadratic() {
            1.0 + t
        } else {
            1.0
        }
    }

    /// Largest time in the support.
    pub fn t_support(&self) -> f64 {
        self.r_scale
    }

    /// Largest radius in the support.
    pub fn r_support(&self) -> f64 {
        let x = if self.quadratic() {
            self.r_scale * self.r_scale
        } else {
            self.r_scale
        };
        x.powf(1.0 / (2.0 - self.alpha))
    }

    pub fn jet(&self, dim: usize, t: f64, r: f64) -> ProbeJet {
        let q = 2.0 * self.p_prime;
        let s = self.arg(t, r);
        let e = eta(s);
        let psi = e.value.powf(q);
        let psi_star = if s <= 0.5 { 0.0 } else { psi };
        // g(s) = eta^q
        let (g1, g2) = if e.d1 == 0.0 && e.d2 == 0.0 {
            (0.0, 0.0)
        } else {
            (
                q * e.value.powf(q - 1.0) * e.d1,
                q * (q - 1.0) * e.value.powf(q - 2.0) * e.d1 * e.d1 + q * e.value.powf(q - 1.0) * e.d2,
            )
        };
        let rr = self.r_scale;
        let a = 2.0 - self.alpha;
        let (st, stt, sr2, lap_coef) = if self.quadratic() {
            (
                2.0 * t / (rr * rr),
                2.0 / (rr * rr),
                a * a * r.powf(2.0 - 2.0 * self.alpha) / rr.powi(4),
                a * (dim as f64 - self.alpha) * r.powf(-self.alpha) / (rr * rr),
            )
        } else {
            (
                1.0 / rr,
                0.0,
                a * a * r.powf(2.0 - 2.0 * self.alpha) / (rr * rr),
                a * (dim as f64 - self.alpha) * r.powf(-self.alpha) / rr,
            )
        };
        ProbeJet {
            psi,
            psi_star,
            dt: g1 * st,
            dtt: g2 * st * st + g1 * stt,
            laplacian: g2 * sr2 + g1 * lap_coef,
        }
    }

    /// `(2 or 4)/(2-alpha) (1/(p-1) - (N-alpha)/2) / p'`.
    pub fn r_power(&self, dim: usize) -> f64 {
        let lead = if self.quadratic() { 4.0 } else { 2.0 };
        lead / (2.0 - self.alpha) * (1.0 / (self.p - 1.0) - (dim as f64 - self.alpha) / 2.0) / self.p_prime
    }
}

/// Uniform-in-time snapshots of `u`, truncated in radius and optionally thinned.
#[derive(Debug, Clone, Serialize)]
pub struct SpaceTimeRecord {
    pub dim: usize,
    /// Radial spacing of stored samples.
    pub dr: f64,
    /// Time between snapshots.
    pub dt: f64,
    pub times: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

impl SpaceTimeRecord {
    pub fn t_covered(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn r_covered(&self) -> f64 {
        self.rows.first().map(|r| (r.len() - 1) as f64 * self.dr).unwrap_or(0.0)
    }

    /// `int_0^{t_hi} int |u|^p m(t) phi(t, r) dx dt` with tensor Simpson.
    fn integrate(&self, t_hi: f64, p: f64, weight: impl Fn(f64, f64) -> f64) -> Result<f64> {
        let available = self.t_covered();
        if t_hi > available * (1.0 + 1e-12) || self.times.len() < 2 {
            return Err(Error::InsufficientCoverage {
                needed: t_hi,
                available,
            });
        }
        let last = self
            .times
            .iter()
            .position(|&t| t >= t_hi * (1.0 - 1e-12))
            .unwrap_or(self.times.len() - 1)
            .max(1);
        let tw = simpson_weights(last + 1, self.dt);
        let n = self.rows[0].len();
        let omega = sphere_area(self.dim);
        let rw: Vec<f64> = simpson_weights(n, self.dr)
            .into_iter()
            .enumerate()
            .map(|(j, w)| w * omega * radial_power(j as f64 * self.dr, self.dim))
            .collect();
        let mut total = 0.0;
        for (i, w_t) in tw.iter().enumerate() {
            let t = self.times[i];
            let row = &self.rows[i];
            let mut inner = 0.0;
            for (j, &u) in row.iter().enumerate() {
                if u == 0.0 {
                    continue;
                }
                let phi = weight(t, j as f64 * self.dr);
                if phi != 0.0 {
                    inner += rw[j] * u.abs().powf(p) * phi;
                }
            }
            total += w_t * inner;
        }
        Ok(total)
    }
}

/// Which snapshots to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordOptions {
    /// Keep every snapshot whose step is a multiple of this.
    pub every_steps: usize,
    /// Keep every `radial_stride`-th node.
    pub radial_stride: usize,
    /// Drop nodes beyond this radius.
    pub r_cap: f64,
}

impl RecordOptions {
    pub fn new(every_steps: usize, r_cap: f64) -> Self {
        Self {
            every_steps,
            radial_stride: 1,
            r_cap,
        }
    }
}

/// Accumulates snapshots from solver observer calls.
#[derive(Debug, Clone)]
pub struct SpaceTimeRecorder {
    opts: RecordOptions,
    record: Option<SpaceTimeRecord>,
}

impl SpaceTimeRecorder {
    pub fn new(opts: RecordOptions) -> Self {
        Self { opts, record: None }
    }

    pub fn observe(&mut self, view: &StateView<'_>) {
        if view.step % self.opts.every_steps != 0 {
            return;
        }
        let stride = self.opts.radial_stride.max(1);
        let n = ((self.opts.r_cap / (view.grid.dr * stride as f64)).floor() as usize + 1)
            .min((view.u_curr.len() - 1) / stride + 1);
        let row: Vec<f64> = (0..n).map(|j| view.u_curr[j * stride]).collect();
        let rec = self.record.get_or_insert_with(|| SpaceTimeRecord {
            dim: view.grid.dim,
            dr: view.grid.dr * stride as f64,
            dt: view.dt * self.opts.every_steps as f64,
            times: Vec::new(),
            rows: Vec::new(),
        });
        rec.times.push(view.t);
        rec.rows.push(row);
    }

    pub fn finish(self) -> Option<SpaceTimeRecord> {
        self.record
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Solve and record; the series cadence is refined when it does not divide `every_steps`.
pub fn record_run(
    spec: &DampingSpec,
    prob: &ProblemSpec,
    grid: &RadialGrid,
    controls: &Controls,
    opts: RecordOptions,
) -> Result<(SimOutcome, SpaceTimeRecord)> {
    if opts.every_steps == 0 {
        return Err(invalid("every_steps", "must be positive"));
    }
    let mut controls = *controls;
    controls.record_every = gcd(controls.record_every, opts.every_steps);
    let dt = controls.cfl * grid.dr;
    let mut solver = Solver::new(grid.clone(), *spec, *prob, dt, SolverOptions::default())?;
    let mut recorder = SpaceTimeRecorder::new(opts);
    let outcome = solver.run(&controls, |v| recorder.observe(v))?;
    let record = recorder.finish().expect("the initial state is always observed");
    Ok((outcome, record))
}

/// Both sides of the probe inequality with unit constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeValues {
    pub r_scale: f64,
    pub data_term: f64,
    pub nonlinear: f64,
    pub nonlinear_star: f64,
    pub lhs: f64,
    /// `R^{-power} (nonlinear_star)^{1/p}`.
    pub rhs_shape: f64,
}

impl ProbeValues {
    pub fn ratio(&self) -> f64 {
        self.lhs / self.rhs_shape
    }
}

fn data_term(spec: &DampingSpec, prob: &ProblemSpec, dr: f64) -> f64 {
    if prob.epsilon == 0.0 {
        return 0.0;
    }
    prob.epsilon * initial_mass_functional_on(spec, prob, dr)
}

fn nonlinear_term(record: &SpaceTimeRecord, probe: &TestFunctionProbe, starred: bool) -> Result<f64> {
    if probe.r_support() > record.r_covered() * (1.0 + 1e-12) {
        log::debug!(
            "probe radius {} exceeds recorded radius {}; relying on the solution support",
            probe.r_support(),
            record.r_covered()
        );
    }
    record.integrate(probe.t_support(), probe.p, |t, r| {
        let m = probe.multiplier(t);
        if starred {
            m * probe.psi_star(t, r)
        } else {
            m * probe.psi(t, r)
        }
    })
}

pub fn probe_inequality(
    record: &SpaceTimeRecord,
    probe: &TestFunctionProbe,
    prob: &ProblemSpec,
    spec: &DampingSpec,
) -> Result<ProbeValues> {
    if probe.r_scale < prob.r0 {
        return Err(invalid("R", format!("must be at least R0 = {}", prob.r0)));
    }
    let data = data_term(spec, prob, record.dr);
    let nl = nonlinear_term(record, probe, false)?;
    let nls = nonlinear_term(record, probe, true)?;
    Ok(ProbeValues {
        r_scale: probe.r_scale,
        data_term: data,
        nonlinear: nl,
        nonlinear_star: nls,
        lhs: data + nl,
        rhs_shape: probe.r_scale.powf(-probe.r_power(record.dim)) * nls.powf(1.0 / probe.p),
    })
}

/// `Y(rho) = int_1^rho (iint |u|^p (1+t) psi_R^*) R^{-1} dR`, Simpson in `log R`.
pub fn y_functional(record: &SpaceTimeRecord, probe: &TestFunctionProbe, rho: f64, dim: usize) -> Result<f64> {
    let p_c = crate::problem::critical_exponent(dim, probe.alpha)?;
    if !crate::problem::is_critical(probe.p, p_c) {
        return Err(invalid("p", format!("Y requires p = p_c = {p_c}, got {}", probe.p)));
    }
    if rho < 1.0 {
        return Err(invalid("rho", "must be at least 1"));
    }
    if rho == 1.0 {
        return Ok(0.0);
    }
    let span = rho.ln();
    let h = span / (Y_NODES - 1) as f64;
    let w = simpson_weights(Y_NODES, h);
    let mut total = 0.0;
    for (i, wi) in w.iter().enumerate() {
        let r_scale = (i as f64 * h).exp().min(rho);
        total += wi * nonlinear_term(record, &probe.with_scale(r_scale), true)?;
    }
    Ok(total)
}

/// `(Y(rho), log 2 * iint |u|^p (1+t) psi_rho)`.
pub fn y_domination(record: &SpaceTimeRecord, probe: &TestFunctionProbe, rho: f64, dim: usize) -> Result<(f64, f64)> {
    let y = y_functional(record, probe, rho, dim)?;
    let bound = std::f64::consts::LN_2 * nonlinear_term(record, &probe.with_scale(rho), false)?;
    Ok((y, bound))
}

/// Grid maxima of the normalized derivative quotients of `psi_R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivativeConstants {
    pub r_scale: f64,
    pub dt: f64,
    pub dtt: f64,
    pub laplacian: f64,
}

/// `beta = 1`: `|d_t psi| R^2 / ((1+t) psi*^{1-1/(2p')})`, `|d_tt psi| R^2 / psi*^{1/p}`,
/// `|Lap psi| R^2 / (<x>^{-alpha} psi*^{1/p})`. For `beta = 0` the powers of `R` are
/// 1, 2, 1 and the `(1+t)` factor is absent.
pub fn derivative_constants(probe: &TestFunctionProbe, dim: usize, n: usize) -> DerivativeConstants {
    let rr = probe.r_scale;
    let (pt, ptt, plap) = if probe.quadratic() {
        (rr * rr, rr * rr, rr * rr)
    } else {
        (rr, rr * rr, rr)
    };
    let tmax = probe.t_support();
    let rmax = probe.r_support();
    let mut out = DerivativeConstants {
        r_scale: rr,
        dt: 0.0,
        dtt: 0.0,
        laplacian: 0.0,
    };
    for i in 0..n {
        let t = tmax * i as f64 / (n - 1) as f64;
        for j in 0..n {
            let r = rmax * j as f64 / (n - 1) as f64;
            let jet = probe.jet(dim, t, r);
            if jet.psi_star == 0.0 {
                continue;
            }
            let m = if probe.quadratic() { 1.0 + t } else { 1.0 };
            let a = (1.0 + r * r).powf(-probe.alpha / 2.0);
            let s1 = jet.psi_star.powf(1.0 - 1.0 / (2.0 * probe.p_prime));
            let sp = jet.psi_star.powf(1.0 / probe.p);
            out.dt = out.dt.max(jet.dt.abs() * pt / (m * s1));
            out.dtt = out.dtt.max(jet.dtt.abs() * ptt / sp);
            out.laplacian = out.laplacian.max(jet.laplacian.abs() * plap / (a * sp));
        }
    }
    out
}

/// Worker count for sweeps: `CRITWAVE_THREADS` if set and positive, else all cores.
pub fn sweep_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub eps: f64,
    #[serde(rename = "T_lo")]
    pub t_lo: Option<f64>,
    #[serde(rename = "T_hi")]
    pub t_hi: Option<f64>,
    /// Lifespan value used in the fit.
    #[serde(rename = "T")]
    pub t: Option<f64>,
    pub status: Status,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub fitted_slope: f64,
    pub target_slope: f64,
    pub rel_err: f64,
    pub points_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub critical: bool,
    pub fit: Option<SlopeFit>,
}

impl SweepResult {
    /// `T` is non-increasing in `eps` across the points that blew up.
    pub fn monotone(&self) -> bool {
        let mut pts: Vec<(f64, f64)> = self.points.iter().filter_map(|p| p.t.map(|t| (p.eps, t))).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts.windows(2).all(|w| w[1].1 <= w[0].1)
    }
}

/// Least-squares slope of `log T` (subcritical) or `log log T` (critical) against
/// `log eps`. The largest `eps` is dropped when at least 5 points remain.
pub fn fit_lifespan_slope(points: &[(f64, f64)], bound: LifespanBound) -> Result<SlopeFit> {
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pts.len() >= 6 {
        pts.pop();
    }
    if pts.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            found: pts.len(),
        });
    }
    let critical = bound.is_critical();
    let xy = pts
        .iter()
        .map(|&(e, t)| {
            let y = if critical { t.ln().ln() } else { t.ln() };
            if !(e > 0.0) || !y.is_finite() {
                return Err(Error::NonPositive { t: e, value: t });
            }
            Ok((e.ln(), y))
        })
        .collect::<Result<Vec<_>>>()?;
    let slope = least_squares_slope(&xy);
    let target = bound.target_slope();
    Ok(SlopeFit {
        fitted_slope: slope,
        target_slope: target,
        rel_err: ((slope - target) / target).abs(),
        points_used: xy.len(),
    })
}

/// One solver run per `eps`, in parallel, merged in input order.
pub fn lifespan_sweep(
    spec: &DampingSpec,
    template: &ProblemSpec,
    eps_list: &[f64],
    grid: &RadialGrid,
    controls: &Controls,
) -> Result<SweepResult> {
    let bound = lifespan_exponent(spec, template)?;
    if eps_list.is_empty() || eps_list.iter().any(|&e| !(e > 0.0)) {
        return Err(invalid("eps", "sweep needs a non-empty list of positive amplitudes"));
    }
    let mass = initial_mass_functional_on(spec, template, grid.dr);
    if !(mass > 0.0) {
        return Err(Error::NonPositiveInitialMass { value: mass });
    }
    controls.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(sweep_threads())
        .build()
        .map_err(|e| invalid("threads", e.to_string()))?;
    let outcomes: Vec<Result<SimOutcome>> = pool.install(|| {
        eps_list
            .par_iter()
            .map(|&eps| crate::solver::run(spec, &template.with_epsilon(eps), grid, controls))
            .collect()
    });
    let mut points = Vec::with_capacity(eps_list.len());
    for (&eps, outcome) in eps_list.iter().zip(outcomes) {
        let o = outcome?;
        let est = o.lifespan;
        points.push(SweepPoint {
            eps,
            t_lo: est.map(|e| e.lo),
            t_hi: est.map(|e| e.hi),
            t: est.map(|e| e.value()),
            status: o.status,
        });
        if o.status != Status::Blowup {
            log::info!("eps = {eps}: {} by t = {}; excluded from the fit", o.status.name(), o.t_end);
        }
    }
    let usable: Vec<(f64, f64)> = points.iter().filter_map(|p| p.t.map(|t| (p.eps, t))).collect();
    let fit = fit_lifespan_slope(&usable, bound).ok();
    Ok(SweepResult {
        points,
        critical: bound.is_critical(),
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec(beta: f64) -> DampingSpec {
        DampingSpec::new(1.0, -1.0, beta).unwrap()
    }

    #[test]
    fn cutoff_plateau_and_tail() {
        let pr = TestFunctionProbe::new(4.0, 2.0, &spec(1.0)).unwrap();
        // arg = (r^3 + t^2)/16
        assert_eq!(pr.psi(2.0, 1.0), 1.0);
        assert_eq!(pr.psi_star(2.0, 1.0), 0.0);
        assert_eq!(pr.psi(4.0, 0.0), 0.0);
        let (t, r) = (3.0, 0.5);
        assert!(pr.psi_star(t, r) > 0.0 && pr.psi_star(t, r) <= pr.psi(t, r));
    }

    #[test]
    fn jet_matches_finite_differences() {
        for beta in [0.0, 1.0] {
            let pr = TestFunctionProbe::new(3.0, 1.7, &spec(beta)).unwrap();
            let dim = 2;
            let h = 1e-4;
            for &(t, r) in &[(1.9, 0.8), (2.1, 1.1), (0.7, 1.3)] {
                let j = pr.jet(dim, t, r);
                let fdt = (pr.psi(t + h, r) - pr.psi(t - h, r)) / (2.0 * h);
                let fdtt = (pr.psi(t + h, r) - 2.0 * pr.psi(t, r) + pr.psi(t - h, r)) / (h * h);
                let frr = (pr.psi(t, r + h) - 2.0 * pr.psi(t, r) + pr.psi(t, r - h)) / (h * h);
                let fr = (pr.psi(t, r + h) - pr.psi(t, r - h)) / (2.0 * h);
                let lap = frr + (dim as f64 - 1.0) / r * fr;
                assert_relative_eq!(j.dt, fdt, epsilon = 1e-6, max_relative = 1e-5);
                assert_relative_eq!(j.dtt, fdtt, epsilon = 1e-4, max_relative = 1e-4);
                assert_relative_eq!(j.laplacian, lap, epsilon = 1e-4, max_relative = 1e-4);
            }
        }
    }

    #[test]
    fn r_powers() {
        // N=1, alpha=-1, p=1.5: gap = 2 - 1 = 1, p' = 3
        let pr = TestFunctionProbe::new(1.0, 1.5, &spec(0.0)).unwrap();
        assert_relative_eq!(pr.r_power(1), 2.0 / 3.0 / 3.0, epsilon = 1e-15);
        let pr = TestFunctionProbe::new(1.0, 1.5, &spec(1.0)).unwrap();
        assert_relative_eq!(pr.r_power(1), 4.0 / 3.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn beta_other_than_zero_or_one_rejected() {
        let s = DampingSpec::new(1.0, -1.0, 0.5).unwrap();
        assert!(TestFunctionProbe::new(2.0, 2.0, &s).is_err());
    }

    #[test]
    fn synthetic_power_law_fit() {
        let pts: Vec<(f64, f64)> = (0..6)
            .map(|j| {
                let e = 0.2 * 0.5f64.powi(j);
                (e, e.powf(-1.5))
            })
            .collect();
        let fit = fit_lifespan_slope(&pts, LifespanBound::Subcritical { kappa: 1.5 }).unwrap();
        assert_eq!(fit.points_used, 5);
        assert!((fit.fitted_slope + 1.5).abs() < 1e-10);
    }

    #[test]
    fn synthetic_double_log_fit() {
        let pts: Vec<(f64, f64)> = (0..5)
            .map(|j| {
                let e = 0.08 * 2f64.powf(-j as f64 / 4.0);
                (e, e.powf(-0.5).exp())
            })
            .collect();
        let fit = fit_lifespan_slope(&pts, LifespanBound::Critical { exponent: 0.5 }).unwrap();
        assert_eq!(fit.points_used, 5);
        assert!((fit.fitted_slope + 0.5).abs() < 1e-10);
    }

    #[test]
    fn threads_env_parsing() {
        assert!(sweep_threads() >= 1);
    }
}
