//! Explicit radial integrator for `u_tt - Laplace u + c(t,r) u_t = |u|^p`.
//!
//! Leapfrog in time with the damping term centered at `t_n`:
//!
//! ```text
//! u^{n+1} (1 + c dt/2) = 2 u^n - u^{n-1} (1 - c dt/2) + dt^2 (L_h u^n + |u^n|^p + f(t_n))
//! ```
//!
//! The nonlinearity is `|u|^p`, not `|u|^{p-1} u`. The radial Laplacian is written in
//! flux form on the cells `[r_{j-1/2}, r_{j+1/2}]`, which is the standard second-order
//! operator `u'' + (N-1) u'/r` with the even-extension rule `N u''(0)` at the origin, and
//! which makes the discrete energy law an exact summation-by-parts identity.

use std::collections::VecDeque;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::problem::{DampingSpec, ProblemSpec};
use crate::quadrature::sphere_area;

pub const MAX_CFL: f64 = 0.9;
pub const DEFAULT_CFL: f64 = 0.5;
pub const DEFAULT_BLOWUP_THRESHOLD: f64 = 1e6;
/// Halo beyond the light cone, in grid steps, that the grid must keep interior.
pub const HALO_STEPS: f64 = 4.0;
const FIT_SAMPLES: usize = 16;
/// Recorded support radii count values above this fraction of the initial `sup |u|`.
pub const SUPPORT_REL_TOL: f64 = 1e-10;

/// Uniform radial grid `r_j = j dr`, `j = 0..n_r`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialGrid {
    pub dim: usize,
    pub dr: f64,
    pub n_r: usize,
}

impl RadialGrid {
    pub fn new(dim: usize, dr: f64, n_r: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dim", "must be at least 1"));
        }
        if !(dr > 0.0 && dr.is_finite()) {
            return Err(invalid("dr", format!("must be positive, got {dr}")));
        }
        if n_r < 4 {
            return Err(invalid("n_r", "need at least four nodes"));
        }
        Ok(Self { dim, dr, n_r })
    }

    /// Smallest grid with `r_max >= r0 + t_max + 4 dr`.
    pub fn covering(dim: usize, dr: f64, r0: f64, t_max: f64) -> Result<Self> {
        let needed = r0 + t_max + HALO_STEPS * dr;
        let n_r = (needed / dr - 1e-9).ceil() as usize + 1;
        Self::new(dim, dr, n_r.max(4))
    }

    pub fn r(&self, j: usize) -> f64 {
        j as f64 * self.dr
    }

    pub fn r_max(&self) -> f64 {
        self.dr * (self.n_r - 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_r).map(|j| self.r(j)).collect()
    }

    pub fn check_covers(&self, r0: f64, t_max: f64) -> Result<()> {
        let needed = r0 + t_max + HALO_STEPS * self.dr;
        if self.r_max() < needed * (1.0 - 1e-12) {
            return Err(invalid(
                "r_max",
                format!("grid radius {} below r0 + t_max + 4 dr = {needed}", self.r_max()),
            ));
        }
        Ok(())
    }

    /// Cell volumes `omega_N (r_{j+1/2}^N - r_{j-1/2}^N) / N`, half cell at the origin.
    pub fn cell_volumes(&self) -> Vec<f64> {
        let n = self.dim as i32;
        let omega = sphere_area(self.dim) / self.dim as f64;
        let h = self.dr;
        (0..self.n_r)
            .map(|j| {
                let r = self.r(j);
                let lo = if j == 0 { 0.0 } else { r - 0.5 * h };
                let hi = if j + 1 == self.n_r { r } else { r + 0.5 * h };
                omega * (hi.powi(n) - lo.powi(n))
            })
            .collect()
    }

    /// Face weights `omega_N r_{j+1/2}^{N-1} / dr` for the gradient part of the energy.
    pub fn face_weights(&self) -> Vec<f64> {
        let omega = sphere_area(self.dim);
        (0..self.n_r - 1)
            .map(|j| {
                let rf = (j as f64 + 0.5) * self.dr;
                omega * crate::quadrature::radial_power(rf, self.dim) / self.dr
            })
            .collect()
    }
}

/// Two consecutive time levels: `u_curr` at `t`, `u_prev` at `t - dt`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateSnapshot {
    pub t: f64,
    pub dt: f64,
    pub u_prev: Vec<f64>,
    pub u_curr: Vec<f64>,
}

impl StateSnapshot {
    pub fn zeros(n_r: usize, dt: f64) -> Self {
        Self {
            t: 0.0,
            dt,
            u_prev: vec![0.0; n_r],
            u_curr: vec![0.0; n_r],
        }
    }

    pub fn view<'a>(&'a self, grid: &'a RadialGrid) -> StateView<'a> {
        StateView {
            t: self.t,
            dt: self.dt,
            step: 0,
            grid,
            u_prev: &self.u_prev,
            u_curr: &self.u_curr,
        }
    }
}

/// Borrowed state handed to observers.
#[derive(Debug, Clone, Copy)]
pub struct StateView<'a> {
    pub t: f64,
    pub dt: f64,
    pub step: usize,
    pub grid: &'a RadialGrid,
    pub u_prev: &'a [f64],
    pub u_curr: &'a [f64],
}

impl StateView<'_> {
    pub fn to_snapshot(&self) -> StateSnapshot {
        StateSnapshot {
            t: self.t,
            dt: self.dt,
            u_prev: self.u_prev.to_vec(),
            u_curr: self.u_curr.to_vec(),
        }
    }
}

/// Largest `r_j` with `|u_j| > tol`, or 0.
pub fn support_radius(state: &StateSnapshot, dr: f64, tol: f64) -> f64 {
    support_radius_of(&state.u_curr, dr, tol)
}

pub fn support_radius_of(u: &[f64], dr: f64, tol: f64) -> f64 {
    u.iter()
        .rposition(|v| v.abs() > tol)
        .map(|j| j as f64 * dr)
        .unwrap_or(0.0)
}

/// External source term `f(t, r)` added to the right-hand side.
pub type Forcing = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Switches for verification runs.
#[derive(Clone)]
pub struct SolverOptions {
    pub nonlinear: bool,
    pub damping: bool,
    pub forcing: Option<Forcing>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            nonlinear: true,
            damping: true,
            forcing: None,
        }
    }
}

impl SolverOptions {
    pub fn linear() -> Self {
        Self {
            nonlinear: false,
            ..Self::default()
        }
    }
}

impl std::fmt::Debug for SolverOptions {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SolverOptions")
            .field("nonlinear", &self.nonlinear)
            .field("damping", &self.damping)
            .field("forcing", &self.forcing.is_some())
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Controls {
    pub t_max: f64,
    pub blowup_threshold: f64,
    pub record_every: usize,
    pub cfl: f64,
}

impl Controls {
    pub fn new(t_max: f64) -> Self {
        Self {
            t_max,
            blowup_threshold: DEFAULT_BLOWUP_THRESHOLD,
            record_every: 64,
            cfl: DEFAULT_CFL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(invalid("t_max", "must be positive and finite"));
        }
        if !(self.blowup_threshold > 0.0) {
            return Err(invalid("blowup_threshold", "must be positive"));
        }
        if self.record_every == 0 {
            return Err(invalid("record_every", "must be at least 1"));
        }
        if !(self.cfl > 0.0) {
            return Err(invalid("cfl", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    Decayed,
    Blowup,
    HorizonReached,
}

impl Status {
    pub fn name(&self) -> &'static str {
        match self {
            Status::Decayed => "decayed",
            Status::Blowup => "blowup",
            Status::HorizonReached => "horizon_reached",
        }
    }
}

/// Extrapolated blow-up time with the threshold-crossing time as the other end of the
/// bracket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LifespanEstimate {
    pub fitted: Option<f64>,
    pub crossing: f64,
    pub lo: f64,
    pub hi: f64,
}

impl LifespanEstimate {
    pub fn from_fit(fitted: Option<f64>, crossing: f64) -> Self {
        let (lo, hi) = match fitted {
            Some(t) => (t.min(crossing), t.max(crossing)),
            None => (crossing, crossing),
        };
        Self {
            fitted,
            crossing,
            lo,
            hi,
        }
    }

    /// Point value: the fit when available, else the crossing time.
    pub fn value(&self) -> f64 {
        self.fitted.unwrap_or(self.crossing)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesRecord {
    pub t: f64,
    pub sup_u: f64,
    pub l2_u: f64,
    pub energy: f64,
    pub support_radius: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimOutcome {
    pub status: Status,
    pub lifespan: Option<LifespanEstimate>,
    pub time_series: Vec<SeriesRecord>,
    pub t_end: f64,
    pub steps: usize,
    #[serde(skip)]
    pub final_state: StateSnapshot,
}

/// Least-squares fit of `sup^{-(p-1)/2} = k (T - t)` over the samples; returns `T`.
pub fn fit_blowup_time(samples: &[(f64, f64)], p: f64) -> Option<f64> {
    if samples.len() < 3 {
        return None;
    }
    let e = -(p - 1.0) / 2.0;
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(_, s)| s.is_finite() && *s > 0.0)
        .map(|&(t, s)| (t, s.powf(e)))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return None;
    }
    let t = mt - my / slope;
    t.is_finite().then_some(t)
}

#[derive(Debug, Clone, Copy)]
enum PowKind {
    Two,
    Three,
    ThreeHalves,
    General(f64),
}

impl PowKind {
    fn of(p: f64) -> Self {
        if p == 2.0 {
            PowKind::Two
        } else if p == 3.0 {
            PowKind::Three
        } else if p == 1.5 {
            PowKind::ThreeHalves
        } else {
            PowKind::General(p)
        }
    }

    #[inline(always)]
    fn apply(self, u: f64) -> f64 {
        let a = u.abs();
        match self {
            PowKind::Two => a * a,
            PowKind::Three => a * a * a,
            PowKind::ThreeHalves => a * a.sqrt(),
            PowKind::General(p) => {
                if a == 0.0 {
                    0.0
                } else {
                    a.powf(p)
                }
            }
        }
    }
}

/// The time stepper. Owns its state exclusively.
pub struct Solver {
    grid: RadialGrid,
    spec: DampingSpec,
    prob: ProblemSpec,
    opts: SolverOptions,
    dt: f64,
    k_plus: Vec<f64>,
    k_minus: Vec<f64>,
    spatial: Vec<f64>,
    volumes: Vec<f64>,
    faces: Vec<f64>,
    pow: PowKind,
    u_prev: Vec<f64>,
    u_curr: Vec<f64>,
    u_next: Vec<f64>,
    t: f64,
    step: usize,
    /// Index of the last node that may be nonzero.
    hi: usize,
}

impl Solver {
    pub fn new(
        grid: RadialGrid,
        spec: DampingSpec,
        prob: ProblemSpec,
        dt: f64,
        opts: SolverOptions,
    ) -> Result<Self> {
        check_cfl(dt, grid.dr)?;
        if grid.dim != prob.dim {
            return Err(invalid("dim", "grid and problem dimensions differ"));
        }
        let n = grid.n_r;
        let (k_plus, k_minus) = stencil(&grid);
        let spatial = (0..n).map(|j| spec.spatial(grid.r(j))).collect();
        let mut solver = Self {
            volumes: grid.cell_volumes(),
            faces: grid.face_weights(),
            grid,
            spec,
            prob,
            pow: PowKind::of(prob.p),
            opts,
            dt,
            k_plus,
            k_minus,
            spatial,
            u_prev: vec![0.0; n],
            u_curr: vec![0.0; n],
            u_next: vec![0.0; n],
            t: 0.0,
            step: 0,
            hi: 0,
        };
        solver.initialize();
        Ok(solver)
    }

    /// Resume from a snapshot.
    pub fn from_snapshot(
        grid: RadialGrid,
        spec: DampingSpec,
        prob: ProblemSpec,
        state: &StateSnapshot,
        opts: SolverOptions,
    ) -> Result<Self> {
        if state.u_curr.len() != grid.n_r || state.u_prev.len() != grid.n_r {
            return Err(invalid("state", "array length differs from the grid"));
        }
        let mut solver = Self::new(grid, spec, prob, state.dt, opts)?;
        solver.u_prev.copy_from_slice(&state.u_prev);
        solver.u_curr.copy_from_slice(&state.u_curr);
        solver.t = state.t;
        solver.hi = solver.grid.n_r - 2;
        Ok(solver)
    }

    /// `u^0 = eps u0`, and `u^{-1}` from the backward Taylor expansion
    /// `u0 - dt u1 + dt^2/2 (L u0 + |u0|^p - c(0) u1 + f(0))`.
    fn initialize(&mut self) {
        let n = self.grid.n_r;
        let eps = self.prob.epsilon;
        let dt = self.dt;
        let u0: Vec<f64> = (0..n).map(|j| eps * self.prob.u0.value(self.grid.r(j))).collect();
        let u1: Vec<f64> = (0..n).map(|j| eps * self.prob.u1.value(self.grid.r(j))).collect();
        let b0 = if self.opts.damping { self.spec.temporal(0.0) } else { 0.0 };
        for j in 0..n - 1 {
            let lap = self.laplacian_at(&u0, j);
            let nl = if self.opts.nonlinear { self.pow.apply(u0[j]) } else { 0.0 };
            let f = self.forcing(0.0, j);
            let acc = lap + nl - b0 * self.spatial[j] * u1[j] + f;
            self.u_prev[j] = u0[j] - dt * u1[j] + 0.5 * dt * dt * acc;
        }
        self.u_curr.copy_from_slice(&u0);
        self.u_curr[n - 1] = 0.0;
        self.u_prev[n - 1] = 0.0;
        self.hi = if self.opts.forcing.is_some() {
            n - 2
        } else {
            let last = self
                .u_curr
                .iter()
                .zip(&self.u_prev)
                .rposition(|(a, b)| *a != 0.0 || *b != 0.0)
                .unwrap_or(0);
            (last + 1).min(n - 2)
        };
    }

    #[inline(always)]
    fn laplacian_at(&self, u: &[f64], j: usize) -> f64 {
        let c = u[j];
        let right = self.k_plus[j] * (u[j + 1] - c);
        if j == 0 {
            right
        } else {
            right - self.k_minus[j] * (c - u[j - 1])
        }
    }

    #[inline(always)]
    fn forcing(&self, t: f64, j: usize) -> f64 {
        match &self.opts.forcing {
            Some(f) => f(t, self.grid.r(j)),
            None => 0.0,
        }
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn step_count(&self) -> usize {
        self.step
    }

    pub fn view(&self) -> StateView<'_> {
        StateView {
            t: self.t,
            dt: self.dt,
            step: self.step,
            grid: &self.grid,
            u_prev: &self.u_prev,
            u_curr: &self.u_curr,
        }
    }

    pub fn snapshot(&self) -> StateSnapshot {
        self.view().to_snapshot()
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    /// Advance one step; returns `sup |u^{n+1}|`.
    pub fn advance(&mut self) -> Result<f64> {
        let dt = self.dt;
        let dt2 = dt * dt;
        let b = if self.opts.damping { self.spec.temporal(self.t) } else { 0.0 };
        let half = 0.5 * dt * b;
        let last = (self.hi + 1).min(self.grid.n_r - 2);
        let nonlinear = self.opts.nonlinear;
        let pow = self.pow;
        let mut sup = 0.0f64;
        for j in 0..=last {
            let u = self.u_curr[j];
            let mut acc = self.laplacian_at(&self.u_curr, j);
            if nonlinear {
                acc += pow.apply(u);
            }
            if self.opts.forcing.is_some() {
                acc += self.forcing(self.t, j);
            }
            let c = half * self.spatial[j];
            let mut next = (2.0 * u - self.u_prev[j] * (1.0 - c) + dt2 * acc) / (1.0 + c);
            // Flush subnormals; they only arise in the far precursor and are slow.
            if next.abs() < f64::MIN_POSITIVE {
                next = 0.0;
            }
            self.u_next[j] = next;
            let a = next.abs();
            if !(a <= sup) {
                sup = if a.is_nan() { f64::NAN } else { a };
                if sup.is_nan() {
                    break;
                }
            }
        }
        if !sup.is_finite() {
            return Err(Error::NonFinite { t: self.t + dt });
        }
        self.hi = last;
        // rotate: prev <- curr <- next
        std::mem::swap(&mut self.u_prev, &mut self.u_curr);
        std::mem::swap(&mut self.u_curr, &mut self.u_next);
        self.step += 1;
        self.t = self.step as f64 * dt;
        Ok(sup)
    }

    pub fn sup(&self) -> f64 {
        self.u_curr[..=self.hi.min(self.grid.n_r - 1)]
            .iter()
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn l2(&self) -> f64 {
        self.u_curr
            .iter()
            .zip(&self.volumes)
            .map(|(u, w)| w * u * u)
            .sum::<f64>()
            .sqrt()
    }

    /// Staggered energy `E^{n-1/2} = 1/2 sum w ((u^n - u^{n-1})/dt)^2 + 1/2 sum_f D u^n D u^{n-1}`.
    pub fn staggered_energy(&self) -> f64 {
        staggered_energy(&self.u_prev, &self.u_curr, self.dt, &self.volumes, &self.faces)
    }

    /// Run until the horizon or blow-up, calling `observer` at every recorded time.
    pub fn run<F>(&mut self, controls: &Controls, mut observer: F) -> Result<SimOutcome>
    where
        F: FnMut(&StateView<'_>),
    {
        controls.validate()?;
        self.grid.check_covers(self.prob.r0, controls.t_max)?;
        let dr = self.grid.dr;
        let tol = SUPPORT_REL_TOL * self.sup();
        let mut series = Vec::new();
        let record = |s: &Solver| SeriesRecord {
            t: s.t,
            sup_u: s.sup(),
            l2_u: s.l2(),
            energy: s.staggered_energy(),
            support_radius: support_radius_of(&s.u_curr, dr, tol),
        };
        series.push(record(self));
        observer(&self.view());

        let n_steps = (controls.t_max / self.dt - 1e-9).ceil() as usize;
        let mut recent: VecDeque<(f64, f64)> = VecDeque::with_capacity(FIT_SAMPLES);
        let mut status = Status::HorizonReached;
        let mut lifespan = None;
        while self.step < n_steps {
            match self.advance() {
                Ok(sup) => {
                    if recent.len() == FIT_SAMPLES {
                        recent.pop_front();
                    }
                    recent.push_back((self.t, sup));
                    if sup >= controls.blowup_threshold {
                        let samples: Vec<_> = recent.iter().cloned().collect();
                        let fitted = fit_blowup_time(&samples, self.prob.p);
                        lifespan = Some(LifespanEstimate::from_fit(fitted, self.t));
                        status = Status::Blowup;
                        break;
                    }
                }
                Err(Error::NonFinite { .. }) => {
                    let samples: Vec<_> = recent.iter().cloned().collect();
                    let fitted = fit_blowup_time(&samples, self.prob.p);
                    lifespan = Some(LifespanEstimate::from_fit(fitted, self.t));
                    status = Status::Blowup;
                    log::debug!("non-finite value after t = {}; classified as blow-up", self.t);
                    break;
                }
                Err(e) => return Err(e),
            }
            if self.step % controls.record_every == 0 {
                series.push(record(self));
                observer(&self.view());
            }
        }
        if series.last().map(|r| r.t) != Some(self.t) {
            series.push(record(self));
            observer(&self.view());
        }
        if status == Status::HorizonReached && is_decayed(&series) {
            status = Status::Decayed;
        }
        Ok(SimOutcome {
            status,
            lifespan,
            t_end: self.t,
            steps: self.step,
            time_series: series,
            final_state: self.snapshot(),
        })
    }
}

fn check_cfl(dt: f64, dr: f64) -> Result<()> {
    if !(dt > 0.0) || dt > MAX_CFL * dr * (1.0 + 1e-12) {
        return Err(Error::CflViolation {
            dt,
            dr,
            cfl: dt / dr,
            bound: MAX_CFL * dr,
        });
    }
    Ok(())
}

/// Flux-form coefficients: `L u_j = k+_j (u_{j+1} - u_j) - k-_j (u_j - u_{j-1})`.
fn stencil(grid: &RadialGrid) -> (Vec<f64>, Vec<f64>) {
    let n = grid.n_r;
    let dim = grid.dim as i32;
    let h = grid.dr;
    let mut kp = vec![0.0; n];
    let mut km = vec![0.0; n];
    for j in 0..n {
        let r = grid.r(j);
        let lo = if j == 0 { 0.0 } else { r - 0.5 * h };
        let hi = r + 0.5 * h;
        let vol = (hi.powi(dim) - lo.powi(dim)) / dim as f64;
        kp[j] = hi.powi(dim - 1) / (h * vol);
        km[j] = if j == 0 { 0.0 } else { lo.powi(dim - 1) / (h * vol) };
    }
    (kp, km)
}

fn staggered_energy(prev: &[f64], curr: &[f64], dt: f64, volumes: &[f64], faces: &[f64]) -> f64 {
    let mut kinetic = 0.0;
    for j in 0..curr.len() {
        let v = (curr[j] - prev[j]) / dt;
        kinetic += volumes[j] * v * v;
    }
    let mut potential = 0.0;
    for j in 0..faces.len() {
        potential += faces[j] * (curr[j + 1] - curr[j]) * (prev[j + 1] - prev[j]);
    }
    0.5 * (kinetic + potential)
}

fn is_decayed(series: &[SeriesRecord]) -> bool {
    let first = series.first().map(|r| r.sup_u).unwrap_or(0.0);
    let last = series.last().map(|r| r.sup_u).unwrap_or(0.0);
    if first == 0.0 && last == 0.0 {
        return true;
    }
    if !(last < first) {
        return false;
    }
    let start = ((series.len() as f64) * 0.8).floor() as usize;
    series[start.min(series.len() - 1)..]
        .windows(2)
        .all(|w| w[1].sup_u <= w[0].sup_u)
}

/// One step from a snapshot with full-grid update.
pub fn step(
    state: &StateSnapshot,
    spec: &DampingSpec,
    prob: &ProblemSpec,
    grid: &RadialGrid,
) -> Result<StateSnapshot> {
    let mut solver = Solver::from_snapshot(grid.clone(), *spec, *prob, state, SolverOptions::default())?;
    solver.advance()?;
    Ok(solver.snapshot())
}

/// Integrate to `controls.t_max` with default options.
pub fn run(
    spec: &DampingSpec,
    prob: &ProblemSpec,
    grid: &RadialGrid,
    controls: &Controls,
) -> Result<SimOutcome> {
    let dt = controls.cfl * grid.dr;
    let mut solver = Solver::new(grid.clone(), *spec, *prob, dt, SolverOptions::default())?;
    solver.run(controls, |_| {})
}

/// Discrete energy-law residuals of a linear run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyIdentityReport {
    /// `max_n |E^{n+1/2} - E^{n-1/2} + dt sum w c^n (v^n)^2| / E^{-1/2}` with centered `v^n`.
    pub residual: f64,
    /// Same law with the collocated energy and midpoint velocities; second order in `dr`, `dt`.
    pub midpoint_residual: f64,
    /// `max_n (E^{n+1/2} / E^{n-1/2} - 1)`.
    pub max_relative_growth: f64,
    pub initial_energy: f64,
    pub final_energy: f64,
}

/// Run `steps` linear steps and measure the discrete energy law.
pub fn energy_identity_residual(
    spec: &DampingSpec,
    prob: &ProblemSpec,
    grid: &RadialGrid,
    dt: f64,
    steps: usize,
    opts: SolverOptions,
) -> Result<EnergyIdentityReport> {
    if opts.nonlinear || opts.forcing.is_some() {
        return Err(Error::RequiresLinearMode);
    }
    let damping = opts.damping;
    let mut solver = Solver::new(grid.clone(), *spec, *prob, dt, opts)?;
    solver.hi = grid.n_r - 2;
    let vols = solver.volumes.clone();
    let faces = solver.faces.clone();
    let spatial = solver.spatial.clone();
    let e0 = solver.staggered_energy();
    let collocated = |prev: &[f64], curr: &[f64], next: &[f64]| {
        let mut k = 0.0;
        for j in 0..curr.len() {
            let v = (next[j] - prev[j]) / (2.0 * dt);
            k += vols[j] * v * v;
        }
        let mut g = 0.0;
        for j in 0..faces.len() {
            let d = curr[j + 1] - curr[j];
            g += faces[j] * d * d;
        }
        0.5 * (k + g)
    };
    let mut report = EnergyIdentityReport {
        residual: 0.0,
        midpoint_residual: 0.0,
        max_relative_growth: f64::NEG_INFINITY,
        initial_energy: e0,
        final_energy: e0,
    };
    if e0 == 0.0 {
        report.max_relative_growth = 0.0;
        return Ok(report);
    }
    let mut e_prev = e0;
    let mut prev_collocated: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    for _ in 0..steps {
        let t_n = solver.t;
        let older = solver.u_prev.clone();
        let current = solver.u_curr.clone();
        solver.advance()?;
        let b = if damping { spec.temporal(t_n) } else { 0.0 };
        let mut diss = 0.0;
        for j in 0..current.len() {
            let v = (solver.u_curr[j] - older[j]) / (2.0 * dt);
            diss += vols[j] * b * spatial[j] * v * v;
        }
        let e_next = solver.staggered_energy();
        let res = (e_next - e_prev + dt * diss).abs() / e0;
        report.residual = report.residual.max(res);
        report.max_relative_growth = report.max_relative_growth.max(e_next / e_prev - 1.0);

        // Collocated energy E^n with the dissipation sampled at t_{n+1/2}.
        let en = collocated(&older, &current, &solver.u_curr);
        if let Some((e_before, before, _)) = prev_collocated.take() {
            let t_half = t_n - 0.5 * dt;
            let bh = if damping { spec.temporal(t_half) } else { 0.0 };
            let mut d = 0.0;
            for j in 0..current.len() {
                let v = (current[j] - before[j]) / dt;
                d += vols[j] * bh * spatial[j] * v * v;
            }
            let r = (en - e_before + dt * d).abs() / e0;
            report.midpoint_residual = report.midpoint_residual.max(r);
        }
        prev_collocated = Some((en, current, older));
        e_prev = e_next;
    }
    report.final_energy = e_prev;
    Ok(report)
}
