//! Exponential-weight generator `psi(t,x)` for spatially increasing damping.
//!
//! `psi(t,r) = mu / (1+t) * B(r)` with bracket
//! `B(r) = <r>^{2-alpha} + A0 - v(r)`, where `v` is the decaying radial solution of
//! `Laplace v = f` for the source `f(r) = alpha (2-alpha) <r>^{-2-alpha} eta(r)`.
//! With that correction the Laplacian of `psi` loses the `alpha (2-alpha) <r>^{-2-alpha}`
//! term inside the cutoff plateau, which is what makes the weighted energy method work
//! when `alpha < 0`.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::problem::{bracket, DampingSpec, Profile};
use crate::quadrature::GaussRule;
use crate::smoothstep::{self, Jet};

/// Cutoff equal to 1 on `r <= r_delta` and 0 on `r >= 2 r_delta`.
pub fn cutoff(r: f64, r_delta: f64) -> f64 {
    cutoff_jet(r, r_delta).value
}

pub fn cutoff_jet(r: f64, r_delta: f64) -> Jet {
    smoothstep::window(r, r_delta, 2.0 * r_delta)
}

/// Source term of the radial Poisson problem behind the correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Source {
    /// `alpha (2 - alpha) <r>^{-2-alpha} eta_{R}(r)`.
    Weight { alpha: f64, r_delta: f64 },
    /// Any compactly supported radial profile.
    Profile(Profile),
}

impl Source {
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            Source::Weight { alpha, r_delta } => {
                let eta = cutoff(r, r_delta);
                if eta == 0.0 {
                    0.0
                } else {
                    alpha * (2.0 - alpha) * bracket(r).powf(-2.0 - alpha) * eta
                }
            }
            Source::Profile(prof) => prof.value(r),
        }
    }

    /// Radius beyond which the source vanishes identically.
    pub fn support(&self) -> f64 {
        match *self {
            Source::Weight { r_delta, .. } => 2.0 * r_delta,
            Source::Profile(prof) => {
                if prof.is_zero() {
                    0.0
                } else {
                    prof.radius
                }
            }
        }
    }

}

const TABLE_CELLS: usize = 2048;
const GAUSS_ORDER: usize = 8;

/// Radial solution `v` of `Laplace v = f` normalized at infinity.
///
/// Normalization: `v(r) -> 0` for `N >= 3`; `v(r) - G log r -> 0` for `N = 2`;
/// `v(r) - G r -> 0` for `N = 1`, where `G = int_0^inf f s^{N-1} ds`.
///
/// The table stores cumulative integrals `G(r) = int_0^r f s^{N-1} ds` and
/// `H(r) = int_r^inf f s k(s) ds` (`k = log` for `N = 2`, else 1) at uniformly spaced
/// nodes; off-node values are completed by Gauss-Legendre quadrature over the partial
/// cell, so evaluation carries quadrature accuracy rather than interpolation error.
#[derive(Debug, Clone)]
pub struct NewtonCorrection {
    dim: usize,
    source: Source,
    support: f64,
    r_max: f64,
    step: f64,
    cumulative: Vec<f64>,
    tail: Vec<f64>,
    gauss: GaussRule,
}

impl NewtonCorrection {
    pub fn from_source(dim: usize, source: Source, r_max: f64) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dim", "must be at least 1"));
        }
        let support = source.support();
        if support > 0.0 && r_max <= support {
            return Err(invalid(
                "r_max",
                format!("table range {r_max} must exceed the source support {support}"),
            ));
        }
        let gauss = GaussRule::new(GAUSS_ORDER);
        if support == 0.0 {
            return Ok(Self {
                dim,
                source,
                support,
                r_max,
                step: 1.0,
                cumulative: vec![0.0],
                tail: vec![0.0],
                gauss,
            });
        }
        // TABLE_CELLS is a power of two, so the kinks at support/2 fall on cell boundaries.
        let step = support / TABLE_CELLS as f64;

        let growth = |s: f64| source.eval(s) * crate::quadrature::radial_power(s, dim);
        let tail_kernel = |s: f64| {
            let base = source.eval(s) * s;
            if dim == 2 {
                if s == 0.0 {
                    0.0
                } else {
                    base * s.ln()
                }
            } else {
                base
            }
        };
        let mut cumulative = vec![0.0; TABLE_CELLS + 1];
        for k in 0..TABLE_CELLS {
            let a = k as f64 * step;
            cumulative[k + 1] = cumulative[k] + gauss.integrate(a, a + step, growth);
        }
        let mut tail = vec![0.0; TABLE_CELLS + 1];
        for k in (0..TABLE_CELLS).rev() {
            let a = k as f64 * step;
            tail[k] = tail[k + 1] + gauss.integrate(a, a + step, tail_kernel);
        }
        Ok(Self {
            dim,
            source,
            support,
            r_max,
            step,
            cumulative,
            tail,
            gauss,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn source(&self) -> &Source {
        &self.source
    }

    /// Total `G = int_0^inf f s^{N-1} ds`.
    pub fn total(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    fn integrals(&self, r: f64) -> (f64, f64) {
        if self.support == 0.0 {
            return (0.0, 0.0);
        }
        if r >= self.support {
            return (self.total(), 0.0);
        }
        let k = ((r / self.step).floor() as usize).min(TABLE_CELLS - 1);
        let a = k as f64 * self.step;
        let dim = self.dim;
        let src = &self.source;
        let partial_g = self
            .gauss
            .integrate(a, r, |s| src.eval(s) * crate::quadrature::radial_power(s, dim));
        let partial_h = self.gauss.integrate(a, r, |s| {
            let base = src.eval(s) * s;
            if dim == 2 {
                base * s.ln()
            } else {
                base
            }
        });
        (self.cumulative[k] + partial_g, self.tail[k] - partial_h)
    }

    fn check_range(&self, r: f64) -> Result<()> {
        if !(r >= 0.0 && r <= self.r_max) {
            return Err(Error::OutOfRange { r, r_max: self.r_max });
        }
        Ok(())
    }

    /// `v(r)`.
    pub fn value(&self, r: f64) -> Result<f64> {
        self.check_range(r)?;
        Ok(self.value_unchecked(r))
    }

    pub(crate) fn value_unchecked(&self, r: f64) -> f64 {
        let (g, h) = self.integrals(r);
        match self.dim {
            1 => r * g + h,
            2 => {
                if r == 0.0 {
                    h
                } else {
                    r.ln() * g + h
                }
            }
            n => {
                let lead = if r == 0.0 { 0.0 } else { r.powi(2 - n as i32) * g };
                -(lead + h) / (n as f64 - 2.0)
            }
        }
    }

    /// `v'(r) = r^{1-N} G(r)`.
    pub fn derivative(&self, r: f64) -> Result<f64> {
        self.check_range(r)?;
        Ok(self.derivative_unchecked(r))
    }

    pub(crate) fn derivative_unchecked(&self, r: f64) -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        let (g, _) = self.integrals(r);
        g * r.powi(1 - self.dim as i32)
    }

    /// Samples `(r, v, v')` at `n` uniformly spaced radii on `[0, r_max]`.
    pub fn table(&self, n: usize) -> Vec<(f64, f64, f64)> {
        let h = self.r_max / (n - 1) as f64;
        (0..n)
            .map(|j| {
                let r = j as f64 * h;
                (r, self.value_unchecked(r), self.derivative_unchecked(r))
            })
            .collect()
    }
}

/// Correction for the weight source with cutoff radius `r_delta`, tabulated to `r_max`.
pub fn newton_correction(dim: usize, alpha: f64, r_delta: f64, r_max: f64) -> Result<NewtonCorrection> {
    if alpha >= 0.0 {
        return Err(invalid("alpha", format!("correction requires alpha < 0, got {alpha}")));
    }
    if !(r_delta > 0.0) {
        return Err(invalid("r_delta", "must be positive"));
    }
    if r_max <= 2.0 * r_delta {
        return Err(invalid(
            "r_max",
            format!("{r_max} does not cover the cutoff support 2 R_delta = {}", 2.0 * r_delta),
        ));
    }
    NewtonCorrection::from_source(dim, Source::Weight { alpha, r_delta }, r_max)
}

/// Positive constants derived from `delta0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaLadder {
    pub delta: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub delta4: f64,
    pub delta5: f64,
    pub delta6: f64,
    pub nu: f64,
    pub t0: f64,
}

impl DeltaLadder {
    pub fn new(dim: usize, spec: &DampingSpec, delta0: f64) -> Result<Self> {
        let alpha = spec.alpha;
        let rate = (dim as f64 - alpha) / (2.0 - alpha);
        if !(delta0 > 0.0 && delta0 < rate) {
            return Err(invalid(
                "delta0",
                format!("must lie in (0, (N-alpha)/(2-alpha) = {rate}), got {delta0}"),
            ));
        }
        let delta = (2.0 - alpha) / (2.0 * (dim as f64 - alpha)) * delta0;
        let delta1 = 2.0 / 3.0 * delta;
        let delta2 = rate / 2.0 * delta;
        // Largest admissible value of 1 - delta3 >= (2 + delta1)/(2 + delta).
        let delta3 = 1.0 - (2.0 + delta1) / (2.0 + delta);
        let delta4 = delta1 - delta / 2.0 - delta * delta1 / 4.0;
        let delta5 = delta4 / (4.0 + delta4);
        let delta6 = delta2 / 2.0;
        let energy_rate = rate + 1.0 - delta0;
        let nu = delta5 / (2.0 * energy_rate);

        // t0 from the four absorption conditions, with a(x) >= a0 for alpha < 0.
        let a0 = spec.a0;
        let c6 = (rate - delta0).powi(2) / (4.0 * delta6);
        let k = nu * a0 / 16.0;
        let absorb = (1.0 + (1.0 + 4.0 * k * c6).sqrt()) / (2.0 * k);
        let t0 = 1f64
            .max(8.0 / a0 * energy_rate)
            .max(absorb)
            .max(16.0 / (delta * nu * a0))
            .max(2.0 / (nu * a0));
        Ok(Self {
            delta,
            delta1,
            delta2,
            delta3,
            delta4,
            delta5,
            delta6,
            nu,
            t0,
        })
    }
}

/// Calibrated constants of the weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightParams {
    pub delta0: f64,
    pub mu: f64,
    pub a_zero: f64,
    pub r_delta: f64,
    pub ladder: DeltaLadder,
}

impl WeightParams {
    pub fn delta(&self) -> f64 {
        self.ladder.delta
    }
}

/// `mu = a0 / ((2 - alpha)^2 (2 + delta))`.
pub fn weight_mu(a0: f64, alpha: f64, delta: f64) -> f64 {
    a0 / ((2.0 - alpha).powi(2) * (2.0 + delta))
}

/// The weight `psi` with its correction table. Immutable after construction.
#[derive(Debug, Clone)]
pub struct WeightFunction {
    params: WeightParams,
    spec: DampingSpec,
    dim: usize,
    correction: NewtonCorrection,
}

impl WeightFunction {
    pub fn new(params: WeightParams, spec: DampingSpec, dim: usize, r_max: f64) -> Result<Self> {
        let correction = newton_correction(dim, spec.alpha, params.r_delta, r_max)?;
        Ok(Self {
            params,
            spec,
            dim,
            correction,
        })
    }

    /// Copy with the correction table extended (or shrunk) to `r_max`.
    pub fn with_range(&self, r_max: f64) -> Result<Self> {
        Self::new(self.params, self.spec, self.dim, r_max)
    }

    pub fn params(&self) -> &WeightParams {
        &self.params
    }

    pub fn spec(&self) -> &DampingSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn r_max(&self) -> f64 {
        self.correction.r_max()
    }

    pub fn correction(&self) -> &NewtonCorrection {
        &self.correction
    }

    fn check(&self, r: f64) -> Result<()> {
        if !(r >= 0.0 && r <= self.r_max()) {
            return Err(Error::OutOfRange {
                r,
                r_max: self.r_max(),
            });
        }
        Ok(())
    }

    /// Bracket `B(r) = <r>^{2-alpha} + A0 - v(r)`.
    pub fn bracket(&self, r: f64) -> Result<f64> {
        self.check(r)?;
        Ok(self.bracket_unchecked(r))
    }

    pub(crate) fn bracket_unchecked(&self, r: f64) -> f64 {
        let alpha = self.spec.alpha;
        bracket(r).powf(2.0 - alpha) + self.params.a_zero - self.correction.value_unchecked(r)
    }

    pub(crate) fn bracket_dr_unchecked(&self, r: f64) -> f64 {
        let alpha = self.spec.alpha;
        (2.0 - alpha) * r * bracket(r).powf(-alpha) - self.correction.derivative_unchecked(r)
    }

    pub fn psi(&self, t: f64, r: f64) -> Result<f64> {
        self.check(r)?;
        Ok(self.params.mu * self.bracket_unchecked(r) / (1.0 + t))
    }

    pub fn psi_t(&self, t: f64, r: f64) -> Result<f64> {
        Ok(-self.psi(t, r)? / (1.0 + t))
    }

    /// Radial derivative; `|grad psi| = |psi_r|`.
    pub fn psi_r(&self, t: f64, r: f64) -> Result<f64> {
        self.check(r)?;
        Ok(self.params.mu * self.bracket_dr_unchecked(r) / (1.0 + t))
    }

    /// Closed-form Laplacian
    /// `mu/(1+t) [ (N-alpha)(2-alpha)<r>^{-alpha} + alpha(2-alpha)<r>^{-2-alpha}(1 - eta(r)) ]`.
    pub fn laplacian(&self, t: f64, r: f64) -> Result<f64> {
        self.check(r)?;
        Ok(self.laplacian_unchecked(t, r))
    }

    fn laplacian_unchecked(&self, t: f64, r: f64) -> f64 {
        let alpha = self.spec.alpha;
        let n = self.dim as f64;
        let b = bracket(r);
        let outer = 1.0 - cutoff(r, self.params.r_delta);
        self.params.mu / (1.0 + t)
            * ((n - alpha) * (2.0 - alpha) * b.powf(-alpha)
                + alpha * (2.0 - alpha) * b.powf(-2.0 - alpha) * outer)
    }

    /// `psi^{(beta)}(t,r) = mu B(r) / B_time(t)` with `B_time(t) = (1+t)^{1+beta}/(1+beta)`.
    pub fn psi_beta(&self, beta: f64, t: f64, r: f64) -> Result<f64> {
        if !(beta > -1.0 && beta <= 1.0) {
            return Err(invalid("beta", format!("must lie in (-1, 1], got {beta}")));
        }
        self.check(r)?;
        Ok(self.params.mu * self.bracket_unchecked(r) * (1.0 + beta) / (1.0 + t).powf(1.0 + beta))
    }

    pub fn psi_beta_t(&self, beta: f64, t: f64, r: f64) -> Result<f64> {
        Ok(-(1.0 + beta) * self.psi_beta(beta, t, r)? / (1.0 + t))
    }

    /// `-psi_t a - (2 + delta1) |grad psi|^2`.
    pub fn margin_energy(&self, t: f64, r: f64) -> Result<f64> {
        self.check(r)?;
        let mu = self.params.mu;
        let a = self.spec.spatial(r);
        let b = self.bracket_unchecked(r);
        let db = self.bracket_dr_unchecked(r);
        let s = 1.0 + t;
        Ok(mu / (s * s) * (b * a - (2.0 + self.params.ladder.delta1) * mu * db * db))
    }

    /// `Laplace psi - ((N-alpha)/(2(2-alpha)) - delta2) a / (1+t)`.
    pub fn margin_laplacian(&self, t: f64, r: f64) -> Result<f64> {
        self.check(r)?;
        let alpha = self.spec.alpha;
        let rate = (self.dim as f64 - alpha) / (2.0 * (2.0 - alpha));
        Ok(self.laplacian_unchecked(t, r)
            - (rate - self.params.ladder.delta2) * self.spec.spatial(r) / (1.0 + t))
    }

    /// Time-dependent analogues with `c(t,x)` for `psi^{(beta)}`; returns
    /// `(margin_energy, margin_laplacian)`.
    pub fn margins_beta(&self, beta: f64, t: f64, r: f64) -> Result<(f64, f64)> {
        let damping = DampingSpec {
            beta,
            ..self.spec
        };
        let c = damping.coefficient(t, r);
        let psi_t = self.psi_beta_t(beta, t, r)?;
        let scale = (1.0 + beta) / (1.0 + t).powf(1.0 + beta);
        let grad = self.params.mu * self.bracket_dr_unchecked(r) * scale;
        let energy = -c * psi_t - (2.0 + self.params.ladder.delta1) * grad * grad;
        let alpha = self.spec.alpha;
        let lap = self.laplacian_unchecked(0.0, r) * scale;
        let delta = self.params.ladder.delta;
        let rate = (self.dim as f64 - alpha) * (1.0 + beta) / (2.0 * (2.0 - alpha));
        let lap_margin = lap - (rate - rate * delta) * c / (1.0 + t);
        Ok((energy, lap_margin))
    }
}

/// Tensor grid of radii and times on which the weight inequalities are checked.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationGrid {
    pub radii: Vec<f64>,
    pub times: Vec<f64>,
}

pub const GRID_RADIAL_NODES: usize = 512;
pub const GRID_TIME_NODES: usize = 64;
const GEOMETRIC_STRETCH: f64 = 8.0;

impl VerificationGrid {
    /// 512 radii geometrically stretched on `[0, r_max]`, 64 uniform times on `[0, t_max]`.
    pub fn standard(r_max: f64, t_max: f64) -> Self {
        Self::new(r_max, t_max, GRID_RADIAL_NODES, GRID_TIME_NODES)
    }

    pub fn new(r_max: f64, t_max: f64, n_r: usize, n_t: usize) -> Self {
        let denom = GEOMETRIC_STRETCH.exp_m1();
        let radii = (0..n_r)
            .map(|i| r_max * (GEOMETRIC_STRETCH * i as f64 / (n_r - 1) as f64).exp_m1() / denom)
            .collect();
        let times = (0..n_t)
            .map(|i| t_max * i as f64 / (n_t - 1) as f64)
            .collect();
        Self { radii, times }
    }

    pub fn r_max(&self) -> f64 {
        self.radii.iter().cloned().fold(0.0, f64::max)
    }
}

/// One node of a margin table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginSample {
    pub t: f64,
    pub r: f64,
    pub margin_energy: f64,
    pub margin_laplacian: f64,
}

pub fn margin_table(weight: &WeightFunction, grid: &VerificationGrid) -> Result<Vec<MarginSample>> {
    let mut out = Vec::with_capacity(grid.radii.len() * grid.times.len());
    for &t in &grid.times {
        for &r in &grid.radii {
            out.push(MarginSample {
                t,
                r,
                margin_energy: weight.margin_energy(t, r)?,
                margin_laplacian: weight.margin_laplacian(t, r)?,
            });
        }
    }
    Ok(out)
}

pub const MAX_DOUBLINGS: usize = 40;

fn worst<F>(grid: &VerificationGrid, mut f: F) -> Result<(f64, f64, f64)>
where
    F: FnMut(f64, f64) -> Result<f64>,
{
    let mut worst = (f64::INFINITY, 0.0, 0.0);
    for &t in &grid.times {
        for &r in &grid.radii {
            let m = f(t, r)?;
            if !(m >= worst.0) {
                worst = (m, t, r);
            }
        }
    }
    Ok(worst)
}

/// Find `R_delta` and then `A0` by doubling until both weight inequalities hold at every
/// grid node and the bracket is positive.
pub fn calibrate(
    spec: &DampingSpec,
    dim: usize,
    delta0: f64,
    grid: &VerificationGrid,
) -> Result<WeightFunction> {
    if spec.alpha >= 0.0 {
        return Err(invalid("alpha", format!("calibration requires alpha < 0, got {}", spec.alpha)));
    }
    let ladder = DeltaLadder::new(dim, spec, delta0)?;
    let mu = weight_mu(spec.a0, spec.alpha, ladder.delta);
    let r_max = grid.r_max();

    let mut params = WeightParams {
        delta0,
        mu,
        a_zero: 1.0,
        r_delta: 2.0 * spec.alpha.abs().max(1.0),
        ladder,
    };

    // The Laplacian inequality does not involve A0 or the correction table.
    let mut doublings = 0;
    loop {
        let probe = LaplacianProbe { params: &params, spec, dim };
        let (m, t, r) = worst(grid, |t, r| Ok(probe.margin(t, r)))?;
        if m >= 0.0 {
            break;
        }
        if doublings == MAX_DOUBLINGS {
            return Err(Error::CalibrationFailed {
                inequality: "laplacian",
                doublings,
                margin: m,
                t,
                r,
            });
        }
        params.r_delta *= 2.0;
        doublings += 1;
    }

    let table_range = r_max.max(2.0 * params.r_delta * 1.0001 + 1e-9);
    let mut weight = WeightFunction::new(params, *spec, dim, table_range)?;
    let mut doublings = 0;
    loop {
        let (m, t, r) = worst(grid, |t, r| {
            let b = weight.bracket_unchecked(r);
            if b <= 0.0 {
                return Ok(b);
            }
            weight.margin_energy(t, r)
        })?;
        if m >= 0.0 {
            break;
        }
        if doublings == MAX_DOUBLINGS {
            return Err(Error::CalibrationFailed {
                inequality: "energy",
                doublings,
                margin: m,
                t,
                r,
            });
        }
        weight.params.a_zero *= 2.0;
        doublings += 1;
    }
    log::debug!(
        "calibrated weight: R_delta = {}, A0 = {}, mu = {}",
        weight.params.r_delta,
        weight.params.a_zero,
        weight.params.mu
    );
    Ok(weight)
}

struct LaplacianProbe<'a> {
    params: &'a WeightParams,
    spec: &'a DampingSpec,
    dim: usize,
}

impl LaplacianProbe<'_> {
    fn margin(&self, t: f64, r: f64) -> f64 {
        let alpha = self.spec.alpha;
        let n = self.dim as f64;
        let b = bracket(r);
        let outer = 1.0 - cutoff(r, self.params.r_delta);
        let lap = self.params.mu / (1.0 + t)
            * ((n - alpha) * (2.0 - alpha) * b.powf(-alpha)
                + alpha * (2.0 - alpha) * b.powf(-2.0 - alpha) * outer);
        let rate = (n - alpha) / (2.0 * (2.0 - alpha));
        lap - (rate - self.params.ladder.delta2) * self.spec.spatial(r) / (1.0 + t)
    }
}

/// Summary of a calibrated weight and its worst margins on a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightSummary {
    pub r_delta: f64,
    pub a0: f64,
    pub mu: f64,
    pub min_margin_24: f64,
    pub min_margin_25: f64,
}

pub fn summarize(weight: &WeightFunction, table: &[MarginSample]) -> WeightSummary {
    WeightSummary {
        r_delta: weight.params.r_delta,
        a0: weight.params.a_zero,
        mu: weight.params.mu,
        min_margin_24: table.iter().map(|s| s.margin_energy).fold(f64::INFINITY, f64::min),
        min_margin_25: table.iter().map(|s| s.margin_laplacian).fold(f64::INFINITY, f64::min),
    }
}
