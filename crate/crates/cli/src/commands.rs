//! Subcommand implementations. Each returns its artifacts; nothing touches disk here.

use serde::Serialize;
use serde_json::{json, Value};

use critwave_core::blowup::{
    derivative_constants, lifespan_sweep, probe_inequality, record_run, y_domination, RecordOptions, TestFunctionProbe,
};
use critwave_core::energy::{fit_decay_rate, m_exponents, EnergyTracker};
use critwave_core::inequalities::{
    ckn_ratio, gamma_step_ratio, summarize_corpus, Entry, TestFunctionCorpus,
};
use critwave_core::problem::{critical_exponent, is_critical, lifespan_exponent_for, LifespanBound};
use critwave_core::solver::{Solver, SolverOptions, Status};
use critwave_core::weights::{calibrate, margin_table, summarize, VerificationGrid, WeightFunction};

use crate::artifacts::{content_hash, ArtifactSet, Cell};
use crate::config::{core_violation, emit, ConfigError, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Validation(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(critwave_core::Error),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
        }
    }

    pub fn diagnostic(&self) -> Value {
        match self {
            CliError::Validation(e) => json!({
                "kind": e.kind(),
                "key": e.key(),
                "message": e.to_string(),
            }),
            CliError::Numerical(e) => json!({ "kind": "numerical", "message": e.to_string() }),
            CliError::Io(e) => json!({ "kind": "io", "message": e.to_string() }),
        }
    }
}

/// Core errors that reflect bad input are validation failures; the rest are numerical.
pub fn classify(e: critwave_core::Error) -> CliError {
    use critwave_core::Error as E;
    match e {
        E::InvalidParameter { .. } | E::Supercritical { .. } | E::CflViolation { .. } | E::RequiresLinearMode => {
            CliError::Validation(core_violation(e))
        }
        E::NonPositiveInitialMass { value } => CliError::Validation(ConfigError::violation(
            "problem.u0_shape",
            format!("initial mass functional {value:e} is not positive"),
        )),
        other => CliError::Numerical(other),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Simulate,
    Sweep,
    VerifyWeight,
    VerifyIneq,
    Testfn,
}

impl Subcommand {
    pub fn name(&self) -> &'static str {
        match self {
            Subcommand::Simulate => "simulate",
            Subcommand::Sweep => "sweep",
            Subcommand::VerifyWeight => "verify-weight",
            Subcommand::VerifyIneq => "verify-ineq",
            Subcommand::Testfn => "testfn",
        }
    }
}

/// Manifest: subcommand, effective configuration and its hash, artifact list.
pub fn manifest(sub: Subcommand, config: &RunConfig, artifacts: &[String]) -> Value {
    let text = emit(config);
    let parsed: toml::Table = text.parse().expect("emitted config is valid");
    json!({
        "subcommand": sub.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "config": parsed,
        "config_text": text,
        "config_hash": content_hash(text.as_bytes()),
        "artifacts": artifacts,
    })
}

/// Validate, run, and collect artifacts including `manifest.json` and `config.toml`.
pub fn dispatch(sub: Subcommand, config: &RunConfig) -> Result<ArtifactSet, CliError> {
    if config.output_dir.is_none() {
        return Err(ConfigError::violation("output.output_dir", "required for this subcommand").into());
    }
    let mut set = match sub {
        Subcommand::Simulate => simulate(config)?,
        Subcommand::Sweep => sweep(config)?,
        Subcommand::VerifyWeight => verify_weight(config)?,
        Subcommand::VerifyIneq => verify_ineq(config)?,
        Subcommand::Testfn => testfn(config)?,
    };
    finish(sub, config, &mut set);
    Ok(set)
}

fn finish(sub: Subcommand, config: &RunConfig, set: &mut ArtifactSet) {
    set.add("config.toml", emit(config).into_bytes());
    let mut names = set.names();
    names.push("manifest.json".into());
    names.sort();
    set.add_json("manifest.json", &manifest(sub, config, &names));
}

/// Artifacts for a failed numerical run: manifest plus `error.json`.
pub fn failure_artifacts(sub: Subcommand, config: &RunConfig, err: &CliError) -> ArtifactSet {
    let mut set = ArtifactSet::default();
    set.add_json("error.json", &err.diagnostic());
    finish(sub, config, &mut set);
    set
}

fn calibrated(config: &RunConfig, r_max: f64) -> Result<WeightFunction, CliError> {
    let grid = VerificationGrid::standard(r_max, config.t_max);
    calibrate(&config.damping(), config.dim, config.delta0, &grid).map_err(classify)
}

#[derive(Serialize)]
struct Lifespan {
    fitted: Option<f64>,
    crossing: f64,
    lo: f64,
    hi: f64,
    value: f64,
}

fn simulate(config: &RunConfig) -> Result<ArtifactSet, CliError> {
    let spec = config.damping();
    let prob = config.problem();
    let grid = config.grid()?;
    let controls = config.controls();
    let weight = if config.alpha < 0.0 {
        Some(calibrated(config, grid.r_max())?)
    } else {
        log::info!("alpha >= 0: weighted energies are not tracked");
        None
    };
    let mut tracker = match &weight {
        Some(w) => Some(EnergyTracker::new(w, &grid, config.beta, config.p).map_err(classify)?),
        None => None,
    };
    let mut solver =
        Solver::new(grid.clone(), spec, prob, config.cfl * grid.dr, SolverOptions::default()).map_err(classify)?;
    let outcome = solver
        .run(&controls, |v| {
            if let Some(t) = tracker.as_mut() {
                t.observe(v);
            }
        })
        .map_err(classify)?;

    let exps = m_exponents(config.dim, config.alpha, config.beta, config.delta0, config.m_convention);
    let m = tracker.as_ref().map(|t| t.m_series(exps));
    let mut rows = Vec::with_capacity(outcome.time_series.len());
    for (i, rec) in outcome.time_series.iter().enumerate() {
        let (ew, vw, mb) = match (&tracker, &m) {
            (Some(t), Some(m)) => {
                let e = t.records()[i].energies;
                (Some(e.e()), Some(e.v()), Some(m[i].1.exp()))
            }
            _ => (None, None, None),
        };
        rows.push(vec![
            Cell::from(rec.t),
            rec.sup_u.into(),
            rec.l2_u.into(),
            rec.energy.into(),
            ew.zip(vw).map(|(a, b)| a + b).into(),
            rec.support_radius.into(),
            ew.into(),
            vw.into(),
            mb.into(),
        ]);
    }
    let mut set = ArtifactSet::default();
    set.add_csv(
        "timeseries.csv",
        &["t", "sup_u", "l2_u", "energy", "weighted_energy", "support_radius", "E_w", "V_w", "M_beta"],
        &rows,
    );

    let energy_series: Vec<(f64, f64)> = outcome.time_series.iter().map(|r| (r.t, r.energy)).collect();
    let decay_rate = if outcome.status == Status::Decayed {
        fit_decay_rate(&energy_series, 0.5).ok()
    } else {
        None
    };
    let m_ratio = m.as_ref().and_then(|m| {
        let first = m.iter().find(|(t, _)| *t >= 1.0)?;
        Some((m.last()?.1 - first.1).exp())
    });
    let summary = json!({
        "status": outcome.status.name(),
        "lifespan": outcome.lifespan.map(|l| Lifespan {
            fitted: l.fitted,
            crossing: l.crossing,
            lo: l.lo,
            hi: l.hi,
            value: l.value(),
        }),
        "t_end": outcome.t_end,
        "steps": outcome.steps,
        "energy_decay_rate": decay_rate,
        "m_final_over_m_at_1": m_ratio,
        "weight": weight.as_ref().map(|w| json!({
            "R_delta": w.params().r_delta,
            "A0": w.params().a_zero,
            "mu": w.params().mu,
            "delta0": w.params().delta0,
            "t0": w.params().ladder.t0,
        })),
    });
    set.add_json("summary.json", &summary);
    Ok(set)
}

fn sweep(config: &RunConfig) -> Result<ArtifactSet, CliError> {
    config.check_blowup_regime()?;
    let grid = config.grid()?;
    let result = lifespan_sweep(
        &config.damping(),
        &config.problem(),
        &config.eps_list(),
        &grid,
        &config.controls(),
    )
    .map_err(classify)?;
    let mut set = ArtifactSet::default();
    let rows: Vec<Vec<Cell>> = result
        .points
        .iter()
        .map(|p| vec![p.eps.into(), p.t.into(), p.t_lo.into(), p.t_hi.into(), p.status.name().into()])
        .collect();
    set.add_csv("sweep.csv", &["eps", "T", "T_lo", "T_hi", "status"], &rows);
    let points: Vec<Value> = result
        .points
        .iter()
        .map(|p| json!({"eps": p.eps, "T": p.t, "T_lo": p.t_lo, "T_hi": p.t_hi, "status": p.status.name()}))
        .collect();
    let fit = result.fit;
    set.add_json(
        "sweep.json",
        &json!({
            "points": points,
            "critical": result.critical,
            "monotone": result.monotone(),
            "fitted_slope": fit.map(|f| f.fitted_slope),
            "target_slope": fit.map(|f| f.target_slope),
            "rel_err": fit.map(|f| f.rel_err),
            "points_used": fit.map(|f| f.points_used),
        }),
    );
    Ok(set)
}

fn verify_weight(config: &RunConfig) -> Result<ArtifactSet, CliError> {
    if !(config.alpha < 0.0) {
        return Err(ConfigError::violation("damping.alpha", "weight calibration requires alpha < 0").into());
    }
    let grid = config.grid()?;
    let vgrid = VerificationGrid::standard(grid.r_max(), config.t_max);
    let weight = calibrate(&config.damping(), config.dim, config.delta0, &vgrid).map_err(classify)?;
    let table = margin_table(&weight, &vgrid).map_err(classify)?;
    let s = summarize(&weight, &table);
    let rows: Vec<Vec<Cell>> = table
        .iter()
        .map(|m| vec![m.t.into(), m.r.into(), m.margin_energy.into(), m.margin_laplacian.into()])
        .collect();
    let mut set = ArtifactSet::default();
    set.add_csv("margins.csv", &["t", "r", "margin_24", "margin_25"], &rows);
    set.add_json(
        "weight_summary.json",
        &json!({
            "R_delta": s.r_delta,
            "A0": s.a0,
            "mu": s.mu,
            "min_margin_24": s.min_margin_24,
            "min_margin_25": s.min_margin_25,
            "ladder": weight.params().ladder,
        }),
    );
    Ok(set)
}

fn entry_kind(e: &Entry) -> &'static str {
    match e {
        Entry::Bump { .. } => "bump",
        Entry::Plateau { .. } => "plateau",
        Entry::Oscillatory { .. } => "oscillatory",
        Entry::TruncatedGaussian { .. } => "truncated_gaussian",
    }
}

fn verify_ineq(config: &RunConfig) -> Result<ArtifactSet, CliError> {
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for dim in 1..=3usize {
        let p = if dim >= 3 {
            config.p.min((dim as f64 + 2.0) / (dim as f64 - 2.0))
        } else {
            config.p
        };
        let corpus = TestFunctionCorpus::generate(dim, config.corpus_size, config.seed);
        let reports = corpus.evaluate(p).map_err(classify)?;
        for r in &reports {
            rows.push(vec![
                Cell::from(dim),
                r.index.into(),
                entry_kind(&r.entry).into(),
                r.gn.into(),
                r.ckn[0].into(),
                r.ckn[1].into(),
                r.ckn[2].into(),
                r.gamma_step[0].into(),
                r.gamma_step[1].into(),
                r.gamma_step[2].into(),
                r.ibp_residual.into(),
            ]);
        }
        let s = summarize_corpus(dim, p, &reports);
        let dominated = reports
            .iter()
            .all(|r| (0..3).all(|k| r.ckn[k] <= s.chain_bound[k] * (1.0 + 1e-12)));
        summaries.push(json!({"summary": s, "chain_dominates_every_entry": dominated}));
    }
    let g = Entry::standard_gaussian();
    let gaussian = json!({
        "ckn_k1": ckn_ratio(&g, 1, 1).map_err(classify)?,
        "gamma_step_0": gamma_step_ratio(&g, 0.0, 1).map_err(classify)?,
        "gamma_step_2": gamma_step_ratio(&g, 2.0, 1).map_err(classify)?,
    });
    let mut set = ArtifactSet::default();
    set.add_csv(
        "ineq_entries.csv",
        &[
            "dim", "index", "kind", "gn", "ckn_k1", "ckn_k2", "ckn_k3", "gamma_step_0", "gamma_step_2",
            "gamma_step_6", "ibp_residual",
        ],
        &rows,
    );
    set.add_json(
        "ineq_summary.json",
        &json!({"seed": config.seed, "corpus_size": config.corpus_size, "corpora": summaries, "truncated_gaussian": gaussian}),
    );
    Ok(set)
}

fn testfn(config: &RunConfig) -> Result<ArtifactSet, CliError> {
    config.check_blowup_regime()?;
    let spec = config.damping();
    let prob = config.problem();
    let grid = config.grid()?;
    let base = TestFunctionProbe::new(config.r0, config.p, &spec).map_err(classify)?;
    let r_cap = base.with_scale(config.t_max).r_support() + grid.dr;
    let (outcome, record) = record_run(
        &spec,
        &prob,
        &grid,
        &config.controls(),
        RecordOptions::new(config.probe_every, r_cap),
    )
    .map_err(classify)?;
    let horizon = match outcome.lifespan {
        Some(l) => 0.8 * l.value(),
        None => record.t_covered(),
    }
    .min(record.t_covered());

    let mut rows = Vec::new();
    let mut r_scale = config.r0;
    while r_scale <= horizon {
        let probe = base.with_scale(r_scale);
        let v = probe_inequality(&record, &probe, &prob, &spec).map_err(classify)?;
        let c = derivative_constants(&probe, config.dim, 201);
        rows.push(vec![
            Cell::from(r_scale),
            v.data_term.into(),
            v.nonlinear.into(),
            v.nonlinear_star.into(),
            v.lhs.into(),
            v.rhs_shape.into(),
            v.ratio().into(),
            c.dt.into(),
            c.dtt.into(),
            c.laplacian.into(),
        ]);
        r_scale *= 2.0;
    }
    let mut set = ArtifactSet::default();
    set.add_csv(
        "probe.csv",
        &["R", "data_term", "nonlinear", "nonlinear_star", "lhs", "rhs_shape", "ratio", "c_dt", "c_dtt", "c_laplacian"],
        &rows,
    );

    let p_c = critical_exponent(config.dim, config.alpha).map_err(classify)?;
    if config.beta == 1.0 && is_critical(config.p, p_c) {
        let mut yrows = Vec::new();
        let mut rho = 2.0;
        while rho <= horizon {
            let (y, bound) = y_domination(&record, &base, rho, config.dim).map_err(classify)?;
            yrows.push(vec![Cell::from(rho), y.into(), bound.into()]);
            rho *= 2.0;
        }
        set.add_csv("y_functional.csv", &["rho", "Y", "log2_bound"], &yrows);
    }
    set.add_json(
        "probe_summary.json",
        &json!({
            "status": outcome.status.name(),
            "lifespan": outcome.lifespan.map(|l| l.value()),
            "snapshots": record.times.len(),
            "snapshot_dt": record.dt,
        }),
    );
    Ok(set)
}

/// `p_c` and the lifespan exponents for `beta = 0` and `beta = 1` at `p`.
pub fn pc_report(dim: usize, alpha: f64, p: Option<f64>) -> Result<Value, CliError> {
    let p_c = critical_exponent(dim, alpha).map_err(classify)?;
    let mut out = json!({ "dim": dim, "alpha": alpha, "p_c": p_c });
    if let Some(p) = p {
        let mut by_beta = Vec::new();
        for beta in [0.0, 1.0] {
            let entry = match lifespan_exponent_for(dim, p, alpha, beta) {
                Ok(LifespanBound::Subcritical { kappa }) => json!({"beta": beta, "regime": "subcritical", "kappa": kappa}),
                Ok(LifespanBound::Critical { exponent }) => {
                    json!({"beta": beta, "regime": "critical", "exponent": exponent})
                }
                Err(critwave_core::Error::Supercritical { .. }) => json!({"beta": beta, "regime": "supercritical"}),
                Err(e) => return Err(classify(e)),
            };
            by_beta.push(entry);
        }
        out["p"] = json!(p);
        out["lifespan"] = json!(by_beta);
    }
    Ok(out)
}
