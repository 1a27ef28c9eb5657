use heatlab::carleman::{
    build_xi, calibrate_c1, carleman_sides, min_tau_search, smooth_corpus, CarlemanParams,
};
use heatlab::control::{
    hum_solve, regular_control, HumOptions, NestedIntervals, RegularControlOptions,
};
use heatlab::observability::{bound_report, cobs_estimate, ObservationRegion, PencilOptions};
use heatlab::pde::{energy_report, Propagator};
use heatlab::potential::norms;
use heatlab::random::{normal_vec, stream};
use heatlab::spectral::{constant_fit, dyadic_ladder};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Initial, Task};
use crate::error::{CliError, CliResult};
use crate::seed::{self, derive};
use crate::table::{num, Table};

/// Tabular artifact plus a one-record summary.
#[derive(Debug, Clone)]
pub struct TaskOutput {
    pub table: Table,
    pub summary: serde_json::Value,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveSummary {
    pub task: String,
    pub n: usize,
    pub steps: usize,
    pub terminal_l2: f64,
    pub max_abs: f64,
    pub max_l2_sq: f64,
    pub stiff_damping: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSummary {
    pub task: String,
    pub terminal_ratio: f64,
    pub cost_l2: f64,
    /// Only for `regctl`.
    pub holder_norm: Option<f64>,
    pub cg_iterations: usize,
    pub converged: bool,
    /// Equation residual of the assembled trajectory; only for `regctl`.
    pub residual_norm: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObscostSummary {
    #[serde(rename = "T")]
    pub t_final: f64,
    pub sup: f64,
    pub grad_sup: f64,
    pub dt_sup: f64,
    pub neg_sup: f64,
    pub omega_measure: f64,
    #[serde(rename = "E_measure")]
    pub e_measure: f64,
    pub c_obs: f64,
    pub log_c_obs: f64,
    pub log_bound_new: f64,
    pub log_bound_classical: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stiff_damping: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarlemanSummary {
    pub task: String,
    pub c1: f64,
    pub tau_star: Option<f64>,
    pub holds_at_star: Option<bool>,
    pub holds_below: Option<bool>,
    pub degenerate: Option<bool>,
    pub non_monotone: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralSummary {
    pub task: String,
    pub rows: usize,
    pub max_k: f64,
    /// Slope of `K` against `√(λ_cut − min V)` for the first amplitude.
    pub lambda_slope: f64,
    pub lambda_r_squared: f64,
}

/// Summary keys of a task, in serialization order; used as sweep columns.
pub fn summary_keys(task: Task) -> CliResult<Vec<String>> {
    let v = match task {
        Task::Solve => serde_json::to_value(SolveSummary::default()),
        Task::Hum | Task::Regctl => serde_json::to_value(ControlSummary::default()),
        Task::Obscost => serde_json::to_value(ObscostSummary::default()),
        Task::Carleman => serde_json::to_value(CarlemanSummary::default()),
        Task::Spectral => serde_json::to_value(SpectralSummary::default()),
        Task::Sweep => return Err(CliError::Schema("sweeps cannot be nested".into())),
    }
    .expect("summary serializes");
    Ok(v.as_object()
        .expect("summary is an object")
        .keys()
        .filter(|k| k.as_str() != "task")
        .cloned()
        .collect())
}

pub fn run_task(task: Task, cfg: &ExperimentConfig) -> CliResult<TaskOutput> {
    match task {
        Task::Solve => solve(cfg),
        Task::Hum => hum(cfg),
        Task::Regctl => regctl(cfg),
        Task::Obscost => obscost(cfg),
        Task::Carleman => carleman(cfg),
        Task::Spectral => spectral(cfg),
        Task::Sweep => Err(CliError::Schema("use the sweep runner for sweeps".into())),
    }
}

fn to_value<S: Serialize>(s: &S) -> serde_json::Value {
    serde_json::to_value(s).expect("summary serializes")
}

fn initial_data(cfg: &ExperimentConfig) -> CliResult<Vec<f64>> {
    let grid = cfg.grid()?;
    match &cfg.initial {
        Initial::Sine { k, amplitude } => {
            if *k == 0 {
                return Err(CliError::Schema("initial: mode index starts at 1".into()));
            }
            Ok(grid
                .sine_mode(*k)
                .into_iter()
                .map(|v| amplitude * v)
                .collect())
        }
        Initial::Random { modes } => {
            let mut rng = stream(derive(cfg.seed, seed::INITIAL_DATA), 0);
            let coeffs: Vec<f64> = normal_vec(&mut rng, *modes);
            let mut y = vec![0.0; grid.n];
            for (k, c) in coeffs.iter().enumerate() {
                for (yi, m) in y.iter_mut().zip(grid.sine_mode(k + 1)) {
                    *yi += c / (k + 1) as f64 * m;
                }
            }
            Ok(y)
        }
        Initial::Samples { values } => Ok(values.clone()),
    }
}

fn propagator(cfg: &ExperimentConfig) -> CliResult<Propagator<f64>> {
    Ok(Propagator::new(
        cfg.grid()?,
        cfg.time_grid()?,
        &cfg.potential,
    )?)
}

fn region(cfg: &ExperimentConfig, prop: &Propagator<f64>) -> CliResult<ObservationRegion<f64>> {
    Ok(ObservationRegion::new(
        cfg.omega_mask(&prop.grid)?,
        cfg.time_set(&prop.tg)?,
    )?)
}

fn solve(cfg: &ExperimentConfig) -> CliResult<TaskOutput> {
    let prop = propagator(cfg)?;
    let y = prop.forward(&initial_data(cfg)?, None)?;
    let mut table = Table::new(&["t", "x", "y"]);
    for (n, level) in y.levels.iter().enumerate() {
        let t = num(prop.tg.time(n));
        for (i, v) in level.iter().enumerate() {
            table.push(vec![t.clone(), num(prop.grid.node(i)), num(*v)]);
        }
    }
    let energy = energy_report(&y);
    let summary = SolveSummary {
        task: "solve".into(),
        n: prop.grid.n,
        steps: prop.tg.steps,
        terminal_l2: prop.grid.norm(y.terminal()),
        max_abs: y.max_abs(),
        max_l2_sq: energy.max_l2_sq,
        stiff_damping: prop.stiff_damping(),
    };
    Ok(TaskOutput {
        table,
        summary: to_value(&summary),
    })
}

fn hum_options(cfg: &ExperimentConfig) -> HumOptions<f64> {
    HumOptions {
        eps: cfg.hum.eps,
        cg_tol: cfg.hum.cg_tol,
        max_iter: cfg.hum.max_iter,
    }
}

fn hum(cfg: &ExperimentConfig) -> CliResult<TaskOutput> {
    let prop = propagator(cfg)?;
    let reg = region(cfg, &prop)?;
    let sol = hum_solve(&prop, &reg, &initial_data(cfg)?, &hum_options(cfg))?;
    let mut table = Table::new(&["t", "x", "h"]);
    for (n, row) in sol.control.values.iter().enumerate() {
        let t = num(prop.tg.half_time(n));
        for &i in &reg.mask.indices {
            table.push(vec![t.clone(), num(prop.grid.node(i)), num(row[i])]);
        }
    }
    let summary = ControlSummary {
        task: "hum".into(),
        terminal_ratio: sol.terminal_ratio,
        cost_l2: sol.control.l2_norm(&prop.grid, &prop.tg),
        holder_norm: None,
        cg_iterations: sol.cg_iterations,
        converged: sol.converged,
        residual_norm: None,
    };
    Ok(TaskOutput {
        table,
        summary: to_value(&summary),
    })
}

fn regctl(cfg: &ExperimentConfig) -> CliResult<TaskOutput> {
    let prop = propagator(cfg)?;
    let om = match cfg.omega.as_deref() {
        Some([single]) => *single,
        _ => {
            return Err(CliError::Schema(
                "regctl needs `omega` to be a single interval".into(),
            ))
        }
    };
    let masks = NestedIntervals::concentric(om);
    let opts = RegularControlOptions {
        hum: hum_options(cfg),
        ramp_fraction: cfg.regctl.ramp_fraction,
        alpha: cfg.regctl.alpha,
        holder_radius: cfg.regctl.holder_radius,
        preroll: cfg.regctl.preroll,
    };
    let rc = regular_control(&prop, &initial_data(cfg)?, &masks, &opts)?;
    let mut table = Table::new(&["t", "x", "h"]);
    for (n, level) in rc.h_reg.levels.iter().enumerate() {
        let t = num(prop.tg.time(n));
        for (i, v) in level.iter().enumerate() {
            let x = prop.grid.node(i);
            if x > om.0 && x < om.1 {
                table.push(vec![t.clone(), num(x), num(*v)]);
            }
        }
    }
    let summary = ControlSummary {
        task: "regctl".into(),
        terminal_ratio: rc.terminal_ratio,
        cost_l2: rc.cost_l2,
        holder_norm: Some(rc.holder.total),
        cg_iterations: rc.hum_cg_iterations,
        converged: rc.hum_terminal_ratio.is_finite(),
        residual_norm: Some(rc.residual_norm),
    };
    Ok(TaskOutput {
        table,
        summary: to_value(&summary),
    })
}

fn obscost(cfg: &ExperimentConfig) -> CliResult<TaskOutput> {
    let prop = propagator(cfg)?;
    let reg = region(cfg, &prop)?;
    let p = &cfg.obscost;
    let opts = PencilOptions {
        eps: p.eps,
        tol: p.tol,
        max_iter: p.max_iter,
        seed: derive(cfg.seed, seed::ESTIMATOR),
        ..PencilOptions::default()
    };
    let est = cobs_estimate(&prop, &reg, &opts)?;
    let vn = norms(&cfg.potential, &prop.grid, &prop.tg, p.oversample)?;
    let bounds = bound_report(prop.tg.t_final, &vn, p.c, None, None);
    let s = ObscostSummary {
        t_final: prop.tg.t_final,
        sup: vn.sup,
        grad_sup: vn.grad_sup,
        dt_sup: vn.dt_sup,
        neg_sup: vn.neg_sup,
        omega_measure: reg.mask.measure,
        e_measure: reg.times.measure,
        c_obs: est.c_obs,
        log_c_obs: est.c_obs.ln(),
        log_bound_new: bounds.log_bound_new,
        log_bound_classical: bounds.log_bound_classical,
        iterations: est.iterations,
        converged: est.converged,
        stiff_damping: prop.stiff_damping(),
    };
    let summary = to_value(&s);
    let keys = summary_keys(Task::Obscost)?;
    let header: Vec<&str> = keys.iter().map(String::as_str).collect();
    let mut table = Table::new(&header);
    table.push(keys.iter().map(|k| cell(&summary[k])).collect());
    Ok(TaskOutput { table, summary })
}

fn carleman(cfg: &ExperimentConfig) -> CliResult<TaskOutput> {
    let grid = cfg.grid()?;
    let tg = cfg.time_grid()?;
    let omega = cfg.omega_mask(&grid)?;
    let c = &cfg.carleman;
    let xi = build_xi(&grid, c.center)?;
    let corpus = smooth_corpus(&grid, &tg, c.corpus_size, derive(cfg.seed, seed::CORPUS));
    if corpus.is_empty() {
        return Err(CliError::Schema(
            "carleman: corpus_size must be positive".into(),
        ));
    }
    let c1 = match c.c1 {
        Some(v) => v,
        None => calibrate_c1(
            &corpus,
            &cfg.potential,
            &xi,
            c.s,
            c.lambda,
            c.tau_ref,
            &omega,
            c.safety,
        )?,
    };
    let mut table = Table::new(&[
        "tau",
        "lambda",
        "lhs3",
        "lhs1",
        "lhs_neg1",
        "rhs_f",
        "rhs_local",
        "holds",
    ]);
    for &tau in &c.taus {
        let params = CarlemanParams::new(c.s, c.lambda, tau, c1)?;
        // the member closest to violating the estimate
        let worst = corpus
            .iter()
            .map(|w| carleman_sides(w, &cfg.potential, &xi, &params, &omega))
            .min_by(|a, b| a.slack.total_cmp(&b.slack))
            .expect("corpus is not empty");
        let u = worst.unscaled();
        let mut row = vec![num(tau), num(c.lambda)];
        row.extend(u.iter().map(|v| num(*v)));
        row.push(worst.holds.to_string());
        table.push(row);
    }
    let mut summary = CarlemanSummary {
        task: "carleman".into(),
        c1,
        ..Default::default()
    };
    if let Some(tau_hi) = c.tau_hi {
        let params = CarlemanParams::new(c.s, c.lambda, tau_hi, c1)?;
        let r = min_tau_search(&corpus, &cfg.potential, &xi, &params, &omega, tau_hi)?;
        summary.tau_star = Some(r.tau_star);
        summary.holds_at_star = Some(r.holds_at_star);
        summary.holds_below = Some(r.holds_below);
        summary.degenerate = Some(r.degenerate);
        summary.non_monotone = Some(r.non_monotone);
    }
    Ok(TaskOutput {
        table,
        summary: to_value(&summary),
    })
}

fn spectral(cfg: &ExperimentConfig) -> CliResult<TaskOutput> {
    let grid = cfg.grid()?;
    let omega = cfg.omega_mask(&grid)?;
    let s = &cfg.spectral;
    let offsets = match &s.offsets {
        Some(o) => o.clone(),
        None => dyadic_ladder(s.ladder_base, s.rungs),
    };
    let fit = constant_fit(&cfg.potential, &s.amplitudes, &grid, &offsets, &omega)?;
    let mut table = Table::new(&[
        "lambda_cut",
        "M",
        "omega_measure",
        "max_ratio",
        "K",
        "window_size",
    ]);
    for r in &fit.rows {
        table.push(vec![
            num(r.lambda_cut),
            num(r.amplitude),
            num(r.omega_measure),
            num(r.max_ratio),
            num(r.k),
            r.window_size.to_string(),
        ]);
    }
    let first = fit
        .lambda_fits
        .first()
        .map(|(_, f)| *f)
        .ok_or_else(|| CliError::Schema("spectral: amplitudes must not be empty".into()))?;
    let summary = SpectralSummary {
        task: "spectral".into(),
        rows: fit.rows.len(),
        max_k: fit
            .rows
            .iter()
            .map(|r| r.k)
            .fold(f64::NEG_INFINITY, f64::max),
        lambda_slope: first.slope,
        lambda_r_squared: first.r_squared,
    };
    Ok(TaskOutput {
        table,
        summary: to_value(&summary),
    })
}

/// CSV cell for a scalar JSON value; `null` becomes empty.
pub fn cell(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::Null => String::new(),
        serde_json::Value::Number(n) => match n.as_f64() {
            Some(f) if n.is_f64() => num(f),
            _ => n.to_string(),
        },
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summaries_round_trip() {
        let s = ControlSummary {
            task: "regctl".into(),
            terminal_ratio: 1.5e-12,
            cost_l2: 3.25,
            holder_norm: Some(7.0),
            cg_iterations: 12,
            converged: true,
            residual_norm: None,
        };
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<ControlSummary>(&text).unwrap(), s);
        let o = ObscostSummary {
            t_final: 0.5,
            c_obs: 0.05,
            ..Default::default()
        };
        let text = serde_json::to_string(&o).unwrap();
        assert!(text.contains("\"E_measure\""));
        assert_eq!(serde_json::from_str::<ObscostSummary>(&text).unwrap(), o);
    }

    #[test]
    fn obscost_keys_follow_the_column_contract() {
        let keys = summary_keys(Task::Obscost).unwrap();
        assert_eq!(
            keys[..13],
            [
                "T",
                "sup",
                "grad_sup",
                "dt_sup",
                "neg_sup",
                "omega_measure",
                "E_measure",
                "c_obs",
                "log_c_obs",
                "log_bound_new",
                "log_bound_classical",
                "iterations",
                "converged"
            ]
        );
    }
}
