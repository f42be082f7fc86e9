use rayon::prelude::*;
use serde_json::{json, Map, Value};

use super::config::{Range, RunConfig};
use super::output::{json_num, Cell, Table, Units};
use crate::design::{boundary_diagnostics, masks_from_nnr, optimal_nnr, tradeoff_curve};
use crate::error::{Error, Result};
use crate::metrics::{control_cost_rate, mi_rate, mi_rate_from_nnr, mi_rate_root_form};
use crate::oracle::{all_required_pass, consistency_report};
use crate::params::{MaskParams, SystemParams};
use crate::riccati::solve_are;
use crate::sim::{cost_estimate, monte_carlo_moments, prediction_error_estimate, MonteCarlo};

pub const DEFAULT_VERIFY_HORIZON: usize = 10;
pub const DEFAULT_SIMULATE_HORIZON: usize = 100_000;

/// A command result in both output shapes.
#[derive(Debug, Clone)]
pub struct Report {
    pub table: Table,
    pub json: Value,
    pub exit_code: i32,
    pub warnings: Vec<String>,
}

impl Report {
    fn ok(table: Table, json: Value) -> Self {
        Self {
            table,
            json,
            exit_code: 0,
            warnings: Vec::new(),
        }
    }
}

fn units(cfg: &RunConfig) -> Units {
    Units { bits: cfg.bits }
}

fn cost_or_inf(sys: &SystemParams, masks: &MaskParams) -> Result<f64> {
    if sys.stability().stable {
        Ok(control_cost_rate(sys, masks)?.cost)
    } else {
        Ok(f64::INFINITY)
    }
}

pub fn analyze(cfg: &RunConfig) -> Result<Report> {
    let sys = cfg.system()?;
    let masks = cfg.masks()?;
    let u = units(cfg);
    let sigma = solve_are(sys.a(), masks.downlink_total(sys.w()), masks.n())?;
    let rates = mi_rate(&sys, &masks);
    let cost = cost_or_inf(&sys, &masks)?;
    let stability = sys.stability();
    let boundary = boundary_diagnostics(&masks, sys.w()).as_str();

    let mut table = Table::new(vec![
        "sigma",
        "uplink_nats",
        "downlink_nats",
        "mi_nats",
        "cost",
        "boundary",
        "stable",
        "divergent",
    ]);
    table.push(vec![
        Cell::Num(sigma),
        Cell::Info(rates.uplink),
        Cell::Info(rates.downlink),
        Cell::Info(rates.total),
        Cell::Num(cost),
        Cell::Text(boundary.into()),
        Cell::Bool(stability.stable),
        Cell::Bool(rates.divergent),
    ]);
    let mut obj = Map::new();
    obj.insert("sigma".into(), json_num(sigma));
    obj.insert(u.key("uplink_nats"), json_num(u.info(rates.uplink)));
    obj.insert(u.key("downlink_nats"), json_num(u.info(rates.downlink)));
    obj.insert(u.key("mi_nats"), json_num(u.info(rates.total)));
    obj.insert("cost".into(), json_num(cost));
    obj.insert(
        "diagnostics".into(),
        json!({
            "boundary": boundary,
            "stable": stability.stable,
            "stability_margin": json_num(stability.margin),
            "divergent": rates.divergent,
        }),
    );
    Ok(Report::ok(table, Value::Object(obj)))
}

fn grid_row(sys: &SystemParams, m: f64, n: f64) -> Result<Vec<Cell>> {
    let masks = MaskParams::new(m, n)?;
    let p = masks.downlink_total(sys.w());
    let alpha = if p > 0.0 {
        n / p
    } else if n > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    let sigma = solve_are(sys.a(), p, n).unwrap_or(f64::INFINITY);
    let rates = mi_rate(sys, &masks);
    Ok(vec![
        Cell::Num(m),
        Cell::Num(n),
        Cell::Num(alpha),
        Cell::Num(sigma),
        Cell::Info(rates.uplink),
        Cell::Info(rates.downlink),
        Cell::Info(rates.total),
        Cell::Num(cost_or_inf(sys, &masks)?),
    ])
}

pub fn grid(cfg: &RunConfig) -> Result<Report> {
    let sys = cfg.system()?;
    let ms = Range::parse("--m-range", &cfg.m_range)?.linear();
    let ns = Range::parse("--n-range", &cfg.n_range)?.linear();
    let cells: Vec<(f64, f64)> = ms.iter().flat_map(|&m| ns.iter().map(move |&n| (m, n))).collect();
    let rows: Vec<Vec<Cell>> = cells
        .par_iter()
        .map(|&(m, n)| grid_row(&sys, m, n))
        .collect::<Result<_>>()?;
    let mut table = Table::new(vec![
        "m",
        "n",
        "alpha",
        "sigma",
        "uplink_nats",
        "downlink_nats",
        "mi_nats",
        "cost",
    ]);
    table.rows = rows;
    let json = table.to_json_rows(units(cfg));
    Ok(Report::ok(table, json))
}

pub fn alpha_sweep(cfg: &RunConfig) -> Result<Report> {
    let sys = cfg.system()?;
    let alphas = Range::parse("--alpha-range", &cfg.alpha_range)?.logarithmic("--alpha-range")?;
    let mut columns = vec!["alpha", "uplink_nats", "downlink_nats", "mi_nats"];
    if cfg.root_form {
        columns.push("mi_root_form_nats");
    }
    let rows: Vec<Vec<Cell>> = alphas
        .par_iter()
        .map(|&alpha| {
            let r = mi_rate_from_nnr(&sys, alpha)?;
            let mut row = vec![
                Cell::Num(alpha),
                Cell::Info(r.uplink),
                Cell::Info(r.downlink),
                Cell::Info(r.total),
            ];
            if cfg.root_form {
                row.push(Cell::Info(mi_rate_root_form(&sys, alpha)?));
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new(columns);
    table.rows = rows;
    let json = table.to_json_rows(units(cfg));
    Ok(Report::ok(table, json))
}

pub fn design(cfg: &RunConfig) -> Result<Report> {
    let (a, k) = (cfg.a()?, cfg.k()?);
    let u = units(cfg);
    let report = optimal_nnr(a, k)?;
    let sys = cfg.system()?;
    let mut warnings = Vec::new();

    // The default weight list only asks for the unconstrained optimum, so a
    // loop that cannot host a trade-off skips it instead of failing.
    let can_trade = sys.w() > 0.0 && sys.stability().stable;
    let points = if cfg.lambda_given || can_trade {
        tradeoff_curve(&sys, &cfg.lambda)?
    } else {
        warnings.push("trade-off skipped: it needs w > 0 and a stable closed loop".to_string());
        Vec::new()
    };

    let recommended = match masks_from_nnr(report.alpha_star, sys.w(), cfg.m) {
        Ok(m) => Some(m),
        Err(Error::IllDefinedNnr) => {
            warnings.push("no recommended masks: m + w = 0".to_string());
            None
        }
        Err(e) => return Err(e),
    };
    if cfg.m == 0.0 && recommended.is_some() {
        warnings.push(
            "m = 0 minimizes leakage but makes the achieved noise ratio track any error in w one-for-one; \
             a positive --m damps that sensitivity"
                .to_string(),
        );
    }

    let mut table = Table::new(vec![
        "alpha_star",
        "residual",
        "mi_min_nats",
        "recommended_m",
        "recommended_n",
        "lambda",
        "alpha",
        "mi_nats",
        "cost",
        "objective",
        "foc_residual",
        "at_boundary",
    ]);
    let head = |table: &mut Table, tail: Vec<Cell>| {
        let mut row = vec![
            Cell::Num(report.alpha_star),
            Cell::Num(report.residual),
            Cell::Info(report.mi_min),
            recommended.map_or(Cell::Text(String::new()), |m| Cell::Num(m.m())),
            recommended.map_or(Cell::Text(String::new()), |m| Cell::Num(m.n())),
        ];
        row.extend(tail);
        table.push(row);
    };
    if points.is_empty() {
        head(&mut table, (0..7).map(|_| Cell::Text(String::new())).collect());
    }
    for p in &points {
        head(
            &mut table,
            vec![
                Cell::Num(p.lambda),
                Cell::Num(p.alpha_opt),
                Cell::Info(p.mi),
                Cell::Num(p.cost),
                Cell::Num(p.objective),
                Cell::Num(p.foc_residual),
                Cell::Bool(p.at_boundary),
            ],
        );
    }

    let tradeoff: Vec<Value> = points
        .iter()
        .map(|p| {
            let mut o = Map::new();
            o.insert("lambda".into(), json_num(p.lambda));
            o.insert("alpha".into(), json_num(p.alpha_opt));
            o.insert(u.key("mi_nats"), json_num(u.info(p.mi)));
            o.insert("cost".into(), json_num(p.cost));
            o.insert("objective".into(), json_num(p.objective));
            o.insert("foc_residual".into(), json_num(p.foc_residual));
            o.insert("at_boundary".into(), Value::Bool(p.at_boundary));
            Value::Object(o)
        })
        .collect();
    let mut obj = Map::new();
    obj.insert("alpha_star".into(), json_num(report.alpha_star));
    obj.insert("residual".into(), json_num(report.residual));
    obj.insert(u.key("mi_min_nats"), json_num(u.info(report.mi_min)));
    obj.insert(
        "coefficients".into(),
        json!({
            "c4": json_num(report.c4),
            "c3": json_num(report.c3),
            "c1": json_num(report.c1),
            "c0": json_num(report.c0),
        }),
    );
    obj.insert("tradeoff".into(), Value::Array(tradeoff));
    obj.insert(
        "recommended".into(),
        recommended.map_or(Value::Null, |m| json!({ "m": json_num(m.m()), "n": json_num(m.n()) })),
    );
    Ok(Report {
        table,
        json: Value::Object(obj),
        exit_code: 0,
        warnings,
    })
}

pub fn simulate(cfg: &RunConfig) -> Result<Report> {
    let sys = cfg.system()?;
    let masks = cfg.masks()?;
    let mc = MonteCarlo {
        horizon: cfg.horizon.unwrap_or(DEFAULT_SIMULATE_HORIZON),
        trajectories: cfg.trajectories,
        seed: cfg.seed,
        burn_in: cfg.burn_in,
    };
    let moments = monte_carlo_moments(&sys, &masks, &mc)?;
    let cost = cost_estimate(&moments, sys.q(), sys.r());
    let sigma = prediction_error_estimate(&moments);
    let closed_cost = control_cost_rate(&sys, &masks)?.cost;
    let closed_sigma = solve_are(sys.a(), masks.downlink_total(sys.w()), masks.n())?;
    let pass = cost.covers(closed_cost, 3.0) && sigma.covers(closed_sigma, 3.0);

    let mut table = Table::new(vec![
        "empirical_cost",
        "cost_stderr",
        "closed_form_cost",
        "empirical_sigma",
        "sigma_stderr",
        "closed_form_sigma",
        "pass",
        "horizon",
        "trajectories",
        "seed",
        "burn_in",
    ]);
    table.push(vec![
        Cell::Num(cost.mean),
        Cell::Num(cost.std_err),
        Cell::Num(closed_cost),
        Cell::Num(sigma.mean),
        Cell::Num(sigma.std_err),
        Cell::Num(closed_sigma),
        Cell::Bool(pass),
        Cell::Int(mc.horizon as u64),
        Cell::Int(mc.trajectories as u64),
        Cell::Int(mc.seed),
        Cell::Int(mc.burn_in as u64),
    ]);
    let json = table.row_object(0, units(cfg));
    Ok(Report::ok(table, json))
}

pub fn verify(cfg: &RunConfig) -> Result<Report> {
    let sys = cfg.system()?;
    let masks = cfg.masks()?;
    let checks = consistency_report(&sys, &masks, cfg.horizon.unwrap_or(DEFAULT_VERIFY_HORIZON))?;
    let all_pass = all_required_pass(&checks);
    let u = units(cfg);
    let mut table = Table::new(vec!["name", "lhs", "rhs", "abs_err", "pass", "informational"]);
    for c in &checks {
        table.push(vec![
            Cell::Text(c.name.clone()),
            Cell::Info(c.lhs),
            Cell::Info(c.rhs),
            Cell::Info(c.abs_err),
            Cell::Bool(c.pass),
            Cell::Bool(c.informational),
        ]);
    }
    let json = json!({ "all_pass": all_pass, "checks": table.to_json_rows(u) });
    Ok(Report {
        table,
        json,
        exit_code: if all_pass { 0 } else { 1 },
        warnings: Vec::new(),
    })
}
