//! Browser demo. The `*_json` functions are plain Rust and return JSON
//! strings; the `#[wasm_bindgen]` exports are thin wrappers around them.

use std::collections::BTreeMap;

use demonsim_core::{
    ensemble_report, enumerate_outcomes, equilibrium_distribution, estimate, ft_estimate,
    ion_composite_protocol, measure, sample_trajectories, state_flip_protocol, szilard_protocol,
    FeedbackProtocol, IonCompositeModel, MeasurementOutcomeTable, PulsePrep, SigmaKind,
    ThermalContext,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

type Result<T> = std::result::Result<T, String>;

struct Point {
    ctx: ThermalContext,
    protocol: FeedbackProtocol,
    table: MeasurementOutcomeTable,
}

fn point(protocol: &str, theta_c: f64, epsilon: f64) -> Result<Point> {
    let ctx = PulsePrep::new(theta_c)
        .and_then(|p| p.context())
        .map_err(|e| e.to_string())?;
    let space = ctx.two_level_space();
    let protocol = match protocol {
        "szilard" => szilard_protocol(&space),
        "flip" => state_flip_protocol(&space),
        "ion" => ion_composite_protocol(&IonCompositeModel::default(), &ctx),
        other => return Err(format!("unknown protocol {other:?}")),
    }
    .map_err(|e| e.to_string())?;
    let table =
        measure(&equilibrium_distribution(&ctx, &space), epsilon).map_err(|e| e.to_string())?;
    Ok(Point {
        ctx,
        protocol,
        table,
    })
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct CurvePoint {
    epsilon: f64,
    w_out: f64,
    w_ext: f64,
    delta_f: f64,
    info_bound: f64,
    eta_out: Option<f64>,
    eta_ext: Option<f64>,
    eta_max: Option<f64>,
    mean_sigma_cond: f64,
    mean_sigma_uncond: f64,
    mean_sigma_info: f64,
}

#[derive(Serialize)]
struct Curve {
    protocol: String,
    theta_c: f64,
    beta: f64,
    kappa: f64,
    points: Vec<CurvePoint>,
}

/// Work, bounds and efficacies over `steps + 1` evenly spaced errors in [0, 1].
pub fn efficacy_curve_json(
    protocol: &str,
    theta_c: f64,
    kappa: f64,
    steps: usize,
) -> Result<String> {
    let steps = steps.max(1);
    let mut points = Vec::with_capacity(steps + 1);
    let mut beta = 0.0;
    for i in 0..=steps {
        let p = point(protocol, theta_c, i as f64 / steps as f64)?;
        beta = p.ctx.beta();
        let r = ensemble_report(&p.protocol, &p.table, &p.ctx, kappa).map_err(|e| e.to_string())?;
        points.push(CurvePoint {
            epsilon: r.epsilon,
            w_out: r.w_out,
            w_ext: r.w_ext,
            delta_f: r.delta_f,
            info_bound: r.info_bound,
            eta_out: r.eta_out,
            eta_ext: r.eta_ext,
            eta_max: r.eta_max,
            mean_sigma_cond: r.mean_sigma_cond,
            mean_sigma_uncond: r.mean_sigma_uncond,
            mean_sigma_info: r.mean_sigma_info,
        });
    }
    to_json(&Curve {
        protocol: protocol.to_string(),
        theta_c,
        beta,
        kappa,
        points,
    })
}

#[derive(Serialize, Default)]
struct Flow {
    x0: usize,
    y: usize,
    xc: usize,
    probability: f64,
    work: f64,
    sigma_cond: f64,
    sigma_uncond: f64,
    sigma_info: f64,
}

#[derive(Serialize)]
struct Ft {
    sigma: &'static str,
    value: f64,
    support_deficit: f64,
}

#[derive(Serialize)]
struct FlowReport {
    beta: f64,
    epsilon: f64,
    w_out: f64,
    delta_f: f64,
    mutual_information: f64,
    flows: Vec<Flow>,
    ft: Vec<Ft>,
}

/// Qubit-level probability flow `x0 → y → x_c` with per-path entropy
/// productions, plus the three exponential averages.
pub fn outcome_flow_json(protocol: &str, theta_c: f64, epsilon: f64) -> Result<String> {
    let p = point(protocol, theta_c, epsilon)?;
    let en = enumerate_outcomes(&p.protocol, &p.table).map_err(|e| e.to_string())?;
    let mut cells: BTreeMap<(usize, usize, usize), Flow> = BTreeMap::new();
    for atom in en.realized() {
        let Some(l) = &atom.ledger else { continue };
        let key = (atom.x0_system, atom.y.index(), atom.xc);
        let cell = cells.entry(key).or_insert_with(|| Flow {
            x0: key.0,
            y: key.1,
            xc: key.2,
            sigma_cond: l.sigma_cond,
            sigma_uncond: l.sigma_uncond,
            sigma_info: l.sigma_info,
            ..Flow::default()
        });
        cell.work += atom.probability * l.work;
        cell.probability += atom.probability;
    }
    let flows = cells
        .into_values()
        .map(|mut f| {
            f.work /= f.probability;
            f
        })
        .collect();
    let r = ensemble_report(&p.protocol, &p.table, &p.ctx, 1.0).map_err(|e| e.to_string())?;
    let ft = SigmaKind::ALL
        .into_iter()
        .map(|k| Ft {
            sigma: k.name(),
            value: r.ft(k).value,
            support_deficit: r.ft(k).support_deficit,
        })
        .collect();
    to_json(&FlowReport {
        beta: p.ctx.beta(),
        epsilon: r.epsilon,
        w_out: r.w_out,
        delta_f: r.delta_f,
        mutual_information: r.mutual_information,
        flows,
        ft,
    })
}

#[derive(Serialize)]
struct McFt {
    sigma: &'static str,
    exact: f64,
    support_deficit: f64,
    mc: f64,
    stderr: f64,
}

#[derive(Serialize)]
struct Bin {
    sigma_cond: f64,
    exact: f64,
    sampled: f64,
}

#[derive(Serialize)]
struct McReport {
    samples: usize,
    seed: u64,
    w_out_exact: f64,
    w_out_mc: f64,
    w_out_stderr: f64,
    ft: Vec<McFt>,
    histogram: Vec<Bin>,
}

/// Sampled versus exact fluctuation theorems, and the distribution of `σ_{X|Y}`.
pub fn fluctuation_check_json(
    protocol: &str,
    theta_c: f64,
    epsilon: f64,
    samples: usize,
    seed: u64,
) -> Result<String> {
    let p = point(protocol, theta_c, epsilon)?;
    let r = ensemble_report(&p.protocol, &p.table, &p.ctx, 1.0).map_err(|e| e.to_string())?;
    let batch =
        sample_trajectories(&p.protocol, &p.table, samples, seed).map_err(|e| e.to_string())?;
    let mc = ft_estimate(&batch).map_err(|e| e.to_string())?;
    let w = estimate(&batch, |t| t.work).map_err(|e| e.to_string())?;

    // σ_{X|Y} takes few distinct values; bin on a 1e-9 grid to merge rounding twins.
    let key = |s: f64| (s * 1e9).round() as i64;
    let mut bins: BTreeMap<i64, Bin> = BTreeMap::new();
    let en = enumerate_outcomes(&p.protocol, &p.table).map_err(|e| e.to_string())?;
    for atom in en.realized() {
        if let Some(l) = &atom.ledger {
            let b = bins.entry(key(l.sigma_cond)).or_insert(Bin {
                sigma_cond: l.sigma_cond,
                exact: 0.0,
                sampled: 0.0,
            });
            b.exact += atom.probability;
        }
    }
    let weight = 1.0 / batch.len() as f64;
    for t in &batch.records {
        if let Some(b) = bins.get_mut(&key(t.sigma.cond)) {
            b.sampled += weight;
        }
    }

    let ft = SigmaKind::ALL
        .into_iter()
        .zip(mc)
        .map(|(k, e)| McFt {
            sigma: k.name(),
            exact: r.ft(k).value,
            support_deficit: r.ft(k).support_deficit,
            mc: e.mean,
            stderr: e.stderr,
        })
        .collect();
    to_json(&McReport {
        samples,
        seed,
        w_out_exact: r.w_out,
        w_out_mc: w.mean,
        w_out_stderr: w.stderr,
        ft,
        histogram: bins.into_values().collect(),
    })
}

#[wasm_bindgen]
pub fn efficacy_curve(
    protocol: &str,
    theta_c: f64,
    kappa: f64,
    steps: usize,
) -> std::result::Result<String, JsValue> {
    efficacy_curve_json(protocol, theta_c, kappa, steps).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn outcome_flow(
    protocol: &str,
    theta_c: f64,
    epsilon: f64,
) -> std::result::Result<String, JsValue> {
    outcome_flow_json(protocol, theta_c, epsilon).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn fluctuation_check(
    protocol: &str,
    theta_c: f64,
    epsilon: f64,
    samples: usize,
    seed: u32,
) -> std::result::Result<String, JsValue> {
    fluctuation_check_json(protocol, theta_c, epsilon, samples, u64::from(seed))
        .map_err(|e| JsValue::from_str(&e))
}
