use rawpriv_core::adversary::{rollout_sweep, spearman_rho, sweep_csv, SweepRow};
use rawpriv_core::billing::{meter, settle, Invoice, Money};
use rawpriv_core::nvs::{
    context_csv, corridor_scene, fuse_frames, hole_fraction_vs_context, lateral_offset,
    render_depth, DepthMap,
};
use rawpriv_core::obfuscation::{Priority, StackTag};
use rawpriv_core::rng;
use rawpriv_core::scene::{Pose, VehicleId};
use rawpriv_core::scheduler::{build_timeline, random_demands, Timeline};
use serde_json::{json, Value};

use crate::config::{Experiment, ExperimentConfig};
use crate::svg::{Plot, Series};
use crate::CliError;

/// Reference values reported on the OPV2V scenes at 12 m. Printed next to
/// the synthetic numbers, never checked.
const OPV2V_SIGMA: f64 = 12.0;
const OPV2V_CONFUSION: f64 = 0.25;
const OPV2V_RMSE: f64 = 45.0;

/// Everything one run writes, held in memory until the single write pass.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub results_csv: String,
    pub summary: Value,
    pub plot: Plot,
    /// Additional `(file name, contents)` pairs.
    pub extra: Vec<(String, String)>,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let problems = cfg.violations();
    if !problems.is_empty() {
        return Err(CliError::Constraint(problems));
    }
    let body = || match cfg.experiment {
        Experiment::PrivacySweep => privacy_sweep(cfg),
        Experiment::NvsContext => nvs_context(cfg),
        Experiment::Schedule => schedule(cfg),
        Experiment::BillingDemo => billing_demo(cfg),
    };
    let mut art = match cfg.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Run(e.to_string()))?
            .install(body)?,
        None => body()?,
    };
    let summary = art.summary.as_object_mut().expect("summary is an object");
    summary.insert("experiment".into(), json!(cfg.experiment.as_str()));
    summary.insert("seed".into(), json!(cfg.seed));
    Ok(art)
}

fn run_err(e: impl std::fmt::Display) -> CliError {
    CliError::Run(e.to_string())
}

fn is_monotone(xs: &[f64], tol: f64) -> bool {
    xs.windows(2).all(|w| w[1] >= w[0] - tol)
}

fn privacy_sweep(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let spec = cfg.sweep_spec();
    let values = &cfg.sweep.values;
    let rows = rollout_sweep(&spec, values, cfg.jobs).map_err(run_err)?;

    let confusion: Vec<f64> = rows.iter().map(|r| r.mean_confusion).collect();
    let rmse: Vec<f64> = rows.iter().map(|r| r.mean_rmse).collect();
    let rho = |ys: &[f64]| {
        let r = spearman_rho(values, ys);
        r.is_finite().then_some(r)
    };
    let at = |v: f64| rows.iter().find(|r| r.sigma == v);
    let synthetic_at_ref = at(OPV2V_SIGMA).map(
        |r: &SweepRow| json!({ "mean_confusion": r.mean_confusion, "mean_rmse": r.mean_rmse }),
    );

    let summary = json!({
        "values": values,
        "rows": rows,
        "spearman_confusion": rho(&confusion),
        "spearman_rmse": rho(&rmse),
        "confusion_non_decreasing": is_monotone(&confusion, 0.0),
        "rmse_non_decreasing": is_monotone(&rmse, 0.0),
        "rollouts_per_value": spec.scenes * spec.rollouts_per_scene,
        "reference": {
            "note": "OPV2V reference values, not reproduced by the synthetic suite",
            "sigma": OPV2V_SIGMA,
            "confusion": OPV2V_CONFUSION,
            "rmse_m": OPV2V_RMSE,
            "synthetic": synthetic_at_ref,
        },
        "spec": spec,
    });
    let plot = Plot {
        title: "Adversary confusion vs forging noise".into(),
        x_label: "sigma (m)".into(),
        y_label: "mean confusion rate".into(),
        series: vec![Series {
            name: "mean_confusion".into(),
            points: rows.iter().map(|r| (r.sigma, r.mean_confusion)).collect(),
        }],
    };
    Ok(Artifacts {
        results_csv: sweep_csv(&rows),
        summary,
        plot,
        extra: vec![],
    })
}

fn nvs_context(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let n = &cfg.nvs;
    let scene = corridor_scene(&n.corridor, cfg.seed).map_err(run_err)?;
    let rows = hole_fraction_vs_context(
        &scene.intrinsics,
        &scene.world,
        &scene.trajectory,
        n.novel_offset,
        &n.context_lengths,
    )
    .map_err(run_err)?;

    // novel view from the longest context, for inspection
    let k = &scene.intrinsics;
    let longest = *n.context_lengths.last().expect("validated non-empty");
    let views: Vec<(Pose, DepthMap)> = scene.trajectory[scene.trajectory.len() - longest..]
        .iter()
        .rev()
        .map(|p| (*p, render_depth(k, p, &scene.world).depth))
        .collect();
    let novel = lateral_offset(scene.trajectory.last().expect("non-empty"), n.novel_offset);
    let novel_depth = render_depth(k, &novel, &fuse_frames(&views, k)).depth;

    let holes: Vec<f64> = rows.iter().map(|r| r.hole_fraction).collect();
    let first = holes[0];
    let last = *holes.last().expect("non-empty");
    let summary = json!({
        "rows": rows,
        "novel_offset": n.novel_offset,
        "world_points": scene.world.points.len(),
        "image": [k.width, k.height],
        "non_increasing_within_0.01": holes.windows(2).all(|w| w[1] <= w[0] + 0.01),
        "ratio_longest_to_shortest": if first > 0.0 { Some(last / first) } else { None },
        "corridor": n.corridor,
    });
    let plot = Plot {
        title: "Novel-view holes vs context length".into(),
        x_label: "context length (frames)".into(),
        y_label: "hole fraction".into(),
        series: vec![Series {
            name: "hole_fraction".into(),
            points: rows
                .iter()
                .map(|r| (r.context_length as f64, r.hole_fraction))
                .collect(),
        }],
    };
    Ok(Artifacts {
        results_csv: context_csv(&rows),
        summary,
        plot,
        extra: vec![(
            format!("depth_context_{longest}.txt"),
            novel_depth.to_ascii_grid(),
        )],
    })
}

fn recipients(n: u32) -> Vec<VehicleId> {
    (1..=n).map(VehicleId).collect()
}

fn stats(xs: &[f64]) -> Value {
    if xs.is_empty() {
        return Value::Null;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    json!({ "count": xs.len(), "mean": mean, "max": max })
}

fn schedule(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let s = &cfg.schedule;
    let demands = random_demands(
        s.demand_rate,
        s.horizon,
        &recipients(s.recipients),
        s.elevated_fraction,
        cfg.seed,
    );
    let tl = build_timeline(&s.stack, &demands, s.horizon).map_err(run_err)?;
    let rates = tl.effective_rates();

    let (mut normal, mut elevated, mut met, mut unreachable) = (vec![], vec![], 0, 0);
    for d in &demands {
        match tl.e2e_latency(d, s.network_delay) {
            Ok((lat, ok)) => {
                met += ok as usize;
                match d.priority {
                    Priority::Normal => normal.push(lat),
                    Priority::Elevated => elevated.push(lat),
                }
            }
            Err(_) => unreachable += 1,
        }
    }
    let nominal = 1.0 / s.stack.proprietary_period;
    let summary = json!({
        "horizon": s.horizon,
        "slots": tl.slots.len(),
        "proprietary_hz": rates.proprietary_hz,
        "proprietary_nominal_hz": nominal,
        "open_hz": rates.open_hz,
        "swap_count": rates.swap_count,
        "utilization": rates.utilization,
        "demands": demands.len(),
        "served": tl.ledger.served_count(),
        "unserved": tl.ledger.unserved.len(),
        "deadline_met": met,
        "no_open_slot": unreachable,
        "latency_normal": stats(&normal),
        "latency_elevated": stats(&elevated),
        "note": format!(
            "proprietary stack runs at {} Hz effective against {} Hz nominal",
            rates.proprietary_hz, nominal
        ),
        "stack": s.stack,
    });
    Ok(Artifacts {
        results_csv: tl.to_csv(),
        summary,
        plot: timeline_plot(&tl),
        extra: vec![],
    })
}

fn timeline_plot(tl: &Timeline) -> Plot {
    let series = [
        (StackTag::Proprietary, "proprietary"),
        (StackTag::Open, "open"),
    ]
    .into_iter()
    .map(|(tag, name)| Series {
        name: name.into(),
        points: tl
            .slots
            .iter()
            .filter(|s| s.stack == tag)
            .map(|s| (s.start, s.duration))
            .collect(),
    })
    .collect();
    Plot {
        title: "Slot duration over time".into(),
        x_label: "start (s)".into(),
        y_label: "duration (s)".into(),
        series,
    }
}

fn billing_demo(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let (s, b) = (&cfg.schedule, &cfg.billing);
    let subs = recipients(b.recipients);
    let mut invoices: Vec<Invoice> = Vec::new();
    for k in 0..b.sharers {
        let sharer = VehicleId(100 + k);
        let demands = random_demands(
            s.demand_rate,
            s.horizon,
            &subs,
            s.elevated_fraction,
            rng::derive(cfg.seed, &[k as u64]),
        );
        let tl = build_timeline(&s.stack, &demands, s.horizon).map_err(run_err)?;
        invoices.extend(
            meter(&tl.ledger, &b.tariff, (0.0, s.horizon), sharer, &subs).map_err(run_err)?,
        );
    }
    let m = settle(&invoices);
    let invoice_sum: Money = invoices.iter().map(|i| i.total).sum();

    let mut csv = String::from("payer,payee,amount_minor\n");
    for (i, payer) in m.payers.iter().enumerate() {
        for (j, payee) in m.payees.iter().enumerate() {
            csv.push_str(&format!("{},{},{}\n", payer.0, payee.0, m.amounts[i][j].0));
        }
    }
    let series = m
        .payees
        .iter()
        .enumerate()
        .map(|(j, payee)| Series {
            name: format!("payee {}", payee.0),
            points: m
                .payers
                .iter()
                .enumerate()
                .map(|(i, payer)| (payer.0 as f64, m.amounts[i][j].0 as f64))
                .collect(),
        })
        .collect();
    let summary = json!({
        "sharers": b.sharers,
        "recipients": b.recipients,
        "invoices": invoices.len(),
        "grand_total_minor": m.total().0,
        "invoice_sum_minor": invoice_sum.0,
        "conserved": m.total() == invoice_sum,
        "grand_total": m.total().to_string(),
        "tariff": b.tariff,
    });
    let invoices_json = serde_json::to_string_pretty(&invoices).map_err(run_err)? + "\n";
    Ok(Artifacts {
        results_csv: csv,
        summary,
        plot: Plot {
            title: "Settlement by payer".into(),
            x_label: "payer id".into(),
            y_label: "amount owed (minor units)".into(),
            series,
        },
        extra: vec![("invoices.json".into(), invoices_json)],
    })
}
