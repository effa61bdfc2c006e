//! Output rendering for the three formats.
//!
//! CSV carries 12 significant digits; json-text carries the raw f64 values
//! (same numbers, full precision). Human output is a key/value listing.

use battsize::ctmc_oracle::{JointStationaryDistribution, OracleSolution};
use battsize::format::fmt_sig;
use battsize::queue_analytics::{AnalyticSolution, NodeRates};
use battsize::simulator::{MetricSummary, SimulationReport};
use battsize::sizing::SizingResult;
use battsize::sweep::{Cell, SweepTable};
use serde_json::{json, Map, Value};

use crate::Format;

fn kv_lines(pairs: &[(&str, String)]) -> String {
    let width = pairs.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = String::new();
    for (k, v) in pairs {
        out.push_str(&format!("{k:<width$} = {v}\n"));
    }
    out
}

fn csv_one_row(header: &[&str], cells: &[String]) -> String {
    format!("{}\n{}\n", header.join(","), cells.join(","))
}

fn opt_num(v: Option<f64>) -> String {
    v.map(fmt_sig).unwrap_or_default()
}

fn json_opt(v: Option<f64>) -> Value {
    v.map_or(Value::Null, |x| json!(x))
}

pub fn sizing(
    gamma: f64,
    alpha: f64,
    beta: f64,
    result: &SizingResult,
    ep_size: Option<f64>,
    physical: Option<f64>,
    format: Format,
) -> String {
    match format {
        Format::Human => {
            let mut pairs = vec![
                ("gamma", fmt_sig(gamma)),
                ("alpha", fmt_sig(alpha)),
                ("beta", fmt_sig(beta)),
                ("k_alpha", opt_num(result.k_alpha_real)),
                (
                    "k_beta",
                    result
                        .k_beta_real
                        .map(fmt_sig)
                        .unwrap_or_else(|| "infeasible".into()),
                ),
                ("binding", result.binding.to_string()),
                ("capacity", result.capacity.to_string()),
            ];
            if let (Some(s), Some(p)) = (ep_size, physical) {
                pairs.push(("ep_size", fmt_sig(s)));
                pairs.push(("physical_capacity", fmt_sig(p)));
            }
            kv_lines(&pairs)
        }
        Format::Csv => csv_one_row(
            &[
                "gamma",
                "alpha",
                "beta",
                "k_alpha",
                "k_beta",
                "binding",
                "capacity",
                "ep_size",
                "physical_capacity",
            ],
            &[
                fmt_sig(gamma),
                fmt_sig(alpha),
                fmt_sig(beta),
                opt_num(result.k_alpha_real),
                opt_num(result.k_beta_real),
                result.binding.to_string(),
                result.capacity.to_string(),
                opt_num(ep_size),
                opt_num(physical),
            ],
        ),
        Format::JsonText => {
            let v = json!({
                "gamma": gamma,
                "alpha": alpha,
                "beta": beta,
                "k_alpha": json_opt(result.k_alpha_real),
                "k_beta": json_opt(result.k_beta_real),
                "binding": result.binding.to_string(),
                "capacity": result.capacity,
                "ep_size": json_opt(ep_size),
                "physical_capacity": json_opt(physical),
            });
            format!("{}\n", serde_json::to_string_pretty(&v).unwrap())
        }
    }
}

pub fn analysis(rates: &NodeRates, s: &AnalyticSolution, format: Format) -> String {
    let fields: [(&str, f64); 10] = [
        ("lambda_d", rates.lambda_d()),
        ("lambda_e", rates.lambda_e()),
        ("lambda_c", rates.lambda_c()),
        ("gamma", rates.gamma()),
        ("p_d0", s.p_d0),
        ("p_e0", s.p_e0),
        ("p_ek", s.p_ek),
        ("rho_d", s.rho_d),
        ("rho_e", s.rho_e),
        ("zeta", s.zeta),
    ];
    match format {
        Format::Human => {
            let mut pairs = vec![("capacity", s.capacity.to_string())];
            pairs.extend(fields.iter().map(|(k, v)| (*k, fmt_sig(*v))));
            kv_lines(&pairs)
        }
        Format::Csv => {
            let mut header = vec!["capacity"];
            header.extend(fields.iter().map(|(k, _)| *k));
            let mut cells = vec![s.capacity.to_string()];
            cells.extend(fields.iter().map(|(_, v)| fmt_sig(*v)));
            csv_one_row(&header, &cells)
        }
        Format::JsonText => {
            let mut map = Map::new();
            map.insert("capacity".into(), json!(s.capacity));
            for (k, v) in fields {
                map.insert(k.into(), json!(v));
            }
            format!("{}\n", serde_json::to_string_pretty(&Value::Object(map)).unwrap())
        }
    }
}

fn metric_rows(report: &SimulationReport) -> Vec<(&'static str, &MetricSummary)> {
    vec![
        ("p_e0", &report.p_e0),
        ("p_ek", &report.p_ek),
        ("p_d0", &report.p_d0),
        ("ep_blocked_fraction", &report.ep_blocked_fraction),
        ("mean_data_queue_length", &report.mean_data_queue_length),
    ]
}

pub fn simulation(report: &SimulationReport, format: Format) -> String {
    match format {
        Format::Human => {
            let mut out = kv_lines(&[
                ("rng", report.rng_algorithm.to_string()),
                ("base_seed", report.config.base_seed.to_string()),
                ("replications", report.config.replications.to_string()),
                ("horizon", fmt_sig(report.config.horizon)),
                ("transfers_total", report.transfers_total.to_string()),
            ]);
            for w in &report.warnings {
                out.push_str(&format!("warning: {w}\n"));
            }
            for (name, m) in metric_rows(report) {
                out.push_str(&format!(
                    "{name}: mean={} se={} ci99=[{}, {}]\n",
                    fmt_sig(m.mean),
                    opt_num(m.std_error),
                    opt_num(m.ci99_low),
                    opt_num(m.ci99_high),
                ));
            }
            out
        }
        Format::Csv => {
            let mut out = String::from("metric,mean,std_error,ci99_low,ci99_high\n");
            for (name, m) in metric_rows(report) {
                out.push_str(&format!(
                    "{name},{},{},{},{}\n",
                    fmt_sig(m.mean),
                    opt_num(m.std_error),
                    opt_num(m.ci99_low),
                    opt_num(m.ci99_high),
                ));
            }
            out
        }
        Format::JsonText => format!("{}\n", serde_json::to_string_pretty(report).unwrap()),
    }
}

pub fn oracle(
    rates: &NodeRates,
    capacity: u32,
    dmax: u32,
    dist: &JointStationaryDistribution,
    marginals: &OracleSolution,
    format: Format,
) -> String {
    let nums: [(&str, f64); 8] = [
        ("lambda_d", rates.lambda_d()),
        ("lambda_e", rates.lambda_e()),
        ("lambda_c", rates.lambda_c()),
        ("p_e0_exact", marginals.p_e0_exact),
        ("p_ek_exact", marginals.p_ek_exact),
        ("p_d0_exact", marginals.p_d0_exact),
        ("residual_norm", dist.residual_norm),
        ("truncation_mass", dist.truncation_mass),
    ];
    match format {
        Format::Human => {
            let mut pairs = vec![
                ("capacity", capacity.to_string()),
                ("dmax", dmax.to_string()),
            ];
            pairs.extend(nums.iter().map(|(k, v)| (*k, fmt_sig(*v))));
            kv_lines(&pairs)
        }
        Format::Csv => {
            let mut header = vec!["capacity", "dmax"];
            header.extend(nums.iter().map(|(k, _)| *k));
            let mut cells = vec![capacity.to_string(), dmax.to_string()];
            cells.extend(nums.iter().map(|(_, v)| fmt_sig(*v)));
            csv_one_row(&header, &cells)
        }
        Format::JsonText => {
            let mut map = Map::new();
            map.insert("capacity".into(), json!(capacity));
            map.insert("dmax".into(), json!(dmax));
            for (k, v) in nums {
                map.insert(k.into(), json!(v));
            }
            format!("{}\n", serde_json::to_string_pretty(&Value::Object(map)).unwrap())
        }
    }
}

pub fn table(t: &SweepTable, format: Format) -> String {
    match format {
        // CSV is the canonical table form; human output is the same bytes.
        Format::Human | Format::Csv => t.to_csv(),
        Format::JsonText => {
            let cols: Vec<String> = t.columns.iter().map(|c| c.name.clone()).collect();
            let rows: Vec<Value> = t
                .rows
                .iter()
                .map(|row| {
                    let mut map = Map::new();
                    for (c, cell) in cols.iter().zip(row.iter()) {
                        let v = match cell {
                            Cell::Num(x) => json!(x),
                            Cell::Int(i) => json!(i),
                            Cell::Text(s) => json!(s),
                            Cell::Empty => Value::Null,
                        };
                        map.insert(c.clone(), v);
                    }
                    Value::Object(map)
                })
                .collect();
            let v = json!({
                "table": t.name,
                "provenance": t.provenance.iter()
                    .map(|(k, v)| (k.clone(), Value::String(v.clone())))
                    .collect::<Map<_, _>>(),
            });
            // Merge rows in while keeping a stable field order.
            let mut obj = v.as_object().unwrap().clone();
            obj.insert("rows".into(), Value::Array(rows));
            format!("{}\n", serde_json::to_string_pretty(&Value::Object(obj)).unwrap())
        }
    }
}
