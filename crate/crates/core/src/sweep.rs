//! Parameter sweeps as machine-readable tables.
//!
//! Sweeps cover the sizing curves (capacity versus `gamma` for several
//! depletion targets, capacity versus `(alpha, beta)` at fixed `gamma`, and
//! the crossing of the two sizing formulas at `beta = 1 - gamma`), plus a
//! three-way validation grid putting the decoupled closed form, the exact
//! joint-chain oracle, and the simulator side by side with gap columns.
//!
//! Tables render to CSV (UTF-8, '.' decimal separator, '#'-prefixed
//! provenance header) and optionally to a minimal SVG line chart. Output is
//! byte-identical across reruns with identical parameters and seeds.

use crate::ctmc_oracle::{self, JointChainSpec, OracleError};
use crate::format::fmt_sig;
use crate::queue_analytics::{analyze_node, AnalyticsError, NodeRates};
use crate::simulator::{replication_seed, run_experiment, SimulationConfig};
use crate::sizing::{binding_constraint, k_alpha, k_beta};

/// Ratio `lambda_E / lambda_C` used to reconstruct absolute rates from a
/// `gamma` grid point in the validation grid. Half keeps the data queue
/// stable across the default grids (at `gamma = 0.9`, `K = 3` the data
/// utilization is still about 0.83).
pub const DEFAULT_GAMMA_E: f64 = 0.5;

/// Default `gamma` grid: 0.05 to 0.95 in steps of 0.05.
pub fn default_gamma_grid() -> Vec<f64> {
    (1..=19).map(|i| i as f64 * 0.05).collect()
}

/// Default target grid for `alpha` and `beta`.
pub fn default_target_grid() -> Vec<f64> {
    vec![0.01, 0.02, 0.05, 0.1, 0.2, 0.3]
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
            Cell::Int(i) => Some(*i as f64),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            _ => None,
        }
    }

    fn render(&self) -> String {
        match self {
            Cell::Num(x) => fmt_sig(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    /// Unit label; empty for dimensionless quantities.
    pub unit: String,
}

impl Column {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            unit: String::new(),
        }
    }

    fn with_unit(name: &str, unit: &str) -> Self {
        Self {
            name: name.to_string(),
            unit: unit.to_string(),
        }
    }

    fn header(&self) -> String {
        if self.unit.is_empty() {
            self.name.clone()
        } else {
            format!("{}[{}]", self.name, self.unit)
        }
    }
}

/// A rectangular result table with a provenance header.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub name: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
    /// Key/value pairs written as `#`-prefixed comment lines.
    pub provenance: Vec<(String, String)>,
}

impl SweepTable {
    fn new(name: &str, columns: Vec<Column>) -> Self {
        Self {
            name: name.to_string(),
            columns,
            rows: Vec::new(),
            provenance: vec![
                ("table".into(), name.to_string()),
                (
                    "generator".into(),
                    format!("battsize {}", env!("CARGO_PKG_VERSION")),
                ),
            ],
        }
    }

    fn push_provenance(&mut self, key: &str, value: String) {
        self.provenance.push((key.to_string(), value));
    }

    fn push_row(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        debug_assert!(row
            .iter()
            .all(|c| c.as_f64().map_or(true, |x| x.is_finite())));
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.provenance {
            out.push_str(&format!("# {k}={v}\n"));
        }
        let headers: Vec<String> = self.columns.iter().map(Column::header).collect();
        out.push_str(&headers.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Extracts `(x, y)` series for plotting, one series per distinct value
    /// of `group_by` (or a single unnamed series). Rows with non-numeric
    /// cells in either column are skipped.
    pub fn series(
        &self,
        x_col: &str,
        y_col: &str,
        group_by: Option<&str>,
    ) -> Vec<(String, Vec<(f64, f64)>)> {
        let xi = self.column_index(x_col).expect("x column");
        let yi = self.column_index(y_col).expect("y column");
        let gi = group_by.map(|g| self.column_index(g).expect("group column"));
        let mut out: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
        for row in &self.rows {
            let (Some(x), Some(y)) = (row[xi].as_f64(), row[yi].as_f64()) else {
                continue;
            };
            let label = match gi {
                Some(i) => row[i].render(),
                None => y_col.to_string(),
            };
            match out.iter_mut().find(|(l, _)| *l == label) {
                Some((_, pts)) => pts.push((x, y)),
                None => out.push((label, vec![(x, y)])),
            }
        }
        out
    }
}

/// Minimal SVG line chart: fixed 720x480 canvas, one polyline per series,
/// axis lines and min/max tick labels. No interactivity.
pub fn svg_line_chart(
    series: &[(String, Vec<(f64, f64)>)],
    x_label: &str,
    y_label: &str,
    title: &str,
) -> String {
    const W: f64 = 720.0;
    const H: f64 = 480.0;
    const M: f64 = 60.0; // margin
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

    let pts: Vec<(f64, f64)> = series.iter().flat_map(|(_, p)| p.iter().copied()).collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if pts.is_empty() {
        x0 = 0.0;
        x1 = 1.0;
        y0 = 0.0;
        y1 = 1.0;
    }
    if x1 - x0 < 1e-300 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-300 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{title}</text>\n",
        W / 2.0
    );
    svg.push_str(&format!(
        "<line x1=\"{M}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
         <line x1=\"{M}\" y1=\"{M}\" x2=\"{M}\" y2=\"{}\" stroke=\"black\"/>\n",
        H - M,
        W - M,
        H - M,
        H - M
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\">{x_label}</text>\n\
         <text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\" \
         transform=\"rotate(-90 16 {})\">{y_label}</text>\n",
        W / 2.0,
        H - 16.0,
        H / 2.0,
        H / 2.0
    ));
    for (txt, x, y, anchor) in [
        (fmt_sig(x0), M, H - M + 16.0, "middle"),
        (fmt_sig(x1), W - M, H - M + 16.0, "middle"),
        (fmt_sig(y0), M - 6.0, H - M, "end"),
        (fmt_sig(y1), M - 6.0, M, "end"),
    ] {
        svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{y}\" text-anchor=\"{anchor}\" font-size=\"10\">{txt}</text>\n"
        ));
    }
    for (i, (label, points)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            path.join(" ")
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"{color}\">{label}</text>\n",
            W - M + 4.0,
            M + 14.0 * i as f64
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Capacity-for-depletion curves: one row per `(alpha, gamma)`.
pub fn sweep_k_alpha(gamma_grid: &[f64], alphas: &[f64]) -> SweepTable {
    let mut table = SweepTable::new(
        "k_alpha",
        vec![
            Column::new("gamma"),
            Column::new("alpha"),
            Column::with_unit("k_alpha", "packets"),
        ],
    );
    table.push_provenance("gamma_grid", grid_str(gamma_grid));
    table.push_provenance("alphas", grid_str(alphas));
    for &alpha in alphas {
        for &gamma in gamma_grid {
            table.push_row(vec![
                Cell::Num(gamma),
                Cell::Num(alpha),
                Cell::Num(k_alpha(gamma, alpha)),
            ]);
        }
    }
    table
}

/// Capacity-for-overflow surface at fixed `gamma`: one row per
/// `(alpha, beta)`, with infeasible combinations carrying a status marker
/// instead of a number.
pub fn sweep_k_beta(alpha_grid: &[f64], beta_grid: &[f64], gamma: f64) -> SweepTable {
    let mut table = SweepTable::new(
        "k_beta",
        vec![
            Column::new("alpha"),
            Column::new("beta"),
            Column::with_unit("k_beta", "packets"),
            Column::new("status"),
        ],
    );
    table.push_provenance("gamma", fmt_sig(gamma));
    table.push_provenance("alpha_grid", grid_str(alpha_grid));
    table.push_provenance("beta_grid", grid_str(beta_grid));
    for &alpha in alpha_grid {
        for &beta in beta_grid {
            let row = match k_beta(gamma, alpha, beta) {
                Ok(k) => vec![
                    Cell::Num(alpha),
                    Cell::Num(beta),
                    Cell::Num(k),
                    Cell::Text("ok".into()),
                ],
                Err(_) => vec![
                    Cell::Num(alpha),
                    Cell::Num(beta),
                    Cell::Empty,
                    Cell::Text("infeasible".into()),
                ],
            };
            table.push_row(row);
        }
    }
    table
}

/// Both sizing formulas along a `beta` grid at fixed `(gamma, alpha)`; the
/// curves cross at `beta = 1 - gamma`.
pub fn compare_sizing(gamma: f64, alpha: f64, beta_grid: &[f64]) -> SweepTable {
    let mut table = SweepTable::new(
        "compare_sizing",
        vec![
            Column::new("beta"),
            Column::with_unit("k_alpha", "packets"),
            Column::with_unit("k_beta", "packets"),
            Column::new("binding"),
            Column::new("status"),
        ],
    );
    table.push_provenance("gamma", fmt_sig(gamma));
    table.push_provenance("alpha", fmt_sig(alpha));
    table.push_provenance("beta_grid", grid_str(beta_grid));
    let ka = k_alpha(gamma, alpha);
    for &beta in beta_grid {
        let binding = binding_constraint(gamma, beta);
        let row = match k_beta(gamma, alpha, beta) {
            Ok(kb) => vec![
                Cell::Num(beta),
                Cell::Num(ka),
                Cell::Num(kb),
                Cell::Text(binding.to_string()),
                Cell::Text("ok".into()),
            ],
            Err(_) => vec![
                Cell::Num(beta),
                Cell::Num(ka),
                Cell::Empty,
                Cell::Text(binding.to_string()),
                Cell::Text("infeasible".into()),
            ],
        };
        table.push_row(row);
    }
    table
}

/// Simulation settings applied to every cell of the validation grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationTemplate {
    /// `lambda_E / lambda_C` used to lift a `gamma` point to absolute rates.
    pub gamma_e: f64,
    pub horizon: f64,
    pub warmup_fraction: f64,
    pub replications: u32,
    pub base_seed: u64,
    pub mass_budget: f64,
}

impl Default for ValidationTemplate {
    fn default() -> Self {
        Self {
            gamma_e: DEFAULT_GAMMA_E,
            horizon: 1e5,
            warmup_fraction: 0.1,
            replications: 30,
            base_seed: 42,
            mass_budget: ctmc_oracle::DEFAULT_MASS_BUDGET,
        }
    }
}

/// Absolute gap in analytic vs oracle depletion probability above which a
/// cell is flagged in the validation report.
pub const GAP_FLAG_THRESHOLD: f64 = 0.05;

/// Per-cell comparison of the decoupled closed form, the exact joint-chain
/// oracle, and the simulator. Unstable or untruncatable cells are marked in
/// the status column and carry empty numeric cells.
pub fn validation_grid(
    gamma_grid: &[f64],
    k_grid: &[u32],
    lambda_c: f64,
    template: &ValidationTemplate,
) -> SweepTable {
    let mut table = SweepTable::new(
        "validation_grid",
        vec![
            Column::new("gamma"),
            Column::with_unit("capacity", "packets"),
            Column::with_unit("lambda_d", "1/s"),
            Column::with_unit("lambda_e", "1/s"),
            Column::with_unit("lambda_c", "1/s"),
            Column::new("status"),
            Column::new("dmax"),
            Column::new("analytic_p_e0"),
            Column::new("analytic_p_ek"),
            Column::new("oracle_p_e0"),
            Column::new("oracle_p_ek"),
            Column::new("oracle_p_d0"),
            Column::new("sim_p_e0"),
            Column::new("sim_p_e0_se"),
            Column::new("sim_p_ek"),
            Column::new("sim_p_ek_se"),
            Column::new("sim_p_d0"),
            Column::new("sim_p_d0_se"),
            Column::new("gap_p_e0"),
            Column::new("gap_p_ek"),
            Column::new("gap_flag"),
        ],
    );
    table.push_provenance("gamma_grid", grid_str(gamma_grid));
    table.push_provenance(
        "k_grid",
        k_grid
            .iter()
            .map(|k| k.to_string())
            .collect::<Vec<_>>()
            .join(" "),
    );
    table.push_provenance("lambda_c", fmt_sig(lambda_c));
    table.push_provenance("gamma_e", fmt_sig(template.gamma_e));
    table.push_provenance("horizon", fmt_sig(template.horizon));
    table.push_provenance("replications", template.replications.to_string());
    table.push_provenance("base_seed", template.base_seed.to_string());
    table.push_provenance("rng", crate::simulator::RNG_ALGORITHM.to_string());

    let mut cell_index = 0u32;
    for &gamma in gamma_grid {
        for &capacity in k_grid {
            let lambda_e = template.gamma_e * lambda_c;
            let lambda_d = gamma * lambda_e;
            let head = |status: &str| {
                vec![
                    Cell::Num(gamma),
                    Cell::Int(capacity as i64),
                    Cell::Num(lambda_d),
                    Cell::Num(lambda_e),
                    Cell::Num(lambda_c),
                    Cell::Text(status.into()),
                ]
            };
            let blank_tail = || vec![Cell::Empty; 15];
            let rates = match NodeRates::new(lambda_d, lambda_e, lambda_c) {
                Ok(r) => r,
                Err(_) => {
                    let mut row = head("invalid_rates");
                    row.extend(blank_tail());
                    table.push_row(row);
                    cell_index += 1;
                    continue;
                }
            };
            let analytic = match analyze_node(&rates, capacity) {
                Ok(a) => a,
                Err(AnalyticsError::Unstable { .. }) => {
                    let mut row = head("unstable");
                    row.extend(blank_tail());
                    table.push_row(row);
                    cell_index += 1;
                    continue;
                }
                Err(e) => {
                    let mut row = head(&format!("analytic_error:{e}"));
                    row.extend(blank_tail());
                    table.push_row(row);
                    cell_index += 1;
                    continue;
                }
            };
            let oracle = ctmc_oracle::choose_truncation(&rates, capacity, template.mass_budget)
                .and_then(|dmax| {
                    let dist =
                        ctmc_oracle::stationary_distribution(&JointChainSpec::new(
                            rates, capacity, dmax,
                        ))?;
                    Ok((dmax, ctmc_oracle::oracle_marginals(&dist)))
                });
            let (dmax, marginals) = match oracle {
                Ok(v) => v,
                Err(OracleError::TruncationLimitExceeded { .. }) => {
                    let mut row = head("truncation_exceeded");
                    row.extend(blank_tail());
                    table.push_row(row);
                    cell_index += 1;
                    continue;
                }
                Err(e) => {
                    let mut row = head(&format!("oracle_error:{e}"));
                    row.extend(blank_tail());
                    table.push_row(row);
                    cell_index += 1;
                    continue;
                }
            };
            let sim_config = SimulationConfig {
                lambda_d,
                lambda_e,
                lambda_c,
                capacity,
                horizon: template.horizon,
                warmup_fraction: template.warmup_fraction,
                replications: template.replications,
                base_seed: replication_seed(template.base_seed, cell_index),
            };
            let report = run_experiment(&sim_config).expect("validated config");
            let gap_e0 = (analytic.p_e0 - marginals.p_e0_exact).abs();
            let gap_ek = (analytic.p_ek - marginals.p_ek_exact).abs();
            let flag = if gap_e0 > GAP_FLAG_THRESHOLD {
                format!("DECOUPLING_GAP_EXCEEDS_{GAP_FLAG_THRESHOLD}")
            } else {
                "ok".to_string()
            };
            let se = |m: &crate::simulator::MetricSummary| {
                m.std_error.map(Cell::Num).unwrap_or(Cell::Empty)
            };
            let mut row = head("ok");
            row.extend(vec![
                Cell::Int(dmax as i64),
                Cell::Num(analytic.p_e0),
                Cell::Num(analytic.p_ek),
                Cell::Num(marginals.p_e0_exact),
                Cell::Num(marginals.p_ek_exact),
                Cell::Num(marginals.p_d0_exact),
                Cell::Num(report.p_e0.mean),
                se(&report.p_e0),
                Cell::Num(report.p_ek.mean),
                se(&report.p_ek),
                Cell::Num(report.p_d0.mean),
                se(&report.p_d0),
                Cell::Num(gap_e0),
                Cell::Num(gap_ek),
                Cell::Text(flag),
            ]);
            table.push_row(row);
            cell_index += 1;
        }
    }
    table
}

fn grid_str(grid: &[f64]) -> String {
    grid.iter().map(|x| fmt_sig(*x)).collect::<Vec<_>>().join(" ")
}
