use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{FitOutput, TypeDuality};
use crate::counterfactual::BoundsReport;
use crate::error::Result;
use crate::profit_id::ProfitTable;
use crate::proxy::ProxyModel;
use crate::technology::{profit_oracle, TechnologySpec};

/// Artifacts a report can draw on.
#[derive(Clone, Debug, Default)]
pub struct ReportInputs {
    pub table: Option<ProfitTable>,
    pub proxies: Option<ProxyModel>,
    pub bounds: Option<Vec<BoundsReport>>,
    pub fit: Option<FitOutput>,
    pub duality: Option<Vec<TypeDuality>>,
}

/// Optimal input and output of one type in the three-type economy at
/// `p = (0.12, 1)`, with the published brackets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldenRow {
    pub e: usize,
    pub input: f64,
    pub output: f64,
    pub profit: f64,
    pub input_bracket: (f64, f64),
    pub output_bracket: (f64, f64),
}

impl GoldenRow {
    pub fn within_brackets(&self) -> bool {
        let inside = |v: f64, (lo, hi): (f64, f64)| lo < v && v < hi;
        inside(self.input, self.input_bracket) && inside(self.output, self.output_bracket)
    }
}

pub const GOLDEN_PRICE: [f64; 2] = [0.12, 1.0];

const BRACKETS: [((f64, f64), (f64, f64)); 3] = [
    ((0.006, 0.007), (0.1, 0.2)),
    ((0.02, 0.03), (0.41, 0.5)),
    ((0.009, 0.01), (0.39, 0.40)),
];

pub fn golden_table() -> Result<Vec<GoldenRow>> {
    let tech = TechnologySpec::nonmonotone_supply_triple();
    (1..=3)
        .map(|e| {
            let (profit, y) = profit_oracle(&tech, e, &GOLDEN_PRICE, None)?;
            Ok(GoldenRow {
                e,
                input: -y[1],
                output: y[0],
                profit,
                input_bracket: BRACKETS[e - 1].0,
                output_bracket: BRACKETS[e - 1].1,
            })
        })
        .collect()
}

fn ext(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else if v > 0.0 {
        "+inf".into()
    } else {
        "-inf".into()
    }
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
    format!("({})", parts.join(", "))
}

fn golden_section(out: &mut String) {
    let _ = writeln!(out, "Nonmonotone supply at p = (0.12, 1)");
    let rows = match golden_table() {
        Ok(r) => r,
        Err(err) => {
            let _ = writeln!(out, "  unavailable: {err}\n");
            return;
        }
    };
    let _ = writeln!(out, "  type      input     output     profit  brackets");
    for r in &rows {
        let _ = writeln!(
            out,
            "  {:>4}  {:>9.6}  {:>9.6}  {:>9.6}  {}",
            r.e,
            r.input,
            r.output,
            r.profit,
            if r.within_brackets() { "ok" } else { "outside" }
        );
    }
    let _ = writeln!(out);
}

fn table_section(out: &mut String, t: &ProfitTable) {
    let _ = writeln!(
        out,
        "Identified profits ({} types, {} cells, {} skipped)",
        t.num_types,
        t.cells.len(),
        t.skipped.len()
    );
    let _ = writeln!(
        out,
        "  anchor cell {} isolates type {} at {:.6}",
        fmt_vec(&t.anchor.observables),
        t.anchor.e_star,
        t.anchor.value
    );
    for c in &t.cells {
        let mut line = format!("  {:<28} n={:<7}", fmt_vec(&c.observables), c.n);
        for e in 1..=t.num_types {
            match c.value(e) {
                Some(v) => {
                    let _ = write!(line, " {v:>10.6}");
                }
                None => line.push_str(" unidentified (low type)"),
            }
        }
        let _ = writeln!(out, "{}", line.trim_end());
    }
    let _ = writeln!(out);
}

fn proxy_section(out: &mut String, m: &ProxyModel) {
    let _ = writeln!(out, "Recovered price functions");
    for (j, g) in m.goods.iter().enumerate() {
        if g.observed_flag {
            let _ = writeln!(out, "  good {}: observed price", j + 1);
            continue;
        }
        let (lo, hi) = (g.grid[0], g.grid[g.grid.len() - 1]);
        let _ = writeln!(
            out,
            "  good {}: g({lo:.4}) = {:.6}, g({hi:.4}) = {:.6}",
            j + 1,
            g.g(lo),
            g.g(hi)
        );
    }
    for d in &m.diagnostics {
        let _ = writeln!(out, "  rank system condition number {:.3e}", d.condition_number);
    }
    for gap in &m.gaps {
        let _ = writeln!(out, "  good {} gaps at {}: {}", gap.good + 1, fmt_vec(&gap.points), gap.reason);
    }
    let _ = writeln!(out);
}

fn bound_text(v: f64, cert: Option<&crate::counterfactual::Certificate>) -> String {
    if v.is_finite() {
        return format!("{v:.6}");
    }
    match cert.and_then(|c| c.direction.as_ref()) {
        Some(dir) => format!("{} unbounded (certificate: ray {})", ext(v), fmt_vec(dir)),
        None => format!("{} unbounded", ext(v)),
    }
}

fn bounds_section(out: &mut String, reports: &[BoundsReport]) {
    let _ = writeln!(out, "Counterfactual bounds");
    for r in reports {
        let res = &r.result;
        if !res.feasible {
            let _ = writeln!(out, "  type {}: data infeasible", r.e);
            continue;
        }
        let _ = writeln!(
            out,
            "  type {}: lower {}, upper {}",
            r.e,
            bound_text(res.lower, res.lower_certificate.as_ref()),
            bound_text(res.upper, res.upper_certificate.as_ref())
        );
        if let Some(v) = r.verdict {
            let _ = writeln!(out, "    profitable: {}", serde_json::to_string(&v).unwrap_or_default().trim_matches('"'));
        }
    }
    let _ = writeln!(out);
}

fn fit_section(out: &mut String, f: &FitOutput) {
    let _ = writeln!(out, "Diewert fit (quantile {})", f.fit.options.quantile);
    for (k, b) in f.fit.coefficients.iter().enumerate() {
        let rows: Vec<String> = b.iter().map(|r| fmt_vec(r)).collect();
        let _ = writeln!(
            out,
            "  type {}: b = [{}], max residual {:.3e}",
            k + 1,
            rows.join(", "),
            f.fit.max_residual[k]
        );
    }
    let _ = writeln!(out);
}

fn duality_section(out: &mut String, d: &[TypeDuality]) {
    let _ = writeln!(out, "Duality check");
    for t in d {
        let r = &t.report;
        let verdict = serde_json::to_string(&r.verdict).unwrap_or_default();
        let mut line = format!(
            "  type {}: eta {:.6e}, hausdorff {:.6e}",
            t.e, r.eta, r.hausdorff
        );
        if let Some(o) = r.oracle_hausdorff {
            let _ = write!(line, ", geometric {o:.6e}");
        }
        if let Some(b) = r.bound {
            let _ = write!(line, ", bound {b:.6e}");
        }
        let _ = writeln!(out, "{line}, {}", verdict.trim_matches('"'));
    }
    let _ = writeln!(out);
}

pub fn render_report(inputs: &ReportInputs) -> String {
    let mut out = String::new();
    golden_section(&mut out);
    if let Some(t) = &inputs.table {
        table_section(&mut out, t);
    }
    if let Some(m) = &inputs.proxies {
        proxy_section(&mut out, m);
    }
    if let Some(b) = &inputs.bounds {
        bounds_section(&mut out, b);
    }
    if let Some(f) = &inputs.fit {
        fit_section(&mut out, f);
    }
    if let Some(d) = &inputs.duality {
        duality_section(&mut out, d);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_rows_sit_inside_brackets() {
        let rows = golden_table().unwrap();
        assert!(rows.iter().all(GoldenRow::within_brackets));
        assert!(rows[0].input < rows[2].input && rows[2].input < rows[1].input);
        assert!(rows[0].output < rows[2].output && rows[2].output < rows[1].output);
    }

    #[test]
    fn infinite_bounds_show_certificates() {
        let cert = crate::counterfactual::Certificate {
            point: vec![0.0, 0.0],
            direction: Some(vec![1.0, -1.0]),
        };
        let s = bound_text(f64::INFINITY, Some(&cert));
        assert_eq!(s, "+inf unbounded (certificate: ray (1.0000, -1.0000))");
    }
}
