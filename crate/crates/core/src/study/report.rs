use std::fmt::Write as _;

use super::config::Format;
use super::{NuBlock, StudyResult};

pub const CSV_HEADER: &str = "method,domain,nu,k,delta,level,H,h,j,omega,gamma,residual,order,trend,lower_bound_regime";

pub fn render(result: &StudyResult, format: Format) -> String {
    match format {
        Format::Csv => to_csv(result),
        Format::Markdown => to_markdown(result),
    }
}

/// `1/n` when the size is the reciprocal of an integer.
pub fn format_cell_size(h: f64) -> String {
    let n = (1.0 / h).round();
    if n >= 1.0 && (1.0 / n - h).abs() <= 1e-12 * h {
        format!("1/{n}")
    } else {
        format!("{h}")
    }
}

fn order_text(o: Option<f64>) -> String {
    o.map_or_else(|| "—".to_string(), |o| format!("{o:.2}"))
}

fn trend_text(b: &NuBlock, j: usize) -> &'static str {
    b.trends[j].map_or("", |t| t.mark())
}

pub fn to_csv(result: &StudyResult) -> String {
    let c = &result.config;
    let (k, delta) = if result.wg_params { (c.k.to_string(), c.delta.to_string()) } else { (String::new(), String::new()) };
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for b in &result.blocks {
        for rec in &b.levels {
            let prefix = format!("{},{},{},{},{},{}", c.method, c.domain.name(), b.nu, k, delta, rec.index + 1);
            match &rec.outcome {
                Ok(o) => {
                    let coarse = o.coarse_h.map_or_else(String::new, |h| h.to_string());
                    let regime = o.lower_bound_regime.map_or_else(String::new, |r| r.to_string());
                    for (j, (&g, &res)) in o.gammas.iter().zip(&o.residuals).enumerate() {
                        let _ = writeln!(
                            out,
                            "{prefix},{coarse},{},{},{:.9},{:.12},{:.3e},{},{},{regime}",
                            o.h,
                            j + 1,
                            g.max(0.0).sqrt(),
                            g,
                            res,
                            order_text(b.orders[j]),
                            trend_text(b, j),
                        );
                    }
                }
                Err(e) => {
                    let msg = e.replace([',', '\n'], ";");
                    let _ = writeln!(out, "{prefix},,,,ERROR: {msg},,,,,");
                }
            }
        }
    }
    out
}

pub fn to_markdown(result: &StudyResult) -> String {
    let c = &result.config;
    let mut out = String::new();
    let _ = write!(out, "## {} on {}", c.method, c.domain.name());
    if result.wg_params {
        let _ = write!(out, ", k = {}, delta = {}", c.k, c.delta);
    }
    let _ = writeln!(out, ", E = {}\n", c.young);
    let _ = writeln!(out, "Order is computed on gamma = omega^2 over the last three levels.\n");
    for b in &result.blocks {
        let _ = writeln!(out, "### nu = {}\n", b.nu);
        let two_grid = b.levels.iter().any(|l| l.outcome.as_ref().is_ok_and(|o| o.coarse_h.is_some()));
        let mut header = String::from(if two_grid { "| H / h |" } else { "| h |" });
        for rec in &b.levels {
            let cell = match &rec.outcome {
                Ok(o) => match o.coarse_h {
                    Some(hc) => format!(" {} / {} |", format_cell_size(hc), format_cell_size(o.h)),
                    None => format!(" {} |", format_cell_size(o.h)),
                },
                Err(_) => format!(" level {} |", rec.index + 1),
            };
            header.push_str(&cell);
        }
        header.push_str(" Order | Trend |");
        let _ = writeln!(out, "{header}");
        let _ = writeln!(out, "|{}", "---|".repeat(b.levels.len() + 3));
        for j in 0..c.m {
            let mut row = format!("| ω{} |", j + 1);
            for rec in &b.levels {
                let cell = match &rec.outcome {
                    Ok(o) => o.gammas.get(j).map_or_else(|| " — |".to_string(), |g| format!(" {:.6} |", g.max(0.0).sqrt())),
                    Err(_) => " ERROR |".to_string(),
                };
                row.push_str(&cell);
            }
            let _ = writeln!(row, " {} | {} |", order_text(b.orders[j]), trend_text(b, j));
            out.push_str(&row);
        }
        let regimes: Vec<String> = b
            .levels
            .iter()
            .filter_map(|l| l.outcome.as_ref().ok().and_then(|o| o.lower_bound_regime))
            .map(|r| if r { "yes".to_string() } else { "no".to_string() })
            .collect();
        if !regimes.is_empty() {
            let _ = writeln!(out, "\nLower-bound regime per level: {}", regimes.join(", "));
        }
        for rec in &b.levels {
            if let Err(e) = &rec.outcome {
                let _ = writeln!(out, "\nLevel {} failed: {e}", rec.index + 1);
            }
        }
        out.push('\n');
    }
    out
}
