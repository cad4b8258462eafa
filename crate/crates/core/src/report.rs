//! Plot-ready CSV and JSON renderings of a solve.
//!
//! CSV layout: an optional `# manifest <hash>` line, then the header
//!
//! ```text
//! t,m_y_0,..,sd_y_0,..,m_z_0_0,..,e_z2,alpha_t,y_abs_max
//! ```
//!
//! and one row per grid node (`N + 1` rows). `m_z_k_j` is the mean of
//! `Z^{k,j}`, `e_z2` is `E|Z_t|^2`, `alpha_t` the global bound `alpha(t)`
//! (empty when the scenario has no global certificate) and `y_abs_max` the
//! largest `|Y_t|` over paths.

use std::fmt::Write;

use crate::certificate::OdeBound;
use crate::meanfield::SolveResult;

pub fn csv_header(n: usize, d: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((0..n).map(|k| format!("m_y_{k}")));
    cols.extend((0..n).map(|k| format!("sd_y_{k}")));
    for k in 0..n {
        cols.extend((0..d).map(|j| format!("m_z_{k}_{j}")));
    }
    cols.extend(["e_z2", "alpha_t", "y_abs_max"].map(String::from));
    cols.join(",")
}

/// Shortest round-trip form; exponent notation outside `[1e-4, 1e15)`.
fn num(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

/// Renders the per-node table. Identical results give identical bytes.
pub fn solve_csv(result: &SolveResult, manifest_hash: Option<&str>) -> String {
    let grid = result.y.grid();
    let n = result.y.dims();
    let d = result.z.dims() / n;
    let sd = result.y.node_std();
    let e_z2 = result.z.node_mean_square();
    let y_max = result.y.node_abs_max();
    let ode = result
        .certificate
        .as_ref()
        .and_then(|c| c.global.as_ref())
        .and_then(|g| OdeBound::new(g.c_tilde, grid.horizon()).ok());

    let mut out = String::new();
    if let Some(h) = manifest_hash {
        writeln!(out, "# manifest {h}").unwrap();
    }
    writeln!(out, "{}", csv_header(n, d)).unwrap();
    for i in 0..grid.len() {
        let t = grid.time(i);
        let mut row = vec![num(t)];
        row.extend(result.m_y.value(i).iter().map(|v| num(*v)));
        row.extend(sd.value(i).iter().map(|v| num(*v)));
        row.extend(result.m_z.value(i).iter().map(|v| num(*v)));
        row.push(num(e_z2[i]));
        row.push(ode.as_ref().map(|o| num(o.alpha(t))).unwrap_or_default());
        row.push(num(y_max[i]));
        writeln!(out, "{}", row.join(",")).unwrap();
    }
    out
}

/// Pretty JSON of [`SolveResult::summary`].
pub fn solve_json(result: &SolveResult) -> serde_json::Result<String> {
    serde_json::to_string_pretty(&result.summary())
}
