use dmp_core::studies::{
    float_rows, gk_sign_change, green_comparison, hierarchical_matrices, limit_rate, limit_singular_values, linear_grid, log_grid,
    rational_rows, sweep_degenerate, sweep_gk, GreenRun, LimitBlocks, SignChange,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{parse_angle, Study};
use crate::commands::Verdict;
use crate::error::CliError;
use crate::output::{num, Run};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Spacing {
    Linear,
    Log,
}

/// Parses `lo:hi:count` or a comma-separated list of angles.
fn parse_grid(s: &str, spacing: Spacing) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    let grid = match parts.as_slice() {
        [lo, hi, count] => {
            let (lo, hi) = (parse_angle(lo).map_err(CliError::usage)?, parse_angle(hi).map_err(CliError::usage)?);
            let count: usize = count.trim().parse().map_err(|_| CliError::usage(format!("bad grid count in `{s}`")))?;
            if count == 0 || !lo.is_finite() || !hi.is_finite() || lo > hi || (spacing == Spacing::Log && lo <= 0.0) {
                return Err(CliError::usage(format!("invalid grid `{s}`")));
            }
            match spacing {
                Spacing::Linear => linear_grid(lo, hi, count),
                Spacing::Log => log_grid(lo, hi, count),
            }
        }
        [_] => s.split(',').map(|t| parse_angle(t).map_err(CliError::usage)).collect::<Result<_, _>>()?,
        _ => return Err(CliError::usage(format!("grid `{s}` must be lo:hi:count or a comma list"))),
    };
    if grid.is_empty() {
        return Err(CliError::usage("empty grid"));
    }
    Ok(grid)
}

fn green_rows<'a>(name: &'static str, r: &'a GreenRun) -> impl Iterator<Item = Vec<String>> + 'a {
    r.values.iter().enumerate().map(move |(i, &g)| {
        vec![name.to_string(), i.to_string(), num(r.vertices[i][0]), num(r.vertices[i][1]), r.is_boundary[i].to_string(), num(g)]
    })
}

#[derive(Serialize)]
struct GreenBrief {
    min_interior: f64,
    argmin: usize,
    value_at_n: f64,
}

impl From<&GreenRun> for GreenBrief {
    fn from(r: &GreenRun) -> Self {
        Self { min_interior: r.min_interior, argmin: r.argmin, value_at_n: r.value_at_n }
    }
}

pub fn study(which: &Study, run: &mut Run) -> Result<Verdict, CliError> {
    match which {
        Study::Fig4 { k, theta_grid, bracket_tol } => {
            if k.is_empty() || k.contains(&0) {
                return Err(CliError::usage("--k needs positive block sizes"));
            }
            let mut thetas = parse_grid(theta_grid, Spacing::Linear)?;
            thetas.sort_by(f64::total_cmp);
            let records = sweep_gk(k, &thetas)?;
            let brackets: Vec<Option<SignChange>> = k.par_iter().map(|&k| gk_sign_change(k, &thetas, *bracket_tol)).collect::<Result<_, _>>()?;
            let rows = records.iter().map(|r| {
                vec![r.k.to_string(), num(r.theta), num(r.min_entry), r.argmin.0.to_string(), r.argmin.1.to_string(), r.certified.to_string()]
            });
            run.write_csv("fig4.csv", &["k", "theta", "min_entry", "row", "col", "certified"], rows)?;
            for (kk, b) in k.iter().zip(&brackets) {
                match b {
                    Some(b) => println!("k = {kk}: sign change in [{:.6}, {:.6}] rad", b.below, b.above),
                    None => println!("k = {kk}: no sign change on the grid"),
                }
            }
            #[derive(Serialize)]
            struct Fig4<'a, R> {
                brackets: Vec<Option<SignChange>>,
                records: &'a R,
            }
            run.write_json("fig4.json", &Fig4 { brackets, records: &records })?;
        }
        Study::Fig8 { alpha_grid } => {
            let alphas = parse_grid(alpha_grid, Spacing::Log)?;
            let records = sweep_degenerate(&alphas)?;
            let rows = records.iter().map(|r| {
                vec![
                    num(r.alpha),
                    num(r.min_entry),
                    r.argmin.0.to_string(),
                    r.argmin.1.to_string(),
                    (r.min_entry > 0.0).to_string(),
                    num(r.condition),
                ]
            });
            run.write_csv("fig8.csv", &["alpha", "min_entry", "row", "col", "certified", "condition"], rows)?;
            let smallest = records.iter().min_by(|a, b| a.min_entry.total_cmp(&b.min_entry)).copied();
            let all_positive = records.iter().all(|r| r.min_entry > 0.0);
            if let Some(s) = smallest {
                println!("{} alphas, all positive: {all_positive}; smallest entry {:.6e} at alpha {:.6e}", records.len(), s.min_entry, s.alpha);
            }
            #[derive(Serialize)]
            struct Fig8<'a, S, R> {
                all_positive: bool,
                smallest: S,
                records: &'a R,
            }
            run.write_json("fig8.json", &Fig8 { all_positive, smallest, records: &records })?;
        }
        Study::Appendix { alpha } => {
            if alpha.is_empty() {
                return Err(CliError::usage("--alpha needs at least one value"));
            }
            let exact = LimitBlocks::new().exact_limit()?;
            let bundles = alpha.par_iter().map(|&a| hierarchical_matrices(a)).collect::<Result<Vec<_>, _>>()?;
            let rate = if alpha.len() >= 2 { Some(limit_rate(alpha)?) } else { None };
            #[derive(Serialize)]
            struct Exact {
                a_inv: Vec<Vec<String>>,
                c0_inv: Vec<Vec<String>>,
                a_inv_r0: Vec<Vec<String>>,
                r0t_a_inv_r0: Vec<Vec<String>>,
                t0: Vec<Vec<String>>,
                t0_float: Vec<Vec<f64>>,
            }
            #[derive(Serialize)]
            struct Appendix<B, R> {
                exact: Exact,
                t0_singular_values: Vec<f64>,
                rate: R,
                bundles: B,
            }
            let out = Appendix {
                exact: Exact {
                    a_inv: rational_rows(&exact.a_inv),
                    c0_inv: rational_rows(&exact.c0_inv),
                    a_inv_r0: rational_rows(&exact.a_inv_r0),
                    r0t_a_inv_r0: rational_rows(&exact.r0t_a_inv_r0),
                    t0: rational_rows(&exact.t0),
                    t0_float: float_rows(&exact.t0.to_f64()),
                },
                t0_singular_values: limit_singular_values()?,
                rate: &rate,
                bundles: &bundles,
            };
            run.write_json("appendix.json", &out)?;
            run.write_csv("limit.csv", &["alpha", "error"], bundles.iter().map(|b| vec![num(b.alpha), num(b.limit_error)]))?;
            for b in &bundles {
                println!("alpha = {:.3e}: |S^-1 - T0| = {:.3e}, factorization residual {:.1e}", b.alpha, b.limit_error, b.factorization_residual);
            }
            if let Some(r) = rate {
                println!("log-log slope {:.4}", r.slope);
            }
        }
        Study::Fig10 { alpha, n } => {
            let g = green_comparison(*alpha, *n)?;
            let rows = green_rows("one-layer-inside", &g.one_layer_inside).chain(green_rows("at-boundary", &g.at_boundary));
            run.write_csv("fig10.csv", &["placement", "vertex", "x", "y", "boundary", "g"], rows)?;
            #[derive(Serialize)]
            struct Fig10 {
                alpha: f64,
                n: usize,
                one_layer_inside: GreenBrief,
                at_boundary: GreenBrief,
            }
            println!(
                "one layer inside: min {:.6e}; at boundary: g(N) = {:.6e}",
                g.one_layer_inside.min_interior, g.at_boundary.value_at_n
            );
            run.write_json(
                "fig10.json",
                &Fig10 { alpha: g.alpha, n: g.n, one_layer_inside: (&g.one_layer_inside).into(), at_boundary: (&g.at_boundary).into() },
            )?;
        }
    }
    Ok(Verdict::Ok)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0:1:3", Spacing::Linear).unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_grid("0.1,0.2", Spacing::Log).unwrap(), vec![0.1, 0.2]);
        assert_eq!(parse_grid("1e-4:pi/6:50", Spacing::Log).unwrap().len(), 50);
        assert!(parse_grid("0:1:3", Spacing::Log).is_err());
        assert!(parse_grid("1:0:3", Spacing::Linear).is_err());
        assert!(parse_grid("0:1", Spacing::Linear).is_err());
    }
}
