use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::results::{ResultRow, Status};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotPoint {
    pub x: f64,
    pub mean: f64,
    pub std: f64,
}

/// One line of a figure: points sorted by `x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    pub suite: String,
    pub label: String,
    pub x_axis: String,
    pub y_axis: String,
    pub points: Vec<PlotPoint>,
}

/// `(recipes, ingredients)` from a `chefworld-RxI` game name.
fn chef_dims(game: &str) -> Option<(f64, f64)> {
    let (r, i) = game.strip_prefix("chefworld-")?.split_once('x')?;
    Some((r.parse().ok()?, i.parse().ok()?))
}

/// Groups computed rows into `(x, mean, std)` series; rows landing on the
/// same `x` of a series are merged.
///
/// POMCP and PBVI rows plot value against ingredient count, table1 rows
/// wall-clock against recipe count, IRL rows success against recipe count,
/// and robustness rows success against the training model's position in the
/// sweep, one series per (human, actual model).
pub fn plot_series(rows: &[ResultRow]) -> Vec<PlotSeries> {
    let mut training_order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<(String, String), PlotSeries> = BTreeMap::new();
    for row in rows.iter().filter(|r| r.status == Status::Ok) {
        let dims = chef_dims(&row.game);
        let (x_axis, x, y_axis, mean, label) = match row.suite.as_str() {
            "pomcp" | "pbvi" => ("ingredients", dims.map(|d| d.1), "value", row.value, row.solver.clone()),
            "table1" => ("recipes", dims.map(|d| d.0), "wall_clock_s", Some(row.wall_clock_s), row.solver.clone()),
            "irl" => ("recipes", dims.map(|d| d.0), "success_rate", row.success_rate, row.solver.clone()),
            "robustness" => {
                let pos = match training_order.iter().position(|m| *m == row.training_model) {
                    Some(p) => p,
                    None => {
                        training_order.push(row.training_model.clone());
                        training_order.len() - 1
                    }
                };
                let label = format!("{} human, actual {}", row.human, row.actual_model);
                ("training_model", Some(pos as f64), "success_rate", row.success_rate, label)
            }
            _ => continue,
        };
        let (Some(x), Some(mean)) = (x, mean) else { continue };
        groups
            .entry((row.suite.clone(), label.clone()))
            .or_insert_with(|| PlotSeries {
                suite: row.suite.clone(),
                label,
                x_axis: x_axis.into(),
                y_axis: y_axis.into(),
                points: Vec::new(),
            })
            .points
            .push(PlotPoint { x, mean, std: row.std.unwrap_or(0.0) });
    }
    let mut out: Vec<PlotSeries> = groups.into_values().collect();
    for s in &mut out {
        s.points.sort_by(|a, b| a.x.total_cmp(&b.x));
        s.points = merge_repeats(&s.points);
    }
    out
}

/// Collapses points sharing an `x` into their mean, with the spread of the
/// merged means as `std`. Single points keep their own `std`.
fn merge_repeats(points: &[PlotPoint]) -> Vec<PlotPoint> {
    points
        .chunk_by(|a, b| a.x == b.x)
        .map(|run| match run {
            [p] => *p,
            _ => {
                let n = run.len() as f64;
                let mean = run.iter().map(|p| p.mean).sum::<f64>() / n;
                let var = run.iter().map(|p| (p.mean - mean).powi(2)).sum::<f64>() / n;
                PlotPoint { x: run[0].x, mean, std: var.sqrt() }
            }
        })
        .collect()
}
