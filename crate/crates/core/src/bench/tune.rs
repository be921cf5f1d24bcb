//! Seeded random search over a declared hyperparameter grid, scored by mean
//! cross-validated macro-F1.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use super::config::{family_prefix, Grid, RunConfig};
use super::{cross_validate, summarize, MetricSummary, Prepared};
use crate::corpus;
use crate::error::{Error, Result};
use crate::label::Label;
use crate::model_store::Family;
use crate::rng::{derive_seed, SplitMix64};
use crate::text_prep::CleanDocument;

/// One grid point: `(param, value)` pairs in grid key order.
pub type Point = Vec<(String, String)>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trial {
    pub index: usize,
    pub params: Point,
    pub mean: MetricSummary,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub family: Family,
    pub trials: Vec<Trial>,
    /// Index into `trials`.
    pub best: usize,
    pub best_config: RunConfig,
}

impl TuneResult {
    pub fn best_trial(&self) -> &Trial {
        &self.trials[self.best]
    }
}

/// Cartesian product of the grid; keys in sorted order, values in declared order.
pub fn grid_points(grid: &Grid) -> Vec<Point> {
    let mut points: Vec<Point> = vec![Vec::new()];
    for (k, values) in grid {
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push((k.clone(), v.clone()));
                    q
                })
            })
            .collect();
    }
    points
}

pub fn apply(cfg: &RunConfig, family: Family, point: &Point) -> Result<RunConfig> {
    let mut c = cfg.clone();
    for (k, v) in point {
        c.set(&format!("{}.{k}", family_prefix(family)), v)?;
    }
    Ok(c)
}

pub fn render_point(point: &Point) -> String {
    point.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ")
}

/// Up to `budget` distinct grid points. If the base configuration is itself
/// a grid point it is always trial 0; the remaining points follow in seeded
/// random order.
pub fn sample_points(cfg: &RunConfig, family: Family, grid: &Grid, budget: usize, seed: u64) -> Result<Vec<Point>> {
    if budget == 0 {
        return Err(Error::InvalidArgument("tuning budget must be >= 1".into()));
    }
    let mut points = grid_points(grid);
    if grid.is_empty() || points.is_empty() {
        return Err(Error::InvalidArgument(format!("empty search grid for {family}")));
    }
    let base = cfg.family_kv(family);
    let mut default_pos = None;
    for (i, p) in points.iter().enumerate() {
        if apply(cfg, family, p)?.family_kv(family) == base {
            default_pos = Some(i);
            break;
        }
    }
    let head = default_pos.map(|i| points.remove(i));
    SplitMix64::new(derive_seed(seed, 0x7475_6e65)).shuffle(&mut points);
    let mut out: Vec<Point> = head.into_iter().collect();
    out.extend(points);
    out.truncate(budget);
    Ok(out)
}

/// Runs the search on `docs`; the best trial has the highest mean macro-F1,
/// ties going to the lexicographically smallest rendered configuration.
pub fn tune(family: Family, docs: &[CleanDocument], labels: &[Label], cfg: &RunConfig) -> Result<TuneResult> {
    if family == Family::Bilstm {
        return Err(Error::InvalidArgument("tuning covers the classical families only".into()));
    }
    cfg.validate()?;
    let grid = cfg
        .tune_grids
        .get(&family)
        .ok_or_else(|| Error::InvalidArgument(format!("empty search grid for {family}")))?;
    let points = sample_points(cfg, family, grid, cfg.tune_budget, cfg.seed)?;
    let ids: Vec<usize> = (0..docs.len()).collect();
    let plan = corpus::make_folds(&ids, labels, cfg.cv_k, cfg.seed)?;
    let mut trials = Vec::with_capacity(points.len());
    for (index, params) in points.into_iter().enumerate() {
        let trial_cfg = apply(cfg, family, &params)?;
        let t0 = Instant::now();
        let reports = cross_validate(family, docs, labels, &plan, &trial_cfg, cfg.parallel_folds)?;
        let (mean, _) = summarize(&reports);
        trials.push(Trial {
            index,
            params,
            mean,
            wall_time_s: t0.elapsed().as_secs_f64(),
        });
    }
    let best = (0..trials.len())
        .max_by(|&a, &b| {
            trials[a]
                .mean
                .macro_f1
                .total_cmp(&trials[b].mean.macro_f1)
                .then_with(|| render_point(&trials[b].params).cmp(&render_point(&trials[a].params)))
        })
        .expect("budget >= 1");
    let best_config = apply(cfg, family, &trials[best].params)?;
    Ok(TuneResult {
        family,
        trials,
        best,
        best_config,
    })
}

pub fn trials_csv(result: &TuneResult) -> String {
    let mut s = String::from("trial,params,macro_f1,accuracy,best\n");
    for t in &result.trials {
        let _ = writeln!(
            s,
            "{},{},{:.6},{:.6},{}",
            t.index,
            render_point(&t.params),
            t.mean.macro_f1,
            t.mean.accuracy,
            t.index == result.best
        );
    }
    s
}

/// Tunes on the training part; writes `tune_<family>.csv` and the winning
/// hyperparameters as a loadable config file `best_<family>.cfg`.
pub fn cmd_tune(p: &Prepared, family: Family, cfg: &RunConfig, out: &Path) -> Result<TuneResult> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let (docs, labels) = p.train();
    let result = tune(family, &docs, &labels, cfg)?;
    let csv_path = out.join(format!("tune_{}.csv", family.as_str()));
    std::fs::write(&csv_path, trials_csv(&result)).map_err(|e| Error::io(&csv_path, e))?;
    let cfg_path = out.join(format!("best_{}.cfg", family.as_str()));
    let text = format!(
        "# best of {} trials, mean CV macro-F1 {:.6}\n{}",
        result.trials.len(),
        result.best_trial().mean.macro_f1,
        result.best_config.family_text(family)
    );
    std::fs::write(&cfg_path, text).map_err(|e| Error::io(&cfg_path, e))?;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(pairs: &[(&str, &[&str])]) -> Grid {
        pairs
            .iter()
            .map(|(k, vs)| (k.to_string(), vs.iter().map(|v| v.to_string()).collect()))
            .collect()
    }

    #[test]
    fn grid_product_order() {
        let pts = grid_points(&g(&[("lr", &["0.01", "0.1"]), ("l2", &["1e-5", "1e-4", "1e-3"])]));
        assert_eq!(pts.len(), 6);
        assert_eq!(render_point(&pts[0]), "l2=1e-5 lr=0.01");
        assert_eq!(render_point(&pts[5]), "l2=1e-3 lr=0.1");
    }

    #[test]
    fn default_point_comes_first() {
        let cfg = RunConfig::default();
        let grid = g(&[("lr", &["0.01", "0.1"]), ("l2", &["1e-5", "1e-4", "1e-3"])]);
        let pts = sample_points(&cfg, Family::Logistic, &grid, 1, 9).unwrap();
        assert_eq!(render_point(&pts[0]), "l2=1e-4 lr=0.1");
        let all = sample_points(&cfg, Family::Logistic, &grid, 100, 9).unwrap();
        assert_eq!(all.len(), 6);
        let again = sample_points(&cfg, Family::Logistic, &grid, 100, 9).unwrap();
        assert_eq!(all, again);
    }

    #[test]
    fn sampled_points_lie_in_grid() {
        let cfg = RunConfig::default();
        let grid = g(&[("learning_rate", &["0.3", "0.7"]), ("max_depth", &["none", "2"])]);
        let full = grid_points(&grid);
        for p in sample_points(&cfg, Family::Gbdt, &grid, 3, 1).unwrap() {
            assert!(full.contains(&p));
        }
    }

    #[test]
    fn empty_grid_and_zero_budget_fail() {
        let cfg = RunConfig::default();
        assert!(sample_points(&cfg, Family::Logistic, &Grid::new(), 3, 0).is_err());
        assert!(sample_points(&cfg, Family::Logistic, &g(&[("lr", &[])]), 3, 0).is_err());
        assert!(sample_points(&cfg, Family::Logistic, &g(&[("lr", &["0.1"])]), 0, 0).is_err());
    }
}
