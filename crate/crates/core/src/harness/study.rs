//! Full-grid versus sparse-grid convergence and run-time study.

use std::io::Write;
use std::ops::RangeInclusive;
use std::time::Instant;

use crate::combine::{plan, solve_level, sparse_solve, SolveOptions};
use crate::error::{Error, Result};
use crate::grid::{EvalRegion, GridField, LevelIndex};
use crate::model::ModelParams;

use super::{estimate_order, region_max_error};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Full,
    Sparse,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Full => "full",
            Method::Sparse => "sparse",
        }
    }
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub params: ModelParams,
    pub options: SolveOptions,
    pub region: EvalRegion,
    pub full_levels: RangeInclusive<u32>,
    pub sparse_levels: RangeInclusive<u32>,
    /// Worker threads for the timed solves; `Some(1)` measures serial cost.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub method: Method,
    pub n: u32,
    pub nodes: usize,
    pub error: f64,
    pub seconds: f64,
    /// `log2(e_{n−1} / e_n)`; absent for the first row of a method.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Study {
    pub rows: Vec<StudyRow>,
}

/// The pair behind the efficiency comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct Crossover {
    pub full: StudyRow,
    pub sparse: StudyRow,
}

impl Crossover {
    pub fn speedup(&self) -> f64 {
        self.full.seconds / self.sparse.seconds
    }
}

impl Study {
    pub fn method(&self, m: Method) -> Vec<&StudyRow> {
        self.rows.iter().filter(|r| r.method == m).collect()
    }

    pub fn orders(&self, m: Method) -> Vec<f64> {
        self.method(m).iter().filter_map(|r| r.order).collect()
    }

    /// Among pairs where the sparse error is no worse than the full-grid
    /// error, the one with the most accurate full-grid row, paired with the
    /// cheapest qualifying sparse row.
    pub fn crossover(&self) -> Option<Crossover> {
        let sparse = self.method(Method::Sparse);
        let mut full = self.method(Method::Full);
        full.sort_by(|a, b| a.error.total_cmp(&b.error));
        full.iter().find_map(|f| {
            sparse
                .iter()
                .filter(|s| s.error <= f.error)
                .min_by(|a, b| a.seconds.total_cmp(&b.seconds))
                .map(|s| Crossover {
                    full: (*f).clone(),
                    sparse: (*s).clone(),
                })
        })
    }

    /// Error versus mesh: `method,n,delta,nodes,error,order`.
    pub fn write_convergence_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "method,n,delta,nodes,error,order")?;
        for r in &self.rows {
            let order = r.order.map(|o| o.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.method.name(),
                r.n,
                2f64.powi(-(r.n as i32)),
                r.nodes,
                r.error,
                order
            )?;
        }
        Ok(())
    }

    /// Error versus run time: `method,n,nodes,error,seconds`.
    pub fn write_runtime_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "method,n,nodes,error,seconds")?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{},{}", r.method.name(), r.n, r.nodes, r.error, r.seconds)?;
        }
        Ok(())
    }
}

fn timed(f: impl FnOnce() -> Result<GridField>) -> Result<(GridField, f64)> {
    let start = Instant::now();
    let u = f()?;
    Ok((u, start.elapsed().as_secs_f64()))
}

/// Runs every configured solve and measures it against `reference`.
/// Timings cover preparation and time stepping, not reference construction.
pub fn run_study(config: &StudyConfig, reference: &GridField) -> Result<Study> {
    config.params.validate()?;
    let run = || -> Result<Study> {
        let mut study = Study::default();
        for (method, levels) in [
            (Method::Full, config.full_levels.clone()),
            (Method::Sparse, config.sparse_levels.clone()),
        ] {
            let mut errors = Vec::new();
            for n in levels {
                let (u, seconds) = match method {
                    Method::Full => timed(|| solve_level(&config.params, LevelIndex::uniform(n), &config.options))?,
                    Method::Sparse => timed(|| sparse_solve(&config.params, n, &config.options))?,
                };
                let nodes = match method {
                    Method::Full => ((1usize << n) + 1).pow(2),
                    Method::Sparse => plan(n, config.options.min_level)?.node_count(),
                };
                let error = region_max_error(&u, reference, &config.region)?;
                errors.push(error);
                let order = if errors.len() > 1 {
                    Some(*estimate_order(&errors[errors.len() - 2..])?.first().unwrap_or(&0.0))
                } else {
                    None
                };
                log::info!("{} n={n}: error {error:.3e}, {seconds:.3}s", method.name());
                study.rows.push(StudyRow {
                    method,
                    n,
                    nodes,
                    error,
                    seconds,
                    order,
                });
            }
        }
        Ok(study)
    };
    match config.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|_| Error::InvalidParameter {
                name: "threads",
                value: t as f64,
                expected: "a worker count the system can start",
            })?
            .install(run),
        None => run(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: Method, n: u32, error: f64, seconds: f64) -> StudyRow {
        StudyRow {
            method,
            n,
            nodes: 0,
            error,
            seconds,
            order: None,
        }
    }

    #[test]
    fn crossover_picks_finest_matched_pair() {
        let study = Study {
            rows: vec![
                row(Method::Full, 5, 1e-3, 0.1),
                row(Method::Full, 6, 1e-4, 1.0),
                row(Method::Full, 7, 1e-5, 10.0),
                row(Method::Sparse, 8, 5e-4, 0.05),
                row(Method::Sparse, 9, 8e-5, 0.2),
                row(Method::Sparse, 10, 2e-5, 0.9),
            ],
        };
        let c = study.crossover().unwrap();
        assert_eq!((c.full.n, c.sparse.n), (6, 9));
        assert!((c.speedup() - 5.0).abs() < 1e-12);
        let none = Study {
            rows: vec![row(Method::Full, 5, 1e-5, 1.0), row(Method::Sparse, 8, 1e-3, 0.1)],
        };
        assert!(none.crossover().is_none());
    }

    #[test]
    fn csv_headers() {
        let study = Study {
            rows: vec![row(Method::Full, 3, 0.5, 0.25)],
        };
        let mut a = Vec::new();
        study.write_runtime_csv(&mut a).unwrap();
        assert_eq!(
            String::from_utf8(a).unwrap(),
            "method,n,nodes,error,seconds\nfull,3,0,0.5,0.25\n"
        );
        let mut b = Vec::new();
        study.write_convergence_csv(&mut b).unwrap();
        assert_eq!(
            String::from_utf8(b).unwrap(),
            "method,n,delta,nodes,error,order\nfull,3,0.125,0,0.5,\n"
        );
    }
}
