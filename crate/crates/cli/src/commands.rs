use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use svadi_core::combine::{
    combine, evaluation_grid, initial_condition, interpolate_at, plan, prepare_level, solve_level,
};
use svadi_core::harness::checks::run_all;
use svadi_core::harness::reference::{self, default_cache_dir, ReferenceSpec};
use svadi_core::harness::{run_study, Method, StudyConfig};
use svadi_core::model::{transform, untransform, untransform_price, Transformed};
use svadi_core::operators::{assemble_compact_x, assemble_compact_y, write_rows_csv};
use svadi_core::stepper::trace_writer;
use svadi_core::{GridField, LevelIndex};

use crate::config::RunConfig;
use crate::error::{CliError, ConfigError};

type Result<T> = std::result::Result<T, CliError>;

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CliError::Write {
            path: path.to_path_buf(),
            source,
        })
}

/// Runs `write` against a buffered file and flushes it.
fn write_file(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> svadi_core::Result<()>) -> Result<()> {
    let mut out = create(path)?;
    write(&mut out)?;
    out.flush().map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn cache_dir(config: &RunConfig) -> PathBuf {
    config.cache_dir.clone().unwrap_or_else(default_cache_dir)
}

fn require_family(config: &RunConfig, what: &'static str) -> Result<()> {
    if config.zero_model {
        Err(CliError::NeedsFamily(what))
    } else {
        Ok(())
    }
}

/// Price in currency at the configured `(S, σ)`, interpolated off the grid.
fn price_at(config: &RunConfig, u: &GridField) -> Result<(Transformed, f64)> {
    let p = transform(config.spot, config.sigma, 0.0, &config.option, &config.params)?;
    let d = &config.solve.domain;
    if !(d.x_min..=d.x_max).contains(&p.x) {
        return Err(ConfigError::Conflict {
            key: "spot",
            reason: "ln(spot/strike) lies outside [x_min, x_max]",
        }
        .into());
    }
    if !(d.y_min..=d.y_max).contains(&p.y) {
        return Err(ConfigError::Conflict {
            key: "sigma",
            reason: "sigma/v lies outside [y_min, y_max]",
        }
        .into());
    }
    let price = untransform_price(
        interpolate_at(u, p.x, p.y),
        p.tau,
        &config.option,
        config.model().rate(),
    );
    if !price.is_finite() {
        return Err(CliError::NonFinite(format!(
            "price at spot {} sigma {}",
            config.spot, config.sigma
        )));
    }
    Ok((p, price))
}

/// `spot,sigma,price` for every node, x outermost.
fn write_surface(config: &RunConfig, u: &GridField, out: &mut impl Write) -> svadi_core::Result<()> {
    let g = u.grid();
    let tau = config.option.maturity;
    let rate = config.model().rate();
    writeln!(out, "spot,sigma,price")?;
    for i in 0..g.m {
        for j in 0..g.n {
            let point = Transformed {
                x: g.x(i),
                y: g.y(j),
                tau,
            };
            let (s, sigma, _) = untransform(point, &config.option, &config.params);
            let v = untransform_price(u.get(i, j), tau, &config.option, rate);
            writeln!(out, "{s},{sigma},{v}")?;
        }
    }
    Ok(())
}

fn write_outputs(config: &RunConfig, u: &GridField) -> Result<()> {
    u.check_finite("result")?;
    if let Some(path) = &config.outputs.surface {
        write_file(path, |out| write_surface(config, u, out))?;
    }
    if let Some(path) = &config.outputs.field {
        write_file(path, |out| u.write_binary(out))?;
    }
    let (p, price) = price_at(config, u)?;
    println!(
        "price {price:.6} at spot {} sigma {} (x {:.6}, y {:.6})",
        config.spot, config.sigma, p.x, p.y
    );
    Ok(())
}

/// Compact rows of both directions, `axis` in the first column.
fn write_rows(config: &RunConfig, level: LevelIndex, out: &mut impl Write) -> svadi_core::Result<()> {
    let grid = svadi_core::grid::grid_from_level(config.solve.domain, level)?;
    let model = config.model();
    let x = assemble_compact_x(&grid, model)?;
    let y = assemble_compact_y(&grid, model)?;
    writeln!(out, "axis,row,a_m1,a_0,a_p1,b_m1,b_0,b_p1")?;
    for (axis, rows) in [("x", &x.rows), ("y", &y.rows)] {
        let mut buf = Vec::new();
        write_rows_csv(rows, &mut buf)?;
        for line in String::from_utf8_lossy(&buf).lines().skip(1) {
            writeln!(out, "{axis},{line}")?;
        }
    }
    Ok(())
}

pub fn solve(config: &RunConfig) -> Result<()> {
    let level = LevelIndex::uniform(config.level);
    if let Some(path) = &config.outputs.rows {
        write_file(path, |out| write_rows(config, level, out))?;
    }
    let solver = prepare_level(config.model(), level, &config.solve)?;
    let u0 = initial_condition(solver.grid(), &config.solve)?;
    let u = match &config.outputs.trace {
        Some(path) => {
            let mut out = create(path)?;
            let u = solver.solve_traced(u0, trace_writer(&mut out))?;
            out.flush().map_err(|source| CliError::Write {
                path: path.clone(),
                source,
            })?;
            u
        }
        None => solver.solve_to_maturity(u0)?,
    };
    write_outputs(config, &u)
}

pub fn sparse(config: &RunConfig) -> Result<()> {
    if config.outputs.trace.is_some() {
        log::warn!("trace_csv is only written by `solve`");
    }
    let p = plan(config.level, config.solve.min_level)?;
    if let Some(path) = &config.outputs.plan {
        write_file(path, |out| p.write_csv(config.solve.dt_factor, out))?;
    }
    if let Some(path) = &config.outputs.rows {
        write_file(path, |out| write_rows(config, p.entries[0].level, out))?;
    }
    let target = evaluation_grid(config.solve.domain, config.level)?;
    let u = combine(&p, |l| solve_level(config.model(), l, &config.solve), &target)?;
    write_outputs(config, &u)
}

fn reference_spec(config: &RunConfig) -> ReferenceSpec {
    ReferenceSpec {
        params: config.params,
        options: config.solve,
        level: config.reference_level(),
    }
}

pub fn build_reference(config: &RunConfig) -> Result<()> {
    require_family(config, "a reference solution")?;
    let spec = reference_spec(config);
    let dir = cache_dir(config);
    let hit = reference::load_cached(&dir, &spec)?.is_some();
    if !hit {
        reference::load_or_build(&dir, &spec)?;
    }
    println!(
        "reference {} {} in {} as {}",
        spec.level,
        if hit { "found" } else { "built" },
        dir.display(),
        &spec.hash()[..32]
    );
    Ok(())
}

pub fn study(config: &RunConfig) -> Result<()> {
    require_family(config, "the convergence study")?;
    let reference = reference::load_or_build(&cache_dir(config), &reference_spec(config))?;
    let study = run_study(
        &StudyConfig {
            params: config.params,
            options: config.solve,
            region: config.region,
            full_levels: config.full_levels.clone(),
            sparse_levels: config.sparse_levels.clone(),
            threads: config.threads,
        },
        &reference.field,
    )?;
    let convergence = config
        .outputs
        .convergence
        .clone()
        .unwrap_or_else(|| "convergence.csv".into());
    let runtime = config.outputs.runtime.clone().unwrap_or_else(|| "runtime.csv".into());
    write_file(&convergence, |out| study.write_convergence_csv(out))?;
    write_file(&runtime, |out| study.write_runtime_csv(out))?;
    for r in &study.rows {
        println!(
            "{:6} n={:2} nodes={:7} error={:.3e} order={:>6} seconds={:.3}",
            r.method.name(),
            r.n,
            r.nodes,
            r.error,
            r.order.map(|o| format!("{o:.3}")).unwrap_or_default(),
            r.seconds
        );
    }
    for m in [Method::Full, Method::Sparse] {
        let orders = study.orders(m);
        if !orders.is_empty() {
            println!("{} mean order {:.3}", m.name(), svadi_core::harness::mean(&orders));
        }
    }
    match study.crossover() {
        Some(c) => println!(
            "sparse n={} reaches full n={} accuracy with speedup {:.2}",
            c.sparse.n,
            c.full.n,
            c.speedup()
        ),
        None => println!("no sparse level reaches a full-grid accuracy in range"),
    }
    Ok(())
}

pub fn check(config: &RunConfig) -> Result<()> {
    let outcomes = run_all(&config.params)?;
    let mut failed = 0;
    for c in &outcomes {
        println!("{}: {} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        failed += usize::from(!c.passed);
    }
    if failed > 0 {
        Err(CliError::ChecksFailed(failed))
    } else {
        Ok(())
    }
}
