//! Fine-grid reference solutions with an on-disk cache.
//!
//! A cache entry is a binary field (`<hash>.vgf`) plus a plain-text
//! provenance sidecar (`<hash>.txt`). The hash is taken over the provenance
//! text, and a hit additionally requires the stored text to match exactly.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::combine::{level_dt, solve_level, SolveOptions};
use crate::error::{Error, Result};
use crate::grid::{grid_from_level, GridField, LevelIndex};
use crate::model::ModelParams;

/// Environment variable overriding the cache directory.
pub const CACHE_DIR_ENV: &str = "SVADI_CACHE_DIR";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSpec {
    pub params: ModelParams,
    pub options: SolveOptions,
    pub level: LevelIndex,
}

impl ReferenceSpec {
    /// Canonical description; floats are written with round-trip precision.
    pub fn provenance(&self) -> String {
        let p = &self.params;
        let o = &self.options;
        let d = &o.domain;
        format!(
            "code_version={}\n\
             params=kappa:{:?},theta:{:?},v:{:?},rho:{:?},r:{:?},alpha:{:?},beta:{:?},lambda0:{:?}\n\
             domain={:?},{:?},{:?},{:?},T={:?}\n\
             level={}\n\
             adi=phi:{:?},psi:{:?}\n\
             dt_rule={:?}*4^-max(l1,l2) dt={:?}\n\
             smoothing={}\n",
            env!("CARGO_PKG_VERSION"),
            p.kappa,
            p.theta,
            p.v,
            p.rho,
            p.r,
            p.alpha,
            p.beta,
            p.lambda0,
            d.x_min,
            d.x_max,
            d.y_min,
            d.y_max,
            d.horizon,
            self.level,
            o.adi.phi,
            o.adi.psi,
            o.dt_factor,
            level_dt(self.level, o.dt_factor),
            if o.smoothing { "phi4,h=dx" } else { "none" },
        )
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.provenance().as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub field: GridField,
    pub provenance: String,
}

/// Cache directory: the override variable if set, else a folder in the
/// system temporary directory.
pub fn default_cache_dir() -> PathBuf {
    std::env::var_os(CACHE_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("svadi-cache"))
}

fn paths(dir: &Path, spec: &ReferenceSpec) -> (PathBuf, PathBuf) {
    let stem = &spec.hash()[..32];
    (dir.join(format!("{stem}.vgf")), dir.join(format!("{stem}.txt")))
}

/// Loads a cached reference if one with identical provenance exists.
pub fn load_cached(dir: &Path, spec: &ReferenceSpec) -> Result<Option<ReferenceSolution>> {
    let (data, side) = paths(dir, spec);
    let provenance = spec.provenance();
    match fs::read_to_string(&side) {
        Ok(stored) if stored == provenance => {}
        Ok(_) => {
            log::warn!("provenance mismatch in {}", side.display());
            return Ok(None);
        }
        Err(_) => return Ok(None),
    }
    let bytes = match fs::read(&data) {
        Ok(b) => b,
        Err(_) => return Ok(None),
    };
    let grid = grid_from_level(spec.options.domain, spec.level)?;
    let field = GridField::read_binary(grid, bytes.as_slice())?;
    Ok(Some(ReferenceSolution { field, provenance }))
}

/// Writes `bytes` to `path` through a temporary file and a rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let tmp = dir.join(format!(
        ".{}.{}.tmp",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("entry"),
        std::process::id()
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn store(dir: &Path, spec: &ReferenceSpec, field: &GridField) -> Result<()> {
    fs::create_dir_all(dir)?;
    let (data, side) = paths(dir, spec);
    let mut bytes = Vec::new();
    field.write_binary(&mut bytes)?;
    // data first: a sidecar only ever points at a complete field
    write_atomic(&data, &bytes)?;
    write_atomic(&side, spec.provenance().as_bytes())
}

/// Cached reference, computed and stored on a miss.
pub fn load_or_build(dir: &Path, spec: &ReferenceSpec) -> Result<ReferenceSolution> {
    if let Some(hit) = load_cached(dir, spec)? {
        log::info!("reference {} loaded from cache", spec.level);
        return Ok(hit);
    }
    log::info!("building reference {}", spec.level);
    let field = build(spec)?;
    store(dir, spec, &field)?;
    Ok(ReferenceSolution {
        field,
        provenance: spec.provenance(),
    })
}

pub fn build(spec: &ReferenceSpec) -> Result<GridField> {
    spec.params.validate()?;
    if spec.level.l1 < 3 || spec.level.l2 < 3 {
        return Err(Error::LevelOverflow {
            level: spec.level.l1.min(spec.level.l2),
        });
    }
    solve_level(&spec.params, spec.level, &spec.options)
}
