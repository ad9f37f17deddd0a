//! `key = value` run configuration with `#` comments.
//!
//! Values are applied in order (file, then `--set`, then dedicated flags),
//! so later sources override earlier ones. Everything is validated before
//! any solve starts.

use std::ops::RangeInclusive;
use std::path::PathBuf;

use svadi_core::combine::SolveOptions;
use svadi_core::model::{ModelKind, PdeModel, ZeroModel};
use svadi_core::{AdiParams, Domain, EvalRegion, LevelIndex, ModelParams, OptionSpec};

use crate::error::ConfigError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Coordinate scaling always comes from here, even for the zero model.
    pub params: ModelParams,
    /// Replace the generator by the zero-coefficient one.
    pub zero_model: bool,
    pub option: OptionSpec,
    pub solve: SolveOptions,
    pub level: u32,
    pub spot: f64,
    pub sigma: f64,
    pub reference_level: u32,
    pub cache_dir: Option<PathBuf>,
    pub region: EvalRegion,
    pub full_levels: RangeInclusive<u32>,
    pub sparse_levels: RangeInclusive<u32>,
    pub threads: Option<usize>,
    pub outputs: Outputs,
}

/// Output paths; `None` means not written.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Outputs {
    pub surface: Option<PathBuf>,
    pub field: Option<PathBuf>,
    pub plan: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub rows: Option<PathBuf>,
    pub convergence: Option<PathBuf>,
    pub runtime: Option<PathBuf>,
}

impl RunConfig {
    pub fn reference_level(&self) -> LevelIndex {
        LevelIndex::uniform(self.reference_level)
    }

    pub fn model(&self) -> &dyn PdeModel {
        if self.zero_model {
            &ZeroModel
        } else {
            &self.params
        }
    }
}

pub const KEYS: &[&str] = &[
    "model",
    "kappa",
    "theta",
    "v",
    "rho",
    "r",
    "alpha",
    "beta",
    "lambda0",
    "strike",
    "maturity",
    "x_min",
    "x_max",
    "y_min",
    "y_max",
    "level",
    "phi",
    "psi",
    "dt_factor",
    "min_level",
    "smoothing",
    "spot",
    "sigma",
    "reference_level",
    "cache_dir",
    "region_spot_lo",
    "region_spot_hi",
    "region_y_lo",
    "region_y_hi",
    "full_levels",
    "sparse_levels",
    "threads",
    "surface_csv",
    "field_bin",
    "plan_csv",
    "trace_csv",
    "rows_csv",
    "convergence_csv",
    "runtime_csv",
];

/// Assignments in the order they were given, before interpretation.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: Vec<(String, String)>,
}

impl RawConfig {
    /// Parses file text; `origin` labels line numbers in diagnostics.
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let mut raw = RawConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                origin: origin.to_string(),
                line: n + 1,
                text: line.to_string(),
            })?;
            raw.set(k.trim(), v.trim())?;
        }
        Ok(raw)
    }

    /// `KEY=VALUE` from the command line.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), ConfigError> {
        let (k, v) = pair.split_once('=').ok_or_else(|| ConfigError::Syntax {
            origin: "--set".into(),
            line: 0,
            text: pair.to_string(),
        })?;
        self.set(k.trim(), v.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        self.entries.push((key.to_string(), value.to_string()));
        Ok(())
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn is_set(&self, key: &str) -> bool {
        self.get(key).is_some()
    }

    fn f64_in(
        &self,
        key: &'static str,
        default: f64,
        ok: impl Fn(f64) -> bool,
        range: &'static str,
    ) -> Result<f64, ConfigError> {
        let Some(text) = self.get(key) else {
            return Ok(default);
        };
        let value: f64 = text.parse().map_err(|_| ConfigError::Parse {
            key,
            value: text.to_string(),
            expected: "a number",
        })?;
        if value.is_finite() && ok(value) {
            Ok(value)
        } else {
            Err(ConfigError::Range {
                key,
                value: text.to_string(),
                range,
            })
        }
    }

    fn u32_in(
        &self,
        key: &'static str,
        default: u32,
        range: RangeInclusive<u32>,
        text_range: &'static str,
    ) -> Result<u32, ConfigError> {
        let Some(text) = self.get(key) else {
            return Ok(default);
        };
        let value: u32 = text.parse().map_err(|_| ConfigError::Parse {
            key,
            value: text.to_string(),
            expected: "a non-negative integer",
        })?;
        if range.contains(&value) {
            Ok(value)
        } else {
            Err(ConfigError::Range {
                key,
                value: text.to_string(),
                range: text_range,
            })
        }
    }

    fn levels(&self, key: &'static str, default: RangeInclusive<u32>) -> Result<RangeInclusive<u32>, ConfigError> {
        let Some(text) = self.get(key) else {
            return Ok(default);
        };
        let bad = || ConfigError::Parse {
            key,
            value: text.to_string(),
            expected: "a range `lo..hi` with 3 <= lo <= hi <= 12",
        };
        let (lo, hi) = text.split_once("..").ok_or_else(bad)?;
        let lo: u32 = lo.trim().parse().map_err(|_| bad())?;
        let hi: u32 = hi.trim().parse().map_err(|_| bad())?;
        if 3 <= lo && lo <= hi && hi <= 12 {
            Ok(lo..=hi)
        } else {
            Err(bad())
        }
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).filter(|v| !v.is_empty()).map(PathBuf::from)
    }

    /// Interprets and validates every key.
    pub fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let t1 = ModelParams::baseline();
        let any = |_: f64| true;
        let nonneg = |v: f64| v >= 0.0;
        let pos = |v: f64| v > 0.0;

        let model_name = self.get("model").unwrap_or("custom");
        let kind = match model_name {
            "custom" => None,
            "zero" => None,
            "sqr" | "heston" => Some(ModelKind::Sqr),
            "var" | "garch" => Some(ModelKind::Var),
            "3/2" => Some(ModelKind::ThreeHalves),
            "sqrn" => Some(ModelKind::Sqrn),
            "varn" => Some(ModelKind::Varn),
            "3/2n" => Some(ModelKind::ThreeHalvesN),
            other => {
                return Err(ConfigError::Parse {
                    key: "model",
                    value: other.to_string(),
                    expected: "one of custom, zero, sqr, var, 3/2, sqrn, varn, 3/2n",
                })
            }
        };
        if kind.is_some() {
            for key in ["alpha", "beta"] {
                if self.is_set(key) {
                    return Err(ConfigError::Conflict {
                        key,
                        reason: "exponents are fixed by a named model; use model = custom",
                    });
                }
            }
        }
        let mut params = ModelParams {
            kappa: self.f64_in("kappa", t1.kappa, nonneg, ">= 0")?,
            theta: self.f64_in("theta", t1.theta, nonneg, ">= 0")?,
            v: self.f64_in("v", t1.v, pos, "> 0")?,
            rho: self.f64_in("rho", t1.rho, |v| (-1.0..=1.0).contains(&v), "[-1, 1]")?,
            r: self.f64_in("r", t1.r, nonneg, ">= 0")?,
            alpha: self.f64_in("alpha", t1.alpha, nonneg, ">= 0")?,
            beta: self.f64_in("beta", t1.beta, nonneg, ">= 0")?,
            lambda0: self.f64_in("lambda0", t1.lambda0, any, "any finite number")?,
        };
        if let Some(kind) = kind {
            params = params.with_kind(kind);
        }

        let strike = self.f64_in("strike", 100.0, pos, "> 0")?;
        let maturity = self.f64_in("maturity", 1.0, pos, "> 0")?;
        let option = OptionSpec::put(strike, maturity).map_err(ConfigError::Invalid)?;

        let standard = Domain::standard(maturity);
        let domain = Domain {
            x_min: self.f64_in("x_min", standard.x_min, any, "any finite number below x_max")?,
            x_max: self.f64_in("x_max", standard.x_max, any, "any finite number above x_min")?,
            y_min: self.f64_in("y_min", standard.y_min, pos, "> 0 and below y_max")?,
            y_max: self.f64_in("y_max", standard.y_max, pos, "> y_min")?,
            horizon: maturity,
        };
        domain.validate().map_err(ConfigError::Invalid)?;

        let adi = AdiParams {
            phi: self.f64_in("phi", 0.5, nonneg, ">= 0 (1/2 for second order)")?,
            psi: self.f64_in("psi", 0.5, nonneg, ">= 0 (1/2 for second order)")?,
        };
        adi.validate().map_err(ConfigError::Invalid)?;
        let smoothing = match self.get("smoothing").unwrap_or("on") {
            "on" | "true" | "1" => true,
            "off" | "false" | "0" => false,
            other => {
                return Err(ConfigError::Parse {
                    key: "smoothing",
                    value: other.to_string(),
                    expected: "on or off",
                })
            }
        };
        let solve = SolveOptions {
            domain,
            adi,
            dt_factor: self.f64_in("dt_factor", 5.0, pos, "> 0")?,
            min_level: self.u32_in("min_level", 3, 3..=8, "3..=8")?,
            smoothing,
        };

        let spot = self.f64_in("spot", strike, pos, "> 0")?;
        let sigma = self.f64_in("sigma", params.theta.max(f64::MIN_POSITIVE), pos, "> 0")?;

        let region = EvalRegion {
            spot_lo: self.f64_in("region_spot_lo", 0.5, pos, "> 0")?,
            spot_hi: self.f64_in("region_spot_hi", 2.0, pos, "> region_spot_lo")?,
            y_lo: self.f64_in("region_y_lo", 0.05, pos, "> 0")?,
            y_hi: self.f64_in("region_y_hi", 1.0, pos, "> region_y_lo")?,
        };
        if region.spot_hi <= region.spot_lo || region.y_hi <= region.y_lo {
            return Err(ConfigError::Conflict {
                key: "region_spot_hi",
                reason: "the error region must have positive extent",
            });
        }

        let threads = if self.is_set("threads") {
            Some(self.u32_in("threads", 1, 1..=1024, "1..=1024")? as usize)
        } else {
            None
        };

        Ok(RunConfig {
            params,
            zero_model: model_name == "zero",
            option,
            solve,
            level: self.u32_in("level", 6, 3..=12, "3..=12")?,
            spot,
            sigma,
            reference_level: self.u32_in("reference_level", 8, 7..=10, "7..=10")?,
            cache_dir: self.path("cache_dir"),
            region,
            full_levels: self.levels("full_levels", 3..=7)?,
            sparse_levels: self.levels("sparse_levels", 7..=10)?,
            threads,
            outputs: Outputs {
                surface: self.path("surface_csv"),
                field: self.path("field_bin"),
                plan: self.path("plan_csv"),
                trace: self.path("trace_csv"),
                rows: self.path("rows_csv"),
                convergence: self.path("convergence_csv"),
                runtime: self.path("runtime_csv"),
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(text: &str) -> Result<RunConfig, ConfigError> {
        RawConfig::parse(text, "test")?.resolve()
    }

    #[test]
    fn defaults_are_the_baseline_setup() {
        let c = resolve("").unwrap();
        assert_eq!(c.params, ModelParams::baseline());
        assert!(!c.zero_model);
        assert_eq!(c.solve.domain, Domain::standard(1.0));
        assert_eq!(c.solve.adi, AdiParams::default());
        assert_eq!(c.solve.dt_factor, 5.0);
        assert!(c.solve.smoothing);
        assert_eq!(c.reference_level, 8);
        assert_eq!(c.option.strike, 100.0);
        assert_eq!((c.spot, c.sigma), (100.0, 0.1));
    }

    #[test]
    fn explicit_defaults_file_parses_to_defaults() {
        let text = "# baseline parameters\n\
                    kappa = 2\ntheta = 0.1\nv = 0.1\nrho = -0.5\nr = 0.05\n\
                    alpha = 0.5   # drift exponent\nbeta = 0.5\n\n\
                    x_min = -5\nx_max = 1.5\ny_min = 0.05\ny_max = 2.5\n\
                    phi = 0.5\npsi = 0.5\n";
        assert_eq!(resolve(text).unwrap(), resolve("").unwrap());
    }

    #[test]
    fn range_error_names_the_key() {
        let err = resolve("rho = -1.5").unwrap_err();
        assert!(matches!(err, ConfigError::Range { key: "rho", .. }));
        assert!(err.to_string().contains("rho") && err.to_string().contains("[-1, 1]"));
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = resolve("khappa = 2").unwrap_err();
        assert!(matches!(&err, ConfigError::UnknownKey(k) if k == "khappa"));
    }

    #[test]
    fn later_assignments_win() {
        let mut raw = RawConfig::parse("level = 4\nkappa = 1", "f").unwrap();
        raw.set_pair("level=5").unwrap();
        let c = raw.resolve().unwrap();
        assert_eq!(c.level, 5);
        assert_eq!(c.params.kappa, 1.0);
    }

    #[test]
    fn malformed_lines_and_values() {
        assert!(matches!(resolve("kappa"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(
            resolve("kappa = two"),
            Err(ConfigError::Parse { key: "kappa", .. })
        ));
        assert!(matches!(
            resolve("level = 20"),
            Err(ConfigError::Range { key: "level", .. })
        ));
        assert!(matches!(resolve("full_levels = 5..3"), Err(ConfigError::Parse { .. })));
        assert!(matches!(resolve("reference_level = 6"), Err(ConfigError::Range { .. })));
        assert!(matches!(resolve("y_min = 3"), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn named_models_fix_exponents() {
        let c = resolve("model = sqr").unwrap();
        assert!(c.params.is_heston());
        let c = resolve("model = sqrn").unwrap();
        assert_eq!((c.params.alpha, c.params.beta), (1.0, 0.5));
        assert!(matches!(
            resolve("model = sqr\nalpha = 1"),
            Err(ConfigError::Conflict { key: "alpha", .. })
        ));
        assert!(resolve("model = zero").unwrap().zero_model);
    }

    #[test]
    fn ranges_and_outputs() {
        let c = resolve("full_levels = 3..5\nsparse_levels=6..8\nplan_csv = p.csv\nsmoothing = off").unwrap();
        assert_eq!(c.full_levels, 3..=5);
        assert_eq!(c.sparse_levels, 6..=8);
        assert_eq!(c.outputs.plan, Some(PathBuf::from("p.csv")));
        assert!(!c.solve.smoothing);
    }
}
