//! TOML run configuration. Sections mirror the library modules: `[run]`,
//! `[bridge]`, `[equilibrium]`, `[limit]` and `[verify]`. Every key is read
//! through a typed getter that names its full path in errors, and keys that
//! are never read are rejected so that typos do not pass silently.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::path::PathBuf;

use gmbridge::config::{convergence_beta, GridSpec, LimitSpec, Tolerances};
use gmbridge::equilibrium::StrategyVariant;
use gmbridge::{ExperimentConfig, Membership, YTargetMode};
use serde::Serialize;
use thiserror::Error;
use toml::{Table, Value};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),

    #[error("missing required key `{key}`")]
    Missing { key: String },

    #[error("key `{key}` must be {expected}, found {found}")]
    WrongType {
        key: String,
        expected: &'static str,
        found: &'static str,
    },

    #[error("key `{key}` is invalid: {reason}")]
    Invalid { key: String, reason: String },

    #[error("unknown key `{key}`")]
    Unknown { key: String },
}

type Result<T> = std::result::Result<T, ConfigError>;

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        reason: reason.into(),
    }
}

/// Reads keys by dotted path and remembers which ones were consumed.
struct Reader {
    root: Table,
    used: RefCell<BTreeSet<String>>,
}

impl Reader {
    fn get(&self, key: &str) -> Option<&Value> {
        let (section, name) = key.split_once('.').expect("keys are section.name");
        let v = self.root.get(section)?.as_table()?.get(name)?;
        self.used.borrow_mut().insert(key.to_string());
        Some(v)
    }

    fn wrong(key: &str, expected: &'static str, v: &Value) -> ConfigError {
        ConfigError::WrongType {
            key: key.into(),
            expected,
            found: v.type_str(),
        }
    }

    fn f64(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|v| match v {
                Value::Float(x) => Ok(*x),
                Value::Integer(i) => Ok(*i as f64),
                other => Err(Self::wrong(key, "a number", other)),
            })
            .transpose()
    }

    fn i64(&self, key: &str) -> Result<Option<i64>> {
        self.get(key)
            .map(|v| v.as_integer().ok_or_else(|| Self::wrong(key, "an integer", v)))
            .transpose()
    }

    fn u64(&self, key: &str) -> Result<Option<u64>> {
        self.i64(key)?
            .map(|i| u64::try_from(i).map_err(|_| invalid(key, "must be nonnegative")))
            .transpose()
    }

    fn usize(&self, key: &str) -> Result<Option<usize>> {
        Ok(self.u64(key)?.map(|u| u as usize))
    }

    fn bool(&self, key: &str) -> Result<Option<bool>> {
        self.get(key)
            .map(|v| v.as_bool().ok_or_else(|| Self::wrong(key, "a boolean", v)))
            .transpose()
    }

    fn str(&self, key: &str) -> Result<Option<String>> {
        self.get(key)
            .map(|v| {
                v.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| Self::wrong(key, "a string", v))
            })
            .transpose()
    }

    fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(v) = self.get(key) else { return Ok(None) };
        let arr = v.as_array().ok_or_else(|| Self::wrong(key, "an array of numbers", v))?;
        arr.iter()
            .map(|x| match x {
                Value::Float(f) => Ok(*f),
                Value::Integer(i) => Ok(*i as f64),
                other => Err(Self::wrong(key, "an array of numbers", other)),
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    fn str_list(&self, key: &str) -> Result<Option<Vec<String>>> {
        let Some(v) = self.get(key) else { return Ok(None) };
        let arr = v.as_array().ok_or_else(|| Self::wrong(key, "an array of strings", v))?;
        arr.iter()
            .map(|x| {
                x.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| Self::wrong(key, "an array of strings", x))
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    fn required<T>(key: &str, v: Option<T>) -> Result<T> {
        v.ok_or_else(|| ConfigError::Missing { key: key.into() })
    }

    /// Fails on the first key (in sorted order) that no getter asked for.
    fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        for (section, value) in &self.root {
            let Some(table) = value.as_table() else {
                return Err(ConfigError::Unknown { key: section.clone() });
            };
            if !SECTIONS.contains(&section.as_str()) {
                return Err(ConfigError::Unknown { key: section.clone() });
            }
            for name in table.keys() {
                let key = format!("{section}.{name}");
                if !used.contains(&key) {
                    return Err(ConfigError::Unknown { key });
                }
            }
        }
        Ok(())
    }
}

const SECTIONS: [&str; 5] = ["run", "bridge", "equilibrium", "limit", "verify"];

/// Everything a subcommand needs, resolved from the file and the flags.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub experiment: ExperimentConfig,
    pub out_dir: Option<PathBuf>,
    /// Type assignment of `bridge simulate` and `verify trace` paths.
    pub membership: Membership,
    pub variants: Vec<StrategyVariant>,
    /// Insider types studied by `equilibrium optimality`; `true` is high.
    pub types: Vec<bool>,
    /// Times of the unconditional law check.
    pub law_times: Vec<f64>,
    /// Number of equal windows of the independence check.
    pub windows: usize,
    /// Paths whose intensity traces are written by `verify trace`.
    pub trace_paths: usize,
}

fn parse_variant(key: &str, s: &str) -> Result<StrategyVariant> {
    let (name, rate) = match s.split_once(':') {
        Some((n, r)) => {
            let rate: f64 = r
                .trim()
                .parse()
                .map_err(|_| invalid(key, format!("`{s}`: rate `{r}` is not a number")))?;
            (n.trim(), Some(rate))
        }
        None => (s.trim(), None),
    };
    match (name, rate) {
        ("equilibrium", None) => Ok(StrategyVariant::Equilibrium),
        ("never_cancel", None) => Ok(StrategyVariant::NeverCancel),
        ("bluffing", Some(r)) if r >= 0.0 => Ok(StrategyVariant::Bluffing(r)),
        ("constant_rate", Some(r)) if r >= 0.0 => Ok(StrategyVariant::ConstantRate(r)),
        _ => Err(invalid(
            key,
            format!("`{s}` is not one of equilibrium, never_cancel, bluffing:<rate>, constant_rate:<rate>"),
        )),
    }
}

fn parse_membership(key: &str, s: &str) -> Result<Membership> {
    match s {
        "drawn" => Ok(Membership::Drawn),
        "high" => Ok(Membership::High),
        "low" => Ok(Membership::Low),
        _ => Err(invalid(key, format!("`{s}` is not one of drawn, high, low"))),
    }
}

/// Grid `lo, lo + step, ..., hi` with the count rounded, so that multiples of
/// the step come out exact.
fn grid(key: &str, lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && hi >= lo) {
        return Err(invalid(key, "needs step > 0 and max >= min"));
    }
    let n = ((hi - lo) / step).round() as i64;
    let i0 = (lo / step).round() as i64;
    Ok((0..=n).map(|i| (i0 + i) as f64 * step).collect())
}

/// Maps the parameter names used by library validation to config keys.
fn key_of(param: &str) -> &'static str {
    match param {
        "delta" => "bridge.delta",
        "beta" => "bridge.beta",
        "prior_high" => "bridge.prior_high",
        "y_target" => "bridge.y_target",
        "paths" => "run.paths",
        "probe_times" => "verify.probe_times",
        "time_steps" => "equilibrium.time_steps",
        "quadrature" => "equilibrium.quadrature_tol",
        "significance" => "verify.significance",
        "delta_list" => "limit.delta_list",
        "limit.prior_high" => "limit.prior_high",
        "kb_step" => "limit.kb_step",
        "limit times" => "limit.marginal_times",
        _ => "config",
    }
}

pub fn parse(text: &str) -> Result<Settings> {
    let reader = Reader {
        root: text.parse::<Table>()?,
        used: RefCell::new(BTreeSet::new()),
    };
    let r = &reader;

    let seed = Reader::required("run.seed", r.u64("run.seed")?)?;
    let paths = Reader::required("run.paths", r.usize("run.paths")?)?;
    let out_dir = r.str("run.out_dir")?.map(PathBuf::from);

    let delta = Reader::required("bridge.delta", r.f64("bridge.delta")?)?;
    let convergence = r.bool("bridge.convergence")?.unwrap_or(false);
    let beta = match r.f64("bridge.beta")? {
        Some(b) => b,
        None if convergence => convergence_beta(delta),
        None => {
            return Err(ConfigError::Missing {
                key: "bridge.beta".into(),
            })
        }
    };
    let prior_high = r.f64("bridge.prior_high")?.unwrap_or(0.5);
    let y_target_mode = match r.str("bridge.y_target_mode")?.as_deref() {
        None | Some("exact_match") => YTargetMode::ExactMatch,
        Some("adjusted_prior") => YTargetMode::AdjustedPrior,
        Some(other) => {
            return Err(invalid(
                "bridge.y_target_mode",
                format!("`{other}` is not one of exact_match, adjusted_prior"),
            ))
        }
    };
    let y_target = r.i64("bridge.y_target")?;
    if y_target_mode == YTargetMode::ExactMatch && y_target.is_none() {
        return Err(ConfigError::Missing {
            key: "bridge.y_target".into(),
        });
    }
    let membership = match r.str("bridge.membership")? {
        Some(s) => parse_membership("bridge.membership", &s)?,
        None => Membership::Drawn,
    };

    let grid_defaults = GridSpec::default();
    let window = r.i64("equilibrium.window")?;
    let time_steps = r.usize("equilibrium.time_steps")?.unwrap_or(grid_defaults.time_steps);
    let tol_defaults = Tolerances::default();
    let quadrature = r.f64("equilibrium.quadrature_tol")?.unwrap_or(tol_defaults.quadrature);
    let variants = match r.str_list("equilibrium.variants")? {
        Some(list) => list
            .iter()
            .map(|s| parse_variant("equilibrium.variants", s))
            .collect::<Result<Vec<_>>>()?,
        None => vec![
            StrategyVariant::NeverCancel,
            StrategyVariant::Bluffing(1.0),
            StrategyVariant::ConstantRate(1.0),
        ],
    };
    let types = match r.str_list("equilibrium.types")? {
        Some(list) => list
            .iter()
            .map(|s| match s.as_str() {
                "high" => Ok(true),
                "low" => Ok(false),
                other => Err(invalid(
                    "equilibrium.types",
                    format!("`{other}` is not one of high, low"),
                )),
            })
            .collect::<Result<Vec<_>>>()?,
        None => vec![true, false],
    };

    let ld = LimitSpec::default();
    let grid_y = match (
        r.f64("limit.grid_y_min")?,
        r.f64("limit.grid_y_max")?,
        r.f64("limit.grid_y_step")?,
    ) {
        (None, None, None) => ld.grid_y.clone(),
        (Some(lo), Some(hi), Some(step)) => grid("limit.grid_y_step", lo, hi, step)?,
        _ => {
            return Err(invalid(
                "limit.grid_y_min",
                "grid_y_min, grid_y_max and grid_y_step go together",
            ))
        }
    };
    let limit = LimitSpec {
        delta_list: r.f64_list("limit.delta_list")?.unwrap_or(ld.delta_list),
        prior_high: r.f64("limit.prior_high")?.unwrap_or(ld.prior_high),
        kb_step: r.f64("limit.kb_step")?.unwrap_or(ld.kb_step),
        paths_per_side: r.usize("limit.paths_per_side")?.unwrap_or(ld.paths_per_side),
        marginal_times: r.f64_list("limit.marginal_times")?.unwrap_or(ld.marginal_times),
        grid_y,
        grid_t: r.f64_list("limit.grid_t")?.unwrap_or(ld.grid_t),
    };

    let tolerances = Tolerances {
        quadrature,
        significance: r.f64("verify.significance")?.unwrap_or(tol_defaults.significance),
        min_bin_count: r.usize("verify.min_bin_count")?.unwrap_or(tol_defaults.min_bin_count),
    };
    let probe_times = r.f64_list("verify.probe_times")?.unwrap_or(grid_defaults.probe_times);
    let law_times = r
        .f64_list("verify.law_times")?
        .unwrap_or_else(|| vec![0.25, 0.5, 0.75, 1.0]);
    let windows = r.usize("verify.windows")?.unwrap_or(4);
    let trace_paths = r.usize("verify.trace_paths")?.unwrap_or(20);
    reader.finish()?;

    if law_times.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
        return Err(invalid("verify.law_times", "times must lie in (0, 1]"));
    }
    if windows < 4 {
        return Err(invalid("verify.windows", "at least 4 windows are needed"));
    }
    if limit.paths_per_side == 0 {
        return Err(invalid("limit.paths_per_side", "must be positive"));
    }

    let settings = Settings {
        experiment: ExperimentConfig {
            delta,
            beta,
            prior_high,
            y_target_mode,
            y_target,
            convergence,
            seed,
            paths,
            grid: GridSpec {
                window,
                time_steps,
                probe_times,
            },
            limit,
            tolerances,
        },
        out_dir,
        membership,
        variants,
        types,
        law_times,
        windows,
        trace_paths,
    };
    settings.validate()?;
    Ok(settings)
}

impl Settings {
    /// Library-level validation with parameter names mapped to config keys.
    pub fn validate(&self) -> Result<()> {
        self.experiment.validate().map_err(|e| match e {
            gmbridge::Error::InvalidParameter { name, reason } => invalid(key_of(name), reason),
            other => invalid("config", other.to_string()),
        })
    }

    /// Equal windows covering `[0, 1]`.
    pub fn window_list(&self) -> Vec<(f64, f64)> {
        let n = self.windows as f64;
        (0..self.windows).map(|i| (i as f64 / n, (i + 1) as f64 / n)).collect()
    }
}
