//! Flat key-value experiment configuration.
//!
//! The format is one `key = value` pair per line, `#` comments, no sections.
//! Unknown keys are rejected so manifests diff cleanly. `to_canonical_text`
//! emits keys in sorted order and round-trips exactly through `parse`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use gpbo::{KernelFamily, KernelSpec, Policy};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Malformed { line: usize },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("duplicate key `{0}`")]
    DuplicateKey(String),
    #[error("missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("key `{key}`: {reason}")]
    OutOfRange { key: &'static str, reason: String },
}

/// Validated experiment configuration with defaults applied.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kernel_family: KernelFamily,
    pub lengthscale: f64,
    pub dims: usize,
    pub grid_per_dim: usize,
    pub box_r: f64,
    pub noise_var: f64,
    pub policies: Vec<Policy>,
    pub horizon: usize,
    pub trials: usize,
    pub seed: u64,
    pub rff_features: usize,
    pub init_count: usize,
    pub refit_every: usize,
    pub lengthscale_candidates: Vec<f64>,
    pub common_random_numbers: bool,
    pub confidence_tracking: bool,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn kernel(&self) -> KernelSpec {
        match self.kernel_family {
            KernelFamily::Rbf => KernelSpec::rbf(self.lengthscale).expect("validated"),
            KernelFamily::Matern { nu } => {
                KernelSpec::matern(nu, self.lengthscale).expect("validated")
            }
            KernelFamily::Linear => KernelSpec::linear(),
        }
    }

    pub fn cardinality(&self) -> usize {
        self.grid_per_dim.pow(self.dims as u32)
    }

    /// Canonical text form: sorted keys, one per line.
    pub fn to_canonical_text(&self) -> String {
        let mut pairs: BTreeMap<&'static str, String> = BTreeMap::new();
        match self.kernel_family {
            KernelFamily::Rbf => {
                pairs.insert("kernel", "rbf".into());
                pairs.insert("lengthscale", fmt_f64(self.lengthscale));
            }
            KernelFamily::Matern { nu } => {
                pairs.insert("kernel", "matern".into());
                pairs.insert("nu", fmt_f64(nu));
                pairs.insert("lengthscale", fmt_f64(self.lengthscale));
            }
            KernelFamily::Linear => {
                pairs.insert("kernel", "linear".into());
            }
        }
        pairs.insert("dims", self.dims.to_string());
        pairs.insert("grid_per_dim", self.grid_per_dim.to_string());
        pairs.insert("box_r", fmt_f64(self.box_r));
        pairs.insert("noise_var", fmt_f64(self.noise_var));
        pairs.insert(
            "policies",
            self.policies
                .iter()
                .map(|p| p.name())
                .collect::<Vec<_>>()
                .join(","),
        );
        pairs.insert("horizon", self.horizon.to_string());
        pairs.insert("trials", self.trials.to_string());
        pairs.insert("seed", self.seed.to_string());
        pairs.insert("rff_features", self.rff_features.to_string());
        pairs.insert("init_count", self.init_count.to_string());
        pairs.insert("refit_every", self.refit_every.to_string());
        pairs.insert(
            "lengthscale_candidates",
            self.lengthscale_candidates
                .iter()
                .map(|v| fmt_f64(*v))
                .collect::<Vec<_>>()
                .join(","),
        );
        pairs.insert(
            "common_random_numbers",
            self.common_random_numbers.to_string(),
        );
        pairs.insert("confidence_tracking", self.confidence_tracking.to_string());
        pairs.insert("out_dir", self.out_dir.display().to_string());
        let mut out = String::new();
        for (k, v) in pairs {
            writeln!(out, "{k} = {v}").expect("string write");
        }
        out
    }

    /// FNV-1a hash of the canonical text, as fixed-width hex.
    pub fn hash(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.to_canonical_text().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

fn fmt_f64(v: f64) -> String {
    let s = format!("{v}");
    if s.contains('.') || s.contains('e') || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}

fn parse_f64(key: &'static str, raw: &str) -> Result<f64, ConfigError> {
    let v: f64 = raw.parse().map_err(|_| ConfigError::OutOfRange {
        key,
        reason: format!("not a number: `{raw}`"),
    })?;
    if !v.is_finite() {
        return Err(ConfigError::OutOfRange {
            key,
            reason: "must be finite".into(),
        });
    }
    Ok(v)
}

fn parse_usize(key: &'static str, raw: &str) -> Result<usize, ConfigError> {
    raw.parse().map_err(|_| ConfigError::OutOfRange {
        key,
        reason: format!("not a nonnegative integer: `{raw}`"),
    })
}

fn parse_bool(key: &'static str, raw: &str) -> Result<bool, ConfigError> {
    match raw {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(ConfigError::OutOfRange {
            key,
            reason: format!("not a bool: `{raw}`"),
        }),
    }
}

const KNOWN_KEYS: &[&str] = &[
    "kernel",
    "nu",
    "lengthscale",
    "dims",
    "grid_per_dim",
    "box_r",
    "noise_var",
    "policies",
    "horizon",
    "trials",
    "seed",
    "rff_features",
    "init_count",
    "refit_every",
    "lengthscale_candidates",
    "common_random_numbers",
    "confidence_tracking",
    "out_dir",
];

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut map: BTreeMap<String, String> = BTreeMap::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Malformed { line: idx + 1 });
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey(key));
        }
        if map.insert(key.clone(), value).is_some() {
            return Err(ConfigError::DuplicateKey(key));
        }
    }

    let kernel_raw = map
        .remove("kernel")
        .ok_or(ConfigError::MissingKey("kernel"))?;
    let nu = map.remove("nu").map(|v| parse_f64("nu", &v)).transpose()?;
    let lengthscale = map
        .remove("lengthscale")
        .map(|v| parse_f64("lengthscale", &v))
        .transpose()?;
    let kernel_family = match kernel_raw.as_str() {
        "rbf" => {
            if nu.is_some() {
                return Err(ConfigError::OutOfRange {
                    key: "nu",
                    reason: "only valid for the matern kernel".into(),
                });
            }
            KernelFamily::Rbf
        }
        "matern" => {
            let nu = nu.ok_or(ConfigError::MissingKey("nu"))?;
            if nu != 1.5 && nu != 2.5 {
                return Err(ConfigError::OutOfRange {
                    key: "nu",
                    reason: format!("must be 1.5 or 2.5, got {nu}"),
                });
            }
            KernelFamily::Matern { nu }
        }
        "linear" => {
            if nu.is_some() || lengthscale.is_some() {
                return Err(ConfigError::OutOfRange {
                    key: "kernel",
                    reason: "linear kernel takes no nu or lengthscale".into(),
                });
            }
            KernelFamily::Linear
        }
        other => {
            return Err(ConfigError::OutOfRange {
                key: "kernel",
                reason: format!("unknown kernel `{other}`"),
            })
        }
    };
    let lengthscale = match kernel_family {
        KernelFamily::Linear => 1.0,
        _ => {
            let ell = lengthscale.ok_or(ConfigError::MissingKey("lengthscale"))?;
            if ell <= 0.0 {
                return Err(ConfigError::OutOfRange {
                    key: "lengthscale",
                    reason: "must be positive".into(),
                });
            }
            ell
        }
    };

    let dims = parse_usize(
        "dims",
        &map.remove("dims").ok_or(ConfigError::MissingKey("dims"))?,
    )?;
    if dims == 0 || dims > 8 {
        return Err(ConfigError::OutOfRange {
            key: "dims",
            reason: "must be in [1, 8]".into(),
        });
    }
    let grid_per_dim = parse_usize(
        "grid_per_dim",
        &map.remove("grid_per_dim")
            .ok_or(ConfigError::MissingKey("grid_per_dim"))?,
    )?;
    if grid_per_dim == 0 {
        return Err(ConfigError::OutOfRange {
            key: "grid_per_dim",
            reason: "must be >= 1".into(),
        });
    }
    if (grid_per_dim as u64)
        .checked_pow(dims as u32)
        .filter(|&n| n <= 1_000_000)
        .is_none()
    {
        return Err(ConfigError::OutOfRange {
            key: "grid_per_dim",
            reason: "grid_per_dim^dims exceeds 1e6 points".into(),
        });
    }

    let box_r = map
        .remove("box_r")
        .map(|v| parse_f64("box_r", &v))
        .transpose()?
        .unwrap_or(1.0);
    if box_r <= 0.0 {
        return Err(ConfigError::OutOfRange {
            key: "box_r",
            reason: "must be positive".into(),
        });
    }

    let noise_var = map
        .remove("noise_var")
        .map(|v| parse_f64("noise_var", &v))
        .transpose()?
        .unwrap_or(1e-6);
    if noise_var <= 0.0 {
        return Err(ConfigError::OutOfRange {
            key: "noise_var",
            reason: "must be positive (the noise variance doubles as jitter)".into(),
        });
    }

    let policies = match map.remove("policies") {
        None => vec![Policy::Ts, Policy::Pims],
        Some(raw) => {
            let mut out = Vec::new();
            for token in raw.split(',').map(str::trim).filter(|t| !t.is_empty()) {
                let p = Policy::parse(token).ok_or_else(|| ConfigError::OutOfRange {
                    key: "policies",
                    reason: format!("unknown policy `{token}`"),
                })?;
                if out.contains(&p) {
                    return Err(ConfigError::OutOfRange {
                        key: "policies",
                        reason: format!("policy `{token}` listed twice"),
                    });
                }
                out.push(p);
            }
            if out.is_empty() {
                return Err(ConfigError::OutOfRange {
                    key: "policies",
                    reason: "list is empty".into(),
                });
            }
            out
        }
    };

    let horizon = map
        .remove("horizon")
        .map(|v| parse_usize("horizon", &v))
        .transpose()?
        .unwrap_or(50);
    if horizon == 0 {
        return Err(ConfigError::OutOfRange {
            key: "horizon",
            reason: "must be >= 1".into(),
        });
    }
    let trials = map
        .remove("trials")
        .map(|v| parse_usize("trials", &v))
        .transpose()?
        .unwrap_or(20);
    if trials == 0 {
        return Err(ConfigError::OutOfRange {
            key: "trials",
            reason: "must be >= 1".into(),
        });
    }
    let seed = match map.remove("seed") {
        None => 0,
        Some(raw) => raw.parse().map_err(|_| ConfigError::OutOfRange {
            key: "seed",
            reason: format!("not a u64: `{raw}`"),
        })?,
    };
    let rff_features = map
        .remove("rff_features")
        .map(|v| parse_usize("rff_features", &v))
        .transpose()?
        .unwrap_or(2000);
    if rff_features == 0 {
        return Err(ConfigError::OutOfRange {
            key: "rff_features",
            reason: "must be >= 1".into(),
        });
    }
    let init_count = map
        .remove("init_count")
        .map(|v| parse_usize("init_count", &v))
        .transpose()?
        .unwrap_or(5);
    let refit_every = map
        .remove("refit_every")
        .map(|v| parse_usize("refit_every", &v))
        .transpose()?
        .unwrap_or(0);

    let lengthscale_candidates = match map.remove("lengthscale_candidates") {
        None => vec![0.05, 0.1, 0.2, 0.5, 1.0],
        Some(raw) => {
            let mut out = Vec::new();
            for token in raw.split(',').map(str::trim).filter(|t| !t.is_empty()) {
                let v = parse_f64("lengthscale_candidates", token)?;
                if v <= 0.0 {
                    return Err(ConfigError::OutOfRange {
                        key: "lengthscale_candidates",
                        reason: "candidates must be positive".into(),
                    });
                }
                out.push(v);
            }
            out
        }
    };
    if refit_every > 0 && lengthscale_candidates.is_empty() {
        return Err(ConfigError::OutOfRange {
            key: "lengthscale_candidates",
            reason: "refitting needs a non-empty candidate list".into(),
        });
    }

    let common_random_numbers = map
        .remove("common_random_numbers")
        .map(|v| parse_bool("common_random_numbers", &v))
        .transpose()?
        .unwrap_or(false);
    let confidence_tracking = map
        .remove("confidence_tracking")
        .map(|v| parse_bool("confidence_tracking", &v))
        .transpose()?
        .unwrap_or(true);
    let out_dir = map
        .remove("out_dir")
        .map(PathBuf::from)
        .unwrap_or_else(|| "out".into());

    debug_assert!(map.is_empty(), "all known keys handled");
    Ok(ExperimentConfig {
        kernel_family,
        lengthscale,
        dims,
        grid_per_dim,
        box_r,
        noise_var,
        policies,
        horizon,
        trials,
        seed,
        rff_features,
        init_count,
        refit_every,
        lengthscale_candidates,
        common_random_numbers,
        confidence_tracking,
        out_dir,
    })
}
