//! Run configuration files.
//!
//! One `key = value` pair per line; `#` starts a comment; blank lines are
//! ignored. Every key except `teacher` may appear at most once. Relative
//! paths resolve against the directory holding the file.
//!
//! | Key | Type | Default |
//! |-----|------|---------|
//! | `dim` | integer | 32 |
//! | `dropout` | real in [0, 1) | 0.1 |
//! | `batch_size` | integer >= 2 | 32 |
//! | `steps` | integer | 500 |
//! | `seed` | integer | 42 |
//! | `init_scale` | real > 0 | 0.1 |
//! | `min_count` | integer >= 1 | 1 |
//! | `learning_rate` | real > 0 | 0.001 |
//! | `adam_decay1`, `adam_decay2` | real in [0, 1) | 0.9, 0.999 |
//! | `adam_epsilon` | real > 0 | 1e-8 |
//! | `lr_schedule` | `constant` or `linear` | `constant` |
//! | `warmup_fraction` | real in [0, 1) | 0.05 |
//! | `tau1`, `tau2`, `tau3` | real > 0 | 0.05, 0.025, 0.0125 |
//! | `alpha` | real in [0, 1] | 1/3 |
//! | `beta`, `gamma` | real >= 0 | 1, 1 |
//! | `method` | `listnet` or `listmle` | `listnet` |
//! | `eval_interval` | integer >= 1 | 125 |
//! | `select_metric` | `spearman`, `teacher_kcc` or `last` | `spearman` |
//! | `corpus`, `validation`, `out`, `report` | path | unset |
//! | `teacher` | path, repeatable | unset |

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use listdistill::encoder::{LrSchedule, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub source: String,
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}: {}", self.source, self.message)
        } else {
            write!(f, "{}:{}: {}", self.source, self.line, self.message)
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub corpus: Option<PathBuf>,
    pub teachers: Vec<PathBuf>,
    pub validation: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

const DEFAULT_WARMUP: f64 = 0.05;

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let source = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            source: source.clone(),
            line: 0,
            message: format!("cannot read config: {e}"),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, &source, base)
    }

    pub fn parse(text: &str, source: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut config = Self::default();
        let mut seen = HashSet::new();
        let mut schedule: Option<(String, usize)> = None;
        let mut warmup = DEFAULT_WARMUP;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let err = |message: String| ConfigError {
                source: source.to_owned(),
                line: line_no,
                message,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err(format!("expected `key = value`, found {line:?}")))?;
            if value.is_empty() {
                return Err(err(format!("missing value for `{key}`")));
            }
            if key != "teacher" && !seen.insert(key.to_owned()) {
                return Err(err(format!("duplicate key `{key}`")));
            }
            let t = &mut config.train;
            match key {
                "dim" => t.dim = parse(key, value).map_err(err)?,
                "dropout" => t.dropout_p = parse(key, value).map_err(err)?,
                "batch_size" => t.batch_size = parse(key, value).map_err(err)?,
                "steps" => t.steps = parse(key, value).map_err(err)?,
                "seed" => t.seed = parse(key, value).map_err(err)?,
                "init_scale" => t.init_scale = parse(key, value).map_err(err)?,
                "min_count" => t.min_count = parse(key, value).map_err(err)?,
                "learning_rate" => t.optimizer.learning_rate = parse(key, value).map_err(err)?,
                "adam_decay1" => t.optimizer.decay1 = parse(key, value).map_err(err)?,
                "adam_decay2" => t.optimizer.decay2 = parse(key, value).map_err(err)?,
                "adam_epsilon" => t.optimizer.epsilon = parse(key, value).map_err(err)?,
                "lr_schedule" => schedule = Some((value.to_owned(), line_no)),
                "warmup_fraction" => warmup = parse(key, value).map_err(err)?,
                "tau1" => t.temperatures.tau1 = parse(key, value).map_err(err)?,
                "tau2" => t.temperatures.tau2 = parse(key, value).map_err(err)?,
                "tau3" => t.temperatures.tau3 = parse(key, value).map_err(err)?,
                "alpha" => t.weights.alpha = parse(key, value).map_err(err)?,
                "beta" => t.weights.beta = parse(key, value).map_err(err)?,
                "gamma" => t.weights.gamma = parse(key, value).map_err(err)?,
                "method" => t.method = value.parse().map_err(|e| err(format!("{e}")))?,
                "eval_interval" => t.eval_interval = parse(key, value).map_err(err)?,
                "select_metric" => {
                    t.select_metric = value.parse().map_err(|e| err(format!("{e}")))?
                }
                "corpus" => config.corpus = Some(base.join(value)),
                "teacher" => config.teachers.push(base.join(value)),
                "validation" => config.validation = Some(base.join(value)),
                "out" => config.out = Some(base.join(value)),
                "report" => config.report = Some(base.join(value)),
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        config.train.lr_schedule = match schedule {
            None => LrSchedule::Constant,
            Some((s, _)) if s == "constant" => LrSchedule::Constant,
            Some((s, _)) if s == "linear" => LrSchedule::Linear { warmup },
            Some((s, line)) => {
                return Err(ConfigError {
                    source: source.to_owned(),
                    line,
                    message: format!("unknown lr_schedule {s:?} (expected constant or linear)"),
                })
            }
        };
        Ok(config)
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("invalid value {value:?} for `{key}`"))
}
