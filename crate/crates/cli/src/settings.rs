use serde::Deserialize;

/// Optional defaults file pointed at by `MF_DEFAULTS`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefaultsFile {
    pub workers: Option<usize>,
    pub log_level: Option<String>,
    pub shard_bytes: Option<u64>,
    pub min_chars: Option<usize>,
}

/// Effective settings. Precedence: command-line flag, then `MF_*` environment
/// variable, then the defaults file, then the built-in value.
#[derive(Debug, Clone)]
pub struct Settings {
    pub workers: usize,
    pub log_level: LogLevel,
    pub shard_bytes: u64,
    pub min_chars: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum LogLevel {
    Off,
    Error,
    Info,
    Debug,
}

impl LogLevel {
    fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "off" => Some(LogLevel::Off),
            "error" => Some(LogLevel::Error),
            "info" => Some(LogLevel::Info),
            "debug" => Some(LogLevel::Debug),
            _ => None,
        }
    }
}

fn env_parsed<T: std::str::FromStr>(key: &str) -> Option<T> {
    std::env::var(key).ok().and_then(|v| v.parse().ok())
}

fn load_defaults_file() -> DefaultsFile {
    let Some(path) = std::env::var_os("MF_DEFAULTS") else {
        return DefaultsFile::default();
    };
    match std::fs::read_to_string(&path) {
        Ok(text) => serde_yaml::from_str(&text).unwrap_or_else(|e| {
            eprintln!("warning: ignoring malformed defaults file {path:?}: {e}");
            DefaultsFile::default()
        }),
        Err(e) => {
            eprintln!("warning: cannot read defaults file {path:?}: {e}");
            DefaultsFile::default()
        }
    }
}

impl Settings {
    pub fn resolve(
        workers_flag: Option<usize>,
        log_level_flag: Option<&str>,
        shard_bytes_flag: Option<u64>,
        min_chars_flag: Option<usize>,
    ) -> Settings {
        let file = load_defaults_file();
        let workers = workers_flag
            .or_else(|| env_parsed("MF_WORKERS"))
            .or(file.workers)
            .unwrap_or_else(|| {
                std::thread::available_parallelism()
                    .map(|n| n.get().min(8))
                    .unwrap_or(1)
            })
            .max(1);
        let log_level = log_level_flag
            .and_then(LogLevel::parse)
            .or_else(|| std::env::var("MF_LOG_LEVEL").ok().as_deref().and_then(LogLevel::parse))
            .or_else(|| file.log_level.as_deref().and_then(LogLevel::parse))
            .unwrap_or(LogLevel::Info);
        let shard_bytes = shard_bytes_flag
            .or_else(|| env_parsed("MF_SHARD_BYTES"))
            .or(file.shard_bytes)
            .unwrap_or(mergeforge::corpus::JsonlShardSink::DEFAULT_SHARD_BYTES)
            .max(1);
        let min_chars = min_chars_flag
            .or_else(|| env_parsed("MF_MIN_CHARS"))
            .or(file.min_chars)
            .unwrap_or(1);
        Settings {
            workers,
            log_level,
            shard_bytes,
            min_chars,
        }
    }

    pub fn info(&self, message: impl AsRef<str>) {
        if self.log_level >= LogLevel::Info {
            eprintln!("{}", message.as_ref());
        }
    }

    pub fn debug(&self, message: impl AsRef<str>) {
        if self.log_level >= LogLevel::Debug {
            eprintln!("{}", message.as_ref());
        }
    }
}
