//! `RunConfig`: flat `key = value` files, flag overrides, canonical echo.

use std::path::Path;

use exact_cantor::cantor::{ConstructionConfig, Mode};
use exact_cantor::certified::MAX_BITS;
use exact_cantor::{ApproxFunction, Ball, Rational, SpaceKind, SystemKind};
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Every key accepted in a config file, in echo order.
pub const KEYS: &[&str] = &[
    "space",
    "system",
    "psi",
    "alpha",
    "beta",
    "c",
    "root",
    "mode",
    "levels",
    "seed",
    "branching",
    "max_candidates",
    "precision_bits",
    "max_n_bits",
];

/// The resolved settings of one run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunConfig {
    pub space: SpaceKind,
    pub system: SystemKind,
    pub psi: ApproxFunction,
    pub alpha: Rational,
    pub beta: Rational,
    pub c: Rational,
    pub root: Option<Ball>,
    pub mode: Mode,
    pub levels: usize,
    pub seed: u64,
    pub branching: usize,
    pub max_candidates: usize,
    pub max_n_bits: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::from_construction(&ConstructionConfig::default())
    }
}

/// One `key = value` setting with where it came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Setting {
    pub origin: String,
    pub key: String,
    pub value: String,
}

/// Parse a flat config text. Blank lines and `#` comments are skipped.
pub fn parse_settings(text: &str, source: &str) -> CliResult<Vec<Setting>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let origin = format!("{source}:{}", i + 1);
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::config(&origin, format!("expected key = value, got {line:?}")))?;
        out.push(Setting {
            origin,
            key: k.trim().to_string(),
            value: v.trim().to_string(),
        });
    }
    Ok(out)
}

pub fn read_settings(path: &Path) -> CliResult<Vec<Setting>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::file(path, e))?;
    parse_settings(&text, &path.display().to_string())
}

fn parse<T: std::str::FromStr>(origin: &str, key: &str, value: &str) -> CliResult<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::config(origin, format!("{key} = {value:?}: {e}")))
}

/// `center:radius`.
pub fn parse_ball(s: &str) -> exact_cantor::Result<Ball> {
    let (c, r) = s
        .split_once(':')
        .ok_or_else(|| exact_cantor::Error::Parse(format!("ball {s:?} is not center:radius")))?;
    let radius: Rational = r.parse()?;
    if !radius.is_positive() {
        return Err(exact_cantor::Error::Parse(format!(
            "ball radius must be positive in {s:?}"
        )));
    }
    Ok(Ball::new(c.parse()?, radius))
}

/// `lo:hi` with `lo <= hi`.
pub fn parse_pair(s: &str) -> exact_cantor::Result<(Rational, Rational)> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| exact_cantor::Error::Parse(format!("{s:?} is not lo:hi")))?;
    let (a, b): (Rational, Rational) = (a.parse()?, b.parse()?);
    if a > b {
        return Err(exact_cantor::Error::Parse(format!("{s:?} has lo > hi")));
    }
    Ok((a, b))
}

fn short(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        r.to_string()
    }
}

impl RunConfig {
    pub fn from_construction(cfg: &ConstructionConfig) -> Self {
        RunConfig {
            space: cfg.space,
            system: cfg.system,
            psi: cfg.psi.clone(),
            alpha: cfg.alpha.clone(),
            beta: cfg.beta.clone(),
            c: cfg.c.clone(),
            root: cfg.root.clone(),
            mode: cfg.mode,
            levels: cfg.levels,
            seed: cfg.seed,
            branching: cfg.branching,
            max_candidates: cfg.max_candidates,
            max_n_bits: cfg.max_n_bits,
        }
    }

    /// Apply settings in order; later ones win.
    pub fn apply(&mut self, settings: &[Setting]) -> CliResult<()> {
        for s in settings {
            self.set(&s.origin, &s.key, &s.value)?;
        }
        Ok(())
    }

    pub fn set(&mut self, origin: &str, key: &str, value: &str) -> CliResult<()> {
        match key {
            "space" => self.space = parse(origin, key, value)?,
            "system" => self.system = parse(origin, key, value)?,
            "psi" => {
                let bits = self.psi.precision_bits;
                self.psi = parse::<ApproxFunction>(origin, key, value)?.with_precision(bits);
            }
            "tau" => {
                let tau = parse(origin, key, value)?;
                let bits = self.psi.precision_bits;
                self.psi = ApproxFunction::new(self.psi.scale.clone(), tau)
                    .map_err(|e| CliError::config(origin, format!("tau = {value:?}: {e}")))?
                    .with_precision(bits);
            }
            "alpha" => self.alpha = parse(origin, key, value)?,
            "beta" => self.beta = parse(origin, key, value)?,
            "c" => {
                let c: Rational = parse(origin, key, value)?;
                if c < Rational::one() {
                    return Err(CliError::config(origin, format!("c = {value:?}: must be at least 1")));
                }
                self.c = c;
            }
            "root" => {
                self.root = match value {
                    "" | "random" => None,
                    v => Some(parse_ball(v).map_err(|e| CliError::config(origin, format!("root = {v:?}: {e}")))?),
                }
            }
            "mode" => self.mode = parse(origin, key, value)?,
            "levels" => {
                self.levels = parse(origin, key, value)?;
                if self.levels == 0 {
                    return Err(CliError::config(origin, "levels must be at least 1"));
                }
            }
            "seed" => self.seed = parse(origin, key, value)?,
            "branching" => self.branching = parse(origin, key, value)?,
            "max_candidates" => self.max_candidates = parse(origin, key, value)?,
            "precision_bits" => {
                let bits: u32 = parse(origin, key, value)?;
                if !(16..=MAX_BITS).contains(&bits) {
                    return Err(CliError::config(
                        origin,
                        format!("precision_bits must lie in 16..={MAX_BITS}"),
                    ));
                }
                self.psi = self.psi.clone().with_precision(bits);
            }
            "max_n_bits" => self.max_n_bits = parse(origin, key, value)?,
            other => {
                return Err(CliError::config(
                    origin,
                    format!("unknown key {other:?}; expected one of {}", KEYS.join(", ")),
                ))
            }
        }
        Ok(())
    }

    pub fn construction(&self) -> ConstructionConfig {
        ConstructionConfig {
            space: self.space,
            system: self.system,
            psi: self.psi.clone(),
            alpha: self.alpha.clone(),
            beta: self.beta.clone(),
            c: self.c.clone(),
            root: self.root.clone(),
            mode: self.mode,
            levels: self.levels,
            seed: self.seed,
            branching: self.branching,
            max_candidates: self.max_candidates,
            max_n_bits: self.max_n_bits,
            ..ConstructionConfig::default()
        }
    }

    /// Canonical `(key, value)` pairs; parsing them back gives `self`.
    pub fn entries(&self) -> Vec<(String, String)> {
        let root = match &self.root {
            Some(b) => format!("{}:{}", short(b.center.coord()), short(&b.radius)),
            None => "random".to_string(),
        };
        let values = [
            self.space.to_string(),
            self.system.to_string(),
            self.psi.to_string(),
            short(&self.alpha),
            short(&self.beta),
            short(&self.c),
            root,
            self.mode.to_string(),
            self.levels.to_string(),
            self.seed.to_string(),
            self.branching.to_string(),
            self.max_candidates.to_string(),
            self.psi.precision_bits.to_string(),
            self.max_n_bits.to_string(),
        ];
        KEYS.iter().map(|k| k.to_string()).zip(values).collect()
    }

    /// The config as file text.
    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

/// The config echo embedded in reports: settings plus command parameters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Echo(pub Vec<(String, String)>);

impl Echo {
    pub fn of(cfg: &RunConfig) -> Self {
        Echo(cfg.entries())
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.0.push((key.to_string(), value.to_string()));
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn file_text_overrides_and_comments() {
        let text = "# experiment\npsi = pow:a=1,tau=3\n\nlevels = 2  # shallow\nseed=9\n";
        let s = parse_settings(text, "run.cfg").unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s[1].origin, "run.cfg:4");
        let mut cfg = RunConfig::default();
        cfg.apply(&s).unwrap();
        assert_eq!(cfg.psi.tau, Rational::from(3));
        assert_eq!((cfg.levels, cfg.seed), (2, 9));
        cfg.set("--seed", "seed", "4").unwrap();
        assert_eq!(cfg.seed, 4);
    }

    #[test]
    fn diagnostics_name_line_and_field() {
        let err = parse_settings("a = 1\nnonsense\n", "x.cfg").unwrap_err();
        assert!(err.to_string().starts_with("x.cfg:2:"), "{err}");
        let mut cfg = RunConfig::default();
        let s = parse_settings("levels = many\n", "x.cfg").unwrap();
        let err = cfg.apply(&s).unwrap_err();
        assert!(
            err.to_string().contains("x.cfg:1") && err.to_string().contains("levels"),
            "{err}"
        );
        let err = cfg.set("x.cfg:3", "colour", "red").unwrap_err();
        assert!(err.to_string().contains("unknown key"), "{err}");
        assert!(cfg.set("--c", "c", "1/2").is_err());
        assert!(cfg.set("--psi", "psi", "pow:a=1,tau=1").is_err());
    }

    #[test]
    fn tau_keeps_scale() {
        let mut cfg = RunConfig::default();
        cfg.set("f", "psi", "pow:a=3,tau=3").unwrap();
        cfg.set("f", "tau", "5/4").unwrap();
        assert_eq!(cfg.psi.to_string(), "pow:a=3,tau=5/4");
    }

    #[test]
    fn defaults_match_the_engine() {
        assert_eq!(RunConfig::default().construction(), ConstructionConfig::default());
    }

    proptest! {
        #[test]
        fn echo_round_trips(
            tau_n in 9i64..40, levels in 1usize..9, seed in any::<u64>(),
            c in 1i64..6, rootq in 2i64..50, mode in any::<bool>(), bits in 16u32..512,
        ) {
            let mut cfg = RunConfig::default();
            cfg.set("t", "psi", &format!("pow:a=1/2,tau={tau_n}/4")).unwrap();
            cfg.levels = levels;
            cfg.seed = seed;
            cfg.c = Rational::from(c);
            cfg.root = Some(Ball::new(Rational::new(1, rootq), Rational::new(1, rootq * rootq)));
            cfg.mode = if mode { Mode::Strict } else { Mode::Practical };
            cfg.psi = cfg.psi.clone().with_precision(bits);
            let mut back = RunConfig::default();
            back.apply(&parse_settings(&cfg.to_text(), "echo").unwrap()).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}
