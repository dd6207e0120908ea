use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use occtime_core::chains::Coupling;

use crate::error::{LabError, LabResult};

/// Experiment kinds understood by the runner.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Dk,
    Ratio,
    Duality,
    IterateSums,
    Oscillating,
    SumsMaxima,
    Renewal,
    MassEscape,
    CompareSums,
}

impl Kind {
    pub const ALL: [Kind; 9] = [
        Kind::Dk,
        Kind::Ratio,
        Kind::Duality,
        Kind::IterateSums,
        Kind::Oscillating,
        Kind::SumsMaxima,
        Kind::Renewal,
        Kind::MassEscape,
        Kind::CompareSums,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Dk => "dk",
            Kind::Ratio => "ratio",
            Kind::Duality => "duality",
            Kind::IterateSums => "iterate-sums",
            Kind::Oscillating => "oscillating",
            Kind::SumsMaxima => "sums-maxima",
            Kind::Renewal => "renewal",
            Kind::MassEscape => "mass-escape",
            Kind::CompareSums => "compare-sums",
        }
    }

    pub fn parse(s: &str) -> LabResult<Kind> {
        Kind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| LabError::Validation(format!("unknown experiment kind `{s}`")))
    }

    /// Orbit-engine experiments on an interval map.
    pub fn uses_map(self) -> bool {
        matches!(self, Kind::Dk | Kind::Ratio | Kind::Duality | Kind::IterateSums | Kind::MassEscape)
    }

    fn required(self) -> &'static [&'static str] {
        match self {
            Kind::Dk | Kind::Ratio | Kind::Duality | Kind::MassEscape => &["seed", "n_steps", "n_trials"],
            Kind::IterateSums => &["seed", "n_steps"],
            Kind::Oscillating => &["seed", "levels"],
            Kind::SumsMaxima => &["seed", "n_steps", "n_trials", "phi"],
            Kind::Renewal => &["seed", "n_steps", "n_trials", "zeta"],
            Kind::CompareSums => &["seed", "n_steps", "f", "g", "kappa"],
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parse a nonnegative integer, also written as `1e6` or `2.5e3`.
pub fn parse_count(s: &str) -> Result<u64, String> {
    let s = s.trim().replace('_', "");
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let x: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    float_count(x)
}

fn float_count(x: f64) -> Result<u64, String> {
    if !(x >= 0.0 && x.fract() == 0.0 && x < 1.8e19) {
        return Err(format!("{x} is not a nonnegative integer"));
    }
    Ok(x as u64)
}

/// A nonnegative integer that also deserializes from `1e6` or `"1e6"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Count(pub u64);

impl Serialize for Count {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(self.0)
    }
}

impl<'de> Deserialize<'de> for Count {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Count;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a nonnegative integer such as 1000000 or \"1e6\"")
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Count, E> {
                Ok(Count(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Count, E> {
                u64::try_from(v).map(Count).map_err(|_| E::custom("count must be nonnegative"))
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Count, E> {
                float_count(v).map(Count).map_err(E::custom)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Count, E> {
                parse_count(v).map(Count).map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

/// Everything needed to reproduce one experiment. Absent fields take the
/// kind's defaults; [`ExperimentConfig::resolve`] writes them out.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<Kind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<Count>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<Count>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_trials: Option<Count>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<Count>>,
    /// `A = [0, delta_a)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_a: Option<f64>,
    /// `B = (1 - delta_b, 1]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_b: Option<f64>,
    /// Open interval `M = (lo, hi)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<[f64; 2]>,
    /// Middle interval `(epsilon, 1 - epsilon)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record_returns: Option<bool>,
    /// Lifetime law `P[L = k] ∝ k^-zeta` of the renewal chain.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zeta: Option<f64>,
    /// Tail `P[X > k] ~ k^-a (ln k)^-b (ln ln k)^-c` as `[a, b, c]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupling: Option<Coupling>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<Count>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<Count>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<f64>,
    /// `f(x) = x - f[0] x^f[1]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    /// Output directory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "OCCTIME_OUT_DIR";

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> LabResult<Self> {
        toml::from_str(text).map_err(|e| LabError::Validation(e.to_string()))
    }

    pub fn from_json(text: &str) -> LabResult<Self> {
        serde_json::from_str(text).map_err(|e| LabError::Validation(e.to_string()))
    }

    /// TOML, or JSON for a `.json` extension.
    pub fn from_file(path: &Path) -> LabResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs always serialize")
    }

    /// Fields set in `other` replace those here.
    pub fn overlay(mut self, other: ExperimentConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            kind, seed, c, p0, p1, n_steps, n_trials, checkpoints, delta_a, delta_b, m, epsilon, record_returns, zeta,
            phi, psi, coupling, cutoff, levels, depth, f, g, kappa, out
        );
        self
    }

    fn is_set(&self, field: &str) -> bool {
        match field {
            "seed" => self.seed.is_some(),
            "n_steps" => self.n_steps.is_some(),
            "n_trials" => self.n_trials.is_some(),
            "phi" => self.phi.is_some(),
            "zeta" => self.zeta.is_some(),
            "levels" => self.levels.is_some(),
            "f" => self.f.is_some(),
            "g" => self.g.is_some(),
            "kappa" => self.kappa.is_some(),
            _ => unreachable!("unknown field {field}"),
        }
    }

    /// Check completeness and fill in defaults. Every missing required field
    /// is reported at once.
    pub fn resolve(&self) -> LabResult<ExperimentConfig> {
        let Some(kind) = self.kind else {
            let mut missing = vec!["kind"];
            if self.seed.is_none() {
                missing.push("seed");
            }
            return Err(LabError::Validation(format!("missing required fields: {}", missing.join(", "))));
        };
        let missing: Vec<&str> = kind.required().iter().copied().filter(|f| !self.is_set(f)).collect();
        if !missing.is_empty() {
            return Err(LabError::Validation(format!("missing required fields for {kind}: {}", missing.join(", "))));
        }
        let mut r = self.clone();
        let n = r.n_steps.map(|c| c.0);
        let stray = |name: &str, set: bool| -> LabResult<()> {
            if set {
                Err(LabError::Validation(format!("field `{name}` does not apply to {kind}")))
            } else {
                Ok(())
            }
        };
        if kind.uses_map() {
            r.c.get_or_insert(0.5);
            r.p0.get_or_insert(1.0);
            r.p1.get_or_insert(1.0);
        } else {
            stray("c", r.c.is_some())?;
            stray("p0", r.p0.is_some())?;
            stray("p1", r.p1.is_some())?;
        }
        let orbit = matches!(kind, Kind::Dk | Kind::Ratio | Kind::Duality | Kind::MassEscape);
        let stochastic = orbit || matches!(kind, Kind::SumsMaxima | Kind::Renewal);
        if stochastic {
            if r.checkpoints.is_none() {
                let cps = occtime_core::orbit::geometric_checkpoints(n.unwrap_or(0));
                r.checkpoints = Some(cps.into_iter().map(Count).collect());
            }
            let cps = r.checkpoints.as_ref().unwrap();
            if cps.is_empty() || cps.windows(2).any(|w| w[1] <= w[0]) || cps.last().unwrap().0 > n.unwrap() {
                return Err(LabError::Validation(
                    "checkpoints must be nonempty, strictly increasing and at most n_steps".into(),
                ));
            }
        } else {
            stray("checkpoints", r.checkpoints.is_some())?;
            stray("n_trials", r.n_trials.is_some())?;
        }
        if orbit {
            r.record_returns.get_or_insert(false);
        } else {
            stray("record_returns", r.record_returns.is_some())?;
        }
        if kind == Kind::Ratio {
            if r.delta_a.is_some() != r.delta_b.is_some() {
                return Err(LabError::Validation("delta_a and delta_b must be given together".into()));
            }
        } else {
            stray("delta_a", r.delta_a.is_some())?;
            stray("delta_b", r.delta_b.is_some())?;
        }
        if kind == Kind::Dk {
            let c = r.c.unwrap();
            r.m.get_or_insert([c, 1.0]);
        } else if kind != Kind::Duality {
            stray("m", r.m.is_some())?;
        }
        if kind == Kind::MassEscape {
            r.epsilon.get_or_insert(0.1);
        } else {
            stray("epsilon", r.epsilon.is_some())?;
        }
        if kind == Kind::SumsMaxima {
            if r.psi.is_none() {
                if r.coupling == Some(Coupling::Independent) {
                    return Err(LabError::Validation("independent coupling needs psi".into()));
                }
                r.psi = r.phi;
                r.coupling = Some(Coupling::Identical);
            }
            r.coupling.get_or_insert(Coupling::Independent);
            r.cutoff.get_or_insert(Count(occtime_core::regvar::DEFAULT_CUTOFF as u64));
        } else {
            stray("psi", r.psi.is_some())?;
            stray("phi", r.phi.is_some())?;
            stray("coupling", r.coupling.is_some())?;
            stray("cutoff", r.cutoff.is_some())?;
        }
        if kind != Kind::Renewal {
            stray("zeta", r.zeta.is_some())?;
        }
        if kind == Kind::Oscillating {
            stray("n_steps", r.n_steps.is_some())?;
            r.depth.get_or_insert(occtime_core::regvar::DEFAULT_DEPTH);
        } else {
            stray("levels", r.levels.is_some())?;
            stray("depth", r.depth.is_some())?;
        }
        if kind != Kind::CompareSums {
            stray("f", r.f.is_some())?;
            stray("g", r.g.is_some())?;
            stray("kappa", r.kappa.is_some())?;
        }
        if matches!(r.n_steps, Some(Count(0))) {
            return Err(LabError::Validation("n_steps must be positive".into()));
        }
        if matches!(r.n_trials, Some(Count(0))) {
            return Err(LabError::Validation("n_trials must be positive".into()));
        }
        Ok(r)
    }

    /// Output directory: the configured one, else `$OCCTIME_OUT_DIR`, else
    /// `occtime-out`.
    pub fn output_dir(&self) -> PathBuf {
        if let Some(p) = &self.out {
            return p.clone();
        }
        match std::env::var_os(OUT_DIR_ENV) {
            Some(p) if !p.is_empty() => PathBuf::from(p),
            _ => PathBuf::from("occtime-out"),
        }
    }
}
