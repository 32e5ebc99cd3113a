//! Experiment description files.
//!
//! A description is a TOML document with a `[source]` table (the joint
//! law of `U, V, X` and the broadcast channel) and an optional
//! `[experiment]` table (block lengths, block counts and sampling
//! parameters). Command-line flags override the experiment table.

use std::path::Path;

use polarsec_core::source::{bec, bsc, cascade_uvx, identity_channel, product_channel, uniform_x_uvx};
use polarsec_core::{JointSource, Method};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::Spanned;

use crate::error::HarnessError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    source: Spanned<RawSource>,
    #[serde(default)]
    experiment: Option<Spanned<RawExperiment>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSource {
    uvx: Spanned<UvxSpec>,
    #[serde(default)]
    bob: Option<Spanned<ChannelSpec>>,
    #[serde(default)]
    eve: Option<Spanned<ChannelSpec>>,
    #[serde(default)]
    joint: Option<Spanned<JointChannelSpec>>,
}

/// Law of `(U, V, X)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum UvxSpec {
    /// `U` constant, `V = X` uniform.
    UniformX,
    /// `U ~ Bern(p_u)`, `V = U ⊕ Bern(a)`, `X = V ⊕ Bern(b)`.
    Cascade { p_u: f64, a: f64, b: f64 },
    /// `p(u, v, x)` at index `4u + 2v + x`.
    Table { p: Vec<f64> },
}

/// One receiver's channel `p(out | x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ChannelSpec {
    Bsc { p: f64 },
    Bec { e: f64 },
    Identity,
    /// Row-major `x·card + out`.
    Table { card: usize, p: Vec<f64> },
}

/// Joint channel `p(y, z | x)` at `x·|Y||Z| + y·|Z| + z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointChannelSpec {
    pub card_y: usize,
    pub card_z: usize,
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    n: Option<Spanned<Vec<usize>>>,
    k: Option<Spanned<Vec<usize>>>,
    beta: Option<Spanned<f64>>,
    method: Option<Spanned<String>>,
    samples: Option<usize>,
    trials: Option<usize>,
    seed: Option<u64>,
}

/// The source part of a description, kept for hashing and reporting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceSpec {
    pub uvx: UvxSpec,
    pub bob: Option<ChannelSpec>,
    pub eve: Option<ChannelSpec>,
    pub joint: Option<JointChannelSpec>,
}

/// Command-line overrides; `None` keeps the file value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub n: Option<Vec<usize>>,
    pub k: Option<Vec<usize>>,
    pub beta: Option<f64>,
    pub method: Option<Method>,
    pub samples: Option<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
}

/// A validated experiment.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub source_spec: SourceSpec,
    pub source: JointSource,
    pub n: Vec<usize>,
    pub k: Vec<usize>,
    pub beta: f64,
    pub method: Method,
    pub samples: usize,
    pub trials: usize,
    pub seed: u64,
}

pub const DEFAULT_BETA: f64 = 0.25;
pub const DEFAULT_SAMPLES: usize = 10_000;
pub const DEFAULT_TRIALS: usize = 1_000;

pub fn method_tag(m: Method) -> &'static str {
    match m {
        Method::Exact => "exact",
        Method::MonteCarlo => "monte-carlo",
    }
}

pub fn parse_method(s: &str) -> Option<Method> {
    match s {
        "exact" => Some(Method::Exact),
        "monte-carlo" | "mc" => Some(Method::MonteCarlo),
        _ => None,
    }
}

/// 1-based line of a byte offset.
fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn at<T>(text: &str, s: &Spanned<T>, message: impl Into<String>) -> HarnessError {
    HarnessError::Spec { line: line_of(text, s.span().start), message: message.into() }
}

fn channel_table(c: &ChannelSpec) -> Result<(Vec<f64>, usize), String> {
    Ok(match c {
        ChannelSpec::Bsc { p } => {
            check_prob(*p, "p")?;
            (bsc(*p).to_vec(), 2)
        }
        ChannelSpec::Bec { e } => {
            check_prob(*e, "e")?;
            (bec(*e).to_vec(), 3)
        }
        ChannelSpec::Identity => (identity_channel().to_vec(), 2),
        ChannelSpec::Table { card, p } => {
            if *card == 0 || p.len() != 2 * card {
                return Err(format!("a channel table with card = {card} needs {} entries, got {}", 2 * card, p.len()));
            }
            (p.clone(), *card)
        }
    })
}

fn check_prob(p: f64, name: &str) -> Result<(), String> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(format!("{name} = {p} is not a probability"))
    }
}

impl SourceSpec {
    /// The joint source this description denotes.
    pub fn build(&self) -> Result<JointSource, String> {
        let uvx: Vec<f64> = match &self.uvx {
            UvxSpec::UniformX => uniform_x_uvx().to_vec(),
            UvxSpec::Cascade { p_u, a, b } => {
                for (v, n) in [(p_u, "p_u"), (a, "a"), (b, "b")] {
                    check_prob(*v, n)?;
                }
                cascade_uvx(*p_u, *a, *b).to_vec()
            }
            UvxSpec::Table { p } => p.clone(),
        };
        let (table, cy, cz) = match (&self.joint, &self.bob, &self.eve) {
            (Some(j), None, None) => (j.p.clone(), j.card_y, j.card_z),
            (None, Some(b), Some(e)) => {
                let (bt, cy) = channel_table(b)?;
                let (et, cz) = channel_table(e)?;
                if bt.len() != 2 * cy || et.len() != 2 * cz {
                    return Err("channel table has the wrong length".into());
                }
                (product_channel(&bt, cy, &et, cz), cy, cz)
            }
            _ => return Err("give either [source.joint] or both [source.bob] and [source.eve]".into()),
        };
        let source = JointSource::from_factors(&uvx, &table, cy, cz).map_err(|e| e.to_string())?;
        let report = source.validate();
        if !report.is_valid() {
            let msgs: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
            return Err(msgs.join("; "));
        }
        Ok(source)
    }
}

impl ExperimentSpec {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Usage(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, overrides)
    }

    pub fn parse(text: &str, overrides: &Overrides) -> Result<Self, HarnessError> {
        let raw: RawSpec = toml::from_str(text).map_err(|e| HarnessError::Spec {
            line: e.span().map(|s| line_of(text, s.start)).unwrap_or(1),
            message: e.message().to_string(),
        })?;
        let src = raw.source.get_ref();
        let source_spec = SourceSpec {
            uvx: src.uvx.get_ref().clone(),
            bob: src.bob.as_ref().map(|s| s.get_ref().clone()),
            eve: src.eve.as_ref().map(|s| s.get_ref().clone()),
            joint: src.joint.as_ref().map(|s| s.get_ref().clone()),
        };
        let source = source_spec.build().map_err(|m| at(text, &raw.source, m))?;

        let exp = raw.experiment.as_ref().map(|e| e.get_ref().clone()).unwrap_or_default();
        let n = match (&overrides.n, &exp.n) {
            (Some(v), _) => v.clone(),
            (None, Some(s)) => {
                if let Some(bad) = s.get_ref().iter().find(|&&n| !valid_len(n)) {
                    return Err(at(text, s, format!("block length {bad} is not a power of two of at least 2")));
                }
                s.get_ref().clone()
            }
            (None, None) => vec![64],
        };
        let k = match (&overrides.k, &exp.k) {
            (Some(v), _) => v.clone(),
            (None, Some(s)) => {
                if s.get_ref().contains(&0) {
                    return Err(at(text, s, "block counts must be at least 1"));
                }
                s.get_ref().clone()
            }
            (None, None) => vec![2],
        };
        let beta = match (overrides.beta, &exp.beta) {
            (Some(b), _) => b,
            (None, Some(s)) => {
                let b = *s.get_ref();
                if !(b > 0.0 && b < 0.5) {
                    return Err(at(text, s, format!("beta = {b} must lie in (0, 0.5)")));
                }
                b
            }
            (None, None) => DEFAULT_BETA,
        };
        let method = match (overrides.method, &exp.method) {
            (Some(m), _) => m,
            (None, Some(s)) => parse_method(s.get_ref())
                .ok_or_else(|| at(text, s, format!("unknown method `{}` (exact, monte-carlo)", s.get_ref())))?,
            (None, None) => Method::MonteCarlo,
        };
        let spec = ExperimentSpec {
            source_spec,
            source,
            n,
            k,
            beta,
            method,
            samples: overrides.samples.or(exp.samples).unwrap_or(DEFAULT_SAMPLES),
            trials: overrides.trials.or(exp.trials).unwrap_or(DEFAULT_TRIALS),
            seed: overrides.seed.or(exp.seed).unwrap_or(0),
        };
        spec.check()?;
        Ok(spec)
    }

    /// Range checks that also cover overridden values.
    fn check(&self) -> Result<(), HarnessError> {
        if self.n.is_empty() || self.k.is_empty() {
            return Err(HarnessError::Usage("the block length and block count lists must be nonempty".into()));
        }
        if let Some(bad) = self.n.iter().find(|&&n| !valid_len(n)) {
            return Err(HarnessError::Usage(format!("block length {bad} is not a power of two of at least 2")));
        }
        if self.k.contains(&0) {
            return Err(HarnessError::Usage("block counts must be at least 1".into()));
        }
        if !(self.beta > 0.0 && self.beta < 0.5) {
            return Err(HarnessError::Usage(format!("beta = {} must lie in (0, 0.5)", self.beta)));
        }
        if self.method == Method::MonteCarlo && self.samples == 0 {
            return Err(HarnessError::Usage("Monte-Carlo profiles need at least one sample".into()));
        }
        if self.trials == 0 {
            return Err(HarnessError::Usage("at least one trial is required".into()));
        }
        Ok(())
    }

    /// SHA-256 of the resolved description, overrides included.
    pub fn hash(&self) -> String {
        #[derive(Serialize)]
        struct Canonical<'a> {
            source: &'a SourceSpec,
            n: &'a [usize],
            k: &'a [usize],
            beta: f64,
            method: &'static str,
            samples: usize,
            trials: usize,
            seed: u64,
        }
        let c = Canonical {
            source: &self.source_spec,
            n: &self.n,
            k: &self.k,
            beta: self.beta,
            method: method_tag(self.method),
            samples: self.samples,
            trials: self.trials,
            seed: self.seed,
        };
        sha256_hex(serde_json::to_string(&c).expect("serializable").as_bytes())
    }
}

fn valid_len(n: usize) -> bool {
    n >= 2 && n.is_power_of_two()
}

/// SHA-256 of the numeric tables of a source.
pub fn source_hash(source: &JointSource) -> String {
    let mut h = Sha256::new();
    h.update((source.card_y() as u64).to_le_bytes());
    h.update((source.card_z() as u64).to_le_bytes());
    for p in source.factor_uvx().iter().chain(source.factor_yz_given_x()) {
        h.update(p.to_bits().to_le_bytes());
    }
    hex::encode(h.finalize())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
[source]
uvx = { kind = "uniform-x" }
bob = { kind = "bsc", p = 0.05 }
eve = { kind = "bsc", p = 0.25 }

[experiment]
n = [64, 256]
k = [2, 16]
seed = 7
"#;

    #[test]
    fn parses_the_running_example() {
        let s = ExperimentSpec::parse(EXAMPLE, &Overrides::default()).unwrap();
        assert_eq!(s.n, vec![64, 256]);
        assert_eq!(s.k, vec![2, 16]);
        assert_eq!(s.seed, 7);
        assert_eq!(s.beta, DEFAULT_BETA);
        assert_eq!(s.method, Method::MonteCarlo);
        assert_eq!(s.source, JointSource::bsc_example(0.05, 0.25).unwrap());
    }

    #[test]
    fn overrides_change_the_hash() {
        let a = ExperimentSpec::parse(EXAMPLE, &Overrides::default()).unwrap();
        let b = ExperimentSpec::parse(EXAMPLE, &Overrides { seed: Some(8), ..Default::default() }).unwrap();
        assert_eq!(b.seed, 8);
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), ExperimentSpec::parse(EXAMPLE, &Overrides::default()).unwrap().hash());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad_n = EXAMPLE.replace("n = [64, 256]", "n = [64, 100]");
        match ExperimentSpec::parse(&bad_n, &Overrides::default()) {
            Err(HarnessError::Spec { line, .. }) => assert_eq!(line, 8),
            other => panic!("{other:?}"),
        }
        let syntax = EXAMPLE.replace("seed = 7", "seed = ");
        match ExperimentSpec::parse(&syntax, &Overrides::default()) {
            Err(HarnessError::Spec { line, .. }) => assert_eq!(line, 10),
            other => panic!("{other:?}"),
        }
        let bad_p = EXAMPLE.replace("p = 0.05", "p = 1.5");
        assert!(matches!(ExperimentSpec::parse(&bad_p, &Overrides::default()), Err(HarnessError::Spec { line: 2, .. })));
        let unknown = EXAMPLE.replace("seed = 7", "sed = 7");
        assert!(matches!(ExperimentSpec::parse(&unknown, &Overrides::default()), Err(HarnessError::Spec { .. })));
    }

    #[test]
    fn standing_assumptions_are_enforced() {
        // Eve better than Bob leaves no secrecy.
        let swapped = EXAMPLE.replace("p = 0.05", "p = 0.3");
        let err = ExperimentSpec::parse(&swapped, &Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("not positive"), "{err}");
    }

    #[test]
    fn joint_channel_and_tables() {
        let text = r#"
[source]
uvx = { kind = "table", p = [0.5, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0] }
joint = { card_y = 2, card_z = 1, p = [0.9, 0.1, 0.2, 0.8] }
"#;
        let s = ExperimentSpec::parse(text, &Overrides::default()).unwrap();
        assert_eq!((s.source.card_y(), s.source.card_z()), (2, 1));
        let mixed = text.replace("joint =", "bob = { kind = \"identity\" }\njoint =");
        assert!(ExperimentSpec::parse(&mixed, &Overrides::default()).is_err());
    }
}
