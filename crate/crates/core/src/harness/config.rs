//! Experiment manifests.
//!
//! A manifest is a TOML file:
//!
//! ```toml
//! [block]
//! slots = 10000          # T, required
//! bits_per_slot = 1.0    # B, default 1
//! users = 1              # K, default 1
//! seed = 7               # master seed, default 0
//! channels = 2           # N, optional; inferred from [theta] or [prior]
//!
//! [theta]                # fixed θ shared by all replications
//! values = [0.9, 0.5]
//!
//! [prior]                # θ ~ prior per replication when [theta] is absent;
//! kind = "beta"          # otherwise only the belief of Bayesian strategies
//! a = [1.0, 1.0]
//! b = [1.0, 1.0]
//!
//! [strategy]
//! id = "gittins"
//! discount = 0.9         # gittins only
//! state_truncation = 400 # gittins only
//! tolerance = 1e-4       # gittins only
//! state_budget = 10000000 # optimal-dp only
//!
//! [run]
//! replications = 100
//! outputs = ["loss-curve", "occupancy", "summary"]
//! format = "csv"
//! out = "results/gittins"
//! ```
//!
//! A grid prior is written `kind = "grid"` with `points = [[...], ...]` and
//! `weights = [...]`. Without `[prior]`, Bayesian strategies start from
//! Beta(1, 1) on every channel.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::belief::PriorSpec;
use crate::error::{Error, Result};
use crate::model::{BlockConfig, ThetaVector};
use crate::planning::{GittinsParams, DEFAULT_STATE_BUDGET};

/// Registered strategy names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyId {
    OptimalDp,
    Gittins,
    OneKnown,
    UcbRule1,
    Random,
    Myopic,
    StayWinnerRr,
    StayWinnerRand,
    SymmetricOpt,
    NashTau,
    Rule2,
    Rule3,
}

impl StrategyId {
    pub const ALL: [StrategyId; 12] = [
        StrategyId::OptimalDp,
        StrategyId::Gittins,
        StrategyId::OneKnown,
        StrategyId::UcbRule1,
        StrategyId::Random,
        StrategyId::Myopic,
        StrategyId::StayWinnerRr,
        StrategyId::StayWinnerRand,
        StrategyId::SymmetricOpt,
        StrategyId::NashTau,
        StrategyId::Rule2,
        StrategyId::Rule3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyId::OptimalDp => "optimal-dp",
            StrategyId::Gittins => "gittins",
            StrategyId::OneKnown => "one-known",
            StrategyId::UcbRule1 => "ucb-rule1",
            StrategyId::Random => "random",
            StrategyId::Myopic => "myopic",
            StrategyId::StayWinnerRr => "stay-winner-rr",
            StrategyId::StayWinnerRand => "stay-winner-rand",
            StrategyId::SymmetricOpt => "symmetric-opt",
            StrategyId::NashTau => "nash-tau",
            StrategyId::Rule2 => "rule2",
            StrategyId::Rule3 => "rule3",
        }
    }

    pub fn is_multi_user(self) -> bool {
        matches!(
            self,
            StrategyId::SymmetricOpt | StrategyId::NashTau | StrategyId::Rule2 | StrategyId::Rule3
        )
    }
}

impl fmt::Display for StrategyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown strategy `{s}`")))
    }
}

/// Strategy identifier plus its tuning parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyConfig {
    pub id: StrategyId,
    pub gittins: GittinsParams,
    pub state_budget: u128,
}

impl StrategyConfig {
    pub fn new(id: StrategyId) -> Self {
        Self {
            id,
            gittins: GittinsParams::default(),
            state_budget: DEFAULT_STATE_BUDGET,
        }
    }
}

/// Where each replication's θ comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ThetaSource {
    Fixed(ThetaVector),
    Prior(PriorSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputKind {
    LossCurve,
    Occupancy,
    Summary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::InvalidConfig(format!("unknown format `{s}`, expected csv or json"))),
        }
    }
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub block: BlockConfig,
    pub theta_source: ThetaSource,
    /// Starting belief of Bayesian strategies when θ is fixed.
    pub belief_prior: Option<PriorSpec>,
    pub strategy: StrategyConfig,
    pub replications: usize,
    pub outputs: Vec<OutputKind>,
    pub format: OutputFormat,
    pub output_path: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Config with a fixed θ and defaults elsewhere.
    pub fn fixed(theta: ThetaVector, strategy: StrategyId, n_slots: usize) -> Self {
        Self {
            block: BlockConfig {
                n_channels: theta.n_channels(),
                n_slots,
                ..BlockConfig::default()
            },
            theta_source: ThetaSource::Fixed(theta),
            belief_prior: None,
            strategy: StrategyConfig::new(strategy),
            replications: 1,
            outputs: vec![OutputKind::LossCurve, OutputKind::Occupancy, OutputKind::Summary],
            format: OutputFormat::Csv,
            output_path: None,
        }
    }

    pub fn with_users(mut self, n_users: usize) -> Self {
        self.block.n_users = n_users;
        self
    }

    pub fn with_replications(mut self, replications: usize) -> Self {
        self.replications = replications;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.block.seed = seed;
        self
    }

    pub fn with_bits(mut self, bits_per_slot: f64) -> Self {
        self.block.bits_per_slot = bits_per_slot;
        self
    }

    /// Prior the Bayesian strategies start from.
    pub fn strategy_prior(&self) -> PriorSpec {
        match (&self.theta_source, &self.belief_prior) {
            (ThetaSource::Prior(p), _) => p.clone(),
            (ThetaSource::Fixed(_), Some(p)) => p.clone(),
            (ThetaSource::Fixed(t), None) => PriorSpec::uniform(t.n_channels()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.block.validate()?;
        let n = self.block.n_channels;
        let source_channels = match &self.theta_source {
            ThetaSource::Fixed(t) => t.n_channels(),
            ThetaSource::Prior(p) => {
                p.validate()?;
                p.n_channels()
            }
        };
        if source_channels != n {
            return Err(Error::InvalidConfig(format!(
                "block has {n} channels but θ describes {source_channels}"
            )));
        }
        if let Some(p) = &self.belief_prior {
            p.validate()?;
            if p.n_channels() != n {
                return Err(Error::InvalidConfig(format!("prior describes {} channels, block has {n}", p.n_channels())));
            }
        }
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be at least 1".into()));
        }
        let k = self.block.n_users;
        let id = self.strategy.id;
        if id.is_multi_user() && k < 2 {
            return Err(Error::InvalidConfig(format!("{id} is a multi-user strategy and needs at least 2 users")));
        }
        if !id.is_multi_user() && k != 1 {
            return Err(Error::InvalidConfig(format!("{id} is a single-user strategy; set users = 1")));
        }
        match id {
            StrategyId::OneKnown if n != 2 => {
                return Err(Error::InvalidConfig("one-known needs exactly 2 channels (channel 2 is the known one)".into()))
            }
            StrategyId::Gittins => {
                self.strategy.gittins.validate()?;
                if !matches!(self.strategy_prior(), PriorSpec::Beta { .. }) {
                    return Err(Error::InvalidConfig("gittins needs a beta prior".into()));
                }
            }
            StrategyId::Rule3 if self.block.n_slots < 2 => {
                return Err(Error::InvalidConfig("rule3 needs at least 2 slots".into()))
            }
            _ => {}
        }
        Ok(())
    }

    /// Parses a manifest and applies command-line overrides.
    pub fn from_toml_str(text: &str, overrides: &Overrides) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        file.resolve(overrides)
    }

    pub fn from_path(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text, overrides)
    }

    /// Builds a config from overrides alone (no manifest).
    pub fn from_overrides(overrides: &Overrides) -> Result<Self> {
        ConfigFile::default().resolve(overrides)
    }
}

/// Command-line values that take precedence over the manifest.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub strategy: Option<StrategyId>,
    pub theta: Option<Vec<f64>>,
    pub slots: Option<usize>,
    pub users: Option<usize>,
    pub replications: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<OutputFormat>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    block: BlockSection,
    theta: Option<ThetaSection>,
    prior: Option<PriorSpec>,
    strategy: Option<StrategySection>,
    #[serde(default)]
    run: RunSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockSection {
    channels: Option<usize>,
    slots: Option<usize>,
    bits_per_slot: Option<f64>,
    users: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ThetaSection {
    values: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StrategySection {
    id: String,
    discount: Option<f64>,
    state_truncation: Option<u32>,
    tolerance: Option<f64>,
    state_budget: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    replications: Option<usize>,
    outputs: Option<Vec<OutputKind>>,
    format: Option<OutputFormat>,
    out: Option<PathBuf>,
}

impl ConfigFile {
    fn resolve(self, o: &Overrides) -> Result<ExperimentConfig> {
        let theta = match (&o.theta, self.theta) {
            (Some(v), _) => Some(ThetaVector::new(v.clone())?),
            (None, Some(t)) => Some(ThetaVector::new(t.values)?),
            (None, None) => None,
        };
        let (theta_source, belief_prior) = match (theta, self.prior) {
            (Some(t), prior) => (ThetaSource::Fixed(t), prior),
            (None, Some(p)) => (ThetaSource::Prior(p), None),
            (None, None) => return Err(Error::InvalidConfig("give θ ([theta] or --theta) or a [prior]".into())),
        };
        let inferred = match &theta_source {
            ThetaSource::Fixed(t) => t.n_channels(),
            ThetaSource::Prior(p) => p.n_channels(),
        };
        let n_channels = self.block.channels.unwrap_or(inferred);
        let n_slots = o
            .slots
            .or(self.block.slots)
            .ok_or_else(|| Error::InvalidConfig("the number of slots ([block] slots or --slots) is required".into()))?;
        let block = BlockConfig {
            n_channels,
            n_slots,
            bits_per_slot: self.block.bits_per_slot.unwrap_or(1.0),
            n_users: o.users.or(self.block.users).unwrap_or(1),
            seed: o.seed.or(self.block.seed).unwrap_or(0),
        };

        let id = match (o.strategy, &self.strategy) {
            (Some(id), _) => id,
            (None, Some(s)) => s.id.parse()?,
            (None, None) => return Err(Error::InvalidConfig("a strategy ([strategy] id or --strategy) is required".into())),
        };
        let mut strategy = StrategyConfig::new(id);
        if let Some(s) = &self.strategy {
            if let Some(d) = s.discount {
                strategy.gittins.discount = d;
            }
            if let Some(h) = s.state_truncation {
                strategy.gittins.state_truncation = h;
            }
            if let Some(t) = s.tolerance {
                strategy.gittins.tolerance = t;
            }
            if let Some(b) = s.state_budget {
                strategy.state_budget = u128::from(b);
            }
        }

        let config = ExperimentConfig {
            block,
            theta_source,
            belief_prior,
            strategy,
            replications: o.replications.or(self.run.replications).unwrap_or(1),
            outputs: self
                .run
                .outputs
                .unwrap_or_else(|| vec![OutputKind::LossCurve, OutputKind::Occupancy, OutputKind::Summary]),
            format: o.format.or(self.run.format).unwrap_or_default(),
            output_path: o.out.clone().or(self.run.out),
        };
        config.validate()?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MANIFEST: &str = r#"
[block]
slots = 500
seed = 11

[theta]
values = [0.9, 0.5]

[strategy]
id = "gittins"
discount = 0.8
state_truncation = 120

[run]
replications = 4
outputs = ["summary"]
format = "json"
"#;

    #[test]
    fn parses_manifest() {
        let c = ExperimentConfig::from_toml_str(MANIFEST, &Overrides::default()).unwrap();
        assert_eq!(c.block.n_slots, 500);
        assert_eq!(c.block.n_channels, 2);
        assert_eq!(c.block.seed, 11);
        assert_eq!(c.strategy.id, StrategyId::Gittins);
        assert_eq!(c.strategy.gittins.discount, 0.8);
        assert_eq!(c.strategy.gittins.state_truncation, 120);
        assert_eq!(c.replications, 4);
        assert_eq!(c.outputs, vec![OutputKind::Summary]);
        assert_eq!(c.format, OutputFormat::Json);
        assert_eq!(c.strategy_prior(), PriorSpec::uniform(2));
    }

    #[test]
    fn flags_override_file() {
        let o = Overrides {
            seed: Some(3),
            strategy: Some(StrategyId::UcbRule1),
            theta: Some(vec![0.2, 0.3, 0.4]),
            slots: Some(9),
            replications: Some(2),
            format: Some(OutputFormat::Csv),
            ..Overrides::default()
        };
        let c = ExperimentConfig::from_toml_str(MANIFEST, &o).unwrap();
        assert_eq!(c.block.seed, 3);
        assert_eq!(c.block.n_channels, 3);
        assert_eq!(c.block.n_slots, 9);
        assert_eq!(c.strategy.id, StrategyId::UcbRule1);
        assert_eq!(c.replications, 2);
        assert_eq!(c.format, OutputFormat::Csv);
    }

    #[test]
    fn prior_only_draws_theta() {
        let text = "[block]\nslots = 5\n[prior]\nkind = \"grid\"\npoints = [[0.9, 0.5]]\nweights = [1.0]\n[strategy]\nid = \"optimal-dp\"\n";
        let c = ExperimentConfig::from_toml_str(text, &Overrides::default()).unwrap();
        assert!(matches!(c.theta_source, ThetaSource::Prior(PriorSpec::Grid { .. })));
    }

    #[test]
    fn rejects_bad_manifests() {
        let o = Overrides::default();
        let cases = [
            "[block]\nslots = 5\n[strategy]\nid = \"random\"\n",
            "[block]\nslots = 5\n[theta]\nvalues = [0.5]\n",
            "[block]\nslots = 5\n[theta]\nvalues = [0.5]\n[strategy]\nid = \"nope\"\n",
            "[block]\nslots = 5\n[theta]\nvalues = [1.5]\n[strategy]\nid = \"random\"\n",
            "[block]\nslots = 5\nusers = 3\n[theta]\nvalues = [0.5]\n[strategy]\nid = \"random\"\n",
            "[block]\nslots = 5\n[theta]\nvalues = [0.5, 0.4]\n[strategy]\nid = \"rule2\"\n",
            "[block]\nslots = 5\n[theta]\nvalues = [0.5]\n[strategy]\nid = \"random\"\n[run]\nreplications = 0\n",
            "[block]\nslots = 5\nchannels = 3\n[theta]\nvalues = [0.5]\n[strategy]\nid = \"random\"\n",
            "[block]\nslots = 5\n[theta]\nvalues = [0.5]\n[strategy]\nid = \"one-known\"\n",
            "[block]\nslots = 5\ncolour = 1\n[theta]\nvalues = [0.5]\n[strategy]\nid = \"random\"\n",
            "[theta]\nvalues = [0.5]\n[strategy]\nid = \"random\"\n",
            "[block]\nslots = 5\n[theta]\nvalues = [0.5]\n[prior]\nkind = \"grid\"\npoints = [[0.5]]\nweights = [1.0]\n[strategy]\nid = \"gittins\"\n",
        ];
        for text in cases {
            assert!(
                matches!(ExperimentConfig::from_toml_str(text, &o), Err(Error::InvalidConfig(_)) | Err(Error::InvalidTheta(_))),
                "accepted: {text}"
            );
        }
    }

    #[test]
    fn strategy_names_round_trip() {
        for id in StrategyId::ALL {
            assert_eq!(id.name().parse::<StrategyId>().unwrap(), id);
            assert_eq!(serde_json::to_string(&id).unwrap(), format!("\"{}\"", id.name()));
        }
    }
}
