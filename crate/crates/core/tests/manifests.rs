use std::path::Path;

use cogmac::harness::{run_experiment, ExperimentConfig, Overrides, StrategyId};

fn load(name: &str, overrides: &Overrides) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
    ExperimentConfig::from_path(&path, overrides).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn every_bundled_manifest_parses_and_runs_shortened() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        let short = Overrides {
            slots: Some(15),
            replications: Some(3),
            ..Overrides::default()
        };
        let config = load(&name, &short);
        let stats = run_experiment(&config).unwrap();
        assert_eq!(stats.summary.n_slots, 15);
        assert_eq!(stats.loss_curve.len(), 15);
        seen += 1;
    }
    assert!(seen >= 5);
}

#[test]
fn manifest_fields_reach_the_config() {
    let c = load("gittins_beta_prior.toml", &Overrides::default());
    assert_eq!(c.strategy.id, StrategyId::Gittins);
    assert_eq!(c.strategy.gittins.discount, 0.95);
    assert_eq!(c.block.n_channels, 3);
    let c = load("nash_k20.toml", &Overrides::default());
    assert_eq!(c.block.n_users, 20);
}

/// The proportional rule's simulated loss sits within three standard errors
/// of its closed form.
#[test]
fn nash_k20_loss_matches_closed_form() {
    let c = load("nash_k20.toml", &Overrides::default());
    let s = run_experiment(&c).unwrap().summary;
    let se = s.realized_loss.stderr.unwrap();
    let closed = s.closed_form_loss.unwrap();
    assert!((s.realized_loss.mean - closed).abs() < 3.0 * se, "{} vs {closed} (se {se})", s.realized_loss.mean);
}
