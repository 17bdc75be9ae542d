//! TOML experiment configuration with dotted-key overrides.
//!
//! A config file is a TOML document with the sections `world`, `volume`,
//! `model`, `gst`, and `train` (see [`config_reference`]). Missing keys take
//! their defaults; unknown keys are rejected. Overrides such as
//! `train.loss.alpha=0.25` are applied on top, with values parsed as TOML
//! and falling back to a bare string.

use std::path::Path;

use toml::{Table, Value};

use crate::error::{EcatError, Result};
use crate::trainer::ExperimentConfig;

/// Text of the bundled benchmark preset.
pub const BENCHMARK_TOML: &str = include_str!("../../configs/benchmark.toml");

/// The drifted synthetic benchmark the comparison suites are tuned on.
pub fn benchmark_config() -> ExperimentConfig {
    parse_config(BENCHMARK_TOML).expect("bundled benchmark preset parses")
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    toml::from_str(text).map_err(|e| EcatError::Config(e.to_string()))
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| EcatError::io(path, e))?;
    parse_config(&text).map_err(|e| EcatError::Config(format!("{}: {e}", path.display())))
}

fn to_table(cfg: &ExperimentConfig) -> Result<Table> {
    Table::try_from(cfg).map_err(|e| EcatError::Config(e.to_string()))
}

fn parse_value(raw: &str) -> Value {
    match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.to_string())),
        Err(_) => Value::String(raw.to_string()),
    }
}

/// Apply one `dotted.key=value` override.
pub fn apply_override(cfg: &ExperimentConfig, assignment: &str) -> Result<ExperimentConfig> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| EcatError::Config(format!("override {assignment:?} is not of the form key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(EcatError::Config(format!("malformed override key {key:?}")));
    }
    let mut table = to_table(cfg)?;
    let mut cur = &mut table;
    for part in &path[..path.len() - 1] {
        cur = match cur.get_mut(*part) {
            Some(Value::Table(t)) => t,
            _ => return Err(EcatError::Config(format!("unknown config section {key:?}"))),
        };
    }
    cur.insert(path[path.len() - 1].to_string(), parse_value(raw.trim()));
    Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| EcatError::Config(format!("override {assignment:?}: {}", e.message())))
}

const DOCS: &[(&str, &str)] = &[
    ("name", "experiment name written to every metrics row"),
    ("world.n_users", "number of users"),
    ("world.n_items", "number of items"),
    ("world.latent_dim", "dimension of the latent preference space"),
    ("world.target_user_fraction", "share of users active in the target channel"),
    ("world.target_item_fraction", "share of items listed in the target channel"),
    ("world.drift_angle", "item-vector rotation per window in radians; 0 disables drift"),
    ("world.interaction_scale", "weight of the user-item affinity in the label logit"),
    ("world.item_bias_scale", "std of per-item bias"),
    ("world.user_bias_scale", "std of per-user bias"),
    ("world.target_bias", "logit offset of target-domain conversions"),
    ("world.source_bias", "logit offset of source-domain conversions"),
    ("world.popularity_exponent", "Zipf exponent of item popularity"),
    ("world.off_channel_scenes", "source scenes that behave unlike the target channel"),
    ("world.channel_share", "share of source traffic from the channel-like scene"),
    ("world.scene_flip_dims", "latent dims whose sign an off-channel scene flips"),
    ("world.scene_feature_shift", "numeric-feature mean shift of off-channel scenes"),
    ("world.numeric_features", "numeric features per record"),
    ("world.feature_weight", "weight of the first numeric feature in the label logit"),
    ("world.click_candidates", "items shown per impression before the click choice"),
    ("world.click_temperature", "softmax temperature of the click choice"),
    ("volume.target_records", "target-domain records per window"),
    ("volume.source_ratio", "source records per target record"),
    ("volume.seq_len", "behavior sequence length"),
    ("model.embedding_dim", "embedding and sequence-representation width"),
    ("model.tower", "hidden widths of the prediction tower"),
    ("model.adapter_hidden", "hidden width of the adapter"),
    ("model.discriminator_hidden", "hidden width of the domain discriminator"),
    ("model.embedding_init_std", "std of embedding initialization"),
    ("model.gate_bias_init", "initial gate bias; negative keeps fusion closed at start"),
    ("gst.edge_kinds_one_hop", "edge kinds followed by the one-hop expansion"),
    ("gst.enable_two_hop_coclick", "also expand over click-click two-hop paths"),
    ("gst.max_expanded_nodes", "cap on nodes added by expansion"),
    ("gst.fan_out_cap", "cap on nodes one seed contributes per hop"),
    ("gst.membership", "both | either: which record endpoints must be in the expanded set"),
    ("train.learning_rate", "Adagrad learning rate of all optimizers"),
    ("train.accumulator_decay", "Adagrad accumulator decay in (0, 1]"),
    ("train.batch_size", "training batch size"),
    ("train.window_count", "target training windows after window 0"),
    ("train.delta_t_windows", "windows between checkpoints and source refreshes"),
    ("train.transfer_mode", "one_time | continual"),
    ("train.sample_mode", "only_target | merge_all | gst_only | gst_and_da"),
    ("train.disable_gate", "replace the learned gate by a fixed mix"),
    ("train.disable_intensity", "use distillation intensity 1 for every sample"),
    ("train.fixed_gate_weight", "weight on the adapted representation when the gate is disabled"),
    ("train.loss.alpha", "weight of the distillation loss"),
    ("train.loss.beta", "weight of the domain loss"),
    ("train.seed", "seed of the world, data, initialization, and shuffling"),
    ("train.warm_up", "initialize the target model from the source model"),
    ("train.source_epochs", "source-model epochs on window 0"),
    ("train.source_refresh_epochs", "source-model epochs at each continual refresh"),
    ("train.target_epochs", "target epochs per window"),
    ("train.eval_batch_size", "batch size for evaluation"),
    ("train.record_timing", "write wall-clock seconds (makes metrics non-reproducible)"),
    ("train.checkpoint_dir", "directory for per-checkpoint model files (unset: none)"),
];

/// Documented TOML listing of `cfg`, one commented key per line.
pub fn config_reference(cfg: &ExperimentConfig) -> Result<String> {
    let table = to_table(cfg)?;
    let mut out = String::new();
    let doc = |key: &str| DOCS.iter().find(|(k, _)| *k == key).map(|(_, d)| *d).unwrap_or("");
    fn emit(out: &mut String, prefix: &str, t: &Table, doc: &dyn Fn(&str) -> &'static str) {
        let (leaves, tables): (Vec<_>, Vec<_>) = t.iter().partition(|(_, v)| !v.is_table());
        for (k, v) in leaves {
            let full = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
            out.push_str(&format!("# {}\n{k} = {v}\n", doc(&full)));
        }
        for (k, v) in tables {
            let full = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
            out.push_str(&format!("\n[{full}]\n"));
            emit(out, &full, v.as_table().expect("partitioned on is_table"), doc);
        }
    }
    emit(&mut out, "", &table, &doc);
    for (k, d) in DOCS {
        if !out.contains(&format!("# {d}\n")) {
            out.push_str(&format!("# {k}: {d}\n"));
        }
    }
    Ok(out)
}
