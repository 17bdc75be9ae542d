//! Deterministic synthetic source ("entire space") and target (sub-channel)
//! domains with temporal drift.
//!
//! Every quantity is a pure function of `(WorldConfig, VolumeConfig, seed)`.
//! The world is drawn from RNG stream 0 and window `w` from stream `w + 1`,
//! so windows are independent and can be generated in any order.
//!
//! Label model for a click on item `i` by user `u` in scene `s` at window `w`:
//!
//! ```text
//! logit = a * (M_s u)^T rot_w(i)[..d] / sqrt(d) + c * rot_w(i)[d] + bias_u + b_dom + f * x_0
//! ```
//!
//! where `rot_w` rotates the item vector (latents plus a bias coordinate) by
//! `w * drift_angle` inside a fixed random plane. Target records and the
//! channel-like source scene use `M_0 = I`; the other source scenes flip the
//! sign of some user latent coordinates and shift the numeric features, so
//! they look different to a domain discriminator and label differently.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{EcatError, Result};
use crate::numerics::{sigmoid, Tensor};

/// Behavior-sequence padding sentinel.
pub const PAD_ITEM: u32 = u32::MAX;

pub const RECORDS_FORMAT_VERSION: u32 = 1;
pub const EVENTS_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub n_users: usize,
    pub n_items: usize,
    pub latent_dim: usize,
    pub target_user_fraction: f64,
    pub target_item_fraction: f64,
    /// Radians of item-vector rotation per window.
    pub drift_angle: f64,
    pub interaction_scale: f64,
    pub item_bias_scale: f64,
    pub user_bias_scale: f64,
    pub target_bias: f64,
    pub source_bias: f64,
    pub popularity_exponent: f64,
    /// Number of source scenes that behave unlike the target channel.
    pub off_channel_scenes: usize,
    /// Share of source traffic generated by the channel-like scene.
    pub channel_share: f64,
    /// Latent coordinates whose sign an off-channel scene flips.
    pub scene_flip_dims: usize,
    /// Norm of the numeric-feature mean shift of off-channel scenes.
    pub scene_feature_shift: f64,
    pub numeric_features: usize,
    pub feature_weight: f64,
    pub click_candidates: usize,
    pub click_temperature: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            n_users: 2000,
            n_items: 1000,
            latent_dim: 8,
            target_user_fraction: 0.2,
            target_item_fraction: 0.1,
            drift_angle: 0.15,
            interaction_scale: 2.0,
            item_bias_scale: 1.0,
            user_bias_scale: 0.5,
            target_bias: -2.0,
            source_bias: -1.5,
            popularity_exponent: 0.8,
            off_channel_scenes: 3,
            channel_share: 0.4,
            scene_flip_dims: 4,
            scene_feature_shift: 1.5,
            numeric_features: 4,
            feature_weight: 0.3,
            click_candidates: 16,
            click_temperature: 1.0,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        let frac_ok = |f: f64| f > 0.0 && f < 1.0;
        if self.n_users == 0 || self.n_items == 0 || self.latent_dim == 0 {
            return Err(EcatError::Config("n_users, n_items and latent_dim must be > 0".into()));
        }
        if !frac_ok(self.target_user_fraction) || !frac_ok(self.target_item_fraction) {
            return Err(EcatError::Config(format!(
                "target fractions must be in (0, 1), got users {} items {}",
                self.target_user_fraction, self.target_item_fraction
            )));
        }
        if !(0.0..=1.0).contains(&self.channel_share) || (self.off_channel_scenes == 0 && self.channel_share < 1.0) {
            return Err(EcatError::Config(
                "channel_share must be in [0, 1] and equal 1 when there are no off-channel scenes".into(),
            ));
        }
        if self.scene_flip_dims > self.latent_dim {
            return Err(EcatError::Config("scene_flip_dims exceeds latent_dim".into()));
        }
        if self.numeric_features == 0 || self.click_candidates == 0 {
            return Err(EcatError::Config("numeric_features and click_candidates must be > 0".into()));
        }
        if self.n_users > u32::MAX as usize || self.n_items >= PAD_ITEM as usize {
            return Err(EcatError::Config("vocabulary too large for 32-bit ids".into()));
        }
        Ok(())
    }

    pub fn target_user_count(&self) -> usize {
        ((self.n_users as f64 * self.target_user_fraction).round() as usize).max(1)
    }

    pub fn target_item_count(&self) -> usize {
        ((self.n_items as f64 * self.target_item_fraction).round() as usize).max(1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VolumeConfig {
    pub target_records: usize,
    /// Source records per target record.
    pub source_ratio: f64,
    pub seq_len: usize,
}

impl Default for VolumeConfig {
    fn default() -> Self {
        VolumeConfig { target_records: 10_000, source_ratio: 100.0, seq_len: 10 }
    }
}

impl VolumeConfig {
    pub fn source_records(&self) -> usize {
        (self.target_records as f64 * self.source_ratio).round() as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Source,
    Target,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Source => "source",
            Domain::Target => "target",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Click,
    Pay,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InteractionEvent {
    pub user_id: u32,
    pub item_id: u32,
    pub kind: EventKind,
    pub domain: Domain,
    pub window: u32,
}

/// One click with its conversion label.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleRecord {
    pub user_id: u32,
    pub item_id: u32,
    /// The user's last clicks before this one, oldest first, padded at the
    /// end with [`PAD_ITEM`].
    pub behavior_seq: Vec<u32>,
    pub numeric_features: Vec<f64>,
    pub label: u8,
    pub domain: Domain,
    pub window: u32,
    /// Generating scene; 0 is the channel-like behavior. Not a model input.
    pub scene: u16,
}

impl SampleRecord {
    pub fn seq_count(&self) -> usize {
        self.behavior_seq.iter().filter(|&&i| i != PAD_ITEM).count()
    }
}

#[derive(Clone, Debug)]
pub struct Scene {
    pub user_signs: Vec<f64>,
    pub feature_mean: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct World {
    pub config: WorldConfig,
    pub global_seed: u64,
    pub user_latents: Tensor,
    pub item_latents: Tensor,
    pub user_bias: Vec<f64>,
    pub item_bias: Vec<f64>,
    /// Sampling weight of each item.
    pub popularity: Vec<f64>,
    /// 0 for the most popular item.
    pub popularity_rank: Vec<u32>,
    pub target_user_ids: Vec<u32>,
    pub target_item_ids: Vec<u32>,
    /// Orthonormal pair spanning the drift plane in `latent_dim + 1` dims.
    pub drift_plane: (Vec<f64>, Vec<f64>),
    /// Index 0 is the channel-like scene.
    pub scenes: Vec<Scene>,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

pub fn generate_world(config: &WorldConfig, seed: u64) -> Result<World> {
    config.validate()?;
    let mut rng = rng_for(seed, 0);
    let d = config.latent_dim;
    let user_latents: Vec<f64> = (0..config.n_users * d).map(|_| normal(&mut rng)).collect();
    let item_latents: Vec<f64> = (0..config.n_items * d).map(|_| normal(&mut rng)).collect();
    let user_bias = (0..config.n_users).map(|_| config.user_bias_scale * normal(&mut rng)).collect();
    let item_bias = (0..config.n_items).map(|_| normal(&mut rng)).collect();

    let ranks_order = sample_indices(&mut rng, config.n_items, config.n_items).into_vec();
    let mut popularity_rank = vec![0u32; config.n_items];
    for (rank, &item) in ranks_order.iter().enumerate() {
        popularity_rank[item] = rank as u32;
    }
    let popularity =
        popularity_rank.iter().map(|&r| 1.0 / ((r as f64) + 1.0).powf(config.popularity_exponent)).collect();

    let mut target_user_ids: Vec<u32> =
        sample_indices(&mut rng, config.n_users, config.target_user_count()).iter().map(|i| i as u32).collect();
    target_user_ids.sort_unstable();
    let mut target_item_ids: Vec<u32> =
        sample_indices(&mut rng, config.n_items, config.target_item_count()).iter().map(|i| i as u32).collect();
    target_item_ids.sort_unstable();

    let mut p: Vec<f64> = (0..=d).map(|_| normal(&mut rng)).collect();
    normalize(&mut p);
    let mut q: Vec<f64> = (0..=d).map(|_| normal(&mut rng)).collect();
    let proj: f64 = p.iter().zip(&q).map(|(a, b)| a * b).sum();
    q.iter_mut().zip(&p).for_each(|(x, y)| *x -= proj * y);
    normalize(&mut q);

    let mut scenes = vec![Scene { user_signs: vec![1.0; d], feature_mean: vec![0.0; config.numeric_features] }];
    for _ in 0..config.off_channel_scenes {
        let mut user_signs = vec![1.0; d];
        for i in sample_indices(&mut rng, d, config.scene_flip_dims) {
            user_signs[i] = -1.0;
        }
        let mut feature_mean: Vec<f64> = (0..config.numeric_features).map(|_| normal(&mut rng)).collect();
        normalize(&mut feature_mean);
        feature_mean.iter_mut().for_each(|x| *x *= config.scene_feature_shift);
        scenes.push(Scene { user_signs, feature_mean });
    }

    Ok(World {
        config: config.clone(),
        global_seed: seed,
        user_latents: Tensor::new(vec![config.n_users, d], user_latents)?,
        item_latents: Tensor::new(vec![config.n_items, d], item_latents)?,
        user_bias,
        item_bias,
        popularity,
        popularity_rank,
        target_user_ids,
        target_item_ids,
        drift_plane: (p, q),
        scenes,
    })
}

impl World {
    pub fn is_target_user(&self, user: u32) -> bool {
        self.target_user_ids.binary_search(&user).is_ok()
    }

    pub fn is_target_item(&self, item: u32) -> bool {
        self.target_item_ids.binary_search(&item).is_ok()
    }

    /// Item vectors (latents plus bias coordinate) rotated for `window`.
    pub fn rotated_items(&self, window: u32) -> Vec<Vec<f64>> {
        let angle = window as f64 * self.config.drift_angle;
        let (s, c) = angle.sin_cos();
        let (p, q) = &self.drift_plane;
        (0..self.config.n_items)
            .map(|i| {
                let mut v: Vec<f64> = self.item_latents.row(i).to_vec();
                v.push(self.item_bias[i]);
                if angle != 0.0 {
                    let a: f64 = v.iter().zip(p).map(|(x, y)| x * y).sum();
                    let b: f64 = v.iter().zip(q).map(|(x, y)| x * y).sum();
                    let (na, nb) = (a * c - b * s, a * s + b * c);
                    for k in 0..v.len() {
                        v[k] += (na - a) * p[k] + (nb - b) * q[k];
                    }
                }
                v
            })
            .collect()
    }

    fn affinity(&self, user: usize, item_vec: &[f64]) -> f64 {
        let d = self.config.latent_dim;
        let u = self.user_latents.row(user);
        u.iter().zip(&item_vec[..d]).map(|(a, b)| a * b).sum::<f64>() / (d as f64).sqrt()
    }

    /// Ground-truth conversion logit given a window's rotated item vectors.
    pub fn label_logit(&self, rotated: &[Vec<f64>], record: &SampleRecord) -> f64 {
        let cfg = &self.config;
        let d = cfg.latent_dim;
        let scene = &self.scenes[record.scene as usize];
        let u = self.user_latents.row(record.user_id as usize);
        let iv = &rotated[record.item_id as usize];
        let inter: f64 =
            u.iter().zip(&scene.user_signs).zip(&iv[..d]).map(|((a, s), b)| a * s * b).sum::<f64>() / (d as f64).sqrt();
        let dom_bias = match record.domain {
            Domain::Target => cfg.target_bias,
            Domain::Source => cfg.source_bias,
        };
        cfg.interaction_scale * inter
            + cfg.item_bias_scale * iv[d]
            + self.user_bias[record.user_id as usize]
            + dom_bias
            + cfg.feature_weight * record.numeric_features[0]
    }
}

/// One generated window of both domains.
#[derive(Clone, Debug)]
pub struct WindowData {
    pub window: u32,
    pub source_records: Vec<SampleRecord>,
    pub target_records: Vec<SampleRecord>,
    pub source_events: Vec<InteractionEvent>,
    pub target_events: Vec<InteractionEvent>,
}

impl WindowData {
    pub fn records(&self, domain: Domain) -> &[SampleRecord] {
        match domain {
            Domain::Source => &self.source_records,
            Domain::Target => &self.target_records,
        }
    }
}

/// Generate one window. The two domains share one chronological click
/// stream so behavior sequences span both.
pub fn sample_window(world: &World, window: u32, volume: &VolumeConfig) -> Result<WindowData> {
    let cfg = &world.config;
    if volume.seq_len == 0 || volume.target_records == 0 || volume.source_ratio < 0.0 {
        return Err(EcatError::Config("seq_len and target_records must be > 0, source_ratio >= 0".into()));
    }
    let mut rng = rng_for(world.global_seed, window as u64 + 1);
    let rotated = world.rotated_items(window);
    let n_t = volume.target_records;
    let n_s = volume.source_records();

    let mut is_target = vec![false; n_t + n_s];
    for i in sample_indices(&mut rng, n_t + n_s, n_t) {
        is_target[i] = true;
    }

    let all_items: Vec<u32> = (0..cfg.n_items as u32).collect();
    let all_pick = WeightedIndex::new(&world.popularity).map_err(|e| EcatError::Config(e.to_string()))?;
    let target_pick = WeightedIndex::new(world.target_item_ids.iter().map(|&i| world.popularity[i as usize]))
        .map_err(|e| EcatError::Config(e.to_string()))?;

    let mut history: Vec<VecDeque<u32>> = vec![VecDeque::with_capacity(volume.seq_len); cfg.n_users];
    let mut out = WindowData {
        window,
        source_records: Vec::with_capacity(n_s),
        target_records: Vec::with_capacity(n_t),
        source_events: Vec::with_capacity(n_s + n_s / 4),
        target_events: Vec::with_capacity(n_t + n_t / 4),
    };
    let mut scores = vec![0.0; cfg.click_candidates];
    let mut cands = vec![0u32; cfg.click_candidates];

    for &target in &is_target {
        let (domain, user, pool, pick) = if target {
            let u = world.target_user_ids[rng.gen_range(0..world.target_user_ids.len())];
            (Domain::Target, u, &world.target_item_ids, &target_pick)
        } else {
            (Domain::Source, rng.gen_range(0..cfg.n_users as u32), &all_items, &all_pick)
        };
        for (c, s) in cands.iter_mut().zip(scores.iter_mut()) {
            *c = pool[pick.sample(&mut rng)];
            *s = cfg.click_temperature * world.affinity(user as usize, &rotated[*c as usize]);
        }
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let choice = WeightedIndex::new(&weights).map_err(|e| EcatError::Data(e.to_string()))?.sample(&mut rng);
        let item = cands[choice];

        let scene = match domain {
            Domain::Target => 0,
            Domain::Source if cfg.off_channel_scenes == 0 || rng.gen::<f64>() < cfg.channel_share => 0,
            Domain::Source => rng.gen_range(1..=cfg.off_channel_scenes) as u16,
        };
        let mean = &world.scenes[scene as usize].feature_mean;
        let numeric_features: Vec<f64> = mean.iter().map(|m| m + normal(&mut rng)).collect();

        let hist = &mut history[user as usize];
        let mut behavior_seq: Vec<u32> = hist.iter().copied().collect();
        behavior_seq.resize(volume.seq_len, PAD_ITEM);

        let mut record = SampleRecord {
            user_id: user,
            item_id: item,
            behavior_seq,
            numeric_features,
            label: 0,
            domain,
            window,
            scene,
        };
        let p = sigmoid(world.label_logit(&rotated, &record));
        record.label = u8::from(rng.gen::<f64>() < p);

        if hist.len() == volume.seq_len {
            hist.pop_front();
        }
        hist.push_back(item);

        let events = if target { &mut out.target_events } else { &mut out.source_events };
        events.push(InteractionEvent { user_id: user, item_id: item, kind: EventKind::Click, domain, window });
        if record.label == 1 {
            events.push(InteractionEvent { user_id: user, item_id: item, kind: EventKind::Pay, domain, window });
        }
        if target {
            out.target_records.push(record);
        } else {
            out.source_records.push(record);
        }
    }
    Ok(out)
}

/// Features a domain discriminator may see: the numeric features followed by
/// the filled fraction of the behavior sequence and the mean normalized
/// popularity rank of its items (0 for an empty sequence). Both summaries
/// ignore sequence order; ids and the domain tag are excluded.
#[derive(Clone, Debug, PartialEq)]
pub struct PhiFeatures(Vec<f64>);

impl PhiFeatures {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn phi_dim(world: &WorldConfig) -> usize {
    world.numeric_features + 2
}

pub fn phi_features(world: &World, record: &SampleRecord) -> PhiFeatures {
    let mut out = record.numeric_features.clone();
    let items: Vec<u32> = record.behavior_seq.iter().copied().filter(|&i| i != PAD_ITEM).collect();
    out.push(items.len() as f64 / record.behavior_seq.len().max(1) as f64);
    let mean_rank = if items.is_empty() {
        0.0
    } else {
        items.iter().map(|&i| world.popularity_rank[i as usize] as f64).sum::<f64>()
            / items.len() as f64
            / world.config.n_items as f64
    };
    out.push(mean_rank);
    PhiFeatures(out)
}

// ---------------------------------------------------------------------------
// Newline-delimited files

pub const RECORDS_HEADER: &str = "window\tdomain\tscene\tuser_id\titem_id\tlabel\tbehavior_seq\tnumeric_features";
pub const EVENTS_HEADER: &str = "window\tdomain\tuser_id\titem_id\tkind";

fn write_lines(path: &Path, version_line: &str, header: &str, lines: impl Iterator<Item = String>) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| EcatError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| EcatError::io(path, e);
    writeln!(w, "{version_line}").map_err(io)?;
    writeln!(w, "{header}").map_err(io)?;
    for line in lines {
        w.write_all(line.as_bytes()).map_err(io)?;
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Records file: a `#ecat-records <version>` line, the [`RECORDS_HEADER`]
/// line, then one tab-separated record per line. Sequences are
/// comma-separated with `-` for padding.
pub fn write_records(path: &Path, records: &[SampleRecord]) -> Result<()> {
    let lines = records.iter().map(|r| {
        let seq: Vec<String> =
            r.behavior_seq.iter().map(|&i| if i == PAD_ITEM { "-".to_string() } else { i.to_string() }).collect();
        let mut feats = String::new();
        for (k, x) in r.numeric_features.iter().enumerate() {
            if k > 0 {
                feats.push(',');
            }
            let _ = write!(feats, "{x:?}");
        }
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.window,
            r.domain.as_str(),
            r.scene,
            r.user_id,
            r.item_id,
            r.label,
            seq.join(","),
            feats
        )
    });
    write_lines(path, &format!("#ecat-records\t{RECORDS_FORMAT_VERSION}"), RECORDS_HEADER, lines)
}

pub fn write_events(path: &Path, events: &[InteractionEvent]) -> Result<()> {
    let lines = events.iter().map(|e| {
        let kind = match e.kind {
            EventKind::Click => "click",
            EventKind::Pay => "pay",
        };
        format!("{}\t{}\t{}\t{}\t{}", e.window, e.domain.as_str(), e.user_id, e.item_id, kind)
    });
    write_lines(path, &format!("#ecat-events\t{EVENTS_FORMAT_VERSION}"), EVENTS_HEADER, lines)
}

fn parse_domain(s: &str) -> Result<Domain> {
    match s {
        "source" => Ok(Domain::Source),
        "target" => Ok(Domain::Target),
        other => Err(EcatError::Format(format!("unknown domain {other:?}"))),
    }
}

fn read_body(path: &Path, magic: &str, version: u32, header: &str) -> Result<Vec<String>> {
    let file = std::fs::File::open(path).map_err(|e| EcatError::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let first = lines.next().transpose().map_err(|e| EcatError::io(path, e))?.unwrap_or_default();
    let expected = format!("{magic}\t{version}");
    if first != expected {
        return Err(EcatError::Format(format!("{}: expected {expected:?}, found {first:?}", path.display())));
    }
    let second = lines.next().transpose().map_err(|e| EcatError::io(path, e))?.unwrap_or_default();
    if second != header {
        return Err(EcatError::Format(format!("{}: unexpected header {second:?}", path.display())));
    }
    lines.collect::<std::io::Result<Vec<_>>>().map_err(|e| EcatError::io(path, e))
}

fn field<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse().map_err(|_| EcatError::Format(format!("bad {what}: {s:?}")))
}

pub fn read_records(path: &Path) -> Result<Vec<SampleRecord>> {
    read_body(path, "#ecat-records", RECORDS_FORMAT_VERSION, RECORDS_HEADER)?
        .iter()
        .map(|line| {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 8 {
                return Err(EcatError::Format(format!("record line has {} fields", f.len())));
            }
            let behavior_seq = f[6]
                .split(',')
                .map(|s| if s == "-" { Ok(PAD_ITEM) } else { field(s, "sequence item") })
                .collect::<Result<Vec<u32>>>()?;
            let numeric_features = f[7].split(',').map(|s| field(s, "feature")).collect::<Result<Vec<f64>>>()?;
            Ok(SampleRecord {
                window: field(f[0], "window")?,
                domain: parse_domain(f[1])?,
                scene: field(f[2], "scene")?,
                user_id: field(f[3], "user_id")?,
                item_id: field(f[4], "item_id")?,
                label: field(f[5], "label")?,
                behavior_seq,
                numeric_features,
            })
        })
        .collect()
}

pub fn read_events(path: &Path) -> Result<Vec<InteractionEvent>> {
    read_body(path, "#ecat-events", EVENTS_FORMAT_VERSION, EVENTS_HEADER)?
        .iter()
        .map(|line| {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 5 {
                return Err(EcatError::Format(format!("event line has {} fields", f.len())));
            }
            let kind = match f[4] {
                "click" => EventKind::Click,
                "pay" => EventKind::Pay,
                other => return Err(EcatError::Format(format!("unknown event kind {other:?}"))),
            };
            Ok(InteractionEvent {
                window: field(f[0], "window")?,
                domain: parse_domain(f[1])?,
                user_id: field(f[2], "user_id")?,
                item_id: field(f[3], "item_id")?,
                kind,
            })
        })
        .collect()
}
