//! Windowed training of the source model `S` and the target model `T`.
//!
//! Window 0 trains `S` and warms `T` up from it. Windows `1..=window_count`
//! then train `T` (plus adapter, gate, and discriminator) on that window's
//! stream and, at each checkpoint window `1 + k * delta_t_windows`, evaluate
//! on the target records of the following window. In continual mode `S` is
//! retrained at every checkpoint after the first on the source windows seen
//! since its previous refresh; in one-time mode it never changes after
//! window 0.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::{
    generate_world, phi_dim, sample_window, Domain, SampleRecord, VolumeConfig, WindowData, World, WorldConfig,
};
use crate::error::{EcatError, Result};
use crate::graph::{build_graph, gst_select_indices, record_nodes, seed_nodes, GstConfig, Vocab};
use crate::harness::auc;
use crate::harness::metrics::{MetricsRow, RowType, METRICS_VERSION};
use crate::losses::{da_sample_weight, loss_da, loss_di, loss_ecat, loss_y, BatchLossBreakdown, LossWeights};
use crate::models::checkpoint::{save_checkpoint, CheckpointMeta};
use crate::models::forward::fixed_fuse;
use crate::models::infer::{predict, Fusion};
use crate::models::{
    adapter_forward, discriminator_forward, distill_intensity, encode, entropy_of_t, forward_source, gate_fuse, head,
    Adapter, AdapterBinding, Batch, CtrBinding, CtrModel, Discriminator, DiscriminatorBinding, Gate, GateBinding,
    ModelBundle, ModelConfig, Parameterized,
};
use crate::numerics::{AdagradConfig, AdagradState, Graph, NodeId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferMode {
    OneTime,
    Continual,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    OnlyTarget,
    MergeAll,
    GstOnly,
    GstAndDa,
}

impl TransferMode {
    pub const ALL: [TransferMode; 2] = [TransferMode::OneTime, TransferMode::Continual];

    pub fn as_str(self) -> &'static str {
        match self {
            TransferMode::OneTime => "one_time",
            TransferMode::Continual => "continual",
        }
    }
}

impl SampleMode {
    pub const ALL: [SampleMode; 4] =
        [SampleMode::OnlyTarget, SampleMode::MergeAll, SampleMode::GstOnly, SampleMode::GstAndDa];

    pub fn as_str(self) -> &'static str {
        match self {
            SampleMode::OnlyTarget => "only_target",
            SampleMode::MergeAll => "merge_all",
            SampleMode::GstOnly => "gst_only",
            SampleMode::GstAndDa => "gst_and_da",
        }
    }

    fn uses_gst(self) -> bool {
        matches!(self, SampleMode::GstOnly | SampleMode::GstAndDa)
    }
}

impl FromStr for TransferMode {
    type Err = EcatError;
    fn from_str(s: &str) -> Result<Self> {
        TransferMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| EcatError::Config(format!("unknown transfer_mode {s:?} (one_time | continual)")))
    }
}

impl FromStr for SampleMode {
    type Err = EcatError;
    fn from_str(s: &str) -> Result<Self> {
        SampleMode::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| {
            EcatError::Config(format!("unknown sample_mode {s:?} (only_target | merge_all | gst_only | gst_and_da)"))
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub accumulator_decay: f64,
    pub batch_size: usize,
    /// Number of target training windows after the initial window 0.
    pub window_count: u32,
    pub delta_t_windows: u32,
    pub transfer_mode: TransferMode,
    pub sample_mode: SampleMode,
    pub disable_gate: bool,
    pub disable_intensity: bool,
    /// Fusion weight on the adapted representation when the gate is disabled.
    pub fixed_gate_weight: f64,
    pub loss: LossWeights,
    pub seed: u64,
    /// Initialize `T` from `S` before window 1.
    pub warm_up: bool,
    pub source_epochs: u32,
    pub source_refresh_epochs: u32,
    pub target_epochs: u32,
    pub eval_batch_size: usize,
    /// Fill `wall_clock_seconds`; off by default so metrics files stay
    /// byte-reproducible.
    pub record_timing: bool,
    /// Save a checkpoint of every trained component at each checkpoint window.
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            accumulator_decay: 0.9999,
            batch_size: 256,
            window_count: 5,
            delta_t_windows: 2,
            transfer_mode: TransferMode::Continual,
            sample_mode: SampleMode::GstAndDa,
            disable_gate: false,
            disable_intensity: false,
            fixed_gate_weight: 0.5,
            loss: LossWeights::default(),
            seed: 0,
            warm_up: true,
            source_epochs: 2,
            source_refresh_epochs: 1,
            target_epochs: 1,
            eval_batch_size: 1024,
            record_timing: false,
            checkpoint_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.optimizer().validate()?;
        self.loss.validate()?;
        if self.batch_size == 0 || self.eval_batch_size == 0 {
            return Err(EcatError::Config("batch sizes must be >= 1".into()));
        }
        if self.batch_size < 2 && self.sample_mode == SampleMode::GstAndDa {
            return Err(EcatError::Config("gst_and_da needs batch_size >= 2".into()));
        }
        if self.window_count == 0 || self.delta_t_windows == 0 {
            return Err(EcatError::Config("window_count and delta_t_windows must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.fixed_gate_weight) {
            return Err(EcatError::Config(format!(
                "fixed_gate_weight must lie in [0, 1], got {}",
                self.fixed_gate_weight
            )));
        }
        Ok(())
    }

    pub fn optimizer(&self) -> AdagradConfig {
        AdagradConfig {
            learning_rate: self.learning_rate,
            accumulator_decay: self.accumulator_decay,
            ..AdagradConfig::default()
        }
    }

    /// Windows at which metrics are emitted, with their labels.
    pub fn checkpoints(&self) -> Vec<(u32, String)> {
        (1..=self.window_count)
            .filter(|w| (w - 1) % self.delta_t_windows == 0)
            .map(|w| (w, checkpoint_label((w - 1) / self.delta_t_windows)))
            .collect()
    }

    /// Windows before whose training a continual `S` is refreshed.
    pub fn refresh_windows(&self) -> Vec<u32> {
        self.checkpoints().into_iter().map(|(w, _)| w).filter(|&w| w > 1).collect()
    }
}

pub fn checkpoint_label(k: u32) -> String {
    match k {
        0 => "t".to_string(),
        1 => "t+Δt".to_string(),
        k => format!("t+{k}Δt"),
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub world: WorldConfig,
    pub volume: VolumeConfig,
    pub model: ModelConfig,
    pub gst: GstConfig,
    pub train: TrainConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.model.validate()?;
        self.gst.validate()?;
        self.train.validate()?;
        if self.volume.target_records == 0 || self.volume.seq_len == 0 || !(self.volume.source_ratio >= 0.0) {
            return Err(EcatError::Config("volume: target_records and seq_len must be >= 1, source_ratio >= 0".into()));
        }
        Ok(())
    }
}

/// splitmix64 of `seed` mixed with a stream tag.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x632B_E59B_D9B4_E019);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const STREAM_TARGET_INIT: u64 = 1;
const STREAM_SOURCE_INIT: u64 = 2;
const STREAM_ADAPTER_INIT: u64 = 3;
const STREAM_GATE_INIT: u64 = 4;
const STREAM_DISC_INIT: u64 = 5;
const STREAM_SOURCE_SHUFFLE: u64 = 1 << 20;
const STREAM_TARGET_SHUFFLE: u64 = 2 << 20;

fn shuffle_seed(seed: u64, base: u64, window: u32, epoch: u32) -> u64 {
    derive_seed(seed, base + ((window as u64) << 8) + epoch as u64)
}

/// Standard BCE training of `S` on `records`. Returns the mean training loss
/// of each epoch.
pub fn train_source_window(
    source: &mut CtrModel,
    opt: &mut AdagradState,
    world: &World,
    records: &[&SampleRecord],
    epochs: u32,
    batch_size: usize,
    shuffle: u64,
) -> Result<Vec<f64>> {
    let mut order: Vec<&SampleRecord> = records.to_vec();
    let mut curve = Vec::with_capacity(epochs as usize);
    for epoch in 0..epochs {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(shuffle, epoch as u64)));
        let (mut total, mut n) = (0.0, 0usize);
        for chunk in order.chunks(batch_size.max(1)) {
            let batch = Batch::from_records(world, chunk)?;
            let mut g = Graph::new();
            let p = CtrBinding::bind(&mut g, source);
            let enc = encode(&mut g, &p, &batch)?;
            let (_, prob) = head(&mut g, &p, &enc, enc.e_seq, &batch)?;
            let bce = g.binary_cross_entropy(prob, &batch.labels)?;
            let loss = g.mean(bce)?;
            g.backward(loss)?;
            total += g.value(loss).item() * chunk.len() as f64;
            n += chunk.len();
            let ids = p.ids();
            let grads: Vec<_> = ids.iter().map(|&id| g.grad(id)).collect();
            opt.step(&mut source.params_mut(), &grads)?;
        }
        curve.push(if n == 0 { 0.0 } else { total / n as f64 });
    }
    Ok(curve)
}

/// Copy `S`'s values into `T`.
pub fn warm_up_from_source(target: &mut CtrModel, source: &CtrModel) -> Result<()> {
    target.copy_from(source)
}

/// Source snapshots for one seed: `S` after window 0 and, for continual
/// runs, after each refresh.
#[derive(Clone, Debug)]
pub struct SourceSchedule {
    pub initial: CtrModel,
    pub refreshed: BTreeMap<u32, CtrModel>,
    /// Mean BCE per epoch of every source-training phase, in order.
    pub loss_curves: Vec<Vec<f64>>,
}

impl SourceSchedule {
    /// `S` in effect while training window `w`.
    pub fn at(&self, window: u32, mode: TransferMode) -> &CtrModel {
        match mode {
            TransferMode::OneTime => &self.initial,
            TransferMode::Continual => {
                self.refreshed.range(..=window).next_back().map(|(_, m)| m).unwrap_or(&self.initial)
            }
        }
    }
}

/// Everything about one seed that does not depend on how `T` is trained:
/// the world, every window's data, and the source-model schedule.
#[derive(Clone, Debug)]
pub struct SeedContext {
    pub seed: u64,
    pub world: World,
    /// Windows `0..=window_count + 1`.
    pub windows: Vec<WindowData>,
    pub source: SourceSchedule,
}

impl SeedContext {
    pub fn prepare(cfg: &ExperimentConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let world = generate_world(&cfg.world, seed)?;
        let windows = (0..=cfg.train.window_count + 1)
            .map(|w| sample_window(&world, w, &cfg.volume))
            .collect::<Result<Vec<_>>>()?;
        let source = Self::train_sources(cfg, seed, &world, &windows)?;
        Ok(SeedContext { seed, world, windows, source })
    }

    fn train_sources(
        cfg: &ExperimentConfig,
        seed: u64,
        world: &World,
        windows: &[WindowData],
    ) -> Result<SourceSchedule> {
        let tc = &cfg.train;
        let mut s = CtrModel::new(
            &cfg.model,
            cfg.world.n_users,
            cfg.world.n_items,
            cfg.world.numeric_features,
            derive_seed(seed, STREAM_SOURCE_INIT),
        );
        let mut opt = AdagradState::new(tc.optimizer());
        let first: Vec<&SampleRecord> = windows[0].source_records.iter().collect();
        let curve = train_source_window(
            &mut s,
            &mut opt,
            world,
            &first,
            tc.source_epochs,
            tc.batch_size,
            shuffle_seed(seed, STREAM_SOURCE_SHUFFLE, 0, 0),
        )?;
        let mut schedule = SourceSchedule { initial: s.clone(), refreshed: BTreeMap::new(), loss_curves: vec![curve] };
        let mut last = 0;
        for w in tc.refresh_windows() {
            let recs: Vec<&SampleRecord> =
                windows[(last + 1) as usize..=w as usize].iter().flat_map(|d| &d.source_records).collect();
            let curve = train_source_window(
                &mut s,
                &mut opt,
                world,
                &recs,
                tc.source_refresh_epochs,
                tc.batch_size,
                shuffle_seed(seed, STREAM_SOURCE_SHUFFLE, w, 0),
            )?;
            schedule.loss_curves.push(curve);
            schedule.refreshed.insert(w, s.clone());
            last = w;
        }
        Ok(schedule)
    }
}

/// Records for one window in training order.
pub struct TrainingStream<'a> {
    pub records: Vec<&'a SampleRecord>,
}

impl<'a> TrainingStream<'a> {
    pub fn batches(&self, batch_size: usize) -> std::slice::Chunks<'_, &'a SampleRecord> {
        self.records.chunks(batch_size.max(1))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Indices into `data.source_records` admitted by graph-guided selection.
pub fn gst_indices(world: &World, data: &WindowData, gst: &GstConfig) -> Result<Vec<usize>> {
    let vocab = Vocab { n_users: world.config.n_users, n_items: world.config.n_items };
    if data.source_events.is_empty() {
        return Ok(Vec::new());
    }
    let graph = build_graph(&data.source_events, vocab)?;
    let seeds = seed_nodes(&graph, &record_nodes(&data.target_records));
    Ok(gst_select_indices(&graph, &seeds, gst, &data.source_records)?.record_indices)
}

/// Compose and shuffle one window's stream. `gst` holds the admitted source
/// indices and is required by the graph-guided modes.
pub fn build_training_stream<'a>(
    data: &'a WindowData,
    mode: SampleMode,
    gst: Option<&[usize]>,
    shuffle: u64,
) -> Result<TrainingStream<'a>> {
    let mut records: Vec<&SampleRecord> = data.target_records.iter().collect();
    match mode {
        SampleMode::OnlyTarget => {}
        SampleMode::MergeAll => records.extend(&data.source_records),
        SampleMode::GstOnly | SampleMode::GstAndDa => {
            let idx = gst.ok_or_else(|| EcatError::Contract(format!("{} needs a GST selection", mode.as_str())))?;
            for &i in idx {
                records.push(data.source_records.get(i).ok_or_else(|| {
                    EcatError::Data(format!("GST index {i} out of range for {} records", data.source_records.len()))
                })?);
            }
        }
    }
    if records.is_empty() {
        return Err(EcatError::Data(format!("empty training stream for window {}", data.window)));
    }
    records.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle));
    Ok(TrainingStream { records })
}

#[derive(Clone, Debug)]
pub struct TrainState {
    pub target: CtrModel,
    pub target_opt: AdagradState,
    pub source: CtrModel,
    pub adapter: Adapter,
    pub gate: Gate,
    /// Shared by adapter and gate, in that parameter order.
    pub side_opt: AdagradState,
    pub discriminator: Discriminator,
    pub disc_opt: AdagradState,
    pub window: u32,
    pub step: u64,
}

impl TrainState {
    /// Fresh state; `T` starts as a copy of `source` when warm-up is on.
    pub fn new(cfg: &ExperimentConfig, source: &CtrModel, seed: u64) -> Result<Self> {
        let w = &cfg.world;
        let mut target =
            CtrModel::new(&cfg.model, w.n_users, w.n_items, w.numeric_features, derive_seed(seed, STREAM_TARGET_INIT));
        if cfg.train.warm_up {
            warm_up_from_source(&mut target, source)?;
        }
        let opt = cfg.train.optimizer();
        Ok(TrainState {
            target,
            target_opt: AdagradState::new(opt),
            source: source.clone(),
            adapter: Adapter::new(&cfg.model, derive_seed(seed, STREAM_ADAPTER_INIT)),
            gate: Gate::new(&cfg.model, derive_seed(seed, STREAM_GATE_INIT)),
            side_opt: AdagradState::new(opt),
            discriminator: Discriminator::new(&cfg.model, phi_dim(w), derive_seed(seed, STREAM_DISC_INIT)),
            disc_opt: AdagradState::new(opt),
            window: 0,
            step: 0,
        })
    }

    pub fn bundle(&self) -> ModelBundle {
        ModelBundle {
            target: self.target.clone(),
            adapter: self.adapter.clone(),
            gate: self.gate.clone(),
            discriminator: self.discriminator.clone(),
        }
    }

    pub fn fusion(&self, cfg: &TrainConfig) -> Fusion {
        if cfg.disable_gate {
            Fusion::Fixed(cfg.fixed_gate_weight)
        } else {
            Fusion::Gated
        }
    }
}

/// One step's graph with the handles needed to update or inspect it.
pub struct StepGraph {
    pub graph: Graph,
    pub target: CtrBinding,
    pub adapter: AdapterBinding,
    pub gate: Option<GateBinding>,
    pub discriminator: DiscriminatorBinding,
    pub l_y: NodeId,
    pub l_di: NodeId,
    pub l_da: NodeId,
    pub total: NodeId,
    pub breakdown: BatchLossBreakdown,
    pub gate_weight: Option<NodeId>,
}

/// Forward part of a training step, in the fixed order: `S` forward
/// (no graph), entropy pass of `T` (no graph), admission weights, then the
/// graph with adapter, fusion, main head, and the three losses.
pub fn build_step(state: &TrainState, batch: &Batch, cfg: &TrainConfig) -> Result<StepGraph> {
    let n = batch.len();
    let (_, e_s) = forward_source(&state.source, batch);
    let entropy = entropy_of_t(&state.target, batch);
    let w_da: Vec<f64> = if cfg.sample_mode == SampleMode::GstAndDa {
        let p = state.discriminator.infer(&batch.phi);
        p.iter().zip(&batch.domains).map(|(&p, &d)| da_sample_weight(p, d)).collect()
    } else {
        vec![1.0; n]
    };

    let mut g = Graph::new();
    let target = CtrBinding::bind(&mut g, &state.target);
    let adapter = AdapterBinding::bind(&mut g, &state.adapter);
    let gate = (!cfg.disable_gate).then(|| GateBinding::bind(&mut g, &state.gate));
    let discriminator = DiscriminatorBinding::bind(&mut g, &state.discriminator);

    let enc = encode(&mut g, &target, batch)?;
    let e_prime = adapter_forward(&mut g, &adapter, enc.e_seq)?;
    let (fused, gate_weight) = match &gate {
        Some(gb) => {
            let (f, w) = gate_fuse(&mut g, gb, e_prime, enc.e_seq, &entropy)?;
            (f, Some(w))
        }
        None => (fixed_fuse(&mut g, cfg.fixed_gate_weight, e_prime, enc.e_seq)?, None),
    };
    let (_, prob) = head(&mut g, &target, &enc, fused, batch)?;

    let w_pow: Vec<f64> = if cfg.disable_intensity {
        vec![1.0; n]
    } else {
        (0..n).map(|r| distill_intensity(g.value(e_prime).row(r), e_s.row(r))).collect::<Result<_>>()?
    };
    let e_s = g.constant(e_s);
    let l_y = loss_y(&mut g, prob, &batch.labels, &w_da)?;
    let l_di = loss_di(&mut g, e_prime, e_s, &w_pow)?;
    let d_prob = discriminator_forward(&mut g, &discriminator, &batch.phi)?;
    let l_da = loss_da(&mut g, d_prob, &batch.domain_labels())?;
    let total = loss_ecat(&mut g, l_y, l_di, l_da, cfg.loss)?;
    let breakdown = BatchLossBreakdown {
        l_y: g.value(l_y).item(),
        l_di: g.value(l_di).item(),
        l_da: g.value(l_da).item(),
        l_total: g.value(total).item(),
        w_da,
        w_pow,
    };
    Ok(StepGraph { graph: g, target, adapter, gate, discriminator, l_y, l_di, l_da, total, breakdown, gate_weight })
}

fn diverged(step: u64, err: EcatError) -> EcatError {
    match err {
        EcatError::NonFinite(m) => EcatError::Diverged(format!("step {step}: {m}")),
        e => e,
    }
}

/// One optimization step: forward, a single backward, then the three
/// optimizer updates (T, adapter + gate, discriminator).
pub fn train_step(state: &mut TrainState, batch: &Batch, cfg: &TrainConfig) -> Result<BatchLossBreakdown> {
    let mut sg = build_step(state, batch, cfg).map_err(|e| diverged(state.step, e))?;
    let b = &sg.breakdown;
    if !b.l_total.is_finite() {
        return Err(EcatError::Diverged(format!(
            "step {}: l_total={} (l_y={}, l_di={}, l_da={})",
            state.step, b.l_total, b.l_y, b.l_di, b.l_da
        )));
    }
    sg.graph.backward(sg.total).map_err(|e| diverged(state.step, e))?;
    let g = &sg.graph;

    let t_grads: Vec<_> = sg.target.ids().iter().map(|&id| g.grad(id)).collect();
    state.target_opt.step(&mut state.target.params_mut(), &t_grads)?;

    let mut side_ids: Vec<Option<NodeId>> = sg.adapter.ids().into_iter().map(Some).collect();
    match &sg.gate {
        Some(gb) => side_ids.extend(gb.ids().into_iter().map(Some)),
        None => side_ids.extend(state.gate.params().iter().map(|_| None)),
    }
    let side_grads: Vec<_> = side_ids.iter().map(|id| id.and_then(|id| g.grad(id))).collect();
    let mut side_params = state.adapter.params_mut();
    side_params.extend(state.gate.params_mut());
    state.side_opt.step(&mut side_params, &side_grads)?;

    let d_grads: Vec<_> = sg.discriminator.ids().iter().map(|&id| g.grad(id)).collect();
    state.disc_opt.step(&mut state.discriminator.params_mut(), &d_grads)?;

    state.step += 1;
    Ok(sg.breakdown)
}

/// Which parameter groups one loss term reaches.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TermFlow {
    pub target: f64,
    pub adapter: f64,
    pub gate: f64,
    pub discriminator: f64,
}

/// Per-term gradient reach of one step, as largest absolute gradient entry
/// per group. `unbound_leaves` counts trainable graph leaves that belong to
/// none of the four groups; the source model never enters the graph, so it
/// should be zero.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradientFlow {
    pub l_y: TermFlow,
    pub l_di: TermFlow,
    pub l_da: TermFlow,
    pub unbound_leaves: usize,
}

/// Backpropagate each loss term separately on the step graph, without
/// updating anything.
pub fn gradient_flow(state: &TrainState, batch: &Batch, cfg: &TrainConfig) -> Result<GradientFlow> {
    let mut sg = build_step(state, batch, cfg)?;
    let groups: [Vec<NodeId>; 4] = [
        sg.target.ids(),
        sg.adapter.ids(),
        sg.gate.as_ref().map(|g| g.ids()).unwrap_or_default(),
        sg.discriminator.ids(),
    ];
    let known: Vec<NodeId> = groups.iter().flatten().copied().collect();
    let unbound_leaves = sg.graph.trainable_leaves().iter().filter(|id| !known.contains(id)).count();
    let mut reach = |term: NodeId| -> Result<TermFlow> {
        sg.graph.zero_grad();
        sg.graph.backward(term)?;
        let m =
            |ids: &Vec<NodeId>| ids.iter().filter_map(|&id| sg.graph.grad(id)).map(|t| t.max_abs()).fold(0.0, f64::max);
        Ok(TermFlow {
            target: m(&groups[0]),
            adapter: m(&groups[1]),
            gate: m(&groups[2]),
            discriminator: m(&groups[3]),
        })
    };
    Ok(GradientFlow { l_y: reach(sg.l_y)?, l_di: reach(sg.l_di)?, l_da: reach(sg.l_da)?, unbound_leaves })
}

/// Fused-model AUC on `records`.
pub fn evaluate(state: &TrainState, world: &World, records: &[SampleRecord], cfg: &TrainConfig) -> Result<f64> {
    let refs: Vec<&SampleRecord> = records.iter().collect();
    let fusion = state.fusion(cfg);
    let mut scores = Vec::with_capacity(records.len());
    for chunk in refs.chunks(cfg.eval_batch_size) {
        let batch = Batch::from_records(world, chunk)?;
        scores.extend(predict(&state.target, &state.adapter, &state.gate, fusion, &batch)?);
    }
    let labels: Vec<u8> = records.iter().map(|r| r.label).collect();
    auc(&scores, &labels)
}

#[derive(Default)]
struct LossMeans {
    sums: [f64; 3],
    n: usize,
}

impl LossMeans {
    fn add(&mut self, b: &BatchLossBreakdown) {
        self.sums[0] += b.l_y;
        self.sums[1] += b.l_di;
        self.sums[2] += b.l_da;
        self.n += 1;
    }

    fn means(&self) -> [f64; 3] {
        let n = self.n.max(1) as f64;
        self.sums.map(|s| s / n)
    }
}

/// Train one window of `T` on `ctx`'s data.
pub fn train_window(
    state: &mut TrainState,
    ctx: &SeedContext,
    cfg: &ExperimentConfig,
    window: u32,
) -> Result<[f64; 3]> {
    let tc = &cfg.train;
    let data = &ctx.windows[window as usize];
    let admitted = if tc.sample_mode.uses_gst() { Some(gst_indices(&ctx.world, data, &cfg.gst)?) } else { None };
    let mut losses = LossMeans::default();
    for epoch in 0..tc.target_epochs {
        let stream = build_training_stream(
            data,
            tc.sample_mode,
            admitted.as_deref(),
            shuffle_seed(ctx.seed, STREAM_TARGET_SHUFFLE, window, epoch),
        )?;
        for chunk in stream.batches(tc.batch_size) {
            let batch = Batch::from_records(&ctx.world, chunk)?;
            losses.add(&train_step(state, &batch, tc)?);
        }
    }
    state.window = window;
    Ok(losses.means())
}

/// Run one configuration on a prepared seed context.
pub fn run_with_context(cfg: &ExperimentConfig, ctx: &SeedContext) -> Result<Vec<MetricsRow>> {
    cfg.validate()?;
    let tc = &cfg.train;
    if ctx.windows.len() < tc.window_count as usize + 2 {
        return Err(EcatError::Config(format!(
            "seed context holds {} windows, the run needs {}",
            ctx.windows.len(),
            tc.window_count + 2
        )));
    }
    let started = Instant::now();
    let mut state = TrainState::new(cfg, &ctx.source.initial, ctx.seed)?;
    let checkpoints: BTreeMap<u32, String> = tc.checkpoints().into_iter().collect();
    let mut rows = Vec::new();
    for w in 1..=tc.window_count {
        state.source = ctx.source.at(w, tc.transfer_mode).clone();
        let [l_y, l_di, l_da] = train_window(&mut state, ctx, cfg, w)?;
        let Some(label) = checkpoints.get(&w) else { continue };
        let auc = evaluate(&state, &ctx.world, &ctx.windows[w as usize + 1].target_records, tc)?;
        if let Some(dir) = &tc.checkpoint_dir {
            std::fs::create_dir_all(dir).map_err(|e| EcatError::io(dir, e))?;
            let path = dir.join(format!("{}-seed{}-w{w}.ckpt", checkpoint_stem(&cfg.name), ctx.seed));
            save_checkpoint(&path, &state.bundle(), CheckpointMeta { seed: ctx.seed, window: w })?;
        }
        rows.push(MetricsRow {
            version: METRICS_VERSION,
            row_type: RowType::Run,
            experiment: cfg.name.clone(),
            seed: Some(ctx.seed),
            n_seeds: 1,
            checkpoint: label.clone(),
            window: w,
            sample_mode: tc.sample_mode.as_str().to_string(),
            transfer_mode: tc.transfer_mode.as_str().to_string(),
            disable_gate: tc.disable_gate,
            disable_intensity: tc.disable_intensity,
            auc,
            auc_stderr: None,
            l_y,
            l_di,
            l_da,
            wall_clock_seconds: if tc.record_timing { started.elapsed().as_secs_f64() } else { 0.0 },
        });
    }
    Ok(rows)
}

fn checkpoint_stem(name: &str) -> String {
    let s: String = name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect();
    if s.is_empty() {
        "run".into()
    } else {
        s
    }
}

/// Prepare data and source models for `cfg.train.seed`, then run.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<MetricsRow>> {
    let ctx = SeedContext::prepare(cfg, cfg.train.seed)?;
    run_with_context(cfg, &ctx)
}

/// Which domain a record index of a stream came from, for tests and tools.
pub fn count_domain(stream: &TrainingStream<'_>, domain: Domain) -> usize {
    stream.records.iter().filter(|r| r.domain == domain).count()
}
