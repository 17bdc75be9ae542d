//! Independent oracles shared by the integration tests and the acceptance
//! run: finite differences, brute-force graph expansion, pairwise AUC, and a
//! plain BCE trainer.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ecat::datagen::{Domain, EventKind, InteractionEvent, SampleRecord, World};
use ecat::graph::{
    build_graph, expand_one_hop, expand_two_hop, gst_select_indices, GstConfig, InteractionGraph, Membership, Node,
    Vocab,
};
use ecat::losses::{loss_da, loss_di, loss_ecat, loss_y};
use ecat::models::forward::fixed_fuse;
use ecat::models::{
    adapter_forward, discriminator_forward, encode, gate_fuse, head, AdapterBinding, Batch, CtrBinding, CtrModel,
    DiscriminatorBinding, GateBinding, Parameterized,
};
use ecat::numerics::{Graph, NodeId, Tensor};
use ecat::trainer::{ExperimentConfig, TrainConfig, TrainState};
use ecat::Result;

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-4;
/// Denominator floor of the relative error, so entries whose true gradient
/// is near zero are judged by absolute error instead.
pub const FD_FLOOR: f64 = 1e-3;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_FLOOR)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Tensor {
    Tensor::new(vec![rows, cols], (0..rows * cols).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

/// Reduce any output to a scalar with fixed pseudo-random weights, so every
/// output entry contributes a distinct amount.
fn scalarize(g: &mut Graph, out: NodeId) -> Result<NodeId> {
    let v = g.value(out);
    if v.len() == 1 {
        return Ok(out);
    }
    let shape = v.shape().to_vec();
    let w: Vec<f64> = (0..v.len()).map(|k| 0.3 + ((k * 7919) % 13) as f64 / 10.0).collect();
    let w = g.constant(Tensor::new(shape, w).unwrap());
    let prod = g.mul(out, w)?;
    g.sum(prod)
}

/// Largest relative error between backward and central differences over
/// every entry of every input. `build` receives one trainable leaf per input.
/// Stop-gradient nodes keep their unperturbed values during the differences.
pub fn gradcheck(inputs: &[Tensor], build: impl Fn(&mut Graph, &[NodeId]) -> Result<NodeId>) -> f64 {
    let mut g = Graph::new();
    let ids: Vec<NodeId> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let out = build(&mut g, &ids).unwrap();
    let loss = scalarize(&mut g, out).unwrap();
    g.backward(loss).unwrap();
    let analytic: Vec<Tensor> = ids.iter().map(|&id| g.grad_or_zeros(id)).collect();
    let stops = g.stop_values();

    let eval = |perturbed: &[Tensor]| -> f64 {
        let mut g = Graph::with_pinned_stops(stops.clone());
        let ids: Vec<NodeId> = perturbed.iter().map(|t| g.param(t.clone())).collect();
        let out = build(&mut g, &ids).unwrap();
        let loss = scalarize(&mut g, out).unwrap();
        g.value(loss).item()
    };
    let mut worst: f64 = 0.0;
    for (k, t) in inputs.iter().enumerate() {
        for e in 0..t.len() {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[e] += FD_STEP;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[e] -= FD_STEP;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(analytic[k].data()[e], numeric));
        }
    }
    worst
}

/// Per-op gradient checks. Returns `(op name, worst relative error)`.
pub fn op_gradchecks(seed: u64) -> Vec<(&'static str, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = |rows, cols| random_tensor(&mut rng, rows, cols, -1.0, 1.0);
    let a34 = r(3, 4);
    let b34 = r(3, 4);
    let b45 = r(4, 5);
    let row4 = r(1, 4);
    let col3 = r(3, 1);
    let a64 = r(6, 4);
    let mut out = Vec::new();
    out.push(("matmul", gradcheck(&[a34.clone(), b45.clone()], |g, x| g.matmul(x[0], x[1]))));
    out.push(("add", gradcheck(&[a34.clone(), b34.clone()], |g, x| g.add(x[0], x[1]))));
    out.push(("add_row_broadcast", gradcheck(&[a34.clone(), row4.clone()], |g, x| g.add(x[0], x[1]))));
    out.push(("mul", gradcheck(&[a34.clone(), b34.clone()], |g, x| g.mul(x[0], x[1]))));
    out.push(("mul_column_broadcast", gradcheck(&[a34.clone(), col3.clone()], |g, x| g.mul(x[0], x[1]))));
    out.push(("mul_column_broadcast_left", gradcheck(&[col3.clone(), a34.clone()], |g, x| g.mul(x[0], x[1]))));
    // keep pre-activations away from the kink
    let away = a34.map(|v| if v.abs() < 0.05 { v + 0.1 } else { v });
    out.push(("relu", gradcheck(&[away], |g, x| g.relu(x[0]))));
    out.push(("sigmoid", gradcheck(&[a34.clone()], |g, x| g.sigmoid(x[0]))));
    out.push(("tanh", gradcheck(&[a34.clone()], |g, x| g.tanh(x[0]))));
    out.push(("concat", gradcheck(&[a34.clone(), col3.clone(), b34.clone()], |g, x| g.concat(x))));
    out.push(("mean", gradcheck(&[a34.clone()], |g, x| g.mean(x[0]))));
    out.push(("sum", gradcheck(&[a34.clone()], |g, x| g.sum(x[0]))));
    out.push(("affine", gradcheck(&[a34.clone()], |g, x| g.affine(x[0], -1.7, 0.4))));
    out.push(("gather_rows", gradcheck(&[a34.clone()], |g, x| g.gather_rows(x[0], &[2, 0, 2, 1, 2]))));
    out.push(("row_dot", gradcheck(&[a34.clone(), b34.clone()], |g, x| g.row_dot(x[0], x[1]))));
    out.push(("reshape", gradcheck(&[a34.clone()], |g, x| g.reshape(x[0], &[6, 2]))));
    let keep = [true, false, true, true, false, false, true, true, true, true, true, false];
    out.push(("masked_softmax", gradcheck(&[a34.clone()], |g, x| g.masked_softmax(x[0], &keep))));
    out.push(("sum_groups", gradcheck(&[a64.clone()], |g, x| g.sum_groups(x[0], 2))));
    out.push(("repeat_rows", gradcheck(&[a34.clone()], |g, x| g.repeat_rows(x[0], 3))));
    out.push(("cosine_similarity", gradcheck(&[a34.clone(), b34.clone()], |g, x| g.cosine_similarity(x[0], x[1]))));
    let probs = random_tensor(&mut ChaCha8Rng::seed_from_u64(seed ^ 1), 5, 1, 0.05, 0.95);
    let labels = [1.0, 0.0, 0.0, 1.0, 1.0];
    out.push(("binary_cross_entropy", gradcheck(&[probs], |g, x| g.binary_cross_entropy(x[0], &labels))));
    out.push((
        "stop_gradient_chain",
        gradcheck(&[a34.clone(), b34.clone()], |g, x| {
            let s = g.stop_gradient(x[0]);
            let m = g.mul(s, x[1])?;
            g.add(m, x[0])
        }),
    ));
    out
}

/// Tiny world and model for graph-level checks.
pub fn tiny_config() -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.world.n_users = 60;
    c.world.n_items = 40;
    c.world.latent_dim = 4;
    c.world.scene_flip_dims = 1;
    c.volume.target_records = 120;
    c.volume.source_ratio = 4.0;
    c.volume.seq_len = 4;
    c.model.embedding_dim = 4;
    c.model.tower = vec![5];
    c.model.adapter_hidden = 3;
    c.model.discriminator_hidden = 3;
    c.gst.max_expanded_nodes = 30;
    c.train.window_count = 2;
    c.train.delta_t_windows = 1;
    c.train.batch_size = 16;
    c.train.source_epochs = 1;
    c
}

/// Quantities the training step computes outside the graph. They are
/// constants of the loss, so finite differences must hold them fixed.
pub struct StepConstants {
    pub entropy: Vec<f64>,
    pub e_s: Tensor,
    pub w_da: Vec<f64>,
    pub w_pow: Vec<f64>,
}

/// `L_ECAT` for `state` with the off-graph quantities fixed to `k`, built
/// from the public model and loss pieces.
pub fn composed_loss(
    g: &mut Graph,
    state: &TrainState,
    batch: &Batch,
    cfg: &TrainConfig,
    k: &StepConstants,
) -> Result<NodeId> {
    let target = CtrBinding::bind(g, &state.target);
    let adapter = AdapterBinding::bind(g, &state.adapter);
    let gate = (!cfg.disable_gate).then(|| GateBinding::bind(g, &state.gate));
    let disc = DiscriminatorBinding::bind(g, &state.discriminator);
    let enc = encode(g, &target, batch)?;
    let e_prime = adapter_forward(g, &adapter, enc.e_seq)?;
    let fused = match &gate {
        Some(gb) => gate_fuse(g, gb, e_prime, enc.e_seq, &k.entropy)?.0,
        None => fixed_fuse(g, cfg.fixed_gate_weight, e_prime, enc.e_seq)?,
    };
    let (_, prob) = head(g, &target, &enc, fused, batch)?;
    let e_s = g.constant(k.e_s.clone());
    let l_y = loss_y(g, prob, &batch.labels, &k.w_da)?;
    let l_di = loss_di(g, e_prime, e_s, &k.w_pow)?;
    let d = discriminator_forward(g, &disc, &batch.phi)?;
    let l_da = loss_da(g, d, &batch.domain_labels())?;
    loss_ecat(g, l_y, l_di, l_da, cfg.loss)
}

/// Mutable views of every trainable parameter of a state, in a fixed order.
pub fn state_params_mut(s: &mut TrainState) -> Vec<(String, &mut Tensor)> {
    let mut v = s.target.params_mut();
    v.extend(s.adapter.params_mut());
    v.extend(s.gate.params_mut());
    v.extend(s.discriminator.params_mut());
    v
}

/// Tiny uniform-ish random graph with at most `max_nodes` nodes.
pub fn random_events(rng: &mut ChaCha8Rng, max_nodes: usize) -> Vec<InteractionEvent> {
    let n_users = rng.gen_range(2..=max_nodes / 2);
    let n_items = rng.gen_range(2..=max_nodes - n_users);
    let n_edges = rng.gen_range(1..=3 * (n_users + n_items));
    (0..n_edges)
        .map(|_| InteractionEvent {
            user_id: rng.gen_range(0..n_users as u32),
            item_id: rng.gen_range(0..n_items as u32),
            kind: if rng.gen_bool(0.7) { EventKind::Click } else { EventKind::Pay },
            domain: Domain::Source,
            window: 0,
        })
        .collect()
}

/// Edge kinds between each connected pair, straight from the events.
pub fn edge_table(events: &[InteractionEvent]) -> BTreeMap<(Node, Node), BTreeSet<EventKind>> {
    let mut t: BTreeMap<(Node, Node), BTreeSet<EventKind>> = BTreeMap::new();
    for e in events {
        let (u, i) = (Node::User(e.user_id), Node::Item(e.item_id));
        t.entry((u, i)).or_default().insert(e.kind);
        t.entry((i, u)).or_default().insert(e.kind);
    }
    t
}

fn oracle_degree(t: &BTreeMap<(Node, Node), BTreeSet<EventKind>>, n: Node) -> usize {
    t.keys().filter(|(a, _)| *a == n).count()
}

/// Highest degree first, then ascending node; first `k` of `cands`.
fn oracle_top(t: &BTreeMap<(Node, Node), BTreeSet<EventKind>>, cands: &BTreeSet<Node>, k: usize) -> BTreeSet<Node> {
    let mut v: Vec<(std::cmp::Reverse<usize>, Node)> =
        cands.iter().map(|&n| (std::cmp::Reverse(oracle_degree(t, n)), n)).collect();
    v.sort();
    v.into_iter().take(k).map(|(_, n)| n).collect()
}

fn oracle_cap(
    t: &BTreeMap<(Node, Node), BTreeSet<EventKind>>,
    per_seed: BTreeMap<Node, BTreeSet<Node>>,
    fan_out: usize,
    limit: usize,
) -> BTreeSet<Node> {
    let union: BTreeSet<Node> = per_seed.values().flat_map(|c| oracle_top(t, c, fan_out)).collect();
    oracle_top(t, &union, limit)
}

/// Every length-1 path from a seed over the allowed kinds.
pub fn oracle_one_hop(
    events: &[InteractionEvent],
    seeds: &BTreeSet<Node>,
    kinds: &[EventKind],
    fan_out: usize,
    limit: usize,
) -> BTreeSet<Node> {
    let t = edge_table(events);
    let mut per_seed: BTreeMap<Node, BTreeSet<Node>> = seeds.iter().map(|&s| (s, BTreeSet::new())).collect();
    for ((a, b), ks) in &t {
        if seeds.contains(a) && !seeds.contains(b) && kinds.iter().any(|k| ks.contains(k)) {
            per_seed.get_mut(a).unwrap().insert(*b);
        }
    }
    oracle_cap(&t, per_seed, fan_out, limit)
}

/// Every length-2 click path `seed - mid - end` with `end` outside the seeds
/// and `exclude`.
pub fn oracle_two_hop(
    events: &[InteractionEvent],
    seeds: &BTreeSet<Node>,
    exclude: &BTreeSet<Node>,
    fan_out: usize,
    limit: usize,
) -> BTreeSet<Node> {
    let t = edge_table(events);
    let clicks: Vec<(Node, Node)> =
        t.iter().filter(|(_, ks)| ks.contains(&EventKind::Click)).map(|(&(a, b), _)| (a, b)).collect();
    let mut per_seed: BTreeMap<Node, BTreeSet<Node>> = seeds.iter().map(|&s| (s, BTreeSet::new())).collect();
    for &(s, m1) in &clicks {
        if !seeds.contains(&s) {
            continue;
        }
        for &(m2, e) in &clicks {
            if m2 == m1 && e != s && !seeds.contains(&e) && !exclude.contains(&e) {
                per_seed.get_mut(&s).unwrap().insert(e);
            }
        }
    }
    oracle_cap(&t, per_seed, fan_out, limit)
}

/// Node sets first, then a record filter and the documented sort.
pub fn oracle_gst(
    events: &[InteractionEvent],
    seeds: &BTreeSet<Node>,
    cfg: &GstConfig,
    records: &[SampleRecord],
) -> Vec<usize> {
    let one = oracle_one_hop(events, seeds, &cfg.edge_kinds_one_hop, cfg.fan_out_cap, cfg.max_expanded_nodes);
    let two = if cfg.enable_two_hop_coclick && one.len() < cfg.max_expanded_nodes {
        oracle_two_hop(events, seeds, &one, cfg.fan_out_cap, cfg.max_expanded_nodes - one.len())
    } else {
        BTreeSet::new()
    };
    let all: BTreeSet<Node> = seeds.iter().chain(&one).chain(&two).copied().collect();
    let mut idx: Vec<usize> = (0..records.len())
        .filter(|&k| {
            let r = &records[k];
            let (u, i) = (all.contains(&Node::User(r.user_id)), all.contains(&Node::Item(r.item_id)));
            match cfg.membership {
                Membership::Both => u && i,
                Membership::Either => u || i,
            }
        })
        .collect();
    idx.sort_by_key(|&k| (records[k].window, records[k].user_id, records[k].item_id, k));
    idx
}

pub fn random_records(rng: &mut ChaCha8Rng, n_users: u32, n_items: u32, n: usize) -> Vec<SampleRecord> {
    (0..n)
        .map(|_| SampleRecord {
            user_id: rng.gen_range(0..n_users + 2),
            item_id: rng.gen_range(0..n_items + 2),
            behavior_seq: vec![],
            numeric_features: vec![],
            label: rng.gen_range(0..2),
            domain: Domain::Source,
            window: rng.gen_range(0..3),
            scene: 0,
        })
        .collect()
}

pub fn graph_nodes(g: &InteractionGraph) -> Vec<Node> {
    g.nodes().collect()
}

/// `P(score+ > score-) + P(tie) / 2` over all pairs.
pub fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (i, &li) in labels.iter().enumerate() {
        if li != 1 {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj != 0 {
                continue;
            }
            den += 1.0;
            if scores[i] > scores[j] {
                num += 1.0;
            } else if scores[i] == scores[j] {
                num += 0.5;
            }
        }
    }
    num / den
}

/// Random instance with heavy ties: scores drawn from a small grid.
pub fn random_auc_instance(rng: &mut ChaCha8Rng, max_n: usize) -> (Vec<f64>, Vec<u8>) {
    let n = rng.gen_range(2..=max_n);
    let levels = rng.gen_range(1..=20);
    let mut labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
    labels[0] = 0;
    labels[1] = 1;
    let scores = (0..n).map(|_| rng.gen_range(0..levels) as f64 / levels as f64).collect();
    (scores, labels)
}

/// Plain single-domain trainer: BCE on the target model's own prediction
/// and Adagrad with accumulator decay written out by hand.
pub struct PlainTrainer {
    pub model: CtrModel,
    acc: Vec<Vec<f64>>,
    lr: f64,
    decay: f64,
    eps: f64,
}

impl PlainTrainer {
    pub fn new(model: CtrModel, cfg: &TrainConfig) -> Self {
        let o = cfg.optimizer();
        let acc = model.params().iter().map(|(_, t)| vec![o.initial_accumulator; t.len()]).collect();
        PlainTrainer { model, acc, lr: o.learning_rate, decay: o.accumulator_decay, eps: o.epsilon }
    }

    pub fn step(&mut self, batch: &Batch) {
        let mut g = Graph::new();
        let p = CtrBinding::bind(&mut g, &self.model);
        let enc = encode(&mut g, &p, batch).unwrap();
        let (_, prob) = head(&mut g, &p, &enc, enc.e_seq, batch).unwrap();
        let bce = g.binary_cross_entropy(prob, &batch.labels).unwrap();
        let loss = g.mean(bce).unwrap();
        g.backward(loss).unwrap();
        let grads: Vec<Tensor> = p.ids().iter().map(|&id| g.grad_or_zeros(id)).collect();
        for (((_, theta), grad), acc) in self.model.params_mut().into_iter().zip(&grads).zip(&mut self.acc) {
            for ((t, a), &gv) in theta.data_mut().iter_mut().zip(acc.iter_mut()).zip(grad.data()) {
                *a = self.decay * *a + gv * gv;
                *t -= self.lr * gv / (a.sqrt() + self.eps);
            }
        }
    }
}

/// Mean and sample standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

pub fn world_of(cfg: &ExperimentConfig, seed: u64) -> World {
    ecat::datagen::generate_world(&cfg.world, seed).unwrap()
}

/// A few trained steps into `cfg` for `seed`, returned with a 4-record
/// batch of two target and two source records from window 1.
pub fn warmed_state(
    cfg: &ExperimentConfig,
    seed: u64,
    steps: usize,
) -> (ecat::trainer::SeedContext, TrainState, Vec<usize>) {
    let ctx = ecat::trainer::SeedContext::prepare(cfg, seed).unwrap();
    let mut state = TrainState::new(cfg, &ctx.source.initial, seed).unwrap();
    let data = &ctx.windows[1];
    let recs: Vec<&SampleRecord> = data.target_records.iter().chain(&data.source_records).collect();
    for chunk in recs.chunks(cfg.train.batch_size).take(steps) {
        let b = Batch::from_records(&ctx.world, chunk).unwrap();
        ecat::trainer::train_step(&mut state, &b, &cfg.train).unwrap();
    }
    let pick = vec![0, 1, data.target_records.len(), data.target_records.len() + 1];
    (ctx, state, pick)
}

/// Worst relative error of the composed loss gradient over every trainable
/// parameter, and whether the mirrored loss reproduces the step's total.
pub fn composed_gradcheck(cfg: &ExperimentConfig, seed: u64) -> (f64, bool) {
    let (ctx, state, pick) = warmed_state(cfg, seed, 4);
    let data = &ctx.windows[1];
    let all: Vec<&SampleRecord> = data.target_records.iter().chain(&data.source_records).collect();
    let chosen: Vec<&SampleRecord> = pick.iter().map(|&i| all[i]).collect();
    let batch = Batch::from_records(&ctx.world, &chosen).unwrap();
    let tc = &cfg.train;

    let mut sg = ecat::trainer::build_step(&state, &batch, tc).unwrap();
    sg.graph.backward(sg.total).unwrap();
    let mut ids: Vec<Option<NodeId>> = sg.target.ids().into_iter().map(Some).collect();
    ids.extend(sg.adapter.ids().into_iter().map(Some));
    match &sg.gate {
        Some(gb) => ids.extend(gb.ids().into_iter().map(Some)),
        None => ids.extend(state.gate.params().iter().map(|_| None)),
    }
    ids.extend(sg.discriminator.ids().into_iter().map(Some));
    let mut probe = state.clone();
    let shapes: Vec<Vec<usize>> = state_params_mut(&mut probe).iter().map(|(_, t)| t.shape().to_vec()).collect();
    let analytic: Vec<Tensor> = ids
        .iter()
        .zip(&shapes)
        .map(|(id, s)| id.map(|id| sg.graph.grad_or_zeros(id)).unwrap_or_else(|| Tensor::zeros(s)))
        .collect();

    let k = StepConstants {
        entropy: ecat::models::entropy_of_t(&state.target, &batch),
        e_s: ecat::models::forward_source(&state.source, &batch).1,
        w_da: sg.breakdown.w_da.clone(),
        w_pow: sg.breakdown.w_pow.clone(),
    };
    let stops = sg.graph.stop_values();
    let eval = |s: &TrainState| {
        let mut g = Graph::with_pinned_stops(stops.clone());
        let l = composed_loss(&mut g, s, &batch, tc, &k).unwrap();
        g.value(l).item()
    };
    let reproduces = eval(&state).to_bits() == sg.breakdown.l_total.to_bits();

    let mut worst: f64 = 0.0;
    for (p, shape) in shapes.iter().enumerate() {
        let len: usize = shape.iter().product();
        for e in 0..len {
            let mut plus = state.clone();
            state_params_mut(&mut plus)[p].1.data_mut()[e] += FD_STEP;
            let mut minus = state.clone();
            state_params_mut(&mut minus)[p].1.data_mut()[e] -= FD_STEP;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(analytic[p].data()[e], numeric));
        }
    }
    (worst, reproduces)
}

pub fn gst_configs() -> Vec<GstConfig> {
    vec![
        GstConfig::uncapped(),
        GstConfig::default(),
        GstConfig { fan_out_cap: 1, max_expanded_nodes: 3, ..GstConfig::default() },
        GstConfig { edge_kinds_one_hop: vec![EventKind::Pay], ..GstConfig::uncapped() },
        GstConfig { enable_two_hop_coclick: false, fan_out_cap: 2, ..GstConfig::default() },
        GstConfig { membership: Membership::Either, fan_out_cap: 3, max_expanded_nodes: 10, ..GstConfig::default() },
    ]
}

pub fn random_gst_case(
    rng: &mut ChaCha8Rng,
) -> (Vec<InteractionEvent>, InteractionGraph, BTreeSet<Node>, Vec<SampleRecord>) {
    let events = random_events(rng, 100);
    let g = build_graph(&events, Vocab { n_users: 1000, n_items: 1000 }).unwrap();
    let nodes = graph_nodes(&g);
    let seeds: BTreeSet<Node> = nodes.iter().copied().filter(|_| rng.gen_bool(0.15)).collect();
    let records = random_records(rng, 50, 50, 40);
    (events, g, seeds, records)
}

/// 50 random graphs of at most 100 nodes, every config: expansions and the
/// selection equal brute-force path enumeration.
pub fn gst_matches_oracle_on_random_graphs() -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    for _ in 0..50 {
        let (events, g, seeds, records) = random_gst_case(&mut rng);
        assert!(g.node_count() <= 100);
        for cfg in gst_configs() {
            let one =
                expand_one_hop(&g, &seeds, &cfg.edge_kinds_one_hop, cfg.fan_out_cap, cfg.max_expanded_nodes).unwrap();
            let want_one =
                oracle_one_hop(&events, &seeds, &cfg.edge_kinds_one_hop, cfg.fan_out_cap, cfg.max_expanded_nodes);
            assert_eq!(one, want_one);
            let two = expand_two_hop(&g, &seeds, &one, cfg.fan_out_cap, cfg.max_expanded_nodes).unwrap();
            assert_eq!(two, oracle_two_hop(&events, &seeds, &one, cfg.fan_out_cap, cfg.max_expanded_nodes));
            let sel = gst_select_indices(&g, &seeds, &cfg, &records).unwrap();
            assert_eq!(sel.record_indices, oracle_gst(&events, &seeds, &cfg, &records));
            checked += 1;
        }
    }
    checked
}
