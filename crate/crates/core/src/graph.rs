//! Bipartite user-item interaction graph and graph-guided sample selection.
//!
//! Selection starts from the target-domain ids that also occur in the source
//! graph, widens them with one-hop neighbors (click/pay edges) and optionally
//! two-hop co-click neighbors, and keeps the source records whose user and
//! item both fall inside the widened node set.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::datagen::{EventKind, InteractionEvent, SampleRecord};
use crate::error::{EcatError, Result};

/// Users order before items; ids break ties.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    User(u32),
    Item(u32),
}

/// Edge kinds present between one user and one item.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EdgeKinds {
    pub click: bool,
    pub pay: bool,
}

impl EdgeKinds {
    fn insert(&mut self, kind: EventKind) {
        match kind {
            EventKind::Click => self.click = true,
            EventKind::Pay => self.pay = true,
        }
    }

    pub fn contains(&self, kind: EventKind) -> bool {
        match kind {
            EventKind::Click => self.click,
            EventKind::Pay => self.pay,
        }
    }

    pub fn any_of(&self, kinds: &[EventKind]) -> bool {
        kinds.iter().any(|&k| self.contains(k))
    }

    fn count(&self) -> usize {
        usize::from(self.click) + usize::from(self.pay)
    }
}

/// Id spaces events must fall in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Vocab {
    pub n_users: usize,
    pub n_items: usize,
}

#[derive(Clone, Debug, Default)]
pub struct InteractionGraph {
    adjacency: BTreeMap<Node, BTreeMap<Node, EdgeKinds>>,
}

pub fn build_graph(events: &[InteractionEvent], vocab: Vocab) -> Result<InteractionGraph> {
    if events.is_empty() {
        return Err(EcatError::Data("cannot build a graph from zero events".into()));
    }
    let mut adjacency: BTreeMap<Node, BTreeMap<Node, EdgeKinds>> = BTreeMap::new();
    for e in events {
        if e.user_id as usize >= vocab.n_users || e.item_id as usize >= vocab.n_items {
            return Err(EcatError::Data(format!(
                "event (user {}, item {}) outside vocabulary of {} users and {} items",
                e.user_id, e.item_id, vocab.n_users, vocab.n_items
            )));
        }
        let (u, i) = (Node::User(e.user_id), Node::Item(e.item_id));
        adjacency.entry(u).or_default().entry(i).or_default().insert(e.kind);
        adjacency.entry(i).or_default().entry(u).or_default().insert(e.kind);
    }
    Ok(InteractionGraph { adjacency })
}

impl InteractionGraph {
    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    /// Distinct (user, item, kind) triples.
    pub fn edge_count(&self) -> usize {
        self.adjacency
            .iter()
            .filter(|(n, _)| matches!(n, Node::User(_)))
            .flat_map(|(_, nbrs)| nbrs.values())
            .map(EdgeKinds::count)
            .sum()
    }

    pub fn contains(&self, node: Node) -> bool {
        self.adjacency.contains_key(&node)
    }

    pub fn nodes(&self) -> impl Iterator<Item = Node> + '_ {
        self.adjacency.keys().copied()
    }

    /// Number of distinct neighbors.
    pub fn degree(&self, node: Node) -> usize {
        self.adjacency.get(&node).map_or(0, BTreeMap::len)
    }

    pub fn neighbors(&self, node: Node) -> impl Iterator<Item = (Node, EdgeKinds)> + '_ {
        self.adjacency.get(&node).into_iter().flat_map(|m| m.iter().map(|(n, k)| (*n, *k)))
    }

    pub fn edge(&self, a: Node, b: Node) -> Option<EdgeKinds> {
        self.adjacency.get(&a).and_then(|m| m.get(&b)).copied()
    }

    /// Order used by every cap: highest degree first, then ascending node.
    fn rank(&self, nodes: impl IntoIterator<Item = Node>) -> Vec<Node> {
        let mut v: Vec<Node> = nodes.into_iter().collect();
        v.sort_by(|a, b| self.degree(*b).cmp(&self.degree(*a)).then(a.cmp(b)));
        v
    }

    fn check_seeds(&self, seeds: &BTreeSet<Node>) -> Result<()> {
        match seeds.iter().find(|s| !self.contains(**s)) {
            Some(s) => Err(EcatError::Data(format!("seed {s:?} is not a node of the graph"))),
            None => Ok(()),
        }
    }

    /// Keep at most `fan_out` candidates per seed and `limit` overall.
    fn capped(&self, per_seed: BTreeMap<Node, BTreeSet<Node>>, fan_out: usize, limit: usize) -> BTreeSet<Node> {
        let mut union = BTreeSet::new();
        for cands in per_seed.into_values() {
            if cands.len() <= fan_out {
                union.extend(cands);
            } else {
                union.extend(self.rank(cands).into_iter().take(fan_out));
            }
        }
        if union.len() <= limit {
            union
        } else {
            self.rank(union).into_iter().take(limit).collect()
        }
    }
}

/// Which endpoints of a source record must lie in the expanded node set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    #[default]
    Both,
    Either,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GstConfig {
    pub edge_kinds_one_hop: Vec<EventKind>,
    pub enable_two_hop_coclick: bool,
    /// Cap on `|V_generalized|` (one-hop plus two-hop nodes).
    pub max_expanded_nodes: usize,
    /// Cap on nodes any single seed contributes per hop.
    pub fan_out_cap: usize,
    pub membership: Membership,
}

impl Default for GstConfig {
    fn default() -> Self {
        GstConfig {
            edge_kinds_one_hop: vec![EventKind::Click, EventKind::Pay],
            enable_two_hop_coclick: true,
            max_expanded_nodes: 200,
            fan_out_cap: 4,
            membership: Membership::Both,
        }
    }
}

impl GstConfig {
    pub fn uncapped() -> Self {
        GstConfig { max_expanded_nodes: usize::MAX, fan_out_cap: usize::MAX, ..GstConfig::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_expanded_nodes == 0 || self.fan_out_cap == 0 {
            return Err(EcatError::Config("GST caps must be > 0".into()));
        }
        Ok(())
    }
}

/// Target-domain nodes that also appear in the source graph.
pub fn seed_nodes(graph: &InteractionGraph, target_vocab: &BTreeSet<Node>) -> BTreeSet<Node> {
    target_vocab.iter().copied().filter(|n| graph.contains(*n)).collect()
}

/// The target-domain node set of a list of records.
pub fn record_nodes<'a>(records: impl IntoIterator<Item = &'a SampleRecord>) -> BTreeSet<Node> {
    let mut out = BTreeSet::new();
    for r in records {
        out.insert(Node::User(r.user_id));
        out.insert(Node::Item(r.item_id));
    }
    out
}

/// Neighbors of `seeds` over edges of the given kinds, minus the seeds.
pub fn expand_one_hop(
    graph: &InteractionGraph,
    seeds: &BTreeSet<Node>,
    kinds: &[EventKind],
    fan_out: usize,
    limit: usize,
) -> Result<BTreeSet<Node>> {
    graph.check_seeds(seeds)?;
    let mut per_seed = BTreeMap::new();
    for &s in seeds {
        let cands: BTreeSet<Node> =
            graph.neighbors(s).filter(|(n, k)| k.any_of(kinds) && !seeds.contains(n)).map(|(n, _)| n).collect();
        per_seed.insert(s, cands);
    }
    Ok(graph.capped(per_seed, fan_out, limit))
}

/// Ends of click-click paths of length two leaving a seed (item-user-item
/// co-clicks and user-item-user co-clickers), minus `exclude` and the seeds.
pub fn expand_two_hop(
    graph: &InteractionGraph,
    seeds: &BTreeSet<Node>,
    exclude: &BTreeSet<Node>,
    fan_out: usize,
    limit: usize,
) -> Result<BTreeSet<Node>> {
    graph.check_seeds(seeds)?;
    let mut per_seed = BTreeMap::new();
    for &s in seeds {
        let mut cands = BTreeSet::new();
        for (mid, k1) in graph.neighbors(s) {
            if !k1.click {
                continue;
            }
            for (end, k2) in graph.neighbors(mid) {
                if k2.click && end != s && !seeds.contains(&end) && !exclude.contains(&end) {
                    cands.insert(end);
                }
            }
        }
        per_seed.insert(s, cands);
    }
    Ok(graph.capped(per_seed, fan_out, limit))
}

#[derive(Clone, Debug, Default)]
pub struct GstSelection {
    pub seeds: BTreeSet<Node>,
    pub one_hop: BTreeSet<Node>,
    pub two_hop: BTreeSet<Node>,
    /// Indices into the source records, ordered by (window, user, item).
    pub record_indices: Vec<usize>,
}

impl GstSelection {
    pub fn nodes(&self) -> BTreeSet<Node> {
        self.seeds.iter().chain(&self.one_hop).chain(&self.two_hop).copied().collect()
    }

    pub fn generalized_len(&self) -> usize {
        self.one_hop.len() + self.two_hop.len()
    }
}

/// Expand `seeds` on `graph` and keep the source records whose endpoints lie
/// in the expanded node set (both or either, per `config.membership`).
pub fn gst_select_indices(
    graph: &InteractionGraph,
    seeds: &BTreeSet<Node>,
    config: &GstConfig,
    source_records: &[SampleRecord],
) -> Result<GstSelection> {
    config.validate()?;
    let one_hop =
        expand_one_hop(graph, seeds, &config.edge_kinds_one_hop, config.fan_out_cap, config.max_expanded_nodes)?;
    let two_hop = if config.enable_two_hop_coclick && one_hop.len() < config.max_expanded_nodes {
        expand_two_hop(graph, seeds, &one_hop, config.fan_out_cap, config.max_expanded_nodes - one_hop.len())?
    } else {
        BTreeSet::new()
    };
    let mut sel = GstSelection { seeds: seeds.clone(), one_hop, two_hop, record_indices: Vec::new() };
    let nodes = sel.nodes();
    sel.record_indices = source_records
        .iter()
        .enumerate()
        .filter(|(_, r)| {
            let (u, i) = (nodes.contains(&Node::User(r.user_id)), nodes.contains(&Node::Item(r.item_id)));
            match config.membership {
                Membership::Both => u && i,
                Membership::Either => u || i,
            }
        })
        .map(|(i, _)| i)
        .collect();
    sel.record_indices.sort_by_key(|&i| {
        let r = &source_records[i];
        (r.window, r.user_id, r.item_id)
    });
    Ok(sel)
}

/// Edge list of the subgraph induced by `nodes`, one `user_id\titem_id\tkind`
/// line per edge kind, in (user, item, kind) order.
pub fn write_subgraph_edges(path: &std::path::Path, graph: &InteractionGraph, nodes: &BTreeSet<Node>) -> Result<()> {
    let mut out = String::from("user_id\titem_id\tkind\n");
    for &n in nodes {
        let Node::User(u) = n else { continue };
        for (m, kinds) in graph.neighbors(n) {
            let Node::Item(i) = m else { continue };
            if !nodes.contains(&m) {
                continue;
            }
            for (on, name) in [(kinds.click, "click"), (kinds.pay, "pay")] {
                if on {
                    out.push_str(&format!("{u}\t{i}\t{name}\n"));
                }
            }
        }
    }
    std::fs::write(path, out).map_err(|e| EcatError::io(path, e))
}

/// Cloning variant of [`gst_select_indices`].
pub fn gst_select(
    graph: &InteractionGraph,
    seeds: &BTreeSet<Node>,
    config: &GstConfig,
    source_records: &[SampleRecord],
) -> Result<Vec<SampleRecord>> {
    let sel = gst_select_indices(graph, seeds, config, source_records)?;
    Ok(sel.record_indices.iter().map(|&i| source_records[i].clone()).collect())
}
