//! Plant topology and routing derived from a design's wiring.
//!
//! Every lane follows the same process order: origin, weigher, assigner, an
//! optional trimmer, then a tree of distributors ending in destinations.
//! Product flow only diverges; destinations are the only inputs that may take
//! more than one connection.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::fmt::Write as _;

use crate::dsm::PortRef;

/// Product-carrying output of a trimmer.
pub const TRIM_PRODUCT_PORT: &str = "out1";
/// Trimmer output carrying the cut-off piece.
pub const TRIM_PIECE_PORT: &str = "out2";

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", content = "params", rename_all = "snake_case"))]
pub enum ModuleKind {
    Origin {
        lane: usize,
    },
    Weigher,
    Assigner,
    Trimmer,
    Distributor,
    Destination {
        #[cfg_attr(feature = "serde", serde(default))]
        recipe: Option<String>,
        #[cfg_attr(feature = "serde", serde(default))]
        is_default: bool,
        #[cfg_attr(feature = "serde", serde(default))]
        is_trim_sink: bool,
    },
}

impl ModuleKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModuleKind::Origin { .. } => "origin",
            ModuleKind::Weigher => "weigher",
            ModuleKind::Assigner => "assigner",
            ModuleKind::Trimmer => "trimmer",
            ModuleKind::Distributor => "distributor",
            ModuleKind::Destination { .. } => "destination",
        }
    }

    pub fn input_ports(&self) -> &'static [&'static str] {
        match self {
            ModuleKind::Origin { .. } => &[],
            _ => &["in"],
        }
    }

    pub fn output_ports(&self) -> &'static [&'static str] {
        match self {
            ModuleKind::Origin { .. } | ModuleKind::Weigher | ModuleKind::Assigner => &["out"],
            ModuleKind::Trimmer | ModuleKind::Distributor => &["out1", "out2"],
            ModuleKind::Destination { .. } => &[],
        }
    }
}

/// Module id to kind.
pub type Catalog = BTreeMap<String, ModuleKind>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TopologyError {
    DefaultDestinationCount(usize),
    TrimSinkCount(usize),
    DuplicateLane(usize),
    UnknownModule(String),
    UnknownPort(PortRef),
    FanOut(PortRef),
    Merge(PortRef),
    Cycle(Vec<String>),
    ProcessOrder { lane: usize, module: String, expected: &'static str },
    TrimWithoutSink { lane: usize, trimmer: String },
    NoDefaultRoute { lane: usize },
}

impl fmt::Display for TopologyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopologyError::DefaultDestinationCount(n) => {
                write!(f, "catalog needs exactly one default destination, found {n}")
            }
            TopologyError::TrimSinkCount(n) => {
                write!(f, "catalog allows at most one trim sink, found {n}")
            }
            TopologyError::DuplicateLane(l) => write!(f, "two origins claim lane {l}"),
            TopologyError::UnknownModule(m) => write!(f, "module {m} is not in the catalog"),
            TopologyError::UnknownPort(p) => write!(f, "module has no port {p}"),
            TopologyError::FanOut(p) => write!(f, "output {p} feeds more than one input"),
            TopologyError::Merge(p) => write!(f, "input {p} merges several flows"),
            TopologyError::Cycle(path) => write!(f, "cycle through {}", path.join(" -> ")),
            TopologyError::ProcessOrder { lane, module, expected } => {
                write!(f, "lane {lane}: {module} found where a {expected} was expected")
            }
            TopologyError::TrimWithoutSink { lane, trimmer } => {
                write!(f, "lane {lane}: trimmer {trimmer} has no direct route to the trim sink")
            }
            TopologyError::NoDefaultRoute { lane } => {
                write!(f, "lane {lane} cannot reach the default destination")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum TopologyWarning {
    /// Connected but not reachable from any origin.
    Unreachable(String),
}

impl fmt::Display for TopologyWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopologyWarning::Unreachable(m) => write!(f, "module {m} is not reachable from any origin"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub from: PortRef,
    pub to: PortRef,
}

/// One processing chain, named by its origin's lane index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lane {
    pub index: usize,
    pub origin: String,
    pub weigher: String,
    pub assigner: String,
    pub trimmer: Option<String>,
    /// Breadth-first from the lane's first distributor.
    pub distributors: Vec<String>,
    pub destinations: BTreeSet<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlantTopology {
    pub modules: BTreeMap<String, ModuleKind>,
    pub edges: Vec<Edge>,
    /// Sorted by lane index.
    pub lanes: Vec<Lane>,
    pub default_destination: String,
    pub trim_sink: Option<String>,
    pub warnings: Vec<TopologyWarning>,
}

impl PlantTopology {
    /// Lane indices that carry a trimmer.
    pub fn trim_lanes(&self) -> Vec<usize> {
        self.lanes.iter().filter(|l| l.trimmer.is_some()).map(|l| l.index).collect()
    }

    pub fn trimmer_count(&self) -> usize {
        self.lanes.iter().filter(|l| l.trimmer.is_some()).count()
    }

    pub fn lane(&self, index: usize) -> Option<&Lane> {
        self.lanes.iter().find(|l| l.index == index)
    }

    /// Edge leaving `port`, if connected.
    pub fn edge_from(&self, module: &str, port: &str) -> Option<usize> {
        self.edges.iter().position(|e| e.from.module == module && e.from.port == port)
    }

    /// GraphViz digraph, one line per edge.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph plant {\n");
        for e in &self.edges {
            let _ = writeln!(
                s,
                "  \"{}\" -> \"{}\" [taillabel=\"{}\", headlabel=\"{}\"];",
                e.from.module, e.to.module, e.from.port, e.to.port
            );
        }
        s.push_str("}\n");
        s
    }
}

fn check_catalog(catalog: &Catalog) -> Result<(String, Option<String>), TopologyError> {
    let defaults: Vec<&String> = catalog
        .iter()
        .filter(|(_, k)| matches!(k, ModuleKind::Destination { is_default: true, .. }))
        .map(|(id, _)| id)
        .collect();
    if defaults.len() != 1 {
        return Err(TopologyError::DefaultDestinationCount(defaults.len()));
    }
    let sinks: Vec<&String> = catalog
        .iter()
        .filter(|(_, k)| matches!(k, ModuleKind::Destination { is_trim_sink: true, .. }))
        .map(|(id, _)| id)
        .collect();
    if sinks.len() > 1 {
        return Err(TopologyError::TrimSinkCount(sinks.len()));
    }
    let mut lanes = BTreeSet::new();
    for kind in catalog.values() {
        if let ModuleKind::Origin { lane } = kind {
            if !lanes.insert(*lane) {
                return Err(TopologyError::DuplicateLane(*lane));
            }
        }
    }
    Ok((defaults[0].clone(), sinks.first().map(|s| (*s).clone())))
}

/// Builds the plant for one wiring and validates lane structure.
pub fn build_topology(
    wiring: &[(PortRef, PortRef)],
    catalog: &Catalog,
) -> Result<PlantTopology, TopologyError> {
    let (default_destination, trim_sink) = check_catalog(catalog)?;

    let mut edges = Vec::with_capacity(wiring.len());
    let mut from_seen = BTreeSet::new();
    let mut to_seen = BTreeSet::new();
    for (from, to) in wiring {
        for (p, outgoing) in [(from, true), (to, false)] {
            let kind = catalog
                .get(&p.module)
                .ok_or_else(|| TopologyError::UnknownModule(p.module.clone()))?;
            let ports = if outgoing { kind.output_ports() } else { kind.input_ports() };
            if !ports.contains(&p.port.as_str()) {
                return Err(TopologyError::UnknownPort(p.clone()));
            }
        }
        edges.push(Edge { from: from.clone(), to: to.clone() });
    }

    find_cycle(&edges)?;

    for e in &edges {
        if !from_seen.insert(&e.from) {
            return Err(TopologyError::FanOut(e.from.clone()));
        }
        if !to_seen.insert(&e.to)
            && !matches!(catalog[&e.to.module], ModuleKind::Destination { .. })
        {
            return Err(TopologyError::Merge(e.to.clone()));
        }
    }

    // (module, output port) -> downstream module
    let next: BTreeMap<(&str, &str), &str> = edges
        .iter()
        .map(|e| ((e.from.module.as_str(), e.from.port.as_str()), e.to.module.as_str()))
        .collect();

    let mut lanes = Vec::new();
    let mut placed: BTreeSet<String> = BTreeSet::new();
    for (origin, kind) in catalog {
        let ModuleKind::Origin { lane } = *kind else { continue };
        let Some(first) = next.get(&(origin.as_str(), "out")) else { continue };
        let lane_obj = walk_lane(lane, origin, first, &next, catalog, trim_sink.as_deref())?;
        if !lane_obj.destinations.contains(&default_destination) {
            return Err(TopologyError::NoDefaultRoute { lane });
        }
        placed.insert(lane_obj.origin.clone());
        placed.insert(lane_obj.weigher.clone());
        placed.insert(lane_obj.assigner.clone());
        placed.extend(lane_obj.trimmer.iter().cloned());
        placed.extend(lane_obj.distributors.iter().cloned());
        placed.extend(lane_obj.destinations.iter().cloned());
        if lane_obj.trimmer.is_some() {
            placed.extend(trim_sink.iter().cloned());
        }
        lanes.push(lane_obj);
    }
    lanes.sort_by_key(|l| l.index);

    let active: BTreeSet<&str> = edges
        .iter()
        .flat_map(|e| [e.from.module.as_str(), e.to.module.as_str()])
        .collect();
    let warnings = active
        .into_iter()
        .filter(|m| !placed.contains(*m))
        .map(|m| TopologyWarning::Unreachable(m.to_string()))
        .collect();

    let modules = catalog.clone();
    Ok(PlantTopology { modules, edges, lanes, default_destination, trim_sink, warnings })
}

fn walk_lane(
    lane: usize,
    origin: &str,
    first: &str,
    next: &BTreeMap<(&str, &str), &str>,
    catalog: &Catalog,
    trim_sink: Option<&str>,
) -> Result<Lane, TopologyError> {
    let order_err = |module: &str, expected| TopologyError::ProcessOrder {
        lane,
        module: module.to_string(),
        expected,
    };
    let weigher = first;
    if catalog[weigher] != ModuleKind::Weigher {
        return Err(order_err(weigher, "weigher"));
    }
    let assigner = *next
        .get(&(weigher, "out"))
        .ok_or_else(|| order_err(weigher, "connected weigher"))?;
    if catalog[assigner] != ModuleKind::Assigner {
        return Err(order_err(assigner, "assigner"));
    }
    let mut head = *next
        .get(&(assigner, "out"))
        .ok_or_else(|| order_err(assigner, "connected assigner"))?;

    let mut trimmer = None;
    if catalog[head] == ModuleKind::Trimmer {
        let t = head;
        let sink_ok = match (next.get(&(t, TRIM_PIECE_PORT)), trim_sink) {
            (Some(&dst), Some(sink)) => dst == sink,
            _ => false,
        };
        if !sink_ok {
            return Err(TopologyError::TrimWithoutSink { lane, trimmer: t.to_string() });
        }
        head = *next
            .get(&(t, TRIM_PRODUCT_PORT))
            .ok_or_else(|| order_err(t, "connected trimmer"))?;
        trimmer = Some(t.to_string());
    }
    if catalog[head] != ModuleKind::Distributor {
        return Err(order_err(head, "distributor"));
    }

    let mut distributors = Vec::new();
    let mut destinations = BTreeSet::new();
    let mut queue = VecDeque::from([head]);
    while let Some(d) = queue.pop_front() {
        distributors.push(d.to_string());
        for port in ModuleKind::Distributor.output_ports() {
            let Some(&to) = next.get(&(d, *port)) else { continue };
            match &catalog[to] {
                ModuleKind::Distributor => queue.push_back(to),
                ModuleKind::Destination { is_trim_sink: false, .. } => {
                    destinations.insert(to.to_string());
                }
                _ => return Err(order_err(to, "distributor or product destination")),
            }
        }
    }

    Ok(Lane {
        index: lane,
        origin: origin.to_string(),
        weigher: weigher.to_string(),
        assigner: assigner.to_string(),
        trimmer,
        distributors,
        destinations,
    })
}

fn find_cycle(edges: &[Edge]) -> Result<(), TopologyError> {
    let mut adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for e in edges {
        adj.entry(e.from.module.as_str()).or_default().push(e.to.module.as_str());
        adj.entry(e.to.module.as_str()).or_default();
    }
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state: BTreeMap<&str, u8> = adj.keys().map(|&k| (k, 0)).collect();
    for &root in adj.keys() {
        if state[root] != 0 {
            continue;
        }
        let mut stack: Vec<(&str, usize)> = vec![(root, 0)];
        state.insert(root, 1);
        while let Some(&mut (node, ref mut child)) = stack.last_mut() {
            if let Some(&succ) = adj[node].get(*child) {
                *child += 1;
                match state[succ] {
                    0 => {
                        state.insert(succ, 1);
                        stack.push((succ, 0));
                    }
                    1 => {
                        let start = stack.iter().position(|(n, _)| *n == succ).unwrap_or(0);
                        let mut path: Vec<String> =
                            stack[start..].iter().map(|(n, _)| n.to_string()).collect();
                        path.push(succ.to_string());
                        return Err(TopologyError::Cycle(path));
                    }
                    _ => {}
                }
            } else {
                state.insert(node, 2);
                stack.pop();
            }
        }
    }
    Ok(())
}

/// What the controller knows about one lane.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LaneRouting {
    pub lane: usize,
    pub reachable: BTreeSet<String>,
    pub has_trimmer: bool,
    /// Edge indices (into `PlantTopology::edges`) from the assigner's output
    /// to each reachable destination.
    pub paths: BTreeMap<String, Vec<usize>>,
    /// Edge carrying trim pieces to the sink, for lanes with a trimmer.
    pub trim_edge: Option<usize>,
}

/// Routing knowledge per lane, in lane-index order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoutingTable {
    pub lanes: Vec<LaneRouting>,
}

impl RoutingTable {
    pub fn lane(&self, index: usize) -> Option<&LaneRouting> {
        self.lanes.iter().find(|l| l.lane == index)
    }
}

/// Forward traversal of product edges from every lane's assigner.
pub fn derive_routings(topology: &PlantTopology) -> RoutingTable {
    let mut out_edges: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (k, e) in topology.edges.iter().enumerate() {
        out_edges.entry(e.from.module.as_str()).or_default().push(k);
    }
    let lanes = topology
        .lanes
        .iter()
        .map(|lane| {
            let mut paths: BTreeMap<String, Vec<usize>> = BTreeMap::new();
            let mut queue: VecDeque<(&str, Vec<usize>)> =
                VecDeque::from([(lane.assigner.as_str(), Vec::new())]);
            while let Some((module, path)) = queue.pop_front() {
                for &k in out_edges.get(module).map(Vec::as_slice).unwrap_or(&[]) {
                    let e = &topology.edges[k];
                    let is_trim_piece = topology.modules[module] == ModuleKind::Trimmer
                        && e.from.port == TRIM_PIECE_PORT;
                    if is_trim_piece {
                        continue;
                    }
                    let mut p = path.clone();
                    p.push(k);
                    match topology.modules[&e.to.module] {
                        ModuleKind::Destination { .. } => {
                            paths.entry(e.to.module.clone()).or_insert(p);
                        }
                        _ => queue.push_back((e.to.module.as_str(), p)),
                    }
                }
            }
            let trim_edge = lane
                .trimmer
                .as_deref()
                .and_then(|t| topology.edge_from(t, TRIM_PIECE_PORT));
            LaneRouting {
                lane: lane.index,
                reachable: paths.keys().cloned().collect(),
                has_trimmer: lane.trimmer.is_some(),
                paths,
                trim_edge,
            }
        })
        .collect();
    RoutingTable { lanes }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dest(is_default: bool, is_trim_sink: bool) -> ModuleKind {
        ModuleKind::Destination { recipe: None, is_default, is_trim_sink }
    }

    fn catalog_one_lane(with_trimmer: bool) -> Catalog {
        let mut c = Catalog::new();
        c.insert("o1".into(), ModuleKind::Origin { lane: 1 });
        c.insert("w1".into(), ModuleKind::Weigher);
        c.insert("a1".into(), ModuleKind::Assigner);
        if with_trimmer {
            c.insert("t1".into(), ModuleKind::Trimmer);
        }
        c.insert("d1".into(), ModuleKind::Distributor);
        c.insert("strips".into(), dest(true, false));
        c.insert("batch".into(), dest(false, false));
        c.insert("mince".into(), dest(false, true));
        c
    }

    fn w(a: &str, ap: &str, b: &str, bp: &str) -> (PortRef, PortRef) {
        (PortRef::output(a, ap), PortRef::input(b, bp))
    }

    fn one_lane_wiring(with_trimmer: bool) -> Vec<(PortRef, PortRef)> {
        let mut v = vec![w("o1", "out", "w1", "in"), w("w1", "out", "a1", "in")];
        if with_trimmer {
            v.push(w("a1", "out", "t1", "in"));
            v.push(w("t1", "out1", "d1", "in"));
            v.push(w("t1", "out2", "mince", "in"));
        } else {
            v.push(w("a1", "out", "d1", "in"));
        }
        v.push(w("d1", "out1", "batch", "in"));
        v.push(w("d1", "out2", "strips", "in"));
        v
    }

    #[test]
    fn single_lane_with_trimmer() {
        let topo = build_topology(&one_lane_wiring(true), &catalog_one_lane(true)).unwrap();
        assert_eq!(topo.lanes.len(), 1);
        assert_eq!(topo.lanes[0].trimmer.as_deref(), Some("t1"));
        assert!(topo.warnings.is_empty());
        let r = derive_routings(&topo);
        let lane = r.lane(1).unwrap();
        assert!(lane.has_trimmer);
        assert_eq!(
            lane.reachable,
            ["batch", "strips"].iter().map(|s| s.to_string()).collect()
        );
        assert_eq!(lane.paths["batch"].len(), 3);
        assert_eq!(topo.edges[lane.trim_edge.unwrap()].to.module, "mince");
        assert!(topo.to_dot().lines().count() == topo.edges.len() + 2);
    }

    #[test]
    fn empty_design_has_no_lanes() {
        let topo = build_topology(&[], &catalog_one_lane(true)).unwrap();
        assert!(topo.lanes.is_empty() && topo.edges.is_empty());
        assert!(derive_routings(&topo).lanes.is_empty());
    }

    #[test]
    fn distributor_back_to_assigner_is_a_cycle() {
        let mut c = catalog_one_lane(false);
        c.insert("d2".into(), ModuleKind::Distributor);
        let mut wiring = one_lane_wiring(false);
        wiring.retain(|(o, _)| !(o.module == "d1" && o.port == "out1"));
        wiring.push(w("d1", "out1", "d2", "in"));
        wiring.push(w("d2", "out1", "a1", "in"));
        let err = build_topology(&wiring, &c).unwrap_err();
        assert_eq!(
            err,
            TopologyError::Cycle(["a1", "d1", "d2", "a1"].iter().map(|s| s.to_string()).collect())
        );
        let cyc = vec![
            w("d1", "out1", "d2", "in"),
            w("d2", "out1", "d1", "in"),
        ];
        assert!(matches!(build_topology(&cyc, &c), Err(TopologyError::Cycle(_))));
    }

    #[test]
    fn process_order_violation() {
        let c = catalog_one_lane(false);
        let wiring = vec![w("o1", "out", "a1", "in")];
        assert!(matches!(
            build_topology(&wiring, &c),
            Err(TopologyError::ProcessOrder { lane: 1, .. })
        ));
    }

    #[test]
    fn lane_without_default_route() {
        let c = catalog_one_lane(false);
        let mut wiring = one_lane_wiring(false);
        wiring.retain(|(_, i)| i.module != "strips");
        assert_eq!(build_topology(&wiring, &c), Err(TopologyError::NoDefaultRoute { lane: 1 }));
    }

    #[test]
    fn trimmer_without_sink_is_rejected() {
        let c = catalog_one_lane(true);
        let mut wiring = one_lane_wiring(true);
        wiring.retain(|(o, _)| !(o.module == "t1" && o.port == "out2"));
        assert!(matches!(
            build_topology(&wiring, &c),
            Err(TopologyError::TrimWithoutSink { lane: 1, .. })
        ));
    }

    #[test]
    fn fan_out_and_merge_are_rejected() {
        let c = catalog_one_lane(false);
        let mut wiring = one_lane_wiring(false);
        wiring.push(w("a1", "out", "batch", "in"));
        assert!(matches!(build_topology(&wiring, &c), Err(TopologyError::FanOut(_))));
        let mut c2 = c.clone();
        c2.insert("w2".into(), ModuleKind::Weigher);
        let mut wiring = one_lane_wiring(false);
        wiring.push(w("w2", "out", "a1", "in"));
        assert!(matches!(build_topology(&wiring, &c2), Err(TopologyError::Merge(_))));
    }

    #[test]
    fn orphan_modules_raise_a_warning() {
        let mut c = catalog_one_lane(false);
        c.insert("d9".into(), ModuleKind::Distributor);
        let mut wiring = one_lane_wiring(false);
        wiring.push(w("d9", "out1", "batch", "in"));
        let topo = build_topology(&wiring, &c).unwrap();
        assert_eq!(topo.warnings, vec![TopologyWarning::Unreachable("d9".into())]);
    }

    #[test]
    fn catalog_needs_one_default() {
        let mut c = catalog_one_lane(false);
        c.insert("strips2".into(), dest(true, false));
        assert_eq!(
            build_topology(&[], &c),
            Err(TopologyError::DefaultDestinationCount(2))
        );
    }
}
