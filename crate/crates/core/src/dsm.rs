//! Design space matrices and exhaustive design enumeration.
//!
//! A [`DesignSpaceMatrix`] lists output ports (rows) and input ports
//! (columns), marks which `(output, input)` pairs may be wired together, and
//! bounds how many connections each port takes. A [`Design`] is one set of
//! connections satisfying every bound, plus the all-or-none rule for the
//! modules that carry it.
//!
//! Enumeration walks the allowed entries in `(output, input)` index order and
//! decides "absent" before "present" for each, so designs come out in
//! lexicographic order of their connection bit vector. `design_id` is the
//! position in that order.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Direction {
    Input,
    Output,
}

/// One port of one module.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PortRef {
    pub module: String,
    pub port: String,
    pub direction: Direction,
}

impl PortRef {
    pub fn output(module: impl Into<String>, port: impl Into<String>) -> Self {
        PortRef {
            module: module.into(),
            port: port.into(),
            direction: Direction::Output,
        }
    }

    pub fn input(module: impl Into<String>, port: impl Into<String>) -> Self {
        PortRef {
            module: module.into(),
            port: port.into(),
            direction: Direction::Input,
        }
    }

    /// `module.port`, the label used in matrix headers and JSON bounds keys.
    pub fn label(&self) -> String {
        alloc::format!("{}.{}", self.module, self.port)
    }
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.module, self.port)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PortBounds {
    pub min: u32,
    pub max: u32,
}

impl PortBounds {
    pub const fn new(min: u32, max: u32) -> Self {
        PortBounds { min, max }
    }

    pub const fn exactly(n: u32) -> Self {
        PortBounds { min: n, max: n }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DsmError {
    DuplicatePort(PortRef),
    MinExceedsMax { port: PortRef, min: u32, max: u32 },
    UnknownBoundsPort(PortRef),
    EntryOutOfRange { output: usize, input: usize },
    /// The port needs more connections than its row or column allows.
    Infeasible { port: PortRef, min: u32, allowed: u32 },
    UnknownModule(String),
}

impl fmt::Display for DsmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DsmError::DuplicatePort(p) => write!(f, "duplicate port {p} ({:?})", p.direction),
            DsmError::MinExceedsMax { port, min, max } => {
                write!(f, "port {port}: min {min} exceeds max {max}")
            }
            DsmError::UnknownBoundsPort(p) => write!(f, "bounds reference unknown port {p}"),
            DsmError::EntryOutOfRange { output, input } => {
                write!(f, "allowed entry [{output}, {input}] is outside the matrix")
            }
            DsmError::Infeasible { port, min, allowed } => write!(
                f,
                "port {port} needs at least {min} connections but only {allowed} are allowed"
            ),
            DsmError::UnknownModule(m) => write!(f, "all-or-none module {m} owns no port"),
        }
    }
}

/// Non-fatal findings from validation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DsmWarning {
    /// `max` can never be reached because fewer entries are allowed.
    MaxAboveAllowed { port: PortRef, max: u32, allowed: u32 },
}

impl fmt::Display for DsmWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DsmWarning::MaxAboveAllowed { port, max, allowed } => write!(
                f,
                "port {port}: max {max} is above the {allowed} allowed connections"
            ),
        }
    }
}

/// A validated design space matrix. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignSpaceMatrix {
    outputs: Vec<PortRef>,
    inputs: Vec<PortRef>,
    /// Allowed `(output, input)` entries, sorted.
    entries: Vec<(usize, usize)>,
    output_bounds: Vec<PortBounds>,
    input_bounds: Vec<PortBounds>,
    all_or_none: BTreeSet<String>,
    warnings: Vec<DsmWarning>,
}

impl DesignSpaceMatrix {
    /// Validates and builds a matrix.
    ///
    /// Ports missing from `bounds` take `min = 0` and `max =` their number of
    /// allowed entries.
    pub fn new(
        outputs: Vec<PortRef>,
        inputs: Vec<PortRef>,
        allowed: impl IntoIterator<Item = (usize, usize)>,
        bounds: impl IntoIterator<Item = (PortRef, PortBounds)>,
        all_or_none: BTreeSet<String>,
    ) -> Result<Self, DsmError> {
        let outputs: Vec<PortRef> = outputs
            .into_iter()
            .map(|p| PortRef { direction: Direction::Output, ..p })
            .collect();
        let inputs: Vec<PortRef> = inputs
            .into_iter()
            .map(|p| PortRef { direction: Direction::Input, ..p })
            .collect();
        let mut seen = BTreeSet::new();
        for p in outputs.iter().chain(inputs.iter()) {
            if !seen.insert(p) {
                return Err(DsmError::DuplicatePort(p.clone()));
            }
        }

        let mut entries = BTreeSet::new();
        for (o, i) in allowed {
            if o >= outputs.len() || i >= inputs.len() {
                return Err(DsmError::EntryOutOfRange { output: o, input: i });
            }
            entries.insert((o, i));
        }
        let entries: Vec<(usize, usize)> = entries.into_iter().collect();

        let mut out_allowed = vec![0u32; outputs.len()];
        let mut in_allowed = vec![0u32; inputs.len()];
        for &(o, i) in &entries {
            out_allowed[o] += 1;
            in_allowed[i] += 1;
        }

        let mut output_bounds: Vec<Option<PortBounds>> = vec![None; outputs.len()];
        let mut input_bounds: Vec<Option<PortBounds>> = vec![None; inputs.len()];
        for (port, b) in bounds {
            let slot = match port.direction {
                Direction::Output => outputs
                    .iter()
                    .position(|p| p == &port)
                    .map(|k| &mut output_bounds[k]),
                Direction::Input => inputs
                    .iter()
                    .position(|p| p == &port)
                    .map(|k| &mut input_bounds[k]),
            };
            let Some(slot) = slot else {
                return Err(DsmError::UnknownBoundsPort(port));
            };
            if b.min > b.max {
                return Err(DsmError::MinExceedsMax { port, min: b.min, max: b.max });
            }
            *slot = Some(b);
        }

        let mut warnings = Vec::new();
        let mut finish = |ports: &[PortRef], bounds: Vec<Option<PortBounds>>, allowed: &[u32]| {
            let mut out = Vec::with_capacity(ports.len());
            for ((p, b), &n) in ports.iter().zip(bounds).zip(allowed) {
                let b = b.unwrap_or(PortBounds::new(0, n));
                if b.min > n {
                    return Err(DsmError::Infeasible { port: p.clone(), min: b.min, allowed: n });
                }
                if b.max > n {
                    warnings.push(DsmWarning::MaxAboveAllowed {
                        port: p.clone(),
                        max: b.max,
                        allowed: n,
                    });
                }
                out.push(b);
            }
            Ok(out)
        };
        let output_bounds = finish(&outputs, output_bounds, &out_allowed)?;
        let input_bounds = finish(&inputs, input_bounds, &in_allowed)?;

        for m in &all_or_none {
            if !outputs.iter().chain(inputs.iter()).any(|p| &p.module == m) {
                return Err(DsmError::UnknownModule(m.clone()));
            }
        }

        Ok(DesignSpaceMatrix {
            outputs,
            inputs,
            entries,
            output_bounds,
            input_bounds,
            all_or_none,
            warnings,
        })
    }

    pub fn outputs(&self) -> &[PortRef] {
        &self.outputs
    }

    pub fn inputs(&self) -> &[PortRef] {
        &self.inputs
    }

    /// Allowed entries in enumeration order.
    pub fn entries(&self) -> &[(usize, usize)] {
        &self.entries
    }

    pub fn is_allowed(&self, output: usize, input: usize) -> bool {
        self.entries.binary_search(&(output, input)).is_ok()
    }

    pub fn output_bounds(&self, output: usize) -> PortBounds {
        self.output_bounds[output]
    }

    pub fn input_bounds(&self, input: usize) -> PortBounds {
        self.input_bounds[input]
    }

    pub fn all_or_none(&self) -> &BTreeSet<String> {
        &self.all_or_none
    }

    pub fn warnings(&self) -> &[DsmWarning] {
        &self.warnings
    }

    pub fn output_index(&self, module: &str, port: &str) -> Option<usize> {
        self.outputs.iter().position(|p| p.module == module && p.port == port)
    }

    pub fn input_index(&self, module: &str, port: &str) -> Option<usize> {
        self.inputs.iter().position(|p| p.module == module && p.port == port)
    }

    /// Every module that owns at least one port, in first-appearance order.
    pub fn modules(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for p in self.outputs.iter().chain(self.inputs.iter()) {
            if seen.insert(p.module.as_str()) {
                out.push(p.module.as_str());
            }
        }
        out
    }

    /// Sub-space around `base` in which only the wiring of `free_modules`
    /// varies.
    ///
    /// A port is free when it belongs to a free module or shares an allowed
    /// entry with one. Entries between two free ports stay allowed; every
    /// other port keeps exactly its connections in `base`.
    pub fn restrict(&self, free_modules: &BTreeSet<String>, base: &Design) -> DesignSpaceMatrix {
        let mut out_free: Vec<bool> =
            self.outputs.iter().map(|p| free_modules.contains(&p.module)).collect();
        let mut in_free: Vec<bool> =
            self.inputs.iter().map(|p| free_modules.contains(&p.module)).collect();
        for &(o, i) in &self.entries {
            if free_modules.contains(&self.outputs[o].module)
                || free_modules.contains(&self.inputs[i].module)
            {
                out_free[o] = true;
                in_free[i] = true;
            }
        }
        let used: BTreeSet<(usize, usize)> =
            base.connections.iter().map(|c| (c.output, c.input)).collect();
        let entries = self
            .entries
            .iter()
            .copied()
            .filter(|&(o, i)| used.contains(&(o, i)) || (out_free[o] && in_free[i]))
            .collect();
        let mut out_used = vec![0u32; self.outputs.len()];
        let mut in_used = vec![0u32; self.inputs.len()];
        for &(o, i) in &used {
            out_used[o] += 1;
            in_used[i] += 1;
        }
        let freeze = |bounds: &[PortBounds], free: &[bool], used: &[u32]| -> Vec<PortBounds> {
            bounds
                .iter()
                .zip(free.iter().zip(used))
                .map(|(&b, (&f, &n))| if f { b } else { PortBounds::exactly(n) })
                .collect()
        };
        DesignSpaceMatrix {
            entries,
            output_bounds: freeze(&self.output_bounds, &out_free, &out_used),
            input_bounds: freeze(&self.input_bounds, &in_free, &in_used),
            ..self.clone()
        }
    }

    /// Lazy enumeration of every valid design.
    pub fn designs(&self) -> Designs<'_> {
        Designs { search: Search::new(self), next_id: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Connection {
    pub output: usize,
    pub input: usize,
}

/// One concrete wiring drawn from a matrix. Connections are indices into the
/// matrix's port lists, sorted.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Design {
    pub id: u64,
    pub connections: Vec<Connection>,
}

impl Design {
    /// Resolves connections to port pairs.
    pub fn wiring(&self, dsm: &DesignSpaceMatrix) -> Vec<(PortRef, PortRef)> {
        self.connections
            .iter()
            .map(|c| (dsm.outputs[c.output].clone(), dsm.inputs[c.input].clone()))
            .collect()
    }

    /// Modules with at least one connected port.
    pub fn active_modules<'a>(&self, dsm: &'a DesignSpaceMatrix) -> BTreeSet<&'a str> {
        self.connections
            .iter()
            .flat_map(|c| {
                [dsm.outputs[c.output].module.as_str(), dsm.inputs[c.input].module.as_str()]
            })
            .collect()
    }
}

/// Iterator returned by [`DesignSpaceMatrix::designs`].
#[derive(Debug)]
pub struct Designs<'a> {
    search: Search<'a>,
    next_id: u64,
}

impl Iterator for Designs<'_> {
    type Item = Design;

    fn next(&mut self) -> Option<Design> {
        if !self.search.next_leaf() {
            return None;
        }
        let connections = self
            .search
            .stack
            .iter()
            .enumerate()
            .filter(|(_, &on)| on)
            .map(|(e, _)| {
                let (output, input) = self.search.dsm.entries[e];
                Connection { output, input }
            })
            .collect();
        let id = self.next_id;
        self.next_id += 1;
        Some(Design { id, connections })
    }
}

/// Depth-first search over entry decisions with bound propagation.
#[derive(Debug)]
struct Search<'a> {
    dsm: &'a DesignSpaceMatrix,
    stack: Vec<bool>,
    started: bool,
    out_count: Vec<u32>,
    in_count: Vec<u32>,
    out_left: Vec<u32>,
    in_left: Vec<u32>,
    /// Modules whose all-or-none rule becomes decidable once entry `e` is set.
    checks_at: Vec<Vec<usize>>,
    /// Per all-or-none module: its output and input port indices.
    groups: Vec<(Vec<usize>, Vec<usize>)>,
}

impl<'a> Search<'a> {
    fn new(dsm: &'a DesignSpaceMatrix) -> Self {
        let mut out_left = vec![0u32; dsm.outputs.len()];
        let mut in_left = vec![0u32; dsm.inputs.len()];
        for &(o, i) in &dsm.entries {
            out_left[o] += 1;
            in_left[i] += 1;
        }
        let mut checks_at = vec![Vec::new(); dsm.entries.len()];
        let mut groups = Vec::new();
        for m in &dsm.all_or_none {
            let outs: Vec<usize> = (0..dsm.outputs.len())
                .filter(|&k| &dsm.outputs[k].module == m)
                .collect();
            let ins: Vec<usize> = (0..dsm.inputs.len())
                .filter(|&k| &dsm.inputs[k].module == m)
                .collect();
            let last = dsm
                .entries
                .iter()
                .rposition(|&(o, i)| outs.contains(&o) || ins.contains(&i));
            // A module with no allowed entries stays disconnected, which
            // satisfies the rule.
            if let Some(last) = last {
                checks_at[last].push(groups.len());
                groups.push((outs, ins));
            }
        }
        Search {
            dsm,
            stack: Vec::with_capacity(dsm.entries.len()),
            started: false,
            out_count: vec![0; dsm.outputs.len()],
            in_count: vec![0; dsm.inputs.len()],
            out_left,
            in_left,
            checks_at,
            groups,
        }
    }

    fn apply(&mut self, e: usize, on: bool) -> bool {
        let (o, i) = self.dsm.entries[e];
        let (ob, ib) = (self.dsm.output_bounds[o], self.dsm.input_bounds[i]);
        if on && (self.out_count[o] >= ob.max || self.in_count[i] >= ib.max) {
            return false;
        }
        let add = u32::from(on);
        self.out_left[o] -= 1;
        self.in_left[i] -= 1;
        self.out_count[o] += add;
        self.in_count[i] += add;
        let ok = self.out_count[o] + self.out_left[o] >= ob.min
            && self.in_count[i] + self.in_left[i] >= ib.min
            && self.checks_at[e].iter().all(|&g| self.all_or_none_holds(g));
        if !ok {
            self.undo(e, on);
        }
        ok
    }

    fn undo(&mut self, e: usize, on: bool) {
        let (o, i) = self.dsm.entries[e];
        let add = u32::from(on);
        self.out_left[o] += 1;
        self.in_left[i] += 1;
        self.out_count[o] -= add;
        self.in_count[i] -= add;
    }

    fn all_or_none_holds(&self, group: usize) -> bool {
        let (outs, ins) = &self.groups[group];
        let total = outs.len() + ins.len();
        let connected = outs.iter().filter(|&&o| self.out_count[o] > 0).count()
            + ins.iter().filter(|&&i| self.in_count[i] > 0).count();
        connected == 0 || connected == total
    }

    /// Moves to the next complete, valid assignment. Returns `false` once the
    /// space is exhausted.
    fn next_leaf(&mut self) -> bool {
        let n = self.dsm.entries.len();
        let mut backtrack = self.started;
        self.started = true;
        loop {
            if backtrack {
                loop {
                    let Some(on) = self.stack.pop() else {
                        return false;
                    };
                    let e = self.stack.len();
                    self.undo(e, on);
                    if !on && self.apply(e, true) {
                        self.stack.push(true);
                        break;
                    }
                }
            }
            backtrack = false;
            while self.stack.len() < n {
                let e = self.stack.len();
                if self.apply(e, false) {
                    self.stack.push(false);
                } else if self.apply(e, true) {
                    self.stack.push(true);
                } else {
                    backtrack = true;
                    break;
                }
            }
            if !backtrack {
                return true;
            }
        }
    }
}

/// Number of valid designs, without materializing them.
pub fn count_designs(dsm: &DesignSpaceMatrix) -> u64 {
    let mut search = Search::new(dsm);
    let mut n = 0;
    while search.next_leaf() {
        n += 1;
    }
    n
}

/// `k` designs drawn uniformly without replacement (reservoir sampling over
/// the enumeration stream), returned in `design_id` order.
pub fn sample_designs(dsm: &DesignSpaceMatrix, k: usize, seed: u64) -> Vec<Design> {
    let mut rng = rng::stream(seed);
    let mut reservoir: Vec<Design> = Vec::with_capacity(k);
    for (seen, design) in dsm.designs().enumerate() {
        if reservoir.len() < k {
            reservoir.push(design);
        } else {
            let j = rng.random_range(0..=seen);
            if j < k {
                reservoir[j] = design;
            }
        }
    }
    reservoir.sort_by_key(|d| d.id);
    reservoir
}

/// Looks up the design whose connection set equals `wiring`.
pub fn find_design(dsm: &DesignSpaceMatrix, wiring: &[(PortRef, PortRef)]) -> Option<Design> {
    let mut wanted = Vec::with_capacity(wiring.len());
    for (o, i) in wiring {
        let output = dsm.output_index(&o.module, &o.port)?;
        let input = dsm.input_index(&i.module, &i.port)?;
        wanted.push(Connection { output, input });
    }
    wanted.sort();
    wanted.dedup();
    dsm.designs().find(|d| d.connections == wanted)
}

/// Design with the given id, if any.
pub fn design_by_id(dsm: &DesignSpaceMatrix, id: u64) -> Option<Design> {
    dsm.designs().nth(usize::try_from(id).ok()?)
}

/// Per-port connection counts of a design, keyed by label.
pub fn connection_counts(dsm: &DesignSpaceMatrix, design: &Design) -> BTreeMap<PortRef, u32> {
    let mut counts = BTreeMap::new();
    for c in &design.connections {
        *counts.entry(dsm.outputs[c.output].clone()).or_insert(0) += 1;
        *counts.entry(dsm.inputs[c.input].clone()).or_insert(0) += 1;
    }
    counts
}
