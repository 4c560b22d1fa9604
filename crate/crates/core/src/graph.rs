//! Slot-labelled 4-regular multigraphs, fixture generators and the JSON
//! instance format.
//!
//! Every vertex has four numbered slots `1..=4` (the variables `x1..x4` of its
//! constraint function) and every slot is the endpoint of exactly one edge.
//! Loops and parallel edges are allowed.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::decomposition::decompose;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SlotRef {
    #[serde(rename = "v")]
    pub vertex: usize,
    pub slot: u8,
}

impl SlotRef {
    pub fn new(vertex: usize, slot: u8) -> Self {
        SlotRef { vertex, slot }
    }

    /// The slot a circuit leaves through after entering here: 1<->3, 2<->4.
    pub fn partner(self) -> SlotRef {
        let slot = match self.slot {
            1 => 3,
            3 => 1,
            2 => 4,
            4 => 2,
            s => panic!("slot {s} out of range"),
        };
        SlotRef { slot, ..self }
    }

    /// Slots 1 and 2 hold `x1`/`x2`, the variables a circuit value is read from.
    pub fn is_primary(self) -> bool {
        self.slot == 1 || self.slot == 2
    }
}

impl fmt::Display for SlotRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}.x{}", self.vertex, self.slot)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub id: usize,
    pub a: SlotRef,
    pub b: SlotRef,
}

impl Edge {
    pub fn other(&self, end: SlotRef) -> SlotRef {
        if end == self.a {
            self.b
        } else {
            debug_assert_eq!(end, self.b);
            self.a
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledGraph {
    pub vertex_count: usize,
    pub edges: Vec<Edge>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    SlotOutOfRange { edge: usize, slot: u8 },
    VertexOutOfRange { edge: usize, vertex: usize },
    SameEndpoint { edge: usize },
    DuplicateSlot { at: SlotRef, edges: (usize, usize) },
    UnusedSlot { at: SlotRef },
    NonDenseId { position: usize, id: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::SlotOutOfRange { edge, slot } => {
                write!(f, "edge {edge}: slot {slot} not in 1..=4")
            }
            Violation::VertexOutOfRange { edge, vertex } => {
                write!(f, "edge {edge}: vertex {vertex} out of range")
            }
            Violation::SameEndpoint { edge } => write!(f, "edge {edge}: both ends on one slot"),
            Violation::DuplicateSlot { at, edges } => {
                write!(f, "duplicate slot {at} (edges {} and {})", edges.0, edges.1)
            }
            Violation::UnusedSlot { at } => write!(f, "unused slot {at}"),
            Violation::NonDenseId { position, id } => {
                write!(f, "edge at position {position} has id {id}")
            }
        }
    }
}

/// Empty iff the graph is well formed.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

impl LabeledGraph {
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let mut owner: HashMap<SlotRef, usize> = HashMap::new();
        for (pos, e) in self.edges.iter().enumerate() {
            if e.id != pos {
                violations.push(Violation::NonDenseId { position: pos, id: e.id });
            }
            let mut ends_ok = true;
            for end in [e.a, e.b] {
                if !(1..=4).contains(&end.slot) {
                    violations.push(Violation::SlotOutOfRange { edge: e.id, slot: end.slot });
                    ends_ok = false;
                }
                if end.vertex >= self.vertex_count {
                    violations.push(Violation::VertexOutOfRange { edge: e.id, vertex: end.vertex });
                    ends_ok = false;
                }
            }
            if e.a == e.b {
                violations.push(Violation::SameEndpoint { edge: e.id });
                continue;
            }
            if !ends_ok {
                continue;
            }
            for end in [e.a, e.b] {
                if let Some(prev) = owner.insert(end, e.id) {
                    violations.push(Violation::DuplicateSlot { at: end, edges: (prev, e.id) });
                }
            }
        }
        for v in 0..self.vertex_count {
            for slot in 1..=4 {
                let at = SlotRef::new(v, slot);
                if !owner.contains_key(&at) {
                    violations.push(Violation::UnusedSlot { at });
                }
            }
        }
        ValidationReport { violations }
    }

    /// Map from every used slot to the id of the edge ending there.
    pub fn slot_owners(&self) -> HashMap<SlotRef, usize> {
        let mut m = HashMap::with_capacity(2 * self.edges.len());
        for e in &self.edges {
            m.insert(e.a, e.id);
            m.insert(e.b, e.id);
        }
        m
    }

    pub fn to_file(&self) -> GraphFile {
        GraphFile {
            vertices: self.vertex_count,
            edges: self.edges.clone(),
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("graph serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: RawGraphFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            location: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        let g = raw.into_graph()?;
        let report = g.validate();
        if !report.is_ok() {
            return Err(Error::InvalidGraph(report.to_string()));
        }
        Ok(g)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string() + "\n")?;
        Ok(())
    }
}

/// `{"vertices": N, "edges": [{"id":0,"a":{"v":0,"slot":1},"b":{"v":1,"slot":3}}, ...]}`
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphFile {
    pub vertices: usize,
    pub edges: Vec<Edge>,
}

#[derive(Deserialize)]
struct RawGraphFile {
    vertices: i64,
    edges: Vec<RawEdge>,
}

#[derive(Deserialize)]
struct RawEdge {
    id: i64,
    a: RawSlot,
    b: RawSlot,
}

#[derive(Deserialize)]
struct RawSlot {
    v: i64,
    slot: i64,
}

impl RawGraphFile {
    fn into_graph(self) -> Result<LabeledGraph> {
        let field = |location: String, message: &str| Error::Parse {
            location,
            message: message.to_string(),
        };
        if self.vertices < 0 {
            return Err(field("vertices".into(), "must be non-negative"));
        }
        let mut edges = Vec::with_capacity(self.edges.len());
        for (i, e) in self.edges.into_iter().enumerate() {
            if e.id < 0 {
                return Err(field(format!("edges[{i}].id"), "must be non-negative"));
            }
            let mut ends = [SlotRef::new(0, 1); 2];
            for (k, (name, s)) in [("a", e.a), ("b", e.b)].into_iter().enumerate() {
                if !(1..=4).contains(&s.slot) {
                    return Err(field(
                        format!("edges[{i}].{name}.slot"),
                        &format!("slot {} not in 1..=4", s.slot),
                    ));
                }
                if s.v < 0 || s.v >= self.vertices {
                    return Err(field(
                        format!("edges[{i}].{name}.v"),
                        &format!("vertex {} out of range", s.v),
                    ));
                }
                ends[k] = SlotRef::new(s.v as usize, s.slot as u8);
            }
            edges.push(Edge { id: e.id as usize, a: ends[0], b: ends[1] });
        }
        Ok(LabeledGraph { vertex_count: self.vertices as usize, edges })
    }
}

/// Builds a graph from `(tail, head)` slot pairs; ids follow list order.
pub fn from_pairs(vertex_count: usize, pairs: &[((usize, u8), (usize, u8))]) -> LabeledGraph {
    LabeledGraph {
        vertex_count,
        edges: pairs
            .iter()
            .enumerate()
            .map(|(id, &((va, sa), (vb, sb)))| Edge {
                id,
                a: SlotRef::new(va, sa),
                b: SlotRef::new(vb, sb),
            })
            .collect(),
    }
}

/// One vertex with two loops, on slots (1,3) and (2,4).
pub fn gen_theta() -> LabeledGraph {
    from_pairs(1, &[((0, 3), (0, 1)), ((0, 4), (0, 2))])
}

/// Two vertices joined by four parallel edges forming two circuits that
/// cross at both vertices. Edge ids 0..4 are u1..u4; vertex 0 is v1.
pub fn gen_fig2() -> LabeledGraph {
    from_pairs(
        2,
        &[
            ((0, 3), (1, 1)), // u1: v1 -> v2, first circuit
            ((1, 4), (0, 2)), // u2: v2 -> v1, second circuit
            ((1, 3), (0, 1)), // u3: v2 -> v1, first circuit
            ((0, 4), (1, 2)), // u4: v1 -> v2, second circuit
        ],
    )
}

/// `rows x cols` toroidal grid. Row circuits run through slots (1,3) and
/// column circuits through (2,4); every edge leaves at slot 3/4 and arrives
/// at slot 1/2. Circuit ids come out as rows first, then columns.
pub fn gen_torus(rows: usize, cols: usize) -> Result<LabeledGraph> {
    if rows < 2 || cols < 2 {
        return Err(Error::InvalidArgument(format!(
            "torus needs rows, cols >= 2 (got {rows}x{cols})"
        )));
    }
    let id = |r: usize, c: usize| r * cols + c;
    let mut pairs = Vec::with_capacity(2 * rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            pairs.push(((id(r, c), 3), (id(r, (c + 1) % cols), 1)));
        }
    }
    for c in 0..cols {
        for r in 0..rows {
            pairs.push(((id(r, c), 4), (id((r + 1) % rows, c), 2)));
        }
    }
    Ok(from_pairs(rows * cols, &pairs))
}

/// `k` circuits in a row, neighbours sharing exactly one vertex.
///
/// For `k >= 2` vertex `j` is shared by circuits `j` (slots 1,3) and `j+1`
/// (slots 2,4); the end circuits are single loops. `k = 1` cannot avoid a
/// self-intersection in a 4-regular graph: it yields one vertex whose single
/// circuit passes it twice.
pub fn gen_chain(k: usize) -> Result<LabeledGraph> {
    match k {
        0 => Err(Error::InvalidArgument("chain needs k >= 1".into())),
        1 => Ok(from_pairs(1, &[((0, 4), (0, 1)), ((0, 3), (0, 2))])),
        _ => {
            let mut pairs = vec![((0, 3), (0, 1))];
            for i in 1..k - 1 {
                pairs.push(((i - 1, 4), (i, 1)));
                pairs.push(((i, 3), (i - 1, 2)));
            }
            pairs.push(((k - 2, 4), (k - 2, 2)));
            Ok(from_pairs(k - 1, &pairs))
        }
    }
}

/// Three circuits crossing pairwise at three vertices (a triangle in the
/// circuit adjacency graph).
pub fn gen_triangle() -> LabeledGraph {
    // vertices: 0 = AB, 1 = BC, 2 = CA
    from_pairs(
        3,
        &[
            ((0, 3), (2, 2)), // A
            ((2, 4), (0, 1)), // A
            ((1, 3), (0, 2)), // B
            ((0, 4), (1, 1)), // B
            ((2, 3), (1, 2)), // C
            ((1, 4), (2, 1)), // C
        ],
    )
}

/// Uniformly random pairing of all `4 * vertices` slots. Loops and parallel
/// edges occur freely; coherence is not guaranteed.
pub fn gen_random_pairing<R: Rng + ?Sized>(vertices: usize, rng: &mut R) -> LabeledGraph {
    let mut slots: Vec<SlotRef> = (0..vertices)
        .flat_map(|v| (1..=4).map(move |s| SlotRef::new(v, s)))
        .collect();
    slots.shuffle(rng);
    LabeledGraph {
        vertex_count: vertices,
        edges: slots
            .chunks(2)
            .enumerate()
            .map(|(id, p)| Edge { id, a: p[0], b: p[1] })
            .collect(),
    }
}

/// Random coherent instance without self-intersecting circuits.
///
/// An instance is coherent exactly when every edge joins an `x3`/`x4` slot to
/// an `x1`/`x2` slot, so the sampler draws a uniform bijection between those
/// two slot classes and rejects outcomes in which some circuit passes a vertex
/// twice. Returns `None` if `max_tries` draws are all rejected.
pub fn gen_random_coherent<R: Rng + ?Sized>(
    vertices: usize,
    rng: &mut R,
    max_tries: usize,
) -> Option<LabeledGraph> {
    if vertices == 0 {
        return None;
    }
    let tails: Vec<SlotRef> = (0..vertices)
        .flat_map(|v| [SlotRef::new(v, 3), SlotRef::new(v, 4)])
        .collect();
    for _ in 0..max_tries {
        let mut heads: Vec<SlotRef> = (0..vertices)
            .flat_map(|v| [SlotRef::new(v, 1), SlotRef::new(v, 2)])
            .collect();
        heads.shuffle(rng);
        let g = LabeledGraph {
            vertex_count: vertices,
            edges: tails
                .iter()
                .zip(&heads)
                .enumerate()
                .map(|(id, (&a, &b))| Edge { id, a, b })
                .collect(),
        };
        let d = decompose(&g).expect("generated graph is valid");
        if d.self_intersection_free() {
            return Some(g);
        }
    }
    None
}
