//! Circuit decomposition of a slot-labelled 4-regular graph.
//!
//! A circuit enters a vertex through one slot and leaves through its partner
//! (1<->3, 2<->4), so following edges this way partitions the edge set into
//! closed walks. Circuits are found by repeatedly starting from the lowest
//! unused edge id and walking from its endpoint `a` towards endpoint `b`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{LabeledGraph, SlotRef};

/// One edge traversal followed by the pass through the vertex it arrives at.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Hop {
    pub edge: usize,
    /// Arrival end of `edge`.
    pub entry: SlotRef,
    /// Partner slot of `entry`; the departure end of the next hop's edge.
    pub exit: SlotRef,
}

/// The edge end whose value defines the circuit value. Always an `x1`/`x2` slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InitialEdge {
    pub edge: usize,
    pub end: SlotRef,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Circuit {
    pub id: usize,
    pub hops: Vec<Hop>,
    pub initial_edge: InitialEdge,
}

impl Circuit {
    pub fn edge_ids(&self) -> Vec<usize> {
        self.hops.iter().map(|h| h.edge).collect()
    }

    /// Vertices passed, with multiplicity, in traversal order.
    pub fn passes(&self) -> impl Iterator<Item = usize> + '_ {
        self.hops.iter().map(|h| h.entry.vertex)
    }
}

/// How the degree of a circuit is counted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    /// Number of distinct neighbouring circuits.
    Neighbor,
    /// Number of vertices shared with other circuits, summed over neighbours.
    /// This is the exponent of `b` the vertex weights actually produce.
    #[default]
    Intersection,
}

impl FromStr for Convention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "neighbor" | "neighbour" => Ok(Convention::Neighbor),
            "intersection" => Ok(Convention::Intersection),
            _ => Err(Error::InvalidArgument(format!(
                "unknown convention {s:?} (expected neighbor or intersection)"
            ))),
        }
    }
}

impl fmt::Display for Convention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Convention::Neighbor => "neighbor",
            Convention::Intersection => "intersection",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decomposition {
    pub circuits: Vec<Circuit>,
    /// `(i, j)` with `i < j` mapped to the number of distinct common vertices.
    pub shared_vertices: BTreeMap<(usize, usize), usize>,
    /// Per circuit, the number of vertices it passes twice.
    pub self_intersections: Vec<usize>,
    pub delta_neighbor: Vec<u32>,
    pub delta_intersection: Vec<u32>,
    /// Circuit owning each edge.
    pub edge_circuit: Vec<usize>,
    neighbors: Vec<Vec<usize>>,
}

pub fn decompose(g: &LabeledGraph) -> Result<Decomposition> {
    let report = g.validate();
    if !report.is_ok() {
        return Err(Error::InvalidGraph(report.to_string()));
    }
    let owner = g.slot_owners();
    let m = g.edges.len();
    let mut edge_circuit = vec![usize::MAX; m];
    let mut circuits = Vec::new();

    for start in 0..m {
        if edge_circuit[start] != usize::MAX {
            continue;
        }
        let id = circuits.len();
        let start_tail = g.edges[start].a;
        let mut hops = Vec::new();
        let mut edge = start;
        let mut arrival = g.edges[start].b;
        loop {
            debug_assert_eq!(edge_circuit[edge], usize::MAX, "edge visited twice");
            edge_circuit[edge] = id;
            let exit = arrival.partner();
            hops.push(Hop { edge, entry: arrival, exit });
            if exit == start_tail {
                break;
            }
            edge = owner[&exit];
            arrival = g.edges[edge].other(exit);
        }
        let initial_edge = hops
            .iter()
            .find(|h| h.entry.is_primary())
            .map(|h| InitialEdge { edge: h.edge, end: h.entry })
            .unwrap_or_else(|| {
                // every pass then leaves through x1/x2: use the first departure end
                let k = hops.iter().position(|h| h.exit.is_primary()).expect("pass has a primary slot");
                let next = hops[(k + 1) % hops.len()].edge;
                InitialEdge { edge: next, end: hops[k].exit }
            });
        circuits.push(Circuit { id, hops, initial_edge });
    }

    let n = circuits.len();
    let mut vertex_sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    let mut self_intersections = vec![0; n];
    for c in &circuits {
        for v in c.passes() {
            if !vertex_sets[c.id].insert(v) {
                self_intersections[c.id] += 1;
            }
        }
    }
    let mut hosts: Vec<Vec<usize>> = vec![Vec::new(); g.vertex_count];
    for (i, set) in vertex_sets.iter().enumerate() {
        for &v in set {
            hosts[v].push(i);
        }
    }
    let mut shared_vertices = BTreeMap::new();
    for h in &hosts {
        for (x, &i) in h.iter().enumerate() {
            for &j in &h[x + 1..] {
                *shared_vertices.entry((i.min(j), i.max(j))).or_insert(0) += 1;
            }
        }
    }
    let mut neighbors = vec![Vec::new(); n];
    let mut delta_intersection = vec![0u32; n];
    for (&(i, j), &count) in &shared_vertices {
        neighbors[i].push(j);
        neighbors[j].push(i);
        delta_intersection[i] += count as u32;
        delta_intersection[j] += count as u32;
    }
    for nb in &mut neighbors {
        nb.sort_unstable();
    }
    let delta_neighbor = neighbors.iter().map(|nb| nb.len() as u32).collect();

    Ok(Decomposition {
        circuits,
        shared_vertices,
        self_intersections,
        delta_neighbor,
        delta_intersection,
        edge_circuit,
        neighbors,
    })
}

impl Decomposition {
    pub fn n(&self) -> usize {
        self.circuits.len()
    }

    /// Γ(C_i): circuits sharing a vertex with circuit `i`, excluding `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn shared(&self, i: usize, j: usize) -> usize {
        self.shared_vertices
            .get(&(i.min(j), i.max(j)))
            .copied()
            .unwrap_or(0)
    }

    pub fn delta(&self, i: usize, convention: Convention) -> u32 {
        match convention {
            Convention::Neighbor => self.delta_neighbor[i],
            Convention::Intersection => self.delta_intersection[i],
        }
    }

    pub fn deltas(&self, convention: Convention) -> Vec<u32> {
        (0..self.n()).map(|i| self.delta(i, convention)).collect()
    }

    pub fn delta_max(&self, convention: Convention) -> u32 {
        self.deltas(convention).into_iter().max().unwrap_or(0)
    }

    /// No triangle in the circuit adjacency graph.
    pub fn is_two_by_two_free(&self) -> bool {
        for i in 0..self.n() {
            for &j in self.neighbors(i).iter().filter(|&&j| j > i) {
                for &k in self.neighbors(j).iter().filter(|&&k| k > j) {
                    if self.shared(i, k) > 0 {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Circuits whose `x1`/`x2` slots do not all sit on the same side of the
    /// traversal, i.e. some pass enters through `x1`/`x2` and another leaves
    /// through one.
    pub fn incoherent_circuits(&self) -> Vec<usize> {
        self.circuits
            .iter()
            .filter(|c| {
                let primary_entries = c.hops.iter().filter(|h| h.entry.is_primary()).count();
                primary_entries != 0 && primary_entries != c.hops.len()
            })
            .map(|c| c.id)
            .collect()
    }

    /// Every `x1`/`x2` slot on a circuit carries the circuit value, so the
    /// zero at `f(1100)` forbids exactly the patterns where two circuits
    /// meeting at a vertex are both 1.
    pub fn is_coherent(&self) -> bool {
        self.incoherent_circuits().is_empty()
    }

    pub fn has_self_intersection(&self, i: usize) -> bool {
        self.self_intersections[i] > 0
    }

    pub fn self_intersection_free(&self) -> bool {
        self.self_intersections.iter().all(|&s| s == 0)
    }

    /// Every adjacent pair meets at exactly one vertex.
    pub fn single_intersection(&self) -> bool {
        self.shared_vertices.values().all(|&c| c == 1)
    }

    pub fn circuit_graph(&self, convention: Convention) -> CircuitGraph {
        CircuitGraph::new(self.neighbors.clone(), self.deltas(convention), convention)
    }

    pub fn report(&self, convention: Convention) -> DecompositionReport {
        DecompositionReport {
            convention,
            n: self.n(),
            circuits: self.circuits.iter().map(|c| c.edge_ids()).collect(),
            initial_edges: self.circuits.iter().map(|c| c.initial_edge.edge).collect(),
            adjacency: self
                .shared_vertices
                .iter()
                .map(|(&(i, j), &shared)| AdjacencyEntry { i, j, shared })
                .collect(),
            delta: self.deltas(convention),
            delta_max: self.delta_max(convention),
            flags: Flags {
                two_by_two_free: self.is_two_by_two_free(),
                coherent: self.is_coherent(),
                self_intersection_free: self.self_intersection_free(),
            },
        }
    }
}

/// Circuit adjacency together with the per-circuit degrees of one convention.
/// This is all the chain, the exact oracles and the coupling analysis need.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CircuitGraph {
    neighbors: Vec<Vec<usize>>,
    adjacent: Vec<Vec<bool>>,
    degrees: Vec<u32>,
    convention: Convention,
}

impl CircuitGraph {
    pub fn new(neighbors: Vec<Vec<usize>>, degrees: Vec<u32>, convention: Convention) -> Self {
        let n = neighbors.len();
        assert_eq!(degrees.len(), n);
        let mut adjacent = vec![vec![false; n]; n];
        for (i, nb) in neighbors.iter().enumerate() {
            for &j in nb {
                assert_ne!(i, j, "circuit listed as its own neighbour");
                adjacent[i][j] = true;
                adjacent[j][i] = true;
            }
        }
        CircuitGraph { neighbors, adjacent, degrees, convention }
    }

    /// Path adjacency with neighbour-count degrees; handy for synthetic tests.
    pub fn path(k: usize) -> Self {
        let neighbors: Vec<Vec<usize>> = (0..k)
            .map(|i| {
                let mut v = Vec::new();
                if i > 0 {
                    v.push(i - 1);
                }
                if i + 1 < k {
                    v.push(i + 1);
                }
                v
            })
            .collect();
        let degrees = neighbors.iter().map(|v| v.len() as u32).collect();
        CircuitGraph::new(neighbors, degrees, Convention::Neighbor)
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn is_adjacent(&self, i: usize, j: usize) -> bool {
        self.adjacent[i][j]
    }

    pub fn degree(&self, i: usize) -> u32 {
        self.degrees[i]
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn delta_max(&self) -> u32 {
        self.degrees.iter().copied().max().unwrap_or(0)
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn is_triangle_free(&self) -> bool {
        (0..self.n()).all(|i| {
            self.neighbors[i].iter().all(|&j| {
                self.neighbors[j]
                    .iter()
                    .all(|&k| k == i || !self.adjacent[i][k])
            })
        })
    }

    pub fn isolated(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.neighbors[i].is_empty()).collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AdjacencyEntry {
    pub i: usize,
    pub j: usize,
    pub shared: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Flags {
    pub two_by_two_free: bool,
    pub coherent: bool,
    pub self_intersection_free: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecompositionReport {
    pub convention: Convention,
    pub n: usize,
    pub circuits: Vec<Vec<usize>>,
    pub initial_edges: Vec<usize>,
    pub adjacency: Vec<AdjacencyEntry>,
    pub delta: Vec<u32>,
    pub delta_max: u32,
    pub flags: Flags,
}
