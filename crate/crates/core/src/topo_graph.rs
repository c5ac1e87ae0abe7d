//! Distill the skeleton into a navigation graph: junction/endpoint
//! detection, chaining the skeleton pixels into node-to-node runs,
//! recursive max-deviation edge splitting, and pruning of leaves that sit
//! too close to unexplored space.

use std::collections::HashSet;

use crate::geom::point_segment_distance;
use crate::grid::Grid;
use crate::occupancy::{CellClass, CellClassMap};
use crate::params::Params;
use crate::skeleton::{binarize, thin, BinaryImage};

/// Why a pixel became a graph node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeRole {
    /// Three or more skeleton neighbours.
    Junction,
    /// One skeleton neighbour, an isolated pixel, or a synthesized
    /// dangling end.
    Endpoint,
    /// Inserted by edge splitting.
    Split,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub x: usize,
    pub y: usize,
    pub role: NodeRole,
}

impl Node {
    fn pos(&self) -> (usize, usize) {
        (self.x, self.y)
    }
}

/// An ordered run of skeleton pixels between two nodes. `pixels` holds the
/// interior only; endpoints live in the node table.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub start: usize,
    pub end: usize,
    pub pixels: Vec<(usize, usize)>,
}

/// Graph edge with its supporting chain segment (endpoints included).
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    /// Straight-line length between the two node coordinates, meters.
    pub length: f64,
    /// Full pixel run from node `a` to node `b`, endpoints included.
    pub polyline: Vec<(usize, usize)>,
}

/// Node/edge graph over skeleton pixels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NavGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub cell_size: f64,
}

impl NavGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn degree(&self, node: usize) -> usize {
        self.edges
            .iter()
            .map(|e| (e.a == node) as usize + (e.b == node) as usize)
            .sum()
    }

    /// Adjacency list: for each node, `(edge index, other node)`.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for (i, e) in self.edges.iter().enumerate() {
            adj[e.a].push((i, e.b));
            adj[e.b].push((i, e.a));
        }
        adj
    }

    fn euclid(&self, a: usize, b: usize) -> f64 {
        let na = &self.nodes[a];
        let nb = &self.nodes[b];
        let dx = na.x as f64 - nb.x as f64;
        let dy = na.y as f64 - nb.y as f64;
        (dx * dx + dy * dy).sqrt() * self.cell_size
    }
}

const RING8: [(i64, i64); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
];

#[inline]
fn four_adjacent(a: (usize, usize), b: (usize, usize)) -> bool {
    let dx = (a.0 as i64 - b.0 as i64).abs();
    let dy = (a.1 as i64 - b.1 as i64).abs();
    dx + dy == 1
}

/// A skeleton pixel is a node when its skeleton-neighbour count is >= 3
/// (junction), exactly 1 (endpoint) or 0 (degenerate endpoint). Degree-2
/// pixels are chain interior, never nodes.
pub fn detect_nodes(skel: &BinaryImage) -> Vec<Node> {
    let mut out = Vec::new();
    for y in 0..skel.height() {
        for x in 0..skel.width() {
            if !skel.get(x as i64, y as i64) {
                continue;
            }
            match skel.neighbor_count(x, y) {
                n if n >= 3 => out.push(Node {
                    x,
                    y,
                    role: NodeRole::Junction,
                }),
                1 | 0 => out.push(Node {
                    x,
                    y,
                    role: NodeRole::Endpoint,
                }),
                _ => {}
            }
        }
    }
    out
}

struct Chainer<'a> {
    skel: &'a BinaryImage,
    node_at: Grid<i32>,
    cancelled: Grid<bool>,
    nodes: Vec<Node>,
    chains: Vec<Chain>,
    direct: HashSet<((usize, usize), (usize, usize))>,
}

impl<'a> Chainer<'a> {
    fn new(skel: &'a BinaryImage, nodes: &[Node]) -> Self {
        let mut node_at = Grid::new(skel.width(), skel.height(), -1i32);
        for (i, n) in nodes.iter().enumerate() {
            node_at.set(n.x, n.y, i as i32);
        }
        Self {
            skel,
            node_at,
            cancelled: Grid::new(skel.width(), skel.height(), false),
            nodes: nodes.to_vec(),
            chains: Vec::new(),
            direct: HashSet::new(),
        }
    }

    fn node_id_at(&self, p: (usize, usize)) -> Option<usize> {
        let v = *self.node_at.get(p.0, p.1);
        (v >= 0).then_some(v as usize)
    }

    fn skeleton_neighbors(&self, p: (usize, usize)) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (dx, dy) in RING8 {
            let nx = p.0 as i64 + dx;
            let ny = p.1 as i64 + dy;
            if self.skel.get(nx, ny) {
                out.push((nx as usize, ny as usize));
            }
        }
        out
    }

    /// Record a direct node-to-node adjacency once per unordered pair.
    fn direct_edge(&mut self, a: usize, b: usize) {
        let pa = self.nodes[a].pos();
        let pb = self.nodes[b].pos();
        let key = if pa <= pb { (pa, pb) } else { (pb, pa) };
        if self.direct.insert(key) {
            self.chains.push(Chain {
                start: a,
                end: b,
                pixels: Vec::new(),
            });
        }
    }

    fn synthesize_node(&mut self, p: (usize, usize)) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node {
            x: p.0,
            y: p.1,
            role: NodeRole::Endpoint,
        });
        self.node_at.set(p.0, p.1, id as i32);
        id
    }

    /// Pick the next pixel from `cur`, given the previously consumed pixel.
    /// Preference: non-node 4-neighbour, node 4-neighbour, non-node
    /// diagonal, node diagonal. A candidate 4-adjacent to `prev` is never
    /// taken (the second chaining fix), and the walk never returns to
    /// `prev` itself.
    fn next_pixel(&self, cur: (usize, usize), prev: (usize, usize)) -> Option<(usize, usize)> {
        let mut tiers: [Option<(usize, usize)>; 4] = [None; 4];
        for n in self.skeleton_neighbors(cur) {
            if n == prev || four_adjacent(n, prev) {
                continue;
            }
            let is_node = self.node_id_at(n).is_some();
            if !is_node && *self.cancelled.get(n.0, n.1) {
                continue;
            }
            let tier = match (four_adjacent(n, cur), is_node) {
                (true, false) => 0,
                (true, true) => 1,
                (false, false) => 2,
                (false, true) => 3,
            };
            if tiers[tier].is_none() {
                tiers[tier] = Some(n);
            }
        }
        tiers.iter().flatten().next().copied()
    }

    /// Walk one chain out of `start_node` through the non-node pixel `q0`.
    fn walk(&mut self, start_node: usize, q0: (usize, usize)) {
        let mut pixels = vec![q0];
        self.cancelled.set(q0.0, q0.1, true);
        let mut prev = self.nodes[start_node].pos();
        let mut cur = q0;
        loop {
            match self.next_pixel(cur, prev) {
                Some(next) => {
                    if let Some(end) = self.node_id_at(next) {
                        self.chains.push(Chain {
                            start: start_node,
                            end,
                            pixels,
                        });
                        return;
                    }
                    self.cancelled.set(next.0, next.1, true);
                    pixels.push(next);
                    prev = cur;
                    cur = next;
                }
                None => {
                    // branch died without a node: synthesize one there
                    let last = pixels.pop().expect("walk consumed at least one pixel");
                    self.cancelled.set(last.0, last.1, false);
                    let end = self.synthesize_node(last);
                    self.chains.push(Chain {
                        start: start_node,
                        end,
                        pixels,
                    });
                    return;
                }
            }
        }
    }

    fn chain_from_node(&mut self, node: usize) {
        let origin = self.nodes[node].pos();
        for n in self.skeleton_neighbors(origin) {
            if let Some(other) = self.node_id_at(n) {
                self.direct_edge(node, other);
            } else if !*self.cancelled.get(n.0, n.1) {
                // a cancelled start candidate is skipped (the first fix)
                self.walk(node, n);
            }
        }
    }

    fn run(mut self) -> (Vec<Chain>, Vec<Node>) {
        for id in 0..self.nodes.len() {
            self.chain_from_node(id);
        }
        // skeleton cycles have no nodes at all; seed one per leftover
        // component and chain it like any other node
        loop {
            let mut leftover = None;
            'scan: for y in 0..self.skel.height() {
                for x in 0..self.skel.width() {
                    if self.skel.get(x as i64, y as i64)
                        && !*self.cancelled.get(x, y)
                        && self.node_id_at((x, y)).is_none()
                    {
                        leftover = Some((x, y));
                        break 'scan;
                    }
                }
            }
            match leftover {
                Some(p) => {
                    let id = self.synthesize_node(p);
                    self.chain_from_node(id);
                }
                None => break,
            }
        }
        (self.chains, self.nodes)
    }
}

/// Chain every non-node skeleton pixel into exactly one chain and build
/// the draft graph: one edge per chain.
pub fn chain(skel: &BinaryImage, nodes: &[Node], cell_size: f64) -> (Vec<Chain>, NavGraph) {
    let (chains, all_nodes) = Chainer::new(skel, nodes).run();
    let mut graph = NavGraph {
        nodes: all_nodes,
        edges: Vec::new(),
        cell_size,
    };
    for c in &chains {
        let mut polyline = Vec::with_capacity(c.pixels.len() + 2);
        polyline.push(graph.nodes[c.start].pos());
        polyline.extend_from_slice(&c.pixels);
        polyline.push(graph.nodes[c.end].pos());
        let length = graph.euclid(c.start, c.end);
        graph.edges.push(Edge {
            a: c.start,
            b: c.end,
            length,
            polyline,
        });
    }
    (chains, graph)
}

/// Deviation of each interior pixel from the straight segment between the
/// edge ends; returns `(max deviation, index into the polyline)` with ties
/// going to the first pixel along the chain.
fn max_deviation(polyline: &[(usize, usize)]) -> Option<(f64, usize)> {
    if polyline.len() < 3 {
        return None;
    }
    let a = polyline[0];
    let b = polyline[polyline.len() - 1];
    let af = (a.0 as f64, a.1 as f64);
    let bf = (b.0 as f64, b.1 as f64);
    let mut best: Option<(f64, usize)> = None;
    for (i, p) in polyline.iter().enumerate().skip(1).take(polyline.len() - 2) {
        let d = point_segment_distance((p.0 as f64, p.1 as f64), af, bf);
        if best.map_or(true, |(bd, _)| d > bd) {
            best = Some((d, i));
        }
    }
    best
}

/// First interior pixel whose deviation exceeds the limit, scanning along
/// the chain (the literal pseudocode reading).
fn first_exceeding(polyline: &[(usize, usize)], limit: f64) -> Option<usize> {
    if polyline.len() < 3 {
        return None;
    }
    let a = polyline[0];
    let b = polyline[polyline.len() - 1];
    let af = (a.0 as f64, a.1 as f64);
    let bf = (b.0 as f64, b.1 as f64);
    (1..polyline.len() - 1).find(|&i| {
        let p = polyline[i];
        point_segment_distance((p.0 as f64, p.1 as f64), af, bf) > limit
    })
}

/// Recursively split every edge whose chain deviates more than `limit`
/// pixels from the straight segment, inserting a split node at the
/// maximum-deviation pixel. Self-loop edges are split unconditionally so
/// no zero-length loop survives.
pub fn split_edges(graph: &NavGraph, limit: f64, first_exceed: bool) -> NavGraph {
    let mut out = NavGraph {
        nodes: graph.nodes.clone(),
        edges: Vec::new(),
        cell_size: graph.cell_size,
    };
    let mut work: Vec<(usize, usize, Vec<(usize, usize)>)> = graph
        .edges
        .iter()
        .map(|e| (e.a, e.b, e.polyline.clone()))
        .collect();
    // preserve draft order: process as a queue
    work.reverse();

    while let Some((a, b, polyline)) = work.pop() {
        let split_at = if a == b {
            // a cycle chained back to its own start: split at the pixel
            // farthest from the node
            let pa = (out.nodes[a].x as f64, out.nodes[a].y as f64);
            polyline
                .iter()
                .enumerate()
                .skip(1)
                .take(polyline.len().saturating_sub(2))
                .map(|(i, p)| {
                    let dx = p.0 as f64 - pa.0;
                    let dy = p.1 as f64 - pa.1;
                    (dx * dx + dy * dy, i)
                })
                .fold(None, |best: Option<(f64, usize)>, (d, i)| match best {
                    Some((bd, bi)) if bd >= d => Some((bd, bi)),
                    _ => Some((d, i)),
                })
                .map(|(_, i)| i)
        } else if first_exceed {
            first_exceeding(&polyline, limit)
        } else {
            match max_deviation(&polyline) {
                Some((d, i)) if d > limit => Some(i),
                _ => None,
            }
        };

        match split_at {
            Some(i) => {
                let p = polyline[i];
                let id = out.nodes.len();
                out.nodes.push(Node {
                    x: p.0,
                    y: p.1,
                    role: NodeRole::Split,
                });
                let left: Vec<_> = polyline[..=i].to_vec();
                let right: Vec<_> = polyline[i..].to_vec();
                work.push((id, b, right));
                work.push((a, id, left));
            }
            None => {
                if a == b && polyline.len() < 3 {
                    continue; // degenerate loop, nothing to keep
                }
                let length = out.euclid(a, b);
                out.edges.push(Edge {
                    a,
                    b,
                    length,
                    polyline,
                });
            }
        }
    }
    out
}

/// Running sum of signed triangle areas between an edge and its chain
/// (the alternative split criterion, kept for comparison). Pixel units.
pub fn wall_danielsson_area(polyline: &[(f64, f64)]) -> f64 {
    if polyline.len() < 2 {
        return 0.0;
    }
    let s = polyline[0];
    let mut sum = 0.0;
    for w in polyline.windows(2) {
        let (ax, ay) = (w[0].0 - s.0, w[0].1 - s.1);
        let (bx, by) = (w[1].0 - s.0, w[1].1 - s.1);
        sum += 0.5 * (ax * by - ay * bx);
    }
    sum
}

/// Chebyshev distance from every cell to the nearest UNKNOWN or OCCUPIED
/// cell.
fn chebyshev_hazard(classmap: &CellClassMap) -> Grid<f64> {
    // chamfer with diagonal weight 1 is exactly the chessboard metric
    let w = classmap.width();
    let h = classmap.height();
    let mut d = Grid::new(w, h, f64::INFINITY);
    let mut queue = std::collections::VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            if classmap.class(x, y) != CellClass::Free {
                d.set(x, y, 0.0);
                queue.push_back((x, y));
            }
        }
    }
    while let Some((x, y)) = queue.pop_front() {
        let base = *d.get(x, y);
        for (dx, dy) in RING8 {
            let nx = x as i64 + dx;
            let ny = y as i64 + dy;
            if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                continue;
            }
            let (nx, ny) = (nx as usize, ny as usize);
            if *d.get(nx, ny) > base + 1.0 {
                d.set(nx, ny, base + 1.0);
                queue.push_back((nx, ny));
            }
        }
    }
    d
}

/// Retract or remove leaf nodes that sit within `margin` cells (Chebyshev)
/// of UNKNOWN or OCCUPIED space. Junction nodes are never removed.
pub fn prune(graph: &NavGraph, classmap: &CellClassMap, margin: u32) -> NavGraph {
    let hazard = chebyshev_hazard(classmap);
    let clear = |p: (usize, usize)| *hazard.get(p.0, p.1) > margin as f64;

    let mut g = graph.clone();
    loop {
        let mut changed = false;
        let degrees: Vec<usize> = (0..g.nodes.len()).map(|i| g.degree(i)).collect();

        // isolated non-junction nodes with bad clearance simply go away
        let mut remove_nodes: Vec<usize> = Vec::new();
        for (i, n) in g.nodes.iter().enumerate() {
            if degrees[i] == 0 && n.role != NodeRole::Junction && !clear(n.pos()) {
                remove_nodes.push(i);
            }
        }

        let mut remove_edges: Vec<usize> = Vec::new();
        for i in 0..g.nodes.len() {
            if degrees[i] != 1 || g.nodes[i].role == NodeRole::Junction || clear(g.nodes[i].pos())
            {
                continue;
            }
            let (ei, edge) = g
                .edges
                .iter()
                .enumerate()
                .find(|(_, e)| e.a == i || e.b == i)
                .expect("degree-1 node has an edge");
            // orient the polyline to start at the leaf
            let mut poly = edge.polyline.clone();
            if edge.b == i {
                poly.reverse();
            }
            // retract along the chain to the first clear pixel
            match poly.iter().position(|p| clear(*p)) {
                Some(k) if k + 1 < poly.len() => {
                    let p = poly[k];
                    let far = if edge.a == i { edge.b } else { edge.a };
                    let mut new_poly = poly[k..].to_vec();
                    if edge.b == i {
                        new_poly.reverse();
                    }
                    let e = &mut g.edges[ei];
                    e.polyline = new_poly;
                    if e.a == i {
                        // leaf stays node `i` but moves to pixel `p`
                    }
                    g.nodes[i].x = p.0;
                    g.nodes[i].y = p.1;
                    let length = g.euclid(i, far);
                    g.edges[ei].length = length;
                    changed = true;
                }
                _ => {
                    // whole edge sits inside the margin: drop it and the leaf
                    remove_edges.push(ei);
                    remove_nodes.push(i);
                    changed = true;
                }
            }
        }

        if !changed && remove_nodes.is_empty() {
            break;
        }

        remove_edges.sort_unstable();
        remove_edges.dedup();
        for ei in remove_edges.into_iter().rev() {
            let _ = g.edges.remove(ei);
        }
        if !remove_nodes.is_empty() {
            remove_nodes.sort_unstable();
            remove_nodes.dedup();
            let mut remap = vec![usize::MAX; g.nodes.len()];
            let mut kept = Vec::with_capacity(g.nodes.len());
            for (i, n) in g.nodes.iter().enumerate() {
                if remove_nodes.binary_search(&i).is_err() {
                    remap[i] = kept.len();
                    kept.push(*n);
                }
            }
            g.nodes = kept;
            g.edges.retain(|e| {
                remap[e.a] != usize::MAX && remap[e.b] != usize::MAX
            });
            for e in &mut g.edges {
                e.a = remap[e.a];
                e.b = remap[e.b];
            }
        }
        if !changed {
            break;
        }
    }
    g
}

/// Products of the full classmap-to-graph pipeline.
#[derive(Debug, Clone)]
pub struct GraphBuild {
    pub eroded: BinaryImage,
    pub skeleton: BinaryImage,
    pub graph: NavGraph,
}

/// binarize -> thin -> detect nodes -> chain -> split -> prune.
pub fn build_graph(classmap: &CellClassMap, params: &Params) -> GraphBuild {
    let eroded = binarize(classmap, params);
    let skeleton = thin(&eroded, params);
    let nodes = detect_nodes(&skeleton);
    let (_, draft) = chain(&skeleton, &nodes, classmap.cell_size());
    let split = split_edges(&draft, params.split_limit, params.split_first_exceed);
    let graph = prune(&split, classmap, params.prune_margin(classmap.cell_size()));
    GraphBuild {
        eroded,
        skeleton,
        graph,
    }
}
