//! Bit-level hypercube primitives: vertices, Hamming geometry, the signed
//! permutation group, feasible maps and canonical forms.
//!
//! Vertices of `Q_n` are bitmasks over the coordinates `0..n`. Edges are
//! stored positionally as (coordinate, squeezed base endpoint) so membership
//! tests are O(1) and whole edge sets fit in three machine words up to the
//! dimension cap.

use std::collections::HashSet;
use std::fmt;

use crate::{Error, Result};

/// A vertex of `Q_n`: one bit per coordinate. Only the low `n` bits may be set.
pub type VertexMask = u16;

/// A set of coordinates, one bit per coordinate.
pub type CoordMask = u16;

/// Dimension cap enforced at construction. All paper computations need
/// `n <= 4`; the cap keeps vertex sets in a `u64` and edge sets in 192 bits.
pub const MAX_DIM: usize = 6;

/// Hamming distance: the number of coordinates in which `u` and `v` differ.
pub fn hamming(u: VertexMask, v: VertexMask) -> u32 {
    (u ^ v).count_ones()
}

/// The set `D(U)` of coordinates on which some pair of vertices in `U`
/// differs, as a coordinate bitmask. Rejects an empty `U`.
pub fn coordinate_spread(vertices: &[VertexMask]) -> Result<CoordMask> {
    let &first = vertices.first().ok_or(Error::EmptyVertexSet)?;
    Ok(vertices.iter().fold(0, |acc, &v| acc | (v ^ first)))
}

/// The vertex set `Q(U)` of the unique `d(U)`-cube containing `U`:
/// every vertex agreeing with `U` outside `D(U)`, in ascending mask order.
pub fn spanned_subcube(vertices: &[VertexMask]) -> Result<Vec<VertexMask>> {
    let spread = coordinate_spread(vertices)?;
    let base = vertices[0] & !spread;
    Ok(submasks(spread).map(|s| base | s).collect())
}

/// Iterates all submasks of `mask` in ascending numeric order.
pub fn submasks(mask: u16) -> impl Iterator<Item = u16> {
    let mut next = Some(0u16);
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == mask {
            None
        } else {
            // Standard submask increment: fill low garbage bits, then mask.
            Some(((cur | !mask).wrapping_add(1)) & mask)
        };
        Some(cur)
    })
}

fn check_dim(dim: usize) -> Result<()> {
    if dim > MAX_DIM {
        return Err(Error::DimensionCap(dim));
    }
    Ok(())
}

fn check_mask(dim: usize, v: VertexMask) -> Result<()> {
    if usize::from(v).checked_shr(dim as u32).unwrap_or(0) != 0 {
        return Err(Error::InvalidGraph(format!(
            "vertex mask {v:#b} out of range for dimension {dim}"
        )));
    }
    Ok(())
}

/// Positional edge set of `Q_n`, `n <= MAX_DIM`. Edge `(u, u ^ 1<<c)` is
/// indexed by `c * 2^(n-1) + squeeze(u, c)` where `squeeze` drops bit `c`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct EdgeSet {
    words: [u64; 3],
}

impl EdgeSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, idx: usize) {
        self.words[idx / 64] |= 1 << (idx % 64);
    }

    pub fn remove(&mut self, idx: usize) {
        self.words[idx / 64] &= !(1 << (idx % 64));
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.words[idx / 64] >> (idx % 64) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words == [0; 3]
    }

    pub fn is_subset_of(&self, other: &EdgeSet) -> bool {
        self.words
            .iter()
            .zip(other.words.iter())
            .all(|(a, b)| a & !b == 0)
    }

    pub fn union(&self, other: &EdgeSet) -> EdgeSet {
        let mut words = self.words;
        for (w, o) in words.iter_mut().zip(other.words.iter()) {
            *w |= o;
        }
        EdgeSet { words }
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..3).flat_map(move |w| {
            let mut word = self.words[w];
            std::iter::from_fn(move || {
                if word == 0 {
                    return None;
                }
                let bit = word.trailing_zeros() as usize;
                word &= word - 1;
                Some(w * 64 + bit)
            })
        })
    }

    /// Low 64 bits; enough for any graph of dimension <= 5.
    pub fn low_word(&self) -> u64 {
        self.words[0]
    }
}

impl fmt::Debug for EdgeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.iter()).finish()
    }
}

/// Number of edges of the full `Q_n`.
pub fn cube_edge_count(dim: usize) -> usize {
    if dim == 0 {
        0
    } else {
        dim << (dim - 1)
    }
}

/// Removes bit `c` from `mask`, shifting higher bits down.
fn squeeze(mask: VertexMask, c: usize) -> u16 {
    let low = mask & ((1 << c) - 1);
    let high = (mask >> (c + 1)) << c;
    low | high
}

/// Inverse of `squeeze`: re-inserts a zero bit at position `c`.
fn unsqueeze(mask: u16, c: usize) -> VertexMask {
    let low = mask & ((1 << c) - 1);
    let high = (mask >> c) << (c + 1);
    low | high
}

/// Edge index of `(u, v)` in `Q_dim`; requires `hamming(u, v) == 1`.
pub fn edge_index(dim: usize, u: VertexMask, v: VertexMask) -> usize {
    debug_assert_eq!(hamming(u, v), 1);
    let c = (u ^ v).trailing_zeros() as usize;
    let base = u & !(1 << c);
    c * (1 << (dim - 1)) + squeeze(base, c) as usize
}

/// Endpoints `(u, v)` with `u < v` of the edge with the given index.
pub fn edge_endpoints(dim: usize, idx: usize) -> (VertexMask, VertexMask) {
    let per_coord = 1 << (dim - 1);
    let c = idx / per_coord;
    let base = unsqueeze((idx % per_coord) as u16, c);
    (base, base | (1 << c))
}

/// A subgraph of `Q_n`: dimension, vertex bitset over `{0,1}^n`, edge set.
/// Every edge joins two present vertices at Hamming distance one.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct CubeGraph {
    dim: usize,
    vertices: u64,
    edges: EdgeSet,
}

impl CubeGraph {
    /// Graph with an explicit vertex set and edge list.
    pub fn new(dim: usize, vertices: &[VertexMask], edges: &[(VertexMask, VertexMask)]) -> Result<Self> {
        check_dim(dim)?;
        let mut vbits = 0u64;
        for &v in vertices {
            check_mask(dim, v)?;
            vbits |= 1 << v;
        }
        let mut g = CubeGraph {
            dim,
            vertices: vbits,
            edges: EdgeSet::empty(),
        };
        for &(u, v) in edges {
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    /// Spanning subgraph of `Q_dim` (all `2^dim` vertices) with given edges.
    pub fn spanning(dim: usize, edges: &[(VertexMask, VertexMask)]) -> Result<Self> {
        check_dim(dim)?;
        let all = if dim == 6 { u64::MAX } else { (1u64 << (1 << dim)) - 1 };
        let mut g = CubeGraph {
            dim,
            vertices: all,
            edges: EdgeSet::empty(),
        };
        for &(u, v) in edges {
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    pub fn empty_spanning(dim: usize) -> Result<Self> {
        Self::spanning(dim, &[])
    }

    /// The full hypercube `Q_dim`.
    pub fn hypercube(dim: usize) -> Result<Self> {
        let mut g = Self::empty_spanning(dim)?;
        for idx in 0..cube_edge_count(dim) {
            g.edges.insert(idx);
        }
        Ok(g)
    }

    pub(crate) fn from_parts(dim: usize, vertices: u64, edges: EdgeSet) -> Self {
        CubeGraph { dim, vertices, edges }
    }

    /// Spanning graph over a positional edge set; the edge set must index
    /// into `Q_dim` (enumeration fast path, no per-edge validation).
    pub fn spanning_from_edge_set(dim: usize, edges: EdgeSet) -> CubeGraph {
        debug_assert!(dim <= MAX_DIM);
        let all = if dim == 6 { u64::MAX } else { (1u64 << (1 << dim)) - 1 };
        CubeGraph {
            dim,
            vertices: all,
            edges,
        }
    }

    fn add_edge(&mut self, u: VertexMask, v: VertexMask) -> Result<()> {
        check_mask(self.dim, u)?;
        check_mask(self.dim, v)?;
        if hamming(u, v) != 1 {
            return Err(Error::InvalidGraph(format!(
                "edge {u}-{v} does not join vertices at Hamming distance one"
            )));
        }
        if !self.has_vertex(u) || !self.has_vertex(v) {
            return Err(Error::InvalidGraph(format!(
                "edge {u}-{v} has an endpoint outside the vertex set"
            )));
        }
        self.edges.insert(edge_index(self.dim, u, v));
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_vertex(&self, v: VertexMask) -> bool {
        self.vertices >> v & 1 == 1
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.count_ones() as usize
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexMask> + '_ {
        (0..1u32 << self.dim).map(|v| v as VertexMask).filter(|&v| self.has_vertex(v))
    }

    pub fn vertex_bits(&self) -> u64 {
        self.vertices
    }

    pub fn is_spanning(&self) -> bool {
        self.vertex_count() == 1 << self.dim
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge_set(&self) -> &EdgeSet {
        &self.edges
    }

    pub fn has_edge(&self, u: VertexMask, v: VertexMask) -> bool {
        hamming(u, v) == 1 && self.edges.contains(edge_index(self.dim, u, v))
    }

    /// Edge list as `(u, v)` pairs with `u < v`, ascending by `(u, v)`.
    pub fn edges(&self) -> Vec<(VertexMask, VertexMask)> {
        let mut out: Vec<_> = self
            .edges
            .iter()
            .map(|idx| edge_endpoints(self.dim, idx))
            .collect();
        out.sort_unstable();
        out
    }

    pub fn degree(&self, v: VertexMask) -> usize {
        (0..self.dim)
            .filter(|&c| {
                let w = v ^ (1 << c);
                self.has_vertex(w) && self.edges.contains(edge_index(self.dim, v, w))
            })
            .count()
    }

    /// Copy with the edge of the given positional index added.
    pub fn with_edge_index(&self, idx: usize) -> CubeGraph {
        let mut g = self.clone();
        g.edges.insert(idx);
        g
    }
}

/// A cube automorphism: coordinate permutation followed by coordinate
/// complementation. `v` maps to `permute_bits(v, perm) ^ flip`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct CubeAutomorphism {
    dim: usize,
    /// `perm[i]` is the image position of coordinate `i`.
    perm: [u8; MAX_DIM],
    flip: VertexMask,
}

impl CubeAutomorphism {
    pub fn new(dim: usize, perm: &[usize], flip: VertexMask) -> Result<Self> {
        check_dim(dim)?;
        if perm.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "permutation length {} != dimension {dim}",
                perm.len()
            )));
        }
        let mut seen = [false; MAX_DIM];
        let mut p = [0u8; MAX_DIM];
        for (i, &pi) in perm.iter().enumerate() {
            if pi >= dim || seen[pi] {
                return Err(Error::InvalidGraph("not a permutation".into()));
            }
            seen[pi] = true;
            p[i] = pi as u8;
        }
        check_mask(dim, flip)?;
        Ok(CubeAutomorphism { dim, perm: p, flip })
    }

    pub fn identity(dim: usize) -> Self {
        let mut perm = [0u8; MAX_DIM];
        for (i, p) in perm.iter_mut().enumerate() {
            *p = i as u8;
        }
        CubeAutomorphism { dim, perm, flip: 0 }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply_vertex(&self, v: VertexMask) -> VertexMask {
        let mut w = 0;
        for i in 0..self.dim {
            if v >> i & 1 == 1 {
                w |= 1 << self.perm[i];
            }
        }
        w ^ self.flip
    }

    /// Group product: `self` applied after `other`.
    pub fn compose(&self, other: &CubeAutomorphism) -> CubeAutomorphism {
        debug_assert_eq!(self.dim, other.dim);
        let mut perm = [0u8; MAX_DIM];
        for i in 0..self.dim {
            perm[i] = self.perm[other.perm[i] as usize];
        }
        let mut flipped = 0;
        for i in 0..self.dim {
            if other.flip >> i & 1 == 1 {
                flipped |= 1 << self.perm[i];
            }
        }
        CubeAutomorphism {
            dim: self.dim,
            perm,
            flip: flipped ^ self.flip,
        }
    }

    pub fn inverse(&self) -> CubeAutomorphism {
        let mut perm = [0u8; MAX_DIM];
        let mut flip = 0;
        for i in 0..self.dim {
            perm[self.perm[i] as usize] = i as u8;
            if self.flip >> self.perm[i] & 1 == 1 {
                flip |= 1 << i;
            }
        }
        CubeAutomorphism {
            dim: self.dim,
            perm,
            flip,
        }
    }

    /// Vertex image table over all of `{0,1}^dim`.
    pub fn vertex_table(&self) -> Vec<VertexMask> {
        (0..1u32 << self.dim)
            .map(|v| self.apply_vertex(v as VertexMask))
            .collect()
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    let mut used = vec![false; n];
    fn rec(n: usize, cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for i in 0..n {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(n, cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    rec(n, &mut cur, &mut used, &mut out);
    out
}

/// All `n! * 2^n` cube automorphisms of `Q_n`, in a fixed order:
/// permutations lexicographic, flips ascending within each permutation.
pub fn automorphisms(n: usize) -> Result<Vec<CubeAutomorphism>> {
    check_dim(n)?;
    let mut out = Vec::with_capacity(factorial(n) << n);
    for perm in permutations(n) {
        for flip in 0..1u32 << n {
            out.push(CubeAutomorphism::new(n, &perm, flip as VertexMask)?);
        }
    }
    Ok(out)
}

fn factorial(n: usize) -> usize {
    (1..=n).product::<usize>().max(1)
}

/// Image of `g` applied to every vertex and edge of `g`'s cube.
pub fn apply_automorphism(g: &CubeAutomorphism, graph: &CubeGraph) -> Result<CubeGraph> {
    if g.dim() != graph.dim() {
        return Err(Error::DimensionMismatch(format!(
            "automorphism dimension {} != graph dimension {}",
            g.dim(),
            graph.dim()
        )));
    }
    let table = g.vertex_table();
    Ok(transform(graph, &table))
}

fn transform(graph: &CubeGraph, table: &[VertexMask]) -> CubeGraph {
    let mut vertices = 0u64;
    for v in graph.vertices() {
        vertices |= 1 << table[v as usize];
    }
    let mut edges = EdgeSet::empty();
    for idx in graph.edge_set().iter() {
        let (u, v) = edge_endpoints(graph.dim(), idx);
        edges.insert(edge_index(graph.dim(), table[u as usize], table[v as usize]));
    }
    CubeGraph::from_parts(graph.dim(), vertices, edges)
}

/// Total-order-comparable encoding of a (possibly labeled) cube graph.
/// Equal keys if and only if the graphs are feasibly isomorphic, with the
/// isomorphism required to respect label positions when labels are present.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct CanonicalKey {
    dim: u8,
    vertices: u64,
    edges: EdgeSet,
    labels: Vec<VertexMask>,
}

impl CanonicalKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(34 + 2 * self.labels.len());
        out.push(self.dim);
        out.push(self.labels.len() as u8);
        out.extend_from_slice(&self.vertices.to_be_bytes());
        for w in [self.edges.words[0], self.edges.words[1], self.edges.words[2]] {
            out.extend_from_slice(&w.to_be_bytes());
        }
        for l in &self.labels {
            out.extend_from_slice(&l.to_be_bytes());
        }
        out
    }

    pub fn hex(&self) -> String {
        self.to_bytes().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Reconstructs the canonical representative graph encoded by this key.
    pub fn to_graph(&self) -> (CubeGraph, Vec<VertexMask>) {
        let g = CubeGraph::from_parts(self.dim as usize, self.vertices, self.edges);
        (g, self.labels.clone())
    }
}

impl fmt::Display for CanonicalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.hex())
    }
}

/// Precomputed vertex tables for the full automorphism group of `Q_dim`,
/// shared across many canonical-form computations.
pub struct AutTables {
    dim: usize,
    tables: Vec<Vec<VertexMask>>,
}

impl AutTables {
    pub fn new(dim: usize) -> Result<Self> {
        let tables = automorphisms(dim)?
            .iter()
            .map(|g| g.vertex_table())
            .collect();
        Ok(AutTables { dim, tables })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    pub fn tables(&self) -> &[Vec<VertexMask>] {
        &self.tables
    }
}

fn key_under(graph: &CubeGraph, labels: &[VertexMask], table: &[VertexMask]) -> CanonicalKey {
    let image = transform(graph, table);
    CanonicalKey {
        dim: graph.dim() as u8,
        vertices: image.vertices,
        edges: image.edges,
        labels: labels.iter().map(|&l| table[l as usize]).collect(),
    }
}

/// Canonical form relative to a shared automorphism table set.
pub fn canonical_form_with(
    tables: &AutTables,
    graph: &CubeGraph,
    labels: Option<&[VertexMask]>,
) -> Result<CanonicalKey> {
    if tables.dim() != graph.dim() {
        return Err(Error::DimensionMismatch(format!(
            "table dimension {} != graph dimension {}",
            tables.dim(),
            graph.dim()
        )));
    }
    let labels = labels.unwrap_or(&[]);
    let mut seen: HashSet<VertexMask> = HashSet::new();
    for &l in labels {
        if !graph.has_vertex(l) || !seen.insert(l) {
            return Err(Error::InvalidLabels(format!(
                "label {l} absent from the vertex set or repeated"
            )));
        }
    }
    tables
        .tables()
        .iter()
        .map(|t| key_under(graph, labels, t))
        .min()
        .ok_or_else(|| Error::InvalidGraph("empty automorphism group".into()))
}

/// Lexicographic minimum encoding over the whole automorphism group; labels,
/// when present, are carried through each automorphism and compared
/// positionally, so equal keys mean label-respecting feasible isomorphism.
pub fn canonical_form(graph: &CubeGraph, labels: Option<&[VertexMask]>) -> Result<CanonicalKey> {
    let tables = AutTables::new(graph.dim())?;
    canonical_form_with(&tables, graph, labels)
}

/// An injective Hamming-distance preserving placement, determined by a
/// coordinate injection and one anchor image pair.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct FeasibleMap {
    /// `(source coordinate, target coordinate)` pairs covering `D(V)`.
    pub coord_map: Vec<(u8, u8)>,
    pub anchor_src: VertexMask,
    pub anchor_dst: VertexMask,
}

impl FeasibleMap {
    pub fn apply(&self, v: VertexMask) -> VertexMask {
        let diff = v ^ self.anchor_src;
        let mut out = self.anchor_dst;
        for &(s, t) in &self.coord_map {
            if diff >> s & 1 == 1 {
                out ^= 1 << t;
            }
        }
        out
    }
}

fn coords_of(mask: CoordMask) -> Vec<usize> {
    (0..16).filter(|&c| mask >> c & 1 == 1).collect()
}

fn injections(domain: usize, targets: &[usize]) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    let mut used = vec![false; targets.len()];
    fn rec(
        domain: usize,
        targets: &[usize],
        cur: &mut Vec<usize>,
        used: &mut [bool],
        out: &mut Vec<Vec<usize>>,
    ) {
        if cur.len() == domain {
            out.push(cur.clone());
            return;
        }
        for (i, &t) in targets.iter().enumerate() {
            if !used[i] {
                used[i] = true;
                cur.push(t);
                rec(domain, targets, cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    rec(domain, targets, &mut cur, &mut used, &mut out);
    out
}

/// Streams every feasible map of `V(shape)` into `{0,1}^target_dim`
/// extending the pins, each distinct vertex map exactly once, in a fixed
/// order (anchor ascending, coordinate injections lexicographic).
pub fn feasible_maps(
    shape: &CubeGraph,
    pinned: &[(VertexMask, VertexMask)],
    target_dim: usize,
) -> Result<Vec<FeasibleMap>> {
    check_dim(target_dim)?;
    let verts: Vec<VertexMask> = shape.vertices().collect();
    if verts.is_empty() {
        return Err(Error::EmptyVertexSet);
    }
    for &(s, t) in pinned {
        if !shape.has_vertex(s) {
            return Err(Error::InconsistentPins(format!("pinned source {s} not in shape")));
        }
        check_mask(target_dim, t).map_err(|_ignored| {
            Error::InconsistentPins(format!("pinned target {t} out of range"))
        })?;
    }
    for (a, &(s1, t1)) in pinned.iter().enumerate() {
        for &(s2, t2) in &pinned[a + 1..] {
            if hamming(s1, s2) != hamming(t1, t2) {
                return Err(Error::InconsistentPins(format!(
                    "d({s1},{s2}) != d({t1},{t2})"
                )));
            }
        }
    }

    let spread = coordinate_spread(&verts)?;
    let src_coords = coords_of(spread);
    if src_coords.len() > target_dim {
        return Ok(Vec::new());
    }
    let (anchor_src, anchor_dsts): (VertexMask, Vec<VertexMask>) = match pinned.first() {
        Some(&(s, t)) => (s, vec![t]),
        None => (verts[0], (0..1u32 << target_dim).map(|m| m as VertexMask).collect()),
    };

    let target_coords: Vec<usize> = (0..target_dim).collect();
    let phis = injections(src_coords.len(), &target_coords);

    let mut seen: HashSet<Vec<VertexMask>> = HashSet::new();
    let mut out = Vec::new();
    for &anchor_dst in &anchor_dsts {
        for phi in &phis {
            let map = FeasibleMap {
                coord_map: src_coords
                    .iter()
                    .zip(phi.iter())
                    .map(|(&s, &t)| (s as u8, t as u8))
                    .collect(),
                anchor_src,
                anchor_dst,
            };
            if !pinned.iter().all(|&(s, t)| map.apply(s) == t) {
                continue;
            }
            let image: Vec<VertexMask> = verts.iter().map(|&v| map.apply(v)).collect();
            if seen.insert(image) {
                out.push(map);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hamming_basics() {
        assert_eq!(hamming(0b000, 0b000), 0);
        assert_eq!(hamming(0b001, 0b011), 1);
        assert_eq!(hamming(0b101, 0b010), 3);
    }

    #[test]
    fn spread_and_subcube() {
        assert_eq!(coordinate_spread(&[0b00]).unwrap(), 0);
        assert_eq!(coordinate_spread(&[0b00, 0b01]).unwrap(), 0b01);
        assert_eq!(coordinate_spread(&[0b000, 0b011, 0b100]).unwrap(), 0b111);
        assert!(coordinate_spread(&[]).is_err());

        assert_eq!(spanned_subcube(&[0b01]).unwrap(), vec![0b01]);
        assert_eq!(
            spanned_subcube(&[0b00, 0b11]).unwrap(),
            vec![0b00, 0b01, 0b10, 0b11]
        );
        assert_eq!(
            spanned_subcube(&[0b000, 0b001, 0b010]).unwrap(),
            vec![0b000, 0b001, 0b010, 0b011]
        );
    }

    #[test]
    fn subcube_size_matches_spread() {
        for verts in [vec![0b0u16], vec![1, 2, 4], vec![0, 7], vec![3, 5, 6]] {
            let spread = coordinate_spread(&verts).unwrap();
            let cube = spanned_subcube(&verts).unwrap();
            assert_eq!(cube.len(), 1 << spread.count_ones());
        }
    }

    #[test]
    fn automorphism_counts() {
        assert_eq!(automorphisms(1).unwrap().len(), 2);
        assert_eq!(automorphisms(3).unwrap().len(), 48);
        assert_eq!(automorphisms(4).unwrap().len(), 384);
        assert!(automorphisms(7).is_err());
    }

    #[test]
    fn automorphism_preserves_hamming() {
        for g in automorphisms(3).unwrap() {
            for u in 0..8u16 {
                for v in 0..8u16 {
                    assert_eq!(hamming(g.apply_vertex(u), g.apply_vertex(v)), hamming(u, v));
                }
            }
        }
    }

    #[test]
    fn compose_matches_sequential_application() {
        let auts = automorphisms(3).unwrap();
        let a = &auts[7];
        let b = &auts[29];
        let ab = a.compose(b);
        for v in 0..8u16 {
            assert_eq!(ab.apply_vertex(v), a.apply_vertex(b.apply_vertex(v)));
        }
        let inv = a.inverse();
        for v in 0..8u16 {
            assert_eq!(inv.apply_vertex(a.apply_vertex(v)), v);
        }
    }

    #[test]
    fn apply_automorphism_examples() {
        let single = CubeGraph::spanning(3, &[(0b000, 0b001)]).unwrap();
        let id = CubeAutomorphism::identity(3);
        assert_eq!(apply_automorphism(&id, &single).unwrap(), single);

        let flip_all = CubeAutomorphism::new(3, &[0, 1, 2], 0b111).unwrap();
        let image = apply_automorphism(&flip_all, &single).unwrap();
        assert!(image.has_edge(0b111, 0b110));
        assert_eq!(image.edge_count(), 1);

        // Swapping two coordinates maps the 2-edge path onto a feasibly
        // isomorphic graph.
        let path = CubeGraph::spanning(2, &[(0b00, 0b01), (0b01, 0b11)]).unwrap();
        let swap = CubeAutomorphism::new(2, &[1, 0], 0).unwrap();
        let image = apply_automorphism(&swap, &path).unwrap();
        assert_eq!(
            canonical_form(&image, None).unwrap(),
            canonical_form(&path, None).unwrap()
        );
    }

    #[test]
    fn canonical_form_identifies_edge_orbits() {
        let a = CubeGraph::spanning(3, &[(0b000, 0b001)]).unwrap();
        let b = CubeGraph::spanning(3, &[(0b110, 0b111)]).unwrap();
        assert_eq!(canonical_form(&a, None).unwrap(), canonical_form(&b, None).unwrap());
    }

    #[test]
    fn feasible_but_not_abstract_isomorphism() {
        // Three copies of the 3-edge path: two lie in a 2-face of the cube,
        // one winds through all three coordinates. All are abstractly
        // isomorphic, only the first two are feasibly isomorphic.
        let g1 = CubeGraph::new(
            3,
            &[0b000, 0b001, 0b011, 0b010],
            &[(0b000, 0b001), (0b001, 0b011), (0b011, 0b010)],
        )
        .unwrap();
        let g2 = CubeGraph::new(
            3,
            &[0b100, 0b101, 0b111, 0b110],
            &[(0b100, 0b110), (0b110, 0b111), (0b111, 0b101)],
        )
        .unwrap();
        let g3 = CubeGraph::new(
            3,
            &[0b000, 0b001, 0b011, 0b111],
            &[(0b000, 0b001), (0b001, 0b011), (0b011, 0b111)],
        )
        .unwrap();
        let k1 = canonical_form(&g1, None).unwrap();
        let k2 = canonical_form(&g2, None).unwrap();
        let k3 = canonical_form(&g3, None).unwrap();
        assert_eq!(k1, k2);
        assert_ne!(k1, k3);
    }

    #[test]
    fn labeled_canonical_form_distinguishes_paths() {
        // Both are 2-edge paths in the square with the labeled pair on an
        // edge; they extend to opposite sides, so as flags they differ.
        let f1 = CubeGraph::spanning(2, &[(0b00, 0b01), (0b01, 0b11)]).unwrap();
        let f2 = CubeGraph::spanning(2, &[(0b00, 0b01), (0b00, 0b10)]).unwrap();
        let labels = [0b00u16, 0b01];
        let k1 = canonical_form(&f1, Some(&labels)).unwrap();
        let k2 = canonical_form(&f2, Some(&labels)).unwrap();
        assert_ne!(k1, k2);

        // Unlabeled they are the same graph.
        assert_eq!(
            canonical_form(&f1, None).unwrap(),
            canonical_form(&f2, None).unwrap()
        );
    }

    #[test]
    fn feasible_map_counts() {
        // Fully pinned edge: exactly one map.
        let edge = CubeGraph::new(1, &[0, 1], &[(0, 1)]).unwrap();
        let maps = feasible_maps(&edge, &[(0, 0b010), (1, 0b110)], 3).unwrap();
        assert_eq!(maps.len(), 1);
        assert_eq!(maps[0].apply(0), 0b010);
        assert_eq!(maps[0].apply(1), 0b110);

        // Square with one side pinned to an edge of Q_3: two completions.
        let square = CubeGraph::hypercube(2).unwrap();
        let maps = feasible_maps(&square, &[(0b00, 0b000), (0b01, 0b001)], 3).unwrap();
        assert_eq!(maps.len(), 2);

        // Unpinned square into Q_3: 6 faces times 8 symmetries.
        let maps = feasible_maps(&square, &[], 3).unwrap();
        assert_eq!(maps.len(), 48);
    }

    #[test]
    fn feasible_maps_deduplicate_and_preserve_distance() {
        // Antipodal pair: coordinate injections collapse onto the same
        // vertex maps, which must be reported once each.
        let pair = CubeGraph::new(2, &[0b00, 0b11], &[]).unwrap();
        let maps = feasible_maps(&pair, &[], 2).unwrap();
        let mut images: Vec<(VertexMask, VertexMask)> =
            maps.iter().map(|m| (m.apply(0b00), m.apply(0b11))).collect();
        images.sort_unstable();
        images.dedup();
        assert_eq!(images.len(), maps.len());
        for (a, b) in images {
            assert_eq!(hamming(a, b), 2);
        }
        // 4 anchors, antipode forced: the two coordinate injections per
        // anchor collapse onto one vertex map.
        assert_eq!(maps.len(), 4);

        // Into Q_3 the image pair picks 2 of 3 coordinates: 8 anchors x 3.
        let maps = feasible_maps(&pair, &[], 3).unwrap();
        assert_eq!(maps.len(), 24);
    }

    #[test]
    fn inconsistent_pins_rejected() {
        let square = CubeGraph::hypercube(2).unwrap();
        let err = feasible_maps(&square, &[(0b00, 0b000), (0b01, 0b011)], 3);
        assert!(err.is_err());
    }

    #[test]
    fn edge_index_round_trip() {
        for dim in 1..=4usize {
            for idx in 0..cube_edge_count(dim) {
                let (u, v) = edge_endpoints(dim, idx);
                assert_eq!(hamming(u, v), 1);
                assert!(u < v);
                assert_eq!(edge_index(dim, u, v), idx);
                assert_eq!(edge_index(dim, v, u), idx);
            }
        }
    }
}
