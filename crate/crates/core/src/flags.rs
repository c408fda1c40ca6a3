//! Types, σ-flags, type placements Θ_H, and the exact pair-density tables
//! `E_θ[p(F_i, F_j, θ; H)]` that become SDP coefficients.
//!
//! Flags here always fill their subcube (a flag of dimension `k` has all
//! `2^k` vertices), which covers every flag the bounds need. Probabilities
//! are exact rationals; no floating point enters table construction.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::cube::{
    canonical_form_with, coordinate_spread, cube_edge_count, edge_index, hamming, AutTables,
    CanonicalKey, CoordMask, CubeGraph, EdgeSet, VertexMask,
};
use crate::subgraphs::{edge_density, forbidden_cycles, graph_line, parse_graph_line, ForbiddenPattern, HFamily};
use crate::{Error, Result};

/// A cube graph together with an injective label sequence (the type map θ).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct FlagShape {
    graph: CubeGraph,
    labels: Vec<VertexMask>,
}

impl FlagShape {
    pub fn new(graph: CubeGraph, labels: Vec<VertexMask>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for &l in &labels {
            if !graph.has_vertex(l) || !seen.insert(l) {
                return Err(Error::InvalidLabels(format!(
                    "label {l} repeated or absent from the vertex set"
                )));
            }
        }
        Ok(FlagShape { graph, labels })
    }

    pub fn graph(&self) -> &CubeGraph {
        &self.graph
    }

    pub fn labels(&self) -> &[VertexMask] {
        &self.labels
    }

    /// `dim:EDGELIST labels:l0,l1` line rendering.
    pub fn to_line(&self) -> String {
        let labels: Vec<String> = self.labels.iter().map(|l| l.to_string()).collect();
        format!("{} labels:{}", graph_line(&self.graph), labels.join(","))
    }

    pub fn parse_line(line: &str) -> Result<Self> {
        let (graph_part, label_part) = line
            .rsplit_once("labels:")
            .ok_or_else(|| Error::Parse(format!("missing labels: suffix in {line:?}")))?;
        let graph = parse_graph_line(graph_part.trim())?;
        let mut labels = Vec::new();
        for tok in label_part.split(',') {
            let tok = tok.trim();
            if tok.is_empty() {
                continue;
            }
            labels.push(
                tok.parse::<VertexMask>()
                    .map_err(|_e| Error::Parse(format!("bad label {tok:?}")))?,
            );
        }
        FlagShape::new(graph, labels)
    }
}

/// A type σ: a flag whose label sequence is a bijection onto its vertex set.
/// Its dimension `r` is the dimension of the labeled vertex set.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TypeSigma {
    shape: FlagShape,
    r: usize,
    key: CanonicalKey,
}

impl TypeSigma {
    pub fn new(shape: FlagShape) -> Result<Self> {
        if shape.labels().len() != shape.graph().vertex_count() {
            return Err(Error::InvalidLabels(
                "a type labels every vertex exactly once".into(),
            ));
        }
        let r = coordinate_spread(shape.labels())?.count_ones() as usize;
        let key = crate::cube::canonical_form(shape.graph(), Some(shape.labels()))?;
        Ok(TypeSigma { shape, r, key })
    }

    /// The single labeled vertex type of dimension zero.
    pub fn single_vertex() -> TypeSigma {
        let graph = CubeGraph::new(0, &[0], &[]).expect("point graph");
        TypeSigma::new(FlagShape::new(graph, vec![0]).expect("labels")).expect("type")
    }

    /// Two labeled vertices at Hamming distance one, with or without the
    /// edge between them (the types σ_1 and σ_0).
    pub fn adjacent_pair(edge: bool) -> TypeSigma {
        let edges: &[(VertexMask, VertexMask)] = if edge { &[(0, 1)] } else { &[] };
        let graph = CubeGraph::new(1, &[0, 1], edges).expect("pair graph");
        TypeSigma::new(FlagShape::new(graph, vec![0, 1]).expect("labels")).expect("type")
    }

    pub fn shape(&self) -> &FlagShape {
        &self.shape
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn key(&self) -> &CanonicalKey {
        &self.key
    }

    pub fn label_count(&self) -> usize {
        self.shape.labels().len()
    }

    /// True when the labeled vertex set fills its spanned subcube, the
    /// shape every flag construction here relies on.
    pub fn fills_subcube(&self) -> bool {
        self.shape.labels().len() == 1 << self.r
    }

    pub fn to_line(&self) -> String {
        self.shape.to_line()
    }

    pub fn parse_line(line: &str) -> Result<Self> {
        TypeSigma::new(FlagShape::parse_line(line)?)
    }

    fn has_label_edge(&self, i: usize, j: usize) -> bool {
        let (u, v) = (self.shape.labels()[i], self.shape.labels()[j]);
        hamming(u, v) == 1 && self.shape.graph().has_edge(u, v)
    }
}

/// A σ-flag: an F-free cube graph filling a `k`-subcube whose labeled part
/// induces σ and whose unlabeled vertices avoid the labeled subcube.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SigmaFlag {
    shape: FlagShape,
    k: usize,
    sigma_key: CanonicalKey,
    key: CanonicalKey,
}

impl SigmaFlag {
    pub fn shape(&self) -> &FlagShape {
        &self.shape
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn key(&self) -> &CanonicalKey {
        &self.key
    }

    pub fn sigma_key(&self) -> &CanonicalKey {
        &self.sigma_key
    }

    pub fn edge_count(&self) -> usize {
        self.shape.graph().edge_count()
    }

    pub fn to_line(&self) -> String {
        self.shape.to_line()
    }
}

/// Standard label positions: σ's vertices included into `Q_k` on the low
/// coordinates, in σ's label order.
fn standard_labels(sigma: &TypeSigma) -> Vec<VertexMask> {
    sigma.shape().labels().to_vec()
}

/// All F-free σ-flags of dimension `k` on `vertex_count` vertices up to
/// label-pinned feasible isomorphism, sorted by canonical key. The forbidden
/// pattern's cycle length is re-instantiated inside `Q_k`.
pub fn enumerate_flags(
    sigma: &TypeSigma,
    k: usize,
    vertex_count: usize,
    pattern: &ForbiddenPattern,
) -> Result<Vec<SigmaFlag>> {
    if vertex_count != 1 << k {
        return Err(Error::InvalidFlag(format!(
            "flags must fill their subcube: dimension {k} needs {} vertices, got {vertex_count}",
            1usize << k
        )));
    }
    if !sigma.fills_subcube() {
        return Err(Error::InvalidFlag(
            "type does not fill its subcube; no flag satisfies the type-map condition".into(),
        ));
    }
    let r = sigma.r();
    if r > k {
        return Err(Error::InvalidFlag(format!(
            "type dimension {r} exceeds flag dimension {k}"
        )));
    }
    let local_pattern = if k >= 2 {
        Some(forbidden_cycles(k, pattern.cycle_len())?)
    } else {
        None
    };
    let labels = standard_labels(sigma);
    let tables = AutTables::new(k)?;
    let n_edges = cube_edge_count(k);
    let mut out: BTreeMap<CanonicalKey, SigmaFlag> = BTreeMap::new();
    for bits in 0..1u64 << n_edges {
        let mut edges = EdgeSet::empty();
        for e in 0..n_edges {
            if bits >> e & 1 == 1 {
                edges.insert(e);
            }
        }
        let g = CubeGraph::spanning_from_edge_set(k, edges);
        if let Some(p) = &local_pattern {
            if p.violated_by(g.edge_set()) {
                continue;
            }
        }
        if !labeled_part_matches(sigma, &g, &labels) {
            continue;
        }
        let key = canonical_form_with(&tables, &g, Some(&labels))?;
        out.entry(key.clone()).or_insert_with(|| {
            let (graph, labels) = key.to_graph();
            SigmaFlag {
                shape: FlagShape::new(graph, labels).expect("canonical labels"),
                k,
                sigma_key: sigma.key().clone(),
                key: key.clone(),
            }
        });
    }
    Ok(out.into_values().collect())
}

fn labeled_part_matches(sigma: &TypeSigma, g: &CubeGraph, labels: &[VertexMask]) -> bool {
    for i in 0..labels.len() {
        for j in i + 1..labels.len() {
            if hamming(labels[i], labels[j]) == 1
                && g.has_edge(labels[i], labels[j]) != sigma.has_label_edge(i, j)
            {
                return false;
            }
        }
    }
    true
}

/// A σ-type placement into a host graph: the ordered label images, plus the
/// induced coordinate map from σ's frame into the host's coordinates.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TypePlacement {
    targets: Vec<VertexMask>,
    anchor: VertexMask,
    coord_map: Vec<usize>,
    coord_mask: CoordMask,
}

impl TypePlacement {
    pub fn targets(&self) -> &[VertexMask] {
        &self.targets
    }

    pub fn coord_map(&self) -> &[usize] {
        &self.coord_map
    }
}

/// All σ-type placements Θ_H into `h`: injective label placements whose
/// pairwise distances match σ positionally and whose spanned subcube
/// contains no other vertex of `h`. Induced edges are not filtered; an edge
/// mismatch makes the pair probabilities vanish instead.
pub fn type_maps(sigma: &TypeSigma, h: &CubeGraph) -> Result<Vec<TypePlacement>> {
    if sigma.r() > h.dim() {
        return Err(Error::DimensionMismatch(format!(
            "type dimension {} exceeds host dimension {}",
            sigma.r(),
            h.dim()
        )));
    }
    if !sigma.fills_subcube() {
        return Err(Error::InvalidFlag("type does not fill its subcube".into()));
    }
    let labels = sigma.shape().labels();
    let m = labels.len();
    let verts: Vec<VertexMask> = h.vertices().collect();
    let mut out = Vec::new();
    let mut tuple: Vec<VertexMask> = Vec::with_capacity(m);
    place(
        sigma, h, &verts, labels, &mut tuple, &mut out,
    );
    Ok(out)
}

fn place(
    sigma: &TypeSigma,
    h: &CubeGraph,
    verts: &[VertexMask],
    labels: &[VertexMask],
    tuple: &mut Vec<VertexMask>,
    out: &mut Vec<TypePlacement>,
) {
    let m = labels.len();
    if tuple.len() == m {
        if let Some(p) = placement_from_tuple(sigma, h, labels, tuple) {
            out.push(p);
        }
        return;
    }
    let i = tuple.len();
    'candidates: for &v in verts {
        if tuple.contains(&v) {
            continue;
        }
        for j in 0..i {
            if hamming(tuple[j], v) != hamming(labels[j], labels[i]) {
                continue 'candidates;
            }
        }
        tuple.push(v);
        place(sigma, h, verts, labels, tuple, out);
        tuple.pop();
    }
}

fn placement_from_tuple(
    sigma: &TypeSigma,
    h: &CubeGraph,
    labels: &[VertexMask],
    tuple: &[VertexMask],
) -> Option<TypePlacement> {
    let r = sigma.r();
    // Anchor at the label with mask 0; a subcube-filling type always has it.
    let i0 = labels.iter().position(|&l| l == 0)?;
    let anchor = tuple[i0];
    let mut coord_map = vec![usize::MAX; r];
    let mut coord_mask: CoordMask = 0;
    for c in 0..r {
        let ic = labels.iter().position(|&l| l == (1 << c))?;
        let diff = tuple[ic] ^ anchor;
        if diff.count_ones() != 1 {
            return None;
        }
        let target = diff.trailing_zeros() as usize;
        if coord_mask >> target & 1 == 1 {
            return None;
        }
        coord_map[c] = target;
        coord_mask |= 1 << target;
    }
    // Full positional consistency of the induced coordinate map.
    for (i, &l) in labels.iter().enumerate() {
        let mut image = anchor;
        for c in 0..r {
            if l >> c & 1 == 1 {
                image ^= 1 << coord_map[c];
            }
        }
        if image != tuple[i] {
            return None;
        }
    }
    // Subcube condition: no vertex of h other than the labeled images may
    // lie in the subcube the images span.
    let spanned = crate::cube::spanned_subcube(tuple).ok()?;
    for v in spanned {
        if h.has_vertex(v) && !tuple.contains(&v) {
            return None;
        }
    }
    Some(TypePlacement {
        targets: tuple.to_vec(),
        anchor,
        coord_map,
        coord_mask,
    })
}

/// Ordered injections of length `len` drawn from `pool`.
fn ordered_tuples(pool: &[usize], len: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(len);
    fn rec(pool: &[usize], len: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        for &c in pool {
            if !cur.contains(&c) {
                cur.push(c);
                rec(pool, len, cur, out);
                cur.pop();
            }
        }
    }
    rec(pool, len, &mut cur, &mut out);
    out
}

/// The labeled subgraph a feasible extension induces, pulled back to the
/// standard flag frame and canonicalized.
fn extension_key(
    h: &CubeGraph,
    placement: &TypePlacement,
    extra: &[usize],
    k: usize,
    labels: &[VertexMask],
    tables: &AutTables,
) -> CanonicalKey {
    let r = placement.coord_map.len();
    let full_map = |c: usize| -> usize {
        if c < r {
            placement.coord_map[c]
        } else {
            extra[c - r]
        }
    };
    let spread = |x: VertexMask| -> VertexMask {
        let mut v = placement.anchor;
        for c in 0..k {
            if x >> c & 1 == 1 {
                v ^= 1 << full_map(c);
            }
        }
        v
    };
    let mut edges = EdgeSet::empty();
    for j in 0..k {
        for x in 0..1u16 << k {
            if x >> j & 1 == 0 {
                let u = spread(x);
                let v = u ^ (1 << full_map(j));
                if h.has_edge(u, v) {
                    edges.insert(edge_index(k, x, x ^ (1 << j)));
                }
            }
        }
    }
    let g = CubeGraph::spanning_from_edge_set(k, edges);
    canonical_form_with(tables, &g, Some(labels)).expect("flag frame canonical form")
}

/// Number of ordered coordinate extensions for one flag slot and for the
/// second slot of a disjoint pair.
fn falling(n: usize, k: usize) -> u64 {
    (0..k).map(|i| (n - i) as u64).product::<u64>().max(1)
}

/// Exact `p(F_i, F_j, θ; H)` over ordered pairs of feasible maps extending
/// θ with coordinate-disjoint images outside the labeled subcube.
pub fn pair_density(
    f_i: &SigmaFlag,
    f_j: &SigmaFlag,
    sigma: &TypeSigma,
    placement: &TypePlacement,
    h: &CubeGraph,
) -> Result<BigRational> {
    if f_i.sigma_key() != f_j.sigma_key() || f_i.sigma_key() != sigma.key() {
        return Err(Error::InvalidFlag("flags are not of the same type".into()));
    }
    let (k_i, k_j, r, n) = (f_i.k(), f_j.k(), sigma.r(), h.dim());
    if n + r < k_i + k_j {
        return Err(Error::FlagDimension { s: n, k: k_i.max(k_j), r });
    }
    let labels = standard_labels(sigma);
    let tables_i = AutTables::new(k_i)?;
    let tables_j = AutTables::new(k_j)?;
    let free: Vec<usize> = (0..n).filter(|c| placement.coord_mask >> c & 1 == 0).collect();
    let firsts = ordered_tuples(&free, k_i - r);
    let mut hits = 0u64;
    let mut total = 0u64;
    for t1 in &firsts {
        let key1 = extension_key(h, placement, t1, k_i, &labels, &tables_i);
        let pool2: Vec<usize> = free.iter().copied().filter(|c| !t1.contains(c)).collect();
        for t2 in ordered_tuples(&pool2, k_j - r) {
            total += 1;
            if key1 == *f_i.key()
                && extension_key(h, placement, &t2, k_j, &labels, &tables_j) == *f_j.key()
            {
                hits += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::FlagDimension { s: n, k: k_i.max(k_j), r });
    }
    Ok(BigRational::new(BigInt::from(hits), BigInt::from(total)))
}

/// One exact pair-density table per type: rows indexed by unordered flag
/// pairs, columns by the members of the family, plus the density row.
#[derive(Clone, Debug)]
pub struct DensityTable {
    type_line: String,
    flag_lines: Vec<String>,
    flag_count: usize,
    column_count: usize,
    family_digest: String,
    /// `d(H)` for every column.
    densities: Vec<BigRational>,
    /// Row per unordered pair (i <= j), sparse by column.
    rows: Vec<PairRow>,
}

#[derive(Clone, Debug)]
pub struct PairRow {
    pub i: usize,
    pub j: usize,
    values: Vec<(usize, BigRational)>,
}

impl PairRow {
    pub(crate) fn new(i: usize, j: usize) -> Self {
        PairRow {
            i,
            j,
            values: Vec::new(),
        }
    }

    /// Columns must be pushed in ascending order.
    pub(crate) fn push_value(&mut self, col: usize, v: BigRational) {
        debug_assert!(self.values.last().is_none_or(|(c, _v)| *c < col));
        self.values.push((col, v));
    }

    pub fn value(&self, col: usize) -> BigRational {
        self.values
            .binary_search_by_key(&col, |&(c, _)| c)
            .map(|pos| self.values[pos].1.clone())
            .unwrap_or_else(|_e| BigRational::new(BigInt::from(0), BigInt::from(1)))
    }

    pub fn nonzero(&self) -> &[(usize, BigRational)] {
        &self.values
    }
}

impl DensityTable {
    pub fn type_line(&self) -> &str {
        &self.type_line
    }

    pub fn flag_lines(&self) -> &[String] {
        &self.flag_lines
    }

    pub fn flag_count(&self) -> usize {
        self.flag_count
    }

    pub fn column_count(&self) -> usize {
        self.column_count
    }

    pub fn family_digest(&self) -> &str {
        &self.family_digest
    }

    pub fn densities(&self) -> &[BigRational] {
        &self.densities
    }

    pub fn rows(&self) -> &[PairRow] {
        &self.rows
    }

    pub fn row(&self, i: usize, j: usize) -> &PairRow {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let idx = pair_row_index(self.flag_count, i, j);
        &self.rows[idx]
    }

    pub fn entry(&self, i: usize, j: usize, col: usize) -> BigRational {
        self.row(i, j).value(col)
    }

    pub(crate) fn from_parts(
        type_line: String,
        flag_lines: Vec<String>,
        column_count: usize,
        family_digest: String,
        densities: Vec<BigRational>,
        rows: Vec<PairRow>,
    ) -> Self {
        let flag_count = flag_lines.len();
        DensityTable {
            type_line,
            flag_lines,
            flag_count,
            column_count,
            family_digest,
            densities,
            rows,
        }
    }
}

/// Row position of pair (i, j), i <= j, in the fixed row order
/// (0,0), (0,1), ..., (0,l-1), (1,1), ...
pub fn pair_row_index(l: usize, i: usize, j: usize) -> usize {
    i * l - i * (i + 1) / 2 + j
}

fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn family_digest(family: &HFamily) -> String {
    sha256_hex(crate::subgraphs::write_family(family).as_bytes())
}

/// Exact density tables for each `(type, flag list)` against the family.
/// Validates `s >= 2k - r` for every type before any heavy work.
pub fn density_table(
    types_with_flags: &[(TypeSigma, Vec<SigmaFlag>)],
    family: &HFamily,
) -> Result<Vec<DensityTable>> {
    let s = family.s();
    for (sigma, flags) in types_with_flags {
        let k = flags
            .first()
            .ok_or_else(|| Error::InvalidFlag("empty flag list".into()))?
            .k();
        if flags.iter().any(|f| f.k() != k) {
            return Err(Error::InvalidFlag("mixed flag dimensions in one list".into()));
        }
        if flags.iter().any(|f| f.sigma_key() != sigma.key()) {
            return Err(Error::InvalidFlag("flag list does not match its type".into()));
        }
        if s + sigma.r() < 2 * k {
            return Err(Error::FlagDimension { s, k, r: sigma.r() });
        }
    }
    let digest = family_digest(family);
    let densities: Vec<BigRational> = family
        .members()
        .iter()
        .map(edge_density)
        .collect::<Result<_>>()?;

    use rayon::prelude::*;
    types_with_flags
        .iter()
        .map(|(sigma, flags)| {
            let k = flags[0].k();
            let r = sigma.r();
            let labels = standard_labels(sigma);
            let tables = AutTables::new(k)?;
            let key_index: BTreeMap<&CanonicalKey, usize> = flags
                .iter()
                .enumerate()
                .map(|(idx, f)| (f.key(), idx))
                .collect();
            let l = flags.len();
            let n_rows = l * (l + 1) / 2;

            let columns: Vec<Vec<(usize, u64, u64)>> = family
                .members()
                .par_iter()
                .map(|h| {
                    let placements = type_maps(sigma, h).expect("type maps");
                    let free_all: Vec<usize> = (0..s).collect();
                    let mut counts: Vec<u64> = vec![0; n_rows];
                    let mut denom = 0u64;
                    for placement in &placements {
                        let free: Vec<usize> = free_all
                            .iter()
                            .copied()
                            .filter(|c| placement.coord_mask >> c & 1 == 0)
                            .collect();
                        let firsts = ordered_tuples(&free, k - r);
                        let idx_of: Vec<Option<usize>> = firsts
                            .iter()
                            .map(|t| {
                                let key = extension_key(h, placement, t, k, &labels, &tables);
                                key_index.get(&key).copied()
                            })
                            .collect();
                        for (a, t1) in firsts.iter().enumerate() {
                            for (b, t2) in firsts.iter().enumerate() {
                                if t2.iter().any(|c| t1.contains(c)) {
                                    continue;
                                }
                                denom += 1;
                                if let (Some(i1), Some(i2)) = (idx_of[a], idx_of[b]) {
                                    if i1 <= i2 {
                                        counts[pair_row_index(l, i1, i2)] += 1;
                                    }
                                }
                            }
                        }
                    }
                    counts
                        .into_iter()
                        .enumerate()
                        .filter(|&(_i, c)| c > 0)
                        .map(|(i, c)| (i, c, denom))
                        .collect()
                })
                .collect();

            let mut rows: Vec<PairRow> = Vec::with_capacity(n_rows);
            for i in 0..l {
                for j in i..l {
                    rows.push(PairRow {
                        i,
                        j,
                        values: Vec::new(),
                    });
                }
            }
            for (col, entries) in columns.iter().enumerate() {
                for &(row_idx, num, den) in entries {
                    rows[row_idx]
                        .values
                        .push((col, BigRational::new(BigInt::from(num), BigInt::from(den))));
                }
            }
            Ok(DensityTable::from_parts(
                sigma.to_line(),
                flags.iter().map(|f| f.to_line()).collect(),
                family.len(),
                digest.clone(),
                densities.clone(),
                rows,
            ))
        })
        .collect()
}

/// CSV rendering: metadata comments, a `pair,H_0,...` header, the density
/// row, then one row per unordered flag pair with exact `p/q` entries.
pub fn write_table_csv(table: &DensityTable) -> String {
    let mut out = String::new();
    out.push_str(&format!("# type {}\n", table.type_line()));
    for (i, f) in table.flag_lines().iter().enumerate() {
        out.push_str(&format!("# flag {i} {f}\n"));
    }
    out.push_str(&format!("# family sha256={}\n", table.family_digest()));
    out.push_str("pair");
    for c in 0..table.column_count() {
        out.push_str(&format!(",H_{c}"));
    }
    out.push('\n');
    out.push_str("d");
    for d in table.densities() {
        out.push_str(&format!(",{d}"));
    }
    out.push('\n');
    for row in table.rows() {
        out.push_str(&format!("F{}*F{}", row.i, row.j));
        for c in 0..table.column_count() {
            out.push_str(&format!(",{}", row.value(c)));
        }
        out.push('\n');
    }
    out
}

pub fn parse_table_csv(text: &str) -> Result<DensityTable> {
    let mut type_line = String::new();
    let mut flag_lines: Vec<String> = Vec::new();
    let mut family_digest = String::new();
    let mut densities: Vec<BigRational> = Vec::new();
    let mut rows: Vec<PairRow> = Vec::new();
    let mut column_count = 0usize;
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("# type ") {
            type_line = rest.to_string();
        } else if let Some(rest) = line.strip_prefix("# flag ") {
            let (_idx, flag) = rest
                .split_once(' ')
                .ok_or_else(|| Error::Parse("bad flag comment".into()))?;
            flag_lines.push(flag.to_string());
        } else if let Some(rest) = line.strip_prefix("# family sha256=") {
            family_digest = rest.to_string();
        } else if line.starts_with("pair") {
            column_count = line.split(',').count() - 1;
        } else if let Some(rest) = line.strip_prefix("d,") {
            for tok in rest.split(',') {
                densities.push(crate::scalar::parse_rational(tok)?);
            }
        } else if line.starts_with('F') {
            let mut parts = line.split(',');
            let label = parts.next().unwrap_or_default();
            let pair = label
                .trim_start_matches('F')
                .split_once("*F")
                .ok_or_else(|| Error::Parse(format!("bad pair label {label:?}")))?;
            let i: usize = pair.0.parse().map_err(|_e| Error::Parse("bad pair".into()))?;
            let j: usize = pair.1.parse().map_err(|_e| Error::Parse("bad pair".into()))?;
            let mut values = Vec::new();
            for (col, tok) in parts.enumerate() {
                let v = crate::scalar::parse_rational(tok)?;
                if !num_traits::Zero::is_zero(&v) {
                    values.push((col, v));
                }
            }
            rows.push(PairRow { i, j, values });
        }
    }
    if rows.is_empty() || column_count == 0 {
        return Err(Error::Parse("table CSV has no data rows".into()));
    }
    if densities.len() != column_count {
        return Err(Error::Parse("density row width mismatch".into()));
    }
    let l = flag_lines.len();
    if rows.len() != l * (l + 1) / 2 {
        return Err(Error::Parse("pair row count does not match flag count".into()));
    }
    Ok(DensityTable::from_parts(
        type_line,
        flag_lines,
        column_count,
        family_digest,
        densities,
        rows,
    ))
}

/// Convenience accessor used by pair-count arithmetic: ordered extension
/// counts for one placement.
pub fn placement_pair_count(n: usize, r: usize, k: usize) -> u64 {
    falling(n - r, k - r) * falling(n - k, k - r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;
    use crate::subgraphs::enumerate_free;
    use num_traits::{One, Zero};

    fn c4(s: usize) -> ForbiddenPattern {
        forbidden_cycles(s, 4).unwrap()
    }

    #[test]
    fn flag_enumeration_counts() {
        let point = TypeSigma::single_vertex();
        assert_eq!(enumerate_flags(&point, 1, 2, &c4(2)).unwrap().len(), 2);

        let sigma0 = TypeSigma::adjacent_pair(false);
        let sigma1 = TypeSigma::adjacent_pair(true);
        assert_eq!(enumerate_flags(&sigma0, 2, 4, &c4(2)).unwrap().len(), 8);
        assert_eq!(enumerate_flags(&sigma1, 2, 4, &c4(2)).unwrap().len(), 7);

        // With C6 forbidden instead, the four-edge square flag is allowed.
        let c6 = forbidden_cycles(2, 6).unwrap();
        assert_eq!(enumerate_flags(&sigma0, 2, 4, &c6).unwrap().len(), 8);
        assert_eq!(enumerate_flags(&sigma1, 2, 4, &c6).unwrap().len(), 8);
    }

    #[test]
    fn labeled_paths_are_distinct_flags() {
        let sigma1 = TypeSigma::adjacent_pair(true);
        let flags = enumerate_flags(&sigma1, 2, 4, &c4(2)).unwrap();
        let path_up = CubeGraph::spanning(2, &[(0, 1), (1, 3)]).unwrap();
        let path_down = CubeGraph::spanning(2, &[(0, 1), (0, 2)]).unwrap();
        let key_up = crate::cube::canonical_form(&path_up, Some(&[0, 1])).unwrap();
        let key_down = crate::cube::canonical_form(&path_down, Some(&[0, 1])).unwrap();
        assert_ne!(key_up, key_down);
        assert!(flags.iter().any(|f| *f.key() == key_up));
        assert!(flags.iter().any(|f| *f.key() == key_down));
    }

    #[test]
    fn type_map_counts() {
        let point = TypeSigma::single_vertex();
        let h = CubeGraph::spanning(2, &[(0, 1), (1, 3)]).unwrap();
        assert_eq!(type_maps(&point, &h).unwrap().len(), 4);

        let sigma0 = TypeSigma::adjacent_pair(false);
        let q3_member = CubeGraph::spanning(3, &[(0, 1)]).unwrap();
        assert_eq!(type_maps(&sigma0, &q3_member).unwrap().len(), 24);
        let q2_member = CubeGraph::spanning(2, &[]).unwrap();
        assert_eq!(type_maps(&sigma0, &q2_member).unwrap().len(), 8);
    }

    #[test]
    fn pair_density_two_of_eight() {
        // The worked example: F_0, F_1 on the 2-edge path; averaging over
        // the four placements gives 1/4 from 2 satisfying cases out of 8.
        let point = TypeSigma::single_vertex();
        let flags = enumerate_flags(&point, 1, 2, &c4(2)).unwrap();
        let f0 = flags.iter().find(|f| f.edge_count() == 0).unwrap();
        let f1 = flags.iter().find(|f| f.edge_count() == 1).unwrap();
        let h3 = CubeGraph::spanning(2, &[(0, 1), (1, 3)]).unwrap();
        let placements = type_maps(&point, &h3).unwrap();
        assert_eq!(placements.len(), 4);
        let total: BigRational = placements
            .iter()
            .map(|p| pair_density(f0, f1, &point, p, &h3).unwrap())
            .sum();
        assert_eq!(total / rat(4, 1), rat(1, 4));
    }

    #[test]
    fn mismatched_type_placement_has_zero_density() {
        let sigma1 = TypeSigma::adjacent_pair(true);
        let flags = enumerate_flags(&sigma1, 2, 4, &c4(2)).unwrap();
        // Host has no edges at all, so every σ_1 placement mismatches.
        let h = CubeGraph::spanning(3, &[]).unwrap();
        for p in type_maps(&sigma1, &h).unwrap() {
            for f in &flags {
                assert!(pair_density(f, f, &sigma1, &p, &h).unwrap().is_zero());
            }
        }
    }

    fn h2_paper_order() -> Vec<CubeGraph> {
        vec![
            CubeGraph::spanning(2, &[]).unwrap(),
            CubeGraph::spanning(2, &[(0, 1)]).unwrap(),
            CubeGraph::spanning(2, &[(0, 1), (2, 3)]).unwrap(),
            CubeGraph::spanning(2, &[(0, 1), (1, 3)]).unwrap(),
            CubeGraph::spanning(2, &[(0, 1), (1, 3), (3, 2)]).unwrap(),
        ]
    }

    #[test]
    fn table_one_reproduced_exactly() {
        let family = enumerate_free(2, &c4(2)).unwrap();
        let point = TypeSigma::single_vertex();
        let flags = enumerate_flags(&point, 1, 2, &c4(2)).unwrap();
        // Flag index 0 must be the empty flag for the row order below.
        let i_empty = flags.iter().position(|f| f.edge_count() == 0).unwrap();
        let tables = density_table(&[(point, flags)], &family).unwrap();
        let table = &tables[0];

        // Columns of the published table, keyed by the paper's H order.
        let expected: [[BigRational; 5]; 3] = [
            [rat(1, 1), rat(1, 2), rat(0, 1), rat(1, 4), rat(0, 1)],
            [rat(0, 1), rat(1, 4), rat(1, 2), rat(1, 4), rat(1, 4)],
            [rat(0, 1), rat(0, 1), rat(0, 1), rat(1, 4), rat(1, 2)],
        ];
        let (e, f) = (i_empty, 1 - i_empty);
        let pairs = [(e, e), (e, f), (f, f)];
        for (h_pos, h) in h2_paper_order().iter().enumerate() {
            let col = family.position_of(h).unwrap().unwrap();
            for (row_pos, &(i, j)) in pairs.iter().enumerate() {
                assert_eq!(
                    table.entry(i, j, col),
                    expected[row_pos][h_pos],
                    "row {row_pos} column H_{h_pos}"
                );
            }
        }
    }

    #[test]
    fn ordered_pair_probabilities_partition_per_placement() {
        // For every H in H_3 and every placement whose labeled pair matches
        // the type, the ordered pair probabilities over all flags sum to 1.
        let family = enumerate_free(3, &c4(3)).unwrap();
        let sigma1 = TypeSigma::adjacent_pair(true);
        let flags = enumerate_flags(&sigma1, 2, 4, &c4(2)).unwrap();
        for h in family.members().iter().take(12) {
            for p in type_maps(&sigma1, h).unwrap() {
                let t = p.targets();
                let matches = h.has_edge(t[0], t[1]);
                let mut total = BigRational::zero();
                for fi in &flags {
                    for fj in &flags {
                        total += pair_density(fi, fj, &sigma1, &p, h).unwrap();
                    }
                }
                if matches {
                    assert!(total.is_one(), "partition of unity at a matching placement");
                } else {
                    assert!(total.is_zero());
                }
            }
        }
    }

    #[test]
    fn q3_tables_have_expected_shape() {
        let family = enumerate_free(3, &c4(3)).unwrap();
        let sigma0 = TypeSigma::adjacent_pair(false);
        let sigma1 = TypeSigma::adjacent_pair(true);
        let f0 = enumerate_flags(&sigma0, 2, 4, &c4(2)).unwrap();
        let f1 = enumerate_flags(&sigma1, 2, 4, &c4(2)).unwrap();
        let tables = density_table(&[(sigma0, f0), (sigma1, f1)], &family).unwrap();
        assert_eq!(tables[0].rows().len(), 36);
        assert_eq!(tables[1].rows().len(), 28);
        assert_eq!(tables[0].column_count(), 99);
        for t in &tables {
            for row in t.rows() {
                for (_c, v) in row.nonzero() {
                    assert!(*v > BigRational::zero() && *v <= BigRational::one());
                }
            }
        }
    }

    #[test]
    fn eq_s_violation_rejected() {
        // Dimension-2 flags over a dimension-1 type need s >= 3.
        let family = enumerate_free(2, &c4(2)).unwrap();
        let sigma1 = TypeSigma::adjacent_pair(true);
        let flags = enumerate_flags(&sigma1, 2, 4, &c4(2)).unwrap();
        assert!(matches!(
            density_table(&[(sigma1, flags)], &family),
            Err(Error::FlagDimension { .. })
        ));
    }

    #[test]
    fn table_csv_round_trip() {
        let family = enumerate_free(2, &c4(2)).unwrap();
        let point = TypeSigma::single_vertex();
        let flags = enumerate_flags(&point, 1, 2, &c4(2)).unwrap();
        let tables = density_table(&[(point, flags)], &family).unwrap();
        let text = write_table_csv(&tables[0]);
        let parsed = parse_table_csv(&text).unwrap();
        assert_eq!(write_table_csv(&parsed), text);
    }

    #[test]
    fn shape_line_round_trip() {
        let sigma1 = TypeSigma::adjacent_pair(true);
        let line = sigma1.to_line();
        let parsed = TypeSigma::parse_line(&line).unwrap();
        assert_eq!(parsed.key(), sigma1.key());
        assert_eq!(parsed.to_line(), line);
    }
}
