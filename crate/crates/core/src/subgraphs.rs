//! Enumeration of F-free spanning subgraphs of `Q_s` up to cube
//! automorphism, their edge densities and subgraph densities `p(H, G)`.

use std::collections::BTreeMap;

use num_rational::BigRational;

use crate::cube::{
    canonical_form_with, cube_edge_count, edge_index, AutTables, CanonicalKey, CubeGraph, EdgeSet,
    VertexMask,
};
use crate::scalar::rat;
use crate::{Error, Result};

/// The forbidden even cycles of one length, listed as edge sets in `Q_s`.
#[derive(Clone, Debug)]
pub struct ForbiddenPattern {
    dim: usize,
    cycle_len: usize,
    cycles: Vec<EdgeSet>,
}

impl ForbiddenPattern {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cycle_len(&self) -> usize {
        self.cycle_len
    }

    pub fn cycles(&self) -> &[EdgeSet] {
        &self.cycles
    }

    /// True when `edges` contains some forbidden cycle as a subset.
    pub fn violated_by(&self, edges: &EdgeSet) -> bool {
        self.cycles.iter().any(|c| c.is_subset_of(edges))
    }
}

/// Every simple `len`-cycle of `Q_s`, each exactly once, in a fixed order.
pub fn forbidden_cycles(s: usize, len: usize) -> Result<ForbiddenPattern> {
    if len != 4 && len != 6 {
        return Err(Error::UnsupportedCycle(len));
    }
    if s < 2 {
        return Err(Error::BadInput(format!(
            "cycle enumeration needs s >= 2, got {s}"
        )));
    }
    if s > crate::MAX_DIM {
        return Err(Error::DimensionCap(s));
    }
    let n_vertices = 1u16 << s;
    let mut cycles = Vec::new();
    // Rooted at the minimum vertex; second vertex below the last kills the
    // orientation double-count.
    let mut path: Vec<VertexMask> = Vec::with_capacity(len);
    for v0 in 0..n_vertices {
        path.push(v0);
        extend_cycle(s, len, v0, &mut path, &mut cycles);
        path.pop();
    }
    Ok(ForbiddenPattern {
        dim: s,
        cycle_len: len,
        cycles,
    })
}

fn extend_cycle(
    s: usize,
    len: usize,
    root: VertexMask,
    path: &mut Vec<VertexMask>,
    out: &mut Vec<EdgeSet>,
) {
    let last = *path.last().unwrap();
    if path.len() == len {
        if crate::cube::hamming(last, root) == 1 && path[1] < last {
            let mut cycle = EdgeSet::empty();
            for i in 0..len {
                cycle.insert(edge_index(s, path[i], path[(i + 1) % len]));
            }
            out.push(cycle);
        }
        return;
    }
    for c in 0..s {
        let next = last ^ (1 << c);
        if next > root && !path.contains(&next) {
            path.push(next);
            extend_cycle(s, len, root, path, out);
            path.pop();
        }
    }
}

/// The family `H_s`: all pattern-free spanning subgraphs of `Q_s` up to cube
/// automorphism, as canonical representatives sorted by canonical key.
#[derive(Clone, Debug)]
pub struct HFamily {
    s: usize,
    members: Vec<CubeGraph>,
    keys: Vec<CanonicalKey>,
}

impl HFamily {
    pub fn s(&self) -> usize {
        self.s
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[CubeGraph] {
        &self.members
    }

    pub fn keys(&self) -> &[CanonicalKey] {
        &self.keys
    }

    /// Position of the class containing `g`, if it belongs to the family.
    pub fn position_of(&self, g: &CubeGraph) -> Result<Option<usize>> {
        let key = crate::cube::canonical_form(g, None)?;
        Ok(self.keys.binary_search(&key).ok())
    }

    pub fn from_members(s: usize, members: Vec<CubeGraph>) -> Result<Self> {
        let tables = AutTables::new(s)?;
        let mut map = BTreeMap::new();
        for m in members {
            let key = canonical_form_with(&tables, &m, None)?;
            let (rep, _labels) = key.to_graph();
            map.insert(key, rep);
        }
        let (keys, members): (Vec<_>, Vec<_>) = map.into_iter().unzip();
        Ok(HFamily { s, members, keys })
    }
}

/// Depth-first enumeration over edges in fixed order, pruning any branch
/// that completes a forbidden cycle, deduplicated by canonical key.
pub fn enumerate_free(s: usize, pattern: &ForbiddenPattern) -> Result<HFamily> {
    if s > 4 {
        return Err(Error::DimensionCap(s));
    }
    if pattern.dim() != s {
        return Err(Error::DimensionMismatch(format!(
            "pattern lives in Q_{}, requested s={s}",
            pattern.dim()
        )));
    }
    let n_edges = cube_edge_count(s);
    // cycles_with[e]: the forbidden cycles through edge e.
    let mut cycles_with: Vec<Vec<EdgeSet>> = vec![Vec::new(); n_edges];
    for c in pattern.cycles() {
        for e in c.iter() {
            cycles_with[e].push(*c);
        }
    }
    let tables = AutTables::new(s)?;
    let mut map: BTreeMap<CanonicalKey, CubeGraph> = BTreeMap::new();
    let mut current = EdgeSet::empty();
    dfs_edges(s, 0, n_edges, &cycles_with, &mut current, &tables, &mut map)?;
    let (keys, members): (Vec<_>, Vec<_>) = map.into_iter().unzip();
    Ok(HFamily { s, members, keys })
}

fn dfs_edges(
    s: usize,
    next: usize,
    n_edges: usize,
    cycles_with: &[Vec<EdgeSet>],
    current: &mut EdgeSet,
    tables: &AutTables,
    out: &mut BTreeMap<CanonicalKey, CubeGraph>,
) -> Result<()> {
    if next == n_edges {
        let g = CubeGraph::spanning_from_edge_set(s, *current);
        let key = canonical_form_with(tables, &g, None)?;
        out.entry(key.clone()).or_insert_with(|| key.to_graph().0);
        return Ok(());
    }
    dfs_edges(s, next + 1, n_edges, cycles_with, current, tables, out)?;
    let completes = cycles_with[next].iter().any(|c| {
        let mut with = *current;
        with.insert(next);
        c.is_subset_of(&with)
    });
    if !completes {
        current.insert(next);
        dfs_edges(s, next + 1, n_edges, cycles_with, current, tables, out)?;
        current.remove(next);
    }
    Ok(())
}

/// Edge density `d(H) = e(H) / e(Q_n)` of a spanning graph.
pub fn edge_density(h: &CubeGraph) -> Result<BigRational> {
    if h.dim() == 0 {
        return Err(Error::BadInput(
            "edge density undefined for dimension 0".into(),
        ));
    }
    if !h.is_spanning() {
        return Err(Error::InvalidGraph(
            "edge density needs a spanning graph".into(),
        ));
    }
    Ok(rat(
        h.edge_count() as i64,
        cube_edge_count(h.dim()) as i64,
    ))
}

/// Probability that a uniformly random feasible map of `V(H)` into `V(G)`
/// induces a graph feasibly isomorphic to `H`. Both graphs spanning,
/// `dim(H) <= dim(G)`.
pub fn subgraph_density(h: &CubeGraph, g: &CubeGraph) -> Result<BigRational> {
    let s = h.dim();
    let n = g.dim();
    if s > n {
        return Err(Error::DimensionMismatch(format!(
            "dim(H)={s} exceeds dim(G)={n}"
        )));
    }
    if !h.is_spanning() || !g.is_spanning() {
        return Err(Error::InvalidGraph(
            "subgraph density needs spanning graphs".into(),
        ));
    }
    let tables = AutTables::new(s)?;
    let target = canonical_form_with(&tables, h, None)?;
    let mut total = 0i64;
    let mut hits = 0i64;
    for_each_subcube(n, s, |coords, base| {
        total += 1;
        let induced = induced_on_subcube(g, coords, base);
        if canonical_form_with(&tables, &induced, None).expect("canonical form") == target {
            hits += 1;
        }
    });
    Ok(rat(hits, total))
}

/// Calls `f` with every `s`-subcube of `Q_n`: a sorted coordinate list plus
/// the base vertex fixing the remaining coordinates.
pub(crate) fn for_each_subcube(n: usize, s: usize, mut f: impl FnMut(&[usize], VertexMask)) {
    let mut coords = Vec::with_capacity(s);
    fn rec(
        n: usize,
        s: usize,
        start: usize,
        coords: &mut Vec<usize>,
        f: &mut impl FnMut(&[usize], VertexMask),
    ) {
        if coords.len() == s {
            let free: Vec<usize> = (0..n).filter(|c| !coords.contains(c)).collect();
            for assign in 0..1u32 << free.len() {
                let mut base: VertexMask = 0;
                for (i, &c) in free.iter().enumerate() {
                    if assign >> i & 1 == 1 {
                        base |= 1 << c;
                    }
                }
                f(coords, base);
            }
            return;
        }
        for c in start..n {
            coords.push(c);
            rec(n, s, c + 1, coords, f);
            coords.pop();
        }
    }
    rec(n, s, 0, &mut coords, &mut f);
}

/// The subgraph of `g` induced on the subcube spanned by `coords` above
/// `base`, pulled back to the standard frame `Q_{|coords|}`.
pub(crate) fn induced_on_subcube(g: &CubeGraph, coords: &[usize], base: VertexMask) -> CubeGraph {
    let s = coords.len();
    let spread = |x: VertexMask| -> VertexMask {
        let mut v = base;
        for (j, &c) in coords.iter().enumerate() {
            if x >> j & 1 == 1 {
                v |= 1 << c;
            }
        }
        v
    };
    let mut edges = EdgeSet::empty();
    for j in 0..s {
        for x in 0..1u16 << s {
            if x >> j & 1 == 0 {
                let u = spread(x);
                let v = u ^ (1 << coords[j]);
                if g.has_edge(u, v) {
                    edges.insert(edge_index(s, x, x ^ (1 << j)));
                }
            }
        }
    }
    CubeGraph::spanning_from_edge_set(s, edges)
}

/// Line-oriented family export: a `# cubeflag family ...` header, then one
/// graph per line as `dim:EDGELIST` with edges `u-v` in ascending mask order.
pub fn write_family(family: &HFamily) -> String {
    let mut out = format!(
        "# cubeflag family s={} count={}\n",
        family.s(),
        family.len()
    );
    for m in family.members() {
        out.push_str(&graph_line(m));
        out.push('\n');
    }
    out
}

pub fn graph_line(g: &CubeGraph) -> String {
    let edges: Vec<String> = g.edges().iter().map(|(u, v)| format!("{u}-{v}")).collect();
    format!("{}:{}", g.dim(), edges.join(" "))
}

pub fn parse_graph_line(line: &str) -> Result<CubeGraph> {
    let (dim_str, rest) = line
        .split_once(':')
        .ok_or_else(|| Error::Parse(format!("missing ':' in graph line {line:?}")))?;
    let dim: usize = dim_str
        .trim()
        .parse()
        .map_err(|_ignored| Error::Parse(format!("bad dimension in {line:?}")))?;
    let mut edges = Vec::new();
    for tok in rest.split_whitespace() {
        let (u, v) = tok
            .split_once('-')
            .ok_or_else(|| Error::Parse(format!("bad edge token {tok:?}")))?;
        let u: VertexMask = u
            .parse()
            .map_err(|_ignored| Error::Parse(format!("bad edge {tok:?}")))?;
        let v: VertexMask = v
            .parse()
            .map_err(|_ignored| Error::Parse(format!("bad edge {tok:?}")))?;
        edges.push((u, v));
    }
    CubeGraph::spanning(dim, &edges)
}

pub fn parse_family(text: &str) -> Result<HFamily> {
    let mut members = Vec::new();
    let mut s = None;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let g = parse_graph_line(line)?;
        match s {
            None => s = Some(g.dim()),
            Some(d) if d != g.dim() => {
                return Err(Error::Parse("mixed dimensions in family file".into()))
            }
            _ => {}
        }
        members.push(g);
    }
    let s = s.ok_or_else(|| Error::Parse("empty family file".into()))?;
    let tables = AutTables::new(s)?;
    let mut keys = Vec::with_capacity(members.len());
    for m in &members {
        keys.push(canonical_form_with(&tables, m, None)?);
    }
    let mut sorted = keys.clone();
    sorted.sort();
    sorted.dedup();
    if sorted != keys {
        return Err(Error::Parse(
            "family file is not in sorted canonical order or has duplicates".into(),
        ));
    }
    Ok(HFamily { s, members, keys })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cube::{apply_automorphism, automorphisms, canonical_form};
    use num_traits::{One, Zero};

    fn c4_pattern(s: usize) -> ForbiddenPattern {
        forbidden_cycles(s, 4).unwrap()
    }

    #[test]
    fn cycle_counts() {
        assert_eq!(forbidden_cycles(2, 4).unwrap().cycles().len(), 1);
        assert_eq!(forbidden_cycles(3, 4).unwrap().cycles().len(), 6);
        assert_eq!(forbidden_cycles(3, 6).unwrap().cycles().len(), 16);
        assert_eq!(forbidden_cycles(4, 4).unwrap().cycles().len(), 24);
        assert!(forbidden_cycles(3, 5).is_err());
    }

    #[test]
    fn family_counts() {
        assert_eq!(enumerate_free(2, &c4_pattern(2)).unwrap().len(), 5);
        assert_eq!(enumerate_free(3, &c4_pattern(3)).unwrap().len(), 99);
        assert_eq!(
            enumerate_free(3, &forbidden_cycles(3, 6).unwrap())
                .unwrap()
                .len(),
            116
        );
    }

    #[test]
    fn h2_matches_figure_list() {
        // Empty, one edge, two parallel edges, 2-edge path, 3-edge path.
        let family = enumerate_free(2, &c4_pattern(2)).unwrap();
        let figure = [
            CubeGraph::spanning(2, &[]).unwrap(),
            CubeGraph::spanning(2, &[(0, 1)]).unwrap(),
            CubeGraph::spanning(2, &[(0, 1), (2, 3)]).unwrap(),
            CubeGraph::spanning(2, &[(0, 1), (1, 3)]).unwrap(),
            CubeGraph::spanning(2, &[(0, 1), (1, 3), (3, 2)]).unwrap(),
        ];
        let mut keys: Vec<_> = figure
            .iter()
            .map(|g| canonical_form(g, None).unwrap())
            .collect();
        keys.sort();
        assert_eq!(keys, family.keys());
    }

    #[test]
    fn completeness_against_naive_filter() {
        for (s, len) in [(2usize, 4usize), (3, 4), (3, 6)] {
            let pattern = forbidden_cycles(s, len).unwrap();
            let family = enumerate_free(s, &pattern).unwrap();
            let tables = AutTables::new(s).unwrap();
            let mut naive = std::collections::BTreeSet::new();
            for bits in 0..1u64 << cube_edge_count(s) {
                let mut edges = EdgeSet::empty();
                for e in 0..cube_edge_count(s) {
                    if bits >> e & 1 == 1 {
                        edges.insert(e);
                    }
                }
                if pattern.violated_by(&edges) {
                    continue;
                }
                let g = CubeGraph::spanning_from_edge_set(s, edges);
                naive.insert(canonical_form_with(&tables, &g, None).unwrap());
            }
            let keys: std::collections::BTreeSet<_> = family.keys().iter().cloned().collect();
            assert_eq!(naive, keys, "s={s} len={len}");
        }
    }

    #[test]
    fn members_are_free_and_spanning() {
        let pattern = c4_pattern(3);
        let family = enumerate_free(3, &pattern).unwrap();
        for m in family.members() {
            assert!(m.is_spanning());
            assert!(!pattern.violated_by(m.edge_set()));
        }
    }

    #[test]
    fn edge_density_examples() {
        let empty = CubeGraph::spanning(2, &[]).unwrap();
        assert!(edge_density(&empty).unwrap().is_zero());
        let h4 = CubeGraph::spanning(2, &[(0, 1), (1, 3), (3, 2)]).unwrap();
        assert_eq!(edge_density(&h4).unwrap(), rat(3, 4));
        let q3 = CubeGraph::hypercube(3).unwrap();
        assert!(edge_density(&q3).unwrap().is_one());
        let max_d = enumerate_free(3, &c4_pattern(3))
            .unwrap()
            .members()
            .iter()
            .map(|m| edge_density(m).unwrap())
            .max()
            .unwrap();
        assert_eq!(max_d, rat(3, 4));
    }

    #[test]
    fn subgraph_density_examples() {
        let family = enumerate_free(2, &c4_pattern(2)).unwrap();
        for (i, h) in family.members().iter().enumerate() {
            for (j, g) in family.members().iter().enumerate() {
                let p = subgraph_density(h, g).unwrap();
                if i == j {
                    assert!(p.is_one());
                } else {
                    assert!(p.is_zero());
                }
            }
        }

        let h1 = CubeGraph::spanning(2, &[(0, 1)]).unwrap();
        let g = CubeGraph::spanning(3, &[(0, 1)]).unwrap();
        assert_eq!(subgraph_density(&h1, &g).unwrap(), rat(1, 3));
    }

    #[test]
    fn densities_partition_unity_and_respect_automorphisms() {
        let pattern3 = c4_pattern(3);
        let family = enumerate_free(2, &c4_pattern(2)).unwrap();
        let g = CubeGraph::spanning(3, &[(0, 1), (1, 3), (4, 6), (2, 6), (5, 7)]).unwrap();
        assert!(!pattern3.violated_by(g.edge_set()));
        let total: BigRational = family
            .members()
            .iter()
            .map(|h| subgraph_density(h, &g).unwrap())
            .sum();
        assert!(total.is_one());

        let aut = &automorphisms(3).unwrap()[17];
        let image = apply_automorphism(aut, &g).unwrap();
        for h in family.members() {
            assert_eq!(
                subgraph_density(h, &g).unwrap(),
                subgraph_density(h, &image).unwrap()
            );
        }
    }

    #[test]
    fn family_file_round_trip() {
        let family = enumerate_free(3, &c4_pattern(3)).unwrap();
        let text = write_family(&family);
        let parsed = parse_family(&text).unwrap();
        assert_eq!(parsed.keys(), family.keys());
        assert_eq!(write_family(&parsed), text);
    }
}
