//! The poset analogue: middle three layers of the Boolean lattice,
//! diamond-free families, flag shapes with black/white colorings, exact
//! density tables and the ℚ(√2) hand certificate.
//!
//! Families are membership patterns over the three layers; flag shapes are
//! sub-posets with a labeled part, given as data so alternates can be tried.
//! Containment is the subposet convention: a diamond means four distinct
//! members `a < b, c < d` with `b, c` between, not necessarily induced.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::flags::{DensityTable, PairRow};
use crate::scalar::{rat, QuadRat};
use crate::{Error, Result};

/// A subset of the ground set `[m]` as a bitmask.
pub type ElemMask = u16;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Layer {
    A,
    B,
    C,
}

impl Layer {
    fn flipped(self) -> Layer {
        match self {
            Layer::A => Layer::C,
            Layer::B => Layer::B,
            Layer::C => Layer::A,
        }
    }
}

/// The middle three layers of the Boolean lattice over `[m]`, viewed as a
/// layered Hasse graph. Elements are ordered layer A, then B, then C,
/// ascending by mask within each layer.
#[derive(Clone, Debug)]
pub struct MidPoset {
    m: usize,
    elements: Vec<ElemMask>,
    layers: Vec<Layer>,
    /// Hasse neighbor indices per element.
    adj: Vec<Vec<usize>>,
    /// Membership masks of the diamonds (intervals `[a, d]` with `|d\a|=2`).
    diamonds: Vec<u32>,
}

/// Enumerates subsets of `[m]` of the given size, ascending.
fn subsets_of_size(m: usize, size: usize) -> Vec<ElemMask> {
    (0..1u32 << m)
        .map(|x| x as ElemMask)
        .filter(|x| x.count_ones() as usize == size)
        .collect()
}

pub fn mid_poset(m: usize) -> Result<MidPoset> {
    if m != 2 && m != 4 {
        return Err(Error::UnsupportedGround(m));
    }
    let mid = m / 2;
    let mut elements = Vec::new();
    let mut layers = Vec::new();
    for (size, layer) in [(mid - 1, Layer::A), (mid, Layer::B), (mid + 1, Layer::C)] {
        for e in subsets_of_size(m, size) {
            elements.push(e);
            layers.push(layer);
        }
    }
    let n = elements.len();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if i != j && hasse_edge(elements[i], elements[j]) {
                adj[i].push(j);
            }
        }
    }
    let mut diamonds = Vec::new();
    for (ai, &a) in elements.iter().enumerate() {
        if layers[ai] != Layer::A {
            continue;
        }
        for (di, &d) in elements.iter().enumerate() {
            if layers[di] != Layer::C || a & !d != 0 {
                continue;
            }
            let mut mask = (1u32 << ai) | (1u32 << di);
            for (bi, &b) in elements.iter().enumerate() {
                if layers[bi] == Layer::B && a & !b == 0 && b & !d == 0 {
                    mask |= 1 << bi;
                }
            }
            diamonds.push(mask);
        }
    }
    Ok(MidPoset {
        m,
        elements,
        layers,
        adj,
        diamonds,
    })
}

fn hasse_edge(x: ElemMask, y: ElemMask) -> bool {
    let (lo, hi) = if x.count_ones() < y.count_ones() {
        (x, y)
    } else {
        (y, x)
    };
    lo & !hi == 0 && (hi & !lo).count_ones() == 1
}

impl MidPoset {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[ElemMask] {
        &self.elements
    }

    pub fn layer(&self, idx: usize) -> Layer {
        self.layers[idx]
    }

    pub fn layer_sizes(&self) -> (usize, usize, usize) {
        let count = |l: Layer| self.layers.iter().filter(|&&x| x == l).count();
        (count(Layer::A), count(Layer::B), count(Layer::C))
    }

    pub fn hasse_edge_count(&self) -> usize {
        self.adj.iter().map(|n| n.len()).sum::<usize>() / 2
    }

    pub fn index_of(&self, e: ElemMask) -> Option<usize> {
        self.elements.iter().position(|&x| x == e)
    }

    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.adj[i].contains(&j)
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    /// Element-index permutations of the chosen symmetry group.
    pub fn group_perms(&self, group: MidGroup) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let ground: Vec<usize> = (0..self.m).collect();
        let mut perm = Vec::new();
        let mut used = vec![false; self.m];
        let mut ground_perms = Vec::new();
        fn rec(
            n: usize,
            perm: &mut Vec<usize>,
            used: &mut [bool],
            out: &mut Vec<Vec<usize>>,
        ) {
            if perm.len() == n {
                out.push(perm.clone());
                return;
            }
            for i in 0..n {
                if !used[i] {
                    used[i] = true;
                    perm.push(i);
                    rec(n, perm, used, out);
                    perm.pop();
                    used[i] = false;
                }
            }
        }
        rec(ground.len(), &mut perm, &mut used, &mut ground_perms);
        let apply_mask = |mask: ElemMask, perm: &[usize]| -> ElemMask {
            let mut out = 0;
            for (i, &pi) in perm.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    out |= 1 << pi;
                }
            }
            out
        };
        let full: ElemMask = ((1u32 << self.m) - 1) as ElemMask;
        for gp in &ground_perms {
            let elem_perm: Vec<usize> = self
                .elements
                .iter()
                .map(|&e| self.index_of(apply_mask(e, gp)).expect("closed"))
                .collect();
            out.push(elem_perm);
            if group == MidGroup::PermsAndFlip {
                let flipped: Vec<usize> = self
                    .elements
                    .iter()
                    .map(|&e| {
                        self.index_of(apply_mask(e, gp) ^ full).expect("closed")
                    })
                    .collect();
                out.push(flipped);
            }
        }
        out
    }
}

/// The symmetry group used for deduplication: ground-set permutations,
/// optionally extended by the top-bottom complementation flip.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum MidGroup {
    Perms,
    PermsAndFlip,
}

impl MidGroup {
    pub fn label(self) -> &'static str {
        match self {
            MidGroup::Perms => "perms",
            MidGroup::PermsAndFlip => "perms+flip",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "perms" => Ok(MidGroup::Perms),
            "perms+flip" => Ok(MidGroup::PermsAndFlip),
            other => Err(Error::Parse(format!("unknown group {other:?}"))),
        }
    }
}

/// A membership pattern over the poset: bit `i` set means element `i` is
/// in the family (drawn black).
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct MidFamily {
    black: u32,
}

impl MidFamily {
    pub fn new(black: u32) -> Self {
        MidFamily { black }
    }

    pub fn from_indices(indices: &[usize]) -> Self {
        MidFamily {
            black: indices.iter().fold(0, |acc, &i| acc | (1 << i)),
        }
    }

    pub fn black(&self) -> u32 {
        self.black
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.black >> idx & 1 == 1
    }

    /// Diamond-freeness as a subposet: in three layers every diamond
    /// `a < b, c < d` sits inside an interval `[a, d]` with its two middle
    /// elements, so it suffices that no interval has both endpoints and at
    /// least two middles black.
    pub fn is_q2_free(&self, poset: &MidPoset) -> bool {
        poset.diamonds.iter().all(|&dia| {
            let present = dia & self.black;
            let (mut endpoints_black, mut total_endpoints) = (0, 0);
            let mut black_middles = 0;
            for idx in 0..poset.element_count() {
                if dia >> idx & 1 == 0 {
                    continue;
                }
                match poset.layer(idx) {
                    Layer::B => {
                        if present >> idx & 1 == 1 {
                            black_middles += 1;
                        }
                    }
                    _ => {
                        total_endpoints += 1;
                        if present >> idx & 1 == 1 {
                            endpoints_black += 1;
                        }
                    }
                }
            }
            !(endpoints_black == total_endpoints && black_middles >= 2)
        })
    }

    pub fn canonical(&self, perms: &[Vec<usize>]) -> u32 {
        perms
            .iter()
            .map(|p| {
                let mut out = 0u32;
                for i in 0..p.len() {
                    if self.black >> i & 1 == 1 {
                        out |= 1 << p[i];
                    }
                }
                out
            })
            .min()
            .unwrap_or(self.black)
    }
}

/// All diamond-free membership patterns up to the group, as canonical
/// (minimal-mask) representatives in ascending order.
pub fn enumerate_q2free(m: usize, group: MidGroup) -> Result<Vec<MidFamily>> {
    let poset = mid_poset(m)?;
    let perms = poset.group_perms(group);
    let n = poset.element_count();
    let mut out = Vec::new();
    for black in 0..1u32 << n {
        let fam = MidFamily::new(black);
        if !fam.is_q2_free(&poset) {
            continue;
        }
        if fam.canonical(&perms) == black {
            out.push(fam);
        }
    }
    Ok(out)
}

/// Layer-normalized density `|G∩A|/|A| + |G∩B|/|B| + |G∩C|/|C|`, in [0, 3].
pub fn mid_density(poset: &MidPoset, fam: &MidFamily) -> BigRational {
    let (a, b, c) = poset.layer_sizes();
    let mut counts = [0i64; 3];
    for idx in 0..poset.element_count() {
        if fam.contains(idx) {
            match poset.layer(idx) {
                Layer::A => counts[0] += 1,
                Layer::B => counts[1] += 1,
                Layer::C => counts[2] += 1,
            }
        }
    }
    rat(counts[0], a as i64) + rat(counts[1], b as i64) + rat(counts[2], c as i64)
}

/// A labeled Hasse sub-shape: a subset of the poset's elements with its
/// induced Hasse edges and a designated labeled part.
#[derive(Clone, Debug)]
pub struct MidShape {
    m: usize,
    /// Poset element index per shape vertex, ascending.
    vert_elems: Vec<usize>,
    layers: Vec<Layer>,
    edges: Vec<(usize, usize)>,
    /// Positions (into `vert_elems`) of the labeled vertices, in order.
    labeled: Vec<usize>,
}

impl MidShape {
    pub fn new(poset: &MidPoset, elems: &[usize], labeled_elems: &[usize]) -> Result<Self> {
        let mut vert_elems: Vec<usize> = elems.to_vec();
        vert_elems.sort_unstable();
        vert_elems.dedup();
        if vert_elems.len() != elems.len() {
            return Err(Error::BadInput("repeated shape element".into()));
        }
        for &e in &vert_elems {
            if e >= poset.element_count() {
                return Err(Error::BadInput(format!("shape element {e} out of range")));
            }
        }
        let layers = vert_elems.iter().map(|&e| poset.layer(e)).collect();
        let mut edges = Vec::new();
        for i in 0..vert_elems.len() {
            for j in i + 1..vert_elems.len() {
                if poset.adjacent(vert_elems[i], vert_elems[j]) {
                    edges.push((i, j));
                }
            }
        }
        let labeled: Vec<usize> = labeled_elems
            .iter()
            .map(|&e| {
                vert_elems
                    .iter()
                    .position(|&v| v == e)
                    .ok_or_else(|| Error::BadInput(format!("label {e} not a shape element")))
            })
            .collect::<Result<_>>()?;
        Ok(MidShape {
            m: poset.m(),
            vert_elems,
            layers,
            edges,
            labeled,
        })
    }

    pub fn vert_count(&self) -> usize {
        self.vert_elems.len()
    }

    pub fn labeled(&self) -> &[usize] {
        &self.labeled
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// `layers:...; black:ELEMS; labels:ELEMS` with poset element indices.
    pub fn to_line(&self, poset: &MidPoset) -> String {
        let (a, b, c) = poset.layer_sizes();
        let blacks: Vec<String> = self.vert_elems.iter().map(|e| e.to_string()).collect();
        let labels: Vec<String> = self
            .labeled
            .iter()
            .map(|&p| self.vert_elems[p].to_string())
            .collect();
        format!(
            "layers:{a},{b},{c}; black:{}; labels:{}",
            blacks.join(","),
            labels.join(",")
        )
    }

    pub fn parse_line(poset: &MidPoset, line: &str) -> Result<Self> {
        let mut elems = Vec::new();
        let mut labels = Vec::new();
        for part in line.split(';') {
            let part = part.trim();
            if let Some(rest) = part.strip_prefix("black:") {
                elems = parse_index_list(rest)?;
            } else if let Some(rest) = part.strip_prefix("labels:") {
                labels = parse_index_list(rest)?;
            } else if let Some(rest) = part.strip_prefix("layers:") {
                let sizes: Vec<usize> = parse_index_list(rest)?;
                let (a, b, c) = poset.layer_sizes();
                if sizes != [a, b, c] {
                    return Err(Error::Parse(format!(
                        "layer sizes {sizes:?} do not match M_{}",
                        poset.m()
                    )));
                }
            }
        }
        MidShape::new(poset, &elems, &labels)
    }

    /// Shape automorphisms fixing the labeled vertices pointwise, with or
    /// without the global layer flip, as vertex permutations.
    fn label_fixing_automorphisms(&self) -> Vec<Vec<usize>> {
        let n = self.vert_count();
        let mut out = Vec::new();
        let mut assign = vec![usize::MAX; n];
        self.search_auto(&mut assign, 0, &mut out);
        out
    }

    fn search_auto(&self, assign: &mut Vec<usize>, v: usize, out: &mut Vec<Vec<usize>>) {
        let n = self.vert_count();
        if v == n {
            for flip in [false, true] {
                let ok = (0..n).all(|i| {
                    let target_layer = if flip {
                        self.layers[i].flipped()
                    } else {
                        self.layers[i]
                    };
                    self.layers[assign[i]] == target_layer
                });
                if ok {
                    out.push(assign.clone());
                    break;
                }
            }
            return;
        }
        if self.labeled.contains(&v) {
            assign[v] = v;
            if self.consistent(assign, v) {
                self.search_auto(assign, v + 1, out);
            }
            assign[v] = usize::MAX;
            return;
        }
        for cand in 0..n {
            if assign[..v].contains(&cand) || self.labeled.contains(&cand) {
                continue;
            }
            assign[v] = cand;
            if self.consistent(assign, v) {
                self.search_auto(assign, v + 1, out);
            }
            assign[v] = usize::MAX;
        }
    }

    fn consistent(&self, assign: &[usize], upto: usize) -> bool {
        for &(x, y) in &self.edges {
            if x <= upto && y <= upto && assign[x] != usize::MAX && assign[y] != usize::MAX {
                let mapped = (assign[x].min(assign[y]), assign[x].max(assign[y]));
                if !self.edges.contains(&mapped) {
                    return false;
                }
            }
        }
        // Edge count is finite and the map is injective, so preserving all
        // edges forward suffices at the leaf; partial checks only prune.
        true
    }

    /// All embeddings of the whole shape into the poset that extend the
    /// given placement of the labeled part, with a globally consistent
    /// straight or flipped layer orientation.
    fn embeddings_extending(
        &self,
        poset: &MidPoset,
        placement: &[usize],
    ) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        for flip in [false, true] {
            let consistent = self
                .labeled
                .iter()
                .zip(placement.iter())
                .all(|(&pos, &target)| {
                    let want = if flip {
                        self.layers[pos].flipped()
                    } else {
                        self.layers[pos]
                    };
                    poset.layer(target) == want
                });
            if !consistent {
                continue;
            }
            let n = self.vert_count();
            let mut assign = vec![usize::MAX; n];
            for (&pos, &target) in self.labeled.iter().zip(placement.iter()) {
                assign[pos] = target;
            }
            if self.labeled.len() != placement.len()
                || has_dup(placement)
            {
                continue;
            }
            // Labeled images must already respect shape edges.
            if !self.edges_ok(poset, &assign) {
                continue;
            }
            self.extend(poset, flip, &mut assign, 0, &mut out);
            // A shape with a non-middle vertex pins its orientation, so the
            // two passes cannot produce the same embedding twice.
            if self.layers.iter().all(|&l| l == Layer::B) {
                break;
            }
        }
        out
    }

    fn edges_ok(&self, poset: &MidPoset, assign: &[usize]) -> bool {
        self.edges.iter().all(|&(x, y)| {
            assign[x] == usize::MAX
                || assign[y] == usize::MAX
                || poset.adjacent(assign[x], assign[y])
        })
    }

    fn extend(
        &self,
        poset: &MidPoset,
        flip: bool,
        assign: &mut Vec<usize>,
        from: usize,
        out: &mut Vec<Vec<usize>>,
    ) {
        let n = self.vert_count();
        let next = (from..n).find(|&v| assign[v] == usize::MAX);
        let Some(v) = next else {
            out.push(assign.clone());
            return;
        };
        let want = if flip {
            self.layers[v].flipped()
        } else {
            self.layers[v]
        };
        for target in 0..poset.element_count() {
            if poset.layer(target) != want || assign.contains(&target) {
                continue;
            }
            let ok = self.edges.iter().all(|&(x, y)| {
                let (a, b) = (assign[x], assign[y]);
                let (a, b) = if x == v { (target, b) } else { (a, b) };
                let (a, b) = if y == v { (a, target) } else { (a, b) };
                a == usize::MAX || b == usize::MAX || poset.adjacent(a, b)
            });
            if !ok {
                continue;
            }
            assign[v] = target;
            self.extend(poset, flip, assign, v + 1, out);
            assign[v] = usize::MAX;
        }
    }

    /// All placements of the labeled part: injective, layer-consistent in
    /// either orientation, shape edges among labeled vertices preserved.
    pub fn label_placements(&self, poset: &MidPoset) -> Vec<Vec<usize>> {
        let k = self.labeled.len();
        let mut out = Vec::new();
        for flip in [false, true] {
            let mut cur = vec![usize::MAX; k];
            self.place_labels(poset, flip, &mut cur, 0, &mut out);
            let any_oriented = self
                .labeled
                .iter()
                .any(|&pos| self.layers[pos] != Layer::B);
            if !any_oriented {
                break;
            }
        }
        out
    }

    fn place_labels(
        &self,
        poset: &MidPoset,
        flip: bool,
        cur: &mut Vec<usize>,
        i: usize,
        out: &mut Vec<Vec<usize>>,
    ) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        let pos = self.labeled[i];
        let want = if flip {
            self.layers[pos].flipped()
        } else {
            self.layers[pos]
        };
        for target in 0..poset.element_count() {
            if poset.layer(target) != want || cur[..i].contains(&target) {
                continue;
            }
            let ok = (0..i).all(|j| {
                let pos_j = self.labeled[j];
                let edge = self
                    .edges
                    .contains(&(pos.min(pos_j), pos.max(pos_j)));
                !edge || poset.adjacent(target, cur[j])
            });
            if ok {
                cur[i] = target;
                self.place_labels(poset, flip, cur, i + 1, out);
                cur[i] = usize::MAX;
            }
        }
    }

    /// Diamonds fully inside the shape, as colorings masks.
    fn shape_diamond_masks(&self) -> Vec<u32> {
        let n = self.vert_count();
        let mut out = Vec::new();
        for a in 0..n {
            if self.layers[a] != Layer::A {
                continue;
            }
            for d in 0..n {
                if self.layers[d] != Layer::C {
                    continue;
                }
                let middles: Vec<usize> = (0..n)
                    .filter(|&b| {
                        self.layers[b] == Layer::B
                            && self.edges.contains(&(a.min(b), a.max(b)))
                            && self.edges.contains(&(b.min(d), b.max(d)))
                    })
                    .collect();
                for x in 0..middles.len() {
                    for y in x + 1..middles.len() {
                        out.push(
                            (1 << a) | (1 << d) | (1 << middles[x]) | (1 << middles[y]),
                        );
                    }
                }
            }
        }
        out
    }
}

fn has_dup(xs: &[usize]) -> bool {
    for i in 0..xs.len() {
        if xs[i + 1..].contains(&xs[i]) {
            return true;
        }
    }
    false
}

fn parse_index_list(s: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for tok in s.split(',') {
        let tok = tok.trim();
        if tok.is_empty() {
            continue;
        }
        out.push(
            tok.parse::<usize>()
                .map_err(|_e| Error::Parse(format!("bad index {tok:?}")))?,
        );
    }
    Ok(out)
}

/// A flag family: a shape plus its black/white colorings, deduplicated up
/// to label-fixing shape automorphisms and pruned of colorings whose black
/// part already contains a diamond.
#[derive(Clone, Debug)]
pub struct MidFlagFamily {
    shape: MidShape,
    /// Orbit representatives (minimal masks), ascending: the flags.
    colorings: Vec<u32>,
    /// Coloring mask -> flag index, `None` for pruned or unlisted orbits.
    orbit_of: Vec<Option<usize>>,
}

impl MidFlagFamily {
    /// Every coloring of the shape, pruned and deduplicated.
    pub fn all_colorings(shape: MidShape) -> MidFlagFamily {
        let autos = shape.label_fixing_automorphisms();
        let diamonds = shape.shape_diamond_masks();
        let n = shape.vert_count();
        let total = 1u32 << n;
        let mut reps: Vec<u32> = Vec::new();
        let mut orbit_of: Vec<Option<usize>> = vec![None; total as usize];
        for mask in 0..total {
            let rep = coloring_orbit_rep(mask, &autos);
            if rep != mask {
                continue;
            }
            if diamonds.iter().any(|d| d & mask == *d) {
                continue;
            }
            reps.push(mask);
        }
        for mask in 0..total {
            let rep = coloring_orbit_rep(mask, &autos);
            if let Ok(idx) = reps.binary_search(&rep) {
                orbit_of[mask as usize] = Some(idx);
            }
        }
        MidFlagFamily {
            shape,
            colorings: reps,
            orbit_of,
        }
    }

    /// An explicit flag list (orbit representatives of the given masks).
    pub fn explicit(shape: MidShape, masks: &[u32]) -> Result<MidFlagFamily> {
        let autos = shape.label_fixing_automorphisms();
        let n = shape.vert_count();
        let total = 1u32 << n;
        let mut reps = Vec::new();
        for &m in masks {
            if m >= total {
                return Err(Error::BadInput(format!("coloring {m:#b} out of range")));
            }
            let rep = coloring_orbit_rep(m, &autos);
            if reps.contains(&rep) {
                return Err(Error::BadInput(
                    "two listed colorings are the same flag".into(),
                ));
            }
            reps.push(rep);
        }
        let mut orbit_of: Vec<Option<usize>> = vec![None; total as usize];
        for mask in 0..total {
            let rep = coloring_orbit_rep(mask, &autos);
            if let Some(idx) = reps.iter().position(|&r| r == rep) {
                orbit_of[mask as usize] = Some(idx);
            }
        }
        Ok(MidFlagFamily {
            shape,
            colorings: reps,
            orbit_of,
        })
    }

    pub fn shape(&self) -> &MidShape {
        &self.shape
    }

    pub fn flag_count(&self) -> usize {
        self.colorings.len()
    }

    pub fn colorings(&self) -> &[u32] {
        &self.colorings
    }

    pub fn flag_line(&self, idx: usize) -> String {
        let mask = self.colorings[idx];
        let blacks: Vec<String> = (0..self.shape.vert_count())
            .filter(|&v| mask >> v & 1 == 1)
            .map(|v| v.to_string())
            .collect();
        let labels: Vec<String> = self.shape.labeled().iter().map(|p| p.to_string()).collect();
        format!(
            "shapeverts:{}; black:{}; labels:{}",
            self.shape.vert_count(),
            blacks.join(","),
            labels.join(",")
        )
    }
}

fn coloring_orbit_rep(mask: u32, autos: &[Vec<usize>]) -> u32 {
    autos
        .iter()
        .map(|perm| {
            let mut out = 0u32;
            for (v, &img) in perm.iter().enumerate() {
                if mask >> v & 1 == 1 {
                    out |= 1 << img;
                }
            }
            out
        })
        .min()
        .unwrap_or(mask)
}

/// Line-format export of a family list, recording the symmetry group that
/// produced it.
pub fn write_mid_families(poset: &MidPoset, group: MidGroup, families: &[MidFamily]) -> String {
    let (a, b, c) = poset.layer_sizes();
    let mut out = format!(
        "# cubeflag midlayers m={} group={} count={}\n",
        poset.m(),
        group.label(),
        families.len()
    );
    for f in families {
        let blacks: Vec<String> = (0..poset.element_count())
            .filter(|&i| f.contains(i))
            .map(|i| i.to_string())
            .collect();
        out.push_str(&format!(
            "layers:{a},{b},{c}; black:{}; labels:\n",
            blacks.join(",")
        ));
    }
    out
}

pub fn parse_mid_families(text: &str) -> Result<(usize, Vec<MidFamily>)> {
    let mut m = None;
    let mut families = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            for tok in rest.split_whitespace() {
                if let Some(v) = tok.strip_prefix("m=") {
                    m = Some(
                        v.parse::<usize>()
                            .map_err(|_e| Error::Parse("bad m in header".into()))?,
                    );
                }
            }
            continue;
        }
        let mut blacks = Vec::new();
        for part in line.split(';') {
            let part = part.trim();
            if let Some(rest) = part.strip_prefix("black:") {
                blacks = parse_index_list(rest)?;
            }
        }
        families.push(MidFamily::from_indices(&blacks));
    }
    let m = m.ok_or_else(|| Error::Parse("family file lacks an m= header".into()))?;
    Ok((m, families))
}

fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Exact pair-density tables for the poset setting: one per flag family.
/// For each placement of the labeled part, two random embeddings of the
/// shape sharing exactly the labeled image are drawn; the entry is the
/// probability that their colorings match the flag pair.
pub fn mid_density_table(
    flag_families: &[MidFlagFamily],
    poset: &MidPoset,
    group: MidGroup,
    families: &[MidFamily],
) -> Result<Vec<DensityTable>> {
    let digest = sha256_hex(write_mid_families(poset, group, families).as_bytes());
    let densities: Vec<BigRational> = families.iter().map(|f| mid_density(poset, f)).collect();
    let mut out = Vec::new();
    for family in flag_families {
        if family.shape().m() != poset.m() {
            return Err(Error::BadInput(
                "flag shape and family poset use different ground sizes".into(),
            ));
        }
        let l = family.flag_count();
        if l == 0 {
            return Err(Error::BadInput("flag family has no flags".into()));
        }
        let shape = family.shape();
        let placements = shape.label_placements(poset);
        if placements.is_empty() {
            return Err(Error::BadInput(
                "flag shape has no label placements in the poset".into(),
            ));
        }
        // Embeddings and admissible ordered pairs per placement are
        // family-independent; precompute them.
        struct PerTheta {
            embeddings: Vec<Vec<usize>>,
            pairs: Vec<(usize, usize)>,
        }
        let mut per_theta = Vec::with_capacity(placements.len());
        for placement in &placements {
            let embeddings = shape.embeddings_extending(poset, placement);
            let unlabeled_images: Vec<Vec<usize>> = embeddings
                .iter()
                .map(|emb| {
                    (0..shape.vert_count())
                        .filter(|v| !shape.labeled().contains(v))
                        .map(|v| emb[v])
                        .collect()
                })
                .collect();
            let mut pairs = Vec::new();
            for (i, u1) in unlabeled_images.iter().enumerate() {
                for (j, u2) in unlabeled_images.iter().enumerate() {
                    let disjoint = u1.iter().all(|x| !u2.contains(x));
                    if disjoint {
                        pairs.push((i, j));
                    }
                }
            }
            per_theta.push(PerTheta {
                embeddings,
                pairs,
            });
        }
        let theta_count = placements.len() as i64;

        let n_rows = l * (l + 1) / 2;
        let mut rows: Vec<PairRow> = Vec::with_capacity(n_rows);
        for i in 0..l {
            for j in i..l {
                rows.push(PairRow::new(i, j));
            }
        }
        for (col, fam) in families.iter().enumerate() {
            let mut acc: BTreeMap<usize, BigRational> = BTreeMap::new();
            for theta in &per_theta {
                if theta.pairs.is_empty() {
                    continue;
                }
                let flag_of: Vec<Option<usize>> = theta
                    .embeddings
                    .iter()
                    .map(|emb| {
                        let mut mask = 0u32;
                        for (v, &target) in emb.iter().enumerate() {
                            if fam.contains(target) {
                                mask |= 1 << v;
                            }
                        }
                        family.orbit_of[mask as usize]
                    })
                    .collect();
                let mut counts: BTreeMap<usize, i64> = BTreeMap::new();
                for &(e1, e2) in &theta.pairs {
                    if let (Some(i1), Some(i2)) = (flag_of[e1], flag_of[e2]) {
                        if i1 <= i2 {
                            *counts
                                .entry(crate::flags::pair_row_index(l, i1, i2))
                                .or_insert(0) += 1;
                        }
                    }
                }
                let den = theta.pairs.len() as i64;
                for (row_idx, count) in counts {
                    let add = BigRational::new(
                        BigInt::from(count),
                        BigInt::from(den * theta_count),
                    );
                    acc.entry(row_idx)
                        .and_modify(|v| *v += add.clone())
                        .or_insert(add);
                }
            }
            for (row_idx, value) in acc {
                if !num_traits::Zero::is_zero(&value) {
                    rows[row_idx].push_value(col, value);
                }
            }
        }
        let flag_lines: Vec<String> = (0..l).map(|i| family.flag_line(i)).collect();
        out.push(DensityTable::from_parts(
            shape.to_line(poset),
            flag_lines,
            families.len(),
            digest.clone(),
            densities.clone(),
            rows,
        ));
    }
    Ok(out)
}

/// The two-flag family of the hand proof: a labeled top vertex over one
/// middle vertex, colored (black, white) and (black, black).
pub fn hand_flag_family(poset: &MidPoset) -> Result<MidFlagFamily> {
    if poset.m() != 2 {
        return Err(Error::UnsupportedGround(poset.m()));
    }
    // Elements of M_2: 0 = {} (A), 1 = {1}, 2 = {2} (B), 3 = {1,2} (C).
    let shape = MidShape::new(poset, &[1, 3], &[3])?;
    // Shape vertex order is element-ascending: position 0 = middle vertex,
    // position 1 = labeled top. F_0: labeled black only; F_1: both black.
    MidFlagFamily::explicit(shape, &[0b10, 0b11])
}

/// The matrix of the hand certificate, entries in ℚ(√2).
pub fn hand_matrix() -> crate::certify::SymMatrix<QuadRat> {
    let mut m = crate::certify::SymMatrix::<QuadRat>::zeros(2);
    m.set(0, 0, QuadRat::new(rat(-1, 2), rat(1, 2)));
    m.set(0, 1, QuadRat::new(rat(-1, 1), rat(1, 2)));
    m.set(1, 1, QuadRat::new(rat(-1, 1), rat(1, 1)));
    m
}

/// The bound value the hand certificate reaches: `(3 + sqrt 2) / 2`.
pub fn hand_bound() -> QuadRat {
    QuadRat::new(rat(3, 2), rat(1, 2))
}

/// Default flag shapes for the computer proof on `M_4`: a diamond with a
/// labeled middle vertex, and the full up-closure of a bottom vertex with
/// a labeled middle-plus-two-tops cherry.
pub fn default_m4_shapes(poset: &MidPoset) -> Result<Vec<MidShape>> {
    if poset.m() != 4 {
        return Err(Error::UnsupportedGround(poset.m()));
    }
    let idx = |mask: ElemMask| -> Result<usize> {
        poset
            .index_of(mask)
            .ok_or_else(|| Error::BadInput(format!("mask {mask:#b} not in poset")))
    };
    // Diamond over ground {1}: {1} < {1,2}, {1,3} < {1,2,3}.
    let diamond = MidShape::new(
        poset,
        &[idx(0b0001)?, idx(0b0011)?, idx(0b0101)?, idx(0b0111)?],
        &[idx(0b0011)?],
    )?;
    // Up-closure of {1}: three middles, three tops; labeled cherry
    // {1,2} < {1,2,3}, {1,2,4}.
    let closure = MidShape::new(
        poset,
        &[
            idx(0b0001)?,
            idx(0b0011)?,
            idx(0b0101)?,
            idx(0b1001)?,
            idx(0b0111)?,
            idx(0b1011)?,
            idx(0b1101)?,
        ],
        &[idx(0b0011)?, idx(0b0111)?, idx(0b1011)?],
    )?;
    Ok(vec![diamond, closure])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::{certified_bound, psd_check_exact};
    use crate::scalar::CertScalar;
    use num_traits::{One, Zero};

    #[test]
    fn poset_shapes() {
        let p2 = mid_poset(2).unwrap();
        assert_eq!(p2.layer_sizes(), (1, 2, 1));
        assert_eq!(p2.hasse_edge_count(), 4);
        let p4 = mid_poset(4).unwrap();
        assert_eq!(p4.layer_sizes(), (4, 6, 4));
        assert_eq!(p4.element_count(), 14);
        assert!(mid_poset(3).is_err());
    }

    #[test]
    fn q2free_counts() {
        assert_eq!(enumerate_q2free(2, MidGroup::Perms).unwrap().len(), 11);
        // The full pattern is the diamond and must be excluded.
        let p2 = mid_poset(2).unwrap();
        assert!(!MidFamily::new(0b1111).is_q2_free(&p2));
    }

    #[test]
    fn burnside_cross_check_m2() {
        // 16 patterns, 8 fixed by the middle swap, one diamond excluded:
        // (15 + 7) / 2 = 11 classes.
        let p2 = mid_poset(2).unwrap();
        let perms = p2.group_perms(MidGroup::Perms);
        assert_eq!(perms.len(), 2);
        let free: Vec<u32> = (0..16u32)
            .filter(|&b| MidFamily::new(b).is_q2_free(&p2))
            .collect();
        assert_eq!(free.len(), 15);
        let swap = &perms[1];
        let fixed = free
            .iter()
            .filter(|&&b| {
                let mut img = 0u32;
                for i in 0..4 {
                    if b >> i & 1 == 1 {
                        img |= 1 << swap[i];
                    }
                }
                img == b
            })
            .count();
        assert_eq!(fixed, 7);
        assert_eq!((free.len() + fixed) / 2, 11);
    }

    fn figure_families(p2: &MidPoset) -> Vec<MidFamily> {
        // The published list: indices into (A={}, B={1},{2}, C={1,2}).
        let _layers = p2.layer_sizes();
        vec![
            MidFamily::from_indices(&[]),
            MidFamily::from_indices(&[3]),
            MidFamily::from_indices(&[0]),
            MidFamily::from_indices(&[1]),
            MidFamily::from_indices(&[1, 2]),
            MidFamily::from_indices(&[3, 1]),
            MidFamily::from_indices(&[0, 1]),
            MidFamily::from_indices(&[0, 3]),
            MidFamily::from_indices(&[0, 3, 1]),
            MidFamily::from_indices(&[0, 1, 2]),
            MidFamily::from_indices(&[3, 1, 2]),
        ]
    }

    #[test]
    fn densities_match_published_row() {
        let p2 = mid_poset(2).unwrap();
        let expected = [
            rat(0, 1),
            rat(1, 1),
            rat(1, 1),
            rat(1, 2),
            rat(1, 1),
            rat(3, 2),
            rat(3, 2),
            rat(2, 1),
            rat(5, 2),
            rat(2, 1),
            rat(2, 1),
        ];
        for (fam, want) in figure_families(&p2).iter().zip(expected.iter()) {
            assert_eq!(mid_density(&p2, fam), *want);
        }
        let full = MidFamily::new((1 << 14) - 1);
        let p4 = mid_poset(4).unwrap();
        assert_eq!(mid_density(&p4, &full), rat(3, 1));
    }

    #[test]
    fn published_table_reproduced() {
        let p2 = mid_poset(2).unwrap();
        let group = MidGroup::Perms;
        let families = figure_families(&p2);
        let flags = hand_flag_family(&p2).unwrap();
        let tables = mid_density_table(&[flags], &p2, group, &families).unwrap();
        let t = &tables[0];
        let expected: [[BigRational; 11]; 3] = [
            [
                rat(0, 1), rat(1, 2), rat(1, 2), rat(0, 1), rat(0, 1), rat(0, 1),
                rat(0, 1), rat(1, 1), rat(0, 1), rat(0, 1), rat(0, 1),
            ],
            [
                rat(0, 1), rat(0, 1), rat(0, 1), rat(0, 1), rat(0, 1), rat(1, 4),
                rat(1, 4), rat(0, 1), rat(1, 2), rat(0, 1), rat(0, 1),
            ],
            [
                rat(0, 1), rat(0, 1), rat(0, 1), rat(0, 1), rat(0, 1), rat(0, 1),
                rat(0, 1), rat(0, 1), rat(0, 1), rat(1, 2), rat(1, 2),
            ],
        ];
        for (row_pos, &(i, j)) in [(0usize, 0usize), (0, 1), (1, 1)].iter().enumerate() {
            for col in 0..11 {
                assert_eq!(
                    t.entry(i, j, col),
                    expected[row_pos][col],
                    "row {row_pos} col {col}"
                );
            }
        }
    }

    #[test]
    fn hand_certificate_gives_exact_bound() {
        let p2 = mid_poset(2).unwrap();
        let group = MidGroup::Perms;
        let families = figure_families(&p2);
        let flags = hand_flag_family(&p2).unwrap();
        let tables = mid_density_table(&[flags], &p2, group, &families).unwrap();
        let m = hand_matrix();
        match psd_check_exact(&m) {
            crate::certify::PsdVerdict::Psd(t) => assert_eq!(t.rank, 1),
            crate::certify::PsdVerdict::NotPsd { .. } => panic!("hand matrix is PSD"),
        }
        let cert = certified_bound(&[m], &tables).unwrap();
        assert_eq!(cert.bound, hand_bound());
        // Attained at the published tight families H_7, H_8, H_9 (and the
        // symmetric H_10).
        for idx in [7usize, 8, 9] {
            assert!(cert.attained.contains(&idx), "H_{idx} must attain");
        }
    }

    #[test]
    fn zero_matrix_bound_is_max_density() {
        let p2 = mid_poset(2).unwrap();
        let families = figure_families(&p2);
        let flags = hand_flag_family(&p2).unwrap();
        let tables = mid_density_table(&[flags], &p2, MidGroup::Perms, &families).unwrap();
        let zero = crate::certify::SymMatrix::<BigRational>::zeros(2);
        let cert = certified_bound(&[zero], &tables).unwrap();
        assert_eq!(cert.bound, rat(5, 2));
        assert_eq!(cert.attained, vec![8]);
    }

    #[test]
    fn row_sums_partition_for_full_coloring_family() {
        // With all four colorings of the hand shape, ordered pair
        // probabilities sum to one for every family and placement set.
        let p2 = mid_poset(2).unwrap();
        let shape = MidShape::new(&p2, &[1, 3], &[3]).unwrap();
        let full = MidFlagFamily::all_colorings(shape);
        assert_eq!(full.flag_count(), 4);
        let families = figure_families(&p2);
        let tables =
            mid_density_table(&[full], &p2, MidGroup::Perms, &families).unwrap();
        let t = &tables[0];
        for col in 0..families.len() {
            let mut total = BigRational::zero();
            for row in t.rows() {
                let w = if row.i == row.j { rat(1, 1) } else { rat(2, 1) };
                total += w * row.value(col);
            }
            assert!(total.is_one(), "column {col} sums to {total}");
        }
    }

    #[test]
    fn m4_shapes_have_expected_flag_counts() {
        let p4 = mid_poset(4).unwrap();
        let shapes = default_m4_shapes(&p4).unwrap();
        let diamond = MidFlagFamily::all_colorings(shapes[0].clone());
        // 16 colorings, top-bottom swap fixes 8, minus the all-black
        // diamond class: (16 + 8) / 2 - 1 = 11.
        assert_eq!(diamond.flag_count(), 11);
        let closure = MidFlagFamily::all_colorings(shapes[1].clone());
        // 128 colorings, trivial label-fixing group, minus the 19 with an
        // all-black diamond inside.
        assert_eq!(closure.flag_count(), 109);
    }

    #[test]
    fn hand_bound_value_checks() {
        let b = hand_bound();
        assert!((CertScalar::to_f64(&b) - 2.2071067811865475).abs() < 1e-12);
    }

    #[test]
    fn family_file_round_trip() {
        let p4 = mid_poset(4).unwrap();
        let group = MidGroup::Perms;
        let families = enumerate_q2free(4, group).unwrap();
        let text = write_mid_families(&p4, group, &families);
        let (m, parsed) = parse_mid_families(&text).unwrap();
        assert_eq!(m, 4);
        assert_eq!(parsed.len(), families.len());
        assert_eq!(write_mid_families(&p4, group, &parsed), text);
    }
}
