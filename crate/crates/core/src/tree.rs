//! Tree addressing, availability subsets/multisets and the XOR code itself.
//!
//! Layers are numbered bottom-up: the leaves form layer 1 and the root is
//! layer `d`. Inside a layer, vertices are numbered from 1, left to right.
//! Internally every vertex also has a heap id (root = 1, children of `h` are
//! `2h` and `2h + 1`), which is what the flat per-vertex arrays are indexed by.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::recovery;
use crate::{Error, Result};

/// Largest supported layer count. Per-vertex arrays have `2^d` entries.
pub const MAX_LAYERS: u32 = 24;

/// A code fragment payload.
pub type Fragment = Vec<u8>;

/// Shape of the perfect binary tree with `d` layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TreeShape {
    layers: u32,
}

impl TreeShape {
    pub fn new(layers: u32) -> Result<Self> {
        if layers == 0 || layers > MAX_LAYERS {
            return Err(Error::invalid(format!(
                "layer count must be in 1..={MAX_LAYERS}, got {layers}"
            )));
        }
        Ok(TreeShape { layers })
    }

    /// Shape for `k` data fragments; `k` must be a power of two.
    pub fn from_leaves(k: u64) -> Result<Self> {
        if k == 0 || !k.is_power_of_two() {
            return Err(Error::invalid(format!("k must be a power of two, got {k}")));
        }
        TreeShape::new(k.trailing_zeros() + 1)
    }

    /// Number of layers `d`.
    pub fn layers(&self) -> u32 {
        self.layers
    }

    /// Number of leaves `k = 2^(d-1)`.
    pub fn leaves(&self) -> usize {
        1 << (self.layers - 1)
    }

    /// Total vertex count `2k - 1`.
    pub fn vertex_count(&self) -> usize {
        (1 << self.layers) - 1
    }

    /// Number of vertices in `layer`.
    pub fn layer_width(&self, layer: u32) -> usize {
        debug_assert!((1..=self.layers).contains(&layer));
        1 << (self.layers - layer)
    }

    pub fn root(&self) -> VertexId {
        VertexId::new(self.layers, 1)
    }

    pub fn contains(&self, v: VertexId) -> bool {
        (1..=self.layers).contains(&v.layer)
            && v.index >= 1
            && (v.index as usize) <= self.layer_width(v.layer)
    }

    pub fn check(&self, v: VertexId) -> Result<()> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "vertex {v} is outside a tree with {} layers",
                self.layers
            )))
        }
    }

    /// Heap id of `v`: root is 1, children of `h` are `2h` and `2h + 1`.
    pub fn heap_id(&self, v: VertexId) -> usize {
        debug_assert!(self.contains(v), "{v} not in shape with d={}", self.layers);
        (1usize << (self.layers - v.layer)) + v.index as usize - 1
    }

    pub fn vertex(&self, heap: usize) -> VertexId {
        debug_assert!(heap >= 1 && heap <= self.vertex_count());
        let depth = usize::BITS - 1 - heap.leading_zeros();
        VertexId {
            layer: self.layers - depth,
            index: (heap - (1 << depth)) as u32 + 1,
        }
    }

    /// Heap id of the first leaf; leaves occupy `first_leaf()..=vertex_count()`.
    pub fn first_leaf(&self) -> usize {
        1 << (self.layers - 1)
    }

    pub fn is_leaf_heap(&self, heap: usize) -> bool {
        heap >= self.first_leaf()
    }

    /// Layer of a heap id.
    pub fn heap_layer(&self, heap: usize) -> u32 {
        self.layers - (usize::BITS - 1 - heap.leading_zeros())
    }

    /// Heap ids of `layer`, left to right.
    pub fn layer_heaps(&self, layer: u32) -> std::ops::Range<usize> {
        let start = 1usize << (self.layers - layer);
        start..2 * start
    }

    /// Heap ids in (layer ascending, index ascending) order.
    pub fn heaps_bottom_up(&self) -> impl Iterator<Item = usize> + '_ {
        (1..=self.layers).flat_map(move |layer| self.layer_heaps(layer))
    }

    /// All vertices in (layer ascending, index ascending) order.
    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.heaps_bottom_up().map(move |h| self.vertex(h))
    }

    pub fn parent(&self, v: VertexId) -> Option<VertexId> {
        (v.layer < self.layers).then(|| VertexId::new(v.layer + 1, v.index.div_ceil(2)))
    }

    pub fn children(&self, v: VertexId) -> Option<(VertexId, VertexId)> {
        (v.layer > 1).then(|| {
            (
                VertexId::new(v.layer - 1, 2 * v.index - 1),
                VertexId::new(v.layer - 1, 2 * v.index),
            )
        })
    }

    pub fn sibling(&self, v: VertexId) -> Option<VertexId> {
        (v.layer < self.layers).then(|| VertexId::new(v.layer, ((v.index - 1) ^ 1) + 1))
    }

    /// Leaf range `[lo, hi]` (1-based leaf indices) covered by the subtree of `v`.
    pub fn leaf_span(&self, v: VertexId) -> (u32, u32) {
        let w = 1u32 << (v.layer - 1);
        ((v.index - 1) * w + 1, v.index * w)
    }
}

/// A vertex address `(layer, index)`, both 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VertexId {
    pub layer: u32,
    pub index: u32,
}

impl VertexId {
    pub const fn new(layer: u32, index: u32) -> Self {
        VertexId { layer, index }
    }

    pub const fn leaf(index: u32) -> Self {
        VertexId { layer: 1, index }
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.layer, self.index)
    }
}

impl FromStr for VertexId {
    type Err = Error;

    /// Parses `layer:index`, e.g. `1:3`.
    fn from_str(s: &str) -> Result<Self> {
        let (layer, index) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("expected layer:index, got {s:?}")))?;
        let parse = |x: &str| {
            x.trim()
                .parse::<u32>()
                .map_err(|_| Error::invalid(format!("bad vertex component {x:?} in {s:?}")))
        };
        Ok(VertexId::new(parse(layer)?, parse(index)?))
    }
}

/// Parses a comma-separated vertex list such as `3:1,1:1,1:2`.
pub fn parse_vertex_list(s: &str) -> Result<Vec<VertexId>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(str::parse)
        .collect()
}

/// A Treeplication subset: which vertices are available.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Subset {
    shape: TreeShape,
    // Indexed by heap id; slot 0 is unused.
    present: Vec<bool>,
}

impl Subset {
    pub fn empty(shape: TreeShape) -> Self {
        Subset {
            shape,
            present: vec![false; shape.vertex_count() + 1],
        }
    }

    pub fn full(shape: TreeShape) -> Self {
        let mut s = Subset::empty(shape);
        s.present[1..].fill(true);
        s
    }

    pub fn from_vertices<I>(shape: TreeShape, vertices: I) -> Result<Self>
    where
        I: IntoIterator<Item = VertexId>,
    {
        let mut s = Subset::empty(shape);
        for v in vertices {
            shape.check(v)?;
            s.present[shape.heap_id(v)] = true;
        }
        Ok(s)
    }

    /// Bit `h - 1` of `mask` marks heap id `h`. Requires `d <= 6`.
    pub fn from_mask(shape: TreeShape, mask: u64) -> Self {
        assert!(shape.vertex_count() <= 64, "mask subsets need d <= 6");
        let mut s = Subset::empty(shape);
        for h in 1..=shape.vertex_count() {
            s.present[h] = mask >> (h - 1) & 1 == 1;
        }
        s
    }

    pub fn shape(&self) -> TreeShape {
        self.shape
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.shape.contains(v) && self.present[self.shape.heap_id(v)]
    }

    pub fn contains_heap(&self, heap: usize) -> bool {
        self.present[heap]
    }

    pub fn insert(&mut self, v: VertexId) {
        let h = self.shape.heap_id(v);
        self.present[h] = true;
    }

    pub fn remove(&mut self, v: VertexId) {
        let h = self.shape.heap_id(v);
        self.present[h] = false;
    }

    pub(crate) fn set_heap(&mut self, heap: usize, present: bool) {
        self.present[heap] = present;
    }

    pub fn len(&self) -> usize {
        self.present.iter().filter(|&&p| p).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Present vertices in (layer ascending, index ascending) order.
    pub fn iter(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.shape
            .heaps_bottom_up()
            .filter(|&h| self.present[h])
            .map(|h| self.shape.vertex(h))
    }

    pub fn is_superset_of(&self, other: &Subset) -> bool {
        self.shape == other.shape
            && self
                .present
                .iter()
                .zip(&other.present)
                .all(|(&a, &b)| a || !b)
    }

    pub fn is_decodable(&self) -> bool {
        is_decodable(self)
    }
}

/// A Treeplication multiset: per-vertex multiplicities `v_{i,j}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Multiset {
    shape: TreeShape,
    // Indexed by heap id; slot 0 is unused.
    weights: Vec<u64>,
}

impl Multiset {
    pub fn empty(shape: TreeShape) -> Self {
        Multiset {
            shape,
            weights: vec![0; shape.vertex_count() + 1],
        }
    }

    /// Builds a multiset from per-layer weight rows, layer 1 (leaves) first.
    pub fn from_layers(rows: &[Vec<u64>]) -> Result<Self> {
        let d = u32::try_from(rows.len()).map_err(|_| Error::invalid("too many layers"))?;
        let shape = TreeShape::new(d)?;
        let mut ms = Multiset::empty(shape);
        for (i, row) in rows.iter().enumerate() {
            let layer = i as u32 + 1;
            if row.len() != shape.layer_width(layer) {
                return Err(Error::invalid(format!(
                    "layer {layer} needs {} weights, got {}",
                    shape.layer_width(layer),
                    row.len()
                )));
            }
            for (j, &w) in row.iter().enumerate() {
                ms.set_weight(VertexId::new(layer, j as u32 + 1), w);
            }
        }
        Ok(ms)
    }

    /// Per-layer weight rows, layer 1 first.
    pub fn to_layers(&self) -> Vec<Vec<u64>> {
        (1..=self.shape.layers())
            .map(|layer| {
                self.shape
                    .layer_heaps(layer)
                    .map(|h| self.weights[h])
                    .collect()
            })
            .collect()
    }

    pub fn shape(&self) -> TreeShape {
        self.shape
    }

    pub fn weight(&self, v: VertexId) -> u64 {
        self.weights[self.shape.heap_id(v)]
    }

    pub fn weight_heap(&self, heap: usize) -> u64 {
        self.weights[heap]
    }

    pub fn set_weight(&mut self, v: VertexId, w: u64) {
        let h = self.shape.heap_id(v);
        self.weights[h] = w;
    }

    /// Adds one copy of `v`.
    pub fn add(&mut self, v: VertexId) {
        let h = self.shape.heap_id(v);
        self.weights[h] += 1;
    }

    /// Removes one copy of `v`; returns false if `v` had weight 0.
    pub fn remove(&mut self, v: VertexId) -> bool {
        let h = self.shape.heap_id(v);
        if self.weights[h] == 0 {
            return false;
        }
        self.weights[h] -= 1;
        true
    }

    pub(crate) fn add_heap(&mut self, heap: usize) {
        self.weights[heap] += 1;
    }

    /// Multiset weight `n`, the number of elements.
    pub fn total(&self) -> u64 {
        self.weights.iter().sum()
    }

    pub fn support(&self) -> Subset {
        Subset {
            shape: self.shape,
            present: self.weights.iter().map(|&w| w > 0).collect(),
        }
    }

    /// Heap id of the element at position `rank` when elements are listed in
    /// heap order, each vertex repeated by its weight.
    pub(crate) fn element_heap(&self, mut rank: u64) -> usize {
        for (h, &w) in self.weights.iter().enumerate().skip(1) {
            if rank < w {
                return h;
            }
            rank -= w;
        }
        panic!("element rank out of range")
    }
}

/// Three-way decodability status of a subtree.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum SubtreeState {
    /// Leaves recoverable from the subtree's own vertices.
    Decodable,
    /// Not decodable internally, but decodable once its root is supplied.
    NeedsRoot,
    /// Not decodable even with its root supplied.
    Lost,
}

/// Ground-truth decodability via the subtree characterisation: a tree
/// decodes iff both immediate subtrees decode, or the root is present, one
/// subtree decodes and the other decodes given its root from outside.
pub fn is_decodable(subset: &Subset) -> bool {
    let shape = subset.shape;
    let m = shape.vertex_count();
    let mut state = vec![SubtreeState::Lost; m + 1];
    for h in (1..=m).rev() {
        state[h] = if shape.is_leaf_heap(h) {
            if subset.present[h] {
                SubtreeState::Decodable
            } else {
                SubtreeState::NeedsRoot
            }
        } else {
            use SubtreeState::*;
            match (state[2 * h], state[2 * h + 1]) {
                (Decodable, Decodable) => Decodable,
                (Decodable, NeedsRoot) | (NeedsRoot, Decodable) => {
                    if subset.present[h] {
                        Decodable
                    } else {
                        NeedsRoot
                    }
                }
                _ => Lost,
            }
        };
    }
    state[1] == SubtreeState::Decodable
}

/// A full codeword: one fragment per vertex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Codeword {
    shape: TreeShape,
    original_len: u64,
    // fragments[h - 1] belongs to heap id h.
    fragments: Vec<Fragment>,
}

fn xor_into(dst: &mut [u8], src: &[u8]) {
    for (a, b) in dst.iter_mut().zip(src) {
        *a ^= b;
    }
}

/// Encodes `k` equal-length data fragments into a codeword.
pub fn encode(data: &[Fragment], shape: TreeShape) -> Result<Codeword> {
    let k = shape.leaves();
    if data.len() != k {
        return Err(Error::invalid(format!(
            "expected {k} data fragments, got {}",
            data.len()
        )));
    }
    let len = data[0].len();
    if data.iter().any(|f| f.len() != len) {
        return Err(Error::invalid("data fragments have unequal lengths"));
    }
    let m = shape.vertex_count();
    let mut fragments = vec![Vec::new(); m];
    for (j, frag) in data.iter().enumerate() {
        fragments[shape.first_leaf() + j - 1] = frag.clone();
    }
    for h in (1..shape.first_leaf()).rev() {
        let mut acc = fragments[2 * h - 1].clone();
        xor_into(&mut acc, &fragments[2 * h]);
        fragments[h - 1] = acc;
    }
    Ok(Codeword {
        shape,
        original_len: (len * k) as u64,
        fragments,
    })
}

/// Splits `bytes` into `k` fragments, zero-padding the tail, and encodes them.
pub fn encode_bytes(bytes: &[u8], shape: TreeShape) -> Result<Codeword> {
    let k = shape.leaves();
    let len = bytes.len().div_ceil(k);
    let data: Vec<Fragment> = (0..k)
        .map(|j| {
            let mut frag = vec![0u8; len];
            let start = (j * len).min(bytes.len());
            let end = ((j + 1) * len).min(bytes.len());
            frag[..end - start].copy_from_slice(&bytes[start..end]);
            frag
        })
        .collect();
    let mut cw = encode(&data, shape)?;
    cw.original_len = bytes.len() as u64;
    Ok(cw)
}

impl Codeword {
    pub(crate) fn from_parts(
        shape: TreeShape,
        original_len: u64,
        fragments: Vec<Fragment>,
    ) -> Result<Self> {
        if fragments.len() != shape.vertex_count() {
            return Err(Error::invalid(
                "fragment count does not match the tree shape",
            ));
        }
        let len = fragments[0].len();
        if fragments.iter().any(|f| f.len() != len) {
            return Err(Error::invalid("fragments have unequal lengths"));
        }
        if original_len > (len * shape.leaves()) as u64 {
            return Err(Error::invalid("original length exceeds codeword capacity"));
        }
        Ok(Codeword {
            shape,
            original_len,
            fragments,
        })
    }

    pub fn shape(&self) -> TreeShape {
        self.shape
    }

    pub fn fragment_len(&self) -> usize {
        self.fragments[0].len()
    }

    /// Length of the data before padding.
    pub fn original_len(&self) -> u64 {
        self.original_len
    }

    pub fn fragment(&self, v: VertexId) -> &[u8] {
        &self.fragments[self.shape.heap_id(v) - 1]
    }

    /// Fragments in (layer ascending, index ascending) order.
    pub fn fragments_bottom_up(&self) -> impl Iterator<Item = &[u8]> + '_ {
        self.shape
            .heaps_bottom_up()
            .map(|h| self.fragments[h - 1].as_slice())
    }

    /// The systematic data fragments, leaf order.
    pub fn data(&self) -> Vec<Fragment> {
        self.shape
            .layer_heaps(1)
            .map(|h| self.fragments[h - 1].clone())
            .collect()
    }

    /// Available fragments for the vertices of `subset`.
    pub fn restrict(&self, subset: &Subset) -> BTreeMap<VertexId, Fragment> {
        subset
            .iter()
            .map(|v| (v, self.fragment(v).to_vec()))
            .collect()
    }

    /// True when every internal fragment is the XOR of its children.
    pub fn is_consistent(&self) -> bool {
        (1..self.shape.first_leaf()).all(|h| {
            let mut acc = self.fragments[2 * h - 1].clone();
            xor_into(&mut acc, &self.fragments[2 * h]);
            acc == self.fragments[h - 1]
        })
    }
}

/// Recovers the `k` data fragments from the available fragments.
///
/// Each missing leaf is rebuilt by its recovering vertex as that vertex's
/// fragment XOR the fragments it receives under the minimal recovery
/// schedule.
pub fn decode(shape: TreeShape, available: &BTreeMap<VertexId, Fragment>) -> Result<Vec<Fragment>> {
    let subset = Subset::from_vertices(shape, available.keys().copied())?;
    let len = match available.values().next() {
        Some(f) => f.len(),
        None => return Err(Error::NonDecodable),
    };
    if available.values().any(|f| f.len() != len) {
        return Err(Error::invalid("available fragments have unequal lengths"));
    }
    let schedule = recovery::plan_recovery(&subset)?;
    let mut inbox: BTreeMap<VertexId, Vec<VertexId>> = BTreeMap::new();
    for t in &schedule.transfers {
        inbox.entry(t.to).or_default().push(t.from);
    }
    (1..=shape.leaves() as u32)
        .map(|j| {
            let leaf = VertexId::leaf(j);
            if let Some(frag) = available.get(&leaf) {
                return Ok(frag.clone());
            }
            let x = schedule.assignments.get(&leaf).ok_or(Error::NonDecodable)?;
            let mut acc = available[x].clone();
            for z in inbox.get(x).into_iter().flatten() {
                xor_into(&mut acc, &available[z]);
            }
            Ok(acc)
        })
        .collect()
}

/// Decodes and strips the padding added by [`encode_bytes`].
pub fn decode_bytes(
    shape: TreeShape,
    original_len: u64,
    available: &BTreeMap<VertexId, Fragment>,
) -> Result<Vec<u8>> {
    let mut out: Vec<u8> = decode(shape, available)?.concat();
    if original_len > out.len() as u64 {
        return Err(Error::invalid("original length exceeds decoded size"));
    }
    out.truncate(original_len as usize);
    Ok(out)
}
