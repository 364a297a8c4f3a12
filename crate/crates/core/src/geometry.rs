//! Node sets, subset masks and nested exhaustions.
//!
//! A [`NodeSet`] is a finite point cloud where every node carries a cell size
//! (the diameter of the patch of the underlying set it stands for) and an
//! intrinsic cell dimension (2 for nodes on a surface in ℝ³, 3 for nodes
//! filling a solid). Kernels only see the points; the Gram assembly uses the
//! cell data to regularize self-interaction.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};

/// Content hash identifying a node set; measures and Gram forms compare ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeSetId(pub u64);

struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }
    fn write_u64(&mut self, v: u64) {
        for b in v.to_le_bytes() {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }
}

/// Sorted, deduplicated set of node indices naming a subset `A` of the nodes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct SubsetMask {
    indices: Vec<usize>,
}

impl SubsetMask {
    /// Builds a mask, rejecting indices `>= len`.
    pub fn new(indices: impl IntoIterator<Item = usize>, len: usize) -> Result<Self> {
        let mut indices: Vec<usize> = indices.into_iter().collect();
        indices.sort_unstable();
        indices.dedup();
        if let Some(&last) = indices.last() {
            if last >= len {
                return Err(Error::IndexOutOfRange { index: last, len });
            }
        }
        Ok(SubsetMask { indices })
    }

    pub fn all(len: usize) -> Self {
        SubsetMask { indices: (0..len).collect() }
    }

    pub fn empty() -> Self {
        SubsetMask::default()
    }

    pub fn single(index: usize) -> Self {
        SubsetMask { indices: vec![index] }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.indices.last().copied()
    }

    pub fn complement(&self, len: usize) -> SubsetMask {
        SubsetMask { indices: (0..len).filter(|&i| !self.contains(i)).collect() }
    }

    pub fn union(&self, other: &SubsetMask) -> SubsetMask {
        let mut v: Vec<usize> = self.indices.iter().chain(other.indices.iter()).copied().collect();
        v.sort_unstable();
        v.dedup();
        SubsetMask { indices: v }
    }

    pub fn intersection(&self, other: &SubsetMask) -> SubsetMask {
        SubsetMask { indices: self.iter().filter(|&i| other.contains(i)).collect() }
    }

    pub fn is_subset_of(&self, other: &SubsetMask) -> bool {
        self.iter().all(|i| other.contains(i))
    }

    pub fn is_strict_subset_of(&self, other: &SubsetMask) -> bool {
        self.len() < other.len() && self.is_subset_of(other)
    }
}

/// Finite point cloud with per-node cell sizes and optional named masks.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    id: NodeSetId,
    dim: usize,
    cell_dim: usize,
    coords: Vec<f64>,
    cell_sizes: Vec<f64>,
    labels: BTreeMap<String, SubsetMask>,
}

impl NodeSet {
    /// Builds a node set from points. Missing cell sizes default to the
    /// nearest-neighbor distance of each node.
    pub fn new(points: &[Vec<f64>], cell_sizes: Option<Vec<f64>>, cell_dim: usize) -> Result<Self> {
        let n = points.len();
        let dim = points.first().map_or(0, Vec::len);
        if n == 0 {
            return Err(Error::InvalidShape("empty point set".to_string()));
        }
        if dim == 0 {
            return Err(Error::InvalidShape("points must have at least one coordinate".to_string()));
        }
        let mut coords = Vec::with_capacity(n * dim);
        for p in points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: p.len() });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidShape("non-finite coordinate".to_string()));
            }
            coords.extend_from_slice(p);
        }
        if cell_dim == 0 || cell_dim > dim {
            return Err(Error::InvalidShape(format!("cell dimension {cell_dim} not in 1..={dim}")));
        }
        let nn = nearest_neighbor_distances(&coords, dim);
        if let Some(i) = nn.iter().position(|&d| d == 0.0) {
            return Err(Error::InvalidShape(format!("node {i} coincides with another node")));
        }
        let cell_sizes = match cell_sizes {
            Some(s) => {
                if s.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, found: s.len() });
                }
                if s.iter().any(|&h| !(h > 0.0) || !h.is_finite()) {
                    return Err(Error::InvalidShape("cell sizes must be positive".to_string()));
                }
                s
            }
            None if n == 1 => vec![1.0],
            None => nn,
        };
        let mut ns = NodeSet { id: NodeSetId(0), dim, cell_dim, coords, cell_sizes, labels: BTreeMap::new() };
        ns.id = ns.content_id();
        Ok(ns)
    }

    /// Index-only node set for matrix kernels (no coordinates).
    pub fn abstract_nodes(n: usize) -> Self {
        let mut ns = NodeSet {
            id: NodeSetId(0),
            dim: 0,
            cell_dim: 0,
            coords: Vec::new(),
            cell_sizes: vec![1.0; n],
            labels: BTreeMap::new(),
        };
        ns.id = ns.content_id();
        ns
    }

    fn content_id(&self) -> NodeSetId {
        let mut h = Fnv::new();
        h.write_u64(self.dim as u64);
        h.write_u64(self.cell_dim as u64);
        h.write_u64(self.cell_sizes.len() as u64);
        for v in self.coords.iter().chain(self.cell_sizes.iter()) {
            h.write_u64(v.to_bits());
        }
        NodeSetId(h.0)
    }

    pub fn id(&self) -> NodeSetId {
        self.id
    }

    pub fn len(&self) -> usize {
        self.cell_sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cell_sizes.is_empty()
    }

    /// Ambient dimension; 0 for abstract node sets.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cell_dim(&self) -> usize {
        self.cell_dim
    }

    pub fn is_abstract(&self) -> bool {
        self.dim == 0
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    pub fn cell_sizes(&self) -> &[f64] {
        &self.cell_sizes
    }

    pub fn all(&self) -> SubsetMask {
        SubsetMask::all(self.len())
    }

    pub fn mask(&self, indices: impl IntoIterator<Item = usize>) -> Result<SubsetMask> {
        SubsetMask::new(indices, self.len())
    }

    pub fn label(&self, name: &str) -> Option<&SubsetMask> {
        self.labels.get(name)
    }

    pub fn labels(&self) -> &BTreeMap<String, SubsetMask> {
        &self.labels
    }

    pub fn with_label(mut self, name: &str, mask: SubsetMask) -> Result<Self> {
        if let Some(max) = mask.max_index() {
            if max >= self.len() {
                return Err(Error::IndexOutOfRange { index: max, len: self.len() });
            }
        }
        self.labels.insert(name.to_string(), mask);
        Ok(self)
    }

    /// Largest pairwise distance between nodes.
    pub fn diameter(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..self.len() {
            for j in (i + 1)..self.len() {
                best = best.max(distance(self.point(i), self.point(j)));
            }
        }
        best
    }

    pub fn centroid_of(&self, mask: &SubsetMask) -> Vec<f64> {
        let mut c = vec![0.0; self.dim];
        for i in mask.iter() {
            for (ck, pk) in c.iter_mut().zip(self.point(i)) {
                *ck += pk;
            }
        }
        let n = mask.len().max(1) as f64;
        c.iter_mut().for_each(|v| *v /= n);
        c
    }

    /// Nodes inside the closed ball `|x - center| <= radius`.
    pub fn within(&self, center: &[f64], radius: f64) -> Result<SubsetMask> {
        if center.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: center.len() });
        }
        let idx = (0..self.len()).filter(|&i| distance(self.point(i), center) <= radius * (1.0 + 1e-12));
        SubsetMask::new(idx, self.len())
    }
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
}

fn nearest_neighbor_distances(coords: &[f64], dim: usize) -> Vec<f64> {
    let n = coords.len() / dim;
    let mut best = vec![f64::INFINITY; n];
    for i in 0..n {
        let pi = &coords[i * dim..(i + 1) * dim];
        for j in (i + 1)..n {
            let d = distance(pi, &coords[j * dim..(j + 1) * dim]);
            if d < best[i] {
                best[i] = d;
            }
            if d < best[j] {
                best[j] = d;
            }
        }
    }
    best
}

/// Shape to discretize.
#[derive(Debug, Clone, PartialEq)]
pub enum ShapeSpec {
    /// Solid ball; `resolution` is the number of radial shells.
    Ball { center: Vec<f64>, radius: f64 },
    /// Sphere surface; `resolution` is the number of nodes.
    Sphere { center: Vec<f64>, radius: f64 },
    /// Axis-aligned box; `resolution` grid points per axis.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Spherical shell region; `resolution` radial layers between the radii.
    Annulus { center: Vec<f64>, r_in: f64, r_out: f64 },
    /// Explicit point cloud.
    Cloud { points: Vec<Vec<f64>>, cell_sizes: Option<Vec<f64>>, cell_dim: Option<usize> },
}

/// Quasi-uniform nodes covering `shape`. Deterministic for fixed inputs.
pub fn discretize(shape: &ShapeSpec, resolution: usize) -> Result<NodeSet> {
    if resolution == 0 {
        return Err(Error::InvalidShape("resolution must be at least 1".to_string()));
    }
    match shape {
        ShapeSpec::Sphere { center, radius } => {
            check_radius(*radius)?;
            let dim = center.len();
            let dirs = sphere_directions(dim, resolution)?;
            let pts: Vec<Vec<f64>> = dirs.iter().map(|u| place(center, *radius, u)).collect();
            NodeSet::new(&pts, None, dim - 1)
        }
        ShapeSpec::Ball { center, radius } => {
            check_radius(*radius)?;
            let radii: Vec<f64> = (0..=resolution).map(|k| radius * k as f64 / resolution as f64).collect();
            shells(center, &radii, radius / resolution as f64)
        }
        ShapeSpec::Annulus { center, r_in, r_out } => {
            if !(*r_in >= 0.0) || !(r_out > r_in) {
                return Err(Error::InvalidShape(format!("annulus radii {r_in}, {r_out}")));
            }
            let step = (r_out - r_in) / resolution as f64;
            let radii: Vec<f64> = (0..=resolution).map(|k| r_in + step * k as f64).collect();
            shells(center, &radii, step)
        }
        ShapeSpec::Box { lo, hi } => {
            if lo.len() != hi.len() || lo.is_empty() {
                return Err(Error::InvalidShape("box corners must share a positive dimension".to_string()));
            }
            if lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                return Err(Error::InvalidShape("box requires lo < hi in every coordinate".to_string()));
            }
            let dim = lo.len();
            let total = resolution.checked_pow(dim as u32).ok_or_else(|| Error::InvalidShape("grid too large".to_string()))?;
            let axis = |k: usize, t: usize| {
                if resolution == 1 {
                    0.5 * (lo[k] + hi[k])
                } else {
                    lo[k] + (hi[k] - lo[k]) * t as f64 / (resolution - 1) as f64
                }
            };
            let mut pts = Vec::with_capacity(total);
            for flat in 0..total {
                let mut rem = flat;
                let mut p = vec![0.0; dim];
                for k in (0..dim).rev() {
                    p[k] = axis(k, rem % resolution);
                    rem /= resolution;
                }
                pts.push(p);
            }
            let sizes = if total == 1 {
                Some(vec![hi.iter().zip(lo).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min)])
            } else {
                None
            };
            NodeSet::new(&pts, sizes, dim)
        }
        ShapeSpec::Cloud { points, cell_sizes, cell_dim } => {
            let dim = points.first().map_or(0, Vec::len);
            NodeSet::new(points, cell_sizes.clone(), cell_dim.unwrap_or(dim))
        }
    }
}

fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidShape(format!("radius must be positive, got {r}")))
    }
}

fn place(center: &[f64], radius: f64, unit: &[f64]) -> Vec<f64> {
    center.iter().zip(unit).map(|(c, u)| c + radius * u).collect()
}

/// Unit directions: equally spaced on the circle, generalized spiral on S².
fn sphere_directions(dim: usize, n: usize) -> Result<Vec<Vec<f64>>> {
    match dim {
        1 => Ok(if n == 1 { vec![vec![1.0]] } else { vec![vec![-1.0], vec![1.0]] }),
        2 => Ok((0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                vec![libm::cos(t), libm::sin(t)]
            })
            .collect()),
        3 => Ok(generalized_spiral(n)),
        _ => Err(Error::InvalidShape(format!("sphere layouts are available in dimensions 1-3, not {dim}"))),
    }
}

/// Generalized spiral on the unit sphere: heights equally spaced in [-1, 1],
/// longitudes advanced by `3.6 / sqrt(n (1 - h²))`, poles at longitude zero.
pub fn generalized_spiral(n: usize) -> Vec<Vec<f64>> {
    if n == 1 {
        return vec![vec![0.0, 0.0, 1.0]];
    }
    let mut out = Vec::with_capacity(n);
    let mut phi = 0.0f64;
    let step = 3.6 / libm::sqrt(n as f64);
    for k in 0..n {
        let h = -1.0 + 2.0 * k as f64 / (n - 1) as f64;
        if k == 0 || k == n - 1 {
            phi = 0.0;
        } else {
            phi = (phi + step / libm::sqrt(1.0 - h * h)) % (2.0 * PI);
        }
        let s = libm::sqrt((1.0 - h * h).max(0.0));
        let v = [s * libm::cos(phi), s * libm::sin(phi), h];
        let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
        out.push(v.iter().map(|x| x / norm).collect());
    }
    out
}

/// Concentric shells at `radii`; shell `k` gets as many nodes as its
/// surface holds at spacing `spacing`. Labels `shell_k`, `inner_shell`, `outer_shell`.
fn shells(center: &[f64], radii: &[f64], spacing: f64) -> Result<NodeSet> {
    let dim = center.len();
    if !(1..=3).contains(&dim) {
        return Err(Error::InvalidShape(format!("radial layouts are available in dimensions 1-3, not {dim}")));
    }
    let mut pts = Vec::new();
    let mut shell_of = Vec::new();
    for (k, &r) in radii.iter().enumerate() {
        let count = if r == 0.0 {
            1
        } else {
            let x = r / spacing;
            match dim {
                1 => 2,
                2 => libm::round(2.0 * PI * x) as usize,
                _ => libm::round(4.0 * PI * x * x) as usize,
            }
            .max(1)
        };
        let dirs = if r == 0.0 { vec![vec![0.0; dim]] } else { sphere_directions(dim, count)? };
        for u in &dirs {
            pts.push(place(center, r, u));
            shell_of.push(k);
        }
    }
    let mut ns = NodeSet::new(&pts, None, dim)?;
    let last = radii.len() - 1;
    for k in 0..radii.len() {
        let mask = SubsetMask::new((0..pts.len()).filter(|&i| shell_of[i] == k), pts.len())?;
        if k == 0 {
            ns = ns.with_label("inner_shell", mask.clone())?;
        }
        if k == last {
            ns = ns.with_label("outer_shell", mask.clone())?;
        }
        ns = ns.with_label(&format!("shell_{k}"), mask)?;
    }
    Ok(ns)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExhaustionMode {
    Increasing,
    Decreasing,
}

/// How stages are carved: by index quantiles or by distance from the target's centroid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageOrder {
    Index,
    Radial,
}

/// Strictly monotone family of masks converging (after finitely many stages) to `limit`.
#[derive(Debug, Clone, PartialEq)]
pub struct Exhaustion {
    stages: Vec<SubsetMask>,
    limit: SubsetMask,
    mode: ExhaustionMode,
}

impl Exhaustion {
    /// Validates a user-supplied family.
    pub fn from_stages(stages: Vec<SubsetMask>, mode: ExhaustionMode) -> Result<Self> {
        let Some(limit) = stages.last().cloned() else {
            return Err(Error::StageCount { stages: 0, available: 0 });
        };
        for w in stages.windows(2) {
            let ok = match mode {
                ExhaustionMode::Increasing => w[0].is_strict_subset_of(&w[1]),
                ExhaustionMode::Decreasing => w[1].is_strict_subset_of(&w[0]),
            };
            if !ok {
                return Err(Error::InvalidInput("stages are not strictly monotone".to_string()));
            }
        }
        Ok(Exhaustion { stages, limit, mode })
    }

    pub fn stages(&self) -> &[SubsetMask] {
        &self.stages
    }

    /// Union (increasing) or intersection (decreasing) of the stages.
    pub fn limit(&self) -> &SubsetMask {
        &self.limit
    }

    pub fn mode(&self) -> ExhaustionMode {
        self.mode
    }
}

/// Level index per node of `target`: sorted distances start a new level
/// wherever they jump by more than a tenth of the mean stage width.
fn radial_levels(target: &SubsetMask, radius_of: &dyn Fn(usize) -> f64, stages: usize) -> Vec<usize> {
    let r: Vec<f64> = target.iter().map(radius_of).collect();
    let rmax = r.iter().cloned().fold(0.0f64, f64::max);
    let gap = 0.1 * rmax / stages as f64;
    let mut order: Vec<usize> = (0..r.len()).collect();
    order.sort_by(|&a, &b| r[a].partial_cmp(&r[b]).unwrap_or(core::cmp::Ordering::Equal));
    let mut levels = vec![0; r.len()];
    let mut level = 0;
    for w in 1..order.len() {
        if r[order[w]] - r[order[w - 1]] > gap {
            level += 1;
        }
        levels[order[w]] = level;
    }
    levels
}

/// Builds nested masks growing to `target` (increasing) or shrinking from the
/// whole node set to `target` (decreasing).
pub fn build_exhaustion(
    nodes: &NodeSet,
    target: &SubsetMask,
    stages: usize,
    mode: ExhaustionMode,
    order: StageOrder,
) -> Result<Exhaustion> {
    if target.is_empty() {
        return Err(Error::InvalidInput("exhaustion target is empty".to_string()));
    }
    if stages < 2 {
        return Err(Error::StageCount { stages, available: target.len() });
    }
    if let Some(max) = target.max_index() {
        if max >= nodes.len() {
            return Err(Error::IndexOutOfRange { index: max, len: nodes.len() });
        }
    }
    let radial = order == StageOrder::Radial && !nodes.is_abstract();
    let center = nodes.centroid_of(target);
    let radius_of = |i: usize| if radial { distance(nodes.point(i), &center) } else { 0.0 };
    let masks = match mode {
        ExhaustionMode::Increasing => {
            if stages > target.len() {
                return Err(Error::StageCount { stages, available: target.len() });
            }
            if radial {
                let levels = radial_levels(target, &radius_of, stages);
                let count = levels.iter().max().map_or(0, |m| m + 1);
                (1..=stages)
                    .map(|j| {
                        let keep = (j * count).div_ceil(stages);
                        SubsetMask { indices: target.iter().zip(&levels).filter(|(_, &l)| l < keep).map(|(i, _)| i).collect() }
                    })
                    .collect::<Vec<_>>()
            } else {
                let t = target.indices();
                (1..=stages)
                    .map(|j| SubsetMask { indices: t[..(j * t.len()).div_ceil(stages)].to_vec() })
                    .collect()
            }
        }
        ExhaustionMode::Decreasing => {
            let mut rest: Vec<usize> = target.complement(nodes.len()).indices().to_vec();
            if stages - 1 > rest.len() {
                return Err(Error::StageCount { stages, available: rest.len() + 1 });
            }
            if radial {
                // keep the nodes nearest the target longest
                rest.sort_by(|&a, &b| radius_of(a).partial_cmp(&radius_of(b)).unwrap_or(core::cmp::Ordering::Equal).then(a.cmp(&b)));
            }
            (0..stages)
                .map(|j| {
                    let keep = ((stages - 1 - j) * rest.len()).div_ceil(stages - 1);
                    target.union(&SubsetMask { indices: {
                        let mut v = rest[..keep].to_vec();
                        v.sort_unstable();
                        v
                    } })
                })
                .collect()
        }
    };
    Exhaustion::from_stages(masks, mode).map_err(|_| Error::StageCount { stages, available: target.len() })
}
