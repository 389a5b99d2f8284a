//! Projectors of the truncated system by orthogonalization in fractal order.
//!
//! Each equation contributes four rows `w_a` with entries
//! `w_a(n + s)_b = conj(V(n, s)_{ab})`, so that `<w_a, C> = sum_s V(n, s) c(n + s)`.
//! Rows are orthogonalized against the vectors already stored, and the
//! orthonormal remainders span the projector `rho_k(n)` of that equation.
//! The sum of all projectors is the projector onto the row space of the model;
//! its complement gives the fundamental solution `S(n)`.
//!
//! Orthogonalization is classical Gram-Schmidt with one full
//! reorthogonalization pass. Coefficients are taken only against vectors whose
//! support meets the 13-point row support, found through a point-to-vector
//! inverted index. Any other stored vector has disjoint support from the row
//! and an exactly zero coefficient, so the stored vectors stay as sparse as
//! the elimination order allows.

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{CouplingStencil, FieldConfig};
use crate::error::{Error, Result};
use crate::lattice::{index_of, LatticePoint};
use crate::schedule::ModelSpec;
use crate::spinor::{bispinor_dot, bispinor_norm_sqr, Bispinor, SpinorBlock, C64, ZERO};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EngineOptions {
    /// A remainder is independent when its norm exceeds this fraction of the incoming row norm.
    pub rank_tolerance: f64,
    /// Accept equations of rank < 4 instead of failing.
    pub allow_rank_deficient: bool,
    /// Bispinor entries with norm at or below this are not stored.
    pub drop_tolerance: f64,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions { rank_tolerance: 1e-8, allow_rank_deficient: false, drop_tolerance: 0.0 }
    }
}

/// A finitely supported multispinor: one bispinor per lattice point.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseMultispinor {
    entries: Vec<(LatticePoint, Bispinor)>,
}

impl SparseMultispinor {
    /// Builds from entries; zero bispinors are dropped and entries are sorted by point.
    pub fn from_entries(mut entries: Vec<(LatticePoint, Bispinor)>) -> Self {
        entries.retain(|(_, b)| b.iter().any(|z| *z != ZERO));
        entries.sort_by_key(|(p, _)| *p);
        SparseMultispinor { entries }
    }

    pub fn entries(&self) -> &[(LatticePoint, Bispinor)] {
        &self.entries
    }

    pub fn get(&self, p: &LatticePoint) -> Option<&Bispinor> {
        self.entries
            .binary_search_by_key(p, |(q, _)| *q)
            .ok()
            .map(|i| &self.entries[i].1)
    }

    pub fn support(&self) -> impl Iterator<Item = &LatticePoint> {
        self.entries.iter().map(|(p, _)| p)
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, b)| bispinor_norm_sqr(b)).sum::<f64>().sqrt()
    }

    /// `<self, other>`, conjugate-linear in `self`.
    pub fn dot(&self, other: &SparseMultispinor) -> C64 {
        let (mut i, mut j) = (0, 0);
        let mut acc = ZERO;
        while i < self.entries.len() && j < other.entries.len() {
            let (pa, a) = &self.entries[i];
            let (pb, b) = &other.entries[j];
            match pa.cmp(pb) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += bispinor_dot(a, b);
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }
}

#[derive(Clone, Debug)]
struct StoredVector {
    /// Sorted by point id.
    entries: Vec<(u32, Bispinor)>,
    record: u32,
}

/// All orthonormal vectors of a run, with point ids and the inverted index.
#[derive(Clone, Debug, Default)]
pub struct VectorStore {
    points: Vec<LatticePoint>,
    ids: HashMap<LatticePoint, u32>,
    vectors: Vec<StoredVector>,
    /// Per point id: `(vector id, position inside that vector's entries)`.
    inverted: Vec<Vec<(u32, u32)>>,
}

impl VectorStore {
    fn point_id(&mut self, p: LatticePoint) -> u32 {
        if let Some(&id) = self.ids.get(&p) {
            return id;
        }
        let id = self.points.len() as u32;
        self.points.push(p);
        self.ids.insert(p, id);
        self.inverted.push(Vec::new());
        id
    }

    pub fn vector_count(&self) -> usize {
        self.vectors.len()
    }

    pub fn stored_entries(&self) -> usize {
        self.vectors.iter().map(|v| v.entries.len()).sum()
    }

    fn to_sparse(&self, v: usize) -> SparseMultispinor {
        SparseMultispinor::from_entries(
            self.vectors[v]
                .entries
                .iter()
                .map(|(id, b)| (self.points[*id as usize], *b))
                .collect(),
        )
    }
}

/// The projector contributed by one equation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProjectorRecord {
    pub k: usize,
    pub site: LatticePoint,
    /// Number of orthonormal vectors (4 unless rank-deficient mode accepted less).
    pub rank: usize,
    /// Final cluster the equation belongs to.
    pub cluster: usize,
    pub first_vector: usize,
    /// Number of lattice points in the support of the projector.
    pub support_size: usize,
}

/// One step of the cluster narrative.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeEvent {
    pub equation: usize,
    pub k: usize,
    /// Clusters joined by this equation: 0 opens a new cluster, 1 extends one,
    /// 2 or more bridges previously independent clusters.
    pub clusters_joined: usize,
    pub clusters_after: usize,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ClusterStats {
    pub final_clusters: usize,
    /// Equations per final cluster, largest first.
    pub sizes: Vec<usize>,
    pub max_clusters: usize,
    pub history: Vec<MergeEvent>,
    pub stored_vectors: usize,
    pub stored_entries: usize,
    pub elapsed_seconds: f64,
}

/// `S(n)` blocks of the fundamental solution for the localized amplitude at `n_o`.
#[derive(Clone, Debug)]
pub struct SolutionTable {
    pub origin: LatticePoint,
    pub model_name: String,
    pub field: FieldConfig,
    entries: Vec<(i64, LatticePoint, SpinorBlock)>,
    lookup: HashMap<LatticePoint, usize>,
}

impl SolutionTable {
    /// Builds a table from blocks; entries are ordered by global index.
    pub fn new(
        model_name: impl Into<String>,
        field: FieldConfig,
        blocks: impl IntoIterator<Item = (LatticePoint, SpinorBlock)>,
    ) -> Result<Self> {
        let mut entries = blocks
            .into_iter()
            .map(|(p, b)| Ok((index_of(p)?, p, b)))
            .collect::<Result<Vec<_>>>()?;
        entries.sort_by_key(|e| e.0);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidArgument("duplicate point in solution table".into()));
        }
        let lookup = entries.iter().enumerate().map(|(i, e)| (e.1, i)).collect();
        Ok(SolutionTable {
            origin: LatticePoint::ORIGIN,
            model_name: model_name.into(),
            field,
            entries,
            lookup,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, n: &LatticePoint) -> Option<&SpinorBlock> {
        self.lookup.get(n).map(|&i| &self.entries[i].2)
    }

    /// `(global index, point, S(n))` in index order.
    pub fn iter(&self) -> impl Iterator<Item = (i64, &LatticePoint, &SpinorBlock)> {
        self.entries.iter().map(|(i, p, b)| (*i, p, b))
    }

    pub fn points(&self) -> impl Iterator<Item = &LatticePoint> {
        self.entries.iter().map(|e| &e.1)
    }

    /// Largest `|n_i|` over the table, per axis.
    pub fn max_abs_harmonic(&self) -> [i64; 4] {
        let mut m = [0; 4];
        for (_, p, _) in &self.entries {
            for i in 0..4 {
                m[i] = m[i].max(p.0[i].abs());
            }
        }
        m
    }
}

/// Result of [`run_model`].
#[derive(Clone, Debug)]
pub struct Solution {
    pub table: SolutionTable,
    pub records: Vec<ProjectorRecord>,
    pub stats: ClusterStats,
    store: Option<VectorStore>,
}

impl Solution {
    pub fn store(&self) -> Option<&VectorStore> {
        self.store.as_ref()
    }

    /// Drops the orthonormal vectors, keeping only the table and records.
    pub fn into_compact(mut self) -> Self {
        self.store = None;
        self
    }

    pub fn is_compact(&self) -> bool {
        self.store.is_none()
    }

    /// The orthonormal vectors spanning `rho_k(m)` of a record.
    pub fn record_vectors(&self, rec: &ProjectorRecord) -> Option<Vec<SparseMultispinor>> {
        let store = self.store.as_ref()?;
        Some((rec.first_vector..rec.first_vector + rec.rank).map(|v| store.to_sparse(v)).collect())
    }

    /// Support of `rho_k(m)`: points where any of its vectors is nonzero.
    pub fn record_support(&self, rec: &ProjectorRecord) -> Option<Vec<LatticePoint>> {
        let store = self.store.as_ref()?;
        let mut ids: Vec<u32> = (rec.first_vector..rec.first_vector + rec.rank)
            .flat_map(|v| store.vectors[v].entries.iter().map(|e| e.0))
            .collect();
        ids.sort_unstable();
        ids.dedup();
        let mut pts: Vec<LatticePoint> = ids.iter().map(|&i| store.points[i as usize]).collect();
        crate::schedule::sort_by_index(&mut pts);
        Some(pts)
    }
}

struct DisjointSet {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSet {
    fn new() -> Self {
        DisjointSet { parent: Vec::new(), size: Vec::new() }
    }

    fn push(&mut self) -> usize {
        let id = self.parent.len();
        self.parent.push(id);
        self.size.push(1);
        id
    }

    fn find(&mut self, mut x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[x] != root {
            let next = self.parent[x];
            self.parent[x] = root;
            x = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) -> usize {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return a;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
        a
    }
}

/// Per-point accumulator for the four rows of the equation being processed.
struct BlockAccumulator {
    values: Vec<[Bispinor; 4]>,
    marked: Vec<bool>,
    touched: Vec<u32>,
}

impl BlockAccumulator {
    fn new() -> Self {
        BlockAccumulator { values: Vec::new(), marked: Vec::new(), touched: Vec::new() }
    }

    fn slot(&mut self, id: u32) -> &mut [Bispinor; 4] {
        let i = id as usize;
        if i >= self.values.len() {
            self.values.resize(i + 1, [[ZERO; 4]; 4]);
            self.marked.resize(i + 1, false);
        }
        if !self.marked[i] {
            self.marked[i] = true;
            self.touched.push(id);
        }
        &mut self.values[i]
    }

    fn get(&self, id: u32) -> Option<&[Bispinor; 4]> {
        let i = id as usize;
        (i < self.marked.len() && self.marked[i]).then(|| &self.values[i])
    }

    fn clear(&mut self) {
        for &id in &self.touched {
            self.values[id as usize] = [[ZERO; 4]; 4];
            self.marked[id as usize] = false;
        }
        self.touched.clear();
    }
}

/// Runs a model in the fractal order (`k` ascending, then global index).
pub fn run_model(cfg: &FieldConfig, model: &ModelSpec, opts: &EngineOptions) -> Result<Solution> {
    run_equations(cfg, &model.name, &model.equations(), opts)
}

/// Runs an explicit list of `(k, site)` equations in the given order.
pub fn run_equations(
    cfg: &FieldConfig,
    model_name: &str,
    equations: &[(usize, LatticePoint)],
    opts: &EngineOptions,
) -> Result<Solution> {
    let start = Instant::now();
    let stencil = CouplingStencil::new(cfg);
    let mut store = VectorStore::default();
    let mut records: Vec<ProjectorRecord> = Vec::with_capacity(equations.len());
    let mut clusters = DisjointSet::new();
    let mut cluster_count = 0usize;
    let mut stats = ClusterStats::default();
    let mut acc = BlockAccumulator::new();
    let mut coef: Vec<[C64; 4]> = Vec::new();

    for (eq_index, &(k, site)) in equations.iter().enumerate() {
        if !site.is_even() {
            return Err(Error::OddSum(site));
        }

        // Rows of the equation, loaded into the accumulator.
        let mut row_norm_sqr = [0.0f64; 4];
        let mut row_points: Vec<u32> = Vec::with_capacity(13);
        for (s, block) in stencil.blocks(&site) {
            if block.is_zero() {
                continue;
            }
            let id = store.point_id(site + s);
            row_points.push(id);
            let slot = acc.slot(id);
            for a in 0..4 {
                for b in 0..4 {
                    let w = block.0[a][b].conj();
                    slot[a][b] = w;
                    row_norm_sqr[a] += w.norm_sqr();
                }
            }
        }

        // Candidates: stored vectors whose support meets the row support.
        let mut candidates: Vec<u32> = Vec::new();
        for &pid in &row_points {
            for &(v, _) in &store.inverted[pid as usize] {
                candidates.push(v);
            }
        }
        candidates.sort_unstable();
        candidates.dedup();
        if coef.len() < store.vectors.len() {
            coef.resize(store.vectors.len(), [ZERO; 4]);
        }

        // First pass: coefficients against the original sparse rows.
        for &pid in &row_points {
            let rows = *acc.get(pid).expect("row point is loaded");
            for &(v, pos) in &store.inverted[pid as usize] {
                let val = &store.vectors[v as usize].entries[pos as usize].1;
                let c = &mut coef[v as usize];
                for a in 0..4 {
                    c[a] += bispinor_dot(val, &rows[a]);
                }
            }
        }
        subtract_projection(&store, &candidates, &coef, &mut acc);

        // Second pass over the same vectors.
        for &v in &candidates {
            let mut c = [ZERO; 4];
            for (pid, val) in &store.vectors[v as usize].entries {
                // Points never loaded carry a zero remainder.
                let Some(rows) = acc.get(*pid) else { continue };
                for a in 0..4 {
                    c[a] += bispinor_dot(val, &rows[a]);
                }
            }
            coef[v as usize] = c;
        }
        subtract_projection(&store, &candidates, &coef, &mut acc);
        for &v in &candidates {
            coef[v as usize] = [ZERO; 4];
        }

        // Orthonormalize the four remainders among themselves.
        acc.touched.sort_unstable();
        let support = acc.touched.clone();
        let mut remainders: Vec<Vec<Bispinor>> = (0..4)
            .map(|a| support.iter().map(|&id| acc.values[id as usize][a]).collect())
            .collect();
        acc.clear();

        let mut accepted: Vec<Vec<Bispinor>> = Vec::with_capacity(4);
        for (a, r) in remainders.iter_mut().enumerate() {
            for _pass in 0..2 {
                for u in &accepted {
                    let c: C64 = u.iter().zip(r.iter()).map(|(x, y)| bispinor_dot(x, y)).sum();
                    for (ri, ui) in r.iter_mut().zip(u) {
                        for b in 0..4 {
                            ri[b] -= c * ui[b];
                        }
                    }
                }
            }
            let norm = r.iter().map(bispinor_norm_sqr).sum::<f64>().sqrt();
            let row_norm = row_norm_sqr[a].sqrt();
            if row_norm > 0.0 && norm > opts.rank_tolerance * row_norm {
                let inv = 1.0 / norm;
                accepted.push(r.iter().map(|b| b.map(|z| z * inv)).collect());
            }
        }

        let rank = accepted.len();
        if rank < 4 && !opts.allow_rank_deficient {
            return Err(Error::RankDeficiency { k, site, rank });
        }

        // Cluster bookkeeping.
        let mut roots: Vec<usize> = candidates
            .iter()
            .map(|&v| store.vectors[v as usize].record as usize)
            .collect();
        roots.sort_unstable();
        roots.dedup();
        let mut roots: Vec<usize> = roots.into_iter().map(|r| clusters.find(r)).collect();
        roots.sort_unstable();
        roots.dedup();
        let me = clusters.push();
        debug_assert_eq!(me, eq_index);
        for &r in &roots {
            clusters.union(me, r);
        }
        cluster_count = cluster_count + 1 - roots.len();
        stats.max_clusters = stats.max_clusters.max(cluster_count);
        stats.history.push(MergeEvent {
            equation: eq_index,
            k,
            clusters_joined: roots.len(),
            clusters_after: cluster_count,
        });

        // Store the new vectors.
        let first_vector = store.vectors.len();
        let mut support_points: Vec<u32> = Vec::new();
        for u in accepted {
            let vid = store.vectors.len() as u32;
            let entries: Vec<(u32, Bispinor)> = support
                .iter()
                .zip(u)
                .filter(|(_, b)| bispinor_norm_sqr(b).sqrt() > opts.drop_tolerance)
                .map(|(&id, b)| (id, b))
                .collect();
            for (pos, (id, _)) in entries.iter().enumerate() {
                store.inverted[*id as usize].push((vid, pos as u32));
                support_points.push(*id);
            }
            store.vectors.push(StoredVector { entries, record: eq_index as u32 });
        }
        support_points.sort_unstable();
        support_points.dedup();
        records.push(ProjectorRecord {
            k,
            site,
            rank,
            cluster: 0,
            first_vector,
            support_size: support_points.len(),
        });
    }

    // Final cluster ids, numbered by first appearance.
    let mut cluster_ids: HashMap<usize, usize> = HashMap::new();
    let mut sizes: Vec<usize> = Vec::new();
    for (i, rec) in records.iter_mut().enumerate() {
        let root = clusters.find(i);
        let next = cluster_ids.len();
        let id = *cluster_ids.entry(root).or_insert(next);
        if id == sizes.len() {
            sizes.push(0);
        }
        sizes[id] += 1;
        rec.cluster = id;
    }
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    stats.final_clusters = sizes.len();
    stats.sizes = sizes;
    stats.stored_vectors = store.vector_count();
    stats.stored_entries = store.stored_entries();

    let table = build_table(cfg, model_name, &store)?;
    stats.elapsed_seconds = start.elapsed().as_secs_f64();
    Ok(Solution { table, records, stats, store: Some(store) })
}

fn subtract_projection(
    store: &VectorStore,
    candidates: &[u32],
    coef: &[[C64; 4]],
    acc: &mut BlockAccumulator,
) {
    for &v in candidates {
        let c = coef[v as usize];
        if c.iter().all(|z| *z == ZERO) {
            continue;
        }
        for (pid, val) in &store.vectors[v as usize].entries {
            let slot = acc.slot(*pid);
            for a in 0..4 {
                if c[a] == ZERO {
                    continue;
                }
                for b in 0..4 {
                    slot[a][b] -= c[a] * val[b];
                }
            }
        }
    }
}

/// `S(n_o) = U - sum_v v(n_o) v(n_o)^dagger`, `S(n) = -sum_v v(n) v(n_o)^dagger`.
fn build_table(cfg: &FieldConfig, model_name: &str, store: &VectorStore) -> Result<SolutionTable> {
    let origin = LatticePoint::ORIGIN;
    let mut blocks: BTreeMap<u32, SpinorBlock> = BTreeMap::new();
    let mut origin_block = SpinorBlock::identity();
    if let Some(&oid) = store.ids.get(&origin) {
        for &(v, pos) in &store.inverted[oid as usize] {
            let vec = &store.vectors[v as usize];
            let at_origin = vec.entries[pos as usize].1;
            for (pid, val) in &vec.entries {
                let outer = SpinorBlock::outer(val, &at_origin);
                if *pid == oid {
                    origin_block -= outer;
                } else {
                    *blocks.entry(*pid).or_default() -= outer;
                }
            }
        }
    }
    let entries = std::iter::once((origin, origin_block))
        .chain(blocks.into_iter().map(|(id, b)| (store.points[id as usize], b)));
    SolutionTable::new(model_name, cfg.clone(), entries)
}

/// Worst-case deviations of the stored projectors from projector algebra.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ProjectorReport {
    pub records: usize,
    pub min_rank: usize,
    /// `max |tr(rho) - rank|`.
    pub max_trace_deviation: f64,
    /// `max |tr(rho) - 4|`.
    pub max_trace_deviation_from_4: f64,
    /// `max ||rho^2 - rho||_F`.
    pub max_idempotency_defect: f64,
    /// `max ||rho_a rho_b||_F` over records with overlapping support.
    pub max_pair_overlap: f64,
    pub pairs_checked: usize,
}

impl ProjectorReport {
    pub fn max_defect(&self) -> f64 {
        self.max_trace_deviation
            .max(self.max_idempotency_defect)
            .max(self.max_pair_overlap)
    }
}

fn gram_block(store: &VectorStore, a: &[usize], b: &[usize]) -> SpinorBlock {
    let mut g = SpinorBlock::zero();
    for (i, &va) in a.iter().enumerate() {
        for (j, &vb) in b.iter().enumerate() {
            g.0[i][j] = sparse_dot(&store.vectors[va].entries, &store.vectors[vb].entries);
        }
    }
    g
}

fn sparse_dot(a: &[(u32, Bispinor)], b: &[(u32, Bispinor)]) -> C64 {
    let (mut i, mut j) = (0, 0);
    let mut acc = ZERO;
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += bispinor_dot(&a[i].1, &b[j].1);
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

/// Checks trace, idempotency and mutual orthogonality of the projectors.
///
/// Uses the Gram matrices of the stored vectors: for `rho = V V^dagger` with
/// `G = V^dagger V`, `||rho^2 - rho||_F^2 = tr((G - 1) G (G - 1) G)` and
/// `||rho_a rho_b||_F^2 = tr(G_a C G_b C^dagger)` with `C = V_a^dagger V_b`.
pub fn verify_projectors(solution: &Solution) -> Result<ProjectorReport> {
    let store = solution
        .store()
        .ok_or_else(|| Error::InvalidArgument("compact solutions carry no projector vectors".into()))?;
    let records = &solution.records;
    let vec_ids = |r: &ProjectorRecord| -> Vec<usize> {
        (r.first_vector..r.first_vector + r.rank).collect()
    };

    let grams: Vec<SpinorBlock> = records
        .par_iter()
        .map(|r| {
            let ids = vec_ids(r);
            gram_block(store, &ids, &ids)
        })
        .collect();

    let per_record: Vec<(f64, f64, f64, f64, usize)> = records
        .par_iter()
        .enumerate()
        .map(|(ri, rec)| {
            let g = grams[ri];
            let tr = g.trace().re;
            let mut dev = g - SpinorBlock::identity();
            for i in rec.rank..4 {
                dev.0[i][i] = ZERO;
            }
            let m = dev * g;
            let idem = (m * m).trace().re.abs().sqrt();

            // C = V_a^dagger V_b for every later record b sharing a support point.
            let mut cross: HashMap<usize, SpinorBlock> = HashMap::new();
            for (i, v) in (rec.first_vector..rec.first_vector + rec.rank).enumerate() {
                for (pid, val) in &store.vectors[v].entries {
                    for &(w, pos) in &store.inverted[*pid as usize] {
                        let other = store.vectors[w as usize].record as usize;
                        if other <= ri {
                            continue;
                        }
                        let j = w as usize - records[other].first_vector;
                        let wval = &store.vectors[w as usize].entries[pos as usize].1;
                        cross.entry(other).or_default().0[i][j] += bispinor_dot(val, wval);
                    }
                }
            }
            let mut worst = 0.0f64;
            for (other, c) in &cross {
                let val = (g * *c * grams[*other] * c.adjoint()).trace().re.abs().sqrt();
                worst = worst.max(val);
            }
            (
                (tr - rec.rank as f64).abs(),
                (tr - 4.0).abs(),
                idem,
                worst,
                cross.len(),
            )
        })
        .collect();

    let mut report = ProjectorReport {
        records: records.len(),
        min_rank: records.iter().map(|r| r.rank).min().unwrap_or(4),
        ..Default::default()
    };
    for (t, t4, idem, pair, n) in per_record {
        report.max_trace_deviation = report.max_trace_deviation.max(t);
        report.max_trace_deviation_from_4 = report.max_trace_deviation_from_4.max(t4);
        report.max_idempotency_defect = report.max_idempotency_defect.max(idem);
        report.max_pair_overlap = report.max_pair_overlap.max(pair);
        report.pairs_checked += n;
    }
    Ok(report)
}

/// `V_S(n) = sum_s V(n, s) S(n + s)` for every `n` whose stencil meets the table.
#[derive(Clone, Debug)]
pub struct ResidualMap {
    entries: Vec<(i64, LatticePoint, SpinorBlock)>,
    /// `sum_s ||V(n, s)||_F` per entry, the scale of the equation at `n`.
    scales: Vec<f64>,
}

impl ResidualMap {
    pub fn iter(&self) -> impl Iterator<Item = (&LatticePoint, &SpinorBlock)> {
        self.entries.iter().map(|(_, p, b)| (p, b))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, n: &LatticePoint) -> Option<&SpinorBlock> {
        let index = index_of(*n).ok()?;
        self.entries
            .binary_search_by_key(&index, |e| e.0)
            .ok()
            .map(|i| &self.entries[i].2)
    }

    /// `max ||V_S(n)||_F / sum_s ||V(n, s)||_F` over sites accepted by `filter`.
    pub fn max_relative(&self, mut filter: impl FnMut(&LatticePoint) -> bool) -> f64 {
        self.entries
            .iter()
            .zip(&self.scales)
            .filter(|((_, p, _), _)| filter(p))
            .map(|((_, _, b), s)| if *s > 0.0 { b.frobenius_norm() / s } else { b.frobenius_norm() })
            .fold(0.0, f64::max)
    }

    /// `sum_n V_S(n)^dagger V_S(n)`, accumulated in index order.
    pub fn gram(&self) -> SpinorBlock {
        let mut out = SpinorBlock::zero();
        for (_, _, b) in &self.entries {
            out += b.adjoint() * *b;
        }
        out
    }
}

pub fn residual_map(cfg: &FieldConfig, table: &SolutionTable) -> Result<ResidualMap> {
    let stencil = CouplingStencil::new(cfg);
    let mut sites: Vec<LatticePoint> = table
        .points()
        .flat_map(|p| stencil.shifts().iter().map(move |s| *p - *s))
        .collect();
    sites.sort_unstable();
    sites.dedup();

    let mut computed: Vec<(i64, LatticePoint, SpinorBlock, f64)> = sites
        .par_iter()
        .map(|n| {
            let mut vs = SpinorBlock::zero();
            let mut scale = 0.0;
            for (s, v) in stencil.blocks(n) {
                scale += v.frobenius_norm();
                if let Some(sb) = table.get(&(*n + s)) {
                    vs += v * *sb;
                }
            }
            Ok((index_of(*n)?, *n, vs, scale))
        })
        .collect::<Result<Vec<_>>>()?;
    computed.sort_by_key(|e| e.0);
    let scales = computed.iter().map(|e| e.3).collect();
    let entries = computed.into_iter().map(|(i, p, b, _)| (i, p, b)).collect();
    Ok(ResidualMap { entries, scales })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::dirac_matrices;

    fn single(cfg: &FieldConfig, opts: &EngineOptions) -> Result<Solution> {
        run_equations(cfg, "0-model", &[(0, LatticePoint::ORIGIN)], opts)
    }

    #[test]
    fn zero_field_rows_are_alpha4_columns() {
        let cfg = FieldConfig::free([0.0; 3], 0.0, 0.5).unwrap();
        let sol = single(&cfg, &EngineOptions::default()).unwrap();
        assert_eq!(sol.records.len(), 1);
        assert_eq!(sol.records[0].rank, 4);
        assert_eq!(sol.records[0].support_size, 1);
        let vecs = sol.record_vectors(&sol.records[0]).unwrap();
        let alpha4 = dirac_matrices()[3];
        for (a, v) in vecs.iter().enumerate() {
            let got = v.get(&LatticePoint::ORIGIN).unwrap();
            assert_eq!(*got, alpha4.row(a));
        }
        // Full rank: the single-equation system has only the trivial solution.
        assert!(sol.table.get(&LatticePoint::ORIGIN).unwrap().frobenius_norm() < 1e-15);
    }

    #[test]
    fn off_shell_single_equation() {
        let cfg = FieldConfig::free([0.0; 3], 0.5, 1.0).unwrap();
        let sol = single(&cfg, &EngineOptions::default()).unwrap();
        assert!(sol.table.get(&LatticePoint::ORIGIN).unwrap().frobenius_norm() < 1e-14);
    }

    #[test]
    fn on_shell_needs_opt_in() {
        let cfg = FieldConfig::free([0.0; 3], 1.0, 1.0).unwrap();
        let err = single(&cfg, &EngineOptions::default()).unwrap_err();
        assert!(matches!(err, Error::RankDeficiency { rank: 2, .. }));

        let opts = EngineOptions { allow_rank_deficient: true, ..Default::default() };
        let sol = single(&cfg, &opts).unwrap();
        let s0 = *sol.table.get(&LatticePoint::ORIGIN).unwrap();
        let expected = SpinorBlock::diagonal([1.0, 1.0, 0.0, 0.0]);
        assert!((s0 - expected).frobenius_norm() < 1e-14);
    }

    #[test]
    fn sparse_multispinor_basics() {
        let p = LatticePoint::ORIGIN;
        let q = LatticePoint::new(1, 1, 0, 0).unwrap();
        let one = C64::new(1.0, 0.0);
        let v = SparseMultispinor::from_entries(vec![
            (q, [one, ZERO, ZERO, ZERO]),
            (p, [ZERO; 4]),
            (p, [ZERO, one, ZERO, ZERO]),
        ]);
        assert_eq!(v.entries().len(), 2);
        assert_eq!(v.norm(), 2f64.sqrt());
        assert_eq!(v.dot(&v), C64::new(2.0, 0.0));
        assert!(v.get(&LatticePoint::new(2, 0, 0, 0).unwrap()).is_none());
    }

    #[test]
    fn disjoint_equations_do_not_interact() {
        let cfg = FieldConfig::free([0.1, 0.2, 0.0], 0.3, 0.5).unwrap();
        let eqs = [
            (0, LatticePoint::ORIGIN),
            (0, LatticePoint::new(4, 0, 0, 0).unwrap()),
        ];
        let sol = run_equations(&cfg, "pair", &eqs, &EngineOptions::default()).unwrap();
        assert_eq!(sol.stats.final_clusters, 2);
        let report = verify_projectors(&sol).unwrap();
        assert_eq!(report.pairs_checked, 0);
        assert_eq!(report.max_pair_overlap, 0.0);
    }
}
