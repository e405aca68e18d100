//! Inlier selection on a compatibility graph: core decomposition, maximum
//! k-core, and exact maximum clique.

use std::time::{Duration, Instant};

use crate::error::GraphError;
use crate::graph::CompatGraph;

/// Largest graph accepted by [`brute_force_max_clique`].
pub const BRUTE_FORCE_LIMIT: usize = 25;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoreDecomposition {
    pub core_number: Vec<usize>,
    pub degeneracy: usize,
    /// Vertices in the order they were peeled (smallest core first).
    pub order: Vec<usize>,
}

/// How an [`InlierSelection`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SelectionMode {
    MaxClique,
    MaxKCore,
    /// No pruning: every measurement is kept.
    Unpruned,
}

impl SelectionMode {
    pub fn name(&self) -> &'static str {
        match self {
            SelectionMode::MaxClique => "clique",
            SelectionMode::MaxKCore => "kcore",
            SelectionMode::Unpruned => "none",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "clique" => Some(SelectionMode::MaxClique),
            "kcore" => Some(SelectionMode::MaxKCore),
            "none" => Some(SelectionMode::Unpruned),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InlierSelection {
    /// Sorted measurement indices.
    pub vertices: Vec<usize>,
    pub mode: SelectionMode,
    /// False when the clique search stopped at its time budget.
    pub exact: bool,
    /// ω(G), set for an exact clique search.
    pub clique_number: Option<usize>,
}

impl InlierSelection {
    pub fn all(n: usize) -> Self {
        InlierSelection {
            vertices: (0..n).collect(),
            mode: SelectionMode::Unpruned,
            exact: true,
            clique_number: None,
        }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
}

/// Batagelj–Zaversnik bucket peeling, O(V + E).
pub fn core_decomposition(g: &CompatGraph) -> CoreDecomposition {
    let n = g.n_vertices();
    let mut deg: Vec<usize> = (0..n).map(|v| g.degree(v)).collect();
    let max_deg = deg.iter().copied().max().unwrap_or(0);

    // bin[d] = start of the degree-d block in `vert`
    let mut bin = vec![0usize; max_deg + 1];
    for &d in &deg {
        bin[d] += 1;
    }
    let mut start = 0;
    for b in bin.iter_mut() {
        let count = *b;
        *b = start;
        start += count;
    }
    let mut pos = vec![0usize; n];
    let mut vert = vec![0usize; n];
    for v in 0..n {
        pos[v] = bin[deg[v]];
        vert[pos[v]] = v;
        bin[deg[v]] += 1;
    }
    for d in (1..=max_deg).rev() {
        bin[d] = bin[d - 1];
    }
    bin[0] = 0;

    for i in 0..n {
        let v = vert[i];
        for &u in g.neighbors(v) {
            let u = u as usize;
            if deg[u] > deg[v] {
                let du = deg[u];
                let pu = pos[u];
                let pw = bin[du];
                let w = vert[pw];
                if u != w {
                    vert.swap(pu, pw);
                    pos[u] = pw;
                    pos[w] = pu;
                }
                bin[du] += 1;
                deg[u] -= 1;
            }
        }
    }
    let degeneracy = deg.iter().copied().max().unwrap_or(0);
    CoreDecomposition {
        core_number: deg,
        degeneracy,
        order: vert,
    }
}

/// The k*-core: every vertex whose core number equals the degeneracy.
pub fn max_kcore(g: &CompatGraph) -> InlierSelection {
    let cores = core_decomposition(g);
    max_kcore_from(&cores)
}

pub fn max_kcore_from(cores: &CoreDecomposition) -> InlierSelection {
    let vertices = cores
        .core_number
        .iter()
        .enumerate()
        .filter(|&(_, &k)| k == cores.degeneracy)
        .map(|(v, _)| v)
        .collect();
    InlierSelection {
        vertices,
        mode: SelectionMode::MaxKCore,
        exact: true,
        clique_number: None,
    }
}

/// Exact maximum clique by branch and bound with a greedy-coloring bound.
///
/// Ties between maximum cliques go to the lexicographically smallest sorted
/// vertex set. With a time budget the search may stop early; the result is
/// then the best clique found so far and `exact` is false.
pub fn max_clique(g: &CompatGraph, time_budget: Option<Duration>) -> InlierSelection {
    let cores = core_decomposition(g);
    max_clique_from(g, &cores, time_budget)
}

pub fn max_clique_from(
    g: &CompatGraph,
    cores: &CoreDecomposition,
    time_budget: Option<Duration>,
) -> InlierSelection {
    let n = g.n_vertices();
    let mut clock = Clock::new(time_budget);
    let selection = |vertices: Vec<usize>, exact: bool| InlierSelection {
        clique_number: exact.then_some(vertices.len()),
        vertices,
        mode: SelectionMode::MaxClique,
        exact,
    };
    if n == 0 {
        return selection(Vec::new(), true);
    }

    let mut best = find_clique_number(g, cores, &mut clock);
    if clock.expired {
        best.sort_unstable();
        return selection(best, false);
    }
    let omega = best.len();
    match lexicographic_clique(g, cores, omega, &mut clock) {
        Some(clique) => selection(clique, true),
        None => {
            best.sort_unstable();
            selection(best, !clock.expired)
        }
    }
}

struct Clock {
    deadline: Option<Instant>,
    nodes: u64,
    expired: bool,
}

impl Clock {
    fn new(budget: Option<Duration>) -> Self {
        Clock {
            deadline: budget.map(|b| Instant::now() + b),
            nodes: 0,
            expired: false,
        }
    }

    #[inline]
    fn tick(&mut self) -> bool {
        self.nodes += 1;
        if self.nodes.is_multiple_of(1024) {
            if let Some(d) = self.deadline {
                if Instant::now() >= d {
                    self.expired = true;
                }
            }
        }
        self.expired
    }
}

/// Adjacency of a small induced subgraph as bit rows.
struct LocalGraph {
    words: usize,
    rows: Vec<u64>,
}

impl LocalGraph {
    /// Induced subgraph on `members`; local index i is `members[i]`.
    fn induced(g: &CompatGraph, members: &[usize], slot: &mut [u32]) -> Self {
        let m = members.len();
        let words = m.div_ceil(64).max(1);
        let mut rows = vec![0u64; m * words];
        for (i, &v) in members.iter().enumerate() {
            slot[v] = i as u32;
        }
        for (i, &v) in members.iter().enumerate() {
            for &u in g.neighbors(v) {
                let j = slot[u as usize];
                if j != u32::MAX {
                    rows[i * words + j as usize / 64] |= 1 << (j % 64);
                }
            }
        }
        for &v in members {
            slot[v] = u32::MAX;
        }
        LocalGraph { words, rows }
    }

    fn row(&self, i: usize) -> &[u64] {
        &self.rows[i * self.words..(i + 1) * self.words]
    }

    fn full(&self, m: usize) -> Vec<u64> {
        let mut p = vec![0u64; self.words];
        for i in 0..m {
            p[i / 64] |= 1 << (i % 64);
        }
        p
    }

    /// Greedy sequential coloring of `p`. Returns vertices sorted by color
    /// together with their (1-based) color.
    fn color(&self, p: &[u64], order: &mut Vec<usize>, colors: &mut Vec<usize>) {
        order.clear();
        colors.clear();
        let mut uncolored = p.to_vec();
        let mut class = vec![0u64; self.words];
        let mut k = 0;
        while uncolored.iter().any(|&w| w != 0) {
            k += 1;
            class.copy_from_slice(&uncolored);
            while let Some(v) = first_bit(&class) {
                clear_bit(&mut uncolored, v);
                clear_bit(&mut class, v);
                for (c, &a) in class.iter_mut().zip(self.row(v)) {
                    *c &= !a;
                }
                order.push(v);
                colors.push(k);
            }
        }
    }

    fn color_count(&self, p: &[u64]) -> usize {
        let mut order = Vec::new();
        let mut colors = Vec::new();
        self.color(p, &mut order, &mut colors);
        colors.last().copied().unwrap_or(0)
    }
}

#[inline]
fn first_bit(bits: &[u64]) -> Option<usize> {
    bits.iter()
        .enumerate()
        .find(|(_, &w)| w != 0)
        .map(|(i, &w)| i * 64 + w.trailing_zeros() as usize)
}

#[inline]
fn clear_bit(bits: &mut [u64], i: usize) {
    bits[i / 64] &= !(1 << (i % 64));
}

fn popcount(bits: &[u64]) -> usize {
    bits.iter().map(|w| w.count_ones() as usize).sum()
}

fn intersect(a: &[u64], b: &[u64]) -> Vec<u64> {
    a.iter().zip(b).map(|(x, y)| x & y).collect()
}

/// Finds a maximum clique (any one). Each root is searched together with its
/// neighbors that come later in the peeling order; the densest roots go first.
fn find_clique_number(g: &CompatGraph, cores: &CoreDecomposition, clock: &mut Clock) -> Vec<usize> {
    let n = g.n_vertices();
    let mut rank = vec![0usize; n];
    for (i, &v) in cores.order.iter().enumerate() {
        rank[v] = i;
    }
    let mut slot = vec![u32::MAX; n];
    let mut best = greedy_clique(g, cores);
    for &root in cores.order.iter().rev() {
        if cores.core_number[root] < best.len() {
            continue;
        }
        let later: Vec<usize> = g
            .neighbors(root)
            .iter()
            .map(|&u| u as usize)
            .filter(|&u| rank[u] > rank[root])
            .collect();
        if later.len() < best.len() {
            continue;
        }
        let local = LocalGraph::induced(g, &later, &mut slot);
        let mut search = Expand {
            local: &local,
            best: best.len() - 1,
            best_set: None,
            clock,
        };
        let mut r = Vec::new();
        search.run(&mut r, local.full(later.len()));
        let expired = search.clock.expired;
        if let Some(found) = search.best_set {
            best = std::iter::once(root)
                .chain(found.into_iter().map(|i| later[i]))
                .collect();
        }
        if expired {
            break;
        }
    }
    best
}

/// A clique grown greedily from the last vertices in the peeling order, used
/// as the initial lower bound.
fn greedy_clique(g: &CompatGraph, cores: &CoreDecomposition) -> Vec<usize> {
    let mut clique: Vec<usize> = Vec::new();
    for &v in cores.order.iter().rev() {
        if cores.core_number[v] < clique.len() {
            break;
        }
        if clique.iter().all(|&u| g.has_edge(u, v)) {
            clique.push(v);
        }
    }
    clique
}

struct Expand<'a> {
    local: &'a LocalGraph,
    best: usize,
    best_set: Option<Vec<usize>>,
    clock: &'a mut Clock,
}

impl Expand<'_> {
    fn run(&mut self, r: &mut Vec<usize>, mut p: Vec<u64>) {
        if self.clock.tick() {
            return;
        }
        let mut order = Vec::new();
        let mut colors = Vec::new();
        self.local.color(&p, &mut order, &mut colors);
        for idx in (0..order.len()).rev() {
            if r.len() + colors[idx] <= self.best {
                return;
            }
            let v = order[idx];
            r.push(v);
            let np = intersect(&p, self.local.row(v));
            if np.iter().all(|&w| w == 0) {
                if r.len() > self.best {
                    self.best = r.len();
                    self.best_set = Some(r.clone());
                }
            } else {
                self.run(r, np);
            }
            r.pop();
            if self.clock.expired {
                return;
            }
            clear_bit(&mut p, v);
        }
    }
}

/// Lexicographically smallest clique of size `target`, searched over the
/// (target − 1)-core in ascending vertex order.
fn lexicographic_clique(
    g: &CompatGraph,
    cores: &CoreDecomposition,
    target: usize,
    clock: &mut Clock,
) -> Option<Vec<usize>> {
    let n = g.n_vertices();
    let members: Vec<usize> = (0..n)
        .filter(|&v| cores.core_number[v] + 1 >= target)
        .collect();
    let mut slot = vec![u32::MAX; n];
    let local = LocalGraph::induced(g, &members, &mut slot);
    let mut r = Vec::with_capacity(target);
    if lex_search(&local, target, &mut r, local.full(members.len()), clock) {
        Some(r.into_iter().map(|i| members[i]).collect())
    } else {
        None
    }
}

fn lex_search(
    local: &LocalGraph,
    target: usize,
    r: &mut Vec<usize>,
    mut p: Vec<u64>,
    clock: &mut Clock,
) -> bool {
    if r.len() == target {
        return true;
    }
    if clock.tick() {
        return false;
    }
    if r.len() + popcount(&p) < target || r.len() + local.color_count(&p) < target {
        return false;
    }
    while let Some(v) = first_bit(&p) {
        // lower candidates are cleared from p as they fail, so np only holds
        // vertices after v
        clear_bit(&mut p, v);
        let np = intersect(&p, local.row(v));
        r.push(v);
        if lex_search(local, target, r, np, clock) {
            return true;
        }
        r.pop();
        if clock.expired || r.len() + popcount(&p) < target {
            return false;
        }
    }
    false
}

/// Exhaustive maximum clique for small graphs; the lexicographically smallest
/// among maximum cliques.
pub fn brute_force_max_clique(g: &CompatGraph) -> Result<InlierSelection, GraphError> {
    let n = g.n_vertices();
    if n > BRUTE_FORCE_LIMIT {
        return Err(GraphError::GraphTooLarge(n));
    }
    let adj: Vec<u32> = (0..n)
        .map(|v| g.neighbors(v).iter().fold(0u32, |m, &u| m | 1 << u))
        .collect();

    // visits cliques as sorted sequences in lexicographic order, so the first
    // one of each size is the smallest
    fn extend(adj: &[u32], r: &mut Vec<usize>, cand: u32, best: &mut Vec<usize>) {
        if r.len() > best.len() {
            *best = r.clone();
        }
        let mut c = cand;
        while c != 0 {
            let v = c.trailing_zeros() as usize;
            c &= c - 1;
            r.push(v);
            extend(adj, r, c & adj[v], best);
            r.pop();
        }
    }
    let mut best = Vec::new();
    extend(&adj, &mut Vec::new(), (1u32 << n) - 1, &mut best);
    Ok(InlierSelection {
        clique_number: Some(best.len()),
        vertices: best,
        mode: SelectionMode::MaxClique,
        exact: true,
    })
}
