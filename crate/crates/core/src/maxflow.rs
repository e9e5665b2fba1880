//! Push-relabel maximum flow on the fractional interaction graph.
//!
//! Nodes are a subset of window cells. Every pair of nodes within the
//! truncation radius is joined by an undirected edge of capacity `w(x − y)`,
//! and each node has a source arc and a sink arc. Two storage layouts are
//! used: a dense `n × n` residual matrix when the stencil reaches across the
//! whole node set, and a per-offset stencil otherwise.
//!
//! The solver runs highest-label push-relabel with the gap heuristic and
//! periodic global relabeling, then returns stranded excess to the source so
//! that the final state is a genuine maximum flow. Both the minimal and the
//! maximal minimum cut are read off the residual graph.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::kernel::Kernel;

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct FlowStats {
    pub nodes: usize,
    pub pushes: u64,
    pub relabels: u64,
    pub global_relabels: u64,
    #[serde(serialize_with = "as_millis")]
    pub elapsed: Duration,
}

fn as_millis<S: serde::Serializer>(d: &Duration, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64() * 1e3)
}

enum Layout {
    /// Slot `k` of node `v` points at node `k`.
    Dense,
    /// Slot `k` of node `v` points at `nbr[v * deg + k]`; the reverse slot is `deg − 1 − k`.
    Stencil { nbr: Vec<u32>, w: Vec<f64> },
}

pub struct FlowNetwork<'k> {
    kernel: &'k Kernel,
    cells: Vec<usize>,
    deg: usize,
    layout: Layout,
    row_sum: Vec<f64>,
    res: Vec<f64>,
    src_cap: Vec<f64>,
    src: Vec<f64>,
    snk_cap: Vec<f64>,
    snk: Vec<f64>,
    excess: Vec<f64>,
    label: Vec<usize>,
    current: Vec<usize>,
    stats: FlowStats,
}

/// Minimum cuts after a maximum flow, as flags over the network's nodes.
#[derive(Clone, Debug)]
pub struct CutSides {
    /// Nodes reachable from the source: the smallest optimal source side.
    pub minimal: Vec<bool>,
    /// Nodes that cannot reach the sink: the largest optimal source side.
    pub maximal: Vec<bool>,
    pub flow: f64,
    pub stats: FlowStats,
}

impl<'k> FlowNetwork<'k> {
    /// Builds the pair graph over `cells` (window indices of the kernel's domain).
    pub fn new(kernel: &'k Kernel, cells: Vec<usize>) -> Self {
        let n = cells.len();
        let stencil = kernel.stencil();
        let dense = n <= stencil.len();
        let (deg, layout) = if dense {
            (n, Layout::Dense)
        } else {
            let dom = kernel.domain();
            let mut index = vec![NONE; dom.len()];
            for (v, &c) in cells.iter().enumerate() {
                index[c] = v as u32;
            }
            let deg = stencil.len();
            let mut nbr = vec![NONE; n * deg];
            for (v, &c) in cells.iter().enumerate() {
                let (i, j) = dom.coords(c);
                for (k, &(dx, dy, _)) in stencil.iter().enumerate() {
                    let (a, b) = (i as isize + dx, j as isize + dy);
                    if a >= 0 && b >= 0 && (a as usize) < dom.width() && (b as usize) < dom.height()
                    {
                        nbr[v * deg + k] = index[dom.index(a as usize, b as usize)];
                    }
                }
            }
            let w = stencil.iter().map(|st| st.2).collect();
            (deg, Layout::Stencil { nbr, w })
        };
        let mut net = Self {
            kernel,
            cells,
            deg,
            layout,
            row_sum: vec![0.0; n],
            res: vec![0.0; n * deg],
            src_cap: vec![0.0; n],
            src: vec![0.0; n],
            snk_cap: vec![0.0; n],
            snk: vec![0.0; n],
            excess: vec![0.0; n],
            label: vec![0; n],
            current: vec![0; n],
            stats: FlowStats { nodes: n, ..FlowStats::default() },
        };
        net.reset_pairs();
        for v in 0..n {
            net.row_sum[v] = net.res[v * deg..(v + 1) * deg].iter().sum();
        }
        net
    }

    fn reset_pairs(&mut self) {
        let dom = *self.kernel.domain();
        let deg = self.deg;
        match &self.layout {
            Layout::Dense => {
                for (v, &cv) in self.cells.iter().enumerate() {
                    let (i, j) = dom.coords(cv);
                    for (u, &cu) in self.cells.iter().enumerate() {
                        let (a, b) = dom.coords(cu);
                        self.res[v * deg + u] =
                            self.kernel.weight(a as isize - i as isize, b as isize - j as isize);
                    }
                }
            }
            Layout::Stencil { nbr, w } => {
                for v in 0..self.cells.len() {
                    for (k, &wk) in w.iter().enumerate() {
                        self.res[v * deg + k] = if nbr[v * deg + k] == NONE { 0.0 } else { wk };
                    }
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    /// Interaction of node `v` with every cell that is not a node: tabulated
    /// weights to non-nodes plus the analytic tail.
    pub fn node_exposure(&self, v: usize) -> f64 {
        (self.kernel.cell_total() - self.row_sum[v]).max(0.0)
    }

    /// Sum of pair capacities `w(x − y)` between node `v` and the nodes flagged in `side`.
    pub fn pair_weight_to(&self, v: usize, side: &[bool]) -> f64 {
        let mut acc = 0.0;
        self.for_each_pair(v, |u, w| {
            if side[u] {
                acc += w;
            }
        });
        acc
    }

    fn for_each_pair(&self, v: usize, mut f: impl FnMut(usize, f64)) {
        let dom = self.kernel.domain();
        let (i, j) = dom.coords(self.cells[v]);
        match &self.layout {
            Layout::Dense => {
                for (u, &cu) in self.cells.iter().enumerate() {
                    let (a, b) = dom.coords(cu);
                    let w = self.kernel.weight(a as isize - i as isize, b as isize - j as isize);
                    if w > 0.0 {
                        f(u, w);
                    }
                }
            }
            Layout::Stencil { nbr, w } => {
                for (k, &wk) in w.iter().enumerate() {
                    let u = nbr[v * self.deg + k];
                    if u != NONE {
                        f(u as usize, wk);
                    }
                }
            }
        }
    }

    #[inline]
    fn neighbor(&self, v: usize, k: usize) -> usize {
        match &self.layout {
            Layout::Dense => k,
            Layout::Stencil { nbr, .. } => {
                let u = nbr[v * self.deg + k];
                if u == NONE {
                    usize::MAX
                } else {
                    u as usize
                }
            }
        }
    }

    #[inline]
    fn reverse_slot(&self, v: usize, k: usize, u: usize) -> usize {
        match &self.layout {
            Layout::Dense => u * self.deg + v,
            Layout::Stencil { .. } => u * self.deg + (self.deg - 1 - k),
        }
    }

    /// Solves max-flow for the given terminal capacities (`source[v]` is paid
    /// when `v` ends on the sink side, `sink[v]` when it ends on the source side).
    pub fn solve(&mut self, source: &[f64], sink: &[f64], tie_eps: f64) -> CutSides {
        let start = Instant::now();
        let n = self.len();
        assert_eq!(source.len(), n);
        assert_eq!(sink.len(), n);
        if self.stats.pushes > 0 || self.stats.relabels > 0 {
            self.reset_pairs();
        }
        self.stats = FlowStats { nodes: n, ..FlowStats::default() };
        self.src_cap.copy_from_slice(source);
        self.snk_cap.copy_from_slice(sink);
        self.snk.copy_from_slice(sink);
        self.src.fill(0.0);
        self.excess.copy_from_slice(source);

        // Phase 1: route as much excess as possible to the sink.
        let mut term = std::mem::take(&mut self.snk);
        self.push_relabel(&mut term);
        self.snk = term;

        // Phase 2: send stranded excess back along the source arcs.
        if self.excess.iter().any(|&e| e > 0.0) {
            let mut back: Vec<f64> = self.src_cap.iter().zip(&self.src).map(|(c, r)| c - r).collect();
            let before = back.clone();
            self.push_relabel(&mut back);
            for v in 0..n {
                self.src[v] += before[v] - back[v];
            }
        }

        let flow: f64 = self.snk_cap.iter().zip(&self.snk).map(|(c, r)| c - r).sum();
        let minimal = self.source_reachable(tie_eps);
        let to_sink = self.sink_reaching(tie_eps);
        let maximal = to_sink.iter().map(|&b| !b).collect();
        self.stats.elapsed = start.elapsed();
        CutSides { minimal, maximal, flow, stats: self.stats }
    }

    fn global_relabel(&mut self, term: &[f64], buckets: &mut [Vec<u32>], count: &mut [usize]) {
        let n = self.len();
        let dead = n + 1;
        self.stats.global_relabels += 1;
        self.label.fill(dead);
        let mut queue = VecDeque::new();
        for v in 0..n {
            if term[v] > 0.0 {
                self.label[v] = 1;
                queue.push_back(v);
            }
        }
        while let Some(u) = queue.pop_front() {
            let lu = self.label[u];
            for k in 0..self.deg {
                let v = self.neighbor(u, k);
                if v == usize::MAX || v == u || self.label[v] != dead {
                    continue;
                }
                if self.res[self.reverse_slot(u, k, v)] > 0.0 {
                    self.label[v] = lu + 1;
                    queue.push_back(v);
                }
            }
        }
        for b in buckets.iter_mut() {
            b.clear();
        }
        count.fill(0);
        for v in 0..n {
            let l = self.label[v];
            if l < dead {
                count[l] += 1;
                if self.excess[v] > 0.0 {
                    buckets[l].push(v as u32);
                }
            }
            self.current[v] = 0;
        }
    }

    fn push_relabel(&mut self, term: &mut [f64]) {
        let n = self.len();
        if n == 0 {
            return;
        }
        // Labels run from 1 to n; `dead` marks nodes cut off from the terminal.
        let dead = n + 1;
        let deg = self.deg;
        let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); dead];
        let mut count = vec![0usize; dead];
        self.global_relabel(term, &mut buckets, &mut count);
        let relabel_period = n.max(64) as u64;
        let mut since_global = 0u64;
        let mut top = n;

        loop {
            // Highest active label.
            while top > 0 && buckets[top].is_empty() {
                top -= 1;
            }
            let Some(v) = buckets[top].pop() else {
                if top == 0 {
                    break;
                }
                continue;
            };
            let v = v as usize;
            if self.label[v] != top || self.excess[v] <= 0.0 {
                continue;
            }

            // Discharge v.
            while self.excess[v] > 0.0 {
                let lv = self.label[v];
                if lv >= dead {
                    break;
                }
                if lv == 1 && term[v] > 0.0 {
                    let d = self.excess[v].min(term[v]);
                    term[v] -= d;
                    self.excess[v] -= d;
                    self.stats.pushes += 1;
                    continue;
                }
                let mut k = self.current[v];
                while k < deg && self.excess[v] > 0.0 {
                    let slot = v * deg + k;
                    let r = self.res[slot];
                    if r > 0.0 {
                        let u = self.neighbor(v, k);
                        if u != usize::MAX && self.label[u] + 1 == lv {
                            let d = self.excess[v].min(r);
                            self.res[slot] = r - d;
                            let rs = self.reverse_slot(v, k, u);
                            self.res[rs] += d;
                            if self.excess[u] <= 0.0 {
                                buckets[self.label[u]].push(u as u32);
                            }
                            self.excess[u] += d;
                            self.excess[v] -= d;
                            self.stats.pushes += 1;
                            if self.excess[v] <= 0.0 {
                                break;
                            }
                        }
                    }
                    k += 1;
                }
                if self.excess[v] <= 0.0 {
                    self.current[v] = k.min(deg.saturating_sub(1));
                    break;
                }

                // Relabel.
                self.stats.relabels += 1;
                since_global += 1;
                let mut best = if term[v] > 0.0 { 1 } else { dead };
                for k in 0..deg {
                    if self.res[v * deg + k] > 0.0 {
                        let u = self.neighbor(v, k);
                        if u != usize::MAX {
                            best = best.min(self.label[u] + 1);
                        }
                    }
                }
                count[lv] -= 1;
                if count[lv] == 0 {
                    // Gap: nothing above lv can reach the terminal any more.
                    for u in 0..n {
                        if self.label[u] > lv && self.label[u] < dead {
                            count[self.label[u]] -= 1;
                            self.label[u] = dead;
                        }
                    }
                    self.label[v] = dead;
                } else {
                    self.label[v] = best.min(dead);
                    if self.label[v] < dead {
                        count[self.label[v]] += 1;
                    }
                }
                self.current[v] = 0;
                if self.label[v] >= dead {
                    break;
                }
                if self.label[v] > top {
                    top = self.label[v];
                }
            }

            if since_global >= relabel_period {
                since_global = 0;
                self.global_relabel(term, &mut buckets, &mut count);
                top = n;
            } else if self.excess[v] > 0.0 && self.label[v] < dead {
                buckets[self.label[v]].push(v as u32);
                top = top.max(self.label[v]);
            }
        }
    }

    fn source_reachable(&self, eps: f64) -> Vec<bool> {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::new();
        for v in 0..n {
            if self.src[v] > eps {
                seen[v] = true;
                queue.push_back(v);
            }
        }
        while let Some(v) = queue.pop_front() {
            for k in 0..self.deg {
                let u = self.neighbor(v, k);
                if u == usize::MAX || seen[u] {
                    continue;
                }
                if self.res[v * self.deg + k] > eps {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        seen
    }

    fn sink_reaching(&self, eps: f64) -> Vec<bool> {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::new();
        for v in 0..n {
            if self.snk[v] > eps {
                seen[v] = true;
                queue.push_back(v);
            }
        }
        while let Some(u) = queue.pop_front() {
            for k in 0..self.deg {
                let v = self.neighbor(u, k);
                if v == usize::MAX || seen[v] {
                    continue;
                }
                if self.res[self.reverse_slot(u, k, v)] > eps {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }
}
