//! Exact maximum flow on integer capacities (Dinic's blocking-flow method).

use std::collections::VecDeque;

/// Capacity treated as infinite. Kept well below `i64::MAX` so sums of a
/// few infinite arcs cannot overflow.
pub const INF_CAPACITY: i64 = i64::MAX / 4;

#[derive(Clone, Debug)]
struct Arc {
    to: usize,
    cap: i64,
}

/// Directed flow network with paired residual arcs.
#[derive(Clone, Debug)]
pub struct FlowNetwork {
    n: usize,
    arcs: Vec<Arc>,
    adj: Vec<Vec<usize>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FlowStats {
    pub phases: usize,
    pub augmenting_paths: usize,
}

impl FlowNetwork {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            arcs: Vec::new(),
            adj: vec![Vec::new(); n],
        }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Adds `u → v` with capacity `cap ≥ 0`; returns the arc id.
    pub fn add_arc(&mut self, u: usize, v: usize, cap: i64) -> usize {
        debug_assert!(cap >= 0);
        let id = self.arcs.len();
        self.arcs.push(Arc { to: v, cap });
        self.arcs.push(Arc { to: u, cap: 0 });
        self.adj[u].push(id);
        self.adj[v].push(id + 1);
        id
    }

    fn levels(&self, s: usize, t: usize) -> Option<Vec<u32>> {
        let mut level = vec![u32::MAX; self.n];
        level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let a = &self.arcs[e];
                if a.cap > 0 && level[a.to] == u32::MAX {
                    level[a.to] = level[u] + 1;
                    queue.push_back(a.to);
                }
            }
        }
        (level[t] != u32::MAX).then_some(level)
    }

    /// Iterative DFS pushing one augmenting path along the level graph.
    fn augment(&mut self, s: usize, t: usize, level: &[u32], next: &mut [usize]) -> i64 {
        let mut path: Vec<usize> = Vec::new();
        let mut u = s;
        loop {
            if u == t {
                let push = path.iter().map(|&e| self.arcs[e].cap).min().unwrap_or(0);
                for &e in &path {
                    self.arcs[e].cap -= push;
                    self.arcs[e ^ 1].cap += push;
                }
                return push;
            }
            let mut advanced = false;
            while next[u] < self.adj[u].len() {
                let e = self.adj[u][next[u]];
                let a = &self.arcs[e];
                if a.cap > 0 && level[a.to] == level[u] + 1 {
                    path.push(e);
                    u = a.to;
                    advanced = true;
                    break;
                }
                next[u] += 1;
            }
            if !advanced {
                // Dead end: retreat and skip the arc that led here.
                let Some(e) = path.pop() else { return 0 };
                u = self.arcs[e ^ 1].to;
                next[u] += 1;
            }
        }
    }

    /// Pushes a maximum flow from `s` to `t` and returns its value.
    pub fn max_flow(&mut self, s: usize, t: usize) -> (i64, FlowStats) {
        let mut total = 0i64;
        let mut stats = FlowStats::default();
        while let Some(level) = self.levels(s, t) {
            stats.phases += 1;
            let mut next = vec![0usize; self.n];
            loop {
                let f = self.augment(s, t, &level, &mut next);
                if f == 0 {
                    break;
                }
                stats.augmenting_paths += 1;
                total = total.saturating_add(f);
            }
        }
        (total, stats)
    }

    /// Nodes reachable from `s` in the residual network (the minimal source
    /// side of a minimum cut). Call after [`Self::max_flow`].
    pub fn source_side(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.n];
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            for &e in &self.adj[u] {
                let a = &self.arcs[e];
                if a.cap > 0 && !seen[a.to] {
                    seen[a.to] = true;
                    stack.push(a.to);
                }
            }
        }
        seen
    }

    /// Complement of the nodes that can reach `t` in the residual network
    /// (the maximal source side of a minimum cut).
    pub fn maximal_source_side(&self, t: usize) -> Vec<bool> {
        let mut reaches = vec![false; self.n];
        reaches[t] = true;
        let mut stack = vec![t];
        while let Some(v) = stack.pop() {
            // Residual arc u → v exists when the reverse of an arc v → u has capacity.
            for &e in &self.adj[v] {
                let u = self.arcs[e].to;
                if self.arcs[e ^ 1].cap > 0 && !reaches[u] {
                    reaches[u] = true;
                    stack.push(u);
                }
            }
        }
        reaches.into_iter().map(|r| !r).collect()
    }
}
