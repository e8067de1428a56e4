//! Exact balanced transportation problem solved as min-cost flow.
//!
//! Supplies and demands are integers; costs are non-negative reals. The
//! solver runs successive shortest paths with Johnson potentials on the dense
//! bipartite graph `source → supply node → demand node → sink`. Graphs here
//! have a few dozen nodes, so O(V²) Dijkstra per augmentation is fine.

/// Integer-valued optimal flow for a balanced instance.
#[derive(Debug, Clone)]
pub(crate) struct IntegerPlan {
    /// `flow[i][j]` units shipped from supply `i` to demand `j`.
    pub flow: Vec<Vec<i64>>,
}

/// Solves `min Σ cost[i][j]·x[i][j]` subject to row sums `supply` and
/// column sums `demand`, `x ≥ 0`.
///
/// Panics if totals differ, any amount is negative, or `cost` is not
/// `supply.len() × demand.len()` with finite non-negative entries.
pub(crate) fn solve(supply: &[i64], demand: &[i64], cost: &[Vec<f64>]) -> IntegerPlan {
    let m = supply.len();
    let n = demand.len();
    assert_eq!(supply.iter().sum::<i64>(), demand.iter().sum::<i64>(), "unbalanced instance");
    assert!(supply.iter().chain(demand).all(|&x| x >= 0));
    assert_eq!(cost.len(), m);
    assert!(cost.iter().all(|row| row.len() == n && row.iter().all(|c| c.is_finite() && *c >= 0.0)));

    // Node layout: 0 = source, 1..=m supplies, m+1..=m+n demands, m+n+1 = sink.
    let nodes = m + n + 2;
    let src = 0;
    let sink = m + n + 1;
    let sup = |i: usize| 1 + i;
    let dem = |j: usize| 1 + m + j;

    let mut left = supply.to_vec();
    let mut need = demand.to_vec();
    let mut flow = vec![vec![0i64; n]; m];
    let mut potential = vec![0.0f64; nodes];
    let mut remaining: i64 = supply.iter().sum();

    let mut dist = vec![f64::INFINITY; nodes];
    let mut parent = vec![usize::MAX; nodes];
    let mut done = vec![false; nodes];

    while remaining > 0 {
        dist.fill(f64::INFINITY);
        parent.fill(usize::MAX);
        done.fill(false);
        dist[src] = 0.0;

        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for (v, &d) in dist.iter().enumerate() {
                if !done[v] && d < best {
                    best = d;
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            let mut relax = |v: usize, edge_cost: f64| {
                // Rounding can push a reduced cost a hair below zero.
                let reduced = (edge_cost + potential[u] - potential[v]).max(0.0);
                let cand = dist[u] + reduced;
                if cand < dist[v] {
                    dist[v] = cand;
                    parent[v] = u;
                }
            };
            if u == src {
                for (i, &l) in left.iter().enumerate() {
                    if l > 0 {
                        relax(sup(i), 0.0);
                    }
                }
            } else if u <= m {
                let i = u - 1;
                for (j, &c) in cost[i].iter().enumerate() {
                    relax(dem(j), c);
                }
            } else if u < sink {
                let j = u - 1 - m;
                for i in 0..m {
                    if flow[i][j] > 0 {
                        relax(sup(i), -cost[i][j]);
                    }
                }
                if need[j] > 0 {
                    relax(sink, 0.0);
                }
            }
        }

        assert!(dist[sink].is_finite(), "balanced transport instance must stay feasible");
        for v in 0..nodes {
            if dist[v].is_finite() {
                potential[v] += dist[v];
            }
        }

        // Walk back from the sink to find the bottleneck, then push.
        let mut path = vec![sink];
        let mut v = sink;
        while v != src {
            v = parent[v];
            path.push(v);
        }
        path.reverse();

        let mut push = remaining;
        for w in path.windows(2) {
            let (a, b) = (w[0], w[1]);
            let cap = if a == src {
                left[b - 1]
            } else if b == sink {
                need[a - 1 - m]
            } else if a <= m {
                i64::MAX
            } else {
                flow[b - 1][a - 1 - m]
            };
            push = push.min(cap);
        }
        debug_assert!(push > 0);
        for w in path.windows(2) {
            let (a, b) = (w[0], w[1]);
            if a == src {
                left[b - 1] -= push;
            } else if b == sink {
                need[a - 1 - m] -= push;
            } else if a <= m {
                flow[a - 1][b - 1 - m] += push;
            } else {
                flow[b - 1][a - 1 - m] -= push;
            }
        }
        remaining -= push;
    }

    IntegerPlan { flow }
}

/// Scales non-negative weights summing to ~1 onto integers summing to exactly
/// `scale`, using largest-remainder rounding so every entry is within one
/// unit of `w·scale`.
pub(crate) fn scale_weights(weights: &[f64], scale: i64) -> Vec<i64> {
    let total: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / total * scale as f64).collect();
    let mut units: Vec<i64> = exact.iter().map(|x| x.floor() as i64).collect();
    let mut short = scale - units.iter().sum::<i64>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut k = 0;
    while short > 0 {
        units[order[k % order.len()]] += 1;
        short -= 1;
        k += 1;
    }
    while short < 0 {
        let i = order[order.len() - 1 - (k % order.len())];
        if units[i] > 0 {
            units[i] -= 1;
            short += 1;
        }
        k += 1;
    }
    units
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan_cost(plan: &IntegerPlan, cost: &[Vec<f64>]) -> f64 {
        plan.flow.iter().zip(cost).flat_map(|(r, c)| r.iter().zip(c).map(|(f, c)| *f as f64 * c)).sum()
    }

    #[test]
    fn forced_single_cell() {
        let plan = solve(&[5], &[5], &[vec![2.0]]);
        assert_eq!(plan.flow, vec![vec![5]]);
    }

    #[test]
    fn prefers_cheap_diagonal() {
        let cost = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let plan = solve(&[3, 7], &[3, 7], &cost);
        assert_eq!(plan.flow, vec![vec![3, 0], vec![0, 7]]);
        assert_eq!(plan_cost(&plan, &cost), 0.0);
    }

    #[test]
    fn needs_reverse_edge() {
        // Greedy on the cheapest cell (0,0) is suboptimal; the solver must
        // reroute through a reverse edge.
        let cost = vec![vec![1.0, 2.0], vec![1.0, 100.0]];
        let plan = solve(&[1, 1], &[1, 1], &cost);
        assert_eq!(plan.flow, vec![vec![0, 1], vec![1, 0]]);
        assert_eq!(plan_cost(&plan, &cost), 3.0);
    }

    #[test]
    fn marginals_hold() {
        let cost = vec![vec![0.3, 1.2, 0.8], vec![0.9, 0.1, 0.4]];
        let plan = solve(&[40, 60], &[25, 35, 40], &cost);
        for (i, s) in [40, 60].iter().enumerate() {
            assert_eq!(plan.flow[i].iter().sum::<i64>(), *s);
        }
        for (j, d) in [25, 35, 40].iter().enumerate() {
            assert_eq!(plan.flow.iter().map(|r| r[j]).sum::<i64>(), *d);
        }
    }

    #[test]
    fn scaling_is_exact_and_close() {
        let w = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];
        let u = scale_weights(&w, 1_000_000_000_000);
        assert_eq!(u.iter().sum::<i64>(), 1_000_000_000_000);
        for (x, w) in u.iter().zip(w) {
            assert!((*x as f64 / 1e12 - w).abs() <= 1e-12);
        }
    }
}
