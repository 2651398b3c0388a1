//! Exact discrete optimal transport solvers.

use std::cmp::Ordering;

use super::TransportPlan;
use crate::scalar::Real;

/// Minimum-cost perfect matching on an `n × n` row-major cost matrix.
///
/// Shortest augmenting path Hungarian method with potentials, `O(n³)`.
/// Returns `perm` with row `i` matched to column `perm[i]`.
pub fn assignment<T: Real>(n: usize, cost: &[T]) -> Vec<usize> {
    assert_eq!(cost.len(), n * n, "cost matrix must be n × n");
    let inf = T::infinity();
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); n + 1];
    // p[j]: row matched to column j (1-based, 0 = free)
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![inf; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|m| *m = inf);
        used.iter_mut().for_each(|f| *f = false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0usize; n];
    for j in 1..=n {
        perm[p[j] - 1] = j - 1;
    }
    perm
}

fn sorted_order<T: Real>(xs: &[T]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| {
        xs[a]
            .partial_cmp(&xs[b])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx
}

/// Monotone (north-west corner on sorted supports) coupling of two measures
/// on the real line. Optimal for the squared distance with arbitrary weights.
pub fn monotone_plan_1d<T: Real>(xs: &[T], wx: &[T], ys: &[T], wy: &[T]) -> TransportPlan<T> {
    let ox = sorted_order(xs);
    let oy = sorted_order(ys);
    let mut pairs = Vec::with_capacity(xs.len() + ys.len());
    let mut cost = T::zero();
    let (mut i, mut j) = (0usize, 0usize);
    let mut a = wx[ox[0]];
    let mut b = wy[oy[0]];
    while i < ox.len() && j < oy.len() {
        let m = a.min(b);
        if m > T::zero() {
            let (si, tj) = (ox[i], oy[j]);
            let d = xs[si] - ys[tj];
            pairs.push((si, tj, m));
            cost += m * d * d;
        }
        if a <= b {
            b -= a;
            i += 1;
            if i < ox.len() {
                a = wx[ox[i]];
            }
        } else {
            a -= b;
            j += 1;
            if j < oy.len() {
                b = wy[oy[j]];
            }
        }
    }
    TransportPlan { pairs, cost }
}

/// Exact transportation problem between weights `a` (sources) and `b`
/// (sinks) with row-major cost `cost[i * b.len() + j]`.
///
/// Successive shortest paths on the bipartite residual graph with Dijkstra
/// over reduced costs. Every augmentation saturates a supply, a demand or a
/// reverse arc, so the loop is finite.
pub fn transport_plan<T: Real>(a: &[T], b: &[T], cost: &[T]) -> TransportPlan<T> {
    let (n, m) = (a.len(), b.len());
    assert_eq!(cost.len(), n * m, "cost matrix must be n × m");
    let tol = T::of(1e-15);
    let inf = T::infinity();
    let mut supply = a.to_vec();
    let mut demand = b.to_vec();
    let mut flow = vec![T::zero(); n * m];
    let mut pi_src = vec![T::zero(); n];
    let mut pi_snk: Vec<T> = (0..m)
        .map(|j| (0..n).map(|i| cost[i * m + j]).fold(inf, T::min))
        .collect();

    let mut dist_src = vec![inf; n];
    let mut dist_snk = vec![inf; m];
    let mut done_src = vec![false; n];
    let mut done_snk = vec![false; m];
    let mut prev_snk = vec![usize::MAX; m];
    let mut prev_src = vec![usize::MAX; n];

    let max_rounds = 4 * (n + m) * (n + m) + 64;
    for _ in 0..max_rounds {
        if supply.iter().all(|&s| s <= tol) || demand.iter().all(|&d| d <= tol) {
            break;
        }
        for i in 0..n {
            dist_src[i] = if supply[i] > tol { T::zero() } else { inf };
            done_src[i] = false;
            prev_src[i] = usize::MAX;
        }
        for j in 0..m {
            dist_snk[j] = inf;
            done_snk[j] = false;
            prev_snk[j] = usize::MAX;
        }
        let mut target = None;
        loop {
            // dense Dijkstra: pick the closest unsettled node
            let mut best = inf;
            let mut node = None;
            for i in 0..n {
                if !done_src[i] && dist_src[i] < best {
                    best = dist_src[i];
                    node = Some((true, i));
                }
            }
            for j in 0..m {
                if !done_snk[j] && dist_snk[j] < best {
                    best = dist_snk[j];
                    node = Some((false, j));
                }
            }
            let Some((is_src, k)) = node else { break };
            if is_src {
                done_src[k] = true;
                for j in 0..m {
                    if done_snk[j] {
                        continue;
                    }
                    let rc = (cost[k * m + j] + pi_src[k] - pi_snk[j]).max(T::zero());
                    let nd = best + rc;
                    if nd < dist_snk[j] {
                        dist_snk[j] = nd;
                        prev_snk[j] = k;
                    }
                }
            } else {
                done_snk[k] = true;
                if demand[k] > tol {
                    target = Some(k);
                    break;
                }
                for i in 0..n {
                    if done_src[i] || flow[i * m + k] <= tol {
                        continue;
                    }
                    let rc = (pi_snk[k] - cost[i * m + k] - pi_src[i]).max(T::zero());
                    let nd = best + rc;
                    if nd < dist_src[i] {
                        dist_src[i] = nd;
                        prev_src[i] = k;
                    }
                }
            }
        }
        let Some(t) = target else { break };
        let reach = dist_snk[t];
        for i in 0..n {
            pi_src[i] += dist_src[i].min(reach);
        }
        for j in 0..m {
            pi_snk[j] += dist_snk[j].min(reach);
        }

        // walk back to the originating source and find the bottleneck
        let mut delta = demand[t];
        let mut j = t;
        let origin = loop {
            let i = prev_snk[j];
            match prev_src[i] {
                usize::MAX => break i,
                jj => {
                    delta = delta.min(flow[i * m + jj]);
                    j = jj;
                }
            }
        };
        delta = delta.min(supply[origin]);

        let mut j = t;
        loop {
            let i = prev_snk[j];
            flow[i * m + j] += delta;
            match prev_src[i] {
                usize::MAX => break,
                jj => {
                    let f = &mut flow[i * m + jj];
                    *f -= delta;
                    if *f <= tol {
                        *f = T::zero();
                    }
                    j = jj;
                }
            }
        }
        supply[origin] -= delta;
        demand[t] -= delta;
    }

    let mut pairs = Vec::new();
    let mut total = T::zero();
    for i in 0..n {
        for j in 0..m {
            let x = flow[i * m + j];
            if x > T::zero() {
                pairs.push((i, j, x));
                total += x * cost[i * m + j];
            }
        }
    }
    TransportPlan { pairs, cost: total }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assignment_small() {
        let cost = [4.0f64, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0];
        let perm = assignment(3, &cost);
        let total: f64 = perm.iter().enumerate().map(|(i, &j)| cost[i * 3 + j]).sum();
        assert_eq!(total, 5.0);
    }

    #[test]
    fn monotone_unequal_weights() {
        let plan = monotone_plan_1d(&[0.0f64, 1.0], &[0.5, 0.5], &[0.0], &[1.0]);
        assert_eq!(plan.cost, 0.5);
        assert_eq!(plan.pairs.len(), 2);
    }

    #[test]
    fn transport_matches_hand_solution() {
        // two sources, three sinks on a line: 0, 2 → 0, 1, 2
        let a = [0.5f64, 0.5];
        let b = [0.25f64, 0.5, 0.25];
        let xs = [0.0f64, 2.0];
        let ys = [0.0f64, 1.0, 2.0];
        let cost: Vec<f64> = xs
            .iter()
            .flat_map(|x| ys.iter().map(move |y| (x - y) * (x - y)))
            .collect();
        let plan = transport_plan(&a, &b, &cost);
        assert!((plan.cost - 0.5).abs() < 1e-14);
        assert!(plan.marginal_error(&a, &b) < 1e-14);
    }
}
