use super::OracleError;
use crate::env::TspInstance;

/// Largest instance accepted by [`held_karp`].
pub const HELD_KARP_CAP: usize = 18;
/// Largest instance accepted by [`tsp_brute_force`].
pub const BRUTE_FORCE_CAP: usize = 10;

/// Optimal closed tour by dynamic programming over subsets. Returns the tour
/// (starting at node 0) and its length.
pub fn held_karp(inst: &TspInstance) -> Result<(Vec<usize>, f64), OracleError> {
    let n = inst.n();
    if n > HELD_KARP_CAP {
        return Err(OracleError::TooLarge { what: "held-karp", size: n, cap: HELD_KARP_CAP });
    }
    if n <= 3 {
        let tour: Vec<usize> = (0..n).collect();
        let len = inst.tour_length(&tour);
        return Ok((tour, len));
    }
    // Subsets of nodes 1..n, bit i <-> node i + 1.
    let m = n - 1;
    let full = 1usize << m;
    let mut dp = vec![f64::INFINITY; full * m];
    let mut parent = vec![u8::MAX; full * m];
    for j in 0..m {
        dp[(1 << j) * m + j] = inst.dist(0, j + 1);
    }
    for set in 1..full {
        for j in 0..m {
            if set & (1 << j) == 0 {
                continue;
            }
            let cur = dp[set * m + j];
            if !cur.is_finite() {
                continue;
            }
            for k in 0..m {
                if set & (1 << k) != 0 {
                    continue;
                }
                let next = set | (1 << k);
                let cand = cur + inst.dist(j + 1, k + 1);
                if cand < dp[next * m + k] {
                    dp[next * m + k] = cand;
                    parent[next * m + k] = j as u8;
                }
            }
        }
    }
    let last_set = full - 1;
    let (mut best, mut last) = (f64::INFINITY, 0);
    for j in 0..m {
        let cand = dp[last_set * m + j] + inst.dist(j + 1, 0);
        if cand < best {
            best = cand;
            last = j;
        }
    }
    let mut tour = Vec::with_capacity(n);
    let mut set = last_set;
    let mut j = last;
    loop {
        tour.push(j + 1);
        let p = parent[set * m + j];
        set &= !(1 << j);
        if p == u8::MAX {
            break;
        }
        j = p as usize;
    }
    tour.push(0);
    tour.reverse();
    Ok((tour, best))
}

/// Optimal tour length by enumerating every permutation with node 0 fixed.
pub fn tsp_brute_force(inst: &TspInstance) -> Result<f64, OracleError> {
    let n = inst.n();
    if n > BRUTE_FORCE_CAP {
        return Err(OracleError::TooLarge { what: "tsp brute force", size: n, cap: BRUTE_FORCE_CAP });
    }
    fn rec(inst: &TspInstance, rest: &mut Vec<usize>, last: usize, acc: f64, best: &mut f64) {
        if rest.is_empty() {
            *best = best.min(acc + inst.dist(last, 0));
            return;
        }
        for i in 0..rest.len() {
            let v = rest.swap_remove(i);
            rec(inst, rest, v, acc + inst.dist(last, v), best);
            rest.push(v);
            let l = rest.len() - 1;
            rest.swap(i, l);
        }
    }
    let mut rest: Vec<usize> = (1..n).collect();
    let mut best = f64::INFINITY;
    rec(inst, &mut rest, 0, 0.0, &mut best);
    Ok(if n == 1 { 0.0 } else { best })
}

/// Nearest-neighbour tour from node 0 (lowest index on distance ties).
pub fn nearest_neighbor_tsp(inst: &TspInstance) -> (Vec<usize>, f64) {
    let n = inst.n();
    let mut visited = vec![false; n];
    let mut tour = vec![0];
    visited[0] = true;
    let mut cur = 0;
    for _ in 1..n {
        let next = (0..n)
            .filter(|&v| !visited[v])
            .min_by(|&a, &b| inst.dist(cur, a).total_cmp(&inst.dist(cur, b)).then(a.cmp(&b)))
            .expect("unvisited node remains");
        visited[next] = true;
        tour.push(next);
        cur = next;
    }
    let len = inst.tour_length(&tour);
    (tour, len)
}
