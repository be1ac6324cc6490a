use crate::geometry::{dist, NormSpec, Point};

/// Flat clusters of complete-linkage agglomeration cut at `threshold`: two
/// points share a cluster iff they were merged at a linkage height ≤ threshold.
///
/// Uses the nearest-neighbour chain on a dense distance matrix, so O(n²) time
/// and memory. Clusters come out with ascending members, ordered by their
/// smallest member.
pub fn complete_linkage(points: &[Point], norm: NormSpec, threshold: f64) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = dist(&points[i], &points[j], norm);
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut a: usize) -> usize {
        while parent[a] != a {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        a
    }
    let mut active = vec![true; n];
    let mut remaining = n;
    let mut chain: Vec<usize> = Vec::new();
    while remaining > 1 {
        if chain.is_empty() {
            chain.push(active.iter().position(|&a| a).unwrap_or(0));
        }
        let (a, b) = loop {
            let a = *chain.last().unwrap_or(&0);
            let prev = if chain.len() >= 2 { Some(chain[chain.len() - 2]) } else { None };
            let mut best: Option<usize> = prev;
            let mut best_d = prev.map_or(f64::INFINITY, |p| d[a * n + p]);
            for c in 0..n {
                if c != a && active[c] && d[a * n + c] < best_d {
                    best_d = d[a * n + c];
                    best = Some(c);
                }
            }
            let Some(b) = best else { unreachable!("an active partner exists while two clusters remain") };
            if Some(b) == prev {
                chain.pop();
                chain.pop();
                break (a.min(b), a.max(b));
            }
            chain.push(b);
        };
        let h = d[a * n + b];
        for c in 0..n {
            if active[c] && c != a && c != b {
                let v = d[a * n + c].max(d[b * n + c]);
                d[a * n + c] = v;
                d[c * n + a] = v;
            }
        }
        active[b] = false;
        remaining -= 1;
        if h <= threshold {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(f64, f64)]) -> Vec<Point> {
        v.iter().map(|&(x, y)| Point::xy(x, y)).collect()
    }

    /// Naive agglomeration: repeatedly merge the closest pair under the
    /// max-distance linkage while it stays within the threshold.
    fn naive(points: &[Point], threshold: f64) -> Vec<Vec<usize>> {
        let mut clusters: Vec<Vec<usize>> = (0..points.len()).map(|i| vec![i]).collect();
        let link = |a: &[usize], b: &[usize]| {
            a.iter()
                .flat_map(|&i| b.iter().map(move |&j| (i, j)))
                .map(|(i, j)| dist(&points[i], &points[j], NormSpec::L2))
                .fold(0.0, f64::max)
        };
        loop {
            let mut best = None;
            for i in 0..clusters.len() {
                for j in i + 1..clusters.len() {
                    let h = link(&clusters[i], &clusters[j]);
                    if best.is_none_or(|(_, _, bh)| h < bh) {
                        best = Some((i, j, h));
                    }
                }
            }
            match best {
                Some((i, j, h)) if h <= threshold => {
                    let other = clusters.remove(j);
                    clusters[i].extend(other);
                    clusters[i].sort_unstable();
                }
                _ => break,
            }
        }
        clusters.sort();
        clusters
    }

    #[test]
    fn separated_groups() {
        let p = pts(&[(0.0, 0.0), (0.1, 0.0), (5.0, 5.0), (5.1, 5.0), (10.0, 0.0)]);
        assert_eq!(complete_linkage(&p, NormSpec::L2, 0.5), vec![vec![0, 1], vec![2, 3], vec![4]]);
    }

    #[test]
    fn chain_is_not_single_linkage() {
        // Consecutive gaps of 1 but the ends are 3 apart: complete linkage at 2
        // can't put all four together.
        let p = pts(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0)]);
        let c = complete_linkage(&p, NormSpec::L2, 2.0);
        assert!(c.iter().all(|g| g.len() < 4));
        assert_eq!(c, naive(&p, 2.0));
    }

    #[test]
    fn matches_naive_agglomeration() {
        let mut s = 7u64;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..20 {
            let p: Vec<Point> = (0..25).map(|_| Point::xy(next(), next())).collect();
            let thr = 0.1 + 0.3 * next();
            assert_eq!(complete_linkage(&p, NormSpec::L2, thr), naive(&p, thr));
        }
    }
}
