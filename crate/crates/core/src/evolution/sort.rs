//! Non-dominated sorting and niching. All objectives are maximized.

use std::cmp::Ordering;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("objective vector {index} has dimension {found}, expected {expected}")]
pub struct DimensionMismatch {
    pub index: usize,
    pub expected: usize,
    pub found: usize,
}

/// Whether `a` is at least as good as `b` everywhere and better somewhere.
#[inline]
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return false;
        }
        if x > y {
            strictly = true;
        }
    }
    strictly
}

fn check_dims(scores: &[Vec<f64>]) -> Result<(), DimensionMismatch> {
    let Some(first) = scores.first() else {
        return Ok(());
    };
    let expected = first.len();
    match scores.iter().position(|s| s.len() != expected) {
        Some(index) => Err(DimensionMismatch {
            index,
            expected,
            found: scores[index].len(),
        }),
        None => Ok(()),
    }
}

/// Partitions indices into Pareto fronts, best first. Members of each front
/// are in ascending index order.
pub fn nondominated_sort(scores: &[Vec<f64>]) -> Result<Vec<Vec<usize>>, DimensionMismatch> {
    check_dims(scores)?;
    let n = scores.len();
    let mut dominated_by = vec![0usize; n];
    let mut dominating: Vec<Vec<usize>> = vec![Vec::new(); n];
    for p in 0..n {
        for q in p + 1..n {
            if dominates(&scores[p], &scores[q]) {
                dominating[p].push(q);
                dominated_by[q] += 1;
            } else if dominates(&scores[q], &scores[p]) {
                dominating[q].push(p);
                dominated_by[p] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &p in &current {
            for &q in &dominating[p] {
                dominated_by[q] -= 1;
                if dominated_by[q] == 0 {
                    next.push(q);
                }
            }
        }
        next.sort_unstable();
        fronts.push(std::mem::replace(&mut current, next));
    }
    Ok(fronts)
}

/// Reference implementation: repeatedly peel off the members no remaining
/// member dominates.
pub fn brute_force_fronts(scores: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let mut remaining: Vec<usize> = (0..scores.len()).collect();
    let mut fronts = Vec::new();
    while !remaining.is_empty() {
        let front: Vec<usize> = remaining
            .iter()
            .copied()
            .filter(|&i| !remaining.iter().any(|&j| dominates(&scores[j], &scores[i])))
            .collect();
        remaining.retain(|i| !front.contains(i));
        fronts.push(front);
    }
    fronts
}

/// Crowding distance of each member of `front` (parallel to `front`).
/// Boundary members get infinity.
pub fn crowding_distance(front: &[usize], scores: &[Vec<f64>]) -> Vec<f64> {
    let m = front.len();
    let mut dist = vec![0.0; m];
    if m <= 2 {
        return vec![f64::INFINITY; m];
    }
    let dims = scores[front[0]].len();
    let mut order: Vec<usize> = (0..m).collect();
    for d in 0..dims {
        order.sort_by(|&a, &b| {
            scores[front[a]][d]
                .partial_cmp(&scores[front[b]][d])
                .unwrap_or(Ordering::Equal)
                .then(front[a].cmp(&front[b]))
        });
        let lo = scores[front[order[0]]][d];
        let hi = scores[front[order[m - 1]]][d];
        dist[order[0]] = f64::INFINITY;
        dist[order[m - 1]] = f64::INFINITY;
        if hi > lo {
            for w in 1..m - 1 {
                let gap = scores[front[order[w + 1]]][d] - scores[front[order[w - 1]]][d];
                dist[order[w]] += gap / (hi - lo);
            }
        }
    }
    dist
}

/// Orders the members of a partially consumed front by preference.
pub trait Niching: Send + Sync {
    fn rank(&self, front: &[usize], scores: &[Vec<f64>]) -> Vec<usize>;
}

/// Largest crowding distance first; ties by population index.
#[derive(Clone, Copy, Debug, Default)]
pub struct CrowdingDistance;

impl Niching for CrowdingDistance {
    fn rank(&self, front: &[usize], scores: &[Vec<f64>]) -> Vec<usize> {
        let dist = crowding_distance(front, scores);
        let mut order: Vec<usize> = (0..front.len()).collect();
        order.sort_by(|&a, &b| {
            dist[b]
                .partial_cmp(&dist[a])
                .unwrap_or(Ordering::Equal)
                .then(front[a].cmp(&front[b]))
        });
        order.into_iter().map(|i| front[i]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_objective_groups_equal_scores() {
        let s = vec![vec![0.5], vec![1.0], vec![0.5], vec![0.0]];
        assert_eq!(
            nondominated_sort(&s).unwrap(),
            vec![vec![1], vec![0, 2], vec![3]]
        );
    }

    #[test]
    fn mutually_nondominating() {
        let s = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5]];
        assert_eq!(nondominated_sort(&s).unwrap(), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn dimension_mismatch() {
        let s = vec![vec![1.0, 0.0], vec![0.0]];
        assert_eq!(
            nondominated_sort(&s),
            Err(DimensionMismatch {
                index: 1,
                expected: 2,
                found: 1
            })
        );
    }

    #[test]
    fn equal_vectors_share_a_front() {
        let s = vec![vec![0.3, 0.3], vec![0.3, 0.3]];
        assert_eq!(nondominated_sort(&s).unwrap(), vec![vec![0, 1]]);
    }

    #[test]
    fn crowding_prefers_boundaries() {
        let s = vec![
            vec![0.0, 1.0],
            vec![0.4, 0.6],
            vec![0.5, 0.5],
            vec![1.0, 0.0],
        ];
        let d = crowding_distance(&[0, 1, 2, 3], &s);
        assert!(d[0].is_infinite() && d[3].is_infinite());
        // interior: (0.5 - 0.0) + (1.0 - 0.5) = 1.0 and (1.0 - 0.4) + (0.6 - 0.0) = 1.2
        assert!((d[1] - 1.0).abs() < 1e-12);
        assert!((d[2] - 1.2).abs() < 1e-12);
        assert_eq!(CrowdingDistance.rank(&[0, 1, 2, 3], &s), vec![0, 3, 2, 1]);
    }
}
