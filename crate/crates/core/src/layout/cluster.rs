use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::AssociationMatrix;

/// One agglomeration step, children in leaf order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub first: Vec<String>,
    pub second: Vec<String>,
    pub distance: f64,
}

struct Cluster {
    leaves: Vec<usize>,
    least: String,
}

fn child_order(a: &Cluster, b: &Cluster) -> Ordering {
    a.leaves
        .len()
        .cmp(&b.leaves.len())
        .then_with(|| a.least.cmp(&b.least))
}

/// Average-linkage agglomeration on `1 - assoc`.
///
/// Returns the dendrogram leaf order and the merge history. The closest pair
/// is merged first, ties broken by the lexicographically least member names.
/// The two children of a merge are ordered by size, then by least member.
pub fn average_linkage_order(assoc: &AssociationMatrix) -> (Vec<usize>, Vec<Merge>) {
    let names = assoc.names();
    let mut clusters: Vec<Cluster> = names
        .iter()
        .enumerate()
        .map(|(i, n)| Cluster {
            leaves: vec![i],
            least: n.to_string(),
        })
        .collect();
    let mut merges = Vec::new();

    while clusters.len() > 1 {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let mut total = 0.0;
                for &i in &clusters[a].leaves {
                    for &j in &clusters[b].leaves {
                        total += 1.0 - assoc.get(i, j);
                    }
                }
                let d = total / (clusters[a].leaves.len() * clusters[b].leaves.len()) as f64;
                let better = match best {
                    None => true,
                    Some((bd, ba, bb)) => match d.total_cmp(&bd) {
                        Ordering::Less => true,
                        Ordering::Greater => false,
                        Ordering::Equal => {
                            pair_key(&clusters[a], &clusters[b]) < pair_key(&clusters[ba], &clusters[bb])
                        }
                    },
                };
                if better {
                    best = Some((d, a, b));
                }
            }
        }
        let (distance, a, b) = best.expect("at least two clusters");
        let cb = clusters.remove(b);
        let ca = clusters.remove(a);
        let (first, second) = if child_order(&ca, &cb) == Ordering::Greater {
            (cb, ca)
        } else {
            (ca, cb)
        };
        merges.push(Merge {
            first: first.leaves.iter().map(|&i| names[i].to_string()).collect(),
            second: second.leaves.iter().map(|&i| names[i].to_string()).collect(),
            distance,
        });
        let least = first.least.clone().min(second.least.clone());
        let mut leaves = first.leaves;
        leaves.extend(second.leaves);
        clusters.push(Cluster { leaves, least });
    }
    let order = clusters.pop().map(|c| c.leaves).unwrap_or_default();
    (order, merges)
}

fn pair_key<'a>(a: &'a Cluster, b: &'a Cluster) -> (&'a str, &'a str) {
    if a.least <= b.least {
        (&a.least, &b.least)
    } else {
        (&b.least, &a.least)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(names: &[&str], upper: &[f64]) -> AssociationMatrix {
        let n = names.len();
        let mut v = vec![0.0; n * n];
        let mut k = 0;
        for i in 0..n {
            v[i * n + i] = 1.0;
            for j in i + 1..n {
                v[i * n + j] = upper[k];
                v[j * n + i] = upper[k];
                k += 1;
            }
        }
        AssociationMatrix::from_values(names.iter().map(|s| s.to_string()).collect(), v).unwrap()
    }

    #[test]
    fn strongly_associated_pair_is_adjacent() {
        // (A,B)=0.9, (A,C)=0.1, (B,C)=0.1
        let m = matrix(&["A", "B", "C"], &[0.9, 0.1, 0.1]);
        let (order, merges) = average_linkage_order(&m);
        assert_eq!(order, vec![2, 0, 1]);
        assert_eq!(merges[0].first, ["A"]);
        assert_eq!(merges[0].second, ["B"]);
        assert!((merges[0].distance - 0.1).abs() < 1e-12);
        assert!((merges[1].distance - 0.9).abs() < 1e-12);
    }

    #[test]
    fn ties_break_by_name() {
        let m = matrix(&["d", "c", "b", "a"], &[0.5; 6]);
        let (order, merges) = average_linkage_order(&m);
        assert_eq!(merges[0].first, ["a"]);
        assert_eq!(merges[0].second, ["b"]);
        let again = average_linkage_order(&m).0;
        assert_eq!(order, again);
    }

    #[test]
    fn single_column() {
        let m = matrix(&["only"], &[]);
        assert_eq!(average_linkage_order(&m).0, vec![0]);
    }
}
