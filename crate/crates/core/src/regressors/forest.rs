//! Depth-limited regression forest.
//!
//! Every tree sees the full training sample; diversity comes only from the
//! random feature subset (size `ceil(sqrt(d))`) drawn at each split. Splits
//! minimize the summed squared error over midpoints of sorted distinct
//! feature values; ties go to the lower feature index, then the lower
//! threshold.

use rand::seq::index::sample;

use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    /// Arena; index 0 is the root.
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub trees: Vec<Tree>,
    n_features: usize,
}

impl Forest {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn predict_unchecked(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

struct Grower<'a> {
    x: &'a [f64],
    y: &'a [f64],
    d: usize,
    subset: usize,
    max_depth: usize,
    rng: crate::rng::SimRng,
    nodes: Vec<Node>,
}

struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl Grower<'_> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let mean = rows.iter().map(|&i| self.y[i]).sum::<f64>() / rows.len() as f64;
        self.nodes.push(Node::Leaf { value: mean });
        if depth >= self.max_depth || rows.len() < 2 {
            return id;
        }
        let Some(best) = self.best_split(&rows) else {
            return id;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| self.x[i * self.d + best.feature] <= best.threshold);
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    fn best_split(&mut self, rows: &[usize]) -> Option<BestSplit> {
        let mut features = sample(&mut self.rng, self.d, self.subset).into_vec();
        features.sort_unstable();

        let n = rows.len() as f64;
        let total: f64 = rows.iter().map(|&i| self.y[i]).sum();
        let total_sq: f64 = rows.iter().map(|&i| self.y[i] * self.y[i]).sum();
        let parent_sse = total_sq - total * total / n;

        let mut best: Option<BestSplit> = None;
        let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(rows.len());
        for &f in &features {
            pairs.clear();
            pairs.extend(rows.iter().map(|&i| (self.x[i * self.d + f], self.y[i])));
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_sum = 0.0;
            let mut left_sq = 0.0;
            for k in 0..pairs.len() - 1 {
                left_sum += pairs[k].1;
                left_sq += pairs[k].1 * pairs[k].1;
                let (lo, hi) = (pairs[k].0, pairs[k + 1].0);
                if lo == hi {
                    continue;
                }
                let nl = (k + 1) as f64;
                let nr = n - nl;
                let right_sum = total - left_sum;
                let right_sq = total_sq - left_sq;
                let sse = (left_sq - left_sum * left_sum / nl) + (right_sq - right_sum * right_sum / nr);
                let gain = parent_sse - sse;
                let threshold = midpoint(lo, hi);
                if gain > 1e-12 * parent_sse.abs().max(f64::MIN_POSITIVE)
                    && best.as_ref().is_none_or(|b| gain > b.gain)
                {
                    best = Some(BestSplit {
                        gain,
                        feature: f,
                        threshold,
                    });
                }
            }
        }
        best
    }
}

/// Midpoint that stays strictly below `hi` so `x <= threshold` separates.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m >= hi || !m.is_finite() {
        lo
    } else {
        m
    }
}

pub(super) fn fit_forest(x: &[f64], y: &[f64], d: usize, n_trees: usize, max_depth: usize, seed: u64) -> Forest {
    let subset = ((d as f64).sqrt().ceil() as usize).clamp(1, d);
    let trees = (0..n_trees)
        .map(|t| {
            let mut grower = Grower {
                x,
                y,
                d,
                subset,
                max_depth,
                rng: rng_from_seed(derive_seed(seed, t as u64)),
                nodes: Vec::new(),
            };
            grower.grow((0..y.len()).collect(), 0);
            Tree { nodes: grower.nodes }
        })
        .collect();
    Forest { trees, n_features: d }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_leaf_predicts_its_value() {
        let t = Tree {
            nodes: vec![Node::Leaf { value: 4.5 }],
        };
        assert_eq!(t.predict(&[1.0, 2.0]), 4.5);
        assert_eq!(t.depth(), 0);
    }

    #[test]
    fn step_function_is_recovered() {
        let x: Vec<f64> = (0..20).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| if *v < 10.0 { 1.0 } else { 5.0 }).collect();
        let f = fit_forest(&x, &y, 1, 3, 2, 9);
        assert_eq!(f.predict_unchecked(&[3.0]), 1.0);
        assert_eq!(f.predict_unchecked(&[12.0]), 5.0);
        match f.trees[0].nodes[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(feature, 0);
                assert_eq!(threshold, 9.5);
            }
            _ => panic!("root should split"),
        }
    }

    #[test]
    fn constant_response_never_splits() {
        let x: Vec<f64> = (0..30).map(|v| f64::from(v).sin()).collect();
        let y = vec![2.5; 15];
        let f = fit_forest(&x, &y, 2, 4, 3, 1);
        for t in &f.trees {
            assert_eq!(t.nodes.len(), 1);
        }
        assert_eq!(f.predict_unchecked(&[0.1, 0.2]), 2.5);
    }

    #[test]
    fn ties_prefer_lower_feature() {
        // Two identical columns: the split must use feature 0.
        let x: Vec<f64> = (0..10).flat_map(|v| [f64::from(v), f64::from(v)]).collect();
        let y: Vec<f64> = (0..10).map(|v| if v < 4 { 0.0 } else { 1.0 }).collect();
        let f = fit_forest(&x, &y, 2, 5, 1, 17);
        for t in &f.trees {
            assert!(matches!(t.nodes[0], Node::Split { feature: 0, .. }));
        }
    }

    #[test]
    fn midpoint_of_adjacent_floats() {
        let lo = 1.0_f64;
        let hi = f64::from_bits(lo.to_bits() + 1);
        assert_eq!(midpoint(lo, hi), lo);
        assert_eq!(midpoint(1.0, 2.0), 1.5);
    }
}
