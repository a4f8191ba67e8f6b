use crate::error::{Error, Result};
use crate::math::{mix, RngStream};
use serde::{Deserialize, Serialize};

/// Gini impurity of binary class counts: 1 - sum((c_i/n)^2).
pub fn gini(counts: &[usize; 2]) -> Result<f64> {
    let n = counts[0] + counts[1];
    if n == 0 {
        return Err(Error::precondition("gini: all-zero counts"));
    }
    let p0 = counts[0] as f64 / n as f64;
    let p1 = counts[1] as f64 / n as f64;
    Ok(1.0 - p0 * p0 - p1 * p1)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        counts: [usize; 2],
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionTree {
    pub root: TreeNode,
}

impl DecisionTree {
    /// Class vote of the leaf reached by `x`; count ties go to label 0.
    pub fn predict(&self, x: &[f64]) -> u8 {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { counts } => return (counts[1] > counts[0]) as u8,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(node: &TreeNode) -> usize {
            match node {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(left).max(walk(right)),
            }
        }
        walk(&self.root)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestHyper {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// features tried per split; None means floor(sqrt(d)) (at least 1)
    pub mtry: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestHyper {
    fn default() -> Self {
        ForestHyper {
            n_trees: 100,
            max_depth: 12,
            min_leaf: 2,
            mtry: None,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    pub hyper: ForestHyper,
    pub seed: u64,
    pub n_features: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vote {
    pub label: u8,
    /// votes for the predicted class / n_trees
    pub vote_fraction: f64,
    votes_for_one: f64,
}

impl Vote {
    /// Fraction of trees voting deceptive, usable as a probability.
    pub fn probability_of_one(&self) -> f64 {
        self.votes_for_one
    }
}

impl RandomForest {
    /// Majority vote; exact ties break toward label 0.
    pub fn predict(&self, x: &[f64]) -> Result<Vote> {
        if x.len() != self.n_features {
            return Err(Error::shape(format!(
                "rf_predict: input length {} != {} features",
                x.len(),
                self.n_features
            )));
        }
        let ones = self.trees.iter().filter(|t| t.predict(x) == 1).count();
        let n = self.trees.len();
        let label = (2 * ones > n) as u8;
        let votes = if label == 1 { ones } else { n - ones };
        Ok(Vote {
            label,
            vote_fraction: votes as f64 / n as f64,
            votes_for_one: ones as f64 / n as f64,
        })
    }
}

struct TreeBuilder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [u8],
    max_depth: usize,
    min_leaf: usize,
    mtry: usize,
}

impl<'a> TreeBuilder<'a> {
    fn counts(&self, idx: &[usize]) -> [usize; 2] {
        let ones = idx.iter().filter(|&&i| self.y[i] == 1).count();
        [idx.len() - ones, ones]
    }

    fn build(&self, idx: &mut Vec<usize>, depth: usize, rng: &mut RngStream) -> TreeNode {
        let counts = self.counts(idx);
        if depth >= self.max_depth
            || counts[0] == 0
            || counts[1] == 0
            || idx.len() < 2 * self.min_leaf
        {
            return TreeNode::Leaf { counts };
        }

        let d = self.x[0].len();
        let mut feats: Vec<usize> = (0..d).collect();
        rng.shuffle(&mut feats);
        feats.truncate(self.mtry);
        feats.sort_unstable(); // stable split search order

        let parent_gini = gini(&counts).unwrap();
        let n = idx.len() as f64;
        let mut best: Option<(f64, usize, f64)> = None; // (impurity, feature, threshold)

        for &f in &feats {
            let mut order: Vec<usize> = idx.clone();
            order.sort_by(|&a, &b| self.x[a][f].partial_cmp(&self.x[b][f]).unwrap());
            let mut left = [0usize; 2];
            let mut right = self.counts(idx);
            for pos in 0..order.len() - 1 {
                let i = order[pos];
                left[self.y[i] as usize] += 1;
                right[self.y[i] as usize] -= 1;
                let v = self.x[i][f];
                let next = self.x[order[pos + 1]][f];
                if v == next {
                    continue;
                }
                let n_left = pos + 1;
                let n_right = order.len() - n_left;
                if n_left < self.min_leaf || n_right < self.min_leaf {
                    continue;
                }
                let impurity = (n_left as f64 * gini(&left).unwrap()
                    + n_right as f64 * gini(&right).unwrap())
                    / n;
                let threshold = 0.5 * (v + next);
                // first candidate wins ties; features and thresholds are
                // scanned in ascending order so this is deterministic
                if best.map_or(true, |(bi, _, _)| impurity < bi) {
                    best = Some((impurity, f, threshold));
                }
            }
        }

        let Some((impurity, feature, threshold)) = best else {
            return TreeNode::Leaf { counts };
        };
        if impurity >= parent_gini {
            return TreeNode::Leaf { counts };
        }

        let (mut left_idx, mut right_idx): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| self.x[i][feature] <= threshold);
        let left = self.build(&mut left_idx, depth + 1, rng);
        let right = self.build(&mut right_idx, depth + 1, rng);
        TreeNode::Split {
            feature,
            threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }
}

/// Fit a bagged forest. Each tree gets a bootstrap resample and its own
/// seed-split stream (child i = mix(seed, i)), so results are identical
/// regardless of training schedule.
pub fn rf_fit(
    x: &[Vec<f64>],
    y: &[u8],
    hyper: &ForestHyper,
    rng: &mut RngStream,
) -> Result<RandomForest> {
    if x.len() != y.len() {
        return Err(Error::shape(format!(
            "rf_fit: {} rows vs {} labels",
            x.len(),
            y.len()
        )));
    }
    let ones = y.iter().filter(|&&l| l == 1).count();
    if ones < 2 || y.len() - ones < 2 {
        return Err(Error::precondition(
            "rf_fit: need at least 2 samples per class",
        ));
    }
    let d = x[0].len();
    let mtry = hyper.mtry.unwrap_or(((d as f64).sqrt().floor() as usize).max(1)).min(d);
    let seed = rng.next_u64();

    let trees: Vec<DecisionTree> = (0..hyper.n_trees)
        .map(|t| {
            let mut tree_rng = RngStream::new(mix(seed, t as u64));
            let mut idx: Vec<usize> = if hyper.bootstrap {
                (0..x.len()).map(|_| tree_rng.next_below(x.len())).collect()
            } else {
                (0..x.len()).collect()
            };
            let builder = TreeBuilder {
                x,
                y,
                max_depth: hyper.max_depth,
                min_leaf: hyper.min_leaf,
                mtry,
            };
            DecisionTree {
                root: builder.build(&mut idx, 0, &mut tree_rng),
            }
        })
        .collect();

    Ok(RandomForest {
        trees,
        hyper: hyper.clone(),
        seed,
        n_features: d,
    })
}
