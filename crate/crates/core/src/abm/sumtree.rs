//! Binary sum tree over vector-valued leaves.
//!
//! Each leaf holds `K` non-negative components and the weight of a leaf is a
//! linear functional `w · leaf`. Internal nodes store component-wise sums that
//! are recomputed from their children on every update, so no rounding error
//! accumulates over a run.

#[derive(Debug, Clone)]
pub struct SumTree<const K: usize> {
    cap: usize,
    len: usize,
    nodes: Vec<[f64; K]>,
}

fn add<const K: usize>(a: [f64; K], b: [f64; K]) -> [f64; K] {
    std::array::from_fn(|k| a[k] + b[k])
}

fn dot<const K: usize>(w: &[f64; K], v: &[f64; K]) -> f64 {
    w.iter().zip(v).map(|(a, b)| a * b).sum()
}

impl<const K: usize> SumTree<K> {
    pub fn new(len: usize) -> Self {
        let cap = len.next_power_of_two().max(1);
        Self { cap, len, nodes: vec![[0.0; K]; 2 * cap] }
    }

    pub fn from_leaves(leaves: &[[f64; K]]) -> Self {
        let mut t = Self::new(leaves.len());
        t.nodes[t.cap..t.cap + leaves.len()].copy_from_slice(leaves);
        for p in (1..t.cap).rev() {
            t.nodes[p] = add(t.nodes[2 * p], t.nodes[2 * p + 1]);
        }
        t
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn leaf(&self, i: usize) -> [f64; K] {
        self.nodes[self.cap + i]
    }

    pub fn set(&mut self, i: usize, value: [f64; K]) {
        debug_assert!(i < self.len);
        let mut p = self.cap + i;
        self.nodes[p] = value;
        while p > 1 {
            p /= 2;
            self.nodes[p] = add(self.nodes[2 * p], self.nodes[2 * p + 1]);
        }
    }

    /// Component-wise sum over all leaves.
    pub fn total(&self) -> [f64; K] {
        self.nodes[1]
    }

    pub fn weight(&self, w: &[f64; K]) -> f64 {
        dot(w, &self.total())
    }

    /// Leaf `i` with `sum_{j<i} w·leaf_j <= u < sum_{j<=i} w·leaf_j`, never a
    /// zero-weight leaf. `u` is expected in `[0, weight(w))`.
    pub fn sample(&self, w: &[f64; K], mut u: f64) -> usize {
        let mut p = 1;
        while p < self.cap {
            let (l, r) = (dot(w, &self.nodes[2 * p]), dot(w, &self.nodes[2 * p + 1]));
            if r <= 0.0 || (l > 0.0 && u < l) {
                p *= 2;
            } else {
                u -= l;
                p = 2 * p + 1;
            }
        }
        p - self.cap
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn samples_by_functional() {
        let t = SumTree::from_leaves(&[[1.0, 0.0], [0.0, 2.0], [3.0, 0.0]]);
        assert_eq!(t.total(), [4.0, 2.0]);
        let w = [1.0, 0.5];
        assert_eq!(t.weight(&w), 5.0);
        assert_eq!(t.sample(&w, 0.5), 0);
        assert_eq!(t.sample(&w, 1.5), 1);
        assert_eq!(t.sample(&w, 2.5), 2);
        assert_eq!(t.sample(&w, 4.999), 2);
        // zero functional on the second component skips leaf 1
        assert_eq!(t.sample(&[1.0, 0.0], 1.0), 2);
    }

    #[test]
    fn never_lands_on_empty_leaf() {
        let mut t = SumTree::<1>::new(5);
        t.set(3, [2.0]);
        for u in [0.0, 1.0, 1.999_999, 2.0, 2.5] {
            assert_eq!(t.sample(&[1.0], u), 3);
        }
    }

    proptest! {
        #[test]
        fn matches_linear_scan(
            leaves in prop::collection::vec((0.0..10.0f64, 0.0..10.0f64), 1..40),
            w in (0.0..3.0f64, 0.0..3.0f64),
            frac in 0.0..1.0f64,
            updates in prop::collection::vec((0usize..40, 0.0..10.0f64, 0.0..10.0f64), 0..20),
        ) {
            let mut leaves: Vec<[f64; 2]> = leaves.into_iter().map(|(a, b)| [a, b]).collect();
            let mut t = SumTree::from_leaves(&leaves);
            for (i, a, b) in updates {
                let i = i % leaves.len();
                leaves[i] = [a, b];
                t.set(i, [a, b]);
            }
            let w = [w.0, w.1];
            let weights: Vec<f64> = leaves.iter().map(|l| w[0] * l[0] + w[1] * l[1]).collect();
            let total: f64 = weights.iter().sum();
            prop_assume!(total > 1e-9);
            prop_assert!((t.weight(&w) - total).abs() < 1e-9 * total.max(1.0));
            let u = frac * total;
            let got = t.sample(&w, u);
            prop_assert!(weights[got] > 0.0);
            let mut acc = 0.0;
            let mut want = None;
            for (i, &wt) in weights.iter().enumerate() {
                acc += wt;
                if u < acc && wt > 0.0 {
                    want = Some(i);
                    break;
                }
            }
            // rounding can only move the choice across an adjacent boundary
            if let Some(want) = want {
                let lo: f64 = weights[..want].iter().sum();
                let hi = lo + weights[want];
                if u - lo > 1e-9 && hi - u > 1e-9 {
                    prop_assert_eq!(got, want);
                }
            }
        }
    }
}
