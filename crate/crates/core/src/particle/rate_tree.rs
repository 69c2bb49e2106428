/// Binary sum tree over bond rates: `O(log N)` update and proportional selection.
///
/// Internal nodes are always recomputed from their children rather than
/// patched with differences, and [`RateIndex::rebuild`] recomputes every
/// internal node from the leaves.
#[derive(Debug, Clone)]
pub struct RateIndex {
    len: usize,
    cap: usize,
    nodes: Vec<f64>,
}

impl RateIndex {
    pub fn new(rates: &[f64]) -> Self {
        let len = rates.len();
        let cap = len.next_power_of_two().max(1);
        let mut nodes = vec![0.0; 2 * cap];
        nodes[cap..cap + len].copy_from_slice(rates);
        let mut index = RateIndex { len, cap, nodes };
        index.rebuild();
        index
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn rate(&self, i: usize) -> f64 {
        self.nodes[self.cap + i]
    }

    pub fn leaves(&self) -> &[f64] {
        &self.nodes[self.cap..self.cap + self.len]
    }

    pub fn set(&mut self, i: usize, rate: f64) {
        debug_assert!(i < self.len);
        let mut j = self.cap + i;
        self.nodes[j] = rate;
        while j > 1 {
            j >>= 1;
            self.nodes[j] = self.nodes[2 * j] + self.nodes[2 * j + 1];
        }
    }

    pub fn rebuild(&mut self) {
        for j in (1..self.cap).rev() {
            self.nodes[j] = self.nodes[2 * j] + self.nodes[2 * j + 1];
        }
    }

    /// Leaf `i` such that the prefix sum of rates before `i` is `<= target`
    /// and the prefix sum through `i` exceeds it. `None` if rounding leads to a
    /// zero-rate leaf; callers redraw.
    pub fn select(&self, mut target: f64) -> Option<usize> {
        let mut j = 1;
        while j < self.cap {
            let left = self.nodes[2 * j];
            if target < left {
                j *= 2;
            } else {
                target -= left;
                j = 2 * j + 1;
            }
        }
        let i = j - self.cap;
        (i < self.len && self.nodes[j] > 0.0).then_some(i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn totals_track_updates() {
        let mut t = RateIndex::new(&[1.0, 2.0, 3.0]);
        assert_eq!(t.total(), 6.0);
        t.set(1, 0.0);
        assert_eq!(t.total(), 4.0);
        assert_eq!(t.select(0.5), Some(0));
        assert_eq!(t.select(1.5), Some(2));
        assert_eq!(t.leaves(), &[1.0, 0.0, 3.0]);
    }

    #[test]
    fn selection_frequencies_follow_rates() {
        let rates = [0.5, 0.0, 2.0, 1.0, 0.25, 4.0, 0.0];
        let t = RateIndex::new(&rates);
        let mut counts = [0usize; 7];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let draws = 200_000;
        for _ in 0..draws {
            let target = rng.random::<f64>() * t.total();
            counts[t.select(target).unwrap()] += 1;
        }
        let total: f64 = rates.iter().sum();
        for (c, r) in counts.iter().zip(rates) {
            let p = r / total;
            let sd = (p * (1.0 - p) / draws as f64).sqrt();
            assert!((*c as f64 / draws as f64 - p).abs() <= 5.0 * sd + 1e-12);
        }
    }

    #[test]
    fn root_matches_leaf_sum_after_many_updates() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut t = RateIndex::new(&vec![1.0; 100]);
        for _ in 0..100_000 {
            let i = rng.random_range(0..100);
            t.set(i, rng.random::<f64>() * 10.0);
        }
        let direct: f64 = t.leaves().iter().sum();
        assert!((t.total() - direct).abs() <= 1e-12 * direct);
    }
}
