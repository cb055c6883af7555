/// Binary indexed tree over counts, 1-based ranks.
pub(super) struct Fenwick {
    tree: Vec<u32>,
}

impl Fenwick {
    pub fn new(n: usize) -> Self {
        Fenwick { tree: vec![0; n + 1] }
    }

    pub fn add(&mut self, rank: usize) {
        debug_assert!(rank >= 1);
        let mut i = rank;
        while i < self.tree.len() {
            self.tree[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Number of inserted ranks `<= rank`.
    pub fn prefix(&self, rank: usize) -> u32 {
        let mut i = rank.min(self.tree.len() - 1);
        let mut s = 0;
        while i > 0 {
            s += self.tree[i];
            i &= i - 1;
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefix_counts() {
        let mut f = Fenwick::new(8);
        for r in [3, 1, 3, 8, 5] {
            f.add(r);
        }
        let want = [0, 1, 1, 3, 3, 4, 4, 4, 5];
        for (r, w) in want.iter().enumerate() {
            assert_eq!(f.prefix(r), *w, "rank {r}");
        }
    }
}
