//! Sequence-form polytope of one party's behavioral strategies.
//!
//! Levels alternate between moves of the cheating party and moves of the
//! honest party; leaves are indexed row-major in level order and a point of
//! the polytope assigns each leaf the product of the cheater's conditional
//! probabilities along its path.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Owner {
    Cheater,
    Honest,
}

#[derive(Clone, Debug)]
pub(crate) struct GameTree {
    pub sizes: Vec<usize>,
    pub owners: Vec<Owner>,
    pub leaves: usize,
}

impl GameTree {
    fn new(levels: Vec<(usize, Owner)>) -> Self {
        let leaves = levels.iter().map(|l| l.0).product();
        let (sizes, owners) = levels.into_iter().unzip();
        GameTree { sizes, owners, leaves }
    }

    /// Levels `x1, y1, ..., xn, yn` with Bob choosing the `y`s.
    pub fn bob(a_dims: &[usize], b_dims: &[usize]) -> Self {
        let mut levels = Vec::new();
        for (&a, &b) in a_dims.iter().zip(b_dims) {
            levels.push((a, Owner::Honest));
            levels.push((b, Owner::Cheater));
        }
        Self::new(levels)
    }

    /// Levels `x1, y1, ..., xn, yn, a` with Alice choosing the `x`s and `a`.
    pub fn alice(a_dims: &[usize], b_dims: &[usize]) -> Self {
        let mut levels = Vec::new();
        for (&a, &b) in a_dims.iter().zip(b_dims) {
            levels.push((a, Owner::Cheater));
            levels.push((b, Owner::Honest));
        }
        levels.push((2, Owner::Cheater));
        Self::new(levels)
    }

    pub fn depth(&self) -> usize {
        self.sizes.len()
    }

    /// Number of nodes at level `k`.
    pub fn nodes(&self, k: usize) -> usize {
        self.sizes[..k].iter().product()
    }

    /// Free parameters of the behavioral parameterization.
    pub fn free_dimension(&self) -> usize {
        (0..self.depth())
            .filter(|&k| self.owners[k] == Owner::Cheater)
            .map(|k| self.nodes(k) * (self.sizes[k] - 1))
            .sum()
    }

    /// Vertex maximizing `⟨g, r⟩`, by backward induction with ties going to
    /// the smallest index. Returns the optimal value.
    pub fn lmo(&self, g: &[f64], out: &mut [f64]) -> f64 {
        let depth = self.depth();
        let mut choice: Vec<Vec<usize>> = vec![Vec::new(); depth];
        let mut below = g.to_vec();
        for k in (0..depth).rev() {
            let size = self.sizes[k];
            let nodes = self.nodes(k);
            let mut cur = vec![0.0; nodes];
            match self.owners[k] {
                Owner::Honest => {
                    for (p, c) in cur.iter_mut().enumerate() {
                        *c = below[p * size..(p + 1) * size].iter().sum();
                    }
                }
                Owner::Cheater => {
                    let mut picks = vec![0usize; nodes];
                    for p in 0..nodes {
                        let row = &below[p * size..(p + 1) * size];
                        let mut best = 0;
                        for i in 1..size {
                            if row[i] > row[best] {
                                best = i;
                            }
                        }
                        picks[p] = best;
                        cur[p] = row[best];
                    }
                    choice[k] = picks;
                }
            }
            below = cur;
        }
        let mut reach = vec![1.0];
        for k in 0..depth {
            let size = self.sizes[k];
            let mut next = vec![0.0; reach.len() * size];
            for (p, &r) in reach.iter().enumerate() {
                if r == 0.0 {
                    continue;
                }
                match self.owners[k] {
                    Owner::Honest => next[p * size..(p + 1) * size].fill(r),
                    Owner::Cheater => next[p * size + choice[k][p]] = r,
                }
            }
            reach = next;
        }
        out.copy_from_slice(&reach);
        below[0]
    }

    /// Realization plan of a behavioral strategy; `behavior[k]` holds the
    /// conditional distributions of cheater level `k`, node-major.
    pub fn realize(&self, behavior: &[Vec<f64>], out: &mut [f64]) {
        let mut reach = vec![1.0];
        for k in 0..self.depth() {
            let size = self.sizes[k];
            let mut next = vec![0.0; reach.len() * size];
            for (p, &r) in reach.iter().enumerate() {
                for i in 0..size {
                    next[p * size + i] = match self.owners[k] {
                        Owner::Honest => r,
                        Owner::Cheater => r * behavior[k][p * size + i],
                    };
                }
            }
            reach = next;
        }
        out.copy_from_slice(&reach);
    }

    /// Every conditional uniform.
    pub fn uniform_behavior(&self) -> Vec<Vec<f64>> {
        (0..self.depth())
            .map(|k| match self.owners[k] {
                Owner::Honest => Vec::new(),
                Owner::Cheater => vec![1.0 / self.sizes[k] as f64; self.nodes(k) * self.sizes[k]],
            })
            .collect()
    }

    /// Maximum violation of the sequence-form constraints.
    pub fn infeasibility(&self, r: &[f64]) -> f64 {
        let mut worst = r.iter().fold(0.0f64, |m, &x| m.max(-x));
        let mut cur = r.to_vec();
        for k in (0..self.depth()).rev() {
            let size = self.sizes[k];
            let nodes = self.nodes(k);
            let mut up = vec![0.0; nodes];
            for p in 0..nodes {
                let row = &cur[p * size..(p + 1) * size];
                match self.owners[k] {
                    Owner::Cheater => up[p] = row.iter().sum(),
                    Owner::Honest => {
                        let first = row[0];
                        for &x in row {
                            worst = worst.max((x - first).abs());
                        }
                        up[p] = row.iter().sum::<f64>() / size as f64;
                    }
                }
            }
            cur = up;
        }
        worst.max((cur[0] - 1.0).abs())
    }

    /// Digits of `leaf` in level order.
    pub fn digits(&self, mut leaf: usize) -> Vec<usize> {
        let mut d = vec![0; self.depth()];
        for k in (0..self.depth()).rev() {
            d[k] = leaf % self.sizes[k];
            leaf /= self.sizes[k];
        }
        d
    }
}
