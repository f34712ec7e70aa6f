/// Concatenated strategy profile x = (x_1, …, x_n).
///
/// Stored contiguously with a block index so per-player views are slices, not
/// copies; inner loops over large batches stay allocation-free.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StrategyProfile {
    data: Vec<f64>,
    offsets: Vec<usize>,
}

impl StrategyProfile {
    pub fn zeros(dims: &[usize]) -> Self {
        Self::constant(dims, 0.0)
    }

    pub fn constant(dims: &[usize], value: f64) -> Self {
        let mut offsets = Vec::with_capacity(dims.len() + 1);
        let mut acc = 0usize;
        offsets.push(0);
        for &d in dims {
            acc += d;
            offsets.push(acc);
        }
        StrategyProfile { data: vec![value; acc], offsets }
    }

    pub fn from_blocks(blocks: &[Vec<f64>]) -> Self {
        let dims: Vec<usize> = blocks.iter().map(|b| b.len()).collect();
        let mut p = Self::zeros(&dims);
        for (i, b) in blocks.iter().enumerate() {
            p.block_mut(i).copy_from_slice(b);
        }
        p
    }

    /// Rebuild a profile with this one's block structure from a flat slice.
    pub fn with_data(&self, data: &[f64]) -> Self {
        assert_eq!(data.len(), self.total_dim());
        StrategyProfile { data: data.to_vec(), offsets: self.offsets.clone() }
    }

    pub fn n_players(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn dim(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn dims(&self) -> Vec<usize> {
        (0..self.n_players()).map(|i| self.dim(i)).collect()
    }

    pub fn total_dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.data[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        let (lo, hi) = (self.offsets[i], self.offsets[i + 1]);
        &mut self.data[lo..hi]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dist_sq(&self, other: &Self) -> f64 {
        assert_eq!(self.offsets, other.offsets, "profile structure mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn dist(&self, other: &Self) -> f64 {
        self.dist_sq(other).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// self <- self + a * other, blockwise over the whole profile.
    pub fn axpy(&mut self, a: f64, other: &Self) {
        assert_eq!(self.offsets, other.offsets, "profile structure mismatch");
        for (s, o) in self.data.iter_mut().zip(&other.data) {
            *s += a * o;
        }
    }

    /// Sum of the per-player blocks. Requires every block to share one
    /// dimension (the aggregative-game layout).
    pub fn sum_blocks(&self) -> Vec<f64> {
        let d = self.dim(0);
        assert!(
            (0..self.n_players()).all(|i| self.dim(i) == d),
            "sum_blocks needs equal block dimensions"
        );
        let mut z = vec![0.0; d];
        for i in 0..self.n_players() {
            for (zl, xl) in z.iter_mut().zip(self.block(i)) {
                *zl += xl;
            }
        }
        z
    }
}
