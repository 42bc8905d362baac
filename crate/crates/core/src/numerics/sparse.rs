/// Compressed sparse row index: for each row `r`, `targets[offsets[r]..offsets[r + 1]]`
/// lists the column ids attached to it. Entry positions double as edge ids for
/// per-edge tensors (attention scores, attention weights).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Csr {
    offsets: Vec<usize>,
    targets: Vec<usize>,
}

impl Csr {
    /// Builds a CSR index over `rows` rows from `(row, target)` pairs, keeping
    /// the input order within each row.
    pub fn from_pairs(rows: usize, pairs: impl IntoIterator<Item = (usize, usize)> + Clone) -> Self {
        let mut counts = vec![0usize; rows + 1];
        for (r, _) in pairs.clone() {
            counts[r + 1] += 1;
        }
        for r in 0..rows {
            counts[r + 1] += counts[r];
        }
        let offsets = counts.clone();
        let mut cursor = counts;
        let mut targets = vec![0usize; offsets[rows]];
        for (r, t) in pairs {
            targets[cursor[r]] = t;
            cursor[r] += 1;
        }
        Csr { offsets, targets }
    }

    pub fn rows(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.targets.len()
    }

    pub fn row(&self, r: usize) -> &[usize] {
        &self.targets[self.offsets[r]..self.offsets[r + 1]]
    }

    pub fn row_range(&self, r: usize) -> std::ops::Range<usize> {
        self.offsets[r]..self.offsets[r + 1]
    }

    pub fn degree(&self, r: usize) -> usize {
        self.offsets[r + 1] - self.offsets[r]
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    /// Largest target id + 1, or 0 when empty.
    pub fn max_target(&self) -> usize {
        self.targets.iter().max().map_or(0, |&t| t + 1)
    }
}
