//! Minimum-weight bipartite assignment.
//!
//! The solver is the shortest-augmenting-path form of the Hungarian method
//! with row and column potentials. It works on the rectangular matrix
//! directly: every row of the smaller side is matched and surplus columns
//! stay free, which is the same optimum as padding the smaller side with
//! dummy nodes of equal weight. [`CostMatrix::augmented`] builds that padded
//! square form explicitly.

/// Dense cost matrix, rows are SVs and columns are requests. `f64::INFINITY`
/// marks a forbidden pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "cost data does not match shape");
        debug_assert!(data.iter().all(|&c| c >= 0.0 || c.is_nan()));
        CostMatrix { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CostMatrix::new(rows, cols, data)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let data: Vec<f64> = rows
            .iter()
            .inspect(|r| assert_eq!(r.len(), cols, "ragged cost matrix"))
            .flatten()
            .copied()
            .collect();
        CostMatrix::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// Weight for dummy and forbidden edges: `(n + 1) * (max finite + 1)`
    /// with `n` the side of the square augmented matrix.
    pub fn big_m(&self) -> f64 {
        let max_finite = self
            .data
            .iter()
            .copied()
            .filter(|c| c.is_finite())
            .fold(0.0, f64::max);
        (self.rows.max(self.cols) as f64 + 1.0) * (max_finite + 1.0)
    }

    /// Square matrix padded with dummy rows or columns at `big_m`, forbidden
    /// entries replaced by `big_m`. Returned row-major with its side length.
    pub fn augmented(&self) -> (usize, Vec<f64>) {
        let n = self.rows.max(self.cols);
        let m = self.big_m();
        let mut out = vec![m; n * n];
        for i in 0..self.rows {
            for j in 0..self.cols {
                let c = self.get(i, j);
                out[i * n + j] = if c.is_finite() { c } else { m };
            }
        }
        (n, out)
    }
}

/// A partial matching. Pairs are `(row, column)` sorted by row; pairs that
/// would use a dummy or forbidden edge are left out.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Assignment {
    pub pairs: Vec<(usize, usize)>,
    /// Sum of the real edge costs in `pairs`.
    pub objective: f64,
}

impl Assignment {
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }
}

pub fn solve_assignment(costs: &CostMatrix) -> Assignment {
    if costs.rows == 0 || costs.cols == 0 {
        return Assignment::default();
    }
    let big_m = costs.big_m();
    let finite = |c: f64| if c.is_finite() { c } else { big_m };

    let row_to_col: Vec<usize> = if costs.rows <= costs.cols {
        let a: Vec<f64> = costs.data.iter().map(|&c| finite(c)).collect();
        hungarian(costs.rows, costs.cols, &a)
    } else {
        let mut a = Vec::with_capacity(costs.data.len());
        for j in 0..costs.cols {
            for i in 0..costs.rows {
                a.push(finite(costs.get(i, j)));
            }
        }
        let col_to_row = hungarian(costs.cols, costs.rows, &a);
        let mut inv = vec![usize::MAX; costs.rows];
        for (j, &i) in col_to_row.iter().enumerate() {
            inv[i] = j;
        }
        inv
    };

    let mut pairs = Vec::new();
    let mut objective = 0.0;
    for (i, &j) in row_to_col.iter().enumerate() {
        if j == usize::MAX {
            continue;
        }
        let c = costs.get(i, j);
        if c.is_finite() {
            pairs.push((i, j));
            objective += c;
        }
    }
    Assignment { pairs, objective }
}

/// Matches all `n` rows of a row-major `n x m` matrix (`n <= m`) at minimum
/// total cost; returns the column of each row. O(n^2 m).
fn hungarian(n: usize, m: usize, a: &[f64]) -> Vec<usize> {
    debug_assert!(n <= m);
    // 1-based potentials; index 0 is the virtual source
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut minv = vec![0.0f64; m + 1];
    let mut used = vec![false; m + 1];

    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|x| *x = f64::INFINITY);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let base = (i0 - 1) * m;
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = a[base + j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![usize::MAX; n];
    for j in 1..=m {
        if owner[j] != 0 {
            row_to_col[owner[j] - 1] = j - 1;
        }
    }
    row_to_col
}
