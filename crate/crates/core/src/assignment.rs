//! Rectangular linear assignment with forbidden pairs.
//!
//! The solver returns, among all one-to-one matchings that use only allowed
//! pairs, one with the largest number of pairs and, among those, the smallest
//! total cost. Forbidden pairs are priced above any possible sum of allowed
//! costs and stripped from the result, which reduces the problem to a plain
//! Hungarian (shortest augmenting path with potentials) solve.

/// Result of [`solve`]. All index lists are ascending.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Assignment {
    /// `(row, col)` pairs sorted by row.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
}

impl Assignment {
    fn all_unmatched(rows: usize, cols: usize) -> Self {
        Self {
            matches: Vec::new(),
            unmatched_rows: (0..rows).collect(),
            unmatched_cols: (0..cols).collect(),
        }
    }
}

/// Dense cost matrix, `None` marking a forbidden pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Option<f64>>,
}

impl CostMatrix {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Option<f64>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let v = f(r, c);
                debug_assert!(v.is_none_or(|v| v.is_finite() && v >= 0.0));
                data.push(v);
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Option<f64> {
        self.data[r * self.cols + c]
    }
}

/// Cost matrix `1 - similarity`, forbidding pairs whose similarity is not
/// strictly above `floor`.
pub fn similarity_costs(
    rows: usize,
    cols: usize,
    floor: f64,
    mut similarity: impl FnMut(usize, usize) -> f64,
) -> CostMatrix {
    CostMatrix::from_fn(rows, cols, |r, c| {
        let s = similarity(r, c);
        (s > floor).then(|| (1.0 - s).max(0.0))
    })
}

pub fn solve(costs: &CostMatrix) -> Assignment {
    let (rows, cols) = (costs.rows, costs.cols);
    if rows == 0 || cols == 0 || costs.data.iter().all(Option::is_none) {
        return Assignment::all_unmatched(rows, cols);
    }

    let max_cost = costs.data.iter().flatten().fold(0.0f64, |m, &v| m.max(v));
    let forbidden = (max_cost + 1.0) * (rows.min(cols) as f64 + 1.0);

    // The solver wants rows <= cols.
    let transpose = rows > cols;
    let (n, m) = if transpose { (cols, rows) } else { (rows, cols) };
    let cost = |i: usize, j: usize| -> f64 {
        let v = if transpose {
            costs.get(j, i)
        } else {
            costs.get(i, j)
        };
        v.unwrap_or(forbidden)
    };

    let row_of_col = hungarian(n, m, cost);

    let mut matches = Vec::new();
    for (j, row) in row_of_col.iter().enumerate() {
        if let Some(i) = *row {
            let (r, c) = if transpose { (j, i) } else { (i, j) };
            if costs.get(r, c).is_some() {
                matches.push((r, c));
            }
        }
    }
    matches.sort_unstable();

    let mut row_used = vec![false; rows];
    let mut col_used = vec![false; cols];
    for &(r, c) in &matches {
        row_used[r] = true;
        col_used[c] = true;
    }
    Assignment {
        matches,
        unmatched_rows: (0..rows).filter(|&r| !row_used[r]).collect(),
        unmatched_cols: (0..cols).filter(|&c| !col_used[c]).collect(),
    }
}

/// Minimum-cost assignment of every row to a distinct column (`n <= m`).
/// Returns the row assigned to each column.
fn hungarian(n: usize, m: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<Option<usize>> {
    debug_assert!(n <= m);
    // 1-based with a virtual column 0, following the classic potentials formulation.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut minv = vec![0.0f64; m + 1];
    let mut used = vec![false; m + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|x| *x = f64::INFINITY);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
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
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    (1..=m).map(|j| (p[j] != 0).then(|| p[j] - 1)).collect()
}
