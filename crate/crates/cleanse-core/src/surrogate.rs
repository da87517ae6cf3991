//! The quadratic surrogate of the transformed validation loss.
//!
//! A selection vector q expands to [1, q_1..q_n, q_1q_2, .., q_{n-1}q_n];
//! the surrogate is the dot product of a coefficient vector with that
//! expansion, equivalently a constant plus an upper-triangular QUBO form.
//! Coefficients are refit each step by ridge regression with the constant
//! term left unpenalized.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::bits::BitVec;
use crate::task_data::SelectionVector;
use crate::{Error, Result};

/// Coefficients of the quadratic surrogate: a constant shift, one linear
/// term per variable and one pairwise term per unordered pair (i < j) in
/// row-major order (1,2),(1,3),..,(n-1,n).
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateCoefficients {
    pub alpha0: f64,
    pub linear: Vec<f64>,
    pub pairwise: Vec<f64>,
}

impl SurrogateCoefficients {
    pub fn new(alpha0: f64, linear: Vec<f64>, pairwise: Vec<f64>) -> Result<Self> {
        let n = linear.len();
        if pairwise.len() != n * (n - 1) / 2 {
            return Err(Error::LengthMismatch {
                expected: n * (n - 1) / 2,
                actual: pairwise.len(),
            });
        }
        Ok(Self {
            alpha0,
            linear,
            pairwise,
        })
    }

    pub fn n(&self) -> usize {
        self.linear.len()
    }

    /// Total coefficient count 1 + n + n(n-1)/2.
    pub fn p(&self) -> usize {
        1 + self.linear.len() + self.pairwise.len()
    }
}

/// Index of pair (i, j), i < j, in row-major upper-triangular order.
#[inline]
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

/// Expansion length for n variables.
pub fn expansion_len(n: usize) -> usize {
    1 + n + n * (n - 1) / 2
}

/// The binary feature expansion of a selection vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpandedFeatures {
    bits: BitVec,
}

impl ExpandedFeatures {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits.get(i)
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.bits.iter().map(|b| b as u8 as f64).collect()
    }

    /// Dot product with another expansion (a count, since entries are 0/1).
    pub fn dot_ones(&self, other: &Self) -> usize {
        self.bits.common_ones(&other.bits)
    }

    fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter_ones()
    }
}

/// Expands q into [1, q_1..q_n, q_1 q_2, .., q_{n-1} q_n].
pub fn expand(q: &SelectionVector) -> ExpandedFeatures {
    let n = q.len();
    let mut bits = BitVec::zeros(expansion_len(n));
    bits.set(0, true);
    let ones: Vec<usize> = q.iter_ones().collect();
    for &i in &ones {
        bits.set(1 + i, true);
    }
    for (a, &i) in ones.iter().enumerate() {
        for &j in &ones[a + 1..] {
            bits.set(1 + n + pair_index(n, i, j), true);
        }
    }
    ExpandedFeatures { bits }
}

/// Evaluates alpha0 + sum_j alpha_j q_j + sum_{i<j} alpha_ij q_i q_j.
pub fn evaluate(coeffs: &SurrogateCoefficients, q: &SelectionVector) -> Result<f64> {
    let n = coeffs.n();
    if q.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: q.len(),
        });
    }
    let ones: Vec<usize> = q.iter_ones().collect();
    let mut value = coeffs.alpha0;
    for &i in &ones {
        value += coeffs.linear[i];
    }
    for (a, &i) in ones.iter().enumerate() {
        for &j in &ones[a + 1..] {
            value += coeffs.pairwise[pair_index(n, i, j)];
        }
    }
    Ok(value)
}

/// Upper-triangular QUBO matrix: diagonal holds linear coefficients,
/// above-diagonal the pairwise ones, below-diagonal zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct QuboMatrix {
    n: usize,
    entries: Vec<f64>, // row-major n x n
}

impl QuboMatrix {
    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Debug dump: `i,j,value` rows for nonzero upper-triangular entries.
    pub fn to_nonzero_csv_string(&self) -> String {
        let mut out = String::from("i,j,value\n");
        for i in 0..self.n {
            for j in i..self.n {
                let v = self.get(i, j);
                if v != 0.0 {
                    out.push_str(&format!("{i},{j},{v}\n"));
                }
            }
        }
        out
    }
}

/// Extracts the QUBO matrix; the constant shift alpha0 is not embedded
/// (samplers minimize the constant-shifted form).
pub fn to_qubo(coeffs: &SurrogateCoefficients) -> QuboMatrix {
    let n = coeffs.n();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        entries[i * n + i] = coeffs.linear[i];
        for j in i + 1..n {
            entries[i * n + j] = coeffs.pairwise[pair_index(n, i, j)];
        }
    }
    QuboMatrix { n, entries }
}

/// q^T U q over the upper-triangular matrix.
pub fn qubo_energy(u: &QuboMatrix, q: &SelectionVector) -> Result<f64> {
    if q.len() != u.n {
        return Err(Error::LengthMismatch {
            expected: u.n,
            actual: q.len(),
        });
    }
    let ones: Vec<usize> = q.iter_ones().collect();
    let mut energy = 0.0;
    for (a, &i) in ones.iter().enumerate() {
        energy += u.get(i, i);
        for &j in &ones[a + 1..] {
            energy += u.get(i, j);
        }
    }
    Ok(energy)
}

/// Number of variables whose expansion has length p, if any.
fn vars_for_expansion_len(p: usize) -> Option<usize> {
    if p == 0 {
        return None;
    }
    let d = p - 1; // n + n(n-1)/2 = n(n+1)/2
    let n = ((-1.0 + (1.0 + 8.0 * d as f64).sqrt()) / 2.0).round() as usize;
    (n * (n + 1) / 2 == d).then_some(n)
}

fn solve_spd(a: DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(chol) = Cholesky::new(a.clone()) {
        return Ok(chol.solve(rhs));
    }
    a.lu()
        .solve(rhs)
        .ok_or_else(|| Error::InvalidConfig("singular ridge system".into()))
}

/// Ridge fit of the surrogate coefficients: minimizes
/// `sum_k (l_k - a·q_k)^2 + lambda * ||a_{\0}||^2` with the constant term
/// unpenalized.
///
/// The intercept is handled by centering; the centered system is then
/// solved in whichever of the primal ((p-1) x (p-1)) or dual (k x k) form
/// is smaller. Both are exact for lambda > 0, so sample count never forces
/// the O(p^3) solve.
pub fn fit_ridge(
    features: &[ExpandedFeatures],
    targets: &[f64],
    lambda: f64,
) -> Result<SurrogateCoefficients> {
    if lambda <= 0.0 || !lambda.is_finite() {
        return Err(Error::NonPositiveLambda(lambda));
    }
    if features.is_empty() || targets.is_empty() {
        return Err(Error::EmptyFit);
    }
    if features.len() != targets.len() {
        return Err(Error::LengthMismatch {
            expected: features.len(),
            actual: targets.len(),
        });
    }
    let p = features[0].len();
    let n = vars_for_expansion_len(p).ok_or(Error::LengthMismatch {
        expected: p,
        actual: p,
    })?;
    for f in features {
        if f.len() != p {
            return Err(Error::LengthMismatch {
                expected: p,
                actual: f.len(),
            });
        }
    }

    let k = features.len();
    let d = p - 1;
    let kf = k as f64;
    let target_mean = targets.iter().sum::<f64>() / kf;
    let centered_targets: Vec<f64> = targets.iter().map(|t| t - target_mean).collect();

    // column means of the design without the constant column
    let mut col_mean = vec![0.0; d];
    for f in features {
        for c in f.iter_ones().skip(1) {
            col_mean[c - 1] += 1.0;
        }
    }
    for v in col_mean.iter_mut() {
        *v /= kf;
    }

    let weights: DVector<f64> = if k <= d {
        // dual: (Zc Zc^T + lambda I) a = lc, w = Zc^T a
        let mut gram = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                let g = (features[i].dot_ones(&features[j]) - 1) as f64;
                gram[(i, j)] = g;
                gram[(j, i)] = g;
            }
        }
        let row_sums: Vec<f64> = (0..k).map(|i| gram.row(i).sum()).collect();
        let total: f64 = row_sums.iter().sum();
        let mut a = DMatrix::<f64>::zeros(k, k);
        // centering makes the all-ones vector a null direction; shift it
        // away so tiny lambdas stay solvable (the solution is unchanged
        // because the centered right-hand side is orthogonal to it)
        let shift = 1.0 + gram.trace() / (kf * kf);
        for i in 0..k {
            for j in 0..k {
                a[(i, j)] =
                    gram[(i, j)] - row_sums[i] / kf - row_sums[j] / kf + total / (kf * kf) + shift;
            }
            a[(i, i)] += lambda;
        }
        let lc = DVector::from_column_slice(&centered_targets);
        let alpha = solve_spd(a, &lc)?;

        let mut w = vec![0.0; d];
        for (i, f) in features.iter().enumerate() {
            for c in f.iter_ones().skip(1) {
                w[c - 1] += alpha[i];
            }
        }
        let alpha_sum: f64 = alpha.iter().sum();

        DVector::from_fn(d, |c, _| w[c] - alpha_sum * col_mean[c])
    } else {
        // primal: (Zc^T Zc + lambda I) w = Zc^T lc
        let mut cooc = DMatrix::<f64>::zeros(d, d);
        for f in features {
            let ones: Vec<usize> = f.iter_ones().skip(1).map(|c| c - 1).collect();
            for (a, &ca) in ones.iter().enumerate() {
                for &cb in &ones[a..] {
                    cooc[(ca, cb)] += 1.0;
                }
            }
        }
        let mut a = DMatrix::zeros(d, d);
        for ca in 0..d {
            for cb in ca..d {
                let v = cooc[(ca, cb)] - kf * col_mean[ca] * col_mean[cb];
                a[(ca, cb)] = v;
                a[(cb, ca)] = v;
            }
            a[(ca, ca)] += lambda;
        }
        let mut rhs = DVector::zeros(d);
        for (i, f) in features.iter().enumerate() {
            for c in f.iter_ones().skip(1) {
                rhs[c - 1] += centered_targets[i];
            }
        }
        solve_spd(a, &rhs)?
    };

    let alpha0 = target_mean
        - weights
            .iter()
            .zip(&col_mean)
            .map(|(w, m)| w * m)
            .sum::<f64>();
    let linear = weights.iter().take(n).copied().collect();
    let pairwise = weights.iter().skip(n).copied().collect();
    SurrogateCoefficients::new(alpha0, linear, pairwise)
}
