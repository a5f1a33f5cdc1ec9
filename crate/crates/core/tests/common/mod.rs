//! Brute-force reference implementations shared by the integration tests.
//! Nothing here calls into the library's own algorithms beyond reading model
//! parameters.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rarehmm::model::{Channel, GeneratorMatrix, HmmModel};

/// Off-diagonal rates in `[0.1, 2)`, some zeroed, with the cycle
/// `i → i+1` always present so the generator stays irreducible.
pub fn random_generator(rng: &mut ChaCha8Rng, s: usize) -> GeneratorMatrix {
    let mut rows = vec![vec![0.0; s]; s];
    for i in 0..s {
        for j in 0..s {
            if i == j {
                continue;
            }
            let forced = j == (i + 1) % s;
            if forced || rng.random_bool(0.7) {
                rows[i][j] = rng.random_range(0.1..2.0);
            }
        }
        rows[i][i] = -rows[i].iter().sum::<f64>();
    }
    GeneratorMatrix::new(&rows).expect("random generator is valid")
}

/// Rows drawn uniformly then normalized; with `zeros`, some entries are
/// dropped while each row keeps positive mass.
pub fn random_channel(rng: &mut ChaCha8Rng, s: usize, t: usize, zeros: bool) -> Channel {
    let rows: Vec<Vec<f64>> = (0..s)
        .map(|_| {
            let keep = rng.random_range(0..t);
            let mut w: Vec<f64> = (0..t)
                .map(|j| {
                    if zeros && j != keep && rng.random_bool(0.2) {
                        0.0
                    } else {
                        rng.random_range(0.05..1.0)
                    }
                })
                .collect();
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= total);
            w
        })
        .collect();
    Channel::new(&rows).expect("random channel is stochastic")
}

pub fn random_model(rng: &mut ChaCha8Rng, s: usize, t: usize, zeros: bool) -> HmmModel {
    let generator = random_generator(rng, s);
    let p = generator.p_max() * rng.random_range(0.01..0.99);
    let channel = random_channel(rng, s, t, zeros);
    HmmModel::new(generator, p, channel).expect("random model is valid")
}

pub fn transition_rows(model: &HmmModel) -> Vec<Vec<f64>> {
    let s = model.n_states();
    (0..s)
        .map(|i| (0..s).map(|j| model.transition().get(i, j)).collect())
        .collect()
}

pub fn channel_rows(model: &HmmModel) -> Vec<Vec<f64>> {
    (0..model.n_states())
        .map(|i| model.channel().row(i).to_vec())
        .collect()
}

/// Stationary law of a row-stochastic matrix by Gaussian elimination on
/// `μ(P - I) = 0`, last equation replaced with `Σ μ = 1`.
pub fn stationary(p: &[Vec<f64>]) -> Vec<f64> {
    let n = p.len();
    // Row k of the system is column k of (P - I)ᵀ.
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            let mut row: Vec<f64> = (0..n)
                .map(|i| p[i][k] - if i == k { 1.0 } else { 0.0 })
                .collect();
            row.push(0.0);
            row
        })
        .collect();
    a[n - 1] = vec![1.0; n + 1];
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..=n {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
    }
    (0..n).map(|i| a[i][n] / a[i][i]).collect()
}

fn plogp(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// `-Σ μ_a P_ab ln P_ab` for a chain with stationary law `μ`.
pub fn chain_entropy_rate(p: &[Vec<f64>]) -> f64 {
    let mu = stationary(p);
    -p.iter()
        .zip(&mu)
        .map(|(row, m)| m * row.iter().copied().map(plogp).sum::<f64>())
        .sum::<f64>()
}

/// Transition matrix of `(X_n, Y_n)` with states `i·|T| + j`.
pub fn joint_transition(model: &HmmModel) -> Vec<Vec<f64>> {
    let p = transition_rows(model);
    let q = channel_rows(model);
    let (s, t) = (model.n_states(), model.n_outputs());
    let mut out = vec![vec![0.0; s * t]; s * t];
    for i in 0..s {
        for j in 0..t {
            for i2 in 0..s {
                for j2 in 0..t {
                    out[i * t + j][i2 * t + j2] = p[i][i2] * q[i2][j2];
                }
            }
        }
    }
    out
}

/// `P(X = x, Y = y)` by direct product under the stationary start.
pub fn joint_probability(model: &HmmModel, x: &[u8], y: &[u8]) -> f64 {
    let p = transition_rows(model);
    let q = channel_rows(model);
    let pi = stationary(&p);
    let mut prob = pi[x[0] as usize] * q[x[0] as usize][y[0] as usize];
    for k in 1..x.len() {
        prob *= p[x[k - 1] as usize][x[k] as usize] * q[x[k] as usize][y[k] as usize];
    }
    prob
}

/// Visits every sequence in `{0..s}^n` in lexicographic order.
pub fn for_each_sequence(s: usize, n: usize, mut visit: impl FnMut(&[u8])) {
    let mut x = vec![0u8; n];
    loop {
        visit(&x);
        let mut k = n;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            x[k] += 1;
            if (x[k] as usize) < s {
                break;
            }
            x[k] = 0;
        }
    }
}

/// `P(Y = y)` summed over all `|S|^n` hidden paths.
pub fn marginal_probability(model: &HmmModel, y: &[u8]) -> f64 {
    let mut total = 0.0;
    for_each_sequence(model.n_states(), y.len(), |x| {
        total += joint_probability(model, x, y)
    });
    total
}

/// Every block in `B` for `(L, K)`, materialized.
pub fn all_candidates(s: usize, len: usize, margin: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    for a in 0..s as u8 {
        out.push(vec![a; len]);
        for b in 0..s as u8 {
            if a == b {
                continue;
            }
            for cut in margin..=len - margin {
                let mut v = vec![a; cut];
                v.resize(len, b);
                out.push(v);
            }
        }
    }
    out
}

/// Σ over states ascending, outputs ascending, of `n_aj ln Q_aj`.
pub fn count_table_score(u: &[u8], y: &[u8], q: &[Vec<f64>]) -> f64 {
    let t = q[0].len();
    let mut counts = vec![vec![0u32; t]; q.len()];
    for (&a, &j) in u.iter().zip(y) {
        counts[a as usize][j as usize] += 1;
    }
    let mut total = 0.0;
    for (a, row) in counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                let l = q[a][j].ln();
                if l == f64::NEG_INFINITY {
                    return f64::NEG_INFINITY;
                }
                total += c as f64 * l;
            }
        }
    }
    total
}

/// Naive argmax over materialized candidates, scanned in lexicographic
/// order so the first maximum is the lexicographically smallest. Also
/// returns how many candidates tied with the winner.
pub fn naive_mle(y: &[u8], q: &[Vec<f64>], len: usize, margin: usize) -> Option<(Vec<u8>, usize)> {
    let mut cands = all_candidates(q.len(), len, margin);
    cands.sort();
    let scored: Vec<(f64, Vec<u8>)> = cands
        .into_iter()
        .map(|u| (count_table_score(&u, y, q), u))
        .filter(|(s, _)| *s > f64::NEG_INFINITY)
        .collect();
    let best = scored
        .iter()
        .map(|(s, _)| *s)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut winners = scored.into_iter().filter(|(s, _)| *s == best);
    let (_, first) = winners.next()?;
    Some((first, 1 + winners.count()))
}

pub fn transitions(x: &[u8]) -> usize {
    x.windows(2).filter(|w| w[0] != w[1]).count()
}

/// `P(at least two transitions in L-1 independent Bernoulli(p) steps)`.
pub fn binomial_many(p: f64, len: usize) -> f64 {
    let m = (len - 1) as i32;
    1.0 - (1.0 - p).powi(m) - m as f64 * p * (1.0 - p).powi(m - 1)
}

/// Exactly one transition, at a cut `i` with `i < K` or `i > L - K`.
pub fn binomial_boundary(p: f64, len: usize, margin: usize) -> f64 {
    let m = (len - 1) as i32;
    let boundary_cuts = (1..len).filter(|&i| i < margin || i > len - margin).count();
    boundary_cuts as f64 * p * (1.0 - p).powi(m - 1)
}

pub fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

pub fn symmetric_binary(eps: f64) -> rarehmm::experiments::ModelFamily {
    rarehmm::experiments::ModelFamily::new(
        GeneratorMatrix::new(&[vec![-1.0, 1.0], vec![1.0, -1.0]]).unwrap(),
        Channel::binary_symmetric(eps).unwrap(),
    )
}
