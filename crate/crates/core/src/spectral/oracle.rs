use crate::error::{Error, Result};
use crate::numeric::{e, ComplexSum, KahanSum};
use crate::rng::stream;
use crate::sandpile::chain::Dropper;
use crate::sandpile::{identity, is_recurrent, Sandpile};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

/// One character of the sandpile group, `ξ_x = numerators[x] / denominator`.
#[derive(Clone, Debug, Serialize)]
pub struct DualFrequency {
    /// Numerators for the non-sink sites in row-major order.
    pub numerators: Vec<i64>,
    pub mu_re: f64,
    pub mu_im: f64,
}

impl DualFrequency {
    pub fn modulus(&self) -> f64 {
        self.mu_re.hypot(self.mu_im)
    }

    pub fn is_zero(&self) -> bool {
        self.numerators.iter().all(|&k| k == 0)
    }
}

/// Every character of the sandpile group of a small torus, with eigenvalues.
#[derive(Clone, Debug, Serialize)]
pub struct DualOracle {
    pub m: usize,
    /// `det Δ'`; all values of all characters are multiples of `1/denominator`.
    pub denominator: i64,
    pub order: usize,
    pub gap: f64,
    pub frequencies: Vec<DualFrequency>,
}

impl DualOracle {
    /// `sum_{ξ != 0} |μ̂(ξ)|^{2N}`, the squared `L^2(dU)` distance after `N` steps.
    pub fn l2_distance_sq(&self, n: u64) -> f64 {
        let mut s = KahanSum::new();
        for f in self.frequencies.iter().filter(|f| !f.is_zero()) {
            s.add(f.modulus().powf(2.0 * n as f64));
        }
        s.value()
    }

    /// `‖μ^{*N} - U‖_{L^2(dU)}`.
    pub fn l2_distance(&self, n: u64) -> f64 {
        self.l2_distance_sq(n).sqrt()
    }
}

pub const ORACLE_MAX_M: usize = 3;

fn reduced_laplacian_dense(m: usize) -> Vec<Vec<i64>> {
    let n = m * m - 1;
    let nb = crate::sandpile::torus_neighbors(m);
    let mut a = vec![vec![0i64; n]; n];
    for x in 1..m * m {
        a[x - 1][x - 1] += 4;
        for &y in &nb[x] {
            if y != 0 {
                a[x - 1][y - 1] -= 1;
            }
        }
    }
    a
}

/// Exact `det` and adjugate of a small integer matrix (the adjugate by rounding
/// `det · A^{-1}`, then verified in integers).
fn det_and_adjugate(a: &[Vec<i64>]) -> Result<(i64, Vec<Vec<i64>>)> {
    let n = a.len();
    let mut w: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r: Vec<f64> = row.iter().map(|&x| x as f64).collect();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n)
            .max_by(|&x, &y| w[x][c].abs().total_cmp(&w[y][c].abs()))
            .expect("rows");
        if w[p][c] == 0.0 {
            return Err(Error::NumericalGuard("singular reduced Laplacian".into()));
        }
        if p != c {
            w.swap(p, c);
            det = -det;
        }
        det *= w[c][c];
        let piv = w[c][c];
        for k in 0..2 * n {
            w[c][k] /= piv;
        }
        for r in 0..n {
            if r != c && w[r][c] != 0.0 {
                let f = w[r][c];
                for k in 0..2 * n {
                    w[r][k] -= f * w[c][k];
                }
            }
        }
    }
    let d = det.round() as i64;
    let adj: Vec<Vec<i64>> = (0..n)
        .map(|i| (0..n).map(|j| (w[i][n + j] * d as f64).round() as i64).collect())
        .collect();
    for i in 0..n {
        for j in 0..n {
            let s: i64 = (0..n).map(|k| a[i][k] * adj[k][j]).sum();
            if s != if i == j { d } else { 0 } {
                return Err(Error::NumericalGuard("adjugate check failed".into()));
            }
        }
    }
    Ok((d, adj))
}

/// All recurrent states of `T_m` (burning test over all stable states).
pub fn recurrent_states(m: usize) -> Vec<Sandpile> {
    let n = m * m - 1;
    (0..4u64.pow(n as u32))
        .filter_map(|code| {
            let mut c = code;
            let s = Sandpile::from_fn(m, |_, _| {
                let h = c % 4;
                c /= 4;
                h
            });
            is_recurrent(&s).then_some(s)
        })
        .collect()
}

/// Enumerate the dual group of the sandpile group on `T_m`, `m <= 3`.
///
/// Recurrent states are coset representatives of `Z^n / Δ' Z^n`; each gives the
/// character `ξ = (Δ')^{-1} σ mod 1`, computed exactly as `adj(Δ') σ / det Δ'`.
pub fn dual_group_oracle(m: usize) -> Result<DualOracle> {
    if !(2..=ORACLE_MAX_M).contains(&m) {
        return Err(Error::InvalidArgument(format!(
            "dual group enumeration needs 2 <= m <= {ORACLE_MAX_M}"
        )));
    }
    let a = reduced_laplacian_dense(m);
    let (d, adj) = det_and_adjugate(&a)?;
    let states = recurrent_states(m);
    if states.len() as i64 != d {
        return Err(Error::NumericalGuard(format!(
            "{} recurrent states but det = {d}",
            states.len()
        )));
    }
    let n = m * m - 1;
    let m2 = (m * m) as f64;
    let mut frequencies: Vec<DualFrequency> = states
        .iter()
        .map(|s| {
            let h = &s.heights()[1..];
            let numerators: Vec<i64> = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|k| adj[i][k] * h[k] as i64)
                        .sum::<i64>()
                        .rem_euclid(d)
                })
                .collect();
            let mut sum = ComplexSum::new();
            sum.add(e(0.0));
            for &k in &numerators {
                sum.add(e(k as f64 / d as f64));
            }
            let mu = sum.value() / m2;
            DualFrequency {
                numerators,
                mu_re: mu.re,
                mu_im: mu.im,
            }
        })
        .collect();
    frequencies.sort_by(|x, y| x.numerators.cmp(&y.numerators));
    if frequencies.windows(2).any(|w| w[0].numerators == w[1].numerators) {
        return Err(Error::NumericalGuard("characters are not distinct".into()));
    }
    let gap = frequencies
        .iter()
        .filter(|f| !f.is_zero())
        .map(|f| 1.0 - f.modulus())
        .fold(f64::INFINITY, f64::min);
    Ok(DualOracle {
        m,
        denominator: d,
        order: frequencies.len(),
        gap,
        frequencies,
    })
}

/// Total variation distance to uniform on the recurrent states after `steps`
/// chain steps from the identity, estimated from `samples` runs.
pub fn sampled_tv_distance(m: usize, steps: u64, samples: usize, seed: u64) -> Result<f64> {
    if !(2..=ORACLE_MAX_M).contains(&m) {
        return Err(Error::InvalidArgument(format!(
            "sampled distance needs 2 <= m <= {ORACLE_MAX_M}"
        )));
    }
    let states = recurrent_states(m);
    let code = |h: &[u64]| h[1..].iter().rev().fold(0usize, |acc, &x| 4 * acc + x as usize);
    let mut index = vec![usize::MAX; 1 << (2 * (m * m - 1))];
    for (k, s) in states.iter().enumerate() {
        index[code(s.heights())] = k;
    }
    let start = identity(m).heights().to_vec();
    const CHUNK: usize = 4096;
    let chunks = samples.div_ceil(CHUNK);
    let counts: Vec<Vec<u64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(seed, c as u64);
            let mut dropper = Dropper::new(m);
            let mut counts = vec![0u64; states.len()];
            let len = CHUNK.min(samples - c * CHUNK);
            for _ in 0..len {
                let mut h = start.clone();
                for _ in 0..steps {
                    let x = rng.random_range(0..m * m);
                    dropper.drop_grain(&mut h, x);
                }
                counts[index[code(&h)]] += 1;
            }
            counts
        })
        .collect();
    let mut total = vec![0u64; states.len()];
    for c in counts {
        for (t, x) in total.iter_mut().zip(c) {
            *t += x;
        }
    }
    let u = 1.0 / states.len() as f64;
    let mut s = KahanSum::new();
    for &c in &total {
        s.add((c as f64 / samples as f64 - u).abs());
    }
    Ok(0.5 * s.value())
}
