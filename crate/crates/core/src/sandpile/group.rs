use super::state::neighbor_table;
use crate::error::{Error, Result};
use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::Serialize;

/// Invariant factors of the reduced Laplacian `Δ'` of `T_m` (sink at the origin).
#[derive(Clone, Debug, Serialize)]
pub struct GroupStructure {
    pub m: usize,
    /// Number of invariant factors equal to one.
    pub unit_factors: usize,
    /// The invariant factors larger than one, each dividing the next.
    #[serde(serialize_with = "ser_big_vec")]
    pub invariant_factors: Vec<BigUint>,
    /// Group order `|det Δ'|`.
    #[serde(serialize_with = "ser_big")]
    pub order: BigUint,
}

fn ser_big<S: serde::Serializer>(x: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_str_radix(10))
}

fn ser_big_vec<S: serde::Serializer>(
    x: &[BigUint],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(x.iter().map(|v| v.to_str_radix(10)))
}

impl GroupStructure {
    /// `log |G_m| / m^2`.
    pub fn log_order_per_site(&self) -> f64 {
        big_ln(&self.order) / (self.m * self.m) as f64
    }
}

pub(crate) fn big_ln(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 64 {
        return (x.iter_u64_digits().next().unwrap_or(0) as f64).ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).iter_u64_digits().next().unwrap_or(0) as f64;
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Rows of `Δ'` as sparse `(column, value)` lists, non-sink sites in folded
/// order (rows `0, m-1, 1, m-2, ...`) so the matrix has bandwidth about `3m`.
pub(crate) fn reduced_laplacian(m: usize) -> Vec<Vec<(usize, i64)>> {
    let fold: Vec<usize> = (0..m)
        .map(|k| if k % 2 == 0 { k / 2 } else { m - 1 - k / 2 })
        .collect();
    let mut pos = vec![usize::MAX; m * m];
    let mut next = 0;
    for &i in &fold {
        for j in 0..m {
            let idx = i * m + j;
            if idx != 0 {
                pos[idx] = next;
                next += 1;
            }
        }
    }
    let nb = neighbor_table(m);
    let mut rows = vec![Vec::new(); m * m - 1];
    for x in 1..m * m {
        let mut row: Vec<(usize, i64)> = vec![(pos[x], 4)];
        for &y in &nb[x] {
            if y == 0 {
                continue;
            }
            match row.iter_mut().find(|e| e.0 == pos[y]) {
                Some(e) => e.1 -= 1,
                None => row.push((pos[y], -1)),
            }
        }
        row.sort_unstable();
        rows[pos[x]] = row;
    }
    rows
}

fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

fn pow_mod(mut a: u64, mut e: u64, p: u64) -> u64 {
    let mut r = 1u64;
    a %= p;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, a, p);
        }
        a = mul_mod(a, a, p);
        e >>= 1;
    }
    r
}

fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for &b in &BASES {
        if n % b == 0 {
            return n == b;
        }
    }
    let (mut d, mut s) = (n - 1, 0);
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'outer: for &a in &BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'outer;
            }
        }
        return false;
    }
    true
}

/// Determinant modulo a prime by banded Gaussian elimination with row swaps.
fn det_mod_p(rows: &[Vec<(usize, i64)>], p: u64) -> u64 {
    let n = rows.len();
    let lower = rows
        .iter()
        .enumerate()
        .flat_map(|(r, row)| row.iter().map(move |&(c, _)| r.saturating_sub(c)))
        .max()
        .unwrap_or(0);
    let upper = rows
        .iter()
        .enumerate()
        .flat_map(|(r, row)| row.iter().map(move |&(c, _)| c.saturating_sub(r)))
        .max()
        .unwrap_or(0);
    // Row swaps within the lower band can widen the upper band to lower + upper.
    let width = lower + upper + 1;
    let mut a: Vec<Vec<u64>> = rows
        .iter()
        .map(|row| {
            let mut dense = vec![0u64; n];
            for &(c, v) in row {
                dense[c] = v.rem_euclid(p as i64) as u64;
            }
            dense
        })
        .collect();
    let mut det = 1u64;
    for c in 0..n {
        let last = (c + lower + 1).min(n);
        let Some(pr) = (c..last).find(|&r| a[r][c] != 0) else {
            return 0;
        };
        if pr != c {
            a.swap(pr, c);
            det = (p - det) % p;
        }
        let piv = a[c][c];
        det = mul_mod(det, piv, p);
        let inv = pow_mod(piv, p - 2, p);
        let end = (c + width).min(n);
        let (head, tail) = a.split_at_mut(c + 1);
        let prow = &head[c];
        for row in tail.iter_mut().take(last - c - 1) {
            if row[c] == 0 {
                continue;
            }
            let f = mul_mod(row[c], inv, p);
            for k in c..end {
                if prow[k] != 0 {
                    row[k] = (row[k] + p - mul_mod(f, prow[k], p)) % p;
                }
            }
        }
    }
    det
}

/// `det Δ'` (the number of spanning trees of `T_m`), exactly.
///
/// Computed modulo enough 61-bit primes to exceed the Hadamard bound and
/// recombined by the Chinese remainder theorem.
pub fn determinant_reduced_laplacian(m: usize) -> BigUint {
    let rows = reduced_laplacian(m);
    let log2_bound: f64 = rows
        .iter()
        .map(|r| 0.5 * (r.iter().map(|&(_, v)| (v * v) as f64).sum::<f64>()).log2())
        .sum();
    let mut value = BigUint::zero();
    let mut modulus = BigUint::one();
    let mut p = (1u64 << 61) - 1;
    while (modulus.bits() as f64) < log2_bound + 2.0 {
        while !is_prime_u64(p) {
            p -= 2;
        }
        let r = det_mod_p(&rows, p);
        // value += modulus * ((r - value) / modulus mod p)
        let vm = (&value % p).iter_u64_digits().next().unwrap_or(0);
        let mm = (&modulus % p).iter_u64_digits().next().unwrap_or(0);
        let t = mul_mod((r + p - vm) % p, pow_mod(mm, p - 2, p), p);
        value += &modulus * t;
        modulus *= p;
        p -= 2;
    }
    value
}

fn sub_mul_mod(t: &BigUint, f: &BigUint, x: &BigUint, d: &BigUint) -> BigUint {
    let fx = (f * x) % d;
    if *t >= fx {
        t - fx
    } else {
        t + d - fx
    }
}

/// Invariant factors and order of the sandpile group of `T_m`.
///
/// The group is `Z^n / (Δ' Z^n + D Z^n)` with `D = det Δ'`, so all row and
/// column operations may be done modulo `D`. Columns with a unit entry are
/// removed by ordinary elimination; the few remaining columns form a small
/// block whose Smith form is computed with Euclidean steps, and each diagonal
/// entry `s` gives the factor `gcd(s, D)`.
pub fn group_structure(m: usize) -> Result<GroupStructure> {
    if !(2..=64).contains(&m) {
        return Err(Error::InvalidArgument("group structure needs 2 <= m <= 64".into()));
    }
    let d = determinant_reduced_laplacian(m);
    let rows = reduced_laplacian(m);
    let n = rows.len();
    let mut a: Vec<Vec<BigUint>> = rows
        .iter()
        .map(|row| {
            let mut dense = vec![BigUint::zero(); n];
            for &(c, v) in row {
                dense[c] = if v >= 0 {
                    BigUint::from(v as u64) % &d
                } else {
                    (&d - (BigUint::from((-v) as u64) % &d)) % &d
                };
            }
            dense
        })
        .collect();
    let mut hi: Vec<usize> = rows.iter().map(|r| r.last().map_or(0, |e| e.0 + 1)).collect();
    let mut alive = vec![true; n];
    let mut deferred: Vec<usize> = Vec::new();
    let one = BigUint::one();
    for c in 0..n {
        // Prefer an entry equal to 1 or D - 1, then any unit.
        let dm1 = &d - &one;
        let cand: Vec<usize> = (0..n).filter(|&r| alive[r] && !a[r][c].is_zero()).collect();
        let pick = cand
            .iter()
            .copied()
            .find(|&r| a[r][c] == one || a[r][c] == dm1)
            .or_else(|| cand.iter().copied().find(|&r| a[r][c].gcd(&d) == one));
        let Some(pr) = pick else {
            deferred.push(c);
            continue;
        };
        let inv = a[pr][c]
            .modinv(&d)
            .ok_or_else(|| Error::NumericalGuard("pivot is not a unit".into()))?;
        let pivot = std::mem::take(&mut a[pr]);
        let phi = hi[pr];
        let cols: Vec<usize> = deferred
            .iter()
            .copied()
            .chain((c..phi).filter(|&k| !pivot[k].is_zero()))
            .collect();
        for &r in &cand {
            if r == pr {
                continue;
            }
            let f = (&a[r][c] * &inv) % &d;
            let row = &mut a[r];
            for &k in &cols {
                if !pivot[k].is_zero() {
                    row[k] = sub_mul_mod(&row[k], &f, &pivot[k], &d);
                }
            }
            hi[r] = hi[r].max(phi);
        }
        alive[pr] = false;
    }
    let rest: Vec<usize> = (0..n).filter(|&r| alive[r]).collect();
    if rest.len() != deferred.len() {
        return Err(Error::NumericalGuard("residual block is not square".into()));
    }
    let block: Vec<Vec<BigUint>> = rest
        .iter()
        .map(|&r| deferred.iter().map(|&c| a[r][c].clone()).collect())
        .collect();
    let diag = smith_diagonal_mod(block, &d);
    let mut factors: Vec<BigUint> = diag
        .into_iter()
        .map(|s| if s.is_zero() { d.clone() } else { s.gcd(&d) })
        .filter(|f| !f.is_one())
        .collect();
    factors.sort();
    let product: BigUint = factors.iter().product();
    if product != d {
        return Err(Error::NumericalGuard(
            "product of invariant factors differs from the determinant".into(),
        ));
    }
    if factors.windows(2).any(|w| !(&w[1] % &w[0]).is_zero()) {
        return Err(Error::NumericalGuard("invariant factors do not form a divisor chain".into()));
    }
    Ok(GroupStructure {
        m,
        unit_factors: n - factors.len(),
        invariant_factors: factors,
        order: d,
    })
}

/// Diagonal of a Smith form of a square block over `Z/DZ` (entries in `[0, D)`).
fn smith_diagonal_mod(mut b: Vec<Vec<BigUint>>, d: &BigUint) -> Vec<BigUint> {
    let k = b.len();
    let reduce = |t: &BigUint, q: &BigUint, x: &BigUint| sub_mul_mod(t, q, x, d);
    let mut diag = Vec::with_capacity(k);
    for t in 0..k {
        loop {
            // Smallest nonzero entry of the trailing block as pivot.
            let mut best: Option<(usize, usize)> = None;
            for r in t..k {
                for c in t..k {
                    if !b[r][c].is_zero() && best.is_none_or(|(br, bc)| b[r][c] < b[br][bc]) {
                        best = Some((r, c));
                    }
                }
            }
            let Some((pr, pc)) = best else {
                diag.extend(std::iter::repeat_n(BigUint::zero(), k - t));
                return diag;
            };
            b.swap(t, pr);
            for row in b.iter_mut() {
                row.swap(t, pc);
            }
            let p = b[t][t].clone();
            let mut clean = true;
            for r in t + 1..k {
                if b[r][t].is_zero() {
                    continue;
                }
                let q = &b[r][t] / &p;
                let (head, tail) = b.split_at_mut(r);
                let prow = &head[t];
                let row = &mut tail[0];
                for c in t..k {
                    row[c] = reduce(&row[c], &q, &prow[c]);
                }
                clean &= row[t].is_zero();
            }
            for c in t + 1..k {
                if b[t][c].is_zero() {
                    continue;
                }
                let q = &b[t][c] / &p;
                for r in t..k {
                    let x = b[r][t].clone();
                    b[r][c] = reduce(&b[r][c], &q, &x);
                }
                clean &= b[t][c].is_zero();
            }
            if !clean {
                continue;
            }
            // The pivot must divide the rest of the block.
            let bad = (t + 1..k).find(|&r| (t + 1..k).any(|c| !(&b[r][c] % &p).is_zero()));
            match bad {
                Some(r) => {
                    for c in t..k {
                        let v = (&b[t][c] + &b[r][c]) % d;
                        b[t][c] = v;
                    }
                }
                None => {
                    diag.push(p);
                    break;
                }
            }
        }
    }
    diag
}
