use crate::error::{Error, Result};
use crate::lattice::NEIGHBORS;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::f64::consts::PI;

/// Largest support accepted by [`solve_program`].
pub const MAX_SUPPORT: usize = 12;

/// Absolute optimality gap at which branch and bound stops.
pub const OPTIMALITY_GAP: f64 = 1e-9;

/// KKT residual above which a solve is reported as not converged.
pub const KKT_TOLERANCE: f64 = 1e-8;

/// Constraint violation tolerated in a returned minimizer.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;

const NODE_LIMIT: usize = 200_000;

/// Duality gap at which the barrier path stops; finer gaps drown in rounding
/// of the active constraint values.
const BARRIER_GAP: f64 = 1e-10;

/// Slack below which a constraint enters the Newton system unreduced.
const ACTIVE_SLACK: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProgramKind {
    /// Inequalities `4x_k + Σ x_nb >= |v_k|`, box `[0, 1/2]`.
    #[serde(rename = "P")]
    P,
    /// As `P` with box `[0, 1/4]`; convex.
    #[serde(rename = "P'")]
    PRestricted,
    /// Equalities `4x_k - Σ x_nb = v_k`, box `[-1/2, 1/2]`.
    #[serde(rename = "Q")]
    Q,
}

impl ProgramKind {
    fn bounds(self) -> (f64, f64) {
        match self {
            ProgramKind::P => (0.0, 0.5),
            ProgramKind::PRestricted => (0.0, 0.25),
            ProgramKind::Q => (-0.5, 0.5),
        }
    }
}

/// A program on the support `S` with integer targets; variables live on the
/// distance-1 enlargement `N` of `S`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProgramSpec {
    pub kind: ProgramKind,
    pub support: Vec<(i64, i64)>,
    pub targets: Vec<i64>,
    pub neighborhood: Vec<(i64, i64)>,
}

/// `{x : d(x, S) <= 1}`, sorted.
pub fn enlargement(support: &[(i64, i64)]) -> Vec<(i64, i64)> {
    let mut n: Vec<(i64, i64)> = support
        .iter()
        .flat_map(|&(i, j)| {
            std::iter::once((i, j)).chain(NEIGHBORS.iter().map(move |&(a, b)| (i + a, j + b)))
        })
        .collect();
    n.sort_unstable();
    n.dedup();
    n
}

impl ProgramSpec {
    pub fn new(kind: ProgramKind, support: Vec<(i64, i64)>, targets: Vec<i64>) -> Result<Self> {
        if support.is_empty() || support.len() > MAX_SUPPORT {
            return Err(Error::InvalidArgument(format!(
                "support size must be between 1 and {MAX_SUPPORT}"
            )));
        }
        if support.len() != targets.len() {
            return Err(Error::InvalidArgument("one target per support site".into()));
        }
        let mut sorted = support.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != support.len() {
            return Err(Error::InvalidArgument("repeated support site".into()));
        }
        let neighborhood = enlargement(&support);
        Ok(ProgramSpec {
            kind,
            support,
            targets,
            neighborhood,
        })
    }

    /// `P(S, 1)`, `P'(S, 1)`.
    pub fn unit(kind: ProgramKind, support: Vec<(i64, i64)>) -> Result<Self> {
        let n = support.len();
        Self::new(kind, support, vec![1; n])
    }

    fn rows(&self) -> Vec<Row> {
        let index: BTreeMap<(i64, i64), usize> = self
            .neighborhood
            .iter()
            .enumerate()
            .map(|(k, &x)| (x, k))
            .collect();
        let nb_sign = if self.kind == ProgramKind::Q { -1.0 } else { 1.0 };
        self.support
            .iter()
            .zip(&self.targets)
            .map(|(&(i, j), &v)| {
                let mut coeffs = vec![(index[&(i, j)], 4.0)];
                for &(a, b) in &NEIGHBORS {
                    coeffs.push((index[&(i + a, j + b)], nb_sign));
                }
                let rhs = if self.kind == ProgramKind::Q {
                    v as f64
                } else {
                    v.abs() as f64
                };
                Row { coeffs, rhs }
            })
            .collect()
    }

    /// `Σ_N (1 - cos 2πx)`.
    pub fn objective(&self, x: &[f64]) -> f64 {
        x.iter().map(|&t| phi(t)).sum()
    }

    /// Largest violation of the box and the linear constraints at `x`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let (lo, hi) = self.kind.bounds();
        let mut worst = x
            .iter()
            .map(|&t| (lo - t).max(t - hi).max(0.0))
            .fold(0.0, f64::max);
        for row in self.rows() {
            let lhs: f64 = row.coeffs.iter().map(|&(k, c)| c * x[k]).sum();
            let gap = if self.kind == ProgramKind::Q {
                (lhs - row.rhs).abs()
            } else {
                (row.rhs - lhs).max(0.0)
            };
            worst = worst.max(gap);
        }
        worst
    }
}

#[derive(Clone, Debug)]
struct Row {
    coeffs: Vec<(usize, f64)>,
    rhs: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct NLPResult {
    pub kind: ProgramKind,
    pub minimum: f64,
    /// Certified lower bound from branch and bound.
    pub lower_bound: f64,
    /// Values on `N`, in the order of `ProgramSpec::neighborhood`.
    pub minimizer: Vec<((i64, i64), f64)>,
    pub kkt_residual: f64,
    /// Sites whose variable sits at a box bound.
    pub boundary_cells: Vec<(i64, i64)>,
    pub nodes: usize,
}

impl NLPResult {
    pub fn values(&self) -> Vec<f64> {
        self.minimizer.iter().map(|p| p.1).collect()
    }
}

/// Outcome of a solve with a cutoff.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum Bounded {
    Solved(NLPResult),
    /// Every feasible point has objective at least `lower_bound >= cutoff`.
    AtLeast { lower_bound: f64, nodes: usize },
}

impl Bounded {
    /// The minimum when solved, the certified bound otherwise.
    pub fn value(&self) -> f64 {
        match self {
            Bounded::Solved(r) => r.minimum,
            Bounded::AtLeast { lower_bound, .. } => *lower_bound,
        }
    }

    pub fn is_below(&self, cutoff: f64) -> bool {
        matches!(self, Bounded::Solved(r) if r.minimum < cutoff)
    }
}

#[inline]
fn phi(x: f64) -> f64 {
    1.0 - (2.0 * PI * x).cos()
}

#[inline]
fn dphi(x: f64) -> f64 {
    2.0 * PI * (2.0 * PI * x).sin()
}

#[inline]
fn ddphi(x: f64) -> f64 {
    4.0 * PI * PI * (2.0 * PI * x).cos()
}

/// Convex envelope of `1 - cos 2πx` on `[lo, hi] ⊂ [-1/2, 1/2]`: linear on
/// `[lo, a]` and `[b, hi]`, equal to the function on `[a, b]`.
#[derive(Clone, Copy, Debug)]
struct Envelope {
    lo: f64,
    hi: f64,
    a: f64,
    b: f64,
}

impl Envelope {
    fn new(lo: f64, hi: f64) -> Self {
        const Q: f64 = 0.25;
        if hi <= -Q || lo >= Q || hi - lo < 1e-15 {
            return Envelope { lo, hi, a: hi, b: hi };
        }
        // Tangent from (hi, φ(hi)) touching the convex part at b.
        let b = if hi > Q {
            let h = |t: f64| phi(t) + dphi(t) * (hi - t) - phi(hi);
            let start = lo.max(-Q);
            if h(start) >= 0.0 {
                None
            } else {
                Some(bisect(h, start, Q))
            }
        } else {
            Some(hi)
        };
        let a = if lo < -Q {
            let h = |t: f64| phi(t) + dphi(t) * (lo - t) - phi(lo);
            let end = hi.min(Q);
            if h(end) >= 0.0 {
                None
            } else {
                Some(bisect(|t| -h(t), -Q, end))
            }
        } else {
            Some(lo)
        };
        match (a, b) {
            (Some(a), Some(b)) if a <= b => Envelope { lo, hi, a, b },
            // a single chord
            _ => Envelope { lo, hi, a: hi, b: hi },
        }
    }

    fn is_chord(&self) -> bool {
        self.a >= self.hi && self.b >= self.hi
    }

    fn slope_left(&self) -> f64 {
        if self.is_chord() {
            (phi(self.hi) - phi(self.lo)) / (self.hi - self.lo).max(1e-300)
        } else {
            dphi(self.a)
        }
    }

    fn value(&self, x: f64) -> f64 {
        if self.is_chord() {
            phi(self.lo) + self.slope_left() * (x - self.lo)
        } else if x < self.a {
            phi(self.a) + dphi(self.a) * (x - self.a)
        } else if x > self.b {
            phi(self.b) + dphi(self.b) * (x - self.b)
        } else {
            phi(x)
        }
    }

    fn deriv(&self, x: f64) -> f64 {
        if self.is_chord() {
            self.slope_left()
        } else if x < self.a {
            dphi(self.a)
        } else if x > self.b {
            dphi(self.b)
        } else {
            dphi(x)
        }
    }

    fn second(&self, x: f64) -> f64 {
        if self.is_chord() || x < self.a || x > self.b {
            0.0
        } else {
            ddphi(x).max(0.0)
        }
    }
}

/// Root of an increasing function on `[lo, hi]` with `f(lo) < 0 <= f(hi)`.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// `c·y + d` in the free variables.
#[derive(Clone, Debug)]
struct Affine {
    coeffs: Vec<(usize, f64)>,
    offset: f64,
}

impl Affine {
    fn eval(&self, y: &[f64]) -> f64 {
        self.offset + self.coeffs.iter().map(|&(i, c)| c * y[i]).sum::<f64>()
    }
}

/// The program with equalities eliminated: variables on `N` as affine
/// functions of free variables, inequality rows as affine functions that must
/// stay nonnegative.
struct Reduced {
    dim: usize,
    vars: Vec<Affine>,
    rows: Vec<Affine>,
}

impl Reduced {
    fn new(spec: &ProgramSpec) -> Result<Self> {
        let rows = spec.rows();
        let n = spec.neighborhood.len();
        if spec.kind != ProgramKind::Q {
            let vars = (0..n)
                .map(|i| Affine {
                    coeffs: vec![(i, 1.0)],
                    offset: 0.0,
                })
                .collect();
            let rows = rows
                .into_iter()
                .map(|r| Affine {
                    coeffs: r.coeffs,
                    offset: -r.rhs,
                })
                .collect();
            return Ok(Reduced { dim: n, vars, rows });
        }
        // Solve the rows for the variables on S: A_SS x_S = b - A_SF y.
        let s_idx: Vec<usize> = spec
            .support
            .iter()
            .map(|x| spec.neighborhood.binary_search(x).expect("S inside N"))
            .collect();
        let free: Vec<usize> = (0..n).filter(|i| !s_idx.contains(i)).collect();
        let k = s_idx.len();
        let d = free.len();
        // augmented matrix [A_SS | b | -A_SF]
        let width = k + 1 + d;
        let mut m = vec![0.0; k * width];
        for (r, row) in rows.iter().enumerate() {
            for &(i, c) in &row.coeffs {
                if let Some(p) = s_idx.iter().position(|&s| s == i) {
                    m[r * width + p] += c;
                } else {
                    let q = free.iter().position(|&f| f == i).expect("free");
                    m[r * width + k + 1 + q] -= c;
                }
            }
            m[r * width + k] = row.rhs;
        }
        for col in 0..k {
            let piv = (col..k)
                .max_by(|&a, &b| m[a * width + col].abs().total_cmp(&m[b * width + col].abs()))
                .expect("rows");
            if m[piv * width + col].abs() < 1e-12 {
                return Err(Error::InvalidArgument("singular equality system".into()));
            }
            for c in 0..width {
                m.swap(col * width + c, piv * width + c);
            }
            let p = m[col * width + col];
            for c in 0..width {
                m[col * width + c] /= p;
            }
            for r in 0..k {
                if r != col {
                    let f = m[r * width + col];
                    if f != 0.0 {
                        for c in 0..width {
                            m[r * width + c] -= f * m[col * width + c];
                        }
                    }
                }
            }
        }
        let mut vars = vec![
            Affine {
                coeffs: Vec::new(),
                offset: 0.0
            };
            n
        ];
        for (q, &f) in free.iter().enumerate() {
            vars[f] = Affine {
                coeffs: vec![(q, 1.0)],
                offset: 0.0,
            };
        }
        for (p, &s) in s_idx.iter().enumerate() {
            vars[s] = Affine {
                coeffs: (0..d)
                    .map(|q| (q, m[p * width + k + 1 + q]))
                    .filter(|c| c.1 != 0.0)
                    .collect(),
                offset: m[p * width + k],
            };
        }
        Ok(Reduced {
            dim: d,
            vars,
            rows: Vec::new(),
        })
    }

    fn x(&self, y: &[f64]) -> Vec<f64> {
        self.vars.iter().map(|a| a.eval(y)).collect()
    }
}

/// Solution of one convex relaxation.
struct Relaxed {
    x: Vec<f64>,
    /// Certified lower bound on the relaxation (barrier gap subtracted).
    lower_bound: f64,
    kkt: f64,
}

/// Newton direction for `(H + Σ_A c c^T / s^2) dy = -g`, with the active rows
/// kept as the symmetric augmented system in `u_k = c_k·dy / s_k`.
fn newton_step(h: &[f64], g: &[f64], active: &[(&Affine, f64)], d: usize) -> Option<Vec<f64>> {
    let neg: Vec<f64> = g.iter().map(|v| -v).collect();
    if active.is_empty() {
        return crate::numeric::solve_spd(h, &neg, d);
    }
    let n = d + active.len();
    let mut m = vec![0.0; n * n];
    for i in 0..d {
        m[i * n..i * n + d].copy_from_slice(&h[i * d..(i + 1) * d]);
    }
    for (k, &(a, s)) in active.iter().enumerate() {
        let r = d + k;
        for &(i, c) in &a.coeffs {
            m[i * n + r] += c / s;
            m[r * n + i] += c / s;
        }
        m[r * n + r] = -1.0;
    }
    let mut rhs = neg;
    rhs.resize(n, 0.0);
    let mut x = crate::numeric::solve_dense(&m, &rhs, n)?;
    x.truncate(d);
    Some(x)
}

/// Minimize `t F(y) - Σ log g_k(y)` by damped Newton steps from an interior `y`.
fn center(
    y: &mut Vec<f64>,
    t: f64,
    objective: &dyn Fn(&[f64], bool) -> (f64, Vec<f64>, Vec<f64>),
    ineqs: &[Affine],
) -> Result<f64> {
    let d = y.len();
    let barrier = |y: &[f64]| -> Option<f64> {
        let mut b = t * objective(y, false).0;
        for a in ineqs {
            let s = a.eval(y);
            if s <= 0.0 {
                return None;
            }
            b -= s.ln();
        }
        Some(b)
    };
    let mut last = f64::INFINITY;
    for _ in 0..200 {
        let (_, grad, hess) = objective(y, true);
        let mut g: Vec<f64> = grad.iter().map(|v| t * v).collect();
        let mut h: Vec<f64> = hess.iter().map(|v| t * v).collect();
        // nearly active rows stay out of the condensed Hessian, whose
        // conditioning they would ruin
        let mut active: Vec<(&Affine, f64)> = Vec::new();
        for a in ineqs {
            let s = a.eval(y);
            for &(i, ci) in &a.coeffs {
                g[i] -= ci / s;
            }
            if s < ACTIVE_SLACK {
                active.push((a, s));
                continue;
            }
            for &(i, ci) in &a.coeffs {
                for &(j, cj) in &a.coeffs {
                    h[i * d + j] += ci * cj / (s * s);
                }
            }
        }
        let stationarity = g.iter().fold(0.0f64, |m, v| m.max(v.abs())) / t;
        let dy = newton_step(&h, &g, &active, d)
            .ok_or_else(|| Error::NonConvergence("singular Newton system".into()))?;
        let decrement: f64 = -g.iter().zip(&dy).map(|(a, b)| a * b).sum::<f64>();
        if decrement < 1e-20 {
            return Ok(stationarity);
        }
        let mut step: f64 = 1.0;
        for a in ineqs {
            let ds: f64 = a.coeffs.iter().map(|&(i, c)| c * dy[i]).sum();
            if ds < 0.0 {
                step = step.min(0.99 * a.eval(y) / -ds);
            }
        }
        // pure Newton inside the quadratic convergence region, where barrier
        // values no longer resolve the decrease
        if decrement < 0.25 {
            // stalled at the rounding floor
            if decrement > 0.5 * last {
                return Ok(stationarity);
            }
            if dy.iter().zip(y.iter()).all(|(d, v)| (step * d).abs() <= 1e-14 * (1.0 + v.abs())) {
                return Ok(stationarity);
            }
            *y = y.iter().zip(&dy).map(|(a, b)| a + step * b).collect();
            last = decrement;
            continue;
        }
        let f0 = barrier(y).expect("interior iterate");
        let mut moved = false;
        for _ in 0..60 {
            let trial: Vec<f64> = y.iter().zip(&dy).map(|(a, b)| a + step * b).collect();
            if let Some(f1) = barrier(&trial) {
                if f1 <= f0 - 0.25 * step * decrement && trial != *y {
                    *y = trial;
                    moved = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !moved {
            return Ok(stationarity);
        }
        last = decrement;
    }
    if last < 1e-8 {
        return Ok(0.0);
    }
    Err(Error::NonConvergence("barrier Newton iterations exhausted".into()))
}

/// Barrier path up to a duality gap of `gap`; returns the final `t`.
fn barrier_path(
    y: &mut Vec<f64>,
    objective: &dyn Fn(&[f64], bool) -> (f64, Vec<f64>, Vec<f64>),
    ineqs: &[Affine],
    gap: f64,
    stop: &dyn Fn(&[f64], f64) -> bool,
) -> Result<(f64, f64)> {
    let m = ineqs.len() as f64;
    let mut t = 1.0;
    loop {
        let stationarity = center(y, t, objective, ineqs)?;
        if m / t < gap || stop(y, t) {
            return Ok((t, stationarity));
        }
        t *= 10.0;
    }
}

/// `‖∇F - Σ λ_k ∇g_k‖_∞` with nonnegative least-squares multipliers on the
/// nearly active constraints. Degenerate bounds (zero multiplier) sit at slack
/// `~ t^{-1/2}`, hence the generous cut; at degenerate vertices more
/// constraints than variables are active, so the multipliers are not unique.
fn kkt_residual(y: &[f64], grad: &[f64], ineqs: &[Affine]) -> f64 {
    let d = y.len();
    let active: Vec<Vec<f64>> = ineqs
        .iter()
        .filter(|a| a.eval(y) < 1e-6)
        .map(|a| {
            let mut row = vec![0.0; d];
            for &(i, c) in &a.coeffs {
                row[i] += c;
            }
            row
        })
        .collect();
    // exact cyclic coordinate descent on min ‖grad - Σ λ_k c_k‖² over λ >= 0
    let mut r = grad.to_vec();
    let mut lambda = vec![0.0; active.len()];
    for _ in 0..20_000 {
        let mut change: f64 = 0.0;
        for (k, c) in active.iter().enumerate() {
            let cc: f64 = c.iter().map(|v| v * v).sum();
            let step = c.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() / cc;
            let next = (lambda[k] + step).max(0.0);
            let delta = next - lambda[k];
            if delta != 0.0 {
                for (ri, ci) in r.iter_mut().zip(c) {
                    *ri -= delta * ci;
                }
                lambda[k] = next;
                change = change.max(delta.abs());
            }
        }
        if change < 1e-15 {
            break;
        }
    }
    r.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Minimize `Σ ψ_i(x_i)` over the node box and the rows; `None` when the node
/// has no interior.
fn solve_relaxation(
    red: &Reduced,
    env: &[Envelope],
    lo: &[f64],
    hi: &[f64],
) -> Result<Option<Relaxed>> {
    let d = red.dim;
    let mut ineqs: Vec<Affine> = Vec::with_capacity(2 * red.vars.len() + red.rows.len());
    for (i, a) in red.vars.iter().enumerate() {
        let mut low = a.clone();
        low.offset -= lo[i];
        ineqs.push(low);
        let high = Affine {
            coeffs: a.coeffs.iter().map(|&(k, c)| (k, -c)).collect(),
            offset: hi[i] - a.offset,
        };
        if high.coeffs.is_empty() && high.offset <= 0.0 {
            return Ok(None);
        }
        ineqs.push(high);
    }
    ineqs.extend(red.rows.iter().cloned());
    ineqs.retain(|a| !a.coeffs.is_empty() || a.offset <= 0.0);
    if ineqs.iter().any(|a| a.coeffs.is_empty()) {
        return Ok(None);
    }

    // Phase one: minimize u subject to g_k(y) + u > 0.
    let mut y: Vec<f64> = vec![0.0; d + 1];
    for (i, a) in red.vars.iter().enumerate() {
        if let [(k, c)] = a.coeffs[..] {
            if c == 1.0 && a.offset == 0.0 {
                y[k] = 0.5 * (lo[i] + hi[i]);
            }
        }
    }
    let worst = ineqs.iter().map(|a| -a.eval(&y[..d])).fold(f64::NEG_INFINITY, f64::max);
    if worst >= -1e-3 {
        y[d] = worst.max(0.0) + 1e-3 + 0.5 * worst.abs();
        let lifted: Vec<Affine> = ineqs
            .iter()
            .map(|a| {
                let mut b = a.clone();
                b.coeffs.push((d, 1.0));
                b
            })
            .collect();
        let objective = |y: &[f64], _: bool| -> (f64, Vec<f64>, Vec<f64>) {
            let mut g = vec![0.0; d + 1];
            g[d] = 1.0;
            (y[d], g, vec![0.0; (d + 1) * (d + 1)])
        };
        let widths = lo
            .iter()
            .zip(hi)
            .map(|(a, b)| b - a)
            .fold(f64::INFINITY, f64::min);
        let target = -0.05 * widths.min(1.0);
        let m = lifted.len() as f64;
        // stop once feasible enough, or once the path certifies u* > 0
        barrier_path(&mut y, &objective, &lifted, 1e-14, &|y, t| {
            y[d] < target || y[d] - m / t > 1e-13
        })?;
        if y[d] >= -1e-13 {
            return Ok(None);
        }
    }
    y.truncate(d);

    let objective = |y: &[f64], derivatives: bool| -> (f64, Vec<f64>, Vec<f64>) {
        let mut f = 0.0;
        let mut g = vec![0.0; if derivatives { d } else { 0 }];
        let mut h = vec![0.0; if derivatives { d * d } else { 0 }];
        for (a, e) in red.vars.iter().zip(env) {
            let x = a.eval(y);
            f += e.value(x);
            if derivatives {
                let (d1, d2) = (e.deriv(x), e.second(x));
                for &(i, ci) in &a.coeffs {
                    g[i] += d1 * ci;
                    if d2 != 0.0 {
                        for &(j, cj) in &a.coeffs {
                            h[i * d + j] += d2 * ci * cj;
                        }
                    }
                }
            }
        }
        (f, g, h)
    };
    let (t, _) = barrier_path(&mut y, &objective, &ineqs, BARRIER_GAP, &|_, _| false)?;
    let m = ineqs.len() as f64;
    let (value, grad, _) = objective(&y, true);
    Ok(Some(Relaxed {
        x: red.x(&y),
        lower_bound: value - m / t - 1e-12,
        kkt: kkt_residual(&y, &grad, &ineqs).max(m / t),
    }))
}

struct Node {
    bound: f64,
    order: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // smallest bound first, then earliest
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(other.order.cmp(&self.order))
    }
}

/// Global minimum of the program by branch and bound over convex envelopes.
pub fn solve_program(spec: &ProgramSpec) -> Result<NLPResult> {
    match solve_program_below(spec, f64::INFINITY)? {
        Bounded::Solved(r) => Ok(r),
        Bounded::AtLeast { .. } => Err(Error::Infeasible("constraints admit no point".into())),
    }
}

/// As [`solve_program`], but stops once the minimum is certified to be at
/// least `cutoff`.
pub fn solve_program_below(spec: &ProgramSpec, cutoff: f64) -> Result<Bounded> {
    let rows = spec.rows();
    let red = Reduced::new(spec)?;
    let n = spec.neighborhood.len();
    let (blo, bhi) = spec.kind.bounds();
    if spec.kind != ProgramKind::Q {
        // the constraints are monotone: the top corner is the most feasible point
        for row in &rows {
            let top: f64 = row.coeffs.iter().map(|&(_, c)| c * bhi).sum();
            if top < row.rhs - FEASIBILITY_TOLERANCE {
                return Err(Error::Infeasible(format!(
                    "target {} exceeds the largest attainable {top}",
                    row.rhs
                )));
            }
        }
    }
    let mut heap = BinaryHeap::new();
    let mut order = 0;
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        order,
        lo: vec![blo; n],
        hi: vec![bhi; n],
    });
    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    let mut pruned_bound = f64::INFINITY;
    let mut nodes = 0;
    while let Some(node) = heap.pop() {
        let incumbent = best.as_ref().map_or(f64::INFINITY, |b| b.0);
        if node.bound >= cutoff {
            pruned_bound = pruned_bound.min(node.bound);
            continue;
        }
        if node.bound >= incumbent - OPTIMALITY_GAP {
            continue;
        }
        nodes += 1;
        if nodes > NODE_LIMIT {
            return Err(Error::NonConvergence(format!(
                "branch and bound exceeded {NODE_LIMIT} nodes"
            )));
        }
        let env: Vec<Envelope> = (0..n).map(|i| Envelope::new(node.lo[i], node.hi[i])).collect();
        let Some(relaxed) = solve_relaxation(&red, &env, &node.lo, &node.hi)? else {
            continue;
        };
        let lb = relaxed.lower_bound.max(node.bound);
        if lb >= cutoff {
            pruned_bound = pruned_bound.min(lb);
            continue;
        }
        if lb >= incumbent - OPTIMALITY_GAP {
            continue;
        }
        let x = &relaxed.x;
        if spec.violation(x) <= FEASIBILITY_TOLERANCE {
            let value = spec.objective(x);
            if value < incumbent {
                best = Some((value, x.clone(), relaxed.kkt));
            }
        }
        // branch where the envelope is furthest below the function
        let (var, gap) = (0..n)
            .map(|i| (i, phi(relaxed.x[i]) - env[i].value(relaxed.x[i])))
            .fold((0, 0.0), |acc, p| if p.1 > acc.1 { p } else { acc });
        let incumbent = best.as_ref().map_or(f64::INFINITY, |b| b.0);
        if gap < 1e-12 || lb >= incumbent - OPTIMALITY_GAP {
            continue;
        }
        let (l, h) = (node.lo[var], node.hi[var]);
        let xv = relaxed.x[var];
        let split = if l < -0.25 && h > -0.25 && (xv - -0.25).abs() > 1e-3 {
            -0.25
        } else if l < 0.25 && h > 0.25 && (xv - 0.25).abs() > 1e-3 {
            0.25
        } else if (xv - l).min(h - xv) > 0.05 * (h - l) {
            xv
        } else {
            0.5 * (l + h)
        };
        for (a, b) in [(l, split), (split, h)] {
            let mut lo = node.lo.clone();
            let mut hi = node.hi.clone();
            lo[var] = a;
            hi[var] = b;
            order += 1;
            heap.push(Node {
                bound: lb,
                order,
                lo,
                hi,
            });
        }
    }
    let Some((minimum, x, kkt)) = best.filter(|b| b.0 < cutoff).map(|(v, x, k)| {
        let (v, x) = snap_to_bounds(spec, v, x);
        (v, x, k)
    }) else {
        return Ok(Bounded::AtLeast {
            lower_bound: pruned_bound.min(best_value_or_inf(cutoff)),
            nodes,
        });
    };
    if kkt > KKT_TOLERANCE {
        return Err(Error::NonConvergence(format!("KKT residual {kkt:.3e}")));
    }
    let lower_bound = pruned_bound.min(minimum);
    let boundary_cells = spec
        .neighborhood
        .iter()
        .zip(&x)
        .filter(|(_, &t)| (t - blo).abs() < 1e-7 || (bhi - t).abs() < 1e-7)
        .map(|(&p, _)| p)
        .collect();
    Ok(Bounded::Solved(NLPResult {
        kind: spec.kind,
        minimum,
        lower_bound,
        minimizer: spec.neighborhood.iter().copied().zip(x).collect(),
        kkt_residual: kkt,
        boundary_cells,
        nodes,
    }))
}

/// Move variables lying within `1e-5` of a box bound onto it, all at once and
/// then one by one, whenever that keeps the point feasible without raising
/// the objective. Barrier iterates never reach the boundary.
fn snap_to_bounds(spec: &ProgramSpec, value: f64, x: Vec<f64>) -> (f64, Vec<f64>) {
    let (lo, hi) = spec.kind.bounds();
    let target = |t: f64| -> Option<f64> {
        if (t - lo).abs() < 1e-5 {
            Some(lo)
        } else if (hi - t).abs() < 1e-5 {
            Some(hi)
        } else {
            None
        }
    };
    let mut best = (value, x);
    let accept = |best: &mut (f64, Vec<f64>), y: Vec<f64>| {
        let v = spec.objective(&y);
        if v <= best.0 && spec.violation(&y) <= spec.violation(&best.1).max(1e-12) {
            *best = (v, y);
        }
    };
    let all: Vec<f64> = best.1.iter().map(|&t| target(t).unwrap_or(t)).collect();
    accept(&mut best, all);
    for i in 0..best.1.len() {
        if let Some(b) = target(best.1[i]) {
            let mut y = best.1.clone();
            y[i] = b;
            accept(&mut best, y);
        }
    }
    best
}

fn best_value_or_inf(cutoff: f64) -> f64 {
    if cutoff.is_finite() {
        cutoff
    } else {
        f64::INFINITY
    }
}

/// Solve the convex program `P'` from a given strictly feasible start by
/// projected gradient steps with a Newton-type diagonal scaling; used to check
/// that the local minimum does not depend on the start.
pub fn solve_restricted_from(spec: &ProgramSpec, start: &[f64]) -> Result<Vec<f64>> {
    if spec.kind != ProgramKind::PRestricted {
        return Err(Error::InvalidArgument("start-dependent solve is for P' only".into()));
    }
    if start.len() != spec.neighborhood.len() || spec.violation(start) > 0.0 {
        return Err(Error::InvalidArgument("start must be feasible".into()));
    }
    let rows = spec.rows();
    let n = start.len();
    // Log-barrier path from the given start, without the elastic reformulation.
    let mut x = start.to_vec();
    let slack = |x: &[f64], k: usize| -> f64 {
        rows[k].coeffs.iter().map(|&(i, c)| c * x[i]).sum::<f64>() - rows[k].rhs
    };
    let inside = |x: &[f64]| -> bool {
        x.iter().all(|&t| t > 0.0 && t < 0.25) && (0..rows.len()).all(|k| slack(x, k) > 0.0)
    };
    if !inside(&x) {
        return Err(Error::InvalidArgument("start must be strictly feasible".into()));
    }
    let terms = (2 * n + rows.len()) as f64;
    let barrier = |x: &[f64], t: f64| -> Option<f64> {
        if !inside(x) {
            return None;
        }
        let mut b = t * spec.objective(x);
        for &xi in x {
            b -= xi.ln() + (0.25 - xi).ln();
        }
        for k in 0..rows.len() {
            b -= slack(x, k).ln();
        }
        Some(b)
    };
    let mut t = 1.0;
    loop {
        for _ in 0..200 {
            let mut g = vec![0.0; n];
            let mut h = vec![0.0; n * n];
            for i in 0..n {
                g[i] = t * dphi(x[i]) - 1.0 / x[i] + 1.0 / (0.25 - x[i]);
                h[i * n + i] =
                    t * ddphi(x[i]) + 1.0 / (x[i] * x[i]) + 1.0 / ((0.25 - x[i]) * (0.25 - x[i]));
            }
            for k in 0..rows.len() {
                let s = slack(&x, k);
                for &(i, ci) in &rows[k].coeffs {
                    g[i] -= ci / s;
                    for &(j, cj) in &rows[k].coeffs {
                        h[i * n + j] += ci * cj / (s * s);
                    }
                }
            }
            let neg: Vec<f64> = g.iter().map(|v| -v).collect();
            let dx = crate::numeric::solve_spd(&h, &neg, n)
                .ok_or_else(|| Error::NonConvergence("singular Newton system".into()))?;
            let dec: f64 = -g.iter().zip(&dx).map(|(a, b)| a * b).sum::<f64>();
            if dec < 1e-18 {
                break;
            }
            let f0 = barrier(&x, t).expect("interior");
            let mut step = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + step * b).collect();
                if let Some(f1) = barrier(&trial, t) {
                    if f1 <= f0 - 0.25 * step * dec {
                        x = trial;
                        moved = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        if terms / t < 1e-11 {
            return Ok(x);
        }
        t *= 8.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_is_below_and_touches() {
        for &(lo, hi) in &[(0.0, 0.5), (-0.5, 0.5), (0.3, 0.45), (-0.1, 0.2), (-0.4, 0.1)] {
            let e = Envelope::new(lo, hi);
            for k in 0..=1000 {
                let x = lo + (hi - lo) * k as f64 / 1000.0;
                assert!(e.value(x) <= phi(x) + 1e-12, "{lo} {hi} {x}");
            }
            assert!((e.value(lo) - phi(lo)).abs() < 1e-9);
            assert!((e.value(hi) - phi(hi)).abs() < 1e-9);
        }
    }

    #[test]
    fn envelope_is_convex() {
        let e = Envelope::new(-0.5, 0.5);
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=1000 {
            let d = e.deriv(-0.5 + k as f64 / 1000.0);
            assert!(d >= prev - 1e-12);
            prev = d;
        }
    }
}
