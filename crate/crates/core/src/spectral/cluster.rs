use crate::error::Result;
use crate::greens::{greens_z2, GreensTable};
use crate::lattice::{class_membership, ClassLevel, Domain, SparseIntField};
use std::collections::HashMap;

/// Tolerance for integrality of `G * v|_C` when deciding removability.
pub const REMOVABLE_TOLERANCE: f64 = 1e-6;

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    let mut y = x;
    while parent[y] != r {
        let next = parent[y];
        parent[y] = r;
        y = next;
    }
    r
}

/// Partition of `supp(v)` into `R`-clusters: the transitive closure of
/// `‖z - z'‖_1 <= 2R` (quotient distance on tori).
pub fn r_cluster(v: &SparseIntField, radius: usize) -> Vec<Vec<(i64, i64)>> {
    let pts = v.support();
    let d = v.domain();
    let mut parent: Vec<usize> = (0..pts.len()).collect();
    let reach = 2 * radius as u64;
    for a in 0..pts.len() {
        for b in a + 1..pts.len() {
            if d.distance(pts[a], pts[b]) <= reach {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut groups: HashMap<usize, Vec<(i64, i64)>> = HashMap::new();
    for (k, &p) in pts.iter().enumerate() {
        let root = find(&mut parent, k);
        groups.entry(root).or_default().push(p);
    }
    let mut out: Vec<Vec<(i64, i64)>> = groups.into_values().collect();
    for g in &mut out {
        g.sort_unstable();
    }
    out.sort();
    out
}

/// Whether `v|_C` is the Laplacian of a finitely supported integer function:
/// `v|_C ∈ C^2` and `G_{Z^2} * v|_C` is integer-valued on a window of radius
/// `R_1 + 8` around the cluster (`R_1` its l1 radius).
fn removable(
    domain: Domain,
    cluster: &[((i64, i64), i64)],
    tables: &mut HashMap<usize, GreensTable>,
) -> Result<bool> {
    let base = cluster[0].0;
    // Lift to Z^2 around the first point.
    let lifted: Vec<((i64, i64), i64)> = cluster
        .iter()
        .map(|&(x, c)| (domain.lift_difference(x, base), c))
        .collect();
    let r1 = lifted
        .iter()
        .map(|&((i, j), _)| i.unsigned_abs() + j.unsigned_abs())
        .max()
        .unwrap_or(0) as usize;
    if let Domain::Torus { m } = domain {
        // The lift is only meaningful if the cluster does not wrap around.
        if 2 * r1 + 2 >= m {
            return Ok(false);
        }
    }
    let plane = SparseIntField::from_entries(Domain::plane(), lifted.iter().copied())?;
    if class_membership(&plane) < ClassLevel::C2 {
        return Ok(false);
    }
    let w = r1 as i64 + 8;
    let radius = 2 * r1 + 8;
    if !tables.contains_key(&radius) {
        tables.insert(radius, greens_z2(radius)?);
    }
    let g = &tables[&radius];
    for i in -w..=w {
        for j in -(w - i.abs())..=(w - i.abs()) {
            let x: f64 = lifted
                .iter()
                .map(|&((a, b), c)| c as f64 * g.get(i - a, j - b))
                .sum();
            if (x - x.round()).abs() > REMOVABLE_TOLERANCE {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// The `R`-reduction: `v` with every removable `R`-cluster deleted.
pub fn r_reduce(v: &SparseIntField, radius: usize) -> Result<SparseIntField> {
    let mut tables = HashMap::new();
    let mut out = v.clone();
    for cluster in r_cluster(v, radius) {
        let part: Vec<((i64, i64), i64)> = cluster.iter().map(|&(i, j)| ((i, j), v.get(i, j))).collect();
        if removable(v.domain(), &part, &mut tables)? {
            for &((i, j), c) in &part {
                out.add_at(i, j, -c)?;
            }
        }
    }
    Ok(out)
}
