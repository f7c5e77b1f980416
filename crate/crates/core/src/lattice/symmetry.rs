/// An element of the dihedral group of the square acting on `Z^2` (fixing the origin).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Dihedral {
    swap: bool,
    flip_first: bool,
    flip_second: bool,
}

impl Dihedral {
    pub const IDENTITY: Dihedral = Dihedral {
        swap: false,
        flip_first: false,
        flip_second: false,
    };

    /// All eight elements; the identity comes first.
    pub const ALL: [Dihedral; 8] = {
        let mut out = [Dihedral::IDENTITY; 8];
        let mut k = 0;
        while k < 8 {
            out[k] = Dihedral {
                swap: k & 4 != 0,
                flip_first: k & 1 != 0,
                flip_second: k & 2 != 0,
            };
            k += 1;
        }
        out
    };

    /// Swap coordinates first, then negate the selected ones.
    #[inline]
    pub fn apply(self, i: i64, j: i64) -> (i64, i64) {
        let (mut a, mut b) = if self.swap { (j, i) } else { (i, j) };
        if self.flip_first {
            a = -a;
        }
        if self.flip_second {
            b = -b;
        }
        (a, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn eight_distinct_isometries() {
        let images: HashSet<(i64, i64)> = Dihedral::ALL.iter().map(|g| g.apply(2, 1)).collect();
        assert_eq!(images.len(), 8);
        for g in Dihedral::ALL {
            let (a, b) = g.apply(3, -5);
            assert_eq!(a.abs() + b.abs(), 8);
        }
    }
}
