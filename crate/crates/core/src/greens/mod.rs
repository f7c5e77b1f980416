//! Green's functions of the Laplacian on tori and on `Z^2`.

mod asymptotics;
mod decay;
mod torus;
mod walk;
mod z2;

pub use asymptotics::{fit_asymptotics, log_bound_check, AsymptoticFit, LogBoundCheck};
pub use decay::{
    derivative_convergence, derivative_decay_report, derivative_table, lp_membership_report,
    AnnulusSup, DecayReport, LpReport, Membership,
};
pub use torus::{greens_torus, torus_potential, TorusLine};
pub use walk::{convolution_power, gaussian_main_term, llt_error, LltError};
pub use z2::{greens_z2, greens_z2_box, z2_values, Z2Values, DOUBLING_TOLERANCE};

use crate::lattice::{Domain, Field};
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GreensMethod {
    /// Inverse discrete Fourier transform on the torus.
    Dft,
    /// Restriction of large-torus values with Richardson extrapolation.
    TorusRestriction,
}

#[derive(Clone, Debug, Serialize)]
pub struct GreensMeta {
    pub method: GreensMethod,
    /// Torus sides used in the computation.
    pub torus_sides: Vec<usize>,
    /// Largest change between the last two extrapolations (restriction only).
    pub doubling_change: Option<f64>,
}

/// A Green's function tabulated on a domain.
#[derive(Clone, Debug)]
pub struct GreensTable {
    pub values: Field<f64>,
    pub meta: GreensMeta,
}

impl GreensTable {
    pub fn domain(&self) -> Domain {
        self.values.domain()
    }

    #[inline]
    pub fn get(&self, i: i64, j: i64) -> f64 {
        self.values.get(i, j)
    }
}
