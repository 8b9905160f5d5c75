//! Concentration functions of weighted sums `S_a = Σ X_k a_k` of i.i.d.
//! random variables, computed exactly for discrete laws, together with the
//! infinitely divisible smoothing law `H^λ`, symmetric generalized arithmetic
//! progressions, the structure functional `β_{r,m}`, and harnesses that check
//! inverse Littlewood–Offord statements on concrete coefficient vectors.
//!
//! ```
//! use smallball::concentration::q_exact;
//! use smallball::dist::{weighted_sum_law, DiscreteDist, WeightVector};
//! use smallball::num::{int, ratio};
//!
//! let a = WeightVector::ones(10).unwrap();
//! let law = weighted_sum_law(&a, &DiscreteDist::rademacher(), &Default::default()).unwrap();
//! let q = q_exact(&law, &int(0)).unwrap();
//! assert_eq!(q.exact.unwrap(), ratio(252, 1024));
//! ```

pub mod dist;
pub mod num;
pub mod concentration;
pub mod infdiv;
pub mod gap;
pub mod report;
pub mod inverse;

/// Any error raised by the library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Num(#[from] num::NumError),
    #[error(transparent)]
    Dist(#[from] dist::Error),
    #[error(transparent)]
    Concentration(#[from] concentration::Error),
    #[error(transparent)]
    Infdiv(#[from] infdiv::Error),
    #[error(transparent)]
    Gap(#[from] gap::Error),
    #[error(transparent)]
    Inverse(#[from] inverse::Error),
}
