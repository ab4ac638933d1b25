//! Affine-invariant property testing over `F_p^n` at desk scale.
//!
//! Functions `f: F_p^n -> [R]` are dense [`FunctionTable`]s. The crate covers
//! affine constraints and their induced patterns ([`forms`]), Gowers norms
//! ([`gowers`]), polynomial factors and their cells ([`poly`]), regularity
//! decompositions ([`decompose`]) and the one-sided affine-subspace tester
//! ([`tester`]). Every computation is exact unless its budget binds, in which
//! case it returns [`Error::BudgetExceeded`] or an explicitly marked estimate.
//!
//! ```
//! use affinv::field::{FieldParams, FunctionTable};
//! use affinv::forms::{cs_complexity, AffineConstraint, Complexity, ComplexityBudget, ConstraintCollection};
//! use affinv::tester::is_free;
//!
//! let a = AffineConstraint::derivative(2).unwrap();
//! let s = cs_complexity(a.forms(), 2, ComplexityBudget::default()).unwrap();
//! assert_eq!(s, Complexity::Exact(1));
//!
//! let fp = FieldParams::new(2, 3).unwrap();
//! let f = FunctionTable::from_fn(fp, 2, |x| x.coords()[1] + 1).unwrap();
//! let family = ConstraintCollection::degree_one(2).unwrap();
//! assert!(is_free(&f, &family, affinv::DEFAULT_ENUMERATION_BUDGET).unwrap());
//! ```

pub mod decompose;
pub mod error;
pub mod field;
pub mod forms;
pub mod gowers;
pub mod io;
pub mod linalg;
mod par;
pub mod poly;
pub mod tester;

pub use error::{Error, Result};
pub use field::{FieldParams, FieldVec, FunctionTable, RealTable};

/// Default cap on the number of points enumerated by exact computations.
pub const DEFAULT_ENUMERATION_BUDGET: u128 = 1 << 26;

/// Default cap on the size of exhaustive polynomial searches.
pub const DEFAULT_SEARCH_BUDGET: u128 = 1 << 20;

// The guide's code blocks run as doctests of this crate.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/field.md")]
    mod field {}
    #[doc = include_str!("../../../book/src/constraints.md")]
    mod constraints {}
    #[doc = include_str!("../../../book/src/gowers.md")]
    mod gowers {}
    #[doc = include_str!("../../../book/src/factors.md")]
    mod factors {}
    #[doc = include_str!("../../../book/src/decomposition.md")]
    mod decomposition {}
    #[doc = include_str!("../../../book/src/tester.md")]
    mod tester {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
}
