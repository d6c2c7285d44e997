//! Spin-qubit simulation and analysis across an optical excitation event:
//! lab-frame pulse dynamics, Ramsey fringe fitting and single-qubit process
//! tomography.

pub mod dynamics;
pub mod error;
pub mod optim;
pub mod qpt;
pub mod ramsey;
pub mod spin;
pub mod workbench;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod chapter0 {}
    #[doc = include_str!("../../../book/src/spin.md")]
    pub mod chapter1 {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    pub mod chapter2 {}
    #[doc = include_str!("../../../book/src/ramsey.md")]
    pub mod chapter3 {}
    #[doc = include_str!("../../../book/src/tomography.md")]
    pub mod chapter4 {}
    #[doc = include_str!("../../../book/src/workbench.md")]
    pub mod chapter5 {}
}
