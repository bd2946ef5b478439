//! Runs the `rust` blocks of the guide in `book/src` as doctests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/system-model.md")]
pub mod system_model {}

#[doc = include_str!("../../../book/src/frequency-dynamics.md")]
pub mod frequency_dynamics {}

#[doc = include_str!("../../../book/src/frequency-security.md")]
pub mod frequency_security {}

#[doc = include_str!("../../../book/src/milp.md")]
pub mod milp {}

#[doc = include_str!("../../../book/src/scheduling.md")]
pub mod scheduling {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
