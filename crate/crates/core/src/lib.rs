pub mod cli;
pub mod error;
pub mod num;
pub mod partitions;
pub mod pattern;
pub mod sensitivity;
pub mod systems;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/systems.md")]
    mod systems {}
    #[doc = include_str!("../../../book/src/partitions.md")]
    mod partitions {}
    #[doc = include_str!("../../../book/src/pattern-entropy.md")]
    mod pattern_entropy {}
    #[doc = include_str!("../../../book/src/sensitivity.md")]
    mod sensitivity {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
