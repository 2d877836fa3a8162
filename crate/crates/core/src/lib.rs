//! Role-based value mixing for cooperative multi-agent reinforcement
//! learning, with policies and mixers that transfer across team sizes.
//!
//! - [`env`]: the prey-predator gridworld and episode records.
//! - [`expert`]: the scripted demonstrator and demonstration sets.
//! - [`policy`]: the shared recurrent agent network and exploration.
//! - [`mixer`]: the role mixer, the state-conditioned baseline and role
//!   returns.
//! - [`trainer`]: losses, optimiser, replay, phases and transfer bundles.
//! - [`harness`]: experiment configuration, artifacts and analyses.

pub mod env;
pub mod expert;
pub mod harness;
pub mod mixer;
pub mod policy;
pub mod trainer;

/// The guide's chapters, compiled and run as documentation tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/autodiff.md")]
    mod autodiff {}
    #[doc = include_str!("../../../book/src/environment.md")]
    mod environment {}
    #[doc = include_str!("../../../book/src/expert.md")]
    mod expert {}
    #[doc = include_str!("../../../book/src/mixing.md")]
    mod mixing {}
    #[doc = include_str!("../../../book/src/role-returns.md")]
    mod role_returns {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/transfer.md")]
    mod transfer {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
