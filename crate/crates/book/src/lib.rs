//! Compiles the guide's code blocks as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/system-model.md")]
pub mod system_model {}

#[doc = include_str!("../../../book/src/ep-updates.md")]
pub mod ep_updates {}

#[doc = include_str!("../../../book/src/equalizers.md")]
pub mod equalizers {}

#[doc = include_str!("../../../book/src/turbo.md")]
pub mod turbo {}

#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}
