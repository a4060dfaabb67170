//! Profiling web archive holdings and routing Memento TimeMap lookups to
//! the archives most likely to hold a URI.

pub mod aggregator;
pub mod cli;
pub mod eval;
pub mod memento_model;
pub mod profiler;
pub mod router;
pub mod sampler;
pub mod simarchive;
pub mod uri_tools;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/timemaps.md")]
    mod timemaps {}
    #[doc = include_str!("../../../book/src/hosts.md")]
    mod hosts {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    mod sampling {}
    #[doc = include_str!("../../../book/src/profiles.md")]
    mod profiles {}
    #[doc = include_str!("../../../book/src/routing.md")]
    mod routing {}
    #[doc = include_str!("../../../book/src/aggregation.md")]
    mod aggregation {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
