//! Compiles the Rust snippets of the guide under `book/` as doc-tests.

#[doc = include_str!("../../../book/src/intro.md")]
pub struct Intro;

#[doc = include_str!("../../../book/src/local_averaging.md")]
pub struct LocalAveraging;

#[doc = include_str!("../../../book/src/cart.md")]
pub struct Cart;

#[doc = include_str!("../../../book/src/centered.md")]
pub struct Centered;

#[doc = include_str!("../../../book/src/grafting.md")]
pub struct Grafting;

#[doc = include_str!("../../../book/src/leaf_regressors.md")]
pub struct LeafRegressors;

#[doc = include_str!("../../../book/src/experiments.md")]
pub struct Experiments;

#[doc = include_str!("../../../book/src/cli.md")]
pub struct Cli;

#[doc = include_str!("../../../book/src/model_format.md")]
pub struct ModelFormat;
