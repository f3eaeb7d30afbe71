//! The user guide, compiled from the mdbook sources in `book/`.
//!
//! Each chapter is included as module documentation so its Rust snippets run
//! as doc-tests; `cargo test` keeps the book and the API in sync.

macro_rules! chapter {
    ($name:ident, $path:literal) => {
        #[doc = include_str!($path)]
        pub mod $name {}
    };
}

chapter!(introduction, "../../../book/src/introduction.md");
chapter!(data_model, "../../../book/src/data-model.md");
chapter!(annotation, "../../../book/src/annotation.md");
chapter!(prompting, "../../../book/src/prompting.md");
chapter!(gateway, "../../../book/src/gateway.md");
chapter!(evaluation, "../../../book/src/evaluation.md");
chapter!(regression, "../../../book/src/regression.md");
chapter!(pipeline, "../../../book/src/pipeline.md");
