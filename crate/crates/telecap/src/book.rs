//! Compiles every code snippet in the guide (`book/`) as a doctest, so the
//! prose and the library can never drift apart. Each item below binds one
//! chapter; `cargo test --doc` runs them all.

macro_rules! chapter {
    ($name:ident, $path:literal) => {
        #[doc = include_str!($path)]
        pub struct $name;
    };
}

chapter!(Readme, "../../../README.md");
chapter!(Introduction, "../../../book/src/introduction.md");
chapter!(StatesAndLayouts, "../../../book/src/states.md");
chapter!(EntangledFraction, "../../../book/src/entangled-fraction.md");
chapter!(ControlledTeleportation, "../../../book/src/controlled-teleportation.md");
chapter!(SeparabilityThresholds, "../../../book/src/thresholds.md");
chapter!(StateFactory, "../../../book/src/factory.md");
chapter!(IndependentVerification, "../../../book/src/verification.md");
chapter!(CommandLine, "../../../book/src/cli.md");
