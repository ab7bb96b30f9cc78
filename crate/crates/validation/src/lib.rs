//! Holds the `acceptance` test target, which checks the end-to-end
//! statistical and numerical targets and prints one line per criterion.
//!
//! Run it alone with `cargo test -p ksfiqr-validation --test acceptance`;
//! criterion numbers after `--` restrict the run, e.g. `-- 4 8`.
