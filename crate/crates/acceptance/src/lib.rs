//! Acceptance suite for the reconstruction pipeline. The checks live in
//! `tests/acceptance.rs`; run them with `cargo test -p orthorecon-acceptance`.
//! Each criterion prints one `PASS`/`FAIL` line with its measured values.
