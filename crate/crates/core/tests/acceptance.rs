//! Runs the full acceptance gate and prints one line per criterion.
//! Run with `cargo test --test acceptance -- --nocapture` to see them.

use skyshare_core::acceptance::{all_pass, render, run_all};

#[test]
fn acceptance_gate() {
    let results = run_all();
    print!("{}", render(&results));
    assert!(all_pass(&results), "\n{}", render(&results));
}
