//! The oracle checks behind `ipp validate`, with and without an injected fault.
//!
//! ```text
//! cargo run --release --example validate_oracles
//! ```

use anomaly_ipp::validation::{run_all, Fault};

fn main() {
    for r in run_all(None) {
        println!("{r}");
    }
    println!("\nwith the closed-form IVR-LW constant corrupted by 1%:");
    for r in run_all(Some(Fault::IvrLw)).iter().filter(|r| !r.passed) {
        println!("{r}");
    }
}
