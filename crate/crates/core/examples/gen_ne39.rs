//! Regenerates `fixtures/ne39.json`:
//! `cargo run -p outage-core --example gen_ne39 > crates/core/fixtures/ne39.json`

use outage_core::fixtures::{synthetic_new_england, NE39_SEED};

fn main() {
    println!("{}", synthetic_new_england(NE39_SEED).to_json_pretty());
}
