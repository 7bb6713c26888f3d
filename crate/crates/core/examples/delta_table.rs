//! Recomputes the built-in δ candidates: `cargo run --release --example delta_table`.

use cantor_ft::cosineineq::{default_quad, delta_search};

fn main() {
    let opts = default_quad();
    let mut exps = Vec::new();
    for n in 1..=8 {
        let r = delta_search(n, 2.0, 1.0, 4, 0x5eed, &opts).expect("search failed");
        eprintln!("n = {n}: δ = 2^-{} after {} checks{}", r.exponent, r.checks, if r.fallback { " (fallback)" } else { "" });
        exps.push(r.exponent);
    }
    println!("{exps:?}");
}
