//! Exact two-pulse correlations `⟨F1^a F2^b⟩` by operator algebra, ideal and
//! at finite efficiency.
//!
//!     cargo run --example oracle_tables

use homodyne::oracle::{contaminate, exact_physics, exact_table};
use homodyne::zoo;

fn main() -> homodyne::Result<()> {
    let zoo = zoo::standard_zoo(16)?;
    for (name, state) in &zoo {
        let ideal = exact_table(state, 4, 0.0, 0.9, true, 1.0)?;
        let measured = contaminate(&ideal, 0.6)?;
        println!("{name} (phase averaged, Δφ = 0.9):");
        for (&(a, b), v) in &ideal.values {
            if a + b > 0 {
                println!("   ⟨F1^{a} F2^{b}⟩ = {v:>9.5}   at η = 0.6: {:>9.5}", measured.values[&(a, b)]);
            }
        }
        let p = exact_physics(state)?;
        println!(
            "   n1 = {:.4}, n2 = {:.4}, ⟨a1†a2⟩ = {:.4}, ⟨n1 n2⟩ = {:.4}\n",
            p.mean_n1, p.mean_n2, p.coherence, p.number_correlation
        );
    }
    Ok(())
}
