//! Detection efficiency attenuates every correlation and mixes in lower
//! orders; the correction undoes both, order by order.
//!
//!     cargo run --example efficiency_correction

use homodyne::lab::{chebyshev_q_grid, decontaminate, invert_q_system, synthetic_table};
use homodyne::oracle::{contaminate, exact_table};
use homodyne::zoo;

fn main() -> homodyne::Result<()> {
    let (name, state) = zoo::standard_zoo(16)?.swap_remove(4);
    let ideal = exact_table(&state, 4, 0.0, 0.0, true, 1.0)?;
    println!("{name}, phase averaged");
    println!(" eta   (a,b)   measured    corrected   ideal");
    for eta in [0.3, 0.6, 0.9] {
        let measured = contaminate(&ideal, eta)?;
        let table = synthetic_table(std::slice::from_ref(&measured), &chebyshev_q_grid(5, 0.0, 2.0), 4)?;
        let corrected = decontaminate(&invert_q_system(&table, 4)?, eta)?;
        for key in [(2, 0), (1, 1), (4, 0), (2, 2)] {
            println!(
                "{eta:.1}   {key:?}   {:>9.6}   {:>9.6}   {:>9.6}",
                measured.values[&key],
                corrected.slices[0].entries[&key].value,
                ideal.values[&key]
            );
        }
    }
    Ok(())
}
