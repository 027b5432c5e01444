//! Truncated two-mode Fock states: construction, tail budgets and a few
//! expectation values.
//!
//!     cargo run --example fock_states

use homodyne::fock::{expect_real, make_state, make_state_with_tolerance, FockSpace, ModeOperator, StateKind};
use homodyne::zoo;

fn main() -> homodyne::Result<()> {
    for (name, state) in zoo::standard_zoo(16)? {
        let space = state.space();
        let n1 = expect_real(&state, &ModeOperator::number(space, 0)?.embed())?;
        let n2 = expect_real(&state, &ModeOperator::number(space, 1)?.embed())?;
        println!(
            "{name:>18}: dim {:>3}, pure {:>5}, <n1> = {n1:.4}, <n2> = {n2:.4}, top-level tail {:.1e}",
            space.dim(),
            state.is_pure(),
            state.max_tail()
        );
    }

    // Too small a cutoff is refused unless the caller accepts the tail.
    let bright = StateKind::Coherent { re: 3.0, im: 0.0 };
    match make_state(&bright, 6, 1) {
        Ok(_) => println!("cutoff 6 accepted"),
        Err(e) => println!("cutoff 6: {e}"),
    }
    let loose = make_state_with_tolerance(&bright, 6, 1, Some(0.5))?;
    println!("with tolerance 0.5 the tail is {:.3e}", loose.max_tail());

    let space = FockSpace::new(2, 4)?;
    println!("basis of {space:?}: first occupations {:?}", (0..4).map(|i| space.occupations(i)).collect::<Vec<_>>());
    Ok(())
}
