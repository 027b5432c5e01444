use crate::efficiency;
use crate::error::{Error, Result};
use crate::lab::{CorrelationSet, Linear};

/// Removes detection-efficiency attenuation and lower-order contamination.
///
/// Entries are corrected in increasing order `a + b`: the contamination built
/// from already-corrected lower orders is subtracted, then the remainder is
/// divided by `η^(a+b)`.
pub fn decontaminate(set: &CorrelationSet, eta: f64) -> Result<CorrelationSet> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidEfficiency(eta));
    }
    if set.corrected {
        return Err(Error::Mismatch("correlation set is already corrected".into()));
    }
    let n_vars = set.n_vars();
    let mut out = set.clone();
    for slice in &mut out.slices {
        let mut keys: Vec<(usize, usize)> = slice.entries.keys().copied().collect();
        keys.sort_by_key(|&(a, b)| (a + b, a));
        for (a, b) in keys {
            if a + b == 0 {
                continue;
            }
            let measured = &slice.entries[&(a, b)];
            let mut residual = measured.clone();
            for (l, m) in efficiency::sources(a, b) {
                if (l, m) == (a, b) {
                    continue;
                }
                let lower: Linear = if l + m == 0 {
                    Linear::constant(1.0, n_vars)
                } else {
                    slice
                        .entries
                        .get(&(l, m))
                        .cloned()
                        .ok_or(Error::MissingEntry(l, m))?
                };
                residual.add_scaled(&lower, -efficiency::coefficient(a, b, l, m, eta));
            }
            let corrected = residual.scaled(1.0 / efficiency::coefficient(a, b, a, b, eta));
            slice.entries.insert((a, b), corrected);
        }
    }
    out.corrected = true;
    out.eta = eta;
    Ok(out)
}
