//! Mixing of lower-order correlations into measured ones by imperfect
//! detection.
//!
//! With `a_k → η a_k + √(η(1-η)) c_k` and vacuum noise modes, each field
//! strength becomes `η F_k + √(η(1-η)) F_{c_k}` and
//!
//! ```text
//! ⟨F1^a F2^b⟩_measured = Σ_{l,m} C(a,l) C(b,m) η^{(n+l+m)/2} ((1-η)/2)^{(n-l-m)/2}
//!                          (a-l-1)!! (b-m-1)!! ⟨F1^l F2^m⟩
//! ```
//!
//! with `n = a + b`, `l ≡ a` and `m ≡ b` (mod 2), `(-1)!! = 1`.

/// `k!!` for `k >= -1`.
pub fn double_factorial(k: i64) -> f64 {
    assert!(k >= -1, "double factorial of {k}");
    let mut acc = 1.0;
    let mut i = k;
    while i > 1 {
        acc *= i as f64;
        i -= 2;
    }
    acc
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `m`-th moment of a vacuum field strength: `2^{-m/2} (m-1)!!` for even `m`.
pub fn vacuum_moment(m: usize) -> f64 {
    if m % 2 == 1 {
        0.0
    } else {
        2f64.powf(-(m as f64) / 2.0) * double_factorial(m as i64 - 1)
    }
}

/// Lower-order entries `(l, m)` feeding the measured `(a, b)` correlation,
/// including `(a, b)` itself, ordered by increasing `l + m`.
pub fn sources(a: usize, b: usize) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = (0..=a)
        .rev()
        .step_by(2)
        .flat_map(|l| (0..=b).rev().step_by(2).map(move |m| (l, m)))
        .collect();
    out.sort_by_key(|&(l, m)| (l + m, l));
    out
}

/// Weight of ideal `⟨F1^l F2^m⟩` in measured `⟨F1^a F2^b⟩` at efficiency `eta`.
pub fn coefficient(a: usize, b: usize, l: usize, m: usize, eta: f64) -> f64 {
    if l > a || m > b || (a - l) % 2 == 1 || (b - m) % 2 == 1 {
        return 0.0;
    }
    let n = (a + b) as f64;
    let lm = (l + m) as f64;
    binomial(a, l)
        * binomial(b, m)
        * eta.powf((n + lm) / 2.0)
        * ((1.0 - eta) / 2.0).powf((n - lm) / 2.0)
        * double_factorial(a as i64 - l as i64 - 1)
        * double_factorial(b as i64 - m as i64 - 1)
}
