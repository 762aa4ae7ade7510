//! Functional sign-off: compare the adder built on a prefix circuit against
//! integer addition.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circuit::{CircuitError, NodeKind, PrefixCircuit, MAX_EVAL_WIDTH};

/// Widths up to this are checked on every operand pair.
pub const EXHAUSTIVE_MAX_WIDTH: usize = 10;

const LANES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Counterexample {
    pub a: u128,
    pub b: u128,
    /// Lowest wrong output bit; `width` denotes the carry out.
    pub bit: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Verdict {
    pub width: usize,
    pub checked: u64,
    pub exhaustive: bool,
    pub counterexample: Option<Counterexample>,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.counterexample.is_none()
    }
}

fn mask(width: usize) -> u128 {
    if width >= 128 {
        u128::MAX
    } else {
        (1u128 << width) - 1
    }
}

/// Evaluates up to 64 operand pairs at once, one pair per bit lane, and
/// returns the carry word of each pair.
fn carries_batch(c: &PrefixCircuit, outputs: &[usize], pairs: &[(u128, u128)]) -> Vec<u128> {
    debug_assert!(pairs.len() <= LANES);
    let mut p = Vec::with_capacity(c.len());
    let mut g = Vec::with_capacity(c.len());
    for node in c.nodes() {
        match node.kind {
            NodeKind::Input => {
                let (mut a_lane, mut b_lane) = (0u64, 0u64);
                for (lane, &(a, b)) in pairs.iter().enumerate() {
                    a_lane |= (((a >> node.id) & 1) as u64) << lane;
                    b_lane |= (((b >> node.id) & 1) as u64) << lane;
                }
                p.push(a_lane ^ b_lane);
                g.push(a_lane & b_lane);
            }
            NodeKind::Prefix { left, right } => {
                p.push(p[right] & p[left]);
                g.push(g[right] | (p[right] & g[left]));
            }
        }
    }
    let mut out = vec![0u128; pairs.len()];
    for (bit, &node) in outputs.iter().enumerate() {
        let lanes = g[node];
        for (lane, word) in out.iter_mut().enumerate() {
            *word |= u128::from((lanes >> lane) & 1 == 1) << bit;
        }
    }
    out
}

fn check_batch(
    c: &PrefixCircuit,
    outputs: &[usize],
    pairs: &[(u128, u128)],
) -> Option<Counterexample> {
    let width = c.width();
    let m = mask(width);
    let carries = carries_batch(c, outputs, pairs);
    for (&(a, b), &carry) in pairs.iter().zip(&carries) {
        let sum = ((a ^ b) ^ (carry << 1)) & m;
        let cout = (carry >> (width - 1)) & 1 == 1;
        let (full, overflow) = a.overflowing_add(b);
        let want_sum = full & m;
        let want_cout = if width >= 128 { overflow } else { (full >> width) & 1 == 1 };
        if sum != want_sum {
            let bit = (sum ^ want_sum).trailing_zeros() as usize;
            return Some(Counterexample { a, b, bit });
        }
        if cout != want_cout {
            return Some(Counterexample { a, b, bit: width });
        }
    }
    None
}

/// Operand values every non-exhaustive run includes.
pub fn corner_operands(width: usize) -> Vec<u128> {
    let m = mask(width);
    let alt = 0x5555_5555_5555_5555_5555_5555_5555_5555u128 & m;
    let mut v = vec![0, 1, m, alt, !alt & m, m >> 1, 1u128 << (width - 1)];
    v.sort_unstable();
    v.dedup();
    v
}

/// Checks the adder on every operand pair when `width <= 10`; otherwise on
/// all pairs of [`corner_operands`] plus `trials` uniform random pairs drawn
/// from a generator seeded with `seed`.
pub fn verify_adder(c: &PrefixCircuit, trials: u64, seed: u64) -> Result<Verdict, CircuitError> {
    let width = c.width();
    if width > MAX_EVAL_WIDTH {
        return Err(CircuitError::WidthTooLarge(width));
    }
    let outputs: Vec<usize> = c
        .output_nodes()
        .into_iter()
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| {
            CircuitError::NotValid(crate::circuit::format_ranges(&c.missing_output_ranges()))
        })?;

    let mut verdict = Verdict {
        width,
        checked: 0,
        exhaustive: width <= EXHAUSTIVE_MAX_WIDTH,
        counterexample: None,
    };
    let mut batch: Vec<(u128, u128)> = Vec::with_capacity(LANES);
    let flush = |batch: &mut Vec<(u128, u128)>, verdict: &mut Verdict| -> bool {
        verdict.checked += batch.len() as u64;
        let bad = check_batch(c, &outputs, batch);
        batch.clear();
        if bad.is_some() {
            verdict.counterexample = bad;
            return true;
        }
        false
    };

    if verdict.exhaustive {
        let limit = 1u128 << width;
        for a in 0..limit {
            for b in 0..limit {
                batch.push((a, b));
                if batch.len() == LANES && flush(&mut batch, &mut verdict) {
                    return Ok(verdict);
                }
            }
        }
    } else {
        let corners = corner_operands(width);
        for &a in &corners {
            for &b in &corners {
                batch.push((a, b));
                if batch.len() == LANES && flush(&mut batch, &mut verdict) {
                    return Ok(verdict);
                }
            }
        }
        let m = mask(width);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..trials {
            batch.push((rng.gen::<u128>() & m, rng.gen::<u128>() & m));
            if batch.len() == LANES && flush(&mut batch, &mut verdict) {
                return Ok(verdict);
            }
        }
    }
    if !batch.is_empty() {
        flush(&mut batch, &mut verdict);
    }
    Ok(verdict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{brent_kung, kogge_stone};

    #[test]
    fn two_bit_exhaustive_pass() {
        let c = kogge_stone(2).unwrap();
        let v = verify_adder(&c, 0, 0).unwrap();
        assert!(v.passed());
        assert!(v.exhaustive);
        assert_eq!(v.checked, 16);
    }

    #[test]
    fn brent_kung_16_random_pass() {
        let v = verify_adder(&brent_kung(16).unwrap(), 100_000, 7).unwrap();
        assert!(v.passed());
        assert!(!v.exhaustive);
        assert!(v.checked >= 100_000);
    }

    #[test]
    fn swapped_children_are_caught() {
        let mut c = kogge_stone(8).unwrap();
        let last = c.len() - 1;
        c.swap_children_unchecked(last);
        let v = verify_adder(&c, 0, 0).unwrap();
        let ce = v.counterexample.expect("mutation must be detected");
        let (sum, cout) = c.add(ce.a, ce.b).unwrap();
        assert_ne!(sum | (u128::from(cout) << 8), ce.a + ce.b);

        let mut c = brent_kung(16).unwrap();
        let last = c.len() - 1;
        c.swap_children_unchecked(last);
        assert!(!verify_adder(&c, 10_000, 1).unwrap().passed());
    }

    #[test]
    fn partial_circuit_is_rejected() {
        let c = PrefixCircuit::new(4).unwrap();
        assert!(matches!(verify_adder(&c, 0, 0), Err(CircuitError::NotValid(_))));
    }

    #[test]
    fn corners_fit_width() {
        assert_eq!(corner_operands(4), vec![0, 1, 0b0101, 0b0111, 0b1000, 0b1010, 0b1111]);
    }
}
