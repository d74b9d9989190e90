use rand::Rng as _;
use serde::Serialize;

use crate::error::{domain, Result};
use crate::rng::Rng;

/// Two decks under the random-to-random shuffle coupling. Position 0 is the
/// top of a deck; cards are labelled `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ShuffleState {
    deck_a: Vec<usize>,
    deck_b: Vec<usize>,
    crossings: usize,
}

fn check_permutation(deck: &[usize]) -> Result<()> {
    let mut seen = vec![false; deck.len()];
    for &c in deck {
        if c >= deck.len() || seen[c] {
            return domain(format!("{deck:?} is not a permutation of 0..{}", deck.len()));
        }
        seen[c] = true;
    }
    Ok(())
}

impl ShuffleState {
    pub fn new(deck_a: Vec<usize>, deck_b: Vec<usize>) -> Result<Self> {
        if deck_a.len() != deck_b.len() {
            return domain("decks differ in size");
        }
        check_permutation(&deck_a)?;
        check_permutation(&deck_b)?;
        let crossings = inversion_distance(&deck_a, &deck_b);
        Ok(Self { deck_a, deck_b, crossings })
    }

    pub fn deck_a(&self) -> &[usize] {
        &self.deck_a
    }

    pub fn deck_b(&self) -> &[usize] {
        &self.deck_b
    }

    /// Minimal number of adjacent transpositions taking one deck to the other.
    pub fn crossings(&self) -> usize {
        self.crossings
    }

    pub fn n(&self) -> usize {
        self.deck_a.len()
    }

    /// Moves `card` to slot `slot` of deck A and places it directly below the
    /// same neighbour in deck B (on top when `slot == 0`).
    pub fn apply(&mut self, card: usize, slot: usize) {
        let n = self.n();
        assert!(card < n && slot < n);
        self.deck_a.retain(|&c| c != card);
        self.deck_b.retain(|&c| c != card);
        self.deck_a.insert(slot, card);
        if slot == 0 {
            self.deck_b.insert(0, card);
        } else {
            let above = self.deck_a[slot - 1];
            let at = self.deck_b.iter().position(|&c| c == above).unwrap();
            self.deck_b.insert(at + 1, card);
        }
        self.crossings = inversion_distance(&self.deck_a, &self.deck_b);
    }

    pub(crate) fn step_with(&mut self, rng: &mut Rng) {
        let n = self.n();
        let card = rng.gen_range(0..n);
        let slot = rng.gen_range(0..n);
        self.apply(card, slot);
    }
}

/// One coupled shuffle step.
pub fn shuffle_step(state: &ShuffleState, seed: u64) -> ShuffleState {
    let mut next = state.clone();
    next.step_with(&mut crate::rng::seeded(seed));
    next
}

/// Kendall-tau distance between two orderings of `0..n` via merge-sort
/// inversion counting.
pub fn inversion_distance(a: &[usize], b: &[usize]) -> usize {
    let mut pos = vec![0usize; a.len()];
    for (i, &c) in a.iter().enumerate() {
        pos[c] = i;
    }
    let mut seq: Vec<usize> = b.iter().map(|&c| pos[c]).collect();
    let mut buf = vec![0usize; seq.len()];
    count_sort(&mut seq, &mut buf)
}

fn count_sort(v: &mut [usize], buf: &mut [usize]) -> usize {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = {
        let (l, r) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        count_sort(l, bl) + count_sort(r, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[i] <= v[j] {
            buf[k] = v[i];
            i += 1;
        } else {
            buf[k] = v[j];
            inv += mid - i;
            j += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    inv
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(a: &[usize], b: &[usize]) -> usize {
        let pos: Vec<usize> = (0..a.len()).map(|c| a.iter().position(|&x| x == c).unwrap()).collect();
        let s: Vec<usize> = b.iter().map(|&c| pos[c]).collect();
        (0..s.len()).flat_map(|i| ((i + 1)..s.len()).map(move |j| (i, j))).filter(|&(i, j)| s[i] > s[j]).count()
    }

    #[test]
    fn inversions_match_brute_force() {
        let a = vec![3, 0, 4, 1, 2, 5];
        let b = vec![5, 4, 3, 2, 1, 0];
        assert_eq!(inversion_distance(&a, &b), brute(&a, &b));
        assert_eq!(inversion_distance(&a, &a), 0);
        let rev: Vec<usize> = (0..7).rev().collect();
        assert_eq!(inversion_distance(&(0..7).collect::<Vec<_>>(), &rev), 21);
    }

    #[test]
    fn equal_decks_stay_equal() {
        let s = ShuffleState::new(vec![2, 0, 1, 3], vec![2, 0, 1, 3]).unwrap();
        for seed in 0..20 {
            let t = shuffle_step(&s, seed);
            assert_eq!(t.deck_a(), t.deck_b());
            assert_eq!(t.crossings(), 0);
        }
    }

    #[test]
    fn rejects_non_permutations() {
        assert!(ShuffleState::new(vec![0, 0, 1], vec![0, 1, 2]).is_err());
        assert!(ShuffleState::new(vec![0, 1], vec![0, 1, 2]).is_err());
    }
}
