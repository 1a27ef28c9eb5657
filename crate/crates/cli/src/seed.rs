//! Seed expansion. Every task derives its random streams from one master seed
//! with SplitMix64: the `i`-th derived seed is the `i`-th output of a
//! SplitMix64 generator started at the master seed (outputs counted from 0).

pub const INITIAL_DATA: usize = 0;
pub const ESTIMATOR: usize = 1;
pub const CORPUS: usize = 2;

pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive(master: u64, index: usize) -> u64 {
    let mut state = master;
    let mut out = 0;
    for _ in 0..=index {
        out = splitmix64(&mut state);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_outputs() {
        // reference SplitMix64 outputs for seed 1234567
        let mut s = 1234567u64;
        let got: Vec<u64> = (0..3).map(|_| splitmix64(&mut s)).collect();
        assert_eq!(
            got,
            [
                6457827717110365317,
                3203168211198807973,
                9817491932198370423
            ]
        );
        assert_eq!(derive(1234567, 2), 9817491932198370423);
    }
}
