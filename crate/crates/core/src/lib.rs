//! Generalized entropy of binary prediction games.
//!
//! A game pairs the binary outcome alphabet with the prediction interval
//! `[0, 1]` and a loss function. Given a stationary ergodic source the crate
//! computes the n-step and conditional generalized entropies exactly, builds
//! the pointwise optimal strategy, runs the aggregating strategy over a finite
//! expert pool, and simulates loss rates along sampled paths.
//!
//! All losses and entropies are in nats.
//!
//! ```
//! use entrogame::{entropy, games::Game, sources::SourceModel};
//!
//! let game = Game::log_loss();
//! let source = SourceModel::symmetric_markov(0.2).unwrap();
//! let report = entropy::entropy_rate(&game, &source, 1e-9, 22).unwrap();
//! assert!((report.rate_estimate - 0.500402).abs() < 1e-6);
//! ```

pub mod aggregation;
pub mod cli;
pub mod entropy;
mod error;
pub mod games;
pub mod optimize;
pub mod simulation;
pub mod sources;
pub mod strategies;

pub use error::{Error, Result};

/// A single outcome, `0` or `1`.
pub type Bit = u8;

/// Parses a string of `'0'`/`'1'` characters into bits.
pub fn parse_bits(s: &str) -> Result<Vec<Bit>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(Error::Config(format!("invalid bit character {other:?} in {s:?}"))),
        })
        .collect()
}

/// Renders bits as a `'0'`/`'1'` string.
pub fn format_bits(bits: &[Bit]) -> String {
    bits.iter().map(|&b| if b == 0 { '0' } else { '1' }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bits_parse_and_format() {
        let bits = parse_bits("0110").unwrap();
        assert_eq!(bits, vec![0, 1, 1, 0]);
        assert_eq!(format_bits(&bits), "0110");
        assert!(parse_bits("01x").is_err());
        assert!(parse_bits("").unwrap().is_empty());
    }
}
