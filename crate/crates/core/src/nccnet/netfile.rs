//! Text serialization of a trained network.
//!
//! ```text
//! nccnet 1
//! norm std|mad|none
//! filters <N>
//! train learning_rate=<r> lr_decay=<r> momentum=<r> weight_decay=<r> batch_size=<u> max_epochs=<u> rng_seed=<u>
//! weights <w_1> ... <w_N>
//! filter 1
//! <grid in the patch text layout>
//! ...
//! filter N
//! <grid>
//! ```
//!
//! Blank lines are ignored. Reals use shortest round-trip formatting, so
//! reading back a written file reproduces the network bit for bit.

use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use crate::error::{Error, Result};
use crate::patch::LineReader;

use super::network::{NccNetwork, NormMode};
use super::train::TrainConfig;

pub const NETFILE_VERSION: u32 = 1;

/// A network together with the configuration it was trained with.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkFile {
    pub network: NccNetwork,
    pub config: TrainConfig,
}

impl NetworkFile {
    pub fn to_text(&self) -> String {
        let net = &self.network;
        let c = &self.config;
        let mut s = String::new();
        let _ = writeln!(s, "nccnet {NETFILE_VERSION}");
        let _ = writeln!(s, "norm {}", net.mode().as_str());
        let _ = writeln!(s, "filters {}", net.filter_count());
        let _ = writeln!(
            s,
            "train learning_rate={} lr_decay={} momentum={} weight_decay={} batch_size={} max_epochs={} rng_seed={}",
            c.learning_rate, c.lr_decay, c.momentum, c.weight_decay, c.batch_size, c.max_epochs, c.rng_seed
        );
        s.push_str("weights");
        for w in net.weights() {
            let _ = write!(s, " {w}");
        }
        s.push('\n');
        for (k, f) in net.filters().iter().enumerate() {
            let _ = writeln!(s, "filter {}", k + 1);
            s.push_str(&f.to_text());
        }
        s
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = LineReader::new(input);

        let (line, magic) = lines.expect_line("`nccnet` header")?;
        match magic.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["nccnet", v] => {
                let v: u32 = v.parse().map_err(|_| Error::parse(line, "bad version number"))?;
                if v != NETFILE_VERSION {
                    return Err(Error::VersionMismatch {
                        found: v as u16,
                        expected: NETFILE_VERSION as u16,
                    });
                }
            }
            _ => return Err(Error::parse(line, "expected `nccnet <version>`")),
        }

        let (line, text) = lines.expect_line("`norm` line")?;
        let mode: NormMode = keyed(&text, "norm", line)?
            .parse()
            .map_err(|e: Error| Error::parse(line, e.to_string()))?;

        let (line, text) = lines.expect_line("`filters` line")?;
        let count: usize = keyed(&text, "filters", line)?
            .parse()
            .map_err(|_| Error::parse(line, "bad filter count"))?;

        let (line, text) = lines.expect_line("`train` line")?;
        let config = parse_config(keyed(&text, "train", line)?, line)?;

        let (line, text) = lines.expect_line("`weights` line")?;
        let weights = keyed(&text, "weights", line)?
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::parse(line, format!("bad weight `{t}`")))
            })
            .collect::<Result<Vec<_>>>()?;

        let mut filters = Vec::with_capacity(count);
        for k in 1..=count {
            let (line, text) = lines.expect_line("`filter` line")?;
            let idx: usize = keyed(&text, "filter", line)?
                .parse()
                .map_err(|_| Error::parse(line, "bad filter index"))?;
            if idx != k {
                return Err(Error::parse(line, format!("expected filter {k}, found {idx}")));
            }
            filters.push(lines.read_grid()?);
        }
        if let Some((line, _)) = lines.next_nonempty()? {
            return Err(Error::parse(line, "trailing content"));
        }
        let network = NccNetwork::new(filters, weights, mode)?;
        Ok(Self { network, config })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read(std::io::BufReader::new(file))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

fn keyed<'a>(text: &'a str, key: &str, line: usize) -> Result<&'a str> {
    let rest = text
        .strip_prefix(key)
        .filter(|r| r.is_empty() || r.starts_with(char::is_whitespace))
        .ok_or_else(|| Error::parse(line, format!("expected `{key}`")))?;
    Ok(rest.trim())
}

fn parse_config(text: &str, line: usize) -> Result<TrainConfig> {
    let mut c = TrainConfig::default();
    let mut seen = 0u8;
    for tok in text.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| Error::parse(line, format!("expected key=value, got `{tok}`")))?;
        let bad = || Error::parse(line, format!("bad value for `{k}`"));
        let bit = match k {
            "learning_rate" => {
                c.learning_rate = v.parse().map_err(|_| bad())?;
                0
            }
            "momentum" => {
                c.momentum = v.parse().map_err(|_| bad())?;
                1
            }
            "weight_decay" => {
                c.weight_decay = v.parse().map_err(|_| bad())?;
                2
            }
            "batch_size" => {
                c.batch_size = v.parse().map_err(|_| bad())?;
                3
            }
            "max_epochs" => {
                c.max_epochs = v.parse().map_err(|_| bad())?;
                4
            }
            "rng_seed" => {
                c.rng_seed = v.parse().map_err(|_| bad())?;
                5
            }
            "lr_decay" => {
                c.lr_decay = v.parse().map_err(|_| bad())?;
                6
            }
            _ => return Err(Error::parse(line, format!("unknown key `{k}`"))),
        };
        seen |= 1 << bit;
    }
    if seen != 0b111_1111 {
        return Err(Error::parse(line, "train line must set all seven keys"));
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nccnet::init_network;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_is_lossless(n in 1usize..=4, seed in any::<u64>(), w in -10.0f64..10.0, mode in 0u8..3) {
            let mode = [NormMode::Std, NormMode::Mad, NormMode::None][mode as usize];
            let mut network = init_network(n, 7, mode, seed).unwrap();
            network.weights_mut()[0] = w / 3.0;
            let file = NetworkFile {
                network,
                config: TrainConfig { rng_seed: seed, learning_rate: 1.0 / 3.0, ..TrainConfig::default() },
            };
            let back = NetworkFile::read(file.to_text().as_bytes()).unwrap();
            prop_assert_eq!(back, file);
        }
    }

    #[test]
    fn rejects_malformed_files() {
        let file = NetworkFile {
            network: init_network(2, 3, NormMode::Std, 1).unwrap(),
            config: TrainConfig::default(),
        };
        let text = file.to_text();
        assert!(matches!(
            NetworkFile::read(text.replace("nccnet 1", "nccnet 9").as_bytes()),
            Err(Error::VersionMismatch { found: 9, .. })
        ));
        assert!(NetworkFile::read(text.replace("norm std", "norm l2").as_bytes()).is_err());
        assert!(NetworkFile::read(text.replace("filter 2", "filter 3").as_bytes()).is_err());
        let truncated: String = text.lines().take(8).collect::<Vec<_>>().join("\n");
        assert!(matches!(
            NetworkFile::read(truncated.as_bytes()),
            Err(Error::Parse { .. })
        ));
        assert!(NetworkFile::read(text.replace(" rng_seed=0", "").as_bytes()).is_err());
    }
}
