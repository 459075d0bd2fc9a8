use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Detection methods with an analytic operation count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CountedMethod {
    MadRatio,
    NccStd,
    NccMad,
    UnnormCorr,
}

impl CountedMethod {
    pub const ALL: [CountedMethod; 4] = [
        CountedMethod::MadRatio,
        CountedMethod::NccStd,
        CountedMethod::NccMad,
        CountedMethod::UnnormCorr,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            CountedMethod::MadRatio => "mad-ratio",
            CountedMethod::NccStd => "ncc-std",
            CountedMethod::NccMad => "ncc-mad",
            CountedMethod::UnnormCorr => "unnorm-corr",
        }
    }
}

impl FromStr for CountedMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::UnknownMethod(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpCount {
    pub multiplications: u64,
    pub additions: u64,
    pub divisions: u64,
    pub square_roots: u64,
}

/// Arithmetic operations to process an `N × N` image with an `f × f`
/// filter. Every `N²/f²` term is floored.
///
/// | method      | mul | add      | div    | sqrt   |
/// |-------------|-----|----------|--------|--------|
/// | mad-ratio   | N²  | N²/f²    | N²/f²  | 0      |
/// | ncc-std     | N²  | 2·N²/f²  | N²/f²  | N²/f²  |
/// | ncc-mad     | N²  | 2·N²/f²  | N²/f²  | 0      |
/// | unnorm-corr | N²  | N²/f²    | 0      | 0      |
pub fn op_count(method: &str, image_side: u64, filter_side: u64) -> Result<OpCount> {
    let method: CountedMethod = method.parse()?;
    if filter_side == 0 {
        return Err(Error::InvalidConfig("filter side must be positive".into()));
    }
    let n2 = image_side * image_side;
    let tiles = n2 / (filter_side * filter_side);
    let (additions, divisions, square_roots) = match method {
        CountedMethod::MadRatio => (tiles, tiles, 0),
        CountedMethod::NccStd => (2 * tiles, tiles, tiles),
        CountedMethod::NccMad => (2 * tiles, tiles, 0),
        CountedMethod::UnnormCorr => (tiles, 0, 0),
    };
    Ok(OpCount {
        multiplications: n2,
        additions,
        divisions,
        square_roots,
    })
}

/// CSV with header `method,N,f,mul,add,div,sqrt`.
pub fn op_count_csv(image_side: u64, filter_side: u64) -> Result<String> {
    let mut s = String::from("method,N,f,mul,add,div,sqrt\n");
    for m in CountedMethod::ALL {
        let c = op_count(m.as_str(), image_side, filter_side)?;
        let _ = writeln!(
            s,
            "{},{image_side},{filter_side},{},{},{},{}",
            m.as_str(),
            c.multiplications,
            c.additions,
            c.divisions,
            c.square_roots
        );
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_rows() {
        assert_eq!(op_count("ncc-mad", 512, 15).unwrap().square_roots, 0);
        let std = op_count("ncc-std", 512, 15).unwrap();
        assert_eq!(std.square_roots, 1165);
        assert_eq!(std.square_roots, (512 * 512) / (15 * 15));
        assert_eq!(std.additions, 2330);
        assert_eq!(std.multiplications, 262_144);
        assert_eq!(op_count("unnorm-corr", 512, 15).unwrap().divisions, 0);
        assert_eq!(op_count("mad-ratio", 256, 15).unwrap().divisions, 291);
    }

    #[test]
    fn unknown_method() {
        assert!(matches!(op_count("ipi", 512, 15), Err(Error::UnknownMethod(m)) if m == "ipi"));
    }

    #[test]
    fn csv_layout() {
        let csv = op_count_csv(512, 15).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "method,N,f,mul,add,div,sqrt");
        assert_eq!(lines[2], "ncc-std,512,15,262144,2330,1165,1165");
        assert_eq!(lines.len(), 5);
    }
}
