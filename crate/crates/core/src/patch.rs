//! Row-major real-valued grids and their plain-text representation.
//!
//! The text layout is shared by every file the toolkit writes that carries a
//! grid: a `<rows> <cols>` line followed by `rows` lines of `cols`
//! whitespace-separated decimal numbers. Reals are written with Rust's
//! shortest round-trip formatting, so a write/read cycle is lossless.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::error::{Error, Result};

/// A small image window or filter: `height × width` finite reals, row-major,
/// `(row, col)` indexing with the origin at the top-left.
#[derive(Clone, Debug, PartialEq)]
pub struct Patch {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl Patch {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidShape(format!(
                "{height}x{width} grid has no pixels"
            )));
        }
        if values.len() != height * width {
            return Err(Error::InvalidShape(format!(
                "{height}x{width} grid needs {} values, got {}",
                height * width,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    /// Builds a grid from nested rows. Panics on ragged or empty input, so it
    /// is meant for literals in code and tests.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(height * width);
        for row in rows {
            assert_eq!(row.as_ref().len(), width, "ragged rows");
            values.extend_from_slice(row.as_ref());
        }
        Self::new(height, width, values).expect("valid literal grid")
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(height > 0 && width > 0);
        let mut values = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                values.push(f(r, c));
            }
        }
        Self::new(height, width, values).expect("generator produced non-finite value")
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Self::from_fn(height, width, |_, _| value)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Pixel count `n`.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_square(&self) -> bool {
        self.height == self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(value.is_finite());
        self.values[row * self.width + col] = value;
    }

    pub fn same_shape(&self, other: &Patch) -> bool {
        self.height == other.height && self.width == other.width
    }

    /// Element-wise map; panics if `f` produces a non-finite value.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Patch {
        Patch::new(
            self.height,
            self.width,
            self.values.iter().map(|&v| f(v)).collect(),
        )
        .expect("map produced non-finite value")
    }

    /// `a·p + b`.
    pub fn affine(&self, a: f64, b: f64) -> Patch {
        self.map(|v| a * v + b)
    }

    /// Copies the `height × width` sub-grid whose top-left corner is `(row, col)`.
    pub fn window(&self, row: usize, col: usize, height: usize, width: usize) -> Result<Patch> {
        if row + height > self.height || col + width > self.width || height == 0 || width == 0 {
            return Err(Error::SizeMismatch(format!(
                "{height}x{width} window at ({row},{col}) exceeds {}x{} grid",
                self.height, self.width
            )));
        }
        let mut values = Vec::with_capacity(height * width);
        for r in row..row + height {
            let start = r * self.width + col;
            values.extend_from_slice(&self.values[start..start + width]);
        }
        Ok(Patch {
            height,
            width,
            values,
        })
    }

    /// Rotates by 90° counter-clockwise (lattice exact).
    pub fn rotate90(&self) -> Patch {
        let (h, w) = (self.height, self.width);
        Patch::from_fn(w, h, |r, c| self.get(c, w - 1 - r))
    }

    /// Rotates counter-clockwise by `quarter_turns × 90°`.
    pub fn rotate(&self, quarter_turns: u32) -> Patch {
        let mut out = self.clone();
        for _ in 0..quarter_turns % 4 {
            out = out.rotate90();
        }
        out
    }

    pub fn transpose(&self) -> Patch {
        Patch::from_fn(self.width, self.height, |r, c| self.get(c, r))
    }

    pub fn dot(&self, other: &Patch) -> f64 {
        dot(&self.values, &other.values)
    }

    /// Writes the grid in the shared text layout.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.values.len() * 12);
        let _ = writeln!(s, "{} {}", self.height, self.width);
        for row in self.values.chunks(self.width) {
            write_row(&mut s, row);
        }
        s
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Patch> {
        let mut lines = LineReader::new(input);
        let patch = lines.read_grid()?;
        if let Some((line, _)) = lines.next_nonempty()? {
            return Err(Error::parse(line, "trailing content after grid"));
        }
        Ok(patch)
    }
}

impl FromStr for Patch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Patch::read_text(s.as_bytes())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn write_row<T: std::fmt::Display>(s: &mut String, row: &[T]) {
    for (i, v) in row.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{v}");
    }
    s.push('\n');
}

/// Writes an integer grid in the same layout as [`Patch::to_text`].
pub(crate) fn int_grid_text(height: usize, width: usize, values: &[i64]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{height} {width}");
    for row in values.chunks(width) {
        write_row(&mut s, row);
    }
    s
}

/// Line-oriented reader shared by the text formats; tracks 1-based line
/// numbers for error messages and skips blank lines.
pub(crate) struct LineReader<R> {
    input: R,
    line_no: usize,
    buf: String,
}

impl<R: BufRead> LineReader<R> {
    pub(crate) fn new(input: R) -> Self {
        Self {
            input,
            line_no: 0,
            buf: String::new(),
        }
    }

    pub(crate) fn next_nonempty(&mut self) -> Result<Option<(usize, String)>> {
        loop {
            self.buf.clear();
            if self.input.read_line(&mut self.buf)? == 0 {
                return Ok(None);
            }
            self.line_no += 1;
            let trimmed = self.buf.trim();
            if !trimmed.is_empty() {
                return Ok(Some((self.line_no, trimmed.to_string())));
            }
        }
    }

    pub(crate) fn expect_line(&mut self, what: &str) -> Result<(usize, String)> {
        self.next_nonempty()?.ok_or_else(|| {
            Error::parse(
                self.line_no + 1,
                format!("unexpected end of input, expected {what}"),
            )
        })
    }

    /// Reads `<rows> <cols>` then the rows, parsing each token as `T`.
    pub(crate) fn read_tokens<T: FromStr>(&mut self) -> Result<(usize, usize, Vec<T>)> {
        let (line, header) = self.expect_line("grid header")?;
        let dims: Vec<&str> = header.split_whitespace().collect();
        let parse_dim = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::parse(line, format!("bad grid dimension `{s}`")))
        };
        if dims.len() != 2 {
            return Err(Error::parse(line, "grid header must be `<rows> <cols>`"));
        }
        let (rows, cols) = (parse_dim(dims[0])?, parse_dim(dims[1])?);
        if rows == 0 || cols == 0 {
            return Err(Error::parse(line, "grid dimensions must be positive"));
        }
        let mut values = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (line, text) = self.expect_line("grid row")?;
            let before = values.len();
            for tok in text.split_whitespace() {
                values.push(
                    tok.parse::<T>()
                        .map_err(|_| Error::parse(line, format!("bad number `{tok}`")))?,
                );
            }
            if values.len() - before != cols {
                return Err(Error::parse(
                    line,
                    format!("expected {cols} values, found {}", values.len() - before),
                ));
            }
        }
        Ok((rows, cols, values))
    }

    pub(crate) fn read_grid(&mut self) -> Result<Patch> {
        let line = self.line_no + 1;
        let (rows, cols, values) = self.read_tokens::<f64>()?;
        Patch::new(rows, cols, values).map_err(|e| Error::parse(line, e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(Patch::new(0, 3, vec![]), Err(Error::InvalidShape(_))));
        assert!(matches!(
            Patch::new(2, 2, vec![1.0; 3]),
            Err(Error::InvalidShape(_))
        ));
        assert!(matches!(
            Patch::new(1, 2, vec![1.0, f64::NAN]),
            Err(Error::NonFinite(1))
        ));
    }

    #[test]
    fn rotation_four_times_is_identity() {
        let p = Patch::from_fn(3, 5, |r, c| (r * 7 + c) as f64);
        let r = p.rotate90();
        assert_eq!((r.height(), r.width()), (5, 3));
        // top-right corner moves to top-left under a counter-clockwise turn
        assert_eq!(r.get(0, 0), p.get(0, 4));
        assert_eq!(p.rotate(4), p);
    }

    #[test]
    fn window_bounds() {
        let p = Patch::from_fn(4, 4, |r, c| (r * 4 + c) as f64);
        let w = p.window(1, 2, 2, 2).unwrap();
        assert_eq!(w.values(), &[6.0, 7.0, 10.0, 11.0]);
        assert!(p.window(3, 3, 2, 1).is_err());
    }

    #[test]
    fn text_format_layout() {
        let p = Patch::from_rows(&[[1.0, 2.5], [-3.0, 0.1]]);
        assert_eq!(p.to_text(), "2 2\n1 2.5\n-3 0.1\n");
    }

    #[test]
    fn text_parse_errors_carry_line_numbers() {
        let err = "2 2\n1 2\n3\n".parse::<Patch>().unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = "2 2\n1 2\n".parse::<Patch>().unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        let err = "1 1\nnan\n".parse::<Patch>().unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    proptest! {
        #[test]
        fn text_round_trip_is_lossless(
            h in 1usize..6,
            w in 1usize..6,
            seed in proptest::collection::vec(-1e300f64..1e300, 36),
        ) {
            let p = Patch::from_fn(h, w, |r, c| seed[r * 6 + c] / 7.0);
            let back: Patch = p.to_text().parse().unwrap();
            prop_assert_eq!(back, p);
        }
    }
}
