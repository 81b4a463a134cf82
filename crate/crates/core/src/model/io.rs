//! Flat text format for models.
//!
//! ```text
//! vlmc-model 1
//! order 2
//! gamma 0
//! mode max
//! num_visits 0
//! total_views 42
//! states 10
//! S 0 14
//! 102 0 4
//! ...
//! transitions 17
//! S 0 102 0 4
//! ...
//! ```
//!
//! States are written as `page clone_index visits`, transitions as
//! `from_page from_clone to_page to_clone weight`; `S` and `F` stand for
//! the artificial states.

use std::io::{BufRead, Write};

use super::{BuildParams, ModelGraph, ModelGraphBuilder, State};
use crate::error::{Error, Result};
use crate::token::Token;

const MAGIC: &str = "vlmc-model 1";

impl ModelGraph {
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{MAGIC}")?;
        writeln!(w, "order {}", self.order)?;
        writeln!(w, "gamma {}", self.params.gamma)?;
        writeln!(w, "mode {}", self.params.gamma_mode)?;
        writeln!(w, "num_visits {}", self.params.num_visits)?;
        writeln!(w, "total_views {}", self.total_views)?;
        writeln!(w, "states {}", self.state_count())?;
        for id in self.state_ids() {
            let s = self.state(id);
            writeln!(w, "{} {} {}", s.token, s.clone_index, self.visits(id))?;
        }
        writeln!(w, "transitions {}", self.transition_count())?;
        for from in self.state_ids() {
            let f = self.state(from);
            for (to, weight) in self.out_edges(from) {
                let t = self.state(to);
                writeln!(w, "{} {} {} {} {}", f.token, f.clone_index, t.token, t.clone_index, weight)?;
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("model text is ASCII")
    }

    /// Parses the output of [`ModelGraph::write`].
    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = Lines { inner: r.lines(), line: 0 };
        let magic = lines.next_line()?;
        if magic.trim() != MAGIC {
            return Err(lines.error(format!("expected {MAGIC:?} header")));
        }
        let order: usize = lines.keyed("order")?;
        let gamma: f64 = lines.keyed("gamma")?;
        let gamma_mode = lines.keyed("mode")?;
        let num_visits: u64 = lines.keyed("num_visits")?;
        let total_views: u64 = lines.keyed("total_views")?;
        let params = BuildParams { target_order: order, gamma, gamma_mode, num_visits };

        let mut b = ModelGraphBuilder::new().params(params).total_views(total_views);
        let n_states: usize = lines.keyed("states")?;
        for _ in 0..n_states {
            let f = lines.fields(3)?;
            let token: Token = lines.parse(&f[0])?;
            b = b.state(token, lines.parse(&f[1])?, lines.parse(&f[2])?);
        }
        let n_edges: usize = lines.keyed("transitions")?;
        for _ in 0..n_edges {
            let f = lines.fields(5)?;
            let from = State::new(lines.parse(&f[0])?, lines.parse(&f[1])?);
            let to = State::new(lines.parse(&f[2])?, lines.parse(&f[3])?);
            b = b.transition(from, to, lines.parse(&f[4])?);
        }
        let line = lines.line;
        b.build().map_err(|e| Error::Parse { line, message: e.to_string() })
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::read(text.as_bytes())
    }
}

struct Lines<I> {
    inner: I,
    line: usize,
}

impl<I: Iterator<Item = std::io::Result<String>>> Lines<I> {
    fn error(&self, message: String) -> Error {
        Error::Parse { line: self.line, message }
    }

    fn next_line(&mut self) -> Result<String> {
        self.line += 1;
        match self.inner.next() {
            Some(l) => Ok(l?),
            None => Err(self.error("unexpected end of model file".into())),
        }
    }

    fn fields(&mut self, n: usize) -> Result<Vec<String>> {
        let l = self.next_line()?;
        let f: Vec<String> = l.split_whitespace().map(str::to_owned).collect();
        if f.len() != n {
            return Err(self.error(format!("expected {n} fields, found {}", f.len())));
        }
        Ok(f)
    }

    fn parse<T: std::str::FromStr>(&self, s: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        s.parse().map_err(|e: T::Err| self.error(format!("{s:?}: {e}")))
    }

    fn keyed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let f = self.fields(2)?;
        if f[0] != key {
            return Err(self.error(format!("expected {key:?}, found {:?}", f[0])));
        }
        self.parse(&f[1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_vlmc, GammaMode};
    use crate::testutil::fixture_a;

    #[test]
    fn round_trip_is_identity() {
        for order in 1..=3 {
            let p = BuildParams { target_order: order, gamma: 0.0, gamma_mode: GammaMode::Avg, num_visits: 0 };
            let g = build_vlmc::<f64>(&fixture_a(), p).unwrap();
            let text = g.to_text();
            let back = ModelGraph::from_text(&text).unwrap();
            assert_eq!(back, g);
            assert_eq!(back.to_text(), text);
        }
    }

    #[test]
    fn fractional_gamma_survives() {
        let p = BuildParams { target_order: 2, gamma: 0.07, gamma_mode: GammaMode::Avg, num_visits: 3 };
        let g = build_vlmc::<f64>(&fixture_a(), p).unwrap();
        let back = ModelGraph::from_text(&g.to_text()).unwrap();
        assert_eq!(back.params(), &p);
    }

    #[test]
    fn header_is_readable() {
        let g = build_vlmc::<f64>(&fixture_a(), BuildParams::default()).unwrap();
        let text = g.to_text();
        assert!(text
            .starts_with("vlmc-model 1\norder 1\ngamma 0\nmode max\nnum_visits 0\ntotal_views 42\nstates 8\nS 0 14\n"));
    }

    #[test]
    fn malformed_files_report_lines() {
        let g = build_vlmc::<f64>(&fixture_a(), BuildParams::default()).unwrap();
        let text = g.to_text();
        let truncated: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
        assert!(matches!(ModelGraph::from_text(&truncated), Err(Error::Parse { .. })));
        let bad = text.replacen("order 1", "order x", 1);
        assert!(matches!(ModelGraph::from_text(&bad), Err(Error::Parse { line: 2, .. })));
        assert!(ModelGraph::from_text("hello\n").is_err());
    }
}
