//! Sparsity patterns, elimination orderings and their file formats.
//!
//! A [`SparsityPattern`] is the undirected adjacency graph of the symmetrized
//! matrix `A + Aᵀ`. Only off-diagonal structure is stored; every node is
//! assumed to carry a structural diagonal entry.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Symmetric zero/nonzero structure of an `n x n` matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparsityPattern {
    n: usize,
    /// Canonical `(min, max)` pairs, sorted and deduplicated.
    edges: Vec<(usize, usize)>,
    has_diagonal: Vec<bool>,
}

impl SparsityPattern {
    /// Builds a pattern from arbitrary index pairs.
    ///
    /// Pairs are symmetrized and deduplicated. A pair `(i, i)` marks the
    /// diagonal of `i` and is not stored as an edge.
    pub fn from_edges<I>(n: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut has_diagonal = vec![false; n];
        let mut edges = Vec::new();
        for (i, j) in pairs {
            if i >= n || j >= n {
                return Err(Error::IndexOutOfRange { row: i, col: j, n });
            }
            if i == j {
                has_diagonal[i] = true;
            } else {
                edges.push((i.min(j), i.max(j)));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        Ok(Self {
            n,
            edges,
            has_diagonal,
        })
    }

    /// Pattern with no off-diagonal entries.
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            edges: Vec::new(),
            has_diagonal: vec![false; n],
        }
    }

    /// Path `0 - 1 - ... - (n-1)`.
    pub fn path(n: usize) -> Self {
        Self::from_edges(n, (1..n).map(|i| (i - 1, i))).expect("path indices are in range")
    }

    /// Cycle `0 - 1 - ... - (n-1) - 0`. For `n < 3` this degenerates to a path.
    pub fn cycle(n: usize) -> Self {
        let closing = (n >= 3).then(|| (n - 1, 0));
        Self::from_edges(n, (1..n).map(|i| (i - 1, i)).chain(closing)).expect("cycle indices are in range")
    }

    /// Star with center `0` and leaves `1..=leaves`.
    pub fn star(leaves: usize) -> Self {
        Self::from_edges(leaves + 1, (1..=leaves).map(|i| (0, i))).expect("star indices are in range")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_diagonal(&self, i: usize) -> bool {
        self.has_diagonal[i]
    }

    pub fn contains_edge(&self, i: usize, j: usize) -> bool {
        i != j && self.edges.binary_search(&(i.min(j), i.max(j))).is_ok()
    }

    /// Sorted neighbor lists.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Structural nonzeros of the symmetric matrix, diagonal included:
    /// `2 |E| + n`.
    pub fn nnz_sym(&self) -> usize {
        2 * self.edges.len() + self.n
    }

    /// Number of connected components (isolated nodes count as components).
    pub fn connected_components(&self) -> usize {
        let adj = self.adjacency();
        let mut seen = vec![false; self.n];
        let mut components = 0;
        let mut stack = Vec::new();
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(u) = stack.pop() {
                for &w in &adj[u] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        components
    }

    /// Relabels node `i` as `perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        Ordering::new(perm.to_vec())?;
        if perm.len() != self.n {
            return Err(Error::InvalidOrdering(format!(
                "relabeling has {} entries for {} nodes",
                perm.len(),
                self.n
            )));
        }
        let mut out = Self::from_edges(self.n, self.edges.iter().map(|&(i, j)| (perm[i], perm[j])))?;
        for (&target, &diag) in perm.iter().zip(&self.has_diagonal) {
            out.has_diagonal[target] = diag;
        }
        Ok(out)
    }
}

/// An elimination ordering: `perm()[k]` is the node eliminated at step `k`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Ordering {
    perm: Vec<usize>,
}

impl Ordering {
    /// Validates that `perm` is a bijection on `0..perm.len()`.
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let n = perm.len();
        let mut seen = vec![false; n];
        for (k, &v) in perm.iter().enumerate() {
            if v >= n {
                return Err(Error::InvalidOrdering(format!(
                    "entry {k} is {v}, outside 0..{n}"
                )));
            }
            if std::mem::replace(&mut seen[v], true) {
                return Err(Error::InvalidOrdering(format!("node {v} appears twice")));
            }
        }
        Ok(Self { perm })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            perm: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.perm
    }

    /// Inverse permutation: `positions()[v]` is the step at which `v` is eliminated.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.perm.len()];
        for (k, &v) in self.perm.iter().enumerate() {
            pos[v] = k;
        }
        pos
    }

    /// Checks that the ordering covers exactly the nodes of `pattern`.
    pub fn check_for(&self, pattern: &SparsityPattern) -> Result<()> {
        if self.perm.len() != pattern.n() {
            return Err(Error::InvalidOrdering(format!(
                "ordering has {} entries, pattern has {} nodes",
                self.perm.len(),
                pattern.n()
            )));
        }
        Ok(())
    }

    /// Reads the ordering file format: one 0-based node index per line.
    /// Blank lines are ignored.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut perm = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let v = trimmed.parse::<usize>().map_err(|_| Error::Parse {
                line: lineno + 1,
                msg: format!("expected a node index, found {trimmed:?}"),
            })?;
            perm.push(v);
        }
        Self::new(perm)
    }

    pub fn write<W: Write>(&self, mut writer: W) -> Result<()> {
        for v in &self.perm {
            writeln!(writer, "{v}")?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read(BufReader::new(File::open(path)?))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Field {
    Real,
    Integer,
    Pattern,
    Complex,
}

impl Field {
    fn value_tokens(self) -> usize {
        match self {
            Field::Pattern => 0,
            Field::Real | Field::Integer => 1,
            Field::Complex => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
    Hermitian,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_header(line: &str, lineno: usize) -> Result<(Field, Symmetry)> {
    let tokens: Vec<String> = line.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.first().map(String::as_str) != Some("%%matrixmarket") {
        return Err(parse_err(lineno, "header must start with %%MatrixMarket"));
    }
    if tokens.len() != 5 {
        return Err(parse_err(
            lineno,
            format!("header must have 5 fields, found {}", tokens.len()),
        ));
    }
    if tokens[1] != "matrix" {
        return Err(parse_err(lineno, format!("unsupported object {:?}", tokens[1])));
    }
    if tokens[2] != "coordinate" {
        return Err(parse_err(
            lineno,
            format!("unsupported format {:?}, only coordinate is read", tokens[2]),
        ));
    }
    let field = match tokens[3].as_str() {
        "real" => Field::Real,
        "integer" => Field::Integer,
        "pattern" => Field::Pattern,
        "complex" => Field::Complex,
        other => return Err(parse_err(lineno, format!("unsupported field {other:?}"))),
    };
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        "hermitian" => Symmetry::Hermitian,
        other => return Err(parse_err(lineno, format!("unsupported symmetry {other:?}"))),
    };
    Ok((field, symmetry))
}

fn parse_usize(token: &str, lineno: usize, what: &str) -> Result<usize> {
    token
        .parse::<usize>()
        .map_err(|_| parse_err(lineno, format!("cannot parse {what} from {token:?}")))
}

/// Reads a Matrix Market coordinate file and returns the pattern of `A + Aᵀ`.
///
/// Values are parsed for validation and then discarded; explicitly stored
/// zeros count as structural nonzeros. Duplicate entries are merged.
pub fn read_matrix_market<R: BufRead>(reader: R) -> Result<SparsityPattern> {
    let mut lines = reader.lines().enumerate();

    let (field, _symmetry) = match lines.next() {
        Some((idx, line)) => parse_header(&line?, idx + 1)?,
        None => return Err(parse_err(1, "empty input")),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut pairs = Vec::new();
    let mut last_line = 1;
    for (idx, line) in lines {
        let lineno = idx + 1;
        last_line = lineno;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        match size {
            None => {
                if tokens.len() != 3 {
                    return Err(parse_err(lineno, "size line must be `rows cols entries`"));
                }
                let rows = parse_usize(tokens[0], lineno, "row count")?;
                let cols = parse_usize(tokens[1], lineno, "column count")?;
                let entries = parse_usize(tokens[2], lineno, "entry count")?;
                if rows != cols {
                    return Err(Error::NotSquare { rows, cols });
                }
                size = Some((rows, cols, entries));
                pairs.reserve(entries);
            }
            Some((n, _, entries)) => {
                if pairs.len() == entries {
                    return Err(parse_err(
                        lineno,
                        format!("more entries than the declared {entries}"),
                    ));
                }
                let expected = 2 + field.value_tokens();
                if tokens.len() != expected {
                    return Err(parse_err(
                        lineno,
                        format!("expected {expected} fields, found {}", tokens.len()),
                    ));
                }
                let row = parse_usize(tokens[0], lineno, "row index")?;
                let col = parse_usize(tokens[1], lineno, "column index")?;
                for value in &tokens[2..] {
                    value
                        .parse::<f64>()
                        .map_err(|_| parse_err(lineno, format!("cannot parse value {value:?}")))?;
                }
                if row == 0 || col == 0 || row > n || col > n {
                    return Err(Error::IndexOutOfRange { row, col, n });
                }
                pairs.push((row - 1, col - 1));
            }
        }
    }

    let (n, _, entries) = size.ok_or_else(|| parse_err(last_line, "missing size line"))?;
    if pairs.len() != entries {
        return Err(parse_err(
            last_line,
            format!("declared {entries} entries, found {}", pairs.len()),
        ));
    }
    // Every symmetry variant reduces to the same undirected pattern.
    SparsityPattern::from_edges(n, pairs)
}

pub fn parse_matrix_market(text: &str) -> Result<SparsityPattern> {
    read_matrix_market(text.as_bytes())
}

pub fn load_matrix_market(path: impl AsRef<Path>) -> Result<SparsityPattern> {
    read_matrix_market(BufReader::new(File::open(path)?))
}

/// Writes `pattern` as a `pattern symmetric` coordinate file (lower triangle).
pub fn write_matrix_market<W: Write>(pattern: &SparsityPattern, mut writer: W) -> Result<()> {
    let diagonals = pattern.has_diagonal.iter().filter(|&&d| d).count();
    writeln!(writer, "%%MatrixMarket matrix coordinate pattern symmetric")?;
    writeln!(
        writer,
        "{} {} {}",
        pattern.n,
        pattern.n,
        pattern.edges.len() + diagonals
    )?;
    for (i, _) in pattern.has_diagonal.iter().enumerate().filter(|(_, &d)| d) {
        writeln!(writer, "{} {}", i + 1, i + 1)?;
    }
    for &(i, j) in &pattern.edges {
        writeln!(writer, "{} {}", j + 1, i + 1)?;
    }
    Ok(())
}

pub fn save_matrix_market(pattern: &SparsityPattern, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_matrix_market(pattern, &mut w)?;
    w.flush()?;
    Ok(())
}
