//! Time-stamped undirected binary networks and their dyadic covariates.

use std::collections::HashMap;
use std::path::Path;

use log::info;
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Snapshots `Y_{t_1}, …, Y_{t_M}` stored as sorted neighbor lists.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicNetwork {
    n: usize,
    times: Vec<f64>,
    neighbors: Vec<Vec<Vec<u32>>>,
    self_loops: bool,
}

/// Per-node neighborhood summary at one snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighborhood<'a> {
    pub neighbors: &'a [u32],
    pub complement: usize,
}

/// Options controlling edge-file ingestion.
#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Node count; inferred as `max index + 1` when absent.
    pub n: Option<usize>,
    /// Snapshot count; inferred from the times file or the largest `m`.
    pub m: Option<usize>,
    pub self_loops: bool,
}

/// Equally spaced times `m / (M - 1)` on `[0, 1]` (a single snapshot sits at 0).
pub fn equally_spaced_times(m: usize) -> Vec<f64> {
    if m <= 1 {
        return vec![0.0; m];
    }
    (0..m).map(|k| k as f64 / (m - 1) as f64).collect()
}

fn validate_times(times: &[f64]) -> Result<Vec<f64>> {
    if times.is_empty() {
        return Err(Error::invalid("at least one snapshot time is required"));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid("snapshot times must be finite"));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(
            "snapshot times must be strictly increasing without duplicates",
        ));
    }
    let (lo, hi) = (times[0], times[times.len() - 1]);
    if lo >= 0.0 && hi <= 1.0 {
        return Ok(times.to_vec());
    }
    if times.len() == 1 {
        return Ok(vec![0.0]);
    }
    info!("rescaling snapshot times from [{lo}, {hi}] to [0, 1]");
    Ok(times.iter().map(|t| (t - lo) / (hi - lo)).collect())
}

impl DynamicNetwork {
    /// Build from `(m, i, j)` edge triples. Triples are symmetrised and
    /// duplicates collapse.
    pub fn from_edges(
        n: usize,
        times: &[f64],
        edges: &[(usize, usize, usize)],
        self_loops: bool,
    ) -> Result<Self> {
        let times = validate_times(times)?;
        if n == 0 {
            return Err(Error::invalid("network needs at least one node"));
        }
        if n > u32::MAX as usize {
            return Err(Error::invalid("node count exceeds u32 range"));
        }
        let m_count = times.len();
        let mut neighbors = vec![vec![Vec::new(); n]; m_count];
        for &(m, i, j) in edges {
            check_index("snapshot", m, m_count)?;
            check_index("node", i, n)?;
            check_index("node", j, n)?;
            if i == j && !self_loops {
                return Err(Error::invalid(format!(
                    "self-loop ({m}, {i}, {j}) present but self-loops are disabled"
                )));
            }
            neighbors[m][i].push(j as u32);
            if i != j {
                neighbors[m][j].push(i as u32);
            }
        }
        for snapshot in neighbors.iter_mut() {
            for list in snapshot.iter_mut() {
                list.sort_unstable();
                list.dedup();
            }
        }
        Ok(DynamicNetwork {
            n,
            times,
            neighbors,
            self_loops,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_times(&self) -> usize {
        self.times.len()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn self_loops(&self) -> bool {
        self.self_loops
    }

    /// Sorted `N_{i,t_m}`.
    pub fn neighbors(&self, m: usize, i: usize) -> &[u32] {
        &self.neighbors[m][i]
    }

    pub fn has_edge(&self, m: usize, i: usize, j: usize) -> bool {
        self.neighbors[m][i].binary_search(&(j as u32)).is_ok()
    }

    /// `|N^c_{i,t_m}|`, the number of candidate non-neighbors.
    pub fn complement_size(&self, m: usize, i: usize) -> usize {
        self.partners() - self.neighbors[m][i].len()
    }

    /// Number of possible partners of a node: `n - 1` or `n` with self-loops.
    pub fn partners(&self) -> usize {
        if self.self_loops {
            self.n
        } else {
            self.n - 1
        }
    }

    /// Whether `j` is an admissible partner of `i`.
    pub fn admissible(&self, i: usize, j: usize) -> bool {
        self.self_loops || i != j
    }

    pub fn neighborhoods(&self, m: usize) -> Result<Vec<Neighborhood<'_>>> {
        check_index("snapshot", m, self.num_times())?;
        Ok((0..self.n)
            .map(|i| Neighborhood {
                neighbors: self.neighbors(m, i),
                complement: self.complement_size(m, i),
            })
            .collect())
    }

    /// Number of undirected edges at snapshot `m` (a self-loop counts once).
    pub fn num_edges(&self, m: usize) -> usize {
        let mut twice = 0;
        let mut loops = 0;
        for (i, list) in self.neighbors[m].iter().enumerate() {
            twice += list.len();
            if self.self_loops && list.binary_search(&(i as u32)).is_ok() {
                loops += 1;
            }
        }
        (twice - loops) / 2 + loops
    }

    /// Fraction of possible dyads present at snapshot `m`.
    pub fn density(&self, m: usize) -> Result<f64> {
        check_index("snapshot", m, self.num_times())?;
        let n = self.n as f64;
        let possible = if self.self_loops {
            n * (n + 1.0) / 2.0
        } else {
            n * (n - 1.0) / 2.0
        };
        if possible == 0.0 {
            return Ok(0.0);
        }
        Ok(self.num_edges(m) as f64 / possible)
    }

    /// Dense 0/1 adjacency matrix of snapshot `m`.
    pub fn adjacency(&self, m: usize) -> DMatrix<f64> {
        let mut y = DMatrix::zeros(self.n, self.n);
        for (i, list) in self.neighbors[m].iter().enumerate() {
            for &j in list {
                y[(i, j as usize)] = 1.0;
            }
        }
        y
    }

    /// Edge triples with `i ≤ j`, ordered by `(m, i, j)`.
    pub fn edge_list(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for (m, snapshot) in self.neighbors.iter().enumerate() {
            for (i, list) in snapshot.iter().enumerate() {
                out.extend(
                    list.iter()
                        .map(|&j| j as usize)
                        .filter(|&j| j >= i)
                        .map(|j| (m, i, j)),
                );
            }
        }
        out
    }

    /// Read an `m,i,j` edge file and an optional `t` times file.
    pub fn load_csv(edges: &Path, times: Option<&Path>, opts: &LoadOptions) -> Result<Self> {
        let mut triples = Vec::new();
        let mut reader = open_csv(edges)?;
        let cols = header_columns(&mut reader, edges, &["m", "i", "j"])?;
        for rec in reader.records() {
            let rec = rec.map_err(|e| csv_error(edges, e))?;
            let line = line_of(&rec);
            let m = parse_field::<usize>(&rec, cols[0], edges, line, "m")?;
            let i = parse_field::<usize>(&rec, cols[1], edges, line, "i")?;
            let j = parse_field::<usize>(&rec, cols[2], edges, line, "j")?;
            if let Some(n) = opts.n {
                if i >= n || j >= n {
                    return Err(Error::Parse {
                        path: edges.to_path_buf(),
                        line,
                        message: format!("node index out of range for n = {n}"),
                    });
                }
            }
            triples.push((m, i, j));
        }
        let times = match times {
            Some(path) => load_times(path)?,
            None => {
                let m = opts
                    .m
                    .unwrap_or_else(|| triples.iter().map(|t| t.0 + 1).max().unwrap_or(1));
                equally_spaced_times(m)
            }
        };
        if let Some(m) = opts.m {
            if m != times.len() {
                return Err(Error::Dimension(format!(
                    "times file has {} entries but M = {m}",
                    times.len()
                )));
            }
        }
        let n = opts
            .n
            .unwrap_or_else(|| triples.iter().map(|t| t.1.max(t.2) + 1).max().unwrap_or(1));
        Self::from_edges(n, &times, &triples, opts.self_loops)
    }

    /// Write the edge list (`m,i,j`, `i ≤ j`) and the times file.
    pub fn save_csv(&self, edges: &Path, times: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(edges).map_err(|e| csv_error(edges, e))?;
        w.write_record(["m", "i", "j"]).map_err(|e| csv_error(edges, e))?;
        for (m, i, j) in self.edge_list() {
            w.write_record([m.to_string(), i.to_string(), j.to_string()])
                .map_err(|e| csv_error(edges, e))?;
        }
        w.flush().map_err(|e| Error::io(edges, e))?;
        let mut w = csv::Writer::from_path(times).map_err(|e| csv_error(times, e))?;
        w.write_record(["t"]).map_err(|e| csv_error(times, e))?;
        for t in &self.times {
            w.write_record([t.to_string()]).map_err(|e| csv_error(times, e))?;
        }
        w.flush().map_err(|e| Error::io(times, e))
    }
}

pub fn load_times(path: &Path) -> Result<Vec<f64>> {
    let mut reader = open_csv(path)?;
    let cols = header_columns(&mut reader, path, &["t"])?;
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = line_of(&rec);
        out.push(parse_field::<f64>(&rec, cols[0], path, line, "t")?);
    }
    validate_times(&out).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        message: e.to_string(),
    })
}

fn check_index(what: &'static str, index: usize, limit: usize) -> Result<()> {
    if index >= limit {
        return Err(Error::IndexOutOfRange { what, index, limit });
    }
    Ok(())
}

fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn header_columns(
    reader: &mut csv::Reader<std::fs::File>,
    path: &Path,
    names: &[&str],
) -> Result<Vec<usize>> {
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    names
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h == *name)
                .ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    line: 1,
                    message: format!("missing required column `{name}`"),
                })
        })
        .collect()
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

fn parse_field<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    col: usize,
    path: &Path,
    line: u64,
    name: &str,
) -> Result<T> {
    let raw = rec.get(col).unwrap_or("");
    raw.parse::<T>().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("cannot parse `{raw}` in column `{name}`"),
    })
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    if let csv::ErrorKind::Io(_) = e.kind() {
        return match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        };
    }
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    }
}

/// Dyadic covariates `x_{ij,t_m}`, symmetric in `(i, j)`.
///
/// Values live in packed upper-triangular layers, either one static layer or
/// one per snapshot. An optional leading intercept is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateSet {
    n: usize,
    stored: usize,
    intercept: bool,
    layers: Vec<Vec<f64>>,
    per_time: bool,
}

fn packed_index(n: usize, i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    a * n - a * (a + 1) / 2 + b
}

impl CovariateSet {
    /// No stored covariates; optionally an intercept.
    pub fn empty(n: usize, intercept: bool) -> Self {
        CovariateSet {
            n,
            stored: 0,
            intercept,
            layers: vec![Vec::new()],
            per_time: false,
        }
    }

    /// Static covariates copied across all snapshots; `values[k]` is the
    /// symmetric `n × n` matrix of covariate `k`.
    pub fn from_static(n: usize, values: &[DMatrix<f64>], intercept: bool) -> Result<Self> {
        let stored = values.len();
        let mut layer = vec![0.0; n * (n + 1) / 2 * stored];
        for (k, mat) in values.iter().enumerate() {
            if mat.nrows() != n || mat.ncols() != n {
                return Err(Error::Dimension(format!(
                    "covariate {k} is {}x{}, expected {n}x{n}",
                    mat.nrows(),
                    mat.ncols()
                )));
            }
            for i in 0..n {
                for j in i..n {
                    if (mat[(i, j)] - mat[(j, i)]).abs() > 0.0 {
                        return Err(Error::invalid(format!(
                            "covariate {k} is not symmetric at ({i}, {j})"
                        )));
                    }
                    layer[packed_index(n, i, j) * stored + k] = mat[(i, j)];
                }
            }
        }
        Ok(CovariateSet {
            n,
            stored,
            intercept,
            layers: vec![layer],
            per_time: false,
        })
    }

    /// Covariates redrawn per snapshot; `values[m][k]` is the symmetric
    /// `n × n` matrix of covariate `k` at snapshot `m`.
    pub fn from_time_varying(n: usize, values: &[Vec<DMatrix<f64>>], intercept: bool) -> Result<Self> {
        let Some(first) = values.first() else {
            return Err(Error::invalid("time-varying covariates need at least one snapshot"));
        };
        let stored = first.len();
        let mut layers = Vec::with_capacity(values.len());
        for snapshot in values {
            if snapshot.len() != stored {
                return Err(Error::Dimension("covariate count varies across snapshots".into()));
            }
            let single = Self::from_static(n, snapshot, intercept)?;
            layers.push(single.layers.into_iter().next().expect("one layer"));
        }
        Ok(CovariateSet {
            n,
            stored,
            intercept,
            layers,
            per_time: true,
        })
    }

    /// Total covariate dimension `p`, including the intercept.
    pub fn dim(&self) -> usize {
        self.stored + usize::from(self.intercept)
    }

    pub fn stored(&self) -> usize {
        self.stored
    }

    pub fn has_intercept(&self) -> bool {
        self.intercept
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_static(&self) -> bool {
        !self.per_time
    }

    fn layer(&self, m: usize) -> &[f64] {
        if self.per_time {
            &self.layers[m]
        } else {
            &self.layers[0]
        }
    }

    /// Write `x_{ij,t_m}` into `out` (length `dim()`).
    #[inline]
    pub fn fill(&self, m: usize, i: usize, j: usize, out: &mut [f64]) {
        let mut k0 = 0;
        if self.intercept {
            out[0] = 1.0;
            k0 = 1;
        }
        if self.stored > 0 {
            let base = packed_index(self.n, i, j) * self.stored;
            out[k0..k0 + self.stored].copy_from_slice(&self.layer(m)[base..base + self.stored]);
        }
    }

    /// Single entry `x_{ijk,t_m}`, `k` counted over `dim()`.
    pub fn value(&self, m: usize, i: usize, j: usize, k: usize) -> f64 {
        if self.intercept {
            if k == 0 {
                return 1.0;
            }
            return self.layer(m)[packed_index(self.n, i, j) * self.stored + k - 1];
        }
        self.layer(m)[packed_index(self.n, i, j) * self.stored + k]
    }

    /// Read a `m,i,j,k,value` file. An empty `m` marks a static row that
    /// applies to every snapshot; static and per-snapshot rows cannot be
    /// mixed. Unless `sparse`, every dyad must be specified for every `k`.
    pub fn load_csv(
        path: &Path,
        n: usize,
        m_count: usize,
        self_loops: bool,
        sparse: bool,
        intercept: bool,
    ) -> Result<Self> {
        let mut reader = open_csv(path)?;
        let cols = header_columns(&mut reader, path, &["m", "i", "j", "k", "value"])?;
        let mut rows: Vec<(Option<usize>, usize, usize, usize, f64, u64)> = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            let line = line_of(&rec);
            let m_raw = rec.get(cols[0]).unwrap_or("");
            let m = if m_raw.is_empty() {
                None
            } else {
                Some(parse_field::<usize>(&rec, cols[0], path, line, "m")?)
            };
            let i = parse_field::<usize>(&rec, cols[1], path, line, "i")?;
            let j = parse_field::<usize>(&rec, cols[2], path, line, "j")?;
            let k = parse_field::<usize>(&rec, cols[3], path, line, "k")?;
            let v = parse_field::<f64>(&rec, cols[4], path, line, "value")?;
            let bad = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line,
                message,
            };
            if i >= n || j >= n {
                return Err(bad(format!("node index out of range for n = {n}")));
            }
            if let Some(m) = m {
                if m >= m_count {
                    return Err(bad(format!("snapshot index out of range for M = {m_count}")));
                }
            }
            if !v.is_finite() {
                return Err(bad("covariate value must be finite".into()));
            }
            rows.push((m, i, j, k, v, line));
        }
        let stored = rows.iter().map(|r| r.3 + 1).max().unwrap_or(0);
        let per_time = rows.iter().any(|r| r.0.is_some());
        if per_time && rows.iter().any(|r| r.0.is_none()) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                message: "static rows (empty m) mixed with per-snapshot rows".into(),
            });
        }
        let layer_count = if per_time { m_count } else { 1 };
        let layer_len = n * (n + 1) / 2 * stored;
        let mut layers = vec![vec![0.0; layer_len]; layer_count];
        let mut seen: HashMap<(usize, usize, usize, usize), f64> = HashMap::new();
        for &(m, i, j, k, v, line) in &rows {
            let layer = m.unwrap_or(0);
            let (a, b) = (i.min(j), i.max(j));
            if let Some(prev) = seen.insert((layer, a, b, k), v) {
                if prev != v {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line,
                        message: format!(
                            "conflicting values for covariate {k} of dyad ({i}, {j})"
                        ),
                    });
                }
            }
            layers[layer][packed_index(n, a, b) * stored + k] = v;
        }
        if !sparse {
            let dyads = if self_loops {
                n * (n + 1) / 2
            } else {
                n * (n - 1) / 2
            };
            let required = dyads * stored * layer_count;
            let given = seen
                .keys()
                .filter(|(_, a, b, _)| self_loops || a != b)
                .count();
            if given < required {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: 0,
                    message: format!(
                        "covariates incomplete: {given} of {required} entries given (declare sparse to default missing entries to 0)"
                    ),
                });
            }
        }
        Ok(CovariateSet {
            n,
            stored,
            intercept,
            layers,
            per_time,
        })
    }

    /// Write stored covariates as `m,i,j,k,value` rows with `i ≤ j`.
    /// Static sets leave `m` empty. Zero entries are kept so that the file is
    /// complete.
    pub fn save_csv(&self, path: &Path, self_loops: bool) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        w.write_record(["m", "i", "j", "k", "value"])
            .map_err(|e| csv_error(path, e))?;
        for (layer_idx, layer) in self.layers.iter().enumerate() {
            let m = if self.per_time {
                layer_idx.to_string()
            } else {
                String::new()
            };
            for i in 0..self.n {
                let j0 = if self_loops { i } else { i + 1 };
                for j in j0..self.n {
                    let base = packed_index(self.n, i, j) * self.stored;
                    for k in 0..self.stored {
                        w.write_record([
                            m.as_str(),
                            &i.to_string(),
                            &j.to_string(),
                            &k.to_string(),
                            &layer[base + k].to_string(),
                        ])
                        .map_err(|e| csv_error(path, e))?;
                    }
                }
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}
