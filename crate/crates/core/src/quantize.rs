//! One-bit measurement streams: thresholded bits for the first scheme, sign
//! and pairwise-predominance bits for the second, plus the packed on-disk
//! record format.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use std::io::{BufRead, Write};

/// Undirected connected graph over the sensors; edges say which pairwise
/// magnitude comparisons are recorded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensorGraph {
    d: usize,
    edges: Vec<(usize, usize)>,
}

impl SensorGraph {
    /// Edges are normalized to `i < j`, sorted lexicographically and deduplicated.
    pub fn new(d: usize, edges: &[(usize, usize)]) -> Result<Self> {
        assert!(d >= 1);
        let mut norm = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a == b {
                return Err(Error::Domain(format!("self-loop on sensor {a}")));
            }
            if a >= d || b >= d {
                return Err(Error::Domain(format!("edge ({a}, {b}) out of range for d = {d}")));
            }
            norm.push((a.min(b), a.max(b)));
        }
        norm.sort_unstable();
        norm.dedup();
        let graph = SensorGraph { d, edges: norm };
        if !graph.is_connected() {
            return Err(Error::DisconnectedGraph);
        }
        Ok(graph)
    }

    pub fn complete(d: usize) -> Self {
        let mut edges = Vec::new();
        for i in 0..d {
            for j in (i + 1)..d {
                edges.push((i, j));
            }
        }
        SensorGraph { d, edges }
    }

    /// Star centered on sensor 0: the minimal layout, `d - 1` comparisons.
    pub fn star(d: usize) -> Self {
        SensorGraph { d, edges: (1..d).map(|j| (0, j)).collect() }
    }

    fn is_connected(&self) -> bool {
        if self.d <= 1 {
            return true;
        }
        let mut seen = vec![false; self.d];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &(a, b) in &self.edges {
                let other = if a == v { b } else if b == v { a } else { continue };
                if !seen[other] {
                    seen[other] = true;
                    stack.push(other);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        let key = (i.min(j), i.max(j));
        self.edges.binary_search(&key).ok()
    }
}

/// Binary measurements over `T` time steps: per-sensor bits `x`, pairwise
/// predominance bits `q` laid out in sorted edge order, and the thresholds
/// when the record came from non-symmetric quantization.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryRecord {
    t_len: usize,
    x_bits: Vec<Vec<bool>>,
    q_bits: Vec<Vec<bool>>,
    edges: Vec<(usize, usize)>,
    thresholds: Option<Vec<f64>>,
}

impl BinaryRecord {
    pub fn d(&self) -> usize {
        self.x_bits.len()
    }

    pub fn t_len(&self) -> usize {
        self.t_len
    }

    pub fn x(&self, i: usize) -> &[bool] {
        &self.x_bits[i]
    }

    pub fn q(&self, edge: usize) -> &[bool] {
        &self.q_bits[edge]
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        let key = (i.min(j), i.max(j));
        self.edges.binary_search(&key).ok()
    }

    pub fn thresholds(&self) -> Option<&[f64]> {
        self.thresholds.as_deref()
    }

    pub fn x_mean(&self, i: usize) -> f64 {
        mean_bits(&self.x_bits[i])
    }

    pub fn q_mean(&self, edge: usize) -> f64 {
        mean_bits(&self.q_bits[edge])
    }

    /// Writes the record in the `BITVAR1` format: a text header
    /// `BITVAR1 d T |E| has_thresholds`, one `i j` line per edge (0-based),
    /// the threshold line when present, then the packed bit rows (8 bits per
    /// byte, least significant bit first, rows zero-padded to whole bytes).
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let has_thr = self.thresholds.is_some();
        writeln!(w, "BITVAR1 {} {} {} {}", self.d(), self.t_len, self.edges.len(), has_thr as u8)?;
        for &(i, j) in &self.edges {
            writeln!(w, "{i} {j}")?;
        }
        if let Some(thr) = &self.thresholds {
            let line: Vec<String> = thr.iter().map(|c| c.to_string()).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        for row in self.x_bits.iter().chain(self.q_bits.iter()) {
            w.write_all(&pack_bits(row))?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: &mut R) -> Result<BinaryRecord> {
        let mut header = String::new();
        r.read_line(&mut header)?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 || fields[0] != "BITVAR1" {
            return Err(Error::Parse("bad BITVAR1 header".into()));
        }
        let d: usize = parse(fields[1])?;
        let t_len: usize = parse(fields[2])?;
        let n_edges: usize = parse(fields[3])?;
        let has_thr: u8 = parse(fields[4])?;
        let mut edges = Vec::with_capacity(n_edges);
        for _ in 0..n_edges {
            let mut line = String::new();
            r.read_line(&mut line)?;
            let mut it = line.split_whitespace();
            let i: usize = parse(it.next().ok_or_else(|| Error::Parse("short edge line".into()))?)?;
            let j: usize = parse(it.next().ok_or_else(|| Error::Parse("short edge line".into()))?)?;
            edges.push((i, j));
        }
        let thresholds = if has_thr == 1 {
            let mut line = String::new();
            r.read_line(&mut line)?;
            let values: std::result::Result<Vec<f64>, _> =
                line.split_whitespace().map(|s| s.parse::<f64>()).collect();
            let values = values.map_err(|e| Error::Parse(format!("thresholds: {e}")))?;
            if values.len() != d {
                return Err(Error::Parse(format!("expected {d} thresholds, got {}", values.len())));
            }
            Some(values)
        } else {
            None
        };
        let bytes_per_row = t_len.div_ceil(8);
        let read_row = |r: &mut R| -> Result<Vec<bool>> {
            let mut buf = vec![0u8; bytes_per_row];
            r.read_exact(&mut buf)?;
            Ok(unpack_bits(&buf, t_len))
        };
        let mut x_bits = Vec::with_capacity(d);
        for _ in 0..d {
            x_bits.push(read_row(r)?);
        }
        let mut q_bits = Vec::with_capacity(n_edges);
        for _ in 0..n_edges {
            q_bits.push(read_row(r)?);
        }
        Ok(BinaryRecord { t_len, x_bits, q_bits, edges, thresholds })
    }
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e| Error::Parse(format!("{e}")))
}

fn mean_bits(bits: &[bool]) -> f64 {
    bits.iter().filter(|&&b| b).count() as f64 / bits.len() as f64
}

fn pack_bits(bits: &[bool]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (t, &b) in bits.iter().enumerate() {
        if b {
            out[t >> 3] |= 1 << (t & 7);
        }
    }
    out
}

fn unpack_bits(bytes: &[u8], t_len: usize) -> Vec<bool> {
    (0..t_len).map(|t| bytes[t >> 3] & (1 << (t & 7)) != 0).collect()
}

/// Thresholded bits `x_i(t) = [z_i(t) >= c_i]` for the first scheme.
/// Every threshold must be non-zero.
pub fn threshold_quantize(traj: &Matrix, thresholds: &[f64]) -> Result<BinaryRecord> {
    let d = traj.rows();
    assert_eq!(thresholds.len(), d, "one threshold per series");
    if let Some(i) = thresholds.iter().position(|&c| c == 0.0) {
        return Err(Error::ZeroThreshold(i));
    }
    let t_len = traj.cols();
    let x_bits = (0..d)
        .map(|i| traj.row(i).iter().map(|&z| z >= thresholds[i]).collect())
        .collect();
    Ok(BinaryRecord {
        t_len,
        x_bits,
        q_bits: Vec::new(),
        edges: Vec::new(),
        thresholds: Some(thresholds.to_vec()),
    })
}

/// Sign bits `x_i(t) = [z_i(t) >= 0]` for every sensor plus predominance bits
/// `q_{i,j}(t) = [|z_i(t)| >= |z_j(t)|]` for every graph edge `(i, j)`, `i < j`.
pub fn sign_and_predominance(traj: &Matrix, graph: &SensorGraph) -> BinaryRecord {
    let d = traj.rows();
    assert_eq!(d, graph.d(), "graph size must match the trajectory");
    let t_len = traj.cols();
    let x_bits = (0..d)
        .map(|i| traj.row(i).iter().map(|&z| z >= 0.0).collect())
        .collect();
    let q_bits = graph
        .edges()
        .iter()
        .map(|&(i, j)| {
            (0..t_len)
                .map(|t| traj[(i, t)].abs() >= traj[(j, t)].abs())
                .collect()
        })
        .collect();
    BinaryRecord { t_len, x_bits, q_bits, edges: graph.edges().to_vec(), thresholds: None }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn constant_traj(values: &[f64], t: usize) -> Matrix {
        Matrix::from_fn(values.len(), t, |i, _| values[i])
    }

    #[test]
    fn graph_validation() {
        assert!(SensorGraph::new(3, &[(0, 1), (1, 2)]).is_ok());
        assert!(matches!(SensorGraph::new(3, &[(0, 1)]), Err(Error::DisconnectedGraph)));
        assert!(SensorGraph::new(3, &[(0, 0)]).is_err());
        assert!(SensorGraph::new(3, &[(0, 5)]).is_err());
        let g = SensorGraph::new(3, &[(2, 1), (1, 0), (0, 1)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(g.edge_index(2, 1), Some(1));
        assert_eq!(g.edge_index(0, 2), None);
    }

    #[test]
    fn star_bit_accounting() {
        // star on d sensors records d + (d-1) = 2d - 1 bits per step
        for d in 2..6 {
            let g = SensorGraph::star(d);
            assert_eq!(g.edges().len(), d - 1);
            let traj = constant_traj(&vec![1.0; d], 3);
            let rec = sign_and_predominance(&traj, &g);
            assert_eq!(rec.d() + rec.edges().len(), 2 * d - 1);
        }
        let complete = SensorGraph::complete(4);
        assert_eq!(complete.edges().len(), 6);
    }

    #[test]
    fn threshold_bits_and_boundary() {
        let traj = constant_traj(&[10.0, 10.0], 5);
        let rec = threshold_quantize(&traj, &[1.0, 1.0]).unwrap();
        assert!(rec.x(0).iter().all(|&b| b));
        // exact equality counts as 1
        let traj = constant_traj(&[1.0], 4);
        let rec = threshold_quantize(&traj, &[1.0]).unwrap();
        assert!(rec.x(0).iter().all(|&b| b));
        assert!(matches!(threshold_quantize(&traj, &[0.0]), Err(Error::ZeroThreshold(0))));
    }

    #[test]
    fn threshold_frequency_matches_gaussian_tail() {
        let mut rng = Rng::new(21);
        let t = 100_000;
        let traj = Matrix::from_fn(1, t, |_, _| rng.standard_normal());
        let rec = threshold_quantize(&traj, &[1.0]).unwrap();
        let p = crate::gaussians::std_normal_cdf(-1.0);
        let se = (p * (1.0 - p) / t as f64).sqrt();
        assert!((rec.x_mean(0) - p).abs() < 3.0 * se);
    }

    #[test]
    fn predominance_bits_for_pairs() {
        let traj = Matrix::from_rows(&[vec![2.0, -1.0, 0.5], vec![1.0, 3.0, -0.5]]);
        let rec = sign_and_predominance(&traj, &SensorGraph::complete(2));
        assert_eq!(rec.q(0), &[true, false, true]);
        assert_eq!(rec.x(0), &[true, false, true]);
        assert_eq!(rec.x(1), &[true, true, false]);
    }

    #[test]
    fn symmetric_pair_predominance_is_balanced() {
        let mut rng = Rng::new(5);
        let t = 100_000;
        let traj = Matrix::from_fn(2, t, |_, _| rng.standard_normal());
        let rec = sign_and_predominance(&traj, &SensorGraph::complete(2));
        let se = (0.25 / t as f64).sqrt();
        assert!((rec.q_mean(0) - 0.5).abs() < 3.0 * se);
    }

    #[test]
    fn record_round_trips_bit_exact() {
        let mut rng = Rng::new(17);
        let traj = Matrix::from_fn(3, 37, |_, _| rng.standard_normal());
        let graph = SensorGraph::complete(3);
        let rec = sign_and_predominance(&traj, &graph);
        let mut buf = Vec::new();
        rec.write_to(&mut buf).unwrap();
        let back = BinaryRecord::read_from(&mut std::io::Cursor::new(&buf)).unwrap();
        assert_eq!(rec, back);

        let rec = threshold_quantize(&traj, &[0.5, -0.25, 1.0 / 3.0]).unwrap();
        let mut buf = Vec::new();
        rec.write_to(&mut buf).unwrap();
        let back = BinaryRecord::read_from(&mut std::io::Cursor::new(&buf)).unwrap();
        assert_eq!(rec, back);
    }

    #[test]
    fn quantization_is_deterministic() {
        let mut rng = Rng::new(2);
        let traj = Matrix::from_fn(2, 100, |_, _| rng.standard_normal());
        let a = threshold_quantize(&traj, &[0.3, 0.3]).unwrap();
        let b = threshold_quantize(&traj, &[0.3, 0.3]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn scaling_component_and_threshold_preserves_bits() {
        let mut rng = Rng::new(3);
        let traj = Matrix::from_fn(2, 500, |_, _| rng.standard_normal());
        let scaled = Matrix::from_fn(2, 500, |i, t| if i == 0 { 7.5 * traj[(i, t)] } else { traj[(i, t)] });
        let a = threshold_quantize(&traj, &[0.4, 0.6]).unwrap();
        let b = threshold_quantize(&scaled, &[0.4 * 7.5, 0.6]).unwrap();
        assert_eq!(a.x(0), b.x(0));
        assert_eq!(a.x(1), b.x(1));
    }
}
