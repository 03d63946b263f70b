//! Synthetic pairwise-ratio measurement graphs.
//!
//! An instance has `n` unknown rotations `R_1..R_n` in SO(d) and one
//! measurement `R_ij ≈ R_iᵀ R_j` per edge. Each unordered pair is measured
//! with probability `p1` (Erdős–Rényi topology; `p1 = 1` is the complete
//! graph) and each measured edge is *good* with probability `p`. Good edges
//! carry the exact ratio, or a von Mises–Fisher perturbation of it when a
//! concentration `kappa` is given; bad edges carry independent Haar draws.

use std::io::{BufRead, Write};

use log::warn;
use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::stream;
use crate::so_group::{haar_unchecked, sample_vmf, Rotation};

/// One measured ratio, stored once per unordered pair with `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub ratio: Rotation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementGraph {
    pub n: usize,
    pub d: usize,
    pub edges: Vec<Edge>,
    pub truth: Option<Vec<Rotation>>,
    /// Per-edge good/bad label, aligned with `edges`.
    pub good_mask: Option<Vec<bool>>,
    pub p: f64,
    pub p1: f64,
    pub kappa: Option<f64>,
    pub seed: Option<u64>,
}

/// Parameters of the random measurement model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphModel {
    pub n: usize,
    pub d: usize,
    /// Edge probability.
    pub p1: f64,
    /// Good-edge probability.
    pub p: f64,
    /// Concentration of the perturbation on good edges, if any.
    pub kappa: Option<f64>,
}

impl GraphModel {
    pub fn complete(n: usize, d: usize, p: f64) -> Self {
        Self {
            n,
            d,
            p1: 1.0,
            p,
            kappa: None,
        }
    }

    pub fn with_p1(mut self, p1: f64) -> Self {
        self.p1 = p1;
        self
    }

    pub fn with_kappa(mut self, kappa: Option<f64>) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 vertices, got {}",
                self.n
            )));
        }
        if self.d < 2 {
            return Err(Error::InvalidDimension(self.d));
        }
        if !(self.p1 > 0.0 && self.p1 <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "edge probability p1 must lie in (0, 1], got {}",
                self.p1
            )));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::InvalidParameter(format!(
                "good-edge probability p must lie in [0, 1], got {}",
                self.p
            )));
        }
        if let Some(k) = self.kappa {
            if k.is_nan() || k <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "concentration must be positive, got {k}"
                )));
            }
            if self.d > 3 {
                return Err(Error::Unsupported(format!(
                    "perturbed good edges on SO({})",
                    self.d
                )));
            }
        }
        Ok(())
    }

    /// Edge probability below which the random graph is unlikely to be
    /// connected, `2 ln(n)/n`.
    pub fn connectivity_threshold(&self) -> f64 {
        2.0 * (self.n as f64).ln() / self.n as f64
    }

    /// Draws an instance from the stream seeded by `seed`, recording the seed.
    pub fn generate(&self, seed: u64) -> Result<MeasurementGraph> {
        let mut g = self.generate_with(&mut stream(seed))?;
        g.seed = Some(seed);
        Ok(g)
    }

    /// Draws an instance from `rng`.
    ///
    /// Draw order: the `n` truth rotations, then for each pair `(i, j)` in
    /// lexicographic order an inclusion draw, a good/bad draw, and the block.
    pub fn generate_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<MeasurementGraph> {
        self.validate()?;
        if self.p1 < self.connectivity_threshold() {
            warn!(
                "edge probability {} is below the connectivity threshold 2ln(n)/n = {:.4}",
                self.p1,
                self.connectivity_threshold()
            );
        }
        let (n, d) = (self.n, self.d);
        let truth: Vec<Rotation> = (0..n).map(|_| haar_unchecked(d, rng)).collect();
        let mut edges = Vec::new();
        let mut good_mask = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let include = rng.random::<f64>() < self.p1;
                if !include {
                    continue;
                }
                let good = rng.random::<f64>() < self.p;
                let ratio = if good {
                    let exact = truth[i].transpose().compose(&truth[j]);
                    match self.kappa {
                        None => exact,
                        Some(k) => sample_vmf(&exact, k, rng)?,
                    }
                } else {
                    haar_unchecked(d, rng)
                };
                edges.push(Edge { i, j, ratio });
                good_mask.push(good);
            }
        }
        Ok(MeasurementGraph {
            n,
            d,
            edges,
            truth: Some(truth),
            good_mask: Some(good_mask),
            p: self.p,
            p1: self.p1,
            kappa: self.kappa,
            seed: None,
        })
    }
}

/// Convenience wrapper over [`GraphModel::generate_with`].
pub fn generate<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    p1: f64,
    p: f64,
    kappa: Option<f64>,
    rng: &mut R,
) -> Result<MeasurementGraph> {
    GraphModel { n, d, p1, p, kappa }.generate_with(rng)
}

impl MeasurementGraph {
    /// Builds a graph from explicit edges, checking the structural invariants.
    pub fn from_edges(n: usize, d: usize, edges: Vec<Edge>) -> Result<Self> {
        let g = Self {
            n,
            d,
            edges,
            truth: None,
            good_mask: None,
            p: f64::NAN,
            p1: f64::NAN,
            kappa: None,
            seed: None,
        };
        g.check()?;
        Ok(g)
    }

    pub fn with_truth(mut self, truth: Vec<Rotation>) -> Result<Self> {
        if truth.len() != self.n || truth.iter().any(|r| r.dim() != self.d) {
            return Err(Error::ShapeMismatch(format!(
                "expected {} rotations of size {}",
                self.n, self.d
            )));
        }
        self.truth = Some(truth);
        Ok(self)
    }

    /// Verifies `i < j < n`, block sizes, and that no pair appears twice.
    pub fn check(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::with_capacity(self.edges.len());
        for e in &self.edges {
            if e.i >= e.j || e.j >= self.n {
                return Err(Error::InvalidParameter(format!(
                    "edge ({}, {}) must satisfy i < j < n = {}",
                    e.i, e.j, self.n
                )));
            }
            if e.ratio.dim() != self.d {
                return Err(Error::ShapeMismatch(format!(
                    "edge ({}, {}) has a {}x{} block, expected {}",
                    e.i,
                    e.j,
                    e.ratio.dim(),
                    e.ratio.dim(),
                    self.d
                )));
            }
            if !seen.insert((e.i, e.j)) {
                return Err(Error::InvalidParameter(format!(
                    "edge ({}, {}) appears twice",
                    e.i, e.j
                )));
            }
        }
        if let Some(mask) = &self.good_mask {
            if mask.len() != self.edges.len() {
                return Err(Error::ShapeMismatch("good mask length".into()));
            }
        }
        Ok(())
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for e in &self.edges {
            deg[e.i] += 1;
            deg[e.j] += 1;
        }
        deg
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for e in &self.edges {
            adj[e.i].push(e.j);
            adj[e.j].push(e.i);
        }
        adj
    }

    /// Number of connected components.
    pub fn component_count(&self) -> usize {
        let adj = self.neighbors();
        let mut seen = vec![false; self.n];
        let mut count = 0;
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            let mut stack = vec![start];
            while let Some(v) = stack.pop() {
                for &w in &adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        count
    }

    pub fn is_connected(&self) -> bool {
        self.component_count() == 1
    }

    /// The measured ratio for `(i, j)` in either orientation (`R_ji = R_ijᵀ`).
    pub fn ratio(&self, i: usize, j: usize) -> Option<Rotation> {
        let (a, b, flip) = if i < j { (i, j, false) } else { (j, i, true) };
        self.edges.iter().find(|e| e.i == a && e.j == b).map(|e| {
            if flip {
                e.ratio.transpose()
            } else {
                e.ratio.clone()
            }
        })
    }

    /// The measurement blocks as a symmetric `nd × nd` matrix with zero
    /// diagonal blocks.
    pub fn block_matrix(&self) -> DMatrix<f64> {
        let d = self.d;
        let mut m = DMatrix::zeros(self.n * d, self.n * d);
        for e in &self.edges {
            m.view_mut((e.i * d, e.j * d), (d, d)).copy_from(e.ratio.matrix());
            m.view_mut((e.j * d, e.i * d), (d, d))
                .copy_from(&e.ratio.matrix().transpose());
        }
        m
    }

    pub fn good_fraction(&self) -> Option<f64> {
        self.good_mask
            .as_ref()
            .map(|mask| mask.iter().filter(|&&g| g).count() as f64 / mask.len().max(1) as f64)
    }

    /// Conjugates every block into the frame where all truth rotations are
    /// the identity: `R_ij ↦ R_i R_ij R_jᵀ`. Good exact edges become `I`.
    pub fn canonicalize_to_identity(&self) -> Result<MeasurementGraph> {
        let truth = self.truth.as_ref().ok_or(Error::MissingTruth)?;
        let edges = self
            .edges
            .iter()
            .map(|e| Edge {
                i: e.i,
                j: e.j,
                ratio: conjugate(&truth[e.i], &e.ratio, &truth[e.j].transpose()),
            })
            .collect();
        Ok(MeasurementGraph {
            edges,
            truth: Some(vec![Rotation::identity(self.d); self.n]),
            ..self.clone()
        })
    }

    /// Inverse of [`canonicalize_to_identity`](Self::canonicalize_to_identity):
    /// `B_ij ↦ R_iᵀ B_ij R_j` with `truth` restored.
    pub fn decanonicalize(&self, truth: &[Rotation]) -> Result<MeasurementGraph> {
        if truth.len() != self.n {
            return Err(Error::ShapeMismatch(format!(
                "expected {} rotations, got {}",
                self.n,
                truth.len()
            )));
        }
        let edges = self
            .edges
            .iter()
            .map(|e| Edge {
                i: e.i,
                j: e.j,
                ratio: conjugate(&truth[e.i].transpose(), &e.ratio, &truth[e.j]),
            })
            .collect();
        Ok(MeasurementGraph {
            edges,
            truth: Some(truth.to_vec()),
            ..self.clone()
        })
    }

    /// Applies one global rotation to the truth, `R_i ↦ O R_i`. The measured
    /// ratios `R_iᵀ R_j` are unchanged by this gauge.
    pub fn with_gauge(&self, o: &Rotation) -> Result<MeasurementGraph> {
        let truth = self.truth.as_ref().ok_or(Error::MissingTruth)?;
        Ok(MeasurementGraph {
            truth: Some(truth.iter().map(|r| o.compose(r)).collect()),
            ..self.clone()
        })
    }

    /// Relabels vertex `v` as `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<MeasurementGraph> {
        if perm.len() != self.n {
            return Err(Error::ShapeMismatch("permutation length".into()));
        }
        let mut order: Vec<(Edge, Option<bool>)> = self
            .edges
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let (a, b) = (perm[e.i], perm[e.j]);
                let edge = if a < b {
                    Edge {
                        i: a,
                        j: b,
                        ratio: e.ratio.clone(),
                    }
                } else {
                    Edge {
                        i: b,
                        j: a,
                        ratio: e.ratio.transpose(),
                    }
                };
                (edge, self.good_mask.as_ref().map(|m| m[k]))
            })
            .collect();
        order.sort_by_key(|(e, _)| (e.i, e.j));
        let good_mask = self
            .good_mask
            .as_ref()
            .map(|_| order.iter().map(|(_, g)| g.unwrap_or(false)).collect());
        let truth = self.truth.as_ref().map(|t| {
            let mut out = t.clone();
            for (v, r) in t.iter().enumerate() {
                out[perm[v]] = r.clone();
            }
            out
        });
        Ok(MeasurementGraph {
            edges: order.into_iter().map(|(e, _)| e).collect(),
            good_mask,
            truth,
            ..self.clone()
        })
    }

    /// Writes the plain-text serialization: a header `n d p1 p kappa seed`,
    /// one line `i j` plus the `d·d` row-major block entries per edge, then
    /// the truth rotations under `#truth` and the good-edge labels under
    /// `#good`, each when present.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        let kappa = self
            .kappa
            .map(|k| format!("{k:?}"))
            .unwrap_or_else(|| "none".into());
        let seed = self.seed.map(|s| s.to_string()).unwrap_or_else(|| "none".into());
        writeln!(
            out,
            "{} {} {:?} {:?} {} {}",
            self.n, self.d, self.p1, self.p, kappa, seed
        )?;
        let mut line = String::new();
        for e in &self.edges {
            line.clear();
            line.push_str(&format!("{} {}", e.i, e.j));
            push_row_major(&mut line, e.ratio.matrix());
            writeln!(out, "{line}")?;
        }
        if let Some(truth) = &self.truth {
            writeln!(out, "#truth")?;
            for r in truth {
                line.clear();
                push_row_major(&mut line, r.matrix());
                writeln!(out, "{}", line.trim_start())?;
            }
        }
        if let Some(mask) = &self.good_mask {
            writeln!(out, "#good")?;
            for &g in mask {
                writeln!(out, "{}", u8::from(g))?;
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_text(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ASCII output")
    }

    /// Parses the format written by [`write_text`](Self::write_text).
    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let parse_err = |line: usize, message: String| Error::Parse {
            line: line + 1,
            message,
        };
        let (_, header) = lines
            .next()
            .ok_or_else(|| parse_err(0, "missing header".into()))?;
        let header = header?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(parse_err(
                0,
                format!("expected 6 header fields, got {}", fields.len()),
            ));
        }
        let num = |k: usize| -> Result<f64> {
            fields[k]
                .parse::<f64>()
                .map_err(|e| parse_err(0, format!("field {k}: {e}")))
        };
        let n: usize = fields[0].parse().map_err(|e| parse_err(0, format!("n: {e}")))?;
        let d: usize = fields[1].parse().map_err(|e| parse_err(0, format!("d: {e}")))?;
        let p1 = num(2)?;
        let p = num(3)?;
        let kappa = if fields[4] == "none" { None } else { Some(num(4)?) };
        let seed = if fields[5] == "none" {
            None
        } else {
            Some(
                fields[5]
                    .parse::<u64>()
                    .map_err(|e| parse_err(0, format!("seed: {e}")))?,
            )
        };

        #[derive(PartialEq)]
        enum Section {
            Edges,
            Truth,
            Good,
        }
        let mut section = Section::Edges;
        let mut edges = Vec::new();
        let mut truth = Vec::new();
        let mut has_truth = false;
        let mut good = Vec::new();
        let mut has_good = false;
        for (no, line) in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            match line {
                "#truth" => {
                    section = Section::Truth;
                    has_truth = true;
                    continue;
                }
                "#good" => {
                    section = Section::Good;
                    has_good = true;
                    continue;
                }
                _ => {}
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            match section {
                Section::Edges => {
                    if tokens.len() != 2 + d * d {
                        return Err(parse_err(no, format!("expected {} fields", 2 + d * d)));
                    }
                    let i = tokens[0].parse().map_err(|e| parse_err(no, format!("{e}")))?;
                    let j = tokens[1].parse().map_err(|e| parse_err(no, format!("{e}")))?;
                    let m = parse_block(&tokens[2..], d).map_err(|m| parse_err(no, m))?;
                    edges.push(Edge {
                        i,
                        j,
                        ratio: Rotation::from_matrix_unchecked(m),
                    });
                }
                Section::Truth => {
                    if tokens.len() != d * d {
                        return Err(parse_err(no, format!("expected {} fields", d * d)));
                    }
                    let m = parse_block(&tokens, d).map_err(|m| parse_err(no, m))?;
                    truth.push(Rotation::from_matrix_unchecked(m));
                }
                Section::Good => match line {
                    "0" => good.push(false),
                    "1" => good.push(true),
                    other => return Err(parse_err(no, format!("bad label {other:?}"))),
                },
            }
        }
        if has_truth && truth.len() != n {
            return Err(parse_err(
                0,
                format!("expected {n} truth rotations, got {}", truth.len()),
            ));
        }
        let g = MeasurementGraph {
            n,
            d,
            edges,
            truth: has_truth.then_some(truth),
            good_mask: has_good.then_some(good),
            p,
            p1,
            kappa,
            seed,
        };
        g.check()?;
        Ok(g)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::read_text(text.as_bytes())
    }
}

fn conjugate(left: &Rotation, m: &Rotation, right: &Rotation) -> Rotation {
    Rotation::from_matrix_unchecked(left.matrix() * m.matrix() * right.matrix())
}

fn push_row_major(line: &mut String, m: &DMatrix<f64>) {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            line.push(' ');
            line.push_str(&format!("{:.16e}", m[(r, c)]));
        }
    }
}

fn parse_block(tokens: &[&str], d: usize) -> std::result::Result<DMatrix<f64>, String> {
    let vals: std::result::Result<Vec<f64>, _> = tokens.iter().map(|t| t.parse::<f64>()).collect();
    let vals = vals.map_err(|e| e.to_string())?;
    Ok(DMatrix::from_row_slice(d, d, &vals))
}
