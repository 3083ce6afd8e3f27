//! Cross-space alignment: a (rectified) affine map from term features into
//! the concept embedding space, trained with a max-margin triplet loss over
//! in-batch hardest negatives.
//!
//! Term features are assembled as `branch ⊕ mla ⊕ raw`, where `branch` is
//! `[W'·ft + b']_+`, `mla` is the attention-fused layer stack and `raw` is
//! passed through unchanged. Any of the three parts may be absent.
//!
//! All parameters live in one flat vector in the order `W, b, W', b', A`;
//! gradients and optimizer state share that layout.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::embed::{cosine, dot, norm, Vector};
use crate::error::{read_to_string, write_file, Error, Result};
use crate::index::ConceptTargetIndex;
use crate::kg::Sctid;

const CHECKPOINT_MAGIC: &str = "conceptlink-align";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BranchDims {
    pub input: usize,
    pub output: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlaDims {
    pub layers: usize,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelShape {
    pub branch: Option<BranchDims>,
    pub mla: Option<MlaDims>,
    pub raw_dim: usize,
    pub out_dim: usize,
    pub use_relu: bool,
}

impl ModelShape {
    pub fn in_dim(&self) -> usize {
        self.branch.map_or(0, |b| b.output) + self.mla.map_or(0, |m| m.dim) + self.raw_dim
    }

    pub fn validate(&self) -> Result<()> {
        if self.out_dim == 0 || self.in_dim() == 0 {
            return Err(Error::Config("model needs a non-empty input and output".into()));
        }
        if let Some(b) = self.branch {
            if b.input == 0 || b.output == 0 {
                return Err(Error::Config("branch transform dims must be positive".into()));
            }
        }
        if let Some(m) = self.mla {
            if m.layers == 0 || m.dim == 0 {
                return Err(Error::Config(
                    "attention needs at least one layer of positive dim".into(),
                ));
            }
        }
        Ok(())
    }

    fn layout(&self) -> Layout {
        let (i, o) = (self.in_dim(), self.out_dim);
        let (bi, bo) = self.branch.map_or((0, 0), |b| (b.input, b.output));
        let d = self.mla.map_or(0, |m| m.dim);
        let mut at = 0;
        let mut take = |n: usize| {
            at += n;
            at - n..at
        };
        Layout {
            w: take(o * i),
            b: take(o),
            wb: take(bo * bi),
            bb: take(bo),
            a: take(d),
            total: at,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Layout {
    w: Range<usize>,
    b: Range<usize>,
    wb: Range<usize>,
    bb: Range<usize>,
    a: Range<usize>,
    total: usize,
}

/// Term-side features of one mention. `stack` holds `layers × dim` values,
/// lowest layer first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AlignInput {
    pub ft: Vec<f64>,
    pub stack: Vec<f64>,
    pub raw: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlaOutput {
    pub fused: Vec<f64>,
    /// Softmax attention weights over layers.
    pub weights: Vec<f64>,
    /// Pre-rectifier layer scores `B_i · A`.
    pub scores: Vec<f64>,
}

/// Multi-level attention over `layers` rows of `stack`.
pub fn mla_forward(stack: &[f64], layers: usize, memory: &[f64]) -> MlaOutput {
    let d = memory.len();
    debug_assert_eq!(stack.len(), layers * d);
    let rows = || stack.chunks_exact(d);
    let scores: Vec<f64> = rows().map(|b| dot(b, memory)).collect();
    let act: Vec<f64> = scores.iter().map(|s| s.max(0.0)).collect();
    let max = act.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = act.iter().map(|a| (a - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    let weights: Vec<f64> = exp.iter().map(|e| e / total).collect();
    let mut fused = vec![0.0; d];
    for (w, b) in weights.iter().zip(rows()) {
        for (f, x) in fused.iter_mut().zip(b) {
            *f += w * x;
        }
    }
    MlaOutput { fused, weights, scores }
}

#[derive(Debug, Clone)]
struct Trace {
    branch_pre: Vec<f64>,
    mla: Option<MlaOutput>,
    x: Vec<f64>,
    z: Vec<f64>,
    p: Vec<f64>,
}

/// One training example as seen by the loss: features, gold target vector
/// and gold concept id (used for negative exclusion).
#[derive(Debug, Clone, Copy)]
pub struct BatchItem<'a> {
    pub input: &'a AlignInput,
    pub target: &'a [f64],
    pub gold: Sctid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripletLoss {
    pub loss: f64,
    /// Hinge value per example.
    pub terms: Vec<f64>,
    /// Hardest in-batch negative per example, `None` when every other
    /// example shares the gold concept.
    pub negatives: Vec<Option<usize>>,
}

/// Σ_i max(0, α − s(p_i, t_i) + max_{j: gold_j ≠ gold_i} s(p_i, t_j)) with
/// cosine `s`. Among equally hard negatives the smallest index wins.
pub fn triplet_loss(predictions: &[&[f64]], targets: &[&[f64]], gold: &[Sctid], alpha: f64) -> Result<TripletLoss> {
    let n = predictions.len();
    if targets.len() != n || gold.len() != n {
        return Err(Error::Validation(
            "predictions, targets and gold differ in length".into(),
        ));
    }
    if n < 2 {
        return Err(Error::Validation("triplet loss needs a batch of at least 2".into()));
    }
    let mut terms = Vec::with_capacity(n);
    let mut negatives = Vec::with_capacity(n);
    for i in 0..n {
        let mut hardest: Option<(usize, f64)> = None;
        for j in (0..n).filter(|&j| gold[j] != gold[i]) {
            let s = cosine(predictions[i], targets[j]);
            if hardest.map_or(true, |(_, best)| s > best) {
                hardest = Some((j, s));
            }
        }
        let term = match hardest {
            Some((_, neg)) => (alpha - cosine(predictions[i], targets[i]) + neg).max(0.0),
            None => 0.0,
        };
        terms.push(term);
        negatives.push(hardest.map(|(j, _)| j));
    }
    Ok(TripletLoss {
        loss: terms.iter().sum(),
        terms,
        negatives,
    })
}

/// d cos(p, t) / dp; zero when either vector is zero.
fn cosine_grad(p: &[f64], t: &[f64], out: &mut [f64], sign: f64) {
    let (np, nt) = (norm(p), norm(t));
    if np == 0.0 || nt == 0.0 {
        return;
    }
    let c = dot(p, t) / (np * nt);
    for ((o, pi), ti) in out.iter_mut().zip(p).zip(t) {
        *o += sign * (ti / (np * nt) - c * pi / (np * np));
    }
}

/// Adds Σ_i g_i ⊗ x_i to a row-major `rows × x.len()` block; rows are
/// processed in parallel, examples in order.
fn accumulate_outer(block: &mut [f64], cols: usize, gs: &[&[f64]], xs: &[&[f64]]) {
    block.par_chunks_mut(cols).enumerate().for_each(|(r, row)| {
        for (g, x) in gs.iter().zip(xs) {
            let gr = g[r];
            if gr != 0.0 {
                for (w, xk) in row.iter_mut().zip(x.iter()) {
                    *w += gr * xk;
                }
            }
        }
    });
}

fn accumulate_sum(block: &mut [f64], gs: &[&[f64]]) {
    for g in gs {
        for (b, x) in block.iter_mut().zip(g.iter()) {
            *b += x;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignModel {
    shape: ModelShape,
    seed: u64,
    params: Vec<f64>,
    /// Free-form key/value pairs saved with the checkpoint.
    pub meta: BTreeMap<String, String>,
}

impl AlignModel {
    /// Glorot-uniform weights, zero biases; the attention memory uses
    /// fan-out 1.
    pub fn init(shape: ModelShape, seed: u64) -> Result<Self> {
        shape.validate()?;
        let layout = shape.layout();
        let mut params = vec![0.0; layout.total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |range: Range<usize>, fan_in: usize, fan_out: usize| {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut params[range] {
                *p = rng.gen_range(-bound..bound);
            }
        };
        fill(layout.w.clone(), shape.in_dim(), shape.out_dim);
        if let Some(b) = shape.branch {
            fill(layout.wb.clone(), b.input, b.output);
        }
        if let Some(m) = shape.mla {
            fill(layout.a.clone(), m.dim, 1);
        }
        Ok(AlignModel {
            shape,
            seed,
            params,
            meta: BTreeMap::new(),
        })
    }

    pub fn shape(&self) -> &ModelShape {
        &self.shape
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Named parameter blocks within the flat vector; absent parts are
    /// empty ranges.
    pub fn param_blocks(&self) -> [(&'static str, Range<usize>); 5] {
        let l = self.shape.layout();
        [("W", l.w), ("b", l.b), ("W'", l.wb), ("b'", l.bb), ("A", l.a)]
    }

    fn block(&self, name: &str) -> &[f64] {
        let l = self.shape.layout();
        let r = match name {
            "W" => l.w,
            "b" => l.b,
            "W'" => l.wb,
            "b'" => l.bb,
            _ => l.a,
        };
        &self.params[r]
    }

    pub fn check_input(&self, input: &AlignInput) -> Result<()> {
        let want_ft = self.shape.branch.map_or(0, |b| b.input);
        let want_stack = self.shape.mla.map_or(0, |m| m.layers * m.dim);
        if input.ft.len() != want_ft || input.stack.len() != want_stack || input.raw.len() != self.shape.raw_dim {
            return Err(Error::Validation(format!(
                "input parts (ft {}, stack {}, raw {}) do not match the model (ft {}, stack {}, raw {})",
                input.ft.len(),
                input.stack.len(),
                input.raw.len(),
                want_ft,
                want_stack,
                self.shape.raw_dim
            )));
        }
        Ok(())
    }

    fn trace(&self, input: &AlignInput) -> Trace {
        let mut x = Vec::with_capacity(self.shape.in_dim());
        let mut branch_pre = Vec::new();
        if let Some(b) = self.shape.branch {
            let (wb, bb) = (self.block("W'"), self.block("b'"));
            branch_pre = (0..b.output)
                .map(|r| bb[r] + dot(&wb[r * b.input..(r + 1) * b.input], &input.ft))
                .collect();
            x.extend(branch_pre.iter().map(|h| h.max(0.0)));
        }
        let mla = self
            .shape
            .mla
            .map(|m| mla_forward(&input.stack, m.layers, self.block("A")));
        if let Some(out) = &mla {
            x.extend_from_slice(&out.fused);
        }
        x.extend_from_slice(&input.raw);
        let (w, b) = (self.block("W"), self.block("b"));
        let n = x.len();
        let z: Vec<f64> = (0..self.shape.out_dim)
            .map(|r| b[r] + dot(&w[r * n..(r + 1) * n], &x))
            .collect();
        let p = if self.shape.use_relu {
            z.iter().map(|v| v.max(0.0)).collect()
        } else {
            z.clone()
        };
        Trace {
            branch_pre,
            mla,
            x,
            z,
            p,
        }
    }

    /// Prediction for an input already checked against the model shape.
    pub fn forward(&self, input: &AlignInput) -> Vector {
        debug_assert!(self.check_input(input).is_ok());
        Vector(self.trace(input).p)
    }

    pub fn predict(&self, input: &AlignInput) -> Result<Vector> {
        self.check_input(input)?;
        Ok(self.forward(input))
    }

    pub fn batch_loss(&self, batch: &[BatchItem], alpha: f64) -> Result<f64> {
        let preds: Vec<Vec<f64>> = batch.par_iter().map(|it| self.trace(it.input).p).collect();
        let refs: Vec<&[f64]> = preds.iter().map(Vec::as_slice).collect();
        let targets: Vec<&[f64]> = batch.iter().map(|it| it.target).collect();
        let gold: Vec<Sctid> = batch.iter().map(|it| it.gold).collect();
        Ok(triplet_loss(&refs, &targets, &gold, alpha)?.loss)
    }

    /// Loss and its exact gradient with respect to the flat parameters.
    /// Subgradients at rectifier and hinge kinks are 0.
    pub fn loss_and_grad(&self, batch: &[BatchItem], alpha: f64) -> Result<(f64, Vec<f64>)> {
        for it in batch {
            self.check_input(it.input)?;
        }
        let traces: Vec<Trace> = batch.par_iter().map(|it| self.trace(it.input)).collect();
        let preds: Vec<&[f64]> = traces.iter().map(|t| t.p.as_slice()).collect();
        let targets: Vec<&[f64]> = batch.iter().map(|it| it.target).collect();
        let gold: Vec<Sctid> = batch.iter().map(|it| it.gold).collect();
        let tl = triplet_loss(&preds, &targets, &gold, alpha)?;

        let layout = self.shape.layout();
        let mut grad = vec![0.0; layout.total];
        let active: Vec<usize> = (0..batch.len()).filter(|&i| tl.terms[i] > 0.0).collect();
        if active.is_empty() {
            return Ok((tl.loss, grad));
        }

        // dL/dz per active example
        let gz: Vec<Vec<f64>> = active
            .iter()
            .map(|&i| {
                let tr = &traces[i];
                let mut gp = vec![0.0; self.shape.out_dim];
                cosine_grad(&tr.p, targets[i], &mut gp, -1.0);
                let j = tl.negatives[i].expect("active hinge has a negative");
                cosine_grad(&tr.p, targets[j], &mut gp, 1.0);
                if self.shape.use_relu {
                    for (g, z) in gp.iter_mut().zip(&tr.z) {
                        if *z <= 0.0 {
                            *g = 0.0;
                        }
                    }
                }
                gp
            })
            .collect();
        let gz_refs: Vec<&[f64]> = gz.iter().map(Vec::as_slice).collect();
        let xs: Vec<&[f64]> = active.iter().map(|&i| traces[i].x.as_slice()).collect();
        let in_dim = self.shape.in_dim();
        accumulate_outer(&mut grad[layout.w.clone()], in_dim, &gz_refs, &xs);
        accumulate_sum(&mut grad[layout.b.clone()], &gz_refs);

        if self.shape.branch.is_none() && self.shape.mla.is_none() {
            return Ok((tl.loss, grad));
        }

        // dL/dx = Wᵀ g_z
        let w = self.block("W");
        let gx: Vec<Vec<f64>> = gz
            .par_iter()
            .map(|g| {
                let mut gx = vec![0.0; in_dim];
                for (r, gr) in g.iter().enumerate() {
                    if *gr != 0.0 {
                        for (o, wv) in gx.iter_mut().zip(&w[r * in_dim..(r + 1) * in_dim]) {
                            *o += gr * wv;
                        }
                    }
                }
                gx
            })
            .collect();

        let mut offset = 0;
        if let Some(b) = self.shape.branch {
            let gh: Vec<Vec<f64>> = active
                .iter()
                .zip(&gx)
                .map(|(&i, g)| {
                    g[..b.output]
                        .iter()
                        .zip(&traces[i].branch_pre)
                        .map(|(g, h)| if *h > 0.0 { *g } else { 0.0 })
                        .collect()
                })
                .collect();
            let gh_refs: Vec<&[f64]> = gh.iter().map(Vec::as_slice).collect();
            let fts: Vec<&[f64]> = active.iter().map(|&i| batch[i].input.ft.as_slice()).collect();
            accumulate_outer(&mut grad[layout.wb.clone()], b.input, &gh_refs, &fts);
            accumulate_sum(&mut grad[layout.bb.clone()], &gh_refs);
            offset = b.output;
        }
        if let Some(m) = self.shape.mla {
            let ga = &mut grad[layout.a.clone()];
            for (&i, g) in active.iter().zip(&gx) {
                let gf = &g[offset..offset + m.dim];
                let out = traces[i].mla.as_ref().expect("mla traced");
                let stack = &batch[i].input.stack;
                let gw: Vec<f64> = stack.chunks_exact(m.dim).map(|row| dot(row, gf)).collect();
                let mean: f64 = out.weights.iter().zip(&gw).map(|(w, g)| w * g).sum();
                for ((row, w), (gwi, s)) in stack
                    .chunks_exact(m.dim)
                    .zip(&out.weights)
                    .zip(gw.iter().zip(&out.scores))
                {
                    if *s > 0.0 {
                        let gs = w * (gwi - mean);
                        for (a, x) in ga.iter_mut().zip(row) {
                            *a += gs * x;
                        }
                    }
                }
            }
        }
        Ok((tl.loss, grad))
    }

    pub fn render(&self) -> String {
        let s = &self.shape;
        let mut out = format!("{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}\n");
        writeln!(out, "seed {}", self.seed).unwrap();
        writeln!(out, "use_relu {}", s.use_relu).unwrap();
        writeln!(out, "out_dim {}", s.out_dim).unwrap();
        writeln!(out, "raw_dim {}", s.raw_dim).unwrap();
        match s.branch {
            Some(b) => writeln!(out, "branch {} {}", b.input, b.output).unwrap(),
            None => out.push_str("branch none\n"),
        }
        match s.mla {
            Some(m) => writeln!(out, "mla {} {}", m.layers, m.dim).unwrap(),
            None => out.push_str("mla none\n"),
        }
        for (k, v) in &self.meta {
            writeln!(out, "meta {k} {v}").unwrap();
        }
        let in_dim = s.in_dim();
        let bin = s.branch.map_or(1, |b| b.input);
        for ((name, range), cols) in
            self.param_blocks()
                .into_iter()
                .zip([in_dim, usize::MAX, bin, usize::MAX, usize::MAX])
        {
            let block = &self.params[range];
            if block.is_empty() {
                continue;
            }
            let cols = cols.min(block.len());
            writeln!(out, "param {name} {} {cols}", block.len() / cols).unwrap();
            for row in block.chunks(cols) {
                let line: Vec<String> = row.iter().map(f64::to_string).collect();
                out.push_str(&line.join(" "));
                out.push('\n');
            }
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, self.render())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_to_string(path)?, &path.display().to_string())
    }

    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end()));
        let bad = |line: usize, msg: String| Error::parse(path, line, msg);
        let (_, head) = lines.next().ok_or_else(|| bad(1, "empty checkpoint".into()))?;
        if head != format!("{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}") {
            return Err(bad(1, format!("unsupported checkpoint header {head:?}")));
        }
        let mut header: BTreeMap<String, (usize, String)> = BTreeMap::new();
        let mut meta = BTreeMap::new();
        let mut blocks: Vec<(usize, String, usize, usize)> = Vec::new();
        let mut values: Vec<Vec<f64>> = Vec::new();
        let mut pending_rows = 0usize;
        for (no, line) in lines {
            if pending_rows > 0 {
                let row = line
                    .split_whitespace()
                    .map(|v| v.parse::<f64>().ok().filter(|x| x.is_finite()))
                    .collect::<Option<Vec<f64>>>()
                    .ok_or_else(|| bad(no, "invalid parameter value".into()))?;
                let cols = blocks.last().unwrap().3;
                if row.len() != cols {
                    return Err(bad(no, format!("expected {cols} values, found {}", row.len())));
                }
                values.last_mut().unwrap().extend(row);
                pending_rows -= 1;
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
            match key {
                "meta" => {
                    let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                    meta.insert(k.to_string(), v.to_string());
                }
                "param" => {
                    let f: Vec<&str> = rest.split_whitespace().collect();
                    let dims = (f.len() == 3)
                        .then(|| Some((f[1].parse::<usize>().ok()?, f[2].parse::<usize>().ok()?)))
                        .flatten()
                        .ok_or_else(|| bad(no, format!("invalid param line {line:?}")))?;
                    blocks.push((no, f[0].to_string(), dims.0, dims.1));
                    values.push(Vec::with_capacity(dims.0 * dims.1));
                    pending_rows = dims.0;
                }
                _ => {
                    header.insert(key.to_string(), (no, rest.to_string()));
                }
            }
        }
        if pending_rows > 0 {
            return Err(bad(0, "checkpoint ends inside a parameter block".into()));
        }
        let field = |k: &str| -> Result<(usize, &str)> {
            header
                .get(k)
                .map(|(l, v)| (*l, v.as_str()))
                .ok_or_else(|| bad(0, format!("missing field {k:?}")))
        };
        let num = |k: &str| -> Result<u64> {
            let (l, v) = field(k)?;
            v.parse().map_err(|_| bad(l, format!("invalid {k} {v:?}")))
        };
        let pair = |k: &str| -> Result<Option<(usize, usize)>> {
            let (l, v) = field(k)?;
            if v == "none" {
                return Ok(None);
            }
            let f: Vec<usize> = v
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad(l, format!("invalid {k} {v:?}")))?;
            match f[..] {
                [a, b] => Ok(Some((a, b))),
                _ => Err(bad(l, format!("invalid {k} {v:?}"))),
            }
        };
        let (l, relu) = field("use_relu")?;
        let shape = ModelShape {
            use_relu: relu.parse().map_err(|_| bad(l, format!("invalid use_relu {relu:?}")))?,
            out_dim: num("out_dim")? as usize,
            raw_dim: num("raw_dim")? as usize,
            branch: pair("branch")?.map(|(input, output)| BranchDims { input, output }),
            mla: pair("mla")?.map(|(layers, dim)| MlaDims { layers, dim }),
        };
        shape
            .validate()
            .map_err(|e| bad(0, format!("inconsistent shape: {e}")))?;
        let mut model = AlignModel {
            shape,
            seed: num("seed")?,
            params: Vec::new(),
            meta,
        };
        let layout = model.shape.layout();
        model.params = vec![0.0; layout.total];
        let mut seen = Vec::new();
        for ((line, name, _, _), vals) in blocks.into_iter().zip(values) {
            let range = model
                .param_blocks()
                .into_iter()
                .find(|(n, r)| *n == name && !r.is_empty())
                .map(|(_, r)| r)
                .ok_or_else(|| bad(line, format!("unexpected parameter block {name:?}")))?;
            if vals.len() != range.len() {
                return Err(bad(
                    line,
                    format!("block {name} has {} values, expected {}", vals.len(), range.len()),
                ));
            }
            model.params[range].copy_from_slice(&vals);
            seen.push(name);
        }
        for (name, range) in model.param_blocks() {
            if !range.is_empty() && !seen.iter().any(|s| s == name) {
                return Err(bad(0, format!("missing parameter block {name}")));
            }
        }
        Ok(model)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub alpha: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 0.2,
            batch_size: 64,
            epochs: 50,
            learning_rate: 1e-4,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::Config("alpha must be positive".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::Config("batch_size must be at least 2".into()));
        }
        if !(self.learning_rate >= 0.0 && self.weight_decay >= 0.0 && self.eps > 0.0) {
            return Err(Error::Config(
                "learning rate, weight decay and eps must be non-negative".into(),
            ));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return Err(Error::Config("betas must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Adam with decoupled weight decay.
#[derive(Debug, Clone)]
pub struct AdamW {
    lr: f64,
    weight_decay: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl AdamW {
    pub fn new(n: usize, cfg: &TrainConfig) -> Self {
        AdamW {
            lr: cfg.learning_rate,
            weight_decay: cfg.weight_decay,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.eps,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let decay = 1.0 - self.lr * self.weight_decay;
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        params
            .par_iter_mut()
            .zip(grad)
            .zip(self.m.par_iter_mut().zip(self.v.par_iter_mut()))
            .for_each(|((p, g), (m, v))| {
                *p *= decay;
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            });
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignExample {
    pub id: u64,
    pub input: AlignInput,
    pub gold: Sctid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_acc1: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: AlignModel,
    pub trace: Vec<EpochStats>,
    /// Epoch whose parameters were kept (1-based; 0 when no epoch ran).
    pub best_epoch: usize,
}

/// Fraction of examples whose top-ranked concept is the gold one.
pub fn accuracy_at_1(model: &AlignModel, examples: &[AlignExample], index: &ConceptTargetIndex) -> Result<f64> {
    if examples.is_empty() {
        return Ok(0.0);
    }
    let hits: Vec<bool> = examples
        .par_iter()
        .map(|ex| -> Result<bool> {
            let top = index.rank(&model.predict(&ex.input)?, 1)?;
            Ok(top.first().map(|(id, _)| *id) == Some(ex.gold))
        })
        .collect::<Result<_>>()?;
    Ok(hits.iter().filter(|h| **h).count() as f64 / examples.len() as f64)
}

/// Mini-batch training with a seeded shuffle per epoch. Keeps the
/// parameters of the epoch with the best dev Acc@1 (earliest on ties; the
/// last epoch when `dev` is empty).
pub fn train(
    mut model: AlignModel,
    train: &[AlignExample],
    dev: &[AlignExample],
    index: &ConceptTargetIndex,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.len() < cfg.batch_size {
        return Err(Error::Validation(format!(
            "{} training examples is fewer than the batch size {}",
            train.len(),
            cfg.batch_size
        )));
    }
    if index.dim() != model.shape.out_dim {
        return Err(Error::Validation(format!(
            "model output dim {} does not match target dim {}",
            model.shape.out_dim,
            index.dim()
        )));
    }
    for ex in train.iter().chain(dev) {
        model
            .check_input(&ex.input)
            .map_err(|e| Error::Validation(format!("mention {}: {e}", ex.id)))?;
    }
    let targets: Vec<&[f64]> = train
        .iter()
        .map(|ex| {
            index.target(ex.gold).ok_or_else(|| {
                Error::Validation(format!("gold concept {} of mention {} has no target", ex.gold, ex.id))
            })
        })
        .collect::<Result<_>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = AdamW::new(model.params.len(), cfg);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            if chunk.len() < 2 {
                continue;
            }
            let batch: Vec<BatchItem> = chunk
                .iter()
                .map(|&i| BatchItem {
                    input: &train[i].input,
                    target: targets[i],
                    gold: train[i].gold,
                })
                .collect();
            let (loss, grad) = model.loss_and_grad(&batch, cfg.alpha)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "loss or gradient at epoch {epoch}, batch {}",
                    b + 1
                )));
            }
            epoch_loss += loss;
            opt.step(&mut model.params, &grad);
        }
        let dev_acc1 = if dev.is_empty() {
            None
        } else {
            Some(accuracy_at_1(&model, dev, index)?)
        };
        log::info!(
            "epoch {epoch}: train loss {epoch_loss:.4}{}",
            dev_acc1.map_or(String::new(), |a| format!(", dev Acc@1 {a:.4}"))
        );
        let score = dev_acc1.unwrap_or(f64::NEG_INFINITY);
        let improves = match &best {
            None => true,
            Some((s, _, _)) => score > *s || (dev.is_empty()),
        };
        if improves {
            best = Some((score, epoch, model.params.clone()));
        }
        trace.push(EpochStats {
            epoch,
            train_loss: epoch_loss,
            dev_acc1,
        });
    }
    let best_epoch = match best {
        Some((_, epoch, params)) => {
            model.params = params;
            epoch
        }
        None => 0,
    };
    Ok(TrainOutcome {
        model,
        trace,
        best_epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(n: usize) -> ModelShape {
        ModelShape {
            branch: None,
            mla: None,
            raw_dim: n,
            out_dim: n,
            use_relu: false,
        }
    }

    #[test]
    fn mla_hand_example() {
        let out = mla_forward(&[1.0, 3.0], 2, &[1.0]);
        let e1 = 1f64.exp();
        let e3 = 3f64.exp();
        assert!((out.weights[0] - e1 / (e1 + e3)).abs() < 1e-15);
        assert!((out.weights[0] - 0.1192).abs() < 1e-4);
        assert!((out.fused[0] - 2.7616).abs() < 1e-4);
        // zero memory: plain layer mean
        let mean = mla_forward(&[1.0, 2.0, 3.0, 6.0], 2, &[0.0, 0.0]);
        assert_eq!(mean.fused, vec![2.0, 4.0]);
    }

    #[test]
    fn identity_and_relu_forward() {
        let mut m = AlignModel::init(linear(2), 1).unwrap();
        m.params_mut()[..4].copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
        let input = AlignInput {
            raw: vec![0.5, -2.0],
            ..Default::default()
        };
        assert_eq!(m.predict(&input).unwrap().0, vec![0.5, -2.0]);
        m.shape.use_relu = true;
        let neg = AlignInput {
            raw: vec![-0.5, -2.0],
            ..Default::default()
        };
        assert_eq!(m.predict(&neg).unwrap().0, vec![0.0, 0.0]);
        assert!(m.predict(&AlignInput::default()).is_err());
    }

    #[test]
    fn init_bounds_and_zero_biases() {
        let shape = ModelShape {
            branch: Some(BranchDims { input: 7, output: 5 }),
            mla: Some(MlaDims { layers: 3, dim: 4 }),
            raw_dim: 2,
            out_dim: 6,
            use_relu: true,
        };
        let m = AlignModel::init(shape.clone(), 11).unwrap();
        assert_eq!(m, AlignModel::init(shape, 11).unwrap());
        assert!(m.block("b").iter().chain(m.block("b'")).all(|b| *b == 0.0));
        let bound = |i: usize, o: usize| (6.0 / (i + o) as f64).sqrt();
        assert!(m.block("W").iter().all(|w| w.abs() <= bound(11, 6)));
        assert!(m.block("W'").iter().all(|w| w.abs() <= bound(7, 5)));
        assert!(m.block("A").iter().all(|w| w.abs() <= bound(4, 1)));
    }

    #[test]
    fn triplet_examples() {
        let t: Vec<&[f64]> = vec![&[1.0, 0.0], &[0.0, 1.0]];
        let l = triplet_loss(&[&[1.0, 0.0], &[0.0, 1.0]], &t, &[Sctid(1), Sctid(2)], 0.2).unwrap();
        assert_eq!(l.loss, 0.0);
        // s(p,t) = 0.6, s(p,t̄) = 0.5
        let p = [0.6, 0.5, (1.0f64 - 0.36 - 0.25).sqrt()];
        let tg: Vec<&[f64]> = vec![&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]];
        let l = triplet_loss(&[&p, &p], &tg, &[Sctid(1), Sctid(2)], 0.2).unwrap();
        assert!((l.terms[0] - 0.1).abs() < 1e-12);
        assert!(triplet_loss(&[&p], &tg[..1], &[Sctid(1)], 0.2).is_err());
    }

    #[test]
    fn same_gold_is_not_a_negative() {
        let t: Vec<&[f64]> = vec![&[1.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]];
        let p: Vec<&[f64]> = vec![&[1.0, 0.1], &[1.0, 0.2], &[1.0, 1.0]];
        let g = [Sctid(5), Sctid(5), Sctid(6)];
        let l = triplet_loss(&p, &t, &g, 0.2).unwrap();
        assert_eq!(l.negatives, vec![Some(2), Some(2), Some(0)]);
        let all_same = triplet_loss(&p[..2], &t[..2], &g[..2], 0.2).unwrap();
        assert_eq!(all_same.negatives, vec![None, None]);
        assert_eq!(all_same.loss, 0.0);
    }

    #[test]
    fn checkpoint_round_trip() {
        let shape = ModelShape {
            branch: Some(BranchDims { input: 3, output: 2 }),
            mla: Some(MlaDims { layers: 2, dim: 2 }),
            raw_dim: 1,
            out_dim: 3,
            use_relu: false,
        };
        let mut m = AlignModel::init(shape, 4).unwrap();
        m.meta.insert("recipe".into(), "n6".into());
        m.params_mut()[0] = 1.0 / 3.0;
        let back = AlignModel::parse(&m.render(), "ck").unwrap();
        assert_eq!(back, m);
        assert_eq!(back.render(), m.render());
        let cut: String = m.render().lines().take(12).map(|l| format!("{l}\n")).collect();
        assert!(AlignModel::parse(&cut, "ck").is_err());
    }

    #[test]
    fn zero_learning_rate_keeps_params() {
        let mut p = vec![0.5, -1.0, 2.0];
        let before = p.clone();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            ..Default::default()
        };
        let mut opt = AdamW::new(3, &cfg);
        for _ in 0..5 {
            opt.step(&mut p, &[1.0, -3.0, 0.25]);
        }
        assert_eq!(p, before);
    }
}
