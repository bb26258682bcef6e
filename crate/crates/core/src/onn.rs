//! Diffractive classifier of the neuromorphic computing layer.
//!
//! The input image is launched as a real field amplitude. Each layer
//! propagates the field with the normalized 2-D DFT and multiplies it by a
//! phase-only mask; a final propagation reaches the detector plane, where
//! the intensity summed over each of eight regions is the class score.
//!
//! ```text
//! u_0 = x,   v_l = F u_{l-1},   u_l = exp(j phi_l) . v_l,   o = F u_L
//! s_k = sum_{p in R_k} |o_p|^2
//! ```
//!
//! Training minimizes the cross-entropy of `softmax(s / T)` where `T` is the
//! mean detector score of the batch. Gradients are exact: the backward pass
//! carries the Wirtinger derivative `dL/d conj(u)` through the adjoint DFT
//! and the conjugate masks, and `dL/d phi = -2 Im(conj(delta_u) u)`.

use std::f64::consts::TAU;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::par::{self, CompensatedSum};
use crate::rng::{self, Domain};
use crate::synth::{SpectrumClass, SpectrumImage, IMAGE_SIDE};

pub const N_CLASSES: usize = SpectrumClass::COUNT;
const LAYOUT_ID: &str = "tiles-2x4";
const CHECKPOINT_MAGIC: &str = "rics-diffractive v1";

/// Eight disjoint detector regions: a 2x4 tiling of square blocks of side
/// `side / 4`, centered on the output plane.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectorLayout {
    side: usize,
    region_of: Vec<Option<u8>>,
}

impl DetectorLayout {
    pub fn tiles(side: usize) -> Result<Self> {
        if side < 4 || !side.is_multiple_of(4) {
            return Err(Error::Domain(format!("grid side must be a positive multiple of 4, got {side}")));
        }
        let block = side / 4;
        let top = (side - 2 * block) / 2;
        let mut region_of = vec![None; side * side];
        for r in 0..2 * block {
            for c in 0..side {
                let region = (r / block) * 4 + c / block;
                region_of[(top + r) * side + c] = Some(region as u8);
            }
        }
        Ok(DetectorLayout { side, region_of })
    }

    pub fn region_of(&self, pixel: usize) -> Option<usize> {
        self.region_of[pixel].map(usize::from)
    }

    pub fn pixels_in(&self, region: usize) -> impl Iterator<Item = usize> + '_ {
        self.region_of
            .iter()
            .enumerate()
            .filter(move |(_, r)| r.map(usize::from) == Some(region))
            .map(|(p, _)| p)
    }

    pub fn coverage(&self) -> f64 {
        self.region_of.iter().filter(|r| r.is_some()).count() as f64 / self.region_of.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffractiveModel {
    side: usize,
    masks: Vec<Vec<f64>>,
    layout: DetectorLayout,
}

/// Phases uniform on `[0, 2 pi)` for every pixel of every layer.
pub fn init_model(n_layers: usize, rng: &mut impl Rng) -> Result<DiffractiveModel> {
    init_model_with_side(n_layers, IMAGE_SIDE, rng)
}

pub fn init_model_with_side(n_layers: usize, side: usize, rng: &mut impl Rng) -> Result<DiffractiveModel> {
    if n_layers < 1 {
        return Err(Error::Domain("a diffractive model needs at least one layer".into()));
    }
    let layout = DetectorLayout::tiles(side)?;
    let masks = (0..n_layers)
        .map(|_| (0..side * side).map(|_| rng.random_range(0.0..TAU)).collect())
        .collect();
    Ok(DiffractiveModel { side, masks, layout })
}

impl DiffractiveModel {
    pub fn from_masks(side: usize, masks: Vec<Vec<f64>>) -> Result<Self> {
        if masks.is_empty() {
            return Err(Error::Domain("a diffractive model needs at least one layer".into()));
        }
        if let Some(m) = masks.iter().find(|m| m.len() != side * side) {
            return Err(Error::Domain(format!("mask has {} phases, expected {}", m.len(), side * side)));
        }
        if masks.iter().flatten().any(|p| !p.is_finite()) {
            return Err(Error::Domain("mask phases must be finite".into()));
        }
        Ok(DiffractiveModel {
            side,
            masks,
            layout: DetectorLayout::tiles(side)?,
        })
    }

    pub fn n_layers(&self) -> usize {
        self.masks.len()
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn masks(&self) -> &[Vec<f64>] {
        &self.masks
    }

    pub fn layout(&self) -> &DetectorLayout {
        &self.layout
    }

    pub fn masks_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.masks
    }
}

/// Normalized (unitary) 2-D DFT on a square grid.
#[derive(Clone)]
pub struct Propagator {
    side: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Propagator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Propagator").field("side", &self.side).finish()
    }
}

impl Propagator {
    pub fn new(side: usize) -> Self {
        let mut planner = FftPlanner::new();
        Propagator {
            side,
            forward: planner.plan_fft_forward(side),
            inverse: planner.plan_fft_inverse(side),
        }
    }

    fn transform(&self, field: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.side;
        fft.process(field);
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for c in 0..n {
            for r in 0..n {
                col[r] = field[r * n + c];
            }
            fft.process(&mut col);
            for r in 0..n {
                field[r * n + c] = col[r];
            }
        }
        let scale = 1.0 / n as f64;
        field.iter_mut().for_each(|v| *v *= scale);
    }

    pub fn propagate(&self, field: &mut [Complex64]) {
        self.transform(field, &self.forward);
    }

    /// Adjoint (and inverse) of [`Propagator::propagate`].
    pub fn propagate_adjoint(&self, field: &mut [Complex64]) {
        self.transform(field, &self.inverse);
    }
}

/// Fields saved during the forward pass for backpropagation: `post[l]` is
/// `u_{l+1}` (after mask `l`), `output` the detector-plane field.
struct Trace {
    post: Vec<Vec<Complex64>>,
    output: Vec<Complex64>,
    scores: [f64; N_CLASSES],
}

fn check_input(model: &DiffractiveModel, input: &[f64]) -> Result<()> {
    if input.len() != model.side * model.side {
        return Err(Error::Domain(format!(
            "input has {} pixels, model expects {}x{}",
            input.len(),
            model.side,
            model.side
        )));
    }
    Ok(())
}

fn trace(model: &DiffractiveModel, prop: &Propagator, input: &[f64]) -> Trace {
    let mut field: Vec<Complex64> = input.iter().map(|&a| Complex64::new(a, 0.0)).collect();
    let mut post = Vec::with_capacity(model.masks.len());
    for mask in &model.masks {
        prop.propagate(&mut field);
        for (v, &phi) in field.iter_mut().zip(mask) {
            *v *= Complex64::from_polar(1.0, phi);
        }
        post.push(field.clone());
    }
    prop.propagate(&mut field);
    let mut scores = [0.0; N_CLASSES];
    for (p, v) in field.iter().enumerate() {
        if let Some(k) = model.layout.region_of(p) {
            scores[k] += v.norm_sqr();
        }
    }
    Trace {
        post,
        output: field,
        scores,
    }
}

/// Detector-plane field for a raw input amplitude grid.
pub fn output_field(model: &DiffractiveModel, input: &[f64]) -> Result<Vec<Complex64>> {
    check_input(model, input)?;
    Ok(trace(model, &Propagator::new(model.side), input).output)
}

/// Detector scores for a raw input amplitude grid of the model's size.
pub fn forward_raw(model: &DiffractiveModel, input: &[f64]) -> Result<[f64; N_CLASSES]> {
    check_input(model, input)?;
    Ok(trace(model, &Propagator::new(model.side), input).scores)
}

pub fn forward(model: &DiffractiveModel, image: &SpectrumImage) -> Result<[f64; N_CLASSES]> {
    forward_raw(model, image.pixels())
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = k;
        }
    }
    best
}

pub fn infer(model: &DiffractiveModel, image: &SpectrumImage) -> Result<SpectrumClass> {
    let scores = forward(model, image)?;
    Ok(SpectrumClass::ALL[argmax(&scores)])
}

/// Batch loss and its gradient with respect to every mask phase.
#[derive(Debug, Clone)]
pub struct LossGrad {
    pub loss: f64,
    pub grad: Vec<Vec<f64>>,
}

fn softmax(z: &[f64; N_CLASSES]) -> ([f64; N_CLASSES], f64) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p = [0.0; N_CLASSES];
    let mut total = 0.0;
    for (pk, &zk) in p.iter_mut().zip(z) {
        *pk = (zk - max).exp();
        total += *pk;
    }
    p.iter_mut().for_each(|v| *v /= total);
    (p, max + total.ln())
}

/// Mean cross-entropy of `softmax(s / T)` over a batch of raw inputs, with
/// `T` the mean detector score over the batch.
pub fn batch_loss(model: &DiffractiveModel, batch: &[(&[f64], usize)]) -> Result<f64> {
    Ok(loss_and_grad_inner(model, batch, false)?.loss)
}

pub fn loss_and_grad(model: &DiffractiveModel, batch: &[(&[f64], usize)]) -> Result<LossGrad> {
    loss_and_grad_inner(model, batch, true)
}

fn loss_and_grad_inner(model: &DiffractiveModel, batch: &[(&[f64], usize)], want_grad: bool) -> Result<LossGrad> {
    if batch.is_empty() {
        return Err(Error::Domain("empty batch".into()));
    }
    for (x, y) in batch {
        check_input(model, x)?;
        if *y >= N_CLASSES {
            return Err(Error::Domain(format!("label {y} out of range")));
        }
    }
    let prop = Propagator::new(model.side);
    let traces = par::map_slice(batch, |(x, _)| trace(model, &prop, x));
    let b = batch.len() as f64;
    let temperature = traces
        .iter()
        .flat_map(|t| t.scores)
        .collect::<CompensatedSum>()
        .value()
        / (b * N_CLASSES as f64);
    if !(temperature > 0.0) {
        // Dark detectors everywhere: every class is equally likely.
        return Ok(LossGrad {
            loss: (N_CLASSES as f64).ln(),
            grad: vec![vec![0.0; model.side * model.side]; model.masks.len()],
        });
    }

    // dL/dz = (p - onehot) / B for each example.
    let mut loss = CompensatedSum::default();
    let mut dz = Vec::with_capacity(batch.len());
    for (t, (_, y)) in traces.iter().zip(batch) {
        let z = t.scores.map(|s| s / temperature);
        let (p, lse) = softmax(&z);
        loss.add(lse - z[*y]);
        let mut g = p;
        g[*y] -= 1.0;
        dz.push(g.map(|v| v / b));
    }
    let loss = loss.value() / b;
    if !want_grad {
        return Ok(LossGrad { loss, grad: Vec::new() });
    }

    // T depends on every score: dT/ds = 1 / (8B).
    let dl_dt = traces
        .iter()
        .zip(&dz)
        .flat_map(|(t, g)| (0..N_CLASSES).map(move |k| -g[k] * t.scores[k] / (temperature * temperature)))
        .collect::<CompensatedSum>()
        .value();
    let via_t = dl_dt / (b * N_CLASSES as f64);

    let items: Vec<(&Trace, [f64; N_CLASSES])> = traces
        .iter()
        .zip(&dz)
        .map(|(t, g)| (t, g.map(|gk| gk / temperature + via_t)))
        .collect();
    let per_example = par::map_slice(&items, |(t, ds)| backward(model, &prop, t, ds));

    let n_params = model.side * model.side;
    let mut grad = vec![vec![0.0; n_params]; model.masks.len()];
    for (l, layer) in grad.iter_mut().enumerate() {
        for (p, g) in layer.iter_mut().enumerate() {
            *g = per_example.iter().map(|e| e[l][p]).collect::<CompensatedSum>().value();
        }
    }
    Ok(LossGrad { loss, grad })
}

fn backward(model: &DiffractiveModel, prop: &Propagator, t: &Trace, ds: &[f64; N_CLASSES]) -> Vec<Vec<f64>> {
    // delta = dL / d conj(field)
    let mut delta: Vec<Complex64> = t
        .output
        .iter()
        .enumerate()
        .map(|(p, o)| match model.layout.region_of(p) {
            Some(k) => o * ds[k],
            None => Complex64::new(0.0, 0.0),
        })
        .collect();
    let mut grads = vec![Vec::new(); model.masks.len()];
    for l in (0..model.masks.len()).rev() {
        prop.propagate_adjoint(&mut delta);
        grads[l] = delta
            .iter()
            .zip(&t.post[l])
            .map(|(d, u)| -2.0 * (d.conj() * u).im)
            .collect();
        for (d, &phi) in delta.iter_mut().zip(&model.masks[l]) {
            *d *= Complex64::from_polar(1.0, -phi);
        }
    }
    grads
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainParams {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Learning rate is multiplied by `decay_factor` every `decay_every` epochs.
    pub decay_every: usize,
    pub decay_factor: f64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            epochs: 60,
            learning_rate: 0.5,
            batch_size: 32,
            decay_every: 20,
            decay_factor: 0.5,
        }
    }
}

/// Plain minibatch SGD on the mask phases. Batches are reshuffled every
/// epoch from the `Shuffle` substream of `seed`. Returns the trained model
/// and the mean training loss of each epoch.
pub fn train(
    model: &DiffractiveModel,
    dataset: &[(SpectrumImage, SpectrumClass)],
    params: &TrainParams,
    seed: u64,
) -> Result<(DiffractiveModel, Vec<f64>)> {
    if dataset.is_empty() {
        return Err(Error::Domain("cannot train on an empty dataset".into()));
    }
    if !(params.learning_rate >= 0.0) || !params.learning_rate.is_finite() {
        return Err(Error::Domain(format!("learning rate must be non-negative, got {}", params.learning_rate)));
    }
    if params.batch_size == 0 {
        return Err(Error::Domain("batch size must be positive".into()));
    }
    let mut model = model.clone();
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut history = Vec::with_capacity(params.epochs);
    let shuffle_key = rng::derive(seed, Domain::Shuffle);
    for epoch in 0..params.epochs {
        let lr = params.learning_rate * params.decay_factor.powi((epoch / params.decay_every.max(1)) as i32);
        order.shuffle(&mut rng::stream(shuffle_key, epoch as u64));
        let mut epoch_loss = CompensatedSum::default();
        for chunk in order.chunks(params.batch_size) {
            let batch: Vec<(&[f64], usize)> = chunk
                .iter()
                .map(|&i| (dataset[i].0.pixels(), dataset[i].1.index()))
                .collect();
            let LossGrad { loss, grad } = loss_and_grad(&model, &batch)?;
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            epoch_loss.add(loss * chunk.len() as f64);
            if lr > 0.0 {
                for (mask, g) in model.masks.iter_mut().zip(&grad) {
                    for (phi, gp) in mask.iter_mut().zip(g) {
                        *phi = (*phi - lr * gp).rem_euclid(TAU);
                    }
                }
            }
        }
        let mean = epoch_loss.value() / dataset.len() as f64;
        if !mean.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        history.push(mean);
    }
    Ok((model, history))
}

/// Accuracy and row-normalized confusion matrix (`[true][predicted]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub confusion: [[f64; N_CLASSES]; N_CLASSES],
}

impl Evaluation {
    pub fn trace_mean(&self) -> f64 {
        (0..N_CLASSES).map(|k| self.confusion[k][k]).sum::<f64>() / N_CLASSES as f64
    }
}

/// Confusion rows of classes absent from `dataset` are left at zero.
pub fn evaluate(model: &DiffractiveModel, dataset: &[(SpectrumImage, SpectrumClass)]) -> Result<Evaluation> {
    let predictions = par::map_slice(dataset, |(img, _)| infer(model, img))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    evaluate_predictions(dataset.iter().map(|(_, c)| *c).zip(predictions))
}

/// Scores `(truth, prediction)` pairs.
pub fn evaluate_predictions(pairs: impl IntoIterator<Item = (SpectrumClass, SpectrumClass)>) -> Result<Evaluation> {
    let mut counts = [[0usize; N_CLASSES]; N_CLASSES];
    let mut total = 0usize;
    let mut correct = 0usize;
    for (truth, pred) in pairs {
        counts[truth.index()][pred.index()] += 1;
        total += 1;
        correct += usize::from(truth == pred);
    }
    if total == 0 {
        return Err(Error::Domain("cannot evaluate on an empty dataset".into()));
    }
    let mut confusion = [[0.0; N_CLASSES]; N_CLASSES];
    for (row, c) in confusion.iter_mut().zip(&counts) {
        let n: usize = c.iter().sum();
        if n > 0 {
            for (v, &k) in row.iter_mut().zip(c) {
                *v = k as f64 / n as f64;
            }
        }
    }
    Ok(Evaluation {
        accuracy: correct as f64 / total as f64,
        confusion,
    })
}

/// Checkpoint: text header lines (`n_layers`, `grid`, `layout`) closed by
/// `end`, followed by the mask phases as little-endian `f64`, layer-major and
/// row-major within a layer.
pub fn save_checkpoint(model: &DiffractiveModel, path: &Path) -> Result<()> {
    let mut bytes = format!(
        "{CHECKPOINT_MAGIC}\nn_layers {}\ngrid {}\nlayout {LAYOUT_ID}\nend\n",
        model.n_layers(),
        model.side
    )
    .into_bytes();
    for phi in model.masks.iter().flatten() {
        bytes.extend_from_slice(&phi.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<DiffractiveModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |reason: &str| Error::format(path, reason);
    let mut pos = 0;
    let mut next_line = || -> Result<String> {
        let rest = &bytes[pos..];
        let end = rest.iter().position(|&b| b == b'\n').ok_or_else(|| bad("unterminated header"))?;
        pos += end + 1;
        String::from_utf8(rest[..end].to_vec()).map_err(|_| bad("header is not UTF-8"))
    };
    if next_line()? != CHECKPOINT_MAGIC {
        return Err(bad("not a diffractive model checkpoint"));
    }
    let mut n_layers = None;
    let mut side = None;
    loop {
        let line = next_line()?;
        let mut parts = line.split_whitespace();
        match (parts.next(), parts.next()) {
            (Some("end"), None) => break,
            (Some("n_layers"), Some(v)) => n_layers = Some(v.parse::<usize>().map_err(|_| bad("bad n_layers"))?),
            (Some("grid"), Some(v)) => side = Some(v.parse::<usize>().map_err(|_| bad("bad grid"))?),
            (Some("layout"), Some(v)) if v == LAYOUT_ID => {}
            (Some("layout"), Some(v)) => return Err(bad(&format!("unknown detector layout `{v}`"))),
            _ => return Err(bad(&format!("unexpected header line `{line}`"))),
        }
    }
    let (n_layers, side) = n_layers.zip(side).ok_or_else(|| bad("header lacks n_layers or grid"))?;
    let body = &bytes[pos..];
    if body.len() != n_layers * side * side * 8 {
        return Err(bad("phase payload length does not match the header"));
    }
    let phases: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    DiffractiveModel::from_masks(side, phases.chunks(side * side).map(<[f64]>::to_vec).collect())
}

/// Path of the confusion-matrix sidecar written next to a checkpoint.
pub fn confusion_sidecar(checkpoint: &Path) -> PathBuf {
    let mut name = checkpoint.file_name().unwrap_or_default().to_os_string();
    name.push(".confusion.csv");
    checkpoint.with_file_name(name)
}

/// CSV with a header row of predicted classes and one row per true class.
pub fn save_confusion(eval: &Evaluation, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    let header: Vec<&str> = SpectrumClass::ALL.iter().map(|c| c.name()).collect();
    writeln!(out, "true_class,{}", header.join(",")).expect("write to Vec");
    for (c, row) in SpectrumClass::ALL.iter().zip(&eval.confusion) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{c},{}", cells.join(",")).expect("write to Vec");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_confusion(path: &Path) -> Result<[[f64; N_CLASSES]; N_CLASSES]> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = [[0.0; N_CLASSES]; N_CLASSES];
    let mut seen = [false; N_CLASSES];
    for (n, line) in text.lines().enumerate().skip(1).filter(|(_, l)| !l.trim().is_empty()) {
        let mut cells = line.split(',');
        let class: SpectrumClass = cells.next().unwrap_or_default().trim().parse()?;
        let values = cells
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::format(path, format!("line {}: bad number", n + 1)))?;
        if values.len() != N_CLASSES || values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::format(path, format!("line {}: expected 8 probabilities", n + 1)));
        }
        rows[class.index()].copy_from_slice(&values);
        seen[class.index()] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::format(path, "confusion matrix is missing a class row"));
    }
    Ok(rows)
}
