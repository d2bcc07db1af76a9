use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, NormalizedAdjacency};

static NEXT_LAYER_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => sigmoid(x),
            Activation::Linear => x,
        }
    }

    /// Derivative with respect to the pre-activation `x`.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Activation::Linear => 1.0,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Linear => "linear",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            "linear" => Ok(Activation::Linear),
            other => Err(Error::Config(format!("unknown activation '{other}'"))),
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// One graph-convolution layer `σ(Â · H · W)` without bias.
#[derive(Debug, Serialize, Deserialize)]
pub struct GcnLayer {
    weight: DenseMatrix,
    activation: Activation,
    #[serde(skip, default = "fresh_id")]
    id: u64,
    #[serde(skip)]
    generation: u64,
}

fn fresh_id() -> u64 {
    NEXT_LAYER_ID.fetch_add(1, Ordering::Relaxed)
}

impl Clone for GcnLayer {
    fn clone(&self) -> Self {
        Self {
            weight: self.weight.clone(),
            activation: self.activation,
            id: fresh_id(),
            generation: 0,
        }
    }
}

impl PartialEq for GcnLayer {
    fn eq(&self, other: &Self) -> bool {
        self.weight == other.weight && self.activation == other.activation
    }
}

impl GcnLayer {
    pub fn new(weight: DenseMatrix, activation: Activation) -> Result<Self> {
        if weight.rows() == 0 || weight.cols() == 0 {
            return Err(Error::shape("GcnLayer::new", "weight dimensions must be at least 1"));
        }
        if !weight.is_finite() {
            return Err(Error::Domain("GcnLayer weights must be finite".into()));
        }
        Ok(Self {
            weight,
            activation,
            id: fresh_id(),
            generation: 0,
        })
    }

    /// Glorot-uniform weights in `±√(6/(fan_in+fan_out))`.
    pub fn glorot(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut impl Rng) -> Result<Self> {
        let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let w = DenseMatrix::from_fn(in_dim, out_dim, |_, _| rng.random_range(-bound..=bound));
        Self::new(w, activation)
    }

    pub fn weight(&self) -> &DenseMatrix {
        &self.weight
    }

    /// Mutable weight access; invalidates tapes recorded before the call.
    pub fn weight_mut(&mut self) -> &mut DenseMatrix {
        self.generation += 1;
        &mut self.weight
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }
}

#[derive(Clone, Debug)]
struct LayerRecord {
    layer: u64,
    generation: u64,
    /// `Â · H`
    agg: DenseMatrix,
    /// `Â · H · W`
    pre: DenseMatrix,
}

/// Intermediates of a forward pass, consumed last-in first-out by
/// [`gcn_backward`].
#[derive(Clone, Debug, Default)]
pub struct Tape {
    records: Vec<LayerRecord>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Forward pass of one layer; pushes its intermediates onto `tape`.
pub fn gcn_forward(
    layer: &GcnLayer,
    h: &DenseMatrix,
    adj: &NormalizedAdjacency,
    tape: &mut Tape,
) -> Result<DenseMatrix> {
    if h.cols() != layer.in_dim() {
        return Err(Error::shape(
            "gcn_forward",
            format!("input has {} columns, weight expects {}", h.cols(), layer.in_dim()),
        ));
    }
    if adj.n() != h.rows() {
        return Err(Error::shape(
            "gcn_forward",
            format!("adjacency over {} nodes, input has {} rows", adj.n(), h.rows()),
        ));
    }
    let agg = adj.spmm(h)?;
    let pre = agg.matmul(&layer.weight)?;
    let act = layer.activation;
    let out = pre.map(|x| act.apply(x));
    tape.records.push(LayerRecord {
        layer: layer.id,
        generation: layer.generation,
        agg,
        pre,
    });
    Ok(out)
}

/// Reverse pass of the most recent unconsumed forward of `layer`.
/// Returns `(∂L/∂W, ∂L/∂H)`; the input gradient is skipped (left empty)
/// when `need_input_grad` is false.
pub fn gcn_backward(
    layer: &GcnLayer,
    adj: &NormalizedAdjacency,
    tape: &mut Tape,
    upstream: &DenseMatrix,
    need_input_grad: bool,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let rec = tape
        .records
        .pop()
        .ok_or_else(|| Error::StaleTape("tape is empty".into()))?;
    if rec.layer != layer.id {
        return Err(Error::StaleTape("next tape record belongs to a different layer".into()));
    }
    if rec.generation != layer.generation {
        return Err(Error::StaleTape("layer weights changed since the forward pass".into()));
    }
    if upstream.shape() != rec.pre.shape() {
        return Err(Error::shape(
            "gcn_backward",
            format!("upstream {:?}, layer output {:?}", upstream.shape(), rec.pre.shape()),
        ));
    }
    let act = layer.activation;
    let d_pre = match act {
        Activation::Linear => upstream.clone(),
        _ => upstream.zip_map(&rec.pre, |g, x| g * act.derivative(x))?,
    };
    let grad_w = rec.agg.t_matmul(&d_pre)?;
    let grad_h = if need_input_grad {
        // Â is symmetric, so Âᵀ · (dP · Wᵀ) = Â · (dP · Wᵀ).
        adj.spmm(&d_pre.matmul_t(&layer.weight)?)?
    } else {
        DenseMatrix::zeros(0, 0)
    };
    Ok((grad_w, grad_h))
}
