//! Encoding BNN robustness queries as CNF-BNN formulas.
//!
//! A network file is JSON:
//!
//! ```json
//! {"layers": [{"weights": [[1, -1, 1], [-1, -1, 1]], "bias": [-1, 0]}]}
//! ```
//!
//! `weights[j]` lists neuron `j`'s weights over the layer's inputs, each
//! `1` or `-1`; `bias[j]` is its integer bias. Neuron `j` outputs 1 iff
//! `sum_i weights[j][i] * x_i + bias[j] >= 0` with inputs in {0, 1}.

use serde::{Deserialize, Serialize};

use crate::formula::{BnnConstraint, BnnNormal, Clause, ConstraintRef, Formula, FormulaError, Lit, Var};

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum EncodeError {
    #[error("weight {0} is not 1 or -1")]
    BadWeight(i64),
    #[error("malformed network: {0}")]
    Shape(String),
    #[error("radius {radius} exceeds the input width {width}")]
    RadiusTooLarge { radius: usize, width: usize },
    #[error("formula contains XOR constraints")]
    HasXors,
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error("network file: {0}")]
    Json(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Vec<Vec<i64>>,
    pub bias: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BnnNetwork {
    pub layers: Vec<Layer>,
}

impl BnnNetwork {
    pub fn from_json(text: &str) -> Result<BnnNetwork, EncodeError> {
        let n: BnnNetwork = serde_json::from_str(text).map_err(|e| EncodeError::Json(e.to_string()))?;
        n.validate()?;
        Ok(n)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("network serializes")
    }

    pub fn validate(&self) -> Result<(), EncodeError> {
        let mut width = self.input_width();
        if self.layers.is_empty() || width == 0 {
            return Err(EncodeError::Shape("network needs a layer with at least one input".into()));
        }
        for (t, layer) in self.layers.iter().enumerate() {
            if layer.weights.is_empty() || layer.weights.len() != layer.bias.len() {
                return Err(EncodeError::Shape(format!("layer {t}: {} weight rows, {} biases", layer.weights.len(), layer.bias.len())));
            }
            for row in &layer.weights {
                if row.len() != width {
                    return Err(EncodeError::Shape(format!("layer {t}: row of width {} on {width} inputs", row.len())));
                }
                if let Some(&w) = row.iter().find(|&&w| w != 1 && w != -1) {
                    return Err(EncodeError::BadWeight(w));
                }
            }
            width = layer.weights.len();
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.layers.first().and_then(|l| l.weights.first()).map_or(0, |r| r.len())
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map_or(0, |l| l.weights.len())
    }

    pub fn num_neurons(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len()).sum()
    }

    /// Evaluates the network under the sign semantics.
    pub fn forward(&self, input: &[bool]) -> Vec<bool> {
        let mut x = input.to_vec();
        for layer in &self.layers {
            x = layer
                .weights
                .iter()
                .zip(&layer.bias)
                .map(|(row, &b)| row.iter().zip(&x).map(|(&w, &xi)| w * xi as i64).sum::<i64>() + b >= 0)
                .collect();
        }
        x
    }
}

/// Rewrites `sum w_i x_i + bias >= 0 <-> out` over Boolean inputs as
/// `sum l_i >= #neg - bias <-> out`, with `l_i = x_i` for weight 1 and
/// `l_i = not x_i` for weight -1.
pub fn neuron_to_constraint(weights: &[i64], bias: i64, inputs: &[Var], out: Var) -> Result<BnnNormal, EncodeError> {
    if weights.len() != inputs.len() || weights.is_empty() {
        return Err(EncodeError::Shape(format!("{} weights for {} inputs", weights.len(), inputs.len())));
    }
    let mut lhs = Vec::with_capacity(weights.len());
    let mut negs = 0i64;
    for (&w, &v) in weights.iter().zip(inputs) {
        match w {
            1 => lhs.push(v.positive()),
            -1 => {
                negs += 1;
                lhs.push(v.negative());
            }
            _ => return Err(EncodeError::BadWeight(w)),
        }
    }
    Ok(BnnConstraint::build(lhs, negs - bias, out.positive())?)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RobustnessQuery {
    pub network: BnnNetwork,
    pub anchor_input: Vec<bool>,
    pub anchor_output: Vec<bool>,
    /// Largest Hamming distance from the anchor input.
    pub radius: usize,
}

/// Variables of an encoded robustness query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RobustnessVars {
    pub inputs: Vec<Var>,
    /// Output variables of each layer.
    pub layers: Vec<Vec<Var>>,
    /// True iff the input lies within the radius.
    pub in_ball: Var,
}

fn push(f: &mut Formula, n: BnnNormal) -> Result<(), EncodeError> {
    match n {
        BnnNormal::Bnn(b) => f.add_normalized_bnn(b)?,
        BnnNormal::Unit(l) => f.add_clause(Clause::new(vec![l]))?,
    }
    Ok(())
}

/// Formula whose models over the input variables (its sampling set) are
/// exactly the inputs within `radius` of the anchor that the network does
/// not map to the anchor output.
pub fn encode_robustness(q: &RobustnessQuery) -> Result<(Formula, RobustnessVars), EncodeError> {
    let net = &q.network;
    net.validate()?;
    let width = net.input_width();
    if q.anchor_input.len() != width || q.anchor_output.len() != net.output_width() {
        return Err(EncodeError::Shape(format!(
            "anchor widths {}/{} for a {width}-input, {}-output network",
            q.anchor_input.len(),
            q.anchor_output.len(),
            net.output_width()
        )));
    }
    if q.radius > width {
        return Err(EncodeError::RadiusTooLarge { radius: q.radius, width });
    }
    let total = width + net.num_neurons() + 1;
    let mut f = Formula::new(total as u32);
    let mut next = 1u32;
    let mut fresh = |n: usize| -> Vec<Var> {
        let vs = (next..next + n as u32).map(Var::new).collect();
        next += n as u32;
        vs
    };
    let inputs = fresh(width);
    let mut layers = Vec::with_capacity(net.layers.len());
    let mut prev = inputs.clone();
    for layer in &net.layers {
        let outs = fresh(layer.weights.len());
        for ((row, &b), &y) in layer.weights.iter().zip(&layer.bias).zip(&outs) {
            push(&mut f, neuron_to_constraint(row, b, &prev, y)?)?;
        }
        layers.push(outs.clone());
        prev = outs;
    }
    let in_ball = fresh(1)[0];
    let matches: Vec<Lit> = inputs.iter().zip(&q.anchor_input).map(|(&v, &bit)| Lit::new(v, !bit)).collect();
    f.add_bnn(matches, (width - q.radius) as i64, in_ball.positive())?;
    f.add_clause(Clause::new(vec![in_ball.positive()]))?;
    let differ: Vec<Lit> = prev.iter().zip(&q.anchor_output).map(|(&v, &bit)| Lit::new(v, bit)).collect();
    f.add_clause(Clause::new(differ))?;
    f.set_sampling_set(inputs.clone())?;
    Ok((f, RobustnessVars { inputs, layers, in_ball }))
}

/// Pure-CNF equivalent of `f`: every BNN constraint becomes a sequential
/// counter whose auxiliary variables are functionally determined, so model
/// counts projected onto the original variables are unchanged. Returns the
/// formula and those original variables; the sampling set is carried over,
/// or set to the original variables when `f` has none.
pub fn encode_cnf(f: &Formula) -> Result<(Formula, Vec<Var>), EncodeError> {
    if !f.xors().is_empty() {
        return Err(EncodeError::HasXors);
    }
    let original: Vec<Var> = (1..=f.num_vars()).map(Var::new).collect();
    if f.bnns().is_empty() {
        return Ok((f.clone(), original));
    }
    let mut clauses: Vec<Vec<Lit>> = Vec::new();
    let mut next = f.num_vars() + 1;
    let top = Var::new(next);
    next += 1;
    clauses.push(vec![top.positive()]);
    for c in f.order() {
        match *c {
            ConstraintRef::Clause(i) => clauses.push(f.clauses()[i].lits.clone()),
            ConstraintRef::Xor(_) => unreachable!(),
            ConstraintRef::Bnn(i) => {
                let b = &f.bnns()[i];
                let (lhs, k) = (b.lhs(), b.cutoff() as usize);
                // prev[j]: at least j of the literals so far are true.
                let mut prev: Vec<Lit> = (0..=k).map(|j| Lit::new(top, j > 0)).collect();
                for (i, &l) in lhs.iter().enumerate() {
                    let mut cur = vec![top.positive()];
                    for j in 1..=k {
                        if j > i + 1 {
                            cur.push(top.negative());
                            continue;
                        }
                        let s = Var::new(next).positive();
                        next += 1;
                        clauses.push(vec![!prev[j], s]);
                        clauses.push(vec![!prev[j - 1], !l, s]);
                        clauses.push(vec![!s, prev[j], prev[j - 1]]);
                        clauses.push(vec![!s, prev[j], l]);
                        cur.push(s);
                    }
                    prev = cur;
                }
                let out = b.output();
                clauses.push(vec![!out, prev[k]]);
                clauses.push(vec![out, !prev[k]]);
            }
        }
    }
    let mut g = Formula::new(next - 1);
    for c in clauses {
        g.add_clause(Clause::new(c))?;
    }
    g.set_sampling_set(f.sampling_set().map_or_else(|| original.clone(), |s| s.to_vec()))?;
    Ok((g, original))
}
