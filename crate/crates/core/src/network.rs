//! Network descriptions: the text file format, validation, a direct
//! layer-by-layer evaluator, and translation into [`CatFunc`].
//!
//! File format (whitespace separated, `#` starts a comment):
//!
//! ```text
//! input_dim: 2
//! dense 3 2        # rows (outputs) then cols (inputs)
//! 1 0
//! 0 1
//! 1 1              # row-major weights ...
//! 0 0 -0.5         # ... then the bias
//! relu
//! maxpool 3
//! ```

use nalgebra::{DMatrix, DVector};

use crate::cat::{Atom, CatFunc, Guard};
use crate::error::{check_dim, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    Dense {
        weights: DMatrix<f64>,
        bias: DVector<f64>,
    },
    Relu,
    /// Max over contiguous windows of `window` coordinates.
    MaxPool { window: usize },
}

impl Layer {
    pub fn dense(rows: usize, cols: usize, weights: &[f64], bias: &[f64]) -> Result<Layer> {
        check_dim("dense weights", rows * cols, weights.len())?;
        check_dim("dense bias", rows, bias.len())?;
        Ok(Layer::Dense {
            weights: DMatrix::from_row_slice(rows, cols, weights),
            bias: DVector::from_column_slice(bias),
        })
    }

    /// Output dimension for a given input dimension, if they chain.
    fn output_dim(&self, input_dim: usize) -> std::result::Result<usize, String> {
        match self {
            Layer::Dense { weights, .. } => {
                if weights.ncols() == input_dim {
                    Ok(weights.nrows())
                } else {
                    Err(format!(
                        "dense layer expects {} inputs but receives {}",
                        weights.ncols(),
                        input_dim
                    ))
                }
            }
            Layer::Relu => Ok(input_dim),
            Layer::MaxPool { window } => {
                if *window == 0 {
                    Err("maxpool window must be positive".into())
                } else if !input_dim.is_multiple_of(*window) {
                    Err(format!(
                        "maxpool window {window} does not divide input dimension {input_dim}"
                    ))
                } else {
                    Ok(input_dim / window)
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkSpec {
    input_dim: usize,
    layers: Vec<Layer>,
    output_dim: usize,
}

impl NetworkSpec {
    pub fn new(input_dim: usize, layers: Vec<Layer>) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::Validation {
                layer: 0,
                message: "input_dim must be positive".into(),
            });
        }
        let mut dim = input_dim;
        for (i, layer) in layers.iter().enumerate() {
            if let Layer::Dense { weights, bias } = layer {
                if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
                    return Err(Error::Validation {
                        layer: i,
                        message: "non-finite parameter".into(),
                    });
                }
            }
            dim = layer
                .output_dim(dim)
                .map_err(|message| Error::Validation { layer: i, message })?;
            if dim == 0 {
                return Err(Error::Validation {
                    layer: i,
                    message: "layer has no outputs".into(),
                });
            }
        }
        Ok(Self {
            input_dim,
            layers,
            output_dim: dim,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Reference evaluation, layer by layer, without going through CAT.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("network input", self.input_dim, x.len())?;
        let mut v = x.to_vec();
        for layer in &self.layers {
            v = match layer {
                Layer::Dense { weights, bias } => (0..weights.nrows())
                    .map(|r| {
                        let mut acc = 0.0;
                        for (c, xc) in v.iter().enumerate() {
                            acc += weights[(r, c)] * xc;
                        }
                        acc + bias[r]
                    })
                    .collect(),
                Layer::Relu => v.iter().map(|a| a.max(0.0)).collect(),
                Layer::MaxPool { window } => v
                    .chunks(*window)
                    .map(|w| w.iter().copied().fold(f64::NEG_INFINITY, f64::max))
                    .collect(),
            };
        }
        Ok(v)
    }

    /// Translates the network into a CAT function computing the same map.
    ///
    /// Dense layers become affine nodes. A ReLU over `d` coordinates becomes
    /// `d` composed two-way cases nodes, one per coordinate. A maxpool becomes
    /// one cases node per window, each selecting the window's argmax with
    /// ties going to the lowest index.
    pub fn to_cat(&self) -> CatFunc {
        let mut stages = Vec::new();
        let mut dim = self.input_dim;
        for layer in &self.layers {
            match layer {
                Layer::Dense { weights, bias } => {
                    stages.push(
                        CatFunc::affine(weights.clone(), bias.clone())
                            .expect("validated dense layer"),
                    );
                    dim = weights.nrows();
                }
                Layer::Relu => stages.extend((0..dim).map(|i| relu_at(dim, i))),
                Layer::MaxPool { window } => {
                    let windows = dim / window;
                    if *window > 1 {
                        stages.extend((0..windows).map(|t| maxpool_window(t, windows, *window)));
                    }
                    dim = windows;
                }
            }
        }
        CatFunc::chain(self.input_dim, stages).expect("validated network chains")
    }

    /// Writes the network in the text file format.
    pub fn to_text(&self) -> String {
        let mut out = format!("input_dim: {}\n", self.input_dim);
        for layer in &self.layers {
            match layer {
                Layer::Dense { weights, bias } => {
                    out.push_str(&format!("dense {} {}\n", weights.nrows(), weights.ncols()));
                    for r in 0..weights.nrows() {
                        let row: Vec<String> =
                            (0..weights.ncols()).map(|c| weights[(r, c)].to_string()).collect();
                        out.push_str(&row.join(" "));
                        out.push('\n');
                    }
                    let b: Vec<String> = bias.iter().map(|v| v.to_string()).collect();
                    out.push_str(&b.join(" "));
                    out.push('\n');
                }
                Layer::Relu => out.push_str("relu\n"),
                Layer::MaxPool { window } => out.push_str(&format!("maxpool {window}\n")),
            }
        }
        out
    }
}

/// `x ↦ x` with coordinate `i` replaced by `max(x_i, 0)`.
fn relu_at(dim: usize, i: usize) -> CatFunc {
    let mut zeroed = DMatrix::identity(dim, dim);
    zeroed[(i, i)] = 0.0;
    CatFunc::cases(vec![
        (Guard::new(vec![Atom::NonNeg(i)]), CatFunc::identity(dim)),
        (
            Guard::new(vec![Atom::Neg(i)]),
            CatFunc::affine(zeroed, DVector::zeros(dim)).expect("square"),
        ),
    ])
    .expect("well-formed relu node")
}

/// Cases node for window `t` of `windows`. Its input holds `t` already pooled
/// values followed by the raw coordinates of windows `t..`; it replaces
/// window `t` by its maximum.
fn maxpool_window(t: usize, windows: usize, window: usize) -> CatFunc {
    let in_dim = t + (windows - t) * window;
    let out_dim = in_dim - window + 1;
    let branches = (0..window)
        .map(|j| {
            let atoms = (0..window)
                .filter(|&k| k != j)
                .map(|k| {
                    if k > j {
                        Atom::Ge(t + j, t + k)
                    } else {
                        Atom::Gt(t + j, t + k)
                    }
                })
                .collect();
            let mut w = DMatrix::zeros(out_dim, in_dim);
            for r in 0..t {
                w[(r, r)] = 1.0;
            }
            w[(t, t + j)] = 1.0;
            for r in t + 1..out_dim {
                w[(r, r + window - 1)] = 1.0;
            }
            (
                Guard::new(atoms),
                CatFunc::affine(w, DVector::zeros(out_dim)).expect("consistent shape"),
            )
        })
        .collect();
    CatFunc::cases(branches).expect("well-formed maxpool node")
}

struct Tokens<'a> {
    items: Vec<(usize, &'a str)>,
    pos: usize,
    last_line: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let items = text
            .lines()
            .enumerate()
            .flat_map(|(n, line)| {
                let content = line.split('#').next().unwrap_or("");
                content.split_whitespace().map(move |t| (n + 1, t))
            })
            .collect::<Vec<_>>();
        let last_line = text.lines().count().max(1);
        Self {
            items,
            pos: 0,
            last_line,
        }
    }

    fn line(&self) -> usize {
        self.items.get(self.pos).map_or(self.last_line, |(l, _)| *l)
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        let line = self.line();
        let item = self.items.get(self.pos).copied().ok_or_else(|| Error::Parse {
            line,
            message: format!("unexpected end of file, expected {what}"),
        })?;
        self.pos += 1;
        Ok(item)
    }

    fn usize(&mut self, what: &str) -> Result<usize> {
        let (line, tok) = self.next(what)?;
        tok.parse().map_err(|_| Error::Parse {
            line,
            message: format!("expected {what} (non-negative integer), found `{tok}`"),
        })
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        let (line, tok) = self.next(what)?;
        tok.parse().map_err(|_| Error::Parse {
            line,
            message: format!("expected {what} (number), found `{tok}`"),
        })
    }

    fn done(&self) -> bool {
        self.pos >= self.items.len()
    }
}

/// Parses and validates a network file.
pub fn parse_network(bytes: &[u8]) -> Result<NetworkSpec> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse {
        line: 1 + bytes[..e.valid_up_to()].iter().filter(|b| **b == b'\n').count(),
        message: "file is not valid UTF-8".into(),
    })?;
    let mut toks = Tokens::new(text);

    let (line, head) = toks.next("`input_dim:` header")?;
    let input_dim = match head {
        "input_dim:" => toks.usize("input dimension")?,
        _ => match head.strip_prefix("input_dim:") {
            Some(rest) if !rest.is_empty() => rest.parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad input dimension `{rest}`"),
            })?,
            _ => {
                return Err(Error::Parse {
                    line,
                    message: format!("expected `input_dim:` header, found `{head}`"),
                })
            }
        },
    };

    let mut layers = Vec::new();
    while !toks.done() {
        let (line, kw) = toks.next("layer keyword")?;
        let layer = match kw {
            "dense" => {
                let rows = toks.usize("dense row count")?;
                let cols = toks.usize("dense column count")?;
                let weights = (0..rows * cols)
                    .map(|_| toks.f64("weight"))
                    .collect::<Result<Vec<_>>>()?;
                let bias = (0..rows)
                    .map(|_| toks.f64("bias"))
                    .collect::<Result<Vec<_>>>()?;
                Layer::dense(rows, cols, &weights, &bias)?
            }
            "relu" => Layer::Relu,
            "maxpool" => Layer::MaxPool {
                window: toks.usize("maxpool window")?,
            },
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("unknown layer `{other}`"),
                })
            }
        };
        layers.push(layer);
    }
    NetworkSpec::new(input_dim, layers)
}
