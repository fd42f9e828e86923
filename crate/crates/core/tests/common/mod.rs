//! Independent oracles shared by the integration tests and the acceptance
//! suite. Nothing here calls into the library's numeric code: each oracle
//! recomputes its result from first principles with plain loops.

#![allow(dead_code)]

use kanvision::layers::{
    Activation, ActivationKind, Conv2d, ConvGeometry, Flatten, Formulation, KanConfig, KanConv2d, KanLinear, Layer,
    MaxPool2d, MlpLinear,
};
use kanvision::{Rng, Tensor64};

pub fn random_vec(rng: &mut Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.uniform_range(lo, hi)).collect()
}

pub fn random_tensor(rng: &mut Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor64 {
    let n = shape.iter().product();
    Tensor64::new(shape.to_vec(), random_vec(rng, n, lo, hi)).unwrap()
}

/// Row-major triple loop.
pub fn naive_matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            let mut s = 0.0;
            for p in 0..k {
                s += a[i * k + p] * b[p * n + j];
            }
            c[i * n + j] = s;
        }
    }
    c
}

/// Uniform knots `lo + (i - k) h` for `i in 0..=G+2k`, computed directly.
pub fn oracle_knots(grid: usize, degree: usize, lo: f64, hi: f64) -> Vec<f64> {
    let h = (hi - lo) / grid as f64;
    (0..=grid + 2 * degree)
        .map(|i| lo + (i as f64 - degree as f64) * h)
        .collect()
}

/// Textbook recursive Cox-de Boor definition. Degree-0 pieces are half-open
/// `[t_j, t_{j+1})`; at the right end of the range the left limit is taken
/// instead, using `(t_j, t_{j+1}]`.
pub fn cox_de_boor(knots: &[f64], j: usize, k: usize, x: f64, hi: f64) -> f64 {
    if k == 0 {
        let (a, b) = (knots[j], knots[j + 1]);
        let inside = if x >= hi { a < x && x <= b } else { a <= x && x < b };
        return if inside { 1.0 } else { 0.0 };
    }
    let mut v = 0.0;
    let d1 = knots[j + k] - knots[j];
    if d1 != 0.0 {
        v += (x - knots[j]) / d1 * cox_de_boor(knots, j, k - 1, x, hi);
    }
    let d2 = knots[j + k + 1] - knots[j + 1];
    if d2 != 0.0 {
        v += (knots[j + k + 1] - x) / d2 * cox_de_boor(knots, j + 1, k - 1, x, hi);
    }
    v
}

/// All `G + k` basis values at `x`, clamping to `[lo, hi]` first.
pub fn oracle_basis(grid: usize, degree: usize, lo: f64, hi: f64, x: f64) -> Vec<f64> {
    let knots = oracle_knots(grid, degree, lo, hi);
    let x = x.clamp(lo, hi);
    (0..grid + degree).map(|j| cox_de_boor(&knots, j, degree, x, hi)).collect()
}

pub fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

/// KAN linear forward as a scalar double loop over (output, input) edges:
/// `y[s,o] = sum_i base[o,i] silu(x[s,i]) + sum_q coeffs[o,i,q] B_q(x[s,i])`.
pub fn kan_oracle(
    x: &[f64],
    batch: usize,
    inputs: usize,
    outputs: usize,
    grid: usize,
    degree: usize,
    coeffs: &[f64],
    base: Option<&[f64]>,
) -> Vec<f64> {
    let nb = grid + degree;
    let mut y = vec![0.0; batch * outputs];
    for s in 0..batch {
        for o in 0..outputs {
            let mut acc = 0.0;
            for i in 0..inputs {
                let xi = x[s * inputs + i];
                let phi = oracle_basis(grid, degree, -1.0, 1.0, xi);
                for q in 0..nb {
                    acc += coeffs[(o * inputs + i) * nb + q] * phi[q];
                }
                if let Some(w) = base {
                    acc += w[o * inputs + i] * silu(xi);
                }
            }
            y[s * outputs + o] = acc;
        }
    }
    y
}

/// Direct six-loop cross-correlation, stride 1, no padding.
pub fn conv_oracle(
    x: &[f64],
    batch: usize,
    cin: usize,
    h: usize,
    w: usize,
    weight: &[f64],
    bias: &[f64],
    cout: usize,
    kh: usize,
    kw: usize,
) -> Vec<f64> {
    let (oh, ow) = (h - kh + 1, w - kw + 1);
    let mut y = vec![0.0; batch * cout * oh * ow];
    for s in 0..batch {
        for co in 0..cout {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = bias[co];
                    for ci in 0..cin {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                acc += weight[((co * cin + ci) * kh + ky) * kw + kx]
                                    * x[((s * cin + ci) * h + oy + ky) * w + ox + kx];
                            }
                        }
                    }
                    y[((s * cout + co) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
    y
}

/// Relative error with a small absolute floor so that two values that are
/// both essentially zero compare as equal.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-7)
}

#[derive(Clone, Debug, Default)]
pub struct GradReport {
    pub max_param_rel: f64,
    pub max_input_rel: f64,
    pub checked: usize,
}

/// Central finite-difference check of a layer against the scalar loss
/// `L = sum(r * layer(x))` for a fixed random `r`. Every parameter entry
/// and every input entry is perturbed by `+-step`.
pub fn gradcheck(layer: &mut dyn Layer<f64>, x: &Tensor64, step: f64, seed: u64) -> GradReport {
    let mut rng = Rng::new(seed);
    let y = layer.infer(x).unwrap();
    let r = random_tensor(&mut rng, y.shape(), -1.0, 1.0);
    let loss = |layer: &dyn Layer<f64>, x: &Tensor64| -> f64 {
        let y = layer.infer(x).unwrap();
        y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
    };

    for p in layer.params_mut() {
        p.zero_grad();
    }
    layer.forward(x).unwrap();
    let gx = layer.backward(&r, true).unwrap().expect("input gradient requested");
    let analytic: Vec<Vec<f64>> = layer.params().iter().map(|p| p.grad.data().to_vec()).collect();

    let mut report = GradReport::default();
    for (pi, grads) in analytic.iter().enumerate() {
        for e in 0..grads.len() {
            let orig = layer.params()[pi].value.data()[e];
            layer.params_mut()[pi].value.data_mut()[e] = orig + step;
            let up = loss(layer, x);
            layer.params_mut()[pi].value.data_mut()[e] = orig - step;
            let down = loss(layer, x);
            layer.params_mut()[pi].value.data_mut()[e] = orig;
            let numeric = (up - down) / (2.0 * step);
            report.max_param_rel = report.max_param_rel.max(rel_err(grads[e], numeric));
            report.checked += 1;
        }
    }
    let mut xp = x.clone();
    for e in 0..x.len() {
        let orig = x.data()[e];
        xp.data_mut()[e] = orig + step;
        let up = loss(layer, &xp);
        xp.data_mut()[e] = orig - step;
        let down = loss(layer, &xp);
        xp.data_mut()[e] = orig;
        let numeric = (up - down) / (2.0 * step);
        report.max_input_rel = report.max_input_rel.max(rel_err(gx.data()[e], numeric));
        report.checked += 1;
    }
    report
}

/// Finite-difference check of the softmax cross-entropy gradient; returns
/// the largest relative error.
pub fn softmax_ce_gradcheck(rng: &mut Rng, batch: usize, classes: usize, step: f64) -> f64 {
    let logits = random_tensor(rng, &[batch, classes], -3.0, 3.0);
    let labels: Vec<usize> = (0..batch).map(|_| rng.below(classes)).collect();
    let (_, grad) = kanvision::loss::softmax_cross_entropy(&logits, &labels).unwrap();
    let oracle_loss = |z: &[f64]| -> f64 {
        let mut total = 0.0;
        for s in 0..batch {
            let row = &z[s * classes..(s + 1) * classes];
            let lse = row.iter().map(|v| v.exp()).sum::<f64>().ln();
            total += lse - row[labels[s]];
        }
        total / batch as f64
    };
    let mut z = logits.data().to_vec();
    let mut worst: f64 = 0.0;
    for e in 0..z.len() {
        let orig = z[e];
        z[e] = orig + step;
        let up = oracle_loss(&z);
        z[e] = orig - step;
        let down = oracle_loss(&z);
        z[e] = orig;
        worst = worst.max(rel_err(grad.data()[e], (up - down) / (2.0 * step)));
    }
    worst
}

/// The workspace data cache (or `$KANVISION_CACHE`) when it holds `name`.
/// Tests on real data skip with a note when the files are absent.
pub fn real_cache(name: kanvision::data::DatasetName) -> Option<kanvision::data::DataCache> {
    use kanvision::data::{DataCache, Split};
    let root = std::env::var_os(kanvision::data::CACHE_ENV)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data"));
    let cache = DataCache::new(root);
    if cache.has(name, Split::Train) && cache.has(name, Split::Test) {
        Some(cache)
    } else {
        eprintln!("skipping: {name} is not cached (run `kanvision fetch {name}`)");
        None
    }
}

/// KAN layer with uniform random coefficients (and base weights).
pub fn kan_layer(
    rng: &mut Rng,
    inputs: usize,
    outputs: usize,
    g: usize,
    k: usize,
    base: bool,
    formulation: Formulation,
) -> KanLinear<f64> {
    let nb = g + k;
    let config = KanConfig::new(g, k).with_base(base).with_formulation(formulation);
    let coeffs = random_tensor(rng, &[outputs, inputs, nb], -1.0, 1.0);
    let w = base.then(|| random_tensor(rng, &[outputs, inputs], -1.0, 1.0));
    KanLinear::from_params(config, coeffs, w).unwrap()
}

/// Three random configurations for every layer type.
pub fn gradcheck_cases(seed: u64) -> Vec<(String, Box<dyn Layer<f64>>, Tensor64)> {
    let mut rng = Rng::new(seed);
    let mut cases: Vec<(String, Box<dyn Layer<f64>>, Tensor64)> = Vec::new();
    let b = 2 + rng.below(2);
    let (i, o) = (2 + rng.below(4), 1 + rng.below(4));
    let g = 1 + rng.below(5);
    let k = 1 + rng.below(3);
    for f in [Formulation::Expanded, Formulation::Efficient] {
        for base in [true, false] {
            let layer = kan_layer(&mut rng, i, o, g, k, base, f);
            let mut x = random_tensor(&mut rng, &[b, i], -0.98, 0.98);
            x.data_mut()[0] = 1.4; // clamped region
            cases.push((format!("kan_linear {f:?} base={base} G={g} k={k}"), Box::new(layer), x));
        }
    }
    for act in [None, Some(ActivationKind::Relu), Some(ActivationKind::Sigmoid), Some(ActivationKind::Tanh)] {
        let mut layer = MlpLinear::new(i, o, act, &mut rng).unwrap();
        for p in layer.params_mut() {
            for v in p.value.data_mut() {
                *v = rng.uniform_range(-1.0, 1.0);
            }
        }
        cases.push((format!("mlp_linear {act:?}"), Box::new(layer), random_tensor(&mut rng, &[b, i], -1.0, 1.0)));
    }
    for kind in [
        ActivationKind::Relu,
        ActivationKind::Sigmoid,
        ActivationKind::Tanh,
        ActivationKind::SmoothGatedLinear,
    ] {
        cases.push((
            format!("activation {kind}"),
            Box::new(Activation::new(kind)),
            random_tensor(&mut rng, &[b, 3, 2], -2.0, 2.0),
        ));
    }
    let cin = 1 + rng.below(2);
    let (h, w) = (4 + rng.below(2), 4 + rng.below(3));
    let kernel = 2 + rng.below(2);
    let geometry = ConvGeometry::new([cin, h, w], (kernel, kernel), 1, 0).unwrap();
    let mut conv = Conv2d::new(geometry, 2, &mut rng).unwrap();
    for v in conv.params_mut()[1].value.data_mut() {
        *v = rng.uniform_range(-0.5, 0.5);
    }
    cases.push(("conv2d".into(), Box::new(conv), random_tensor(&mut rng, &[b, cin, h, w], -1.0, 1.0)));
    let padded = ConvGeometry::new([cin, h, w], (3, 3), 1, 1).unwrap();
    cases.push((
        "conv2d padded".into(),
        Box::new(Conv2d::new(padded, 2, &mut rng).unwrap()),
        random_tensor(&mut rng, &[b, cin, h, w], -1.0, 1.0),
    ));
    let kan_kernel = kan_layer(&mut rng, geometry.patch_len(), 2, g, k, true, Formulation::Efficient);
    cases.push((
        format!("kan_conv2d G={g} k={k}"),
        Box::new(KanConv2d::from_kernel(geometry, kan_kernel).unwrap()),
        random_tensor(&mut rng, &[b, cin, h, w], -0.98, 0.98),
    ));
    cases.push((
        "max_pool2d".into(),
        Box::new(MaxPool2d::new(2)),
        random_tensor(&mut rng, &[b, 2, 4, 5], -1.0, 1.0),
    ));
    cases.push(("flatten".into(), Box::new(Flatten::new()), random_tensor(&mut rng, &[b, 2, 3, 2], -1.0, 1.0)));
    cases
}
