use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::ModelConfig;
use crate::autodiff::{ParamSet, Tensor};
use crate::corpus::LabelCategory;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Init {
    Xavier,
    Zero,
    Const(f64),
    /// LSTM bias: zero except the forget-gate block.
    LstmBias,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub(crate) init: Init,
}

fn spec(name: impl Into<String>, shape: &[usize], init: Init) -> ParamSpec {
    ParamSpec {
        name: name.into(),
        shape: shape.to_vec(),
        init,
    }
}

/// Initial raw value whose softplus is exactly 1.
pub(crate) fn epsilon_raw_init() -> f64 {
    (std::f64::consts::E - 1.0).ln()
}

fn lstm(out: &mut Vec<ParamSpec>, prefix: &str, input: usize, hidden: usize) {
    out.push(spec(
        format!("{prefix}.wx"),
        &[input, 4 * hidden],
        Init::Xavier,
    ));
    out.push(spec(
        format!("{prefix}.wh"),
        &[hidden, 4 * hidden],
        Init::Xavier,
    ));
    out.push(spec(format!("{prefix}.b"), &[4 * hidden], Init::LstmBias));
}

/// Every parameter of the configured architecture with its shape.
///
/// Matrices multiply row vectors from the right (`x · W`), so a weight
/// mapping `n_in` to `n_out` units has shape `[n_in, n_out]`.
pub fn param_specs(cfg: &ModelConfig) -> Vec<ParamSpec> {
    let (d, h, sd) = (cfg.word_dim, cfg.hidden_dim, cfg.struct_dim);
    let mem = cfg.memory_width();
    let mut out = vec![spec("embed.word", &[cfg.v_in, d], Init::Xavier)];
    if !cfg.share_embeddings {
        out.push(spec("embed.target", &[cfg.v_in, d], Init::Xavier));
    }
    if cfg.architecture.uses_structure() {
        for cat in LabelCategory::ALL {
            out.push(spec(
                format!("struct.{}", cat.name()),
                &[cfg.label_sizes[cat.index()], sd],
                Init::Xavier,
            ));
        }
    }
    lstm(&mut out, "enc.l1.fwd", cfg.encoder_input_width(), h);
    lstm(&mut out, "enc.l1.bwd", cfg.encoder_input_width(), h);
    lstm(&mut out, "enc.l2.fwd", 2 * h, h);
    lstm(&mut out, "enc.l2.bwd", 2 * h, h);
    out.push(spec("bridge.w", &[mem, h], Init::Xavier));
    out.push(spec("bridge.b", &[h], Init::Zero));
    lstm(&mut out, "dec", d, h);
    out.push(spec("attn.w_dec", &[h, h], Init::Xavier));
    out.push(spec("attn.w_enc", &[mem, h], Init::Xavier));
    out.push(spec("attn.b", &[h], Init::Zero));
    out.push(spec("attn.v", &[h], Init::Xavier));
    out.push(spec("out.w_h", &[h + mem, h], Init::Xavier));
    out.push(spec("out.b_h", &[h], Init::Zero));
    out.push(spec("out.w_y", &[h, cfg.v_out], Init::Xavier));
    out.push(spec("out.b_y", &[cfg.v_out], Init::Zero));
    if cfg.copy {
        out.push(spec("switch.w", &[h + mem + d], Init::Xavier));
        out.push(spec("switch.b", &[1], Init::Zero));
    }
    if cfg.architecture.is_two_way() {
        out.push(spec(
            "sattn.w_g",
            &[cfg.structural_key_width(), h],
            Init::Xavier,
        ));
        out.push(spec("sattn.w_dec", &[h, h], Init::Xavier));
        out.push(spec("sattn.b", &[h], Init::Zero));
        out.push(spec("sattn.u", &[h], Init::Xavier));
        if cfg.fixed_epsilon.is_none() {
            out.push(spec("eps.raw", &[1], Init::Const(epsilon_raw_init())));
        }
    }
    out
}

/// Gaussian Xavier initialisation with `σ = sqrt(2 / (n_in + n_out))`;
/// vectors count as `[n, 1]` matrices.
pub fn init_params(cfg: &ModelConfig, seed: u64) -> Result<ParamSet> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ps = ParamSet::new();
    for s in param_specs(cfg) {
        let n: usize = s.shape.iter().product();
        let data = match s.init {
            Init::Zero => vec![0.0; n],
            Init::Const(v) => vec![v; n],
            Init::LstmBias => {
                let h = n / 4;
                (0..n)
                    .map(|i| if (h..2 * h).contains(&i) { 1.0 } else { 0.0 })
                    .collect()
            }
            Init::Xavier => {
                let (fan_in, fan_out) = match s.shape[..] {
                    [a, b] => (a, b),
                    [a] => (a, 1),
                    _ => unreachable!(),
                };
                let sigma = (2.0 / (fan_in + fan_out) as f64).sqrt();
                let normal = Normal::new(0.0, sigma).expect("positive sigma");
                (0..n).map(|_| normal.sample(&mut rng)).collect()
            }
        };
        ps.insert(s.name, Tensor::new(s.shape, data)?);
    }
    Ok(ps)
}

/// Checks that `params` holds exactly the expected names and shapes.
pub fn audit_shapes(cfg: &ModelConfig, params: &ParamSet) -> Result<()> {
    let specs = param_specs(cfg);
    for s in &specs {
        let t = params
            .by_name(&s.name)
            .ok_or_else(|| Error::Model(format!("missing parameter `{}`", s.name)))?;
        if t.shape() != s.shape.as_slice() {
            return Err(Error::Model(format!(
                "parameter `{}` has shape {:?}, expected {:?}",
                s.name,
                t.shape(),
                s.shape
            )));
        }
    }
    if params.len() != specs.len() {
        let extra: Vec<&str> = params
            .iter()
            .map(|(n, _)| n)
            .filter(|n| !specs.iter().any(|s| s.name == *n))
            .collect();
        return Err(Error::Model(format!(
            "unexpected parameters for {}: {extra:?}",
            cfg.architecture
        )));
    }
    Ok(())
}
