//! Properties of standard and noise-aware attention.

use naada_core::attention::{
    forward, nasa_attention, scores, standard_attention, AttentionConfig, AttentionMode, AttentionParams,
};
use naada_core::gradcheck::{check, GradCheckConfig};
use naada_core::layers::LayerParams;
use naada_core::noise_map::noise_map;
use naada_core::rng::seeded;
use naada_core::{Tensor, TensorError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new((0..n).map(|_| rng.random_range(-1.0..1.0)).collect(), shape).unwrap()
}

fn configs(channels: usize, heads: usize) -> (AttentionConfig, AttentionConfig) {
    (
        AttentionConfig::new(channels, heads, AttentionMode::Standard),
        AttentionConfig::new(channels, heads, AttentionMode::NoiseAware),
    )
}

fn max_diff(a: &Tensor, b: &Tensor) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn zero_gamma_reduces_to_standard() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for trial in 0..60 {
        let heads = [1, 2, 4][trial % 3];
        let channels = heads * rng.random_range(1..=4);
        let shape = [
            rng.random_range(1..=2),
            channels,
            rng.random_range(1..=5),
            rng.random_range(1..=5),
        ];
        let (std_cfg, nasa_cfg) = configs(channels, heads);
        let p = AttentionParams::new(&nasa_cfg, &mut seeded(trial as u64)).unwrap();
        let z = random(&shape, &mut rng);
        let psi = noise_map(&z, 3).unwrap();
        let a = standard_attention(&z, &p, &std_cfg).unwrap();
        let b = nasa_attention(&z, &psi, &p, &nasa_cfg).unwrap();
        worst = worst.max(max_diff(&a, &b));
    }
    assert!(worst < 1e-12, "max abs diff {worst}");
}

#[test]
fn zero_noise_map_with_zero_bias_matches_standard() {
    let (std_cfg, nasa_cfg) = configs(8, 2);
    let mut p = AttentionParams::new(&nasa_cfg, &mut seeded(4)).unwrap();
    p.gamma = Tensor::parameter(vec![1.3], &[1]).unwrap();
    let z = Tensor::full(&[1, 8, 5, 5], 0.4);
    let psi = noise_map(&Tensor::zeros(&[1, 8, 5, 5]), 3).unwrap();
    // sqrt(eps) is 1e-6, so the noise term is only close to zero.
    let a = standard_attention(&z, &p, &std_cfg).unwrap();
    let b = nasa_attention(&z, &psi, &p, &nasa_cfg).unwrap();
    assert!(max_diff(&a, &b) < 1e-9);
}

#[test]
fn identical_tokens_get_identical_outputs() {
    let (cfg, _) = configs(4, 2);
    let p = AttentionParams::new(&cfg, &mut seeded(5)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let token = random(&[4], &mut rng);
    // Layout [1, 4, 1, 2]: both tokens carry the same channel vector.
    let data: Vec<f64> = token.data().iter().flat_map(|&v| [v, v]).collect();
    let z = Tensor::new(data, &[1, 4, 1, 2]).unwrap();
    let out = standard_attention(&z, &p, &cfg).unwrap();
    for pair in out.data().chunks(2) {
        assert!((pair[0] - pair[1]).abs() < 1e-12);
    }
}

#[test]
fn spatial_permutation_is_equivariant() {
    let (_, mut cfg) = configs(8, 4);
    // A 1 x 6 strip has no interior for the noise map's padding to break.
    cfg.noise_window = 1;
    let mut p = AttentionParams::new(&cfg, &mut seeded(6)).unwrap();
    p.gamma = Tensor::parameter(vec![0.8], &[1]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let z = random(&[1, 8, 1, 6], &mut rng);
    let perm = [3, 0, 5, 1, 4, 2];
    let permute = |t: &Tensor| {
        let mut out = vec![0.0; t.numel()];
        for c in 0..8 {
            for (i, &src) in perm.iter().enumerate() {
                out[c * 6 + i] = t.data()[c * 6 + src];
            }
        }
        Tensor::new(out, t.shape()).unwrap()
    };
    let psi = noise_map(&z, 1).unwrap();
    let psi_p = noise_map(&permute(&z), 1).unwrap();
    let a = permute(&nasa_attention(&z, &psi, &p, &cfg).unwrap());
    let b = nasa_attention(&permute(&z), &psi_p, &p, &cfg).unwrap();
    assert!(max_diff(&a, &b) < 1e-12);
}

#[test]
fn score_gap_is_gamma_times_noise_scores() {
    let (_, cfg) = configs(8, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let z = random(&[1, 8, 4, 4], &mut rng);
    let psi = noise_map(&z, 3).unwrap();
    for gamma in [0.0, 0.25, -1.5, 3.0] {
        let mut p = AttentionParams::new(&cfg, &mut seeded(7)).unwrap();
        p.gamma = Tensor::parameter(vec![gamma], &[1]).unwrap();
        let s = scores(&z, Some(&psi), &p, &cfg).unwrap();
        let noise = s.noise.unwrap();
        let fused = s.standard.add(&noise.scale_along(&p.gamma, 1).unwrap()).unwrap();
        let gap: f64 = fused
            .data()
            .iter()
            .zip(s.standard.data())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let norm: f64 = noise.data().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((gap - gamma.abs() * norm).abs() < 1e-9 * (1.0 + norm));
    }
}

#[test]
fn weights_change_with_gamma() {
    let (_, cfg) = configs(8, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let z = random(&[1, 8, 4, 4], &mut rng);
    let mut p = AttentionParams::new(&cfg, &mut seeded(8)).unwrap();
    let w0 = forward(&z, &p, &cfg).unwrap().weights;
    p.gamma = Tensor::parameter(vec![2.0], &[1]).unwrap();
    let w1 = forward(&z, &p, &cfg).unwrap().weights;
    assert!(max_diff(&w0, &w1) > 1e-6);
}

fn block_inputs(p: &AttentionParams, z: &Tensor) -> Vec<Tensor> {
    let mut v = vec![z.clone()];
    for l in [&p.q_proj, &p.k_proj, &p.v_proj, &p.noise_q_proj, &p.out_proj] {
        v.push(l.weight.clone());
        v.push(l.bias.clone());
    }
    v.push(p.gamma.clone());
    v
}

fn rebuild(template: &AttentionParams, x: &[Tensor]) -> AttentionParams {
    let set = |l: &LayerParams, i: usize| LayerParams {
        weight: x[i].clone(),
        bias: x[i + 1].clone(),
        ..l.clone()
    };
    AttentionParams {
        q_proj: set(&template.q_proj, 1),
        k_proj: set(&template.k_proj, 3),
        v_proj: set(&template.v_proj, 5),
        noise_q_proj: set(&template.noise_q_proj, 7),
        out_proj: set(&template.out_proj, 9),
        gamma: x[11].clone(),
    }
}

fn gradcheck_block(cfg: &AttentionConfig, gamma: Vec<f64>, shape: &[usize], seed: u64, max_probes: Option<usize>) {
    let mut p = AttentionParams::new(cfg, &mut seeded(seed)).unwrap();
    p.gamma = Tensor::parameter(gamma.clone(), &[gamma.len()]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = random(shape, &mut rng);
    let inputs = block_inputs(&p, &z);
    let f = |x: &[Tensor]| -> Result<Tensor, TensorError> {
        let params = rebuild(&p, x);
        forward(&x[0], &params, cfg).map(|o| o.output).map_err(|e| match e {
            naada_core::Error::Tensor(t) => t,
            other => panic!("{other}"),
        })
    };
    let gc = GradCheckConfig {
        max_probes,
        ..GradCheckConfig::default()
    };
    let report = check(&inputs, f, &gc).unwrap();
    assert!(report.passed(), "{report:?}");
}

#[test]
fn full_block_gradients_noise_aware() {
    let (_, cfg) = configs(8, 2);
    gradcheck_block(&cfg, vec![0.6], &[2, 8, 3, 3], 9, None);
}

#[test]
fn full_block_gradients_per_head_gamma() {
    let (_, mut cfg) = configs(8, 4);
    cfg.per_head_gamma = true;
    gradcheck_block(&cfg, vec![0.6, -0.4, 1.1, 0.0], &[1, 8, 3, 4], 10, None);
}

#[test]
fn full_block_gradients_standard() {
    let (cfg, _) = configs(8, 2);
    gradcheck_block(&cfg, vec![0.0], &[2, 8, 3, 3], 11, None);
}

#[test]
fn gamma_gradient_on_sixteen_channels() {
    let (_, cfg) = configs(16, 8);
    // Probe every entry of z, gamma and a sample of each projection.
    gradcheck_block(&cfg, vec![0.3], &[1, 16, 6, 6], 12, Some(64));
}
