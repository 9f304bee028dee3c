//! Times forward and forward+backward passes of the desk presets.

use std::time::Instant;

use devdiet_nn::{BackboneKind, EncoderConfig, HeadKind, Network, Parameterized, Preset, Tensor};

fn main() {
    devdiet_nn::runtime::retain_heap();
    let batch = 64;
    let x = Tensor::new(
        vec![batch, 3, 64, 64],
        (0..batch * 3 * 64 * 64).map(|i| ((i % 97) as f32) / 97.0).collect(),
    );
    for kind in [BackboneKind::ResidualConv, BackboneKind::PatchAttention] {
        let cfg = EncoderConfig::new(kind, Preset::Desk, HeadKind::Projection);
        let mut net = Network::new(&cfg, 0);
        net.features(&x);
        let reps = 5;
        let t = Instant::now();
        for _ in 0..reps {
            net.features(&x);
        }
        let fwd = t.elapsed().as_secs_f64() / reps as f64;
        let t = Instant::now();
        for _ in 0..reps {
            let (y, cache) = net.forward(&x);
            net.backward(&cache, &Tensor::new(y.shape().to_vec(), vec![1e-3; y.numel()]));
        }
        let both = t.elapsed().as_secs_f64() / reps as f64;
        println!(
            "{kind:?}: {} params, forward {:.1} ms, forward+backward {:.1} ms per batch of {batch}",
            net.param_count(),
            fwd * 1e3,
            both * 1e3
        );
    }
}
