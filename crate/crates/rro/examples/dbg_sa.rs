use rro::density::{KdeSpec, Kernel, BandwidthRule};
use rro::markets::{OuStatArbSpec, StatArbPolicy};
use rro::nn::{Mlp, OutputActivation};
use rro::optim::{AdamParams, AdamState, LagrangeState};
use rro::pg::*;
use rro::risk::{DistortionSpec, EmpiricalDistribution, UtilitySpec};
use rro::wasserstein::WassersteinSpec;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let lr: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(0.02);
    let pw: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(0.75);
    let spec = OuStatArbSpec { steps: 64, ..Default::default() };
    let mut net = Mlp::init(&[3, 32, 32, 1], OutputActivation::ScaledTanh(5.0), 10).unwrap();
    net.scale_output_layer(0.1);
    let mut policy = StatArbPolicy::new(net, spec, 2048).unwrap();
    let specs = EstimatorSpecs {
        distortion: DistortionSpec::alpha_beta(0.1, 0.9, pw).unwrap(),
        utility: UtilitySpec::Linear,
        wasserstein: WassersteinSpec::new(2.0, f64::INFINITY).unwrap(),
        kde: KdeSpec { kernel: Kernel::Epanechnikov, bandwidth: BandwidthRule::Silverman },
    };
    let lstate = LagrangeState::standard();
    let mut adam = AdamState::new(AdamParams::with_learning_rate(lr), policy.param_count());
    let mut params = policy.params();
    for i in 0..150 {
        let eval = policy.eval(1000 + i).unwrap();
        let e = EmpiricalDistribution::new(eval.values.clone()).unwrap();
        let rdeu = e.rdeu(&specs.distortion, &specs.utility);
        let s = e.summary(0.1, 0.9).unwrap();
        let tape = eval.tape;
        let batch = SampleBatch::new(eval.values.clone(), eval.values.clone()).unwrap()
            .with_phi_pullback(move |ct, cp| {
                let sum: Vec<f64> = ct.iter().zip(cp.iter()).map(|(a, b)| a + b).collect();
                tape.params(&sum)
            });
        let g = outer_gradient_pieces(&batch, &specs, &lstate, TapeSmoothing::Direct).unwrap();
        if i % 15 == 0 {
            println!("it {i:3} rdeu {rdeu:8.4} cvar {:7.3} ute {:6.3} mean {:7.4}", s.cvar_alpha, s.ute_beta, s.mean);
        }
        adam.step(&mut params, &g.rdeu_term).unwrap();
        policy.set_params(&params).unwrap();
    }
}
