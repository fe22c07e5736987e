//! Analytic critic gradients against central differences.
//!
//! cargo run --release --example gradient_check

use minee::distributions::{MixedGaussianModel, ReferenceSampler, UniformBoxReference};
use minee::estimators::{HeadSelection, MiCritic, MiCriticSpec};
use minee::matrix::JointLayout;
use minee::nn::Activation;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = MixedGaussianModel::new(0.9)?.sample(40, 3);
    let reference = UniformBoxReference::from_samples(&data, 0.0)?.sample(200, 4);
    let spec = MiCriticSpec {
        layout: JointLayout::new(1, 1),
        hidden_widths: vec![6, 6],
        activation: Activation::Tanh,
    };
    let mut critic = MiCritic::init(spec, 5);
    let loss = |c: &MiCritic| c.mi_loss_and_gradient(&data, &reference, HeadSelection::All, None);

    let analytic = loss(&critic)?.grad;
    let mut worst = 0.0f64;
    for i in (0..critic.len()).step_by(7) {
        let theta = critic.values()[i];
        let h = 1e-5 * theta.abs().max(1.0);
        critic.values_mut()[i] = theta + h;
        let up = loss(&critic)?.loss;
        critic.values_mut()[i] = theta - h;
        let down = loss(&critic)?.loss;
        critic.values_mut()[i] = theta;
        let fd = (up - down) / (2.0 * h);
        let err = (analytic[i] - fd).abs() / analytic[i].abs().max(fd.abs()).max(1e-6);
        worst = worst.max(err);
        println!("param {i:>3}: analytic {:+.8e}  fd {fd:+.8e}", analytic[i]);
    }
    println!("worst relative error {worst:.2e}");
    Ok(())
}
