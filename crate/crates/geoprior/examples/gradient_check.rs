//! Check the hand-written backward pass against finite differences.
//!
//! The training objective is differentiated by a small recording tape rather
//! than a general autodiff engine, so this check is the core correctness
//! argument: for every variant of the model, analytic gradients must match
//! central finite differences at 64-bit precision.
//!
//! ```bash
//! cargo run --release --example gradient_check
//! ```

use geoprior::encoder::{SpatioTemporalPoint, VariantFlags};
use geoprior::loss::{example_loss, example_loss_and_grad, DropoutMasks, TrainingExample};
use geoprior::model::{ModelParams, ModelShape};
use geoprior::numcore::Gradients;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> geoprior::Result<()> {
    let h = 1e-6;
    println!("variant flags (date/photographer/wrap) -> worst relative error\n");
    for bits in 0..8u8 {
        let variants = VariantFlags {
            use_date: bits & 1 != 0,
            use_photographer: bits & 2 != 0,
            use_wrap: bits & 4 != 0,
        };
        let shape = ModelShape {
            embed_dim: 8,
            blocks: 2,
            categories: 5,
            photographers: 3,
            variants,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + bits as u64);
        let model = ModelParams::init(shape, &mut rng)?;
        let example = TrainingExample {
            point: SpatioTemporalPoint::new(40.0, -25.0, 0.6)?,
            category: 2,
            photographer: variants.use_photographer.then_some(1),
            negative: SpatioTemporalPoint::new(-140.0, 55.0, 0.1)?,
        };
        let lambda = 5.0;
        let masks = DropoutMasks::sample(2, 8, 0.5, &mut rng);

        let mut grads = Gradients::zeros_like(model.params());
        let value =
            example_loss_and_grad(&model, &example, lambda, Some(&masks), 1.0, &mut grads)?;

        let mut worst: f64 = 0.0;
        let total = model.params().total_len();
        for idx in 0..total {
            let mut plus = model.clone();
            plus.params_mut().flat_add(idx, h);
            let mut minus = model.clone();
            minus.params_mut().flat_add(idx, -h);
            let fd = (example_loss(&plus, &example, lambda, Some(&masks))?
                - example_loss(&minus, &example, lambda, Some(&masks))?)
                / (2.0 * h);
            let analytic = grads.flat_get(idx);
            // denominator floor 1e-3: below that magnitude the central
            // difference's own roundoff (~|loss|*eps/h) dominates
            let rel = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-3);
            worst = worst.max(rel);
        }
        println!(
            "  date={} photographer={} wrap={}  objective {value:+.4}  {total} params  worst {worst:.2e}",
            variants.use_date as u8, variants.use_photographer as u8, variants.use_wrap as u8
        );
    }
    println!("\n(every coordinate checked; anything above 1e-5 would be a bug)");
    Ok(())
}
