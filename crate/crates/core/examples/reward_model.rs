//! Bradley-Terry reward model: trains on critic-ranked segment pairs from
//! the kitchen and reports held-out pairwise accuracy.
//!
//! cargo run --release --example reward_model

use closedloop::critic::{bt_loss, build_preference_pairs, rm_train, PairSource, RmTrainConfig};
use closedloop::microworld::DomainSpec;
use closedloop::numerics::RandomSource;

fn main() -> closedloop::Result<()> {
    let k = DomainSpec::kitchen();
    let mut rng = RandomSource::new(4, 0);
    let pairs = build_preference_pairs(&k, 1000, &mut rng)?;
    let negatives = pairs.iter().filter(|p| p.source == PairSource::SemanticNegative).count();
    println!("{} pairs: {} quality rankings, {negatives} wrong-step negatives", pairs.len(), pairs.len() - negatives);
    println!("loss of a tie: {:.6} (ln 2 = {:.6})", bt_loss(0.3, 0.3), std::f64::consts::LN_2);

    let report = rm_train(&pairs, &RmTrainConfig::default(), &mut rng)?;
    let l = &report.epoch_losses;
    println!("training loss {:.4} -> {:.4}", l[0], l[l.len() - 1]);
    println!("train accuracy {:.3}, held-out accuracy {:.3}", report.train_accuracy, report.holdout_accuracy.unwrap_or(f64::NAN));
    Ok(())
}
