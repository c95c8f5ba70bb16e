//! Average accuracy and both forgetting conventions on a small matrix.

use regime_lab::metrics::{average_accuracy, average_forgetting, AccuracyMatrix, ForgettingConvention};

fn main() -> regime_lab::Result<()> {
    // row t: accuracy on tasks 0..=t after training task t
    let m = AccuracyMatrix::from_rows(vec![
        vec![0.95],
        vec![0.80, 0.93],
        vec![0.85, 0.96, 0.97],
    ])?;
    println!("average accuracy = {:.4}", average_accuracy(&m)?);
    for conv in [ForgettingConvention::AsWritten, ForgettingConvention::PeakBeforeFinal] {
        println!("forgetting, {conv:?} = {:.4}", average_forgetting(&m, conv)?);
    }
    Ok(())
}
