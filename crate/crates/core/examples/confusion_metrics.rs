//! Recall, precision and accuracy from a confusion matrix.

use wifi_mode_detect::eval::{fmt_pct, metrics, ConfusionMatrix};
use wifi_mode_detect::TravelMode;

fn main() {
    let cm = ConfusionMatrix::from_counts([[36, 3, 5], [2, 33, 5], [4, 8, 74]]);
    let report = metrics(&cm);
    print!("{cm}");
    for (i, mode) in TravelMode::ALL.iter().enumerate() {
        println!("{mode:<8} recall {:>5} precision {:>5}", fmt_pct(report.recall[i]), fmt_pct(report.precision[i]));
    }
    println!("accuracy {} ({} of {})", fmt_pct(report.accuracy), cm.correct(), cm.total());
}
