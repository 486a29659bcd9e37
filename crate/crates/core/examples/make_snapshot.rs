//! Regenerates `data/uk_pork_2015_2019.csv`: a synthetic stand-in for the
//! UK pig-sector series, simulated from the published posterior means with
//! herd values only in the June and December survey months.
//!
//! cargo run -p foodsys-core --example make_snapshot > crates/core/data/uk_pork_2015_2019.csv

use foodsys::data::{write_csv, Dataset, SeriesKind};
use foodsys::inference::{synthetic_dataset, HerdSampling, SyntheticSpec};
use foodsys::integrator::IntegratorConfig;

fn rounded(cells: &[Option<f64>], decimals: i32) -> Vec<Option<f64>> {
    let unit = 10f64.powi(-decimals);
    let places = decimals.max(0) as usize;
    cells
        .iter()
        .map(|c| c.map(|v| format!("{:.places$}", (v / unit).round() * unit).parse().unwrap()))
        .collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut spec = SyntheticSpec::uk_reference(0.05, 20150101);
    spec.herd_sampling = HerdSampling::Survey;
    spec.noise = [0.03, 0.05, 0.08, 0.06, 0.04];
    let raw = synthetic_dataset(&spec, &IntegratorConfig::default())?;
    let data = Dataset::new(
        raw.start(),
        rounded(raw.series(SeriesKind::Herd), 0),
        rounded(raw.series(SeriesKind::Production), -3),
        rounded(raw.series(SeriesKind::Imports), -3),
        rounded(raw.series(SeriesKind::Exports), -3),
        rounded(raw.series(SeriesKind::Price), 2),
    )?;
    write_csv(&data, std::io::stdout().lock())?;
    Ok(())
}
