use std::path::Path;

use plotters::prelude::*;

use crate::error::CliError;

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            name: name.into(),
            points,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

pub struct Axes<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub x_scale: Scale,
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 * lo.abs().max(1.0) };
    (lo - pad, hi + pad)
}

/// Writes an SVG with one line per series.
pub fn line_plot(path: &Path, axes: &Axes, series: &[Series]) -> Result<(), CliError> {
    let err = |e: &dyn std::fmt::Display| CliError::Plot(format!("{}: {e}", path.display()));
    let all = || series.iter().flat_map(|s| s.points.iter());
    let (y0, y1) = bounds(all().map(|p| p.1));
    let root = SVGBackend::new(path, (800, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| err(&e))?;
    let palette = |k: usize| Palette99::pick(k).to_rgba();

    macro_rules! draw {
        ($chart:expr) => {{
            let mut chart = $chart;
            chart
                .configure_mesh()
                .x_desc(axes.x_label)
                .y_desc(axes.y_label)
                .draw()
                .map_err(|e| err(&e))?;
            for (k, s) in series.iter().enumerate() {
                let color = palette(k);
                chart
                    .draw_series(LineSeries::new(s.points.iter().copied(), color.stroke_width(2)))
                    .map_err(|e| err(&e))?
                    .label(s.name.as_str())
                    .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
            }
            chart
                .configure_series_labels()
                .background_style(WHITE.mix(0.8))
                .border_style(BLACK)
                .draw()
                .map_err(|e| err(&e))?;
        }};
    }

    let mut builder = ChartBuilder::on(&root);
    builder
        .caption(axes.title, ("sans-serif", 22))
        .margin(15)
        .x_label_area_size(45)
        .y_label_area_size(70);
    match axes.x_scale {
        Scale::Linear => {
            let (x0, x1) = bounds(all().map(|p| p.0));
            draw!(builder.build_cartesian_2d(x0..x1, y0..y1).map_err(|e| err(&e))?);
        }
        Scale::Log => {
            let (x0, x1) = all()
                .map(|p| p.0)
                .filter(|x| *x > 0.0)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            if !x0.is_finite() {
                return Err(CliError::Plot("no positive abscissae for a log axis".into()));
            }
            draw!(builder
                .build_cartesian_2d((0.8 * x0..1.25 * x1).log_scale(), y0..y1)
                .map_err(|e| err(&e))?);
        }
    }
    root.present().map_err(|e| err(&e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_pad_and_skip_non_finite() {
        let (lo, hi) = bounds([0.0, f64::NAN, 10.0].into_iter());
        assert_eq!((lo, hi), (-0.5, 10.5));
        assert_eq!(bounds(std::iter::empty()), (0.0, 1.0));
        let (lo, hi) = bounds([2.0].into_iter());
        assert!(lo < 2.0 && hi > 2.0);
    }

    #[test]
    fn writes_an_svg() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.svg");
        let axes = Axes {
            title: "t",
            x_label: "x",
            y_label: "y",
            x_scale: Scale::Log,
        };
        line_plot(&path, &axes, &[Series::new("a", vec![(1.0, 1.0), (10.0, 2.0)])]).unwrap();
        assert!(std::fs::read_to_string(&path).unwrap().starts_with("<svg"));
    }
}
