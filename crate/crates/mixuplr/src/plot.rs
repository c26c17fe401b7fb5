//! Decision-boundary grid emission and SVG scatter plots for 2-D datasets.

use std::path::Path;

use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::format::fmt_g6;
use crate::net::{forward, MlpSpec, ParamVector};
use crate::numeric::softmax_unchecked;
use crate::tensor::Tensor;
use crate::trainer::argmax;

/// Grid resolution per axis; the grid CSV always has `GRID_RES^2` rows.
pub const GRID_RES: usize = 200;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Axis-aligned bounding box of 2-D points, inflated by 10% per side.
fn plot_bounds(features: &Tensor) -> Result<([f64; 2], [f64; 2])> {
    if features.n_cols() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: features.n_cols() });
    }
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for r in 0..features.n_rows() {
        for j in 0..2 {
            lo[j] = lo[j].min(features.row(r)[j]);
            hi[j] = hi[j].max(features.row(r)[j]);
        }
    }
    for j in 0..2 {
        let range = hi[j] - lo[j];
        let pad = if range > 0.0 { 0.1 * range } else { 0.5 };
        lo[j] -= pad;
        hi[j] += pad;
    }
    Ok((lo, hi))
}

/// Writes `x,y,argmax,max_prob` for a GRID_RES x GRID_RES lattice over the
/// dataset's inflated bounding box (y-major, x fastest).
pub fn write_decision_grid(
    path: &Path,
    spec: &MlpSpec,
    params: &ParamVector,
    dataset: &Dataset,
) -> Result<()> {
    let (lo, hi) = plot_bounds(&dataset.features)?;
    let coord = |j: usize, i: usize| lo[j] + (hi[j] - lo[j]) * i as f64 / (GRID_RES - 1) as f64;
    let mut rows = Vec::with_capacity(GRID_RES * GRID_RES);
    for iy in 0..GRID_RES {
        for ix in 0..GRID_RES {
            rows.push(vec![coord(0, ix), coord(1, iy)]);
        }
    }
    let grid = Tensor::from_rows(&rows)?;
    let logits = forward(spec, params, &grid)?;
    let mut out = String::with_capacity(GRID_RES * GRID_RES * 32);
    out.push_str("x,y,argmax,max_prob\n");
    for r in 0..grid.n_rows() {
        let p = softmax_unchecked(logits.row(r));
        let class = argmax(&p);
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_g6(grid.row(r)[0]),
            fmt_g6(grid.row(r)[1]),
            class,
            fmt_g6(p[class])
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// SVG scatter of the dataset colored by class; labeled points get a black
/// ring. All coordinates go through the fixed 6-digit formatter, so the file
/// is byte-stable across runs.
pub fn scatter_svg(dataset: &Dataset, labeled_idx: &[usize]) -> Result<String> {
    let (lo, hi) = plot_bounds(&dataset.features)?;
    let size = 640.0;
    let to_px = |p: &[f64]| {
        let x = (p[0] - lo[0]) / (hi[0] - lo[0]) * size;
        // SVG y grows downward
        let y = size - (p[1] - lo[1]) / (hi[1] - lo[1]) * size;
        (x, y)
    };
    let mut labeled = vec![false; dataset.n_points()];
    for &i in labeled_idx {
        if i >= labeled.len() {
            return Err(Error::InvalidArgument(format!("labeled index {i} out of range")));
        }
        labeled[i] = true;
    }
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    for i in 0..dataset.n_points() {
        let (x, y) = to_px(dataset.features.row(i));
        let color = PALETTE[dataset.class_of(i) % PALETTE.len()];
        if labeled[i] {
            svg.push_str(&format!(
                "<circle cx=\"{}\" cy=\"{}\" r=\"7\" fill=\"{color}\" stroke=\"black\" stroke-width=\"2\"/>\n",
                fmt_g6(x),
                fmt_g6(y)
            ));
        } else {
            svg.push_str(&format!(
                "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{color}\" fill-opacity=\"0.6\"/>\n",
                fmt_g6(x),
                fmt_g6(y)
            ));
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn write_scatter_svg(path: &Path, dataset: &Dataset, labeled_idx: &[usize]) -> Result<()> {
    std::fs::write(path, scatter_svg(dataset, labeled_idx)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::make_two_moons;
    use crate::net::{init_params, Activation};
    use crate::rng::RngState;

    #[test]
    fn grid_has_expected_rows_and_matches_direct_forward() {
        let mut rng = RngState::new(1);
        let ds = make_two_moons(40, 0.1, &mut rng).unwrap();
        let spec = MlpSpec::new(vec![2, 8, 2], Activation::Relu).unwrap();
        let params = init_params(&spec, &mut rng);
        let mut path = std::env::temp_dir();
        path.push(format!("mixuplr-grid-{}.csv", std::process::id()));
        write_decision_grid(&path, &spec, &params, &ds).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), GRID_RES * GRID_RES + 1);
        assert_eq!(lines[0], "x,y,argmax,max_prob");
        // spot-check 10 rows against direct forward calls
        for k in 0..10 {
            let line = lines[1 + k * 3571];
            let fields: Vec<&str> = line.split(',').collect();
            let x: f64 = fields[0].parse().unwrap();
            let y: f64 = fields[1].parse().unwrap();
            let class: usize = fields[2].parse().unwrap();
            let logits =
                forward(&spec, &params, &Tensor::from_rows(&[vec![x, y]]).unwrap()).unwrap();
            // parsed coordinates are 6-digit roundings; the class must still
            // match except exactly on a boundary, which the lattice avoids
            assert_eq!(argmax(logits.row(0)), class, "row {line}");
        }
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn svg_is_wellformed_xml() {
        let mut rng = RngState::new(2);
        let ds = make_two_moons(30, 0.1, &mut rng).unwrap();
        let svg = scatter_svg(&ds, &[0, 15]).unwrap();
        let mut reader = quick_xml::Reader::from_str(&svg);
        let mut depth = 0i32;
        loop {
            match reader.read_event().expect("well-formed XML") {
                quick_xml::events::Event::Start(_) => depth += 1,
                quick_xml::events::Event::End(_) => depth -= 1,
                quick_xml::events::Event::Eof => break,
                _ => {}
            }
        }
        assert_eq!(depth, 0);
        assert_eq!(svg.matches("<circle").count(), 30);
        assert_eq!(svg.matches("stroke=\"black\"").count(), 2);
    }

    #[test]
    fn svg_rejects_non_2d() {
        let ds = Dataset::new(
            Tensor::from_rows(&[vec![0.0, 1.0, 2.0]]).unwrap(),
            Tensor::from_rows(&[vec![1.0]]).unwrap(),
        )
        .unwrap();
        assert!(scatter_svg(&ds, &[]).is_err());
    }
}
