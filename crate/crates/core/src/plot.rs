//! Scatter and trajectory figures as standalone SVG files: a fixed viewBox,
//! one circle per sample, optional mode-center crosses, optional polyline
//! trajectories, plus the coordinate axes.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::atomic_write;

#[derive(Clone, Copy, Debug)]
pub struct PlotStyle {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub size_px: u32,
    pub point_radius: f64,
}

impl Default for PlotStyle {
    fn default() -> Self {
        PlotStyle { x_range: (-6.0, 6.0), y_range: (-6.0, 6.0), size_px: 800, point_radius: 2.0 }
    }
}

impl PlotStyle {
    fn to_px(&self, p: [f64; 2]) -> (f64, f64) {
        let s = self.size_px as f64;
        let x = (p[0] - self.x_range.0) / (self.x_range.1 - self.x_range.0) * s;
        // SVG y grows downward
        let y = (self.y_range.1 - p[1]) / (self.y_range.1 - self.y_range.0) * s;
        (x, y)
    }

    fn validate(&self) -> Result<()> {
        if self.x_range.0 >= self.x_range.1 || self.y_range.0 >= self.y_range.1 || self.size_px == 0
        {
            return Err(Error::InvalidParameter("bad plot ranges".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct PlotContent<'a> {
    pub samples: &'a [[f64; 2]],
    pub centers: Option<&'a [[f64; 2]]>,
    pub trajectories: Option<&'a [Vec<[f64; 2]>]>,
}

pub fn render_svg(content: &PlotContent, style: &PlotStyle) -> Result<String> {
    style.validate()?;
    let s = style.size_px;
    let mut svg = String::with_capacity(128 + 64 * content.samples.len());
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {s} {s}" width="{s}" height="{s}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{s}" height="{s}" fill="white"/>"#);

    // axes at x = 0 and y = 0
    let (ox, oy) = style.to_px([0.0, 0.0]);
    let _ = writeln!(
        svg,
        r##"<line x1="0" y1="{oy:.2}" x2="{s}" y2="{oy:.2}" stroke="#cccccc" stroke-width="1"/>"##
    );
    let _ = writeln!(
        svg,
        r##"<line x1="{ox:.2}" y1="0" x2="{ox:.2}" y2="{s}" stroke="#cccccc" stroke-width="1"/>"##
    );

    if let Some(trajs) = content.trajectories {
        for traj in trajs {
            if traj.is_empty() {
                continue;
            }
            let pts: Vec<String> = traj
                .iter()
                .map(|&p| {
                    let (x, y) = style.to_px(p);
                    format!("{x:.2},{y:.2}")
                })
                .collect();
            let _ = writeln!(
                svg,
                r##"<polyline points="{}" fill="none" stroke="#d62728" stroke-width="1" opacity="0.8"/>"##,
                pts.join(" ")
            );
        }
    }

    for &p in content.samples {
        let (x, y) = style.to_px(p);
        let _ = writeln!(
            svg,
            r##"<circle cx="{x:.2}" cy="{y:.2}" r="{}" fill="#1f77b4" opacity="0.5"/>"##,
            style.point_radius
        );
    }

    if let Some(centers) = content.centers {
        let arm = 3.0 * style.point_radius;
        for &c in centers {
            let (x, y) = style.to_px(c);
            let _ = writeln!(
                svg,
                r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#2ca02c" stroke-width="1.5"/>"##,
                x - arm,
                x + arm
            );
            let _ = writeln!(
                svg,
                r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#2ca02c" stroke-width="1.5"/>"##,
                y - arm,
                y + arm
            );
        }
    }

    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn plot_svg(content: &PlotContent, style: &PlotStyle, path: impl AsRef<Path>) -> Result<()> {
    atomic_write(path, render_svg(content, style)?.as_bytes())
}
