//! Region-map rendering: one color per center, binary PPM output.

use std::io::Write;
use std::path::Path;

use crate::assignment::Assignment;
use crate::error::Result;

const GOLDEN_RATIO_CONJUGATE: f64 = 0.618_033_988_749_894_9;

/// Deterministic palette: hue walks the circle in golden-ratio steps, full
/// saturation and value, so nearby center ids get well-separated colors.
pub fn center_color(id: u32) -> [u8; 3] {
    let hue = (id as f64 * GOLDEN_RATIO_CONJUGATE).fract();
    hsv_to_rgb(hue)
}

fn hsv_to_rgb(hue: f64) -> [u8; 3] {
    let h6 = hue * 6.0;
    let f = h6.fract();
    let q = 1.0 - f;
    let (r, g, b) = match h6 as u32 % 6 {
        0 => (1.0, f, 0.0),
        1 => (q, 1.0, 0.0),
        2 => (0.0, 1.0, f),
        3 => (0.0, q, 1.0),
        4 => (f, 0.0, 1.0),
        _ => (1.0, 0.0, q),
    };
    [to_byte(r), to_byte(g), to_byte(b)]
}

fn to_byte(v: f64) -> u8 {
    (v * 255.0).round() as u8
}

/// Renders the region map as a binary PPM (P6) byte buffer: palette color
/// per pixel, centers over-plotted black at their rounded positions.
pub fn render_ppm(assignment: &Assignment, centers: &[[f64; 2]]) -> Vec<u8> {
    let n = assignment.n();
    let mut out = Vec::with_capacity(32 + assignment.map().len() * 3);
    out.extend_from_slice(format!("P6\n{n} {n}\n255\n").as_bytes());
    for &c in assignment.map() {
        out.extend_from_slice(&center_color(c));
    }
    let header = out.len() - assignment.map().len() * 3;
    let max = n as i64 - 1;
    for &[x, y] in centers {
        let px = (x.round() as i64).clamp(0, max) as usize;
        let py = (y.round() as i64).clamp(0, max) as usize;
        let at = header + (py * n as usize + px) * 3;
        out[at..at + 3].copy_from_slice(&[0, 0, 0]);
    }
    out
}

pub fn write_ppm(path: &Path, assignment: &Assignment, centers: &[[f64; 2]]) -> Result<()> {
    let bytes = render_ppm(assignment, centers);
    let mut file = std::fs::File::create(path)?;
    file.write_all(&bytes)?;
    Ok(())
}
