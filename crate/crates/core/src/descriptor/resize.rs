use crate::types::SonarImage;

use super::encoder::Tensor3;

/// Network input height (beams axis).
pub const INPUT_H: usize = 256;
/// Network input width (bins axis).
pub const INPUT_W: usize = 200;

/// Bilinear resampling over the (beam, bin) grid with corner-aligned
/// sampling, so the four corners are preserved exactly.
pub fn resize_image(image: &SonarImage, h: usize, w: usize) -> Tensor3 {
    resize_plane(image.data(), image.n_beams(), image.n_bins(), h, w)
}

pub(crate) fn resize_plane(src: &[f64], sh: usize, sw: usize, h: usize, w: usize) -> Tensor3 {
    let coord = |i: usize, n_out: usize, n_in: usize| -> (usize, usize, f64) {
        if n_out <= 1 || n_in <= 1 {
            return (0, 0, 0.0);
        }
        let x = i as f64 * (n_in - 1) as f64 / (n_out - 1) as f64;
        let i0 = (x.floor() as usize).min(n_in - 1);
        let i1 = (i0 + 1).min(n_in - 1);
        (i0, i1, x - i0 as f64)
    };
    let cols: Vec<(usize, usize, f64)> = (0..w).map(|j| coord(j, w, sw)).collect();
    let mut data = Vec::with_capacity(h * w);
    for i in 0..h {
        let (r0, r1, fy) = coord(i, h, sh);
        let row0 = &src[r0 * sw..(r0 + 1) * sw];
        let row1 = &src[r1 * sw..(r1 + 1) * sw];
        for &(c0, c1, fx) in &cols {
            let top = row0[c0] + fx * (row0[c1] - row0[c0]);
            let bottom = row1[c0] + fx * (row1[c1] - row1[c0]);
            data.push((top + fy * (bottom - top)).clamp(0.0, 1.0));
        }
    }
    Tensor3 { c: 1, h, w, data }
}
