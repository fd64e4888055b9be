//! Straight-loop reference implementations.

/// 3×3 cross-correlation with zero padding 1.
pub fn conv2d(x: &[f64], c_in: usize, h: usize, w: usize, k: &[f64], b: &[f64]) -> Vec<f64> {
    let c_out = b.len();
    let mut out = vec![0.0; c_out * h * w];
    for o in 0..c_out {
        for i in 0..h {
            for j in 0..w {
                let mut acc = b[o];
                for c in 0..c_in {
                    for di in 0..3 {
                        for dj in 0..3 {
                            let (y, x_) = (i as isize + di as isize - 1, j as isize + dj as isize - 1);
                            if y < 0 || x_ < 0 || y >= h as isize || x_ >= w as isize {
                                continue;
                            }
                            let v = x[c * h * w + y as usize * w + x_ as usize];
                            acc += v * k[((o * c_in + c) * 3 + di) * 3 + dj];
                        }
                    }
                }
                out[(o * h + i) * w + j] = acc;
            }
        }
    }
    out
}

/// Max over each 2×2 window; odd trailing rows and columns are ignored.
pub fn window_max(x: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for i in 0..oh {
            for j in 0..ow {
                let at = |di: usize, dj: usize| x[ch * h * w + (2 * i + di) * w + 2 * j + dj];
                out.push(at(0, 0).max(at(0, 1)).max(at(1, 0)).max(at(1, 1)));
            }
        }
    }
    out
}

/// `W x + b` with `W` row-major `[m, n]`.
pub fn linear(w: &[f64], x: &[f64], b: &[f64]) -> Vec<f64> {
    b.iter()
        .enumerate()
        .map(|(r, bias)| bias + (0..x.len()).map(|c| w[r * x.len() + c] * x[c]).sum::<f64>())
        .collect()
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let e: Vec<f64> = z.iter().map(|v| v.exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}
