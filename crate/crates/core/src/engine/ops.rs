//! Numeric kernels over NHWC tensors. Convolutions go through im2col and a
//! single-precision GEMM.

use crate::tensor::{Shape, Tensor};

/// `C = A·B + beta·C` with explicit strides for A and B; C is row-major
/// `m × n`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    rsa: usize,
    csa: usize,
    b: &[f32],
    rsb: usize,
    csb: usize,
    c: &mut [f32],
    beta: f32,
) {
    if m == 0 || n == 0 {
        return;
    }
    debug_assert!(c.len() >= m * n);
    // SAFETY: every access stays inside the slices given the strides
    // passed by callers in this module (checked by the debug asserts and
    // by the tests against naive loops).
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Output length and leading pad for same padding.
pub(crate) fn same_geometry(len: usize, k: usize, s: usize) -> (usize, usize) {
    let out = len.div_ceil(s);
    let total = ((out - 1) * s + k).saturating_sub(len);
    (out, total / 2)
}

fn im2col(xs: &[f32], s: Shape, kh: usize, kw: usize, cols: &mut [f32]) {
    let (h, w, c) = (s.h, s.w, s.c);
    let kd = kh * kw * c;
    let pt = (kh - 1) / 2;
    let pl = (kw - 1) / 2;
    for oy in 0..h {
        for ox in 0..w {
            let row = &mut cols[(oy * w + ox) * kd..(oy * w + ox + 1) * kd];
            for i in 0..kh {
                let iy = oy as isize + i as isize - pt as isize;
                for j in 0..kw {
                    let ix = ox as isize + j as isize - pl as isize;
                    let dst = &mut row[(i * kw + j) * c..(i * kw + j + 1) * c];
                    if iy < 0 || iy >= h as isize || ix < 0 || ix >= w as isize {
                        dst.fill(0.0);
                    } else {
                        let src = (iy as usize * w + ix as usize) * c;
                        dst.copy_from_slice(&xs[src..src + c]);
                    }
                }
            }
        }
    }
}

fn col2im(cols: &[f32], s: Shape, kh: usize, kw: usize, dx: &mut [f32]) {
    let (h, w, c) = (s.h, s.w, s.c);
    let kd = kh * kw * c;
    let pt = (kh - 1) / 2;
    let pl = (kw - 1) / 2;
    for oy in 0..h {
        for ox in 0..w {
            let row = &cols[(oy * w + ox) * kd..(oy * w + ox + 1) * kd];
            for i in 0..kh {
                let iy = oy as isize + i as isize - pt as isize;
                if iy < 0 || iy >= h as isize {
                    continue;
                }
                for j in 0..kw {
                    let ix = ox as isize + j as isize - pl as isize;
                    if ix < 0 || ix >= w as isize {
                        continue;
                    }
                    let src = &row[(i * kw + j) * c..(i * kw + j + 1) * c];
                    let dst = (iy as usize * w + ix as usize) * c;
                    for (d, v) in dx[dst..dst + c].iter_mut().zip(src) {
                        *d += v;
                    }
                }
            }
        }
    }
}

/// Kernel layout `[kh][kw][cin][cout]`.
pub(crate) fn conv2d(x: &Tensor, k: &[f32], bias: &[f32], kh: usize, kw: usize, cout: usize) -> Tensor {
    let s = x.shape;
    let hw = s.h * s.w;
    let kd = kh * kw * s.c;
    let mut out = Tensor::zeros(x.n, Shape::new(s.h, s.w, cout));
    let pointwise = kh == 1 && kw == 1;
    let mut cols = if pointwise { Vec::new() } else { vec![0.0f32; hw * kd] };
    for n in 0..x.n {
        let xs = x.sample(n);
        let a: &[f32] = if pointwise {
            xs
        } else {
            im2col(xs, s, kh, kw, &mut cols);
            &cols
        };
        let o = out.sample_mut(n);
        for px in o.chunks_mut(cout) {
            px.copy_from_slice(bias);
        }
        gemm(hw, kd, cout, a, kd, 1, k, cout, 1, o, 1.0);
    }
    out
}

/// Accumulates kernel and bias gradients; returns the input gradient.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv2d_backward(
    x: &Tensor,
    k: &[f32],
    kh: usize,
    kw: usize,
    cout: usize,
    dy: &Tensor,
    dk: &mut [f32],
    db: &mut [f32],
) -> Tensor {
    let s = x.shape;
    let hw = s.h * s.w;
    let kd = kh * kw * s.c;
    let mut dx = Tensor::zeros(x.n, s);
    let pointwise = kh == 1 && kw == 1;
    let mut cols = if pointwise { Vec::new() } else { vec![0.0f32; hw * kd] };
    let mut dcols = vec![0.0f32; hw * kd];
    for n in 0..x.n {
        let xs = x.sample(n);
        let g = dy.sample(n);
        for px in g.chunks(cout) {
            for (d, v) in db.iter_mut().zip(px) {
                *d += v;
            }
        }
        let a: &[f32] = if pointwise {
            xs
        } else {
            im2col(xs, s, kh, kw, &mut cols);
            &cols
        };
        // dK += Aᵀ dY
        gemm(kd, hw, cout, a, 1, kd, g, cout, 1, dk, 1.0);
        // dA = dY Kᵀ
        gemm(hw, cout, kd, g, cout, 1, k, 1, cout, &mut dcols, 0.0);
        if pointwise {
            dx.sample_mut(n).copy_from_slice(&dcols);
        } else {
            col2im(&dcols, s, kh, kw, dx.sample_mut(n));
        }
    }
    dx
}

/// Weight layout `[inp][out]`.
pub(crate) fn dense(x: &Tensor, wt: &[f32], bias: &[f32], out: usize) -> Tensor {
    let inp = x.shape.c;
    let mut y = Tensor::zeros(x.n, Shape::vector(out));
    for row in y.data.chunks_mut(out) {
        row.copy_from_slice(bias);
    }
    gemm(x.n, inp, out, &x.data, inp, 1, wt, out, 1, &mut y.data, 1.0);
    y
}

pub(crate) fn dense_backward(x: &Tensor, wt: &[f32], out: usize, dy: &Tensor, dw: &mut [f32], db: &mut [f32]) -> Tensor {
    let inp = x.shape.c;
    for row in dy.data.chunks(out) {
        for (d, v) in db.iter_mut().zip(row) {
            *d += v;
        }
    }
    gemm(inp, x.n, out, &x.data, 1, inp, &dy.data, out, 1, dw, 1.0);
    let mut dx = Tensor::zeros(x.n, x.shape);
    gemm(x.n, out, inp, &dy.data, out, 1, wt, 1, out, &mut dx.data, 0.0);
    dx
}

pub(crate) struct PoolOut {
    pub y: Tensor,
    /// Max pool: flat within-sample index of the winning input cell.
    pub argmax: Vec<u32>,
}

pub(crate) fn pool(x: &Tensor, kh: usize, kw: usize, sh: usize, sw: usize, max: bool) -> PoolOut {
    let s = x.shape;
    let (oh, pt) = same_geometry(s.h, kh, sh);
    let (ow, pl) = same_geometry(s.w, kw, sw);
    let os = Shape::new(oh, ow, s.c);
    let mut y = Tensor::zeros(x.n, os);
    let mut argmax = if max { vec![0u32; x.n * os.len()] } else { Vec::new() };
    for n in 0..x.n {
        let xs = x.sample(n);
        let base = n * os.len();
        for oy in 0..oh {
            let y0 = (oy * sh) as isize - pt as isize;
            let ys = y0.max(0) as usize;
            let ye = ((y0 + kh as isize) as usize).min(s.h);
            for ox in 0..ow {
                let x0 = (ox * sw) as isize - pl as isize;
                let xs0 = x0.max(0) as usize;
                let xe = ((x0 + kw as isize) as usize).min(s.w);
                let o = base + (oy * ow + ox) * s.c;
                if max {
                    for c in 0..s.c {
                        let mut best = f32::NEG_INFINITY;
                        let mut bi = 0usize;
                        for iy in ys..ye {
                            for ix in xs0..xe {
                                let i = (iy * s.w + ix) * s.c + c;
                                if xs[i] > best {
                                    best = xs[i];
                                    bi = i;
                                }
                            }
                        }
                        y.data[o + c] = best;
                        argmax[o + c] = bi as u32;
                    }
                } else {
                    let cnt = ((ye - ys) * (xe - xs0)) as f32;
                    let acc = &mut y.data[o..o + s.c];
                    for iy in ys..ye {
                        for ix in xs0..xe {
                            let i = (iy * s.w + ix) * s.c;
                            for (a, v) in acc.iter_mut().zip(&xs[i..i + s.c]) {
                                *a += v;
                            }
                        }
                    }
                    for a in acc.iter_mut() {
                        *a /= cnt;
                    }
                }
            }
        }
    }
    PoolOut { y, argmax }
}

pub(crate) fn maxpool_backward(x_shape: Shape, n: usize, argmax: &[u32], dy: &Tensor) -> Tensor {
    let mut dx = Tensor::zeros(n, x_shape);
    let ol = dy.shape.len();
    for s in 0..n {
        let d = dx.sample_mut(s);
        for (g, &a) in dy.data[s * ol..(s + 1) * ol].iter().zip(&argmax[s * ol..(s + 1) * ol]) {
            d[a as usize] += g;
        }
    }
    dx
}

pub(crate) fn avgpool_backward(x_shape: Shape, kh: usize, kw: usize, sh: usize, sw: usize, dy: &Tensor) -> Tensor {
    let s = x_shape;
    let (oh, pt) = same_geometry(s.h, kh, sh);
    let (ow, pl) = same_geometry(s.w, kw, sw);
    let mut dx = Tensor::zeros(dy.n, s);
    for n in 0..dy.n {
        let g = dy.sample(n).to_vec();
        let d = dx.sample_mut(n);
        for oy in 0..oh {
            let y0 = (oy * sh) as isize - pt as isize;
            let ys = y0.max(0) as usize;
            let ye = ((y0 + kh as isize) as usize).min(s.h);
            for ox in 0..ow {
                let x0 = (ox * sw) as isize - pl as isize;
                let xs0 = x0.max(0) as usize;
                let xe = ((x0 + kw as isize) as usize).min(s.w);
                let cnt = ((ye - ys) * (xe - xs0)) as f32;
                let go = &g[(oy * ow + ox) * s.c..(oy * ow + ox + 1) * s.c];
                for iy in ys..ye {
                    for ix in xs0..xe {
                        let i = (iy * s.w + ix) * s.c;
                        for (dv, gv) in d[i..i + s.c].iter_mut().zip(go) {
                            *dv += gv / cnt;
                        }
                    }
                }
            }
        }
    }
    dx
}

pub(crate) fn softmax_rows(x: &Tensor) -> Tensor {
    let mut y = x.clone();
    let c = x.shape.c;
    for row in y.data.chunks_mut(c) {
        let m = row.iter().fold(f32::NEG_INFINITY, |a, &b| a.max(b));
        let mut s = 0.0f32;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            s += *v;
        }
        for v in row.iter_mut() {
            *v /= s;
        }
    }
    y
}

/// Normalise groups of `group` consecutive values (after transposition by
/// the caller) to zero mean and unit variance. Returns (xhat, inv_std per
/// group).
pub(crate) fn normalize_groups(vals: &[f32], group: usize, eps: f32) -> (Vec<f32>, Vec<f32>) {
    let mut xhat = vec![0.0f32; vals.len()];
    let mut inv = Vec::with_capacity(vals.len() / group.max(1));
    for (g, o) in vals.chunks(group).zip(xhat.chunks_mut(group)) {
        let m = g.iter().map(|&v| v as f64).sum::<f64>() / group as f64;
        let var = g.iter().map(|&v| (v as f64 - m) * (v as f64 - m)).sum::<f64>() / group as f64;
        let is = 1.0 / (var + eps as f64).sqrt();
        for (d, &v) in o.iter_mut().zip(g) {
            *d = ((v as f64 - m) * is) as f32;
        }
        inv.push(is as f32);
    }
    (xhat, inv)
}

/// Backward of `xhat = (x - mean) * inv` per group, given `d xhat`.
pub(crate) fn normalize_groups_backward(xhat: &[f32], inv: &[f32], dxhat: &[f32], group: usize) -> Vec<f32> {
    let mut dx = vec![0.0f32; xhat.len()];
    let m = group as f32;
    for (((xh, dh), d), &is) in xhat.chunks(group).zip(dxhat.chunks(group)).zip(dx.chunks_mut(group)).zip(inv) {
        let sum_d: f32 = dh.iter().sum();
        let sum_dx: f32 = dh.iter().zip(xh).map(|(a, b)| a * b).sum();
        for ((o, &g), &x) in d.iter_mut().zip(dh).zip(xh) {
            *o = is / m * (m * g - sum_d - x * sum_dx);
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_conv(x: &Tensor, k: &[f32], b: &[f32], kh: usize, kw: usize, cout: usize) -> Tensor {
        let s = x.shape;
        let mut y = Tensor::zeros(x.n, Shape::new(s.h, s.w, cout));
        let pt = (kh as isize - 1) / 2;
        let pl = (kw as isize - 1) / 2;
        for n in 0..x.n {
            for oy in 0..s.h {
                for ox in 0..s.w {
                    for co in 0..cout {
                        let mut acc = b[co];
                        for i in 0..kh {
                            for j in 0..kw {
                                let iy = oy as isize + i as isize - pt;
                                let ix = ox as isize + j as isize - pl;
                                if iy < 0 || ix < 0 || iy >= s.h as isize || ix >= s.w as isize {
                                    continue;
                                }
                                for ci in 0..s.c {
                                    acc += x.at(n, iy as usize, ix as usize, ci) * k[((i * kw + j) * s.c + ci) * cout + co];
                                }
                            }
                        }
                        let id = y.idx(n, oy, ox, co);
                        y.data[id] = acc;
                    }
                }
            }
        }
        y
    }

    fn ramp(n: usize, s: Shape) -> Tensor {
        Tensor::from_vec(n, s, (0..n * s.len()).map(|i| ((i * 13 % 29) as f32 - 14.0) / 7.0).collect()).unwrap()
    }

    #[test]
    fn conv_matches_naive_loops() {
        for (kh, kw) in [(1, 1), (3, 3), (1, 4), (3, 1), (5, 5)] {
            let x = ramp(2, Shape::new(5, 6, 3));
            let cout = 4;
            let k: Vec<f32> = (0..kh * kw * 3 * cout).map(|i| ((i * 7 % 11) as f32 - 5.0) / 10.0).collect();
            let b = vec![0.1, -0.2, 0.3, 0.0];
            let got = conv2d(&x, &k, &b, kh, kw, cout);
            let want = naive_conv(&x, &k, &b, kh, kw, cout);
            for (a, c) in got.data.iter().zip(&want.data) {
                assert!((a - c).abs() < 1e-4, "{kh}x{kw}");
            }
        }
    }

    #[test]
    fn conv_backward_is_adjoint() {
        // <conv(x), g> is linear in x and k: check dx and dk with a dot test
        let (kh, kw, cout) = (3, 2, 3);
        let x = ramp(2, Shape::new(4, 5, 2));
        let k: Vec<f32> = (0..kh * kw * 2 * cout).map(|i| ((i * 5 % 7) as f32 - 3.0) / 5.0).collect();
        let zb = vec![0.0; cout];
        let g = ramp(2, Shape::new(4, 5, cout));
        let mut dk = vec![0.0; k.len()];
        let mut db = vec![0.0; cout];
        let dx = conv2d_backward(&x, &k, kh, kw, cout, &g, &mut dk, &mut db);
        let y = conv2d(&x, &k, &zb, kh, kw, cout);
        let lhs: f32 = y.data.iter().zip(&g.data).map(|(a, b)| a * b).sum();
        let via_x: f32 = x.data.iter().zip(&dx.data).map(|(a, b)| a * b).sum();
        let via_k: f32 = k.iter().zip(&dk).map(|(a, b)| a * b).sum();
        assert!((lhs - via_x).abs() < 1e-3 * lhs.abs().max(1.0));
        assert!((lhs - via_k).abs() < 1e-3 * lhs.abs().max(1.0));
        let gsum: Vec<f32> = (0..cout).map(|c| g.data.iter().skip(c).step_by(cout).sum()).collect();
        for (a, b) in db.iter().zip(&gsum) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn avgpool_excludes_padding() {
        let x = Tensor::from_vec(1, Shape::new(2, 2, 1), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let p = pool(&x, 3, 3, 1, 1, false);
        assert_eq!(p.y.data, vec![2.5; 4]);
        let m = pool(&x, 2, 2, 2, 2, true);
        assert_eq!(m.y.data, vec![4.0]);
        assert_eq!(m.argmax, vec![3]);
    }

    #[test]
    fn same_geometry_matches_tf() {
        assert_eq!(same_geometry(5, 3, 1), (5, 1));
        assert_eq!(same_geometry(313, 2, 2), (157, 0));
        assert_eq!(same_geometry(64, 3, 3), (22, 1));
        assert_eq!(same_geometry(11, 3, 3), (4, 0));
        assert_eq!(same_geometry(2, 3, 3), (1, 0));
    }

    #[test]
    fn avgpool_backward_is_adjoint() {
        let x = ramp(2, Shape::new(5, 7, 2));
        let p = pool(&x, 3, 3, 3, 3, false);
        let g = ramp(2, p.y.shape);
        let dx = avgpool_backward(x.shape, 3, 3, 3, 3, &g);
        let lhs: f32 = p.y.data.iter().zip(&g.data).map(|(a, b)| a * b).sum();
        let rhs: f32 = x.data.iter().zip(&dx.data).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-3);
    }
}
