//! Convolution, transposed convolution and dense (fully connected) layers.
//!
//! The three raw kernels below are shared between both convolution ops:
//! a transposed convolution is the exact adjoint of a strided convolution,
//! so its forward pass is `conv_bwd_input_raw`, its input gradient is
//! `conv_fwd_raw`, and its kernel gradient is `conv_bwd_kernel_raw` with the
//! argument roles swapped.
//!
//! To keep inner loops contiguous for stride > 1, each spatial plane is
//! decomposed into `stride^2` phase sub-planes (positions congruent mod the
//! stride). Every kernel tap then reads and writes whole sub-plane rows.

use rayon::prelude::*;

use super::{shape_err, Scalar, Tensor, TensorError};

/// Geometry of one convolution, named from the forward-convolution side.
#[derive(Clone, Copy, Debug)]
struct ConvDims {
    n: usize,
    c_in: usize,
    h_in: usize,
    w_in: usize,
    c_out: usize,
    kh: usize,
    kw: usize,
    pad: usize,
    stride: usize,
    h_out: usize,
    w_out: usize,
}

fn conv_out_extent(len: usize, k: usize, pad: usize, stride: usize) -> Option<usize> {
    let padded = len + 2 * pad;
    if padded < k {
        return None;
    }
    Some((padded - k) / stride + 1)
}

/// Row-major layout of the `stride^2` phase sub-planes of an `h x w` plane.
#[derive(Clone, Debug)]
struct PhaseLayout {
    stride: usize,
    h: usize,
    w: usize,
    /// Per phase (row-major over (ph, pw)): flat offset and sub-plane extents.
    planes: Vec<(usize, usize, usize)>,
}

fn phase_extent(len: usize, phase: usize, stride: usize) -> usize {
    if phase >= len {
        0
    } else {
        (len - phase + stride - 1) / stride
    }
}

impl PhaseLayout {
    fn new(h: usize, w: usize, stride: usize) -> PhaseLayout {
        let mut planes = Vec::with_capacity(stride * stride);
        let mut offset = 0;
        for ph in 0..stride {
            for pw in 0..stride {
                let hp = phase_extent(h, ph, stride);
                let wp = phase_extent(w, pw, stride);
                planes.push((offset, hp, wp));
                offset += hp * wp;
            }
        }
        debug_assert_eq!(offset, h * w);
        PhaseLayout { stride, h, w, planes }
    }

    /// Gather one plane into phase order.
    fn split<T: Scalar>(&self, plane: &[T], dst: &mut [T]) {
        let s = self.stride;
        if s == 1 {
            dst.copy_from_slice(plane);
            return;
        }
        for ph in 0..s {
            for pw in 0..s {
                let (off, hp, wp) = self.planes[ph * s + pw];
                for t in 0..hp {
                    let src_row = &plane[(t * s + ph) * self.w..];
                    let dst_row = &mut dst[off + t * wp..off + (t + 1) * wp];
                    for (u, d) in dst_row.iter_mut().enumerate() {
                        *d = src_row[pw + u * s];
                    }
                }
            }
        }
    }

    /// Scatter-add a phase-ordered buffer back onto a plane.
    fn merge_add<T: Scalar>(&self, phased: &[T], plane: &mut [T]) {
        let s = self.stride;
        if s == 1 {
            for (d, &v) in plane.iter_mut().zip(phased) {
                *d += v;
            }
            return;
        }
        for ph in 0..s {
            for pw in 0..s {
                let (off, hp, wp) = self.planes[ph * s + pw];
                for t in 0..hp {
                    let src_row = &phased[off + t * wp..off + (t + 1) * wp];
                    let dst_row = &mut plane[(t * s + ph) * self.w..];
                    for (u, &v) in src_row.iter().enumerate() {
                        dst_row[pw + u * s] += v;
                    }
                }
            }
        }
    }
}

/// Decompose a signed tap offset into `q * stride + phase`, phase in [0, stride).
fn tap_phase(k: usize, pad: usize, stride: usize) -> (isize, usize) {
    let d = k as isize - pad as isize;
    let s = stride as isize;
    (d.div_euclid(s), d.rem_euclid(s) as usize)
}

/// Phase-split every (n, c) plane of `x` in parallel.
fn split_all<T: Scalar>(x: &[T], planes: usize, layout: &PhaseLayout) -> Vec<T> {
    let plane_len = layout.h * layout.w;
    let mut out = vec![T::zero(); planes * plane_len];
    out.par_chunks_mut(plane_len)
        .zip(x.par_chunks(plane_len))
        .for_each(|(dst, src)| layout.split(src, dst));
    out
}

/// out[n,co] += sum_{ci,kh,kw} x[n,ci,ho*s-p+kh, wo*s-p+kw] * k[co,ci,kh,kw].
/// Accumulates into `out`; the caller pre-fills it (e.g. with the bias).
fn conv_fwd_raw<T: Scalar>(x: &[T], kernel: &[T], d: &ConvDims, out: &mut [T]) {
    let layout = PhaseLayout::new(d.h_in, d.w_in, d.stride);
    let xp = split_all(x, d.n * d.c_in, &layout);
    let in_plane = d.h_in * d.w_in;
    let out_plane = d.h_out * d.w_out;
    out.par_chunks_mut(out_plane).enumerate().for_each(|(idx, dst)| {
        let (n, co) = (idx / d.c_out, idx % d.c_out);
        for ci in 0..d.c_in {
            let phased = &xp[(n * d.c_in + ci) * in_plane..][..in_plane];
            let ktap = &kernel[(co * d.c_in + ci) * d.kh * d.kw..][..d.kh * d.kw];
            accumulate_taps_read(dst, phased, ktap, d, &layout);
        }
    });
}

/// gx[n,ci,ho*s-p+kh, wo*s-p+kw] += sum_{co} g[n,co,ho,wo] * k[co,ci,kh,kw].
/// The adjoint of `conv_fwd_raw`; also the forward pass of a transposed
/// convolution. Accumulates into `gx`.
fn conv_bwd_input_raw<T: Scalar>(g: &[T], kernel: &[T], d: &ConvDims, gx: &mut [T]) {
    let layout = PhaseLayout::new(d.h_in, d.w_in, d.stride);
    let in_plane = d.h_in * d.w_in;
    let out_plane = d.h_out * d.w_out;
    let kk = d.kh * d.kw;
    gx.par_chunks_mut(in_plane).enumerate().for_each(|(idx, dst)| {
        let (n, ci) = (idx / d.c_in, idx % d.c_in);
        let mut phased = vec![T::zero(); in_plane];
        for co in 0..d.c_out {
            let gplane = &g[(n * d.c_out + co) * out_plane..][..out_plane];
            let ktap = &kernel[(co * d.c_in + ci) * kk..][..kk];
            accumulate_taps_write(&mut phased, gplane, ktap, d, &layout);
        }
        layout.merge_add(&phased, dst);
    });
}

/// gk[co,ci,kh,kw] += sum_{n,ho,wo} g[n,co,ho,wo] * x[n,ci,ho*s-p+kh, wo*s-p+kw].
fn conv_bwd_kernel_raw<T: Scalar>(g: &[T], x: &[T], d: &ConvDims, gk: &mut [T]) {
    let layout = PhaseLayout::new(d.h_in, d.w_in, d.stride);
    let xp = split_all(x, d.n * d.c_in, &layout);
    let in_plane = d.h_in * d.w_in;
    let out_plane = d.h_out * d.w_out;
    let kk = d.kh * d.kw;
    gk.par_chunks_mut(d.c_in * kk).enumerate().for_each(|(co, gk_co)| {
        for n in 0..d.n {
            let gplane = &g[(n * d.c_out + co) * out_plane..][..out_plane];
            for ci in 0..d.c_in {
                let phased = &xp[(n * d.c_in + ci) * in_plane..][..in_plane];
                dot_taps(&mut gk_co[ci * kk..(ci + 1) * kk], gplane, phased, d, &layout);
            }
        }
    });
}

/// Per-tap row ranges such that both the out row segment and the phase-plane
/// row segment stay in bounds.
#[inline]
fn tap_ranges(
    q: isize,
    phase_extent: usize,
    out_extent: usize,
) -> Option<(usize, usize, usize)> {
    let lo = (-q).max(0) as usize;
    let hi = (phase_extent as isize - q).min(out_extent as isize);
    if hi <= lo as isize {
        return None;
    }
    Some((lo, hi as usize, (lo as isize + q) as usize))
}

/// dst (out plane, read-write) += tap * phased-source rows.
#[inline]
fn accumulate_taps_read<T: Scalar>(
    dst: &mut [T],
    phased: &[T],
    ktap: &[T],
    d: &ConvDims,
    layout: &PhaseLayout,
) {
    for kh in 0..d.kh {
        let (qh, ph) = tap_phase(kh, d.pad, d.stride);
        for kw in 0..d.kw {
            let w_tap = ktap[kh * d.kw + kw];
            if w_tap == T::zero() {
                continue;
            }
            let (qw, pw) = tap_phase(kw, d.pad, d.stride);
            let (off, hp, wp) = layout.planes[ph * d.stride + pw];
            let Some((ho_lo, ho_hi, t0)) = tap_ranges(qh, hp, d.h_out) else {
                continue;
            };
            let Some((wo_lo, wo_hi, u0)) = tap_ranges(qw, wp, d.w_out) else {
                continue;
            };
            let len = wo_hi - wo_lo;
            for (row, ho) in (ho_lo..ho_hi).enumerate() {
                let src = &phased[off + (t0 + row) * wp + u0..][..len];
                let out_row = &mut dst[ho * d.w_out + wo_lo..][..len];
                for (o, &v) in out_row.iter_mut().zip(src) {
                    *o += w_tap * v;
                }
            }
        }
    }
}

/// phased (destination) += tap * out-plane rows; the adjoint of the above.
#[inline]
fn accumulate_taps_write<T: Scalar>(
    phased: &mut [T],
    gplane: &[T],
    ktap: &[T],
    d: &ConvDims,
    layout: &PhaseLayout,
) {
    for kh in 0..d.kh {
        let (qh, ph) = tap_phase(kh, d.pad, d.stride);
        for kw in 0..d.kw {
            let w_tap = ktap[kh * d.kw + kw];
            if w_tap == T::zero() {
                continue;
            }
            let (qw, pw) = tap_phase(kw, d.pad, d.stride);
            let (off, hp, wp) = layout.planes[ph * d.stride + pw];
            let Some((ho_lo, ho_hi, t0)) = tap_ranges(qh, hp, d.h_out) else {
                continue;
            };
            let Some((wo_lo, wo_hi, u0)) = tap_ranges(qw, wp, d.w_out) else {
                continue;
            };
            let len = wo_hi - wo_lo;
            for (row, ho) in (ho_lo..ho_hi).enumerate() {
                let src = &gplane[ho * d.w_out + wo_lo..][..len];
                let dst_row = &mut phased[off + (t0 + row) * wp + u0..][..len];
                for (o, &v) in dst_row.iter_mut().zip(src) {
                    *o += w_tap * v;
                }
            }
        }
    }
}

/// gk_tap += dot(out-plane rows, phased rows) per tap.
#[inline]
fn dot_taps<T: Scalar>(
    gk_taps: &mut [T],
    gplane: &[T],
    phased: &[T],
    d: &ConvDims,
    layout: &PhaseLayout,
) {
    for kh in 0..d.kh {
        let (qh, ph) = tap_phase(kh, d.pad, d.stride);
        for kw in 0..d.kw {
            let (qw, pw) = tap_phase(kw, d.pad, d.stride);
            let (off, hp, wp) = layout.planes[ph * d.stride + pw];
            let Some((ho_lo, ho_hi, t0)) = tap_ranges(qh, hp, d.h_out) else {
                continue;
            };
            let Some((wo_lo, wo_hi, u0)) = tap_ranges(qw, wp, d.w_out) else {
                continue;
            };
            let len = wo_hi - wo_lo;
            let mut acc = T::zero();
            for (row, ho) in (ho_lo..ho_hi).enumerate() {
                let a = &gplane[ho * d.w_out + wo_lo..][..len];
                let b = &phased[off + (t0 + row) * wp + u0..][..len];
                for (&x, &y) in a.iter().zip(b) {
                    acc += x * y;
                }
            }
            gk_taps[kh * d.kw + kw] += acc;
        }
    }
}

fn sum_per_channel<T: Scalar>(g: &[T], n: usize, c: usize, plane: usize) -> Vec<T> {
    let mut out = vec![T::zero(); c];
    for ni in 0..n {
        for ci in 0..c {
            out[ci] += g[(ni * c + ci) * plane..][..plane].iter().copied().sum::<T>();
        }
    }
    out
}

impl<T: Scalar> Tensor<T> {
    /// 2-d convolution of an NCHW input with an OIHW kernel.
    pub fn conv2d(
        &self,
        kernel: &Tensor<T>,
        bias: Option<&Tensor<T>>,
        pad: usize,
        stride: usize,
    ) -> Result<Tensor<T>, TensorError> {
        let (n, c_in, h_in, w_in) = self.dims4("conv2d")?;
        let (c_out, kc, kh, kw) = kernel.dims4("conv2d")?;
        if kc != c_in {
            return Err(shape_err(
                "conv2d",
                "input channels",
                format!("input has {c_in}, kernel expects {kc}"),
            ));
        }
        if stride == 0 {
            return Err(TensorError::Invalid {
                op: "conv2d",
                msg: "stride must be >= 1".into(),
            });
        }
        if let Some(b) = bias {
            if b.shape() != [c_out] {
                return Err(shape_err(
                    "conv2d",
                    "bias",
                    format!("expected [{c_out}], got {:?}", b.shape()),
                ));
            }
        }
        let (Some(h_out), Some(w_out)) = (
            conv_out_extent(h_in, kh, pad, stride),
            conv_out_extent(w_in, kw, pad, stride),
        ) else {
            return Err(shape_err(
                "conv2d",
                "spatial",
                format!("kernel {kh}x{kw} larger than padded input {h_in}x{w_in} (pad {pad})"),
            ));
        };
        let d = ConvDims {
            n,
            c_in,
            h_in,
            w_in,
            c_out,
            kh,
            kw,
            pad,
            stride,
            h_out,
            w_out,
        };

        let mut out = match bias {
            Some(b) => {
                let bv = b.data();
                let mut buf = vec![T::zero(); n * c_out * h_out * w_out];
                for (idx, chunk) in buf.chunks_mut(h_out * w_out).enumerate() {
                    chunk.fill(bv[idx % c_out]);
                }
                buf
            }
            None => vec![T::zero(); n * c_out * h_out * w_out],
        };
        conv_fwd_raw(&self.data(), &kernel.data(), &d, &mut out);

        let input = self.clone();
        let kern = kernel.clone();
        let need_input = self.is_tracked();
        let need_kernel = kernel.is_tracked();
        let need_bias = bias.map(|b| b.is_tracked()).unwrap_or(false);
        let mut parents = vec![self.clone(), kernel.clone()];
        if let Some(b) = bias {
            parents.push(b.clone());
        }
        let has_bias = bias.is_some();
        Ok(Tensor::from_op(
            vec![n, c_out, h_out, w_out],
            out,
            "conv2d",
            parents,
            Box::new(move |g| {
                let gx = need_input.then(|| {
                    let mut gx = vec![T::zero(); n * c_in * h_in * w_in];
                    conv_bwd_input_raw(g, &kern.data(), &d, &mut gx);
                    gx
                });
                let gk = need_kernel.then(|| {
                    let mut gk = vec![T::zero(); c_out * c_in * kh * kw];
                    conv_bwd_kernel_raw(g, &input.data(), &d, &mut gk);
                    gk
                });
                let mut grads = vec![gx, gk];
                if has_bias {
                    grads.push(need_bias.then(|| sum_per_channel(g, n, c_out, h_out * w_out)));
                }
                grads
            }),
        ))
    }

    /// Transposed 2-d convolution of an NCHW input with an IOHW kernel.
    ///
    /// Kernel extents must be odd; implicit padding (k-1)/2 and output
    /// padding stride-1 make the output extent exactly `stride * input`.
    pub fn conv2d_transposed(
        &self,
        kernel: &Tensor<T>,
        bias: Option<&Tensor<T>>,
        stride: usize,
    ) -> Result<Tensor<T>, TensorError> {
        let (n, c_in, h_in, w_in) = self.dims4("conv2d_transposed")?;
        let (kc_in, c_out, kh, kw) = kernel.dims4("conv2d_transposed")?;
        if kc_in != c_in {
            return Err(shape_err(
                "conv2d_transposed",
                "input channels",
                format!("input has {c_in}, kernel expects {kc_in}"),
            ));
        }
        if stride == 0 {
            return Err(TensorError::Invalid {
                op: "conv2d_transposed",
                msg: "stride must be >= 1".into(),
            });
        }
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(TensorError::Invalid {
                op: "conv2d_transposed",
                msg: format!("kernel extents must be odd, got {kh}x{kw}"),
            });
        }
        if let Some(b) = bias {
            if b.shape() != [c_out] {
                return Err(shape_err(
                    "conv2d_transposed",
                    "bias",
                    format!("expected [{c_out}], got {:?}", b.shape()),
                ));
            }
        }
        let (h_out, w_out) = (stride * h_in, stride * w_in);
        // Adjoint geometry: the forward-convolution side maps h_out -> h_in.
        let d = ConvDims {
            n,
            c_in: c_out,
            h_in: h_out,
            w_in: w_out,
            c_out: c_in,
            kh,
            kw,
            pad: (kh - 1) / 2,
            stride,
            h_out: h_in,
            w_out: w_in,
        };

        let mut out = match bias {
            Some(b) => {
                let bv = b.data();
                let mut buf = vec![T::zero(); n * c_out * h_out * w_out];
                for (idx, chunk) in buf.chunks_mut(h_out * w_out).enumerate() {
                    chunk.fill(bv[idx % c_out]);
                }
                buf
            }
            None => vec![T::zero(); n * c_out * h_out * w_out],
        };
        conv_bwd_input_raw(&self.data(), &kernel.data(), &d, &mut out);

        let input = self.clone();
        let kern = kernel.clone();
        let need_input = self.is_tracked();
        let need_kernel = kernel.is_tracked();
        let need_bias = bias.map(|b| b.is_tracked()).unwrap_or(false);
        let mut parents = vec![self.clone(), kernel.clone()];
        if let Some(b) = bias {
            parents.push(b.clone());
        }
        let has_bias = bias.is_some();
        Ok(Tensor::from_op(
            vec![n, c_out, h_out, w_out],
            out,
            "conv2d_transposed",
            parents,
            Box::new(move |g| {
                let gx = need_input.then(|| {
                    let mut gx = vec![T::zero(); n * c_in * h_in * w_in];
                    conv_fwd_raw(g, &kern.data(), &d, &mut gx);
                    gx
                });
                let gk = need_kernel.then(|| {
                    let mut gk = vec![T::zero(); c_in * c_out * kh * kw];
                    conv_bwd_kernel_raw(&input.data(), g, &d, &mut gk);
                    gk
                });
                let mut grads = vec![gx, gk];
                if has_bias {
                    grads.push(need_bias.then(|| sum_per_channel(g, n, c_out, h_out * w_out)));
                }
                grads
            }),
        ))
    }

    /// Affine map of an NxF input by an FxG weight plus a G bias.
    pub fn dense(&self, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
        let (n, f) = self.dims2("dense")?;
        let (wf, g_dim) = weight.dims2("dense")?;
        if wf != f {
            return Err(shape_err(
                "dense",
                "inner",
                format!("input features {f}, weight rows {wf}"),
            ));
        }
        if bias.shape() != [g_dim] {
            return Err(shape_err(
                "dense",
                "bias",
                format!("expected [{g_dim}], got {:?}", bias.shape()),
            ));
        }
        let x = self.data();
        let w = weight.data();
        let b = bias.data();
        let mut out = vec![T::zero(); n * g_dim];
        for ni in 0..n {
            let row = &mut out[ni * g_dim..(ni + 1) * g_dim];
            row.copy_from_slice(&b);
            for fi in 0..f {
                let xv = x[ni * f + fi];
                if xv == T::zero() {
                    continue;
                }
                for (o, &wv) in row.iter_mut().zip(&w[fi * g_dim..(fi + 1) * g_dim]) {
                    *o += xv * wv;
                }
            }
        }
        drop(x);
        drop(w);
        drop(b);

        let input = self.clone();
        let wt = weight.clone();
        let need_input = self.is_tracked();
        let need_weight = weight.is_tracked();
        let need_bias = bias.is_tracked();
        Ok(Tensor::from_op(
            vec![n, g_dim],
            out,
            "dense",
            vec![self.clone(), weight.clone(), bias.clone()],
            Box::new(move |g| {
                let gx = need_input.then(|| {
                    let w = wt.data();
                    let mut gx = vec![T::zero(); n * f];
                    for ni in 0..n {
                        let grow = &g[ni * g_dim..(ni + 1) * g_dim];
                        for fi in 0..f {
                            let wrow = &w[fi * g_dim..(fi + 1) * g_dim];
                            gx[ni * f + fi] = grow
                                .iter()
                                .zip(wrow)
                                .map(|(&gv, &wv)| gv * wv)
                                .sum::<T>();
                        }
                    }
                    gx
                });
                let gw = need_weight.then(|| {
                    let x = input.data();
                    let mut gw = vec![T::zero(); f * g_dim];
                    for ni in 0..n {
                        let grow = &g[ni * g_dim..(ni + 1) * g_dim];
                        for fi in 0..f {
                            let xv = x[ni * f + fi];
                            if xv == T::zero() {
                                continue;
                            }
                            for (o, &gv) in gw[fi * g_dim..(fi + 1) * g_dim].iter_mut().zip(grow) {
                                *o += xv * gv;
                            }
                        }
                    }
                    gw
                });
                let gb = need_bias.then(|| {
                    let mut gb = vec![T::zero(); g_dim];
                    for ni in 0..n {
                        for (o, &gv) in gb.iter_mut().zip(&g[ni * g_dim..(ni + 1) * g_dim]) {
                            *o += gv;
                        }
                    }
                    gb
                });
                vec![gx, gw, gb]
            }),
        ))
    }
}

#[cfg(test)]
mod tests {
    use crate::tensor::Tensor;

    /// Naive sliding-window convolution used as the independent oracle.
    fn conv_oracle(
        x: &[f64],
        xs: (usize, usize, usize, usize),
        k: &[f64],
        ks: (usize, usize, usize, usize),
        bias: &[f64],
        pad: usize,
        stride: usize,
    ) -> Vec<f64> {
        let (n, ci, h, w) = xs;
        let (co, _, kh, kw) = ks;
        let ho = (h + 2 * pad - kh) / stride + 1;
        let wo = (w + 2 * pad - kw) / stride + 1;
        let mut out = vec![0.0; n * co * ho * wo];
        for ni in 0..n {
            for o in 0..co {
                for oy in 0..ho {
                    for ox in 0..wo {
                        let mut acc = bias[o];
                        for i in 0..ci {
                            for dy in 0..kh {
                                for dx in 0..kw {
                                    let iy = (oy * stride + dy) as isize - pad as isize;
                                    let ix = (ox * stride + dx) as isize - pad as isize;
                                    if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                        continue;
                                    }
                                    acc += x[((ni * ci + i) * h + iy as usize) * w + ix as usize]
                                        * k[((o * ci + i) * kh + dy) * kw + dx];
                                }
                            }
                        }
                        out[((ni * co + o) * ho + oy) * wo + ox] = acc;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn conv_all_ones_matches_window_counts() {
        let x = Tensor::<f64>::full(&[1, 1, 3, 3], 1.0);
        let k = Tensor::<f64>::full(&[1, 1, 3, 3], 1.0);
        let b = Tensor::<f64>::zeros(&[1]);
        let y = x.conv2d(&k, Some(&b), 1, 1).unwrap();
        let expect = conv_oracle(
            &x.to_vec(),
            (1, 1, 3, 3),
            &k.to_vec(),
            (1, 1, 3, 3),
            &[0.0],
            1,
            1,
        );
        assert_eq!(y.to_vec(), expect);
        assert_eq!(y.to_vec()[4], 9.0);
        assert_eq!(y.to_vec()[0], 4.0);
        assert_eq!(y.to_vec()[8], 4.0);
    }

    #[test]
    fn identity_kernel_preserves_input() {
        let data: Vec<f64> = (0..2 * 5 * 4).map(|i| i as f64 * 0.17 - 2.0).collect();
        let x = Tensor::<f64>::from_vec(&[1, 2, 5, 4], data.clone());
        // Two-channel identity: each output channel passes its own input through.
        let mut kdata = vec![0.0; 2 * 2 * 9];
        kdata[4] = 1.0; // out 0 <- in 0 center
        kdata[3 * 9 + 4] = 1.0; // out 1 <- in 1 center
        let k = Tensor::<f64>::from_vec(&[2, 2, 3, 3], kdata);
        let b = Tensor::<f64>::zeros(&[2]);
        let y = x.conv2d(&k, Some(&b), 1, 1).unwrap();
        assert_eq!(y.to_vec(), data);
    }

    #[test]
    fn strided_conv_matches_oracle() {
        let mut rng = 1234u64;
        let mut next = || {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((rng >> 33) as f64 / (1u64 << 31) as f64) - 1.0
        };
        let xs = (2, 3, 7, 6);
        let ks = (4, 3, 4, 4);
        let x: Vec<f64> = (0..xs.0 * xs.1 * xs.2 * xs.3).map(|_| next()).collect();
        let k: Vec<f64> = (0..ks.0 * ks.1 * ks.2 * ks.3).map(|_| next()).collect();
        let b: Vec<f64> = (0..ks.0).map(|_| next()).collect();
        let xt = Tensor::<f64>::from_vec(&[xs.0, xs.1, xs.2, xs.3], x.clone());
        let kt = Tensor::<f64>::from_vec(&[ks.0, ks.1, ks.2, ks.3], k.clone());
        let bt = Tensor::<f64>::from_vec(&[ks.0], b.clone());
        let y = xt.conv2d(&kt, Some(&bt), 1, 2).unwrap();
        let expect = conv_oracle(&x, xs, &k, ks, &b, 1, 2);
        for (a, e) in y.to_vec().iter().zip(&expect) {
            assert!((a - e).abs() < 1e-12, "{a} vs {e}");
        }
    }

    #[test]
    fn transposed_conv_places_kernel_at_origin() {
        // 1x1 input of value 1, stride 2: output is the kernel scattered at the
        // origin with implicit pad 1, cropped to the 2x2 output window.
        let x = Tensor::<f64>::from_vec(&[1, 1, 1, 1], vec![1.0]);
        let kdata: Vec<f64> = (1..=9).map(|v| v as f64).collect();
        let k = Tensor::<f64>::from_vec(&[1, 1, 3, 3], kdata);
        let y = x.conv2d_transposed(&k, None, 2).unwrap();
        assert_eq!(y.shape(), &[1, 1, 2, 2]);
        // Output (ho,wo) takes kernel tap (kh,kw) = (ho+pad, wo+pad) = (ho+1, wo+1).
        assert_eq!(y.to_vec(), vec![5.0, 6.0, 8.0, 9.0]);
    }

    #[test]
    fn transposed_conv_doubles_extent() {
        let x = Tensor::<f64>::zeros(&[1, 2, 4, 4]);
        let k = Tensor::<f64>::zeros(&[2, 3, 3, 3]);
        let y = x.conv2d_transposed(&k, None, 2).unwrap();
        assert_eq!(y.shape(), &[1, 3, 8, 8]);
    }

    #[test]
    fn transposed_conv_stride_one_matches_adjoint_oracle() {
        // For stride 1 the transposed conv equals a conv with the kernel
        // flipped in both spatial axes and I/O transposed.
        let x: Vec<f64> = (0..16).map(|i| (i as f64).sin()).collect();
        let k: Vec<f64> = (0..9).map(|i| (i as f64) * 0.1 - 0.4).collect();
        let xt = Tensor::<f64>::from_vec(&[1, 1, 4, 4], x.clone());
        let kt = Tensor::<f64>::from_vec(&[1, 1, 3, 3], k.clone());
        let y = xt.conv2d_transposed(&kt, None, 1).unwrap();
        let mut flipped = vec![0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                flipped[i * 3 + j] = k[(2 - i) * 3 + (2 - j)];
            }
        }
        let kf = Tensor::<f64>::from_vec(&[1, 1, 3, 3], flipped);
        let b = Tensor::<f64>::zeros(&[1]);
        let reference = xt.conv2d(&kf, Some(&b), 1, 1).unwrap();
        for (a, e) in y.to_vec().iter().zip(reference.to_vec()) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn dense_identity_passes_through() {
        let x = Tensor::<f64>::from_vec(&[1, 2], vec![1.0, 2.0]);
        let w = Tensor::<f64>::from_vec(&[2, 2], vec![1.0, 0.0, 0.0, 1.0]);
        let b = Tensor::<f64>::from_vec(&[2], vec![0.0, 0.0]);
        assert_eq!(x.dense(&w, &b).unwrap().to_vec(), vec![1.0, 2.0]);
    }

    #[test]
    fn dense_affine_example() {
        let x = Tensor::<f64>::from_vec(&[1, 2], vec![1.0, 2.0]);
        let w = Tensor::<f64>::from_vec(&[2, 2], vec![1.0, 0.0, 0.0, 1.0]);
        let b = Tensor::<f64>::from_vec(&[2], vec![3.0, 3.0]);
        assert_eq!(x.dense(&w, &b).unwrap().to_vec(), vec![4.0, 5.0]);
    }

    #[test]
    fn conv_rejects_channel_mismatch() {
        let x = Tensor::<f64>::zeros(&[1, 3, 4, 4]);
        let k = Tensor::<f64>::zeros(&[8, 4, 3, 3]);
        let err = x.conv2d(&k, None, 1, 1).unwrap_err();
        assert!(err.to_string().contains("input channels"));
    }
}
