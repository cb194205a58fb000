#include "sia/nn/layers.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "sia/errors.hpp"

namespace sia::nn {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ColMat = Eigen::MatrixXf;
using RowMap = Eigen::Map<RowMat>;
using ConstRowMap = Eigen::Map<const RowMat>;
using ColMap = Eigen::Map<ColMat>;
using ConstColMap = Eigen::Map<const ColMat>;

int conv_out(int in, int k, int stride, int pad) { return (in + 2 * pad - k) / stride + 1; }

int floor_div(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

// Half-open valid range [lo, hi) of output coordinates whose input coordinate
// ox*stride - pad + kx stays inside [0, extent).
std::pair<int, int> valid_range(int out_extent, int extent, int stride, int pad, int kx) {
    int lo = std::max(0, (pad - kx + stride - 1) / stride);
    int hi = std::min(out_extent, floor_div(extent - 1 - kx + pad, stride) + 1);
    return {lo, std::max(lo, hi)};
}

// Patch matrix stored as (oh*ow) x (c*k*k) column-major: one column per
// kernel offset (ci,ky,kx), contiguous over output pixels, so both the
// gather here and the GEMMs run on contiguous memory.
void im2col(const float* x, int c, int h, int w, int k, int stride, int pad, int oh, int ow,
            float* col) {
    const std::size_t pixels = static_cast<std::size_t>(oh) * ow;
    for (int ci = 0; ci < c; ++ci) {
        const float* plane = x + static_cast<std::size_t>(ci) * h * w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                float* dst = col + (static_cast<std::size_t>(ci) * k * k + ky * k + kx) * pixels;
                for (int oy = 0; oy < oh; ++oy, dst += ow) {
                    int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= h) {
                        std::fill(dst, dst + ow, 0.f);
                        continue;
                    }
                    auto [lo, hi] = valid_range(ow, w, stride, pad, kx);
                    std::fill(dst, dst + lo, 0.f);
                    std::fill(dst + hi, dst + ow, 0.f);
                    const float* src = plane + static_cast<std::size_t>(iy) * w +
                                       (static_cast<std::size_t>(lo) * stride - pad + kx);
                    if (stride == 1) {
                        std::copy(src, src + (hi - lo), dst + lo);
                    } else {
                        for (int ox = lo; ox < hi; ++ox, src += stride) dst[ox] = *src;
                    }
                }
            }
        }
    }
}

void col2im_add(const float* col, int c, int h, int w, int k, int stride, int pad, int oh, int ow,
                float* x) {
    const std::size_t pixels = static_cast<std::size_t>(oh) * ow;
    for (int ci = 0; ci < c; ++ci) {
        float* plane = x + static_cast<std::size_t>(ci) * h * w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const float* src =
                    col + (static_cast<std::size_t>(ci) * k * k + ky * k + kx) * pixels;
                for (int oy = 0; oy < oh; ++oy, src += ow) {
                    int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= h) continue;
                    auto [lo, hi] = valid_range(ow, w, stride, pad, kx);
                    float* dst = plane + static_cast<std::size_t>(iy) * w +
                                 (static_cast<std::size_t>(lo) * stride - pad + kx);
                    if (stride == 1) {
                        for (int ox = lo; ox < hi; ++ox, ++dst) *dst += src[ox];
                    } else {
                        for (int ox = lo; ox < hi; ++ox, dst += stride) *dst += src[ox];
                    }
                }
            }
        }
    }
}

void he_normal_init(Param& p, int fan_in, std::mt19937_64& rng, float scale = 1.f) {
    std::normal_distribution<float> dist(0.f, scale * std::sqrt(2.f / static_cast<float>(fan_in)));
    for (auto& v : p.value) v = dist(rng);
}

}  // namespace

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(std::string name, int in_c, int out_c, int kernel, int stride, int pad, bool bias,
               std::mt19937_64& rng)
    : in_c_(in_c), out_c_(out_c), k_(kernel), stride_(stride), pad_(pad),
      weight_(name + ".weight", {out_c, in_c, kernel, kernel}) {
    he_normal_init(weight_, in_c * kernel * kernel, rng);
    if (bias) bias_ = std::make_unique<Param>(name + ".bias", std::vector<int>{out_c});
}

Tensor Conv2d::forward(const Tensor& x, bool) {
    if (x.c != in_c_) throw InternalError("Conv2d: channel mismatch");
    oh_ = conv_out(x.h, k_, stride_, pad_);
    ow_ = conv_out(x.w, k_, stride_, pad_);
    n_ = x.n;
    xh_ = x.h;
    xw_ = x.w;
    const std::size_t kk = static_cast<std::size_t>(in_c_) * k_ * k_;
    const std::size_t pixels = static_cast<std::size_t>(oh_) * ow_;
    Tensor y(x.n, out_c_, oh_, ow_);
    col_cache_.resize(kk * pixels * x.n);
    // The weight buffer (out_c, kk) row-major reads as a (kk, out_c)
    // column-major view of W^T; every product below stays column-major.
    ConstColMap wt(weight_.value.data(), kk, out_c_);
    for (int i = 0; i < x.n; ++i) {
        float* col = col_cache_.data() + kk * pixels * i;
        im2col(x.sample(i), in_c_, x.h, x.w, k_, stride_, pad_, oh_, ow_, col);
        ConstColMap patches(col, pixels, kk);
        ColMap yt(y.sample(i), pixels, out_c_);  // channel planes are contiguous
        yt.noalias() = patches * wt;
        if (bias_)
            yt.rowwise() += Eigen::Map<Eigen::RowVectorXf>(bias_->value.data(), out_c_);
    }
    return y;
}

Tensor Conv2d::backward(const Tensor& gy) {
    const std::size_t kk = static_cast<std::size_t>(in_c_) * k_ * k_;
    const std::size_t pixels = static_cast<std::size_t>(oh_) * ow_;
    Tensor gx(n_, in_c_, xh_, xw_);
    AlignedFloats gcol(kk * pixels);
    ConstColMap wt(weight_.value.data(), kk, out_c_);
    ColMap gwt(weight_.grad.data(), kk, out_c_);
    for (int i = 0; i < gy.n; ++i) {
        ConstColMap patches(col_cache_.data() + kk * pixels * i, pixels, kk);
        ConstColMap gyt(gy.sample(i), pixels, out_c_);
        gwt.noalias() += patches.transpose() * gyt;
        if (bias_) {
            Eigen::Map<Eigen::RowVectorXf> gb(bias_->grad.data(), out_c_);
            gb.noalias() += gyt.colwise().sum();
        }
        ColMap gpatches(gcol.data(), pixels, kk);
        gpatches.noalias() = gyt * wt.transpose();
        col2im_add(gcol.data(), in_c_, xh_, xw_, k_, stride_, pad_, oh_, ow_, gx.sample(i));
    }
    return gx;
}

void Conv2d::collect_params(std::vector<Param*>& out) {
    out.push_back(&weight_);
    if (bias_) out.push_back(bias_.get());
}

// ------------------------------------------------------- DepthwiseConv2d

DepthwiseConv2d::DepthwiseConv2d(std::string name, int channels, int kernel, int stride, int pad,
                                 std::mt19937_64& rng)
    : c_(channels), k_(kernel), stride_(stride), pad_(pad),
      weight_(name + ".weight", {channels, kernel, kernel}) {
    he_normal_init(weight_, kernel * kernel, rng);
}

Tensor DepthwiseConv2d::forward(const Tensor& x, bool) {
    if (x.c != c_) throw InternalError("DepthwiseConv2d: channel mismatch");
    oh_ = conv_out(x.h, k_, stride_, pad_);
    ow_ = conv_out(x.w, k_, stride_, pad_);
    x_cache_ = x;
    Tensor y(x.n, c_, oh_, ow_);
    for (int i = 0; i < x.n; ++i) {
        for (int ci = 0; ci < c_; ++ci) {
            const float* plane = x.sample(i) + static_cast<std::size_t>(ci) * x.h * x.w;
            const float* kern = weight_.value.data() + static_cast<std::size_t>(ci) * k_ * k_;
            float* out = y.sample(i) + static_cast<std::size_t>(ci) * oh_ * ow_;
            for (int oy = 0; oy < oh_; ++oy) {
                for (int ox = 0; ox < ow_; ++ox) {
                    float acc = 0.f;
                    int iy0 = oy * stride_ - pad_;
                    int ix0 = ox * stride_ - pad_;
                    for (int ky = 0; ky < k_; ++ky) {
                        int iy = iy0 + ky;
                        if (iy < 0 || iy >= x.h) continue;
                        for (int kx = 0; kx < k_; ++kx) {
                            int ix = ix0 + kx;
                            if (ix < 0 || ix >= x.w) continue;
                            acc += plane[static_cast<std::size_t>(iy) * x.w + ix] *
                                   kern[ky * k_ + kx];
                        }
                    }
                    out[static_cast<std::size_t>(oy) * ow_ + ox] = acc;
                }
            }
        }
    }
    return y;
}

Tensor DepthwiseConv2d::backward(const Tensor& gy) {
    Tensor gx(x_cache_.n, c_, x_cache_.h, x_cache_.w);
    const int h = x_cache_.h, w = x_cache_.w;
    for (int i = 0; i < gy.n; ++i) {
        for (int ci = 0; ci < c_; ++ci) {
            const float* plane = x_cache_.sample(i) + static_cast<std::size_t>(ci) * h * w;
            const float* kern = weight_.value.data() + static_cast<std::size_t>(ci) * k_ * k_;
            float* gkern = weight_.grad.data() + static_cast<std::size_t>(ci) * k_ * k_;
            const float* gout = gy.sample(i) + static_cast<std::size_t>(ci) * oh_ * ow_;
            float* gplane = gx.sample(i) + static_cast<std::size_t>(ci) * h * w;
            for (int oy = 0; oy < oh_; ++oy) {
                for (int ox = 0; ox < ow_; ++ox) {
                    float g = gout[static_cast<std::size_t>(oy) * ow_ + ox];
                    int iy0 = oy * stride_ - pad_;
                    int ix0 = ox * stride_ - pad_;
                    for (int ky = 0; ky < k_; ++ky) {
                        int iy = iy0 + ky;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < k_; ++kx) {
                            int ix = ix0 + kx;
                            if (ix < 0 || ix >= w) continue;
                            gkern[ky * k_ + kx] += g * plane[static_cast<std::size_t>(iy) * w + ix];
                            gplane[static_cast<std::size_t>(iy) * w + ix] += g * kern[ky * k_ + kx];
                        }
                    }
                }
            }
        }
    }
    return gx;
}

void DepthwiseConv2d::collect_params(std::vector<Param*>& out) { out.push_back(&weight_); }

// ----------------------------------------------------------------- Dense

Dense::Dense(std::string name, int in_f, int out_f, std::mt19937_64& rng, float init_scale)
    : in_f_(in_f), out_f_(out_f), weight_(name + ".weight", {out_f, in_f}),
      bias_(name + ".bias", {out_f}) {
    he_normal_init(weight_, in_f, rng, init_scale);
}

Tensor Dense::forward(const Tensor& x, bool) {
    if (x.c * x.h * x.w != in_f_) throw InternalError("Dense: feature size mismatch");
    x_cache_ = x;
    Tensor y(x.n, out_f_, 1, 1);
    ConstRowMap xm(x.data.data(), x.n, in_f_);
    ConstRowMap wm(weight_.value.data(), out_f_, in_f_);
    RowMap ym(y.data.data(), x.n, out_f_);
    ym.noalias() = xm * wm.transpose();
    ym.rowwise() += Eigen::Map<Eigen::RowVectorXf>(bias_.value.data(), out_f_);
    return y;
}

Tensor Dense::backward(const Tensor& gy) {
    Tensor gx(x_cache_.n, x_cache_.c, x_cache_.h, x_cache_.w);
    ConstRowMap gym(gy.data.data(), gy.n, out_f_);
    ConstRowMap xm(x_cache_.data.data(), x_cache_.n, in_f_);
    ConstRowMap wm(weight_.value.data(), out_f_, in_f_);
    RowMap gwm(weight_.grad.data(), out_f_, in_f_);
    gwm.noalias() += gym.transpose() * xm;
    Eigen::Map<Eigen::RowVectorXf> gb(bias_.grad.data(), out_f_);
    gb += gym.colwise().sum();
    RowMap gxm(gx.data.data(), gx.n, in_f_);
    gxm.noalias() = gym * wm;
    return gx;
}

void Dense::collect_params(std::vector<Param*>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
}

// ------------------------------------------------------------------ ReLU

Tensor ReLU::forward(const Tensor& x, bool) {
    Tensor y = x;
    pass_mask_.resize(x.data.size());
    if (max_ > 0.f) {
        for (std::size_t i = 0; i < y.data.size(); ++i) {
            float v = y.data[i];
            pass_mask_[i] = (v > 0.f && v < max_);
            y.data[i] = std::min(std::max(v, 0.f), max_);
        }
    } else {
        for (std::size_t i = 0; i < y.data.size(); ++i) {
            float v = y.data[i];
            pass_mask_[i] = (v > 0.f);
            y.data[i] = std::max(v, 0.f);
        }
    }
    return y;
}

Tensor ReLU::backward(const Tensor& gy) {
    Tensor gx = gy;
    for (std::size_t i = 0; i < gx.data.size(); ++i)
        if (!pass_mask_[i]) gx.data[i] = 0.f;
    return gx;
}

// ----------------------------------------------------------- BatchNorm2d

BatchNorm2d::BatchNorm2d(std::string name, int channels, float momentum, float eps)
    : c_(channels), momentum_(momentum), eps_(eps),
      gamma_(name + ".gamma", {channels}), beta_(name + ".beta", {channels}),
      running_mean_(name + ".running_mean", {channels}),
      running_var_(name + ".running_var", {channels}) {
    std::fill(gamma_.value.begin(), gamma_.value.end(), 1.f);
    std::fill(running_var_.value.begin(), running_var_.value.end(), 1.f);
    running_mean_.trainable = false;
    running_var_.trainable = false;
}

Tensor BatchNorm2d::forward(const Tensor& x, bool train) {
    Tensor y(x.n, x.c, x.h, x.w);
    const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
    cached_train_ = train;
    if (train) {
        xhat_ = Tensor(x.n, x.c, x.h, x.w);
        inv_std_.assign(c_, 0.f);
        const double m = static_cast<double>(x.n) * plane;
        for (int ci = 0; ci < c_; ++ci) {
            double sum = 0, sq = 0;
            for (int i = 0; i < x.n; ++i) {
                const float* p = x.sample(i) + ci * plane;
                for (std::size_t j = 0; j < plane; ++j) {
                    sum += p[j];
                    sq += static_cast<double>(p[j]) * p[j];
                }
            }
            const float mean = static_cast<float>(sum / m);
            const float var = std::max(0.f, static_cast<float>(sq / m - (sum / m) * (sum / m)));
            const float istd = 1.f / std::sqrt(var + eps_);
            inv_std_[ci] = istd;
            running_mean_.value[ci] =
                (1.f - momentum_) * running_mean_.value[ci] + momentum_ * mean;
            running_var_.value[ci] = (1.f - momentum_) * running_var_.value[ci] + momentum_ * var;
            for (int i = 0; i < x.n; ++i) {
                const float* p = x.sample(i) + ci * plane;
                float* xh = xhat_.sample(i) + ci * plane;
                float* out = y.sample(i) + ci * plane;
                for (std::size_t j = 0; j < plane; ++j) {
                    xh[j] = (p[j] - mean) * istd;
                    out[j] = gamma_.value[ci] * xh[j] + beta_.value[ci];
                }
            }
        }
    } else {
        for (int ci = 0; ci < c_; ++ci) {
            const float istd = 1.f / std::sqrt(running_var_.value[ci] + eps_);
            const float mean = running_mean_.value[ci];
            for (int i = 0; i < x.n; ++i) {
                const float* p = x.sample(i) + ci * plane;
                float* out = y.sample(i) + ci * plane;
                for (std::size_t j = 0; j < plane; ++j)
                    out[j] = gamma_.value[ci] * (p[j] - mean) * istd + beta_.value[ci];
            }
        }
    }
    return y;
}

Tensor BatchNorm2d::backward(const Tensor& gy) {
    if (!cached_train_) throw InternalError("BatchNorm2d: backward after eval-mode forward");
    const std::size_t plane = static_cast<std::size_t>(gy.h) * gy.w;
    const double m = static_cast<double>(gy.n) * plane;
    Tensor gx(gy.n, gy.c, gy.h, gy.w);
    for (int ci = 0; ci < c_; ++ci) {
        double sum_gy = 0, sum_gy_xhat = 0;
        for (int i = 0; i < gy.n; ++i) {
            const float* g = gy.sample(i) + ci * plane;
            const float* xh = xhat_.sample(i) + ci * plane;
            for (std::size_t j = 0; j < plane; ++j) {
                sum_gy += g[j];
                sum_gy_xhat += static_cast<double>(g[j]) * xh[j];
            }
        }
        gamma_.grad[ci] += static_cast<float>(sum_gy_xhat);
        beta_.grad[ci] += static_cast<float>(sum_gy);
        const float scale = gamma_.value[ci] * inv_std_[ci];
        for (int i = 0; i < gy.n; ++i) {
            const float* g = gy.sample(i) + ci * plane;
            const float* xh = xhat_.sample(i) + ci * plane;
            float* out = gx.sample(i) + ci * plane;
            for (std::size_t j = 0; j < plane; ++j) {
                out[j] = scale * (g[j] - static_cast<float>(sum_gy / m) -
                                  xh[j] * static_cast<float>(sum_gy_xhat / m));
            }
        }
    }
    return gx;
}

void BatchNorm2d::collect_params(std::vector<Param*>& out) {
    out.push_back(&gamma_);
    out.push_back(&beta_);
}

void BatchNorm2d::collect_buffers(std::vector<Param*>& out) {
    out.push_back(&running_mean_);
    out.push_back(&running_var_);
}

// --------------------------------------------------------- GlobalAvgPool

Tensor GlobalAvgPool::forward(const Tensor& x, bool) {
    h_ = x.h;
    w_ = x.w;
    Tensor y(x.n, x.c, 1, 1);
    const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
    for (int i = 0; i < x.n; ++i) {
        for (int ci = 0; ci < x.c; ++ci) {
            const float* p = x.sample(i) + ci * plane;
            double acc = 0;
            for (std::size_t j = 0; j < plane; ++j) acc += p[j];
            y.sample(i)[ci] = static_cast<float>(acc / static_cast<double>(plane));
        }
    }
    return y;
}

Tensor GlobalAvgPool::backward(const Tensor& gy) {
    Tensor gx(gy.n, gy.c, h_, w_);
    const std::size_t plane = static_cast<std::size_t>(h_) * w_;
    const float inv = 1.f / static_cast<float>(plane);
    for (int i = 0; i < gy.n; ++i) {
        for (int ci = 0; ci < gy.c; ++ci) {
            float g = gy.sample(i)[ci] * inv;
            float* out = gx.sample(i) + ci * plane;
            for (std::size_t j = 0; j < plane; ++j) out[j] = g;
        }
    }
    return gx;
}

// ------------------------------------------------------ InvertedResidual

InvertedResidual::InvertedResidual(const std::string& name, int in_c, int out_c, int stride,
                                   int expand_ratio, std::mt19937_64& rng) {
    use_skip_ = (stride == 1 && in_c == out_c);
    int mid = in_c * expand_ratio;
    if (expand_ratio != 1) {
        path_.push_back(std::make_unique<Conv2d>(name + ".expand", in_c, mid, 1, 1, 0, false, rng));
        path_.push_back(std::make_unique<BatchNorm2d>(name + ".expand_bn", mid));
        path_.push_back(std::make_unique<ReLU>(6.f));
    }
    path_.push_back(std::make_unique<DepthwiseConv2d>(name + ".dw", mid, 3, stride, 1, rng));
    path_.push_back(std::make_unique<BatchNorm2d>(name + ".dw_bn", mid));
    path_.push_back(std::make_unique<ReLU>(6.f));
    path_.push_back(std::make_unique<Conv2d>(name + ".project", mid, out_c, 1, 1, 0, false, rng));
    path_.push_back(std::make_unique<BatchNorm2d>(name + ".project_bn", out_c));
}

Tensor InvertedResidual::forward(const Tensor& x, bool train) {
    Tensor y = x;
    for (auto& l : path_) y = l->forward(y, train);
    if (use_skip_) {
        for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += x.data[i];
    }
    return y;
}

Tensor InvertedResidual::backward(const Tensor& gy) {
    Tensor g = gy;
    for (auto it = path_.rbegin(); it != path_.rend(); ++it) g = (*it)->backward(g);
    if (use_skip_) {
        for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += gy.data[i];
    }
    return g;
}

void InvertedResidual::collect_params(std::vector<Param*>& out) {
    for (auto& l : path_) l->collect_params(out);
}

void InvertedResidual::collect_buffers(std::vector<Param*>& out) {
    for (auto& l : path_) l->collect_buffers(out);
}

}  // namespace sia::nn
