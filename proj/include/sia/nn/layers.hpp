#pragma once

#include <memory>
#include <random>
#include <vector>

#include "sia/nn/tensor.hpp"

namespace sia::nn {

class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x, bool train) = 0;
    // Consumes the gradient w.r.t. this layer's output, accumulates parameter
    // gradients, returns the gradient w.r.t. the input. Relies on the caches
    // of the immediately preceding forward call.
    virtual Tensor backward(const Tensor& gy) = 0;
    virtual void collect_params(std::vector<Param*>& out) {}
    // Non-trainable state that still belongs in a checkpoint (BN running stats).
    virtual void collect_buffers(std::vector<Param*>& out) {}
};

class Conv2d : public Layer {
public:
    // Weight layout (out_c, in_c, kh, kw); He-normal init from rng.
    Conv2d(std::string name, int in_c, int out_c, int kernel, int stride, int pad, bool bias,
           std::mt19937_64& rng);
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& gy) override;
    void collect_params(std::vector<Param*>& out) override;

private:
    int in_c_, out_c_, k_, stride_, pad_;
    Param weight_;
    std::unique_ptr<Param> bias_;
    // im2col patches from the last forward, reused by backward
    AlignedFloats col_cache_;
    int n_ = 0, xh_ = 0, xw_ = 0, oh_ = 0, ow_ = 0;
};

class DepthwiseConv2d : public Layer {
public:
    DepthwiseConv2d(std::string name, int channels, int kernel, int stride, int pad,
                    std::mt19937_64& rng);
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& gy) override;
    void collect_params(std::vector<Param*>& out) override;

private:
    int c_, k_, stride_, pad_;
    Param weight_;  // (c, kh, kw)
    Tensor x_cache_;
    int oh_ = 0, ow_ = 0;
};

class Dense : public Layer {
public:
    // Treats (N, C, H, W) input as N feature rows of length C*H*W.
    // init_scale shrinks the He init; the embedding head uses a small scale so
    // fresh models start with near-zero embeddings.
    Dense(std::string name, int in_f, int out_f, std::mt19937_64& rng, float init_scale = 1.f);
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& gy) override;
    void collect_params(std::vector<Param*>& out) override;

private:
    int in_f_, out_f_;
    Param weight_;  // (out_f, in_f)
    Param bias_;
    Tensor x_cache_;
};

class ReLU : public Layer {
public:
    // max_value <= 0 means unbounded; 6 gives ReLU6.
    explicit ReLU(float max_value = 0.f) : max_(max_value) {}
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& gy) override;

private:
    float max_;
    std::vector<std::uint8_t> pass_mask_;
};

class BatchNorm2d : public Layer {
public:
    explicit BatchNorm2d(std::string name, int channels, float momentum = 0.1f,
                         float eps = 1e-5f);
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& gy) override;
    void collect_params(std::vector<Param*>& out) override;
    void collect_buffers(std::vector<Param*>& out) override;

private:
    int c_;
    float momentum_, eps_;
    Param gamma_, beta_;
    Param running_mean_, running_var_;
    // backward caches
    Tensor xhat_;
    std::vector<float> inv_std_;
    bool cached_train_ = false;
};

class GlobalAvgPool : public Layer {
public:
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& gy) override;

private:
    int h_ = 0, w_ = 0;
};

// expand(1x1) -> BN -> ReLU6 -> depthwise(3x3) -> BN -> ReLU6 -> project(1x1)
// -> BN, with an identity skip when stride == 1 and in_c == out_c. The expand
// stage is omitted when expand_ratio == 1.
class InvertedResidual : public Layer {
public:
    InvertedResidual(const std::string& name, int in_c, int out_c, int stride, int expand_ratio,
                     std::mt19937_64& rng);
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& gy) override;
    void collect_params(std::vector<Param*>& out) override;
    void collect_buffers(std::vector<Param*>& out) override;

private:
    bool use_skip_;
    std::vector<std::unique_ptr<Layer>> path_;
};

}  // namespace sia::nn
