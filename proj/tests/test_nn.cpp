#include <cmath>
#include <fstream>
#include <random>

#include "doctest.h"
#include "sia/nn/adam.hpp"
#include "sia/nn/layers.hpp"
#include "sia/nn/network.hpp"
#include "sia/nn/safetensors.hpp"
#include "test_util.hpp"

using namespace sia::nn;

namespace {

Tensor random_tensor(int n, int c, int h, int w, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> d(0.f, 1.f);
    Tensor t(n, c, h, w);
    for (auto& v : t.data) v = d(rng);
    return t;
}

// Scalar objective: weighted sum of the layer output with fixed random
// weights, so every output element feeds the gradient.
struct FdHarness {
    std::vector<float> proj;

    double objective(Layer& layer, const Tensor& x) {
        Tensor y = const_cast<Layer&>(layer).forward(x, /*train=*/true);
        if (proj.size() != y.data.size()) {
            std::mt19937_64 rng(4242);
            std::normal_distribution<float> d(0.f, 1.f);
            proj.resize(y.data.size());
            for (auto& v : proj) v = d(rng);
        }
        double acc = 0;
        for (std::size_t i = 0; i < y.data.size(); ++i)
            acc += static_cast<double>(y.data[i]) * proj[i];
        return acc;
    }

    // Analytic input/parameter gradients via backward with gy = proj.
    Tensor analytic(Layer& layer, const Tensor& x) {
        Tensor y = layer.forward(x, true);
        std::vector<Param*> params;
        layer.collect_params(params);
        for (Param* p : params) p->zero_grad();
        Tensor gy = y;
        for (std::size_t i = 0; i < gy.data.size(); ++i) gy.data[i] = proj[i];
        return layer.backward(gy);
    }
};

// Central finite differences against the analytic gradient; float32 noise
// bounds the achievable agreement, 1% relative catches real defects.
void check_layer_gradients(Layer& layer, Tensor x, double tol = 1e-2, float h = 1e-2f) {
    FdHarness fd;
    fd.objective(layer, x);  // sizes the projection
    Tensor gx = fd.analytic(layer, x);

    std::mt19937_64 pickrng(99);
    std::uniform_int_distribution<std::size_t> pick(0, x.data.size() - 1);
    double worst = 0;
    for (int probe = 0; probe < 24; ++probe) {
        std::size_t i = pick(pickrng);
        Tensor xp = x, xm = x;
        xp.data[i] += h;
        xm.data[i] -= h;
        double num = (fd.objective(layer, xp) - fd.objective(layer, xm)) / (2.0 * h);
        double ana = gx.data[i];
        double scale = std::max({std::abs(num), std::abs(ana), 1e-3});
        worst = std::max(worst, std::abs(num - ana) / scale);
    }
    CHECK(worst < tol);

    std::vector<Param*> params;
    layer.collect_params(params);
    for (Param* p : params) {
        fd.analytic(layer, x);  // refresh grads
        auto saved_grad = p->grad;
        std::uniform_int_distribution<std::size_t> ppick(0, p->size() - 1);
        for (int probe = 0; probe < 12; ++probe) {
            std::size_t i = ppick(pickrng);
            float orig = p->value[i];
            p->value[i] = orig + h;
            double fp = fd.objective(layer, x);
            p->value[i] = orig - h;
            double fm = fd.objective(layer, x);
            p->value[i] = orig;
            double num = (fp - fm) / (2.0 * h);
            double ana = saved_grad[i];
            double scale = std::max({std::abs(num), std::abs(ana), 1e-3});
            CHECK(std::abs(num - ana) / scale < tol);
        }
    }
}

}  // namespace

TEST_CASE("conv2d gradients match finite differences") {
    std::mt19937_64 rng(1);
    Conv2d conv("c", 3, 4, 3, 2, 1, true, rng);
    check_layer_gradients(conv, random_tensor(2, 3, 9, 9, 5));
}

TEST_CASE("conv2d 1x1 gradients match finite differences") {
    std::mt19937_64 rng(2);
    Conv2d conv("c", 4, 6, 1, 1, 0, false, rng);
    check_layer_gradients(conv, random_tensor(2, 4, 5, 5, 6));
}

TEST_CASE("depthwise conv gradients match finite differences") {
    std::mt19937_64 rng(3);
    DepthwiseConv2d dw("d", 4, 3, 2, 1, rng);
    check_layer_gradients(dw, random_tensor(2, 4, 9, 9, 7));
}

TEST_CASE("dense gradients match finite differences") {
    std::mt19937_64 rng(4);
    Dense dense("f", 12, 5, rng);
    check_layer_gradients(dense, random_tensor(3, 12, 1, 1, 8));
}

TEST_CASE("batchnorm gradients match finite differences") {
    std::mt19937_64 rng(5);
    BatchNorm2d bn("b", 3);
    check_layer_gradients(bn, random_tensor(2, 3, 6, 6, 9), 2e-2);
}

TEST_CASE("relu6 gradients match finite differences away from kinks") {
    ReLU relu(6.f);
    Tensor x = random_tensor(2, 3, 4, 4, 10);
    // keep probes away from the non-differentiable points at 0 and 6
    for (auto& v : x.data) {
        if (std::abs(v) < 0.1f) v += 0.3f;
        v *= 2.f;
    }
    check_layer_gradients(relu, x, 1e-2, 1e-3f);
}

TEST_CASE("global average pool gradients match finite differences") {
    GlobalAvgPool gap;
    check_layer_gradients(gap, random_tensor(2, 5, 4, 4, 11));
}

TEST_CASE("inverted residual equals its unrolled path plus skip, exactly") {
    // FD through stacked BN + ReLU6 kinks is too noisy to bound tightly, so
    // check the composite wiring against a same-seeded explicit layer chain:
    // identical float ops, so forward and backward must agree bit-for-bit.
    auto build_path = [](int in_c, int out_c, int stride, int t, std::mt19937_64& rng) {
        Network net;
        int mid = in_c * t;
        net.add(std::make_unique<Conv2d>("ir.expand", in_c, mid, 1, 1, 0, false, rng));
        net.add(std::make_unique<BatchNorm2d>("ir.expand_bn", mid));
        net.add(std::make_unique<ReLU>(6.f));
        net.add(std::make_unique<DepthwiseConv2d>("ir.dw", mid, 3, stride, 1, rng));
        net.add(std::make_unique<BatchNorm2d>("ir.dw_bn", mid));
        net.add(std::make_unique<ReLU>(6.f));
        net.add(std::make_unique<Conv2d>("ir.project", mid, out_c, 1, 1, 0, false, rng));
        net.add(std::make_unique<BatchNorm2d>("ir.project_bn", out_c));
        return net;
    };

    SUBCASE("with skip") {
        std::mt19937_64 r1(6), r2(6);
        InvertedResidual ir("ir", 4, 4, 1, 2, r1);
        Network path = build_path(4, 4, 1, 2, r2);

        Tensor x = random_tensor(2, 4, 6, 6, 12);
        Tensor y_ir = ir.forward(x, true);
        Tensor y_path = path.forward(x, true);
        for (std::size_t i = 0; i < y_ir.data.size(); ++i)
            CHECK(y_ir.data[i] == y_path.data[i] + x.data[i]);

        Tensor gy = random_tensor(2, 4, 6, 6, 13);
        Tensor gx_ir = ir.backward(gy);
        Tensor gx_path = path.backward(gy);
        for (std::size_t i = 0; i < gx_ir.data.size(); ++i)
            CHECK(gx_ir.data[i] == gx_path.data[i] + gy.data[i]);

        std::vector<Param*> p_ir, p_path;
        ir.collect_params(p_ir);
        path.forward(x, true);  // keep structures comparable
        for (auto* p : path.params()) p_path.push_back(p);
        REQUIRE(p_ir.size() == p_path.size());
    }

    SUBCASE("strided, no skip") {
        std::mt19937_64 r1(7), r2(7);
        InvertedResidual ir("ir", 4, 6, 2, 2, r1);
        Network path = build_path(4, 6, 2, 2, r2);

        Tensor x = random_tensor(2, 4, 6, 6, 14);
        Tensor y_ir = ir.forward(x, true);
        Tensor y_path = path.forward(x, true);
        CHECK(y_ir.data == y_path.data);

        Tensor gy = random_tensor(2, 6, 3, 3, 15);
        Tensor gx_ir = ir.backward(gy);
        Tensor gx_path = path.backward(gy);
        CHECK(gx_ir.data == gx_path.data);
    }
}

TEST_CASE("gradients accumulate across backward calls") {
    std::mt19937_64 rng(7);
    Dense dense("f", 4, 2, rng);
    Tensor x = random_tensor(1, 4, 1, 1, 14);
    Tensor y = dense.forward(x, true);
    Tensor gy(1, 2, 1, 1);
    gy.data = {1.f, 1.f};
    dense.backward(gy);
    std::vector<Param*> ps;
    dense.collect_params(ps);
    auto once = ps[0]->grad;
    dense.forward(x, true);
    dense.backward(gy);
    for (std::size_t i = 0; i < once.size(); ++i)
        CHECK(ps[0]->grad[i] == doctest::Approx(2 * once[i]));
}

TEST_CASE("batchnorm eval mode uses running statistics") {
    std::mt19937_64 rng(8);
    BatchNorm2d bn("b", 2);
    Tensor x = random_tensor(4, 2, 3, 3, 15);
    for (int i = 0; i < 50; ++i) bn.forward(x, true);
    Tensor y1 = bn.forward(x, false);
    Tensor y2 = bn.forward(x, false);
    CHECK(y1.data == y2.data);
    // after long exposure to one batch, eval output approximates train output
    Tensor yt = bn.forward(x, true);
    double diff = 0;
    for (std::size_t i = 0; i < yt.data.size(); ++i)
        diff = std::max(diff, static_cast<double>(std::abs(yt.data[i] - y1.data[i])));
    CHECK(diff < 0.1);
}

TEST_CASE("adam minimizes a quadratic") {
    Param p("p", {4});
    p.value = {5.f, -3.f, 2.f, 0.5f};
    Adam opt(0.1);
    for (int it = 0; it < 300; ++it) {
        for (std::size_t i = 0; i < p.size(); ++i) p.grad[i] = 2.f * p.value[i];
        opt.step({&p});
        p.zero_grad();
    }
    for (float v : p.value) CHECK(std::abs(v) < 1e-2f);
}

TEST_CASE("adam skips frozen parameters") {
    Param p("p", {2});
    p.value = {1.f, 1.f};
    p.trainable = false;
    Adam opt(0.1);
    p.grad = {1.f, 1.f};
    opt.step({&p});
    CHECK(p.value[0] == 1.f);
}

TEST_CASE("safetensors round trip and byte stability") {
    sia::test::TempDir dir("safetensors");
    std::map<std::string, NamedTensor> tensors;
    std::mt19937_64 rng(16);
    std::normal_distribution<float> d(0.f, 1.f);
    NamedTensor a;
    a.shape = {2, 3};
    for (int i = 0; i < 6; ++i) a.data.push_back(d(rng));
    NamedTensor b;
    b.shape = {4};
    for (int i = 0; i < 4; ++i) b.data.push_back(d(rng));
    tensors["z.weight"] = a;
    tensors["a.bias"] = b;

    auto f1 = dir.path / "one.safetensors";
    auto f2 = dir.path / "two.safetensors";
    save_safetensors(tensors, f1);
    save_safetensors(tensors, f2);

    auto read = [](const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    };
    CHECK(read(f1) == read(f2));

    auto back = load_safetensors(f1);
    REQUIRE(back.size() == 2);
    CHECK(back.at("z.weight") == a);
    CHECK(back.at("a.bias") == b);
}
