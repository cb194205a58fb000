#pragma once

#include <memory>
#include <vector>

#include "sia/nn/layers.hpp"

namespace sia::nn {

// Plain sequential container. Composite layers (InvertedResidual) keep their
// skip connections internal, so a flat sequence is all the towers need.
class Network {
public:
    void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

    Tensor forward(const Tensor& x, bool train) {
        Tensor y = x;
        for (auto& l : layers_) y = l->forward(y, train);
        return y;
    }

    Tensor backward(const Tensor& gy) {
        Tensor g = gy;
        for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
        return g;
    }

    std::vector<Param*> params() {
        std::vector<Param*> out;
        for (auto& l : layers_) l->collect_params(out);
        return out;
    }

    std::vector<Param*> buffers() {
        std::vector<Param*> out;
        for (auto& l : layers_) l->collect_buffers(out);
        return out;
    }

    void zero_grad() {
        for (Param* p : params()) p->zero_grad();
    }

    std::size_t param_count() const {
        std::size_t total = 0;
        for (auto& l : layers_) {
            std::vector<Param*> ps;
            l->collect_params(ps);
            for (Param* p : ps) total += p->size();
        }
        return total;
    }

private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

}  // namespace sia::nn
