#include "c2ae/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace c2ae {

Optimizer::Optimizer(const Network& net, const OptimizerConfig& cfg) : cfg_(cfg) {
    if (cfg.learning_rate <= 0.0)
        throw std::invalid_argument("optimizer: learning rate must be positive");
    for (const auto& l : net.layers) {
        m_w_.emplace_back(l.out_dim(), l.in_dim());
        m_b_.emplace_back(l.out_dim(), 0.0);
        if (cfg.algo == OptAlgo::Adam) {
            v_w_.emplace_back(l.out_dim(), l.in_dim());
            v_b_.emplace_back(l.out_dim(), 0.0);
        }
    }
}

void Optimizer::step(Network& net, const NetworkGrads& grads) {
    if (grads.d_weight.size() != net.layers.size() || m_w_.size() != net.layers.size())
        throw std::invalid_argument("optimizer step: layer count mismatch");
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        if (!grads.d_weight[k].same_shape(net.layers[k].weight) ||
            grads.d_bias[k].size() != net.layers[k].bias.size())
            throw std::invalid_argument("optimizer step: gradient shape mismatch");
    }

    ++t_;
    const double lr = cfg_.learning_rate;
    if (cfg_.algo == OptAlgo::Adam) {
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t k = 0; k < net.layers.size(); ++k) {
            auto update = [&](double& p, double g, double& m, double& v) {
                m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
                v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g * g;
                p -= lr * (m / bc1) / (std::sqrt(v / bc2) + cfg_.eps);
            };
            auto& layer = net.layers[k];
            for (std::size_t i = 0; i < layer.weight.size(); ++i)
                update(layer.weight.data[i], grads.d_weight[k].data[i],
                       m_w_[k].data[i], v_w_[k].data[i]);
            for (std::size_t i = 0; i < layer.bias.size(); ++i)
                update(layer.bias[i], grads.d_bias[k][i], m_b_[k][i], v_b_[k][i]);
        }
    } else {
        for (std::size_t k = 0; k < net.layers.size(); ++k) {
            auto& layer = net.layers[k];
            for (std::size_t i = 0; i < layer.weight.size(); ++i) {
                double& vel = m_w_[k].data[i];
                vel = cfg_.momentum * vel + grads.d_weight[k].data[i];
                layer.weight.data[i] -= lr * vel;
            }
            for (std::size_t i = 0; i < layer.bias.size(); ++i) {
                double& vel = m_b_[k][i];
                vel = cfg_.momentum * vel + grads.d_bias[k][i];
                layer.bias[i] -= lr * vel;
            }
        }
    }
}

}  // namespace c2ae
