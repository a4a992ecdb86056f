#pragma once

#include <cstdint>
#include <vector>

#include "c2ae/network.hpp"

namespace c2ae {

enum class OptAlgo { Adam, Sgd };

struct OptimizerConfig {
    OptAlgo algo = OptAlgo::Adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double momentum = 0.9;  // sgd only
};

// Per-network optimizer state; accumulator shapes mirror the parameters.
class Optimizer {
public:
    Optimizer(const Network& net, const OptimizerConfig& cfg);

    void step(Network& net, const NetworkGrads& grads);
    std::uint64_t step_count() const { return t_; }
    const OptimizerConfig& config() const { return cfg_; }

private:
    OptimizerConfig cfg_;
    std::vector<Matrix> m_w_, v_w_;                 // adam moments / sgd velocity
    std::vector<std::vector<double>> m_b_, v_b_;
    std::uint64_t t_ = 0;
};

}  // namespace c2ae
