#pragma once

#include <cstdint>
#include <vector>

#include "c2ae/matrix.hpp"

namespace c2ae {

enum class Activation { Linear, LeakyRelu };

inline double leaky_relu(double x, double slope) {
    return x >= 0.0 ? x : slope * x;
}

// derivative convention at 0: slope
inline double leaky_relu_deriv(double x, double slope) {
    return x > 0.0 ? 1.0 : slope;
}

struct DenseLayer {
    Matrix weight;             // out_dim x in_dim
    std::vector<double> bias;  // out_dim
    Activation activation = Activation::Linear;
    double slope = 0.01;

    std::size_t in_dim() const { return weight.cols; }
    std::size_t out_dim() const { return weight.rows; }
};

struct Network {
    std::vector<DenseLayer> layers;

    std::size_t in_dim() const { return layers.front().in_dim(); }
    std::size_t out_dim() const { return layers.back().out_dim(); }
    std::size_t param_count() const;
};

// Everything backward() needs from the matching forward() call: the input fed
// to each layer and each layer's pre-activation.
struct ForwardCache {
    std::vector<Matrix> inputs;
    std::vector<Matrix> preacts;
};

struct NetworkGrads {
    std::vector<Matrix> d_weight;
    std::vector<std::vector<double>> d_bias;
};

// Hidden layers get this activation; the last layer is always linear so the
// latent coordinates and decoder scores stay unconstrained.
struct ActivationSpec {
    Activation hidden = Activation::LeakyRelu;
    double slope = 0.01;
};

// Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases,
// deterministic for a fixed seed.
Network init_network(const std::vector<std::size_t>& layer_dims,
                     const ActivationSpec& act, std::uint64_t seed);

// batch: in_dim x n, columns are instances. Pass a cache to enable backward.
Matrix forward(const Network& net, const Matrix& batch, ForwardCache* cache = nullptr);

// Reverse-mode gradients of the scalar whose output gradient is grad_output.
// grad_input, when requested, is the gradient w.r.t. the forward input batch.
NetworkGrads backward(const Network& net, const ForwardCache& cache,
                      const Matrix& grad_output, Matrix* grad_input = nullptr);

NetworkGrads zero_grads_like(const Network& net);
void accumulate(NetworkGrads& acc, const NetworkGrads& g, double scale = 1.0);

// flat parameter view in layer order (weights row-major, then bias)
std::vector<double> flatten_params(const Network& net);
void unflatten_params(Network& net, const std::vector<double>& flat);
std::vector<double> flatten_grads(const NetworkGrads& g);

}  // namespace c2ae
