#include "c2ae/network.hpp"

#include <cmath>
#include <stdexcept>

#include "c2ae/rng.hpp"

namespace c2ae {

std::size_t Network::param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
}

Network init_network(const std::vector<std::size_t>& layer_dims,
                     const ActivationSpec& act, std::uint64_t seed) {
    if (layer_dims.size() < 2)
        throw std::invalid_argument("init_network: need at least an input and an output dimension");
    for (std::size_t d : layer_dims)
        if (d == 0) throw std::invalid_argument("init_network: zero layer dimension");

    Rng rng(seed);
    Network net;
    const std::size_t n_layers = layer_dims.size() - 1;
    net.layers.reserve(n_layers);
    for (std::size_t k = 0; k < n_layers; ++k) {
        const std::size_t fan_in = layer_dims[k];
        const std::size_t fan_out = layer_dims[k + 1];
        DenseLayer layer;
        layer.weight = Matrix(fan_out, fan_in);
        layer.bias.assign(fan_out, 0.0);
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (double& w : layer.weight.data) w = rng.uniform(-bound, bound);
        layer.activation = (k + 1 == n_layers) ? Activation::Linear : act.hidden;
        layer.slope = act.slope;
        net.layers.push_back(std::move(layer));
    }
    return net;
}

Matrix forward(const Network& net, const Matrix& batch, ForwardCache* cache) {
    if (batch.rows != net.in_dim())
        throw std::invalid_argument("forward: batch rows do not match network input dimension");
    if (cache) {
        cache->inputs.clear();
        cache->preacts.clear();
        cache->inputs.reserve(net.layers.size());
        cache->preacts.reserve(net.layers.size());
    }

    Matrix x = batch;
    for (const auto& layer : net.layers) {
        if (cache) cache->inputs.push_back(x);
        Matrix z = matmul(layer.weight, x);
        for (std::size_t i = 0; i < z.rows; ++i) {
            const double b = layer.bias[i];
            for (std::size_t j = 0; j < z.cols; ++j) z(i, j) += b;
        }
        if (cache) cache->preacts.push_back(z);
        if (layer.activation == Activation::LeakyRelu) {
            for (double& v : z.data) v = leaky_relu(v, layer.slope);
        }
        x = std::move(z);
    }
    return x;
}

NetworkGrads backward(const Network& net, const ForwardCache& cache,
                      const Matrix& grad_output, Matrix* grad_input) {
    const std::size_t n_layers = net.layers.size();
    if (cache.inputs.size() != n_layers || cache.preacts.size() != n_layers)
        throw std::invalid_argument("backward: cache does not match network");
    if (grad_output.rows != net.out_dim() || grad_output.cols != cache.preacts.back().cols)
        throw std::invalid_argument("backward: grad_output shape does not match forward output");

    NetworkGrads grads;
    grads.d_weight.resize(n_layers);
    grads.d_bias.resize(n_layers);

    Matrix delta = grad_output;
    for (std::size_t k = n_layers; k-- > 0;) {
        const DenseLayer& layer = net.layers[k];
        if (layer.activation == Activation::LeakyRelu) {
            const Matrix& z = cache.preacts[k];
            for (std::size_t i = 0; i < delta.size(); ++i)
                delta.data[i] *= leaky_relu_deriv(z.data[i], layer.slope);
        }
        grads.d_weight[k] = matmul_nt(delta, cache.inputs[k]);
        grads.d_bias[k].assign(layer.out_dim(), 0.0);
        for (std::size_t i = 0; i < delta.rows; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < delta.cols; ++j) s += delta(i, j);
            grads.d_bias[k][i] = s;
        }
        if (k > 0 || grad_input) delta = matmul_tn(layer.weight, delta);
    }
    if (grad_input) *grad_input = std::move(delta);
    return grads;
}

NetworkGrads zero_grads_like(const Network& net) {
    NetworkGrads g;
    g.d_weight.reserve(net.layers.size());
    g.d_bias.reserve(net.layers.size());
    for (const auto& l : net.layers) {
        g.d_weight.emplace_back(l.out_dim(), l.in_dim());
        g.d_bias.emplace_back(l.out_dim(), 0.0);
    }
    return g;
}

void accumulate(NetworkGrads& acc, const NetworkGrads& g, double scale) {
    if (acc.d_weight.size() != g.d_weight.size())
        throw std::invalid_argument("accumulate: gradient layer counts differ");
    for (std::size_t k = 0; k < g.d_weight.size(); ++k) {
        for (std::size_t i = 0; i < g.d_weight[k].size(); ++i)
            acc.d_weight[k].data[i] += scale * g.d_weight[k].data[i];
        for (std::size_t i = 0; i < g.d_bias[k].size(); ++i)
            acc.d_bias[k][i] += scale * g.d_bias[k][i];
    }
}

std::vector<double> flatten_params(const Network& net) {
    std::vector<double> flat;
    flat.reserve(net.param_count());
    for (const auto& l : net.layers) {
        flat.insert(flat.end(), l.weight.data.begin(), l.weight.data.end());
        flat.insert(flat.end(), l.bias.begin(), l.bias.end());
    }
    return flat;
}

void unflatten_params(Network& net, const std::vector<double>& flat) {
    if (flat.size() != net.param_count())
        throw std::invalid_argument("unflatten_params: size mismatch");
    std::size_t pos = 0;
    for (auto& l : net.layers) {
        std::copy(flat.begin() + pos, flat.begin() + pos + l.weight.size(), l.weight.data.begin());
        pos += l.weight.size();
        std::copy(flat.begin() + pos, flat.begin() + pos + l.bias.size(), l.bias.begin());
        pos += l.bias.size();
    }
}

std::vector<double> flatten_grads(const NetworkGrads& g) {
    std::vector<double> flat;
    for (std::size_t k = 0; k < g.d_weight.size(); ++k) {
        flat.insert(flat.end(), g.d_weight[k].data.begin(), g.d_weight[k].data.end());
        flat.insert(flat.end(), g.d_bias[k].begin(), g.d_bias[k].end());
    }
    return flat;
}

}  // namespace c2ae
