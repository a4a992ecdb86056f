#include "c2ae/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "c2ae/losses.hpp"
#include "c2ae/model.hpp"
#include "c2ae/network.hpp"
#include "c2ae/rng.hpp"

namespace c2ae {

std::vector<double> finite_diff_grad(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x, double h) {
    if (h <= 0.0) throw std::invalid_argument("finite_diff_grad: h must be positive");
    std::vector<double> grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        x[i] = xi + h;
        const double fp = f(x);
        x[i] = xi - h;
        const double fm = f(x);
        x[i] = xi;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw std::runtime_error("finite_diff_grad: non-finite function value");
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

double rel_error(double a, double b, double floor) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

namespace {

constexpr double kH = 1e-5;

// The floor scales with the case's gradient magnitude: finite differences
// carry round-off noise proportional to |f|/h, so near-zero entries are
// judged against the gradient's scale instead of their own.
void tally(GradCheckReport& rep, const std::vector<double>& analytic,
           const std::vector<double>& fd, double tol) {
    ++rep.cases;
    double scale = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i)
        scale = std::max({scale, std::abs(analytic[i]), std::abs(fd[i])});
    const double floor = std::max(1e-6, 1e-2 * scale);
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i)
        worst = std::max(worst, rel_error(analytic[i], fd[i], floor));
    rep.max_rel_err = std::max(rep.max_rel_err, worst);
    if (worst > tol) ++rep.failures;
}

LabelSets random_sets(Rng& rng, std::size_t m, std::size_t n, bool with_missing) {
    LabelSets sets;
    sets.n_labels = m;
    sets.pos.resize(n);
    sets.neg.resize(n);
    sets.missing.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double u = rng.uniform();
            if (with_missing && u < 0.2) sets.missing[i].push_back(j);
            else if (u < 0.6) sets.pos[i].push_back(j);
            else sets.neg[i].push_back(j);
        }
    }
    return sets;
}

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double range) {
    Matrix m(rows, cols);
    for (double& v : m.data) v = rng.uniform(-range, range);
    return m;
}

GradCheckReport check_latent_impl(std::uint64_t seed, std::size_t cases, double tol,
                                  bool printed_form) {
    GradCheckReport rep;
    rep.name = printed_form ? "latent-grads-printed-form" : "latent-grads";
    Rng rng(seed);
    for (std::size_t c = 0; c < cases; ++c) {
        const std::size_t l = 1 + rng.uniform_index(8);
        const std::size_t n = 1 + rng.uniform_index(16);
        const double lambda = c % 3 == 0 ? 0.5 : rng.uniform(0.0, 2.0);
        const bool normalize = c % 4 == 3;
        const Matrix cx = random_matrix(rng, l, n, 1.0);
        const Matrix cy = random_matrix(rng, l, n, 1.0);

        Matrix d_cx, d_cy;
        latent_grads(cx, cy, lambda, d_cx, d_cy, normalize);
        if (printed_form) {
            // encoder-side gradient with the difference term's sign flipped:
            // +2(cx - cy) instead of -2(cx - cy)
            const LatentPenaltyTerms t = latent_penalty_terms(cx, cy, normalize);
            const double w = 4.0 * lambda * (normalize ? 1.0 / static_cast<double>(n) : 1.0);
            d_cy = matmul(t.whiten_y, cy);
            for (std::size_t i = 0; i < d_cy.size(); ++i)
                d_cy.data[i] = 2.0 * t.diff.data[i] + w * d_cy.data[i];
        }

        std::vector<double> flat(cx.data);
        flat.insert(flat.end(), cy.data.begin(), cy.data.end());
        const auto f = [&](const std::vector<double>& v) {
            Matrix a(l, n), b(l, n);
            std::copy(v.begin(), v.begin() + l * n, a.data.begin());
            std::copy(v.begin() + l * n, v.end(), b.data.begin());
            return latent_loss(a, b, lambda, normalize);
        };
        const std::vector<double> fd = finite_diff_grad(f, flat, kH);

        std::vector<double> analytic(d_cx.data);
        analytic.insert(analytic.end(), d_cy.data.begin(), d_cy.data.end());
        tally(rep, analytic, fd, tol);
    }
    return rep;
}

}  // namespace

GradCheckReport check_latent_grads(std::uint64_t seed, std::size_t cases, double tol) {
    return check_latent_impl(seed, cases, tol, false);
}

GradCheckReport check_latent_grads_printed_form(std::uint64_t seed, std::size_t cases,
                                                double tol) {
    return check_latent_impl(seed, cases, tol, true);
}

GradCheckReport check_output_grads(std::uint64_t seed, std::size_t cases, double tol) {
    GradCheckReport rep;
    rep.name = "output-grads";
    Rng rng(seed);
    for (std::size_t c = 0; c < cases; ++c) {
        const std::size_t m = 1 + rng.uniform_index(12);
        const std::size_t n = 1 + rng.uniform_index(16);
        const LabelSets sets = random_sets(rng, m, n, c % 2 == 0);
        const Matrix scores = random_matrix(rng, m, n, 2.0);

        const Matrix grad = output_grad(scores, sets);
        const auto f = [&](const std::vector<double>& v) {
            Matrix s(m, n);
            s.data = v;
            return output_loss(s, sets);
        };
        const std::vector<double> fd = finite_diff_grad(f, scores.data, kH);
        tally(rep, grad.data, fd, tol);
    }
    return rep;
}

GradCheckReport check_bce_grads(std::uint64_t seed, std::size_t cases, double tol) {
    GradCheckReport rep;
    rep.name = "bce-grads";
    Rng rng(seed);
    for (std::size_t c = 0; c < cases; ++c) {
        const std::size_t m = 1 + rng.uniform_index(12);
        const std::size_t n = 1 + rng.uniform_index(16);
        const LabelSets sets = random_sets(rng, m, n, c % 2 == 0);
        const Matrix scores = random_matrix(rng, m, n, 3.0);

        Matrix grad;
        bce_loss(scores, sets, &grad);
        const auto f = [&](const std::vector<double>& v) {
            Matrix s(m, n);
            s.data = v;
            return bce_loss(s, sets);
        };
        const std::vector<double> fd = finite_diff_grad(f, scores.data, kH);
        tally(rep, grad.data, fd, tol);
    }
    return rep;
}

GradCheckReport check_network_backward(std::uint64_t seed, std::size_t cases, double tol) {
    GradCheckReport rep;
    rep.name = "network-backward";
    Rng rng(seed);
    for (std::size_t c = 0; c < cases; ++c) {
        // Central differences are invalid across the activation kink, so
        // redraw any case with a pre-activation too close to zero.
        Network net;
        Matrix batch, probe;
        ForwardCache cache;
        std::size_t n = 0;
        for (int attempt = 0; attempt < 100; ++attempt) {
            const std::size_t depth = 1 + rng.uniform_index(3);
            std::vector<std::size_t> dims(depth + 1);
            for (auto& d : dims) d = 1 + rng.uniform_index(16);
            n = 1 + rng.uniform_index(8);

            net = init_network(dims, {Activation::LeakyRelu, 0.01}, rng.next_u64());
            batch = random_matrix(rng, dims.front(), n, 1.0);
            // scalar probe: fixed random weighting of the outputs
            probe = random_matrix(rng, dims.back(), n, 1.0);

            forward(net, batch, &cache);
            double min_abs_preact = 1.0;
            for (const Matrix& z : cache.preacts)
                for (double v : z.data) min_abs_preact = std::min(min_abs_preact, std::abs(v));
            if (min_abs_preact > 1e-3) break;
        }
        Matrix grad_input;
        const NetworkGrads grads = backward(net, cache, probe, &grad_input);

        std::vector<double> flat = flatten_params(net);
        const std::size_t n_params = flat.size();
        flat.insert(flat.end(), batch.data.begin(), batch.data.end());
        const auto f = [&](const std::vector<double>& v) {
            Network tmp = net;
            unflatten_params(tmp, {v.begin(), v.begin() + n_params});
            Matrix x(net.in_dim(), n);
            std::copy(v.begin() + n_params, v.end(), x.data.begin());
            const Matrix out = forward(tmp, x);
            double s = 0.0;
            for (std::size_t i = 0; i < out.size(); ++i) s += probe.data[i] * out.data[i];
            return s;
        };
        const std::vector<double> fd = finite_diff_grad(f, flat, kH);

        std::vector<double> analytic = flatten_grads(grads);
        analytic.insert(analytic.end(), grad_input.data.begin(), grad_input.data.end());
        tally(rep, analytic, fd, tol);
    }
    return rep;
}

GradCheckReport check_objective_grads(std::uint64_t seed, std::size_t cases, double tol) {
    GradCheckReport rep;
    rep.name = "objective-grads";
    Rng rng(seed);
    for (std::size_t c = 0; c < cases; ++c) {
        const std::size_t d = 1 + rng.uniform_index(6);
        const std::size_t m = 1 + rng.uniform_index(6);
        const std::size_t l = 1 + rng.uniform_index(3);
        const std::size_t n = 1 + rng.uniform_index(4);

        Model model;
        model.alpha = rng.uniform(0.1, 10.0);
        model.lambda = 0.5;
        model.latent_dim = l;
        model.loss_mode = LossMode::C2ae;
        model.normalize_penalty = c % 4 == 3;
        const ActivationSpec act{Activation::LeakyRelu, 0.01};
        std::vector<std::size_t> fx_dims = {d, 1 + rng.uniform_index(5), l};
        model.feature_net = init_network(fx_dims, act, rng.next_u64());
        model.encoder = init_network({m, l}, act, rng.next_u64());
        model.decoder = init_network({l, m}, act, rng.next_u64());

        const Matrix features = random_matrix(rng, d, n, 1.0);
        const LabelSets sets = random_sets(rng, m, n, c % 2 == 0);
        Matrix encoder_input(m, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j : sets.pos[i]) encoder_input(j, i) = 1.0;

        ObjectiveGrads grads;
        objective_and_grads(model, features, encoder_input, sets, grads);

        std::vector<double> flat = flatten_params(model.feature_net);
        const std::size_t n_fx = flat.size();
        const std::vector<double> fe_flat = flatten_params(model.encoder);
        const std::vector<double> fd_flat = flatten_params(model.decoder);
        flat.insert(flat.end(), fe_flat.begin(), fe_flat.end());
        flat.insert(flat.end(), fd_flat.begin(), fd_flat.end());
        const std::size_t n_fe = fe_flat.size();

        const auto f = [&](const std::vector<double>& v) {
            Model tmp = model;
            unflatten_params(tmp.feature_net, {v.begin(), v.begin() + n_fx});
            unflatten_params(tmp.encoder, {v.begin() + n_fx, v.begin() + n_fx + n_fe});
            unflatten_params(tmp.decoder, {v.begin() + n_fx + n_fe, v.end()});
            return objective(tmp, features, encoder_input, sets).total;
        };
        const std::vector<double> fd = finite_diff_grad(f, flat, kH);

        std::vector<double> analytic = flatten_grads(grads.feature_net);
        const std::vector<double> fe_g = flatten_grads(grads.encoder);
        const std::vector<double> fd_g = flatten_grads(grads.decoder);
        analytic.insert(analytic.end(), fe_g.begin(), fe_g.end());
        analytic.insert(analytic.end(), fd_g.begin(), fd_g.end());
        tally(rep, analytic, fd, tol);
    }
    return rep;
}

}  // namespace c2ae
