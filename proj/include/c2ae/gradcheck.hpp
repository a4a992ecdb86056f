#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace c2ae {

// Central differences (f(x+h e_i) - f(x-h e_i)) / 2h per coordinate.
// Throws if f evaluates to a non-finite value.
std::vector<double> finite_diff_grad(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x, double h);

// |a-b| / max(|a|, |b|, floor); the floor keeps near-zero entries from
// turning finite-difference noise into spurious relative error.
double rel_error(double a, double b, double floor);

struct GradCheckReport {
    std::string name;
    std::size_t cases = 0;
    std::size_t failures = 0;
    double max_rel_err = 0.0;
    bool passed() const { return failures == 0 && cases > 0; }
};

// Randomized finite-difference suites shared by the unit tests, the
// acceptance run, and the gradcheck CLI command.
GradCheckReport check_latent_grads(std::uint64_t seed, std::size_t cases, double tol = 1e-6);
GradCheckReport check_output_grads(std::uint64_t seed, std::size_t cases, double tol = 1e-6);
GradCheckReport check_bce_grads(std::uint64_t seed, std::size_t cases, double tol = 1e-6);
GradCheckReport check_network_backward(std::uint64_t seed, std::size_t cases, double tol = 1e-6);
GradCheckReport check_objective_grads(std::uint64_t seed, std::size_t cases, double tol = 1e-4);

// Gradient of the printed form of the encoder-side alignment gradient, which
// flips the sign of the difference term. Kept so the suite can demonstrate
// that it does NOT match finite differences.
GradCheckReport check_latent_grads_printed_form(std::uint64_t seed, std::size_t cases,
                                                double tol = 1e-6);

}  // namespace c2ae
