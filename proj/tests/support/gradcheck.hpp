#pragma once

#include <cmath>
#include <string>

#include "support/oracles.hpp"
#include "uxmc/losses.hpp"
#include "uxmc/model.hpp"

namespace oracle {

struct GradCheckResult {
    double worst = 0.0;
    std::string where;
    std::size_t checked = 0;
};

/// Compares Model::backward against central differences of the full
/// forward + loss for every parameter. The dropout mask is held fixed by
/// reseeding the forward rng for every evaluation.
inline GradCheckResult gradient_check(uxmc::Model<double>& model, const uxmc::DenseMatrix<double>& x,
                                      const uxmc::LabelMatrix& y, uxmc::LossKind loss, std::uint64_t dropout_seed,
                                      double h = 1e-5) {
    const bool training = model.config().input_dropout > 0.0;
    auto eval = [&] {
        uxmc::Rng r(dropout_seed);
        const auto trace = model.forward(x, training, r);
        return uxmc::compute_loss(loss, trace.scores, y).loss;
    };
    uxmc::Rng r(dropout_seed);
    const auto trace = model.forward(x, training, r);
    const auto lr = uxmc::compute_loss(loss, trace.scores, y);
    const auto grads = model.backward(trace, lr.grad);

    GradCheckResult out;
    auto params = model.parameters();
    const auto names = model.parameter_names();
    for (std::size_t b = 0; b < params.size(); ++b) {
        for (std::size_t k = 0; k < params[b].values.size(); ++k) {
            double& p = params[b].values[k];
            const double fd = central_difference(eval, p, h);
            const double an = grads.blocks[b][k];
            // Entries whose true gradient is ~0 are compared on an absolute scale of 1e-5.
            const double err = rel_diff(an, fd, 1e-5);
            ++out.checked;
            if (err > out.worst) {
                out.worst = err;
                out.where = names[b] + "[" + std::to_string(k) + "] analytic " + std::to_string(an) + " fd " +
                            std::to_string(fd);
            }
        }
    }
    return out;
}

/// Smallest distance of any eval-mode score to the squared-hinge kink at
/// |score| = 1; finite differences straddling the kink are meaningless.
inline double min_kink_distance(uxmc::Model<double>& model, const uxmc::DenseMatrix<double>& x) {
    const auto s = model.predict(x);
    double best = INFINITY;
    for (double v : s.values()) best = std::min(best, std::abs(std::abs(v) - 1.0));
    return best;
}

}  // namespace oracle
