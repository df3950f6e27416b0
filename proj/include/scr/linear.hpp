#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "scr/error.hpp"
#include "scr/jsonio.hpp"
#include "scr/rng.hpp"
#include "scr/tfidf.hpp"

namespace scr {

enum class LinearKind { logistic, hinge };

inline const char* to_string(LinearKind k) {
    return k == LinearKind::logistic ? "logistic" : "hinge";
}

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

struct LinearHyper {
    double lambda = 1e-4;
    double learning_rate = 0.1;
    int epochs = 100;
    std::uint64_t seed = 0;
};

struct LinearModel {
    LinearKind kind = LinearKind::logistic;
    std::vector<double> weights;
    double bias = 0.0;
    LinearHyper hyper;

    double raw_score(const SparseVector& x) const {
        double z = bias;
        for (const auto& [i, w] : x.entries) z += weights[i] * w;
        return z;
    }

    /// Logistic: probability in (0,1). Hinge: signed margin value.
    double score(const SparseVector& x) const {
        const double z = raw_score(x);
        return kind == LinearKind::logistic ? sigmoid(z) : z;
    }

    Json to_json() const {
        Json j;
        j["kind"] = to_string(kind);
        j["bias"] = bias;
        j["weights"] = weights;
        j["hyper"] = {{"lambda", hyper.lambda},
                      {"learning_rate", hyper.learning_rate},
                      {"epochs", hyper.epochs},
                      {"seed", hyper.seed}};
        return j;
    }

    static LinearModel from_json(const Json& j) {
        LinearModel m;
        const std::string kind = require_string(j, "kind", "linear model");
        if (kind == "logistic") m.kind = LinearKind::logistic;
        else if (kind == "hinge") m.kind = LinearKind::hinge;
        else fail("linear model: unknown kind '", kind, "'");
        m.bias = require_field(j, "bias", "linear model").get<double>();
        m.weights = require_field(j, "weights", "linear model").get<std::vector<double>>();
        if (j.contains("hyper")) {
            const Json& h = j.at("hyper");
            m.hyper.lambda = field_or(h, "lambda", m.hyper.lambda);
            m.hyper.learning_rate = field_or(h, "learning_rate", m.hyper.learning_rate);
            m.hyper.epochs = field_or(h, "epochs", m.hyper.epochs);
            m.hyper.seed = field_or<std::uint64_t>(h, "seed", m.hyper.seed);
        }
        return m;
    }
};

/// Full-batch objective: mean per-sample loss + (lambda/2)*||w||^2.
/// These are the reference implementations the SGD trainers are checked
/// against with finite differences.
inline double logistic_loss(const std::vector<double>& weights, double bias,
                            const std::vector<SparseVector>& xs,
                            const std::vector<int>& ys, double lambda) {
    double total = 0.0;
    for (std::size_t s = 0; s < xs.size(); ++s) {
        double z = bias;
        for (const auto& [i, v] : xs[s].entries) z += weights[i] * v;
        // -log sigmoid(z) for y=1, -log(1-sigmoid(z)) for y=0, stable form
        const double softplus =
            z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
        total += softplus - (ys[s] ? z : 0.0);
    }
    double reg = 0.0;
    for (const double w : weights) reg += w * w;
    return total / static_cast<double>(xs.size()) + 0.5 * lambda * reg;
}

inline void logistic_gradient(const std::vector<double>& weights, double bias,
                              const std::vector<SparseVector>& xs,
                              const std::vector<int>& ys, double lambda,
                              std::vector<double>& grad_w, double& grad_b) {
    grad_w.assign(weights.size(), 0.0);
    grad_b = 0.0;
    for (std::size_t s = 0; s < xs.size(); ++s) {
        double z = bias;
        for (const auto& [i, v] : xs[s].entries) z += weights[i] * v;
        const double g = sigmoid(z) - static_cast<double>(ys[s]);
        for (const auto& [i, v] : xs[s].entries) grad_w[i] += g * v;
        grad_b += g;
    }
    const double inv = 1.0 / static_cast<double>(xs.size());
    for (std::size_t i = 0; i < grad_w.size(); ++i)
        grad_w[i] = grad_w[i] * inv + lambda * weights[i];
    grad_b *= inv;
}

inline double hinge_loss(const std::vector<double>& weights, double bias,
                         const std::vector<SparseVector>& xs,
                         const std::vector<int>& ys, double lambda) {
    double total = 0.0;
    for (std::size_t s = 0; s < xs.size(); ++s) {
        double z = bias;
        for (const auto& [i, v] : xs[s].entries) z += weights[i] * v;
        const double y = ys[s] ? 1.0 : -1.0;
        total += std::max(0.0, 1.0 - y * z);
    }
    double reg = 0.0;
    for (const double w : weights) reg += w * w;
    return total / static_cast<double>(xs.size()) + 0.5 * lambda * reg;
}

/// Subgradient; at exact hinge kinks (margin == 1) the margin is treated as
/// active. Finite-difference checks must stay away from kinks.
inline void hinge_gradient(const std::vector<double>& weights, double bias,
                           const std::vector<SparseVector>& xs,
                           const std::vector<int>& ys, double lambda,
                           std::vector<double>& grad_w, double& grad_b) {
    grad_w.assign(weights.size(), 0.0);
    grad_b = 0.0;
    for (std::size_t s = 0; s < xs.size(); ++s) {
        double z = bias;
        for (const auto& [i, v] : xs[s].entries) z += weights[i] * v;
        const double y = ys[s] ? 1.0 : -1.0;
        if (y * z <= 1.0) {
            for (const auto& [i, v] : xs[s].entries) grad_w[i] -= y * v;
            grad_b -= y;
        }
    }
    const double inv = 1.0 / static_cast<double>(xs.size());
    for (std::size_t i = 0; i < grad_w.size(); ++i)
        grad_w[i] = grad_w[i] * inv + lambda * weights[i];
    grad_b *= inv;
}

namespace detail {

inline void check_two_classes(const std::vector<SparseVector>& xs,
                              const std::vector<int>& ys, const char* what) {
    if (xs.size() != ys.size())
        fail(what, ": ", xs.size(), " vectors vs ", ys.size(), " labels");
    if (xs.empty()) fail(what, ": empty training set");
    const auto pos = static_cast<std::size_t>(
        std::accumulate(ys.begin(), ys.end(), std::int64_t{0}));
    if (pos == 0 || pos == ys.size())
        fail(what, ": training labels are single-class (", pos, " of ",
             ys.size(), " positive)");
}

/// Plain SGD over seed-shuffled epochs. L2 decay is applied through a scalar
/// on the weight vector, so each step stays O(nnz). When average_epochs is
/// set, the returned weights are the mean of the per-epoch snapshots.
inline LinearModel sgd_train(LinearKind kind, const std::vector<SparseVector>& xs,
                             const std::vector<int>& ys, std::size_t dim,
                             const LinearHyper& hyper, bool average_epochs) {
    check_two_classes(xs, ys, to_string(kind));
    if (hyper.epochs < 1) fail(to_string(kind), ": epochs must be >= 1");
    if (!(hyper.learning_rate > 0.0))
        fail(to_string(kind), ": learning_rate must be positive");
    if (hyper.lambda < 0.0 || hyper.learning_rate * hyper.lambda >= 1.0)
        fail(to_string(kind), ": need 0 <= learning_rate*lambda < 1");
    for (const auto& x : xs)
        for (const auto& [i, v] : x.entries)
            if (i >= dim)
                fail(to_string(kind), ": feature index ", i,
                     " out of range for dimension ", dim);

    std::vector<double> v(dim, 0.0);
    double scale = 1.0;
    double bias = 0.0;
    std::vector<double> avg_w(average_epochs ? dim : 0, 0.0);
    double avg_b = 0.0;

    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng = Rng::derive(hyper.seed, "sgd");
    const double lr = hyper.learning_rate;

    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        rng.shuffle(order);
        for (const std::size_t s : order) {
            const SparseVector& x = xs[s];
            double z = bias;
            for (const auto& [i, val] : x.entries) z += scale * v[i] * val;

            double g;  // d(loss)/dz for this sample
            if (kind == LinearKind::logistic) {
                g = sigmoid(z) - static_cast<double>(ys[s]);
            } else {
                const double y = ys[s] ? 1.0 : -1.0;
                g = (y * z < 1.0) ? -y : 0.0;
            }

            scale *= (1.0 - lr * hyper.lambda);
            if (scale < 1e-9) {  // refresh before underflow
                for (auto& w : v) w *= scale;
                scale = 1.0;
            }
            if (g != 0.0) {
                const double step = lr * g / scale;
                for (const auto& [i, val] : x.entries) v[i] -= step * val;
                bias -= lr * g;
            }
        }
        if (average_epochs) {
            for (std::size_t i = 0; i < dim; ++i) avg_w[i] += scale * v[i];
            avg_b += bias;
        }
    }

    LinearModel model;
    model.kind = kind;
    model.hyper = hyper;
    model.weights.resize(dim);
    if (average_epochs && hyper.epochs > 0) {
        const double inv = 1.0 / hyper.epochs;
        for (std::size_t i = 0; i < dim; ++i) model.weights[i] = avg_w[i] * inv;
        model.bias = avg_b * inv;
    } else {
        for (std::size_t i = 0; i < dim; ++i) model.weights[i] = scale * v[i];
        model.bias = bias;
    }
    return model;
}

}  // namespace detail

inline LinearModel train_logistic(const std::vector<SparseVector>& xs,
                                  const std::vector<int>& ys, std::size_t dim,
                                  const LinearHyper& hyper = {}) {
    return detail::sgd_train(LinearKind::logistic, xs, ys, dim, hyper, false);
}

inline LinearModel train_linear_svm(const std::vector<SparseVector>& xs,
                                    const std::vector<int>& ys, std::size_t dim,
                                    const LinearHyper& hyper = {}) {
    return detail::sgd_train(LinearKind::hinge, xs, ys, dim, hyper, true);
}

}  // namespace scr
