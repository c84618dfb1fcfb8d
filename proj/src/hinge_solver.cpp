// Primal solver for L2-regularized (squared) hinge one-vs-rest problems.
//
// The squared hinge objective is piecewise quadratic and continuously
// differentiable, so it is minimized with a truncated Newton method: each
// iteration solves the generalized-Hessian system with conjugate gradients
// and then backtracks along the Newton direction. The bias is handled as an
// extra constant feature and is regularized like every other weight.

#include <algorithm>
#include <cmath>
#include <limits>

#include "fetril/classifier.hpp"
#include "fetril/errors.hpp"

namespace fetril::detail {

namespace {

double augmented_dot(std::span<const double> w, std::span<const double> x) {
  return dot(w.first(x.size()), x) + w[x.size()];
}

void add_scaled(std::vector<double>& acc, std::span<const double> x, double scale) {
  for (std::size_t j = 0; j < x.size(); ++j) acc[j] += scale * x[j];
  acc[x.size()] += scale;
}

double norm(std::span<const double> v) { return std::sqrt(squared_norm(v)); }

struct SquaredHinge {
  const BinaryProblem& problem;
  std::size_t dim;
  double c;
  std::vector<std::size_t> active;

  double objective(std::span<const double> w) const {
    double loss = 0.0;
    for (std::size_t i = 0; i < problem.rows.size(); ++i) {
      const double slack = 1.0 - problem.labels[i] * augmented_dot(w, problem.rows[i]);
      if (slack > 0.0) loss += slack * slack;
    }
    return 0.5 * squared_norm(w) + c * loss;
  }

  // Gradient at w; also records the active set used by the Hessian product.
  std::vector<double> gradient(std::span<const double> w) {
    std::vector<double> g(w.begin(), w.end());
    active.clear();
    for (std::size_t i = 0; i < problem.rows.size(); ++i) {
      const double slack = 1.0 - problem.labels[i] * augmented_dot(w, problem.rows[i]);
      if (slack > 0.0) {
        active.push_back(i);
        add_scaled(g, problem.rows[i], -2.0 * c * problem.labels[i] * slack);
      }
    }
    return g;
  }

  std::vector<double> hessian_times(std::span<const double> v) const {
    std::vector<double> out(v.begin(), v.end());
    for (auto i : active) add_scaled(out, problem.rows[i], 2.0 * c * augmented_dot(v, problem.rows[i]));
    return out;
  }
};

// Approximately solves H s = -g; stops at relative residual 0.1.
std::vector<double> conjugate_gradient(const SquaredHinge& f, const std::vector<double>& g) {
  const std::size_t n = g.size();
  std::vector<double> s(n, 0.0);
  std::vector<double> r(n);
  for (std::size_t j = 0; j < n; ++j) r[j] = -g[j];
  std::vector<double> p = r;
  double rr = squared_norm(r);
  const double stop = 0.1 * norm(g);
  for (std::size_t it = 0; it < n && std::sqrt(rr) > stop; ++it) {
    const auto hp = f.hessian_times(p);
    const double alpha = rr / dot(p, hp);
    for (std::size_t j = 0; j < n; ++j) {
      s[j] += alpha * p[j];
      r[j] -= alpha * hp[j];
    }
    const double rr_next = squared_norm(r);
    const double beta = rr_next / rr;
    rr = rr_next;
    for (std::size_t j = 0; j < n; ++j) p[j] = r[j] + beta * p[j];
  }
  return s;
}

std::vector<double> solve_squared(const BinaryProblem& problem, std::size_t dim, const TrainConfig& config) {
  SquaredHinge f{problem, dim, config.reg_c, {}};
  std::vector<double> w(dim + 1, 0.0);
  double value = f.objective(w);
  auto g = f.gradient(w);
  const double g0 = norm(g);

  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    if (norm(g) <= config.tolerance * g0) break;
    const auto step = conjugate_gradient(f, g);
    const double slope = dot(g, step);
    double alpha = 1.0;
    std::vector<double> candidate(w.size());
    double candidate_value = value;
    bool accepted = false;
    for (int halvings = 0; halvings < 40; ++halvings, alpha *= 0.5) {
      for (std::size_t j = 0; j < w.size(); ++j) candidate[j] = w[j] + alpha * step[j];
      candidate_value = f.objective(candidate);
      if (candidate_value <= value + 0.01 * alpha * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    const double decrease = (value - candidate_value) / std::max(value, std::numeric_limits<double>::min());
    w.swap(candidate);
    value = candidate_value;
    g = f.gradient(w);
    if (decrease < config.tolerance) break;
  }
  return w;
}

// Plain hinge is not differentiable; full-batch subgradient descent with the
// 1/t step of a 1-strongly convex objective, keeping the best iterate.
std::vector<double> solve_plain(const BinaryProblem& problem, std::size_t dim, const TrainConfig& config) {
  std::vector<double> w(dim + 1, 0.0);
  std::vector<double> best = w;
  double best_value = hinge_objective(problem, w, config.reg_c, HingeLoss::plain);
  std::size_t stale = 0;
  constexpr std::size_t kStaleEpochs = 20;

  for (std::size_t t = 1; t <= config.max_epochs && stale < kStaleEpochs; ++t) {
    std::vector<double> pull(dim + 1, 0.0);
    for (std::size_t i = 0; i < problem.rows.size(); ++i) {
      if (problem.labels[i] * augmented_dot(w, problem.rows[i]) < 1.0) add_scaled(pull, problem.rows[i], problem.labels[i]);
    }
    const double eta = 1.0 / static_cast<double>(t);
    for (std::size_t j = 0; j < w.size(); ++j) w[j] = (1.0 - eta) * w[j] + eta * config.reg_c * pull[j];
    const double value = hinge_objective(problem, w, config.reg_c, HingeLoss::plain);
    if (value < best_value * (1.0 - config.tolerance)) {
      stale = 0;
    } else {
      ++stale;
    }
    if (value < best_value) {
      best_value = value;
      best = w;
    }
  }
  return best;
}

}  // namespace

double hinge_objective(const BinaryProblem& problem, std::span<const double> w_with_bias, double reg_c,
                       HingeLoss loss) {
  double total = 0.0;
  for (std::size_t i = 0; i < problem.rows.size(); ++i) {
    const double slack = 1.0 - problem.labels[i] * augmented_dot(w_with_bias, problem.rows[i]);
    if (slack > 0.0) total += loss == HingeLoss::squared ? slack * slack : slack;
  }
  return 0.5 * squared_norm(w_with_bias) + reg_c * total;
}

std::vector<double> solve_binary_hinge(const BinaryProblem& problem, std::size_t dim, const TrainConfig& config) {
  if (problem.rows.size() != problem.labels.size()) throw ContractError("incremental_classifier", "label count mismatch");
  for (const auto& r : problem.rows) {
    if (r.size() != dim) throw ContractError("incremental_classifier", "row dimension mismatch");
  }
  return config.loss == HingeLoss::squared ? solve_squared(problem, dim, config) : solve_plain(problem, dim, config);
}

}  // namespace fetril::detail
