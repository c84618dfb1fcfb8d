#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fetril/classifier.hpp"
#include "fetril/errors.hpp"
#include "fetril/rng.hpp"

namespace fetril::detail {

// Single fully-connected layer trained with mini-batch SGD on cross-entropy.
// The learning rate is multiplied by the decay factor the first time the epoch
// loss stops improving for `patience` epochs; a second plateau ends training.
ClassifierBank train_softmax(const LabeledRows& features_by_class, const TrainConfig& config) {
  const std::size_t dim = features_by_class.begin()->second.cols();
  const std::size_t classes = features_by_class.size();

  std::vector<std::span<const double>> rows;
  std::vector<std::size_t> targets;
  ClassifierBank bank;
  bank.variant = ClassifierVariant::softmax;
  for (const auto& [id, m] : features_by_class) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
      rows.push_back(m.row(i));
      targets.push_back(bank.class_ids.size());
    }
    bank.class_ids.push_back(id);
  }

  DenseMatrix weights(classes, dim);
  std::vector<double> biases(classes, 0.0);
  DenseMatrix grad_w(classes, dim);
  std::vector<double> grad_b(classes);
  std::vector<double> probs(classes);

  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rng = make_rng(config.seed, 0x50F7);

  double lr = config.softmax_initial_lr;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t bad_epochs = 0;
  bool decayed = false;

  for (std::size_t epoch = 0; epoch < config.softmax_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.softmax_batch_size) {
      const std::size_t end = std::min(order.size(), start + config.softmax_batch_size);
      const double inv_batch = 1.0 / static_cast<double>(end - start);
      grad_w.fill(0.0);
      std::fill(grad_b.begin(), grad_b.end(), 0.0);
      for (std::size_t b = start; b < end; ++b) {
        const auto x = rows[order[b]];
        const auto y = targets[order[b]];
        double top = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < classes; ++k) {
          probs[k] = dot(weights.row(k), x) + biases[k];
          top = std::max(top, probs[k]);
        }
        double z = 0.0;
        for (auto& p : probs) z += (p = std::exp(p - top));
        for (auto& p : probs) p /= z;
        epoch_loss -= std::log(std::max(probs[y], 1e-300));
        for (std::size_t k = 0; k < classes; ++k) {
          const double delta = (probs[k] - (k == y ? 1.0 : 0.0)) * inv_batch;
          auto gw = grad_w.row(k);
          for (std::size_t j = 0; j < dim; ++j) gw[j] += delta * x[j];
          grad_b[k] += delta;
        }
      }
      for (std::size_t k = 0; k < classes; ++k) {
        auto w = weights.row(k);
        auto gw = grad_w.row(k);
        for (std::size_t j = 0; j < dim; ++j) w[j] -= lr * gw[j];
        biases[k] -= lr * grad_b[k];
      }
    }
    epoch_loss /= static_cast<double>(rows.size());

    if (epoch_loss < best_loss * (1.0 - config.tolerance)) {
      best_loss = epoch_loss;
      bad_epochs = 0;
    } else if (++bad_epochs >= config.softmax_patience) {
      if (decayed) break;
      lr *= config.softmax_lr_decay;
      decayed = true;
      bad_epochs = 0;
    }
  }

  for (double w : weights.values()) {
    if (!std::isfinite(w)) throw DataError("incremental_classifier", "softmax training diverged");
  }
  bank.weights = std::move(weights);
  bank.biases = std::move(biases);
  return bank;
}

}  // namespace fetril::detail
