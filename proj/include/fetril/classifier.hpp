#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fetril/types.hpp"

namespace fetril {

enum class ClassifierVariant { hinge, softmax };
enum class HingeLoss { squared, plain };

std::string to_string(ClassifierVariant v);
ClassifierVariant parse_variant(const std::string& text);
std::string to_string(HingeLoss loss);
HingeLoss parse_loss(const std::string& text);

struct TrainConfig {
  ClassifierVariant variant = ClassifierVariant::hinge;
  HingeLoss loss = HingeLoss::squared;
  double reg_c = 1.0;
  double tolerance = 1e-4;
  std::size_t max_epochs = 1000;
  /// Negatives per positive for one-vs-many training; empty means one-vs-all.
  std::optional<std::size_t> neg_ratio;
  std::uint64_t seed = 0;

  // Softmax layer schedule.
  std::size_t softmax_epochs = 50;
  double softmax_initial_lr = 0.1;
  double softmax_lr_decay = 0.1;
  std::size_t softmax_patience = 10;
  std::size_t softmax_batch_size = 128;

  void validate() const;
};

/// Linear layer over all seen classes: score_i(v) = weights_i . v + biases_i.
struct ClassifierBank {
  DenseMatrix weights;  // one row per class
  std::vector<double> biases;
  std::vector<ClassId> class_ids;
  ClassifierVariant variant = ClassifierVariant::hinge;
  int trained_in_state = 0;

  std::size_t dim() const noexcept { return weights.cols(); }
  std::size_t size() const noexcept { return class_ids.size(); }

  /// Appends the rows of `other` after this bank's rows.
  void append(const ClassifierBank& other);
};

/// Training input: L2-normalized rows per class, iterated in ascending class id.
using LabeledRows = std::map<ClassId, DenseMatrix>;

ClassifierBank train(const LabeledRows& features_by_class, const TrainConfig& config);

struct NegativePick {
  ClassId class_id = 0;
  std::size_t row = 0;

  friend bool operator==(const NegativePick&, const NegativePick&) = default;
  friend auto operator<=>(const NegativePick&, const NegativePick&) = default;
};

/// Per-class quota by largest-remainder apportionment of `total` over `sizes`
/// (ties on the remainder go to the earlier entry).
std::vector<std::size_t> apportion(std::span<const std::size_t> sizes, std::size_t total);

/// One-vs-many negative subset: min(r * positives, pool) rows, stratified
/// proportionally across classes and uniform without replacement inside each
/// class. The stream depends only on (seed, target_class). Result is sorted.
std::vector<NegativePick> sample_negatives(std::size_t positives_count,
                                           const std::vector<std::pair<ClassId, std::size_t>>& pool_sizes,
                                           std::size_t ratio, std::uint64_t seed, ClassId target_class);

/// Row index of the highest score, lowest index on ties.
std::size_t predict_row(const ClassifierBank& bank, std::span<const double> v);
ClassId predict(const ClassifierBank& bank, std::span<const double> v);

// Bank file: "FTRLW", u32 rows, u32 dim+1, rows*(dim+1) f32 (weights then bias),
// followed by rows u32 class ids, u32 variant, u32 trained_in_state.
std::vector<std::uint8_t> encode_bank(const ClassifierBank& bank);
ClassifierBank decode_bank(std::span<const std::uint8_t> bytes);
void save_bank(const std::filesystem::path& path, const ClassifierBank& bank);
ClassifierBank load_bank(const std::filesystem::path& path);

namespace detail {

/// Binary problem for one class: rows and their +1/-1 labels.
struct BinaryProblem {
  std::vector<std::span<const double>> rows;
  std::vector<double> labels;
};

/// Minimizes 0.5 |w|^2 + C sum loss(y_i (w . [x_i, 1])) in the primal; returns d+1 values (bias last).
std::vector<double> solve_binary_hinge(const BinaryProblem& problem, std::size_t dim, const TrainConfig& config);

ClassifierBank train_softmax(const LabeledRows& features_by_class, const TrainConfig& config);

double hinge_objective(const BinaryProblem& problem, std::span<const double> w_with_bias, double reg_c,
                       HingeLoss loss);

}  // namespace detail

}  // namespace fetril
