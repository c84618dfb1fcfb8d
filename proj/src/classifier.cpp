#include "fetril/classifier.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "fetril/errors.hpp"
#include "fetril/feature_store.hpp"
#include "fetril/rng.hpp"

namespace fetril {

namespace {

constexpr const char* kModule = "incremental_classifier";
constexpr char kBankMagic[5] = {'F', 'T', 'R', 'L', 'W'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(bytes[offset + k]) << (8 * k);
  return v;
}

void check_inputs(const LabeledRows& features_by_class) {
  if (features_by_class.empty()) throw ContractError(kModule, "no classes to train on");
  const std::size_t dim = features_by_class.begin()->second.cols();
  for (const auto& [id, rows] : features_by_class) {
    if (rows.rows() == 0) throw ContractError(kModule, "class " + std::to_string(id) + " has zero rows");
    if (rows.cols() != dim) throw ContractError(kModule, "class " + std::to_string(id) + " has a different dimension");
    for (std::size_t i = 0; i < rows.rows(); ++i) {
      const double norm = std::sqrt(squared_norm(rows.row(i)));
      if (norm > kNormEpsilon && std::abs(norm - 1.0) > 1e-6) {
        throw ContractError(kModule, "class " + std::to_string(id) + " row " + std::to_string(i) +
                                         " is not L2-normalized (norm " + std::to_string(norm) + ")");
      }
    }
  }
}

ClassifierBank train_hinge(const LabeledRows& features_by_class, const TrainConfig& config) {
  const std::size_t dim = features_by_class.begin()->second.cols();
  ClassifierBank bank;
  bank.variant = ClassifierVariant::hinge;
  bank.weights = DenseMatrix(features_by_class.size(), dim);
  bank.biases.assign(features_by_class.size(), 0.0);

  std::size_t slot = 0;
  for (const auto& [target, positives] : features_by_class) {
    detail::BinaryProblem problem;
    for (std::size_t i = 0; i < positives.rows(); ++i) {
      problem.rows.push_back(positives.row(i));
      problem.labels.push_back(1.0);
    }
    std::vector<std::pair<ClassId, std::size_t>> pool_sizes;
    for (const auto& [other, rows] : features_by_class) {
      if (other != target) pool_sizes.emplace_back(other, rows.rows());
    }
    if (config.neg_ratio && !pool_sizes.empty()) {
      for (const auto& pick : sample_negatives(positives.rows(), pool_sizes, *config.neg_ratio, config.seed, target)) {
        problem.rows.push_back(features_by_class.at(pick.class_id).row(pick.row));
        problem.labels.push_back(-1.0);
      }
    } else {
      for (const auto& [other, rows] : features_by_class) {
        if (other == target) continue;
        for (std::size_t i = 0; i < rows.rows(); ++i) {
          problem.rows.push_back(rows.row(i));
          problem.labels.push_back(-1.0);
        }
      }
    }
    const auto w = detail::solve_binary_hinge(problem, dim, config);
    std::copy(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(dim), bank.weights.row(slot).begin());
    bank.biases[slot] = w[dim];
    bank.class_ids.push_back(target);
    ++slot;
  }
  return bank;
}

}  // namespace

std::string to_string(ClassifierVariant v) { return v == ClassifierVariant::hinge ? "hinge" : "softmax"; }

ClassifierVariant parse_variant(const std::string& text) {
  if (text == "hinge") return ClassifierVariant::hinge;
  if (text == "softmax" || text == "fc") return ClassifierVariant::softmax;
  throw ContractError(kModule, "unknown classifier '" + text + "', expected hinge or softmax");
}

std::string to_string(HingeLoss loss) { return loss == HingeLoss::squared ? "squared-hinge" : "hinge"; }

HingeLoss parse_loss(const std::string& text) {
  if (text == "squared-hinge" || text == "squared") return HingeLoss::squared;
  if (text == "hinge" || text == "plain") return HingeLoss::plain;
  throw ContractError(kModule, "unknown loss '" + text + "', expected squared-hinge or hinge");
}

void TrainConfig::validate() const {
  if (!(reg_c > 0.0)) throw ContractError(kModule, "regularization C must be positive");
  if (!(tolerance > 0.0)) throw ContractError(kModule, "tolerance must be positive");
  if (max_epochs == 0) throw ContractError(kModule, "max_epochs must be >= 1");
  if (neg_ratio && *neg_ratio == 0) throw ContractError(kModule, "negative ratio must be >= 1");
  if (softmax_batch_size == 0 || softmax_epochs == 0) throw ContractError(kModule, "softmax schedule must be positive");
  if (!(softmax_initial_lr > 0.0)) throw ContractError(kModule, "softmax learning rate must be positive");
}

void ClassifierBank::append(const ClassifierBank& other) {
  if (size() == 0) {
    *this = other;
    return;
  }
  if (other.dim() != dim()) throw ContractError(kModule, "cannot merge banks of different dimension");
  for (std::size_t i = 0; i < other.size(); ++i) {
    weights.append_row(other.weights.row(i));
    biases.push_back(other.biases[i]);
    class_ids.push_back(other.class_ids[i]);
  }
}

ClassifierBank train(const LabeledRows& features_by_class, const TrainConfig& config) {
  config.validate();
  check_inputs(features_by_class);
  return config.variant == ClassifierVariant::hinge ? train_hinge(features_by_class, config)
                                                    : detail::train_softmax(features_by_class, config);
}

std::vector<std::size_t> apportion(std::span<const std::size_t> sizes, std::size_t total) {
  const std::size_t pool = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  if (pool == 0) throw ContractError(kModule, "cannot apportion over an empty pool");
  if (total > pool) throw ContractError(kModule, "requested more rows than the pool holds");
  std::vector<std::size_t> quota(sizes.size());
  std::vector<std::size_t> remainder(sizes.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    quota[i] = total * sizes[i] / pool;
    remainder[i] = total * sizes[i] % pool;
    assigned += quota[i];
  }
  std::vector<std::size_t> order(sizes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++quota[order[i]];
  return quota;
}

std::vector<NegativePick> sample_negatives(std::size_t positives_count,
                                           const std::vector<std::pair<ClassId, std::size_t>>& pool_sizes,
                                           std::size_t ratio, std::uint64_t seed, ClassId target_class) {
  if (ratio == 0) throw ContractError(kModule, "negative ratio must be >= 1");
  std::vector<std::size_t> sizes;
  for (const auto& [_, n] : pool_sizes) sizes.push_back(n);
  const std::size_t pool = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  if (pool == 0) throw ContractError(kModule, "empty negative pool");
  const std::size_t wanted = std::min(ratio * positives_count, pool);
  const auto quota = apportion(sizes, wanted);

  auto rng = make_rng(seed, target_class);
  std::vector<NegativePick> picks;
  picks.reserve(wanted);
  for (std::size_t c = 0; c < pool_sizes.size(); ++c) {
    for (auto row : sample_without_replacement(rng, sizes[c], quota[c])) picks.push_back({pool_sizes[c].first, row});
  }
  std::sort(picks.begin(), picks.end());
  return picks;
}

std::size_t predict_row(const ClassifierBank& bank, std::span<const double> v) {
  if (bank.size() == 0) throw ContractError(kModule, "empty classifier bank");
  if (v.size() != bank.dim()) throw ContractError(kModule, "feature dimension does not match the bank");
  std::size_t best = 0;
  double best_score = dot(bank.weights.row(0), v) + bank.biases[0];
  for (std::size_t i = 1; i < bank.size(); ++i) {
    const double score = dot(bank.weights.row(i), v) + bank.biases[i];
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  return best;
}

ClassId predict(const ClassifierBank& bank, std::span<const double> v) { return bank.class_ids[predict_row(bank, v)]; }

std::vector<std::uint8_t> encode_bank(const ClassifierBank& bank) {
  std::vector<std::uint8_t> out(std::begin(kBankMagic), std::end(kBankMagic));
  const auto rows = static_cast<std::uint32_t>(bank.size());
  const auto cols = static_cast<std::uint32_t>(bank.dim() + 1);
  put_u32(out, rows);
  put_u32(out, cols);
  for (std::size_t i = 0; i < bank.size(); ++i) {
    for (double w : bank.weights.row(i)) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(w)));
    put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(bank.biases[i])));
  }
  for (auto id : bank.class_ids) put_u32(out, id);
  put_u32(out, bank.variant == ClassifierVariant::hinge ? 0u : 1u);
  put_u32(out, static_cast<std::uint32_t>(bank.trained_in_state));
  return out;
}

ClassifierBank decode_bank(std::span<const std::uint8_t> bytes) {
  constexpr std::size_t header = 5 + 8;
  if (bytes.size() < header) throw FormatError(kModule, "bank file shorter than its header");
  if (!std::equal(std::begin(kBankMagic), std::end(kBankMagic), bytes.begin(),
                  [](char a, std::uint8_t b) { return static_cast<std::uint8_t>(a) == b; })) {
    throw FormatError(kModule, "bad magic, expected FTRLW");
  }
  const std::size_t rows = get_u32(bytes, 5);
  const std::size_t cols = get_u32(bytes, 9);
  if (cols < 2) throw FormatError(kModule, "bank must have at least one weight column plus bias");
  const std::size_t expected = header + 4 * (rows * cols + rows + 2);
  if (bytes.size() != expected) throw FormatError(kModule, "bank file size does not match its header");
  ClassifierBank bank;
  bank.weights = DenseMatrix(rows, cols - 1);
  std::size_t offset = header;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j + 1 < cols; ++j, offset += 4) {
      bank.weights(i, j) = std::bit_cast<float>(get_u32(bytes, offset));
    }
    bank.biases.push_back(std::bit_cast<float>(get_u32(bytes, offset)));
    offset += 4;
  }
  for (std::size_t i = 0; i < rows; ++i, offset += 4) bank.class_ids.push_back(get_u32(bytes, offset));
  const auto variant = get_u32(bytes, offset);
  if (variant > 1) throw FormatError(kModule, "unknown classifier variant tag");
  bank.variant = variant == 0 ? ClassifierVariant::hinge : ClassifierVariant::softmax;
  bank.trained_in_state = static_cast<int>(get_u32(bytes, offset + 4));
  for (double w : bank.weights.values()) {
    if (!std::isfinite(w)) throw DataError(kModule, "bank holds non-finite weights");
  }
  return bank;
}

void save_bank(const std::filesystem::path& path, const ClassifierBank& bank) { write_file_bytes(path, encode_bank(bank)); }

ClassifierBank load_bank(const std::filesystem::path& path) { return decode_bank(read_file_bytes(path)); }

}  // namespace fetril
