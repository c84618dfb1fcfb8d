#include "fetril/pseudo_generator.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "fetril/errors.hpp"
#include "fetril/herding.hpp"
#include "fetril/rng.hpp"

namespace fetril {

namespace {

constexpr const char* kModule = "pseudo_generator";

double cosine(std::span<const double> a, std::span<const double> b, ClassId a_id, ClassId b_id) {
  const double na = std::sqrt(squared_norm(a));
  const double nb = std::sqrt(squared_norm(b));
  if (na <= kNormEpsilon) throw DegenerateGeometryError(kModule, "zero-norm centroid for class " + std::to_string(a_id));
  if (nb <= kNormEpsilon) throw DegenerateGeometryError(kModule, "zero-norm centroid for class " + std::to_string(b_id));
  return dot(a, b) / (na * nb);
}

}  // namespace

SelectionStrategy SelectionStrategy::parse(const std::string& text) {
  if (text == "random" || text == "rand") return random(0);
  if (text == "herding" || text == "herd") return herding();
  if (text.size() > 2 && text.rfind("k:", 0) == 0) {
    const auto digits = text.substr(2);
    if (std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      const auto k = std::stoull(digits);
      if (k >= 1) return kth(k);
    }
  }
  throw ContractError(kModule, "unknown strategy '" + text + "', expected k:<int>, random or herding");
}

std::string SelectionStrategy::to_string() const {
  switch (kind) {
    case SelectionKind::kth_similar:
      return "k:" + std::to_string(k);
    case SelectionKind::random:
      return "random";
    case SelectionKind::herding:
      return "herding";
  }
  return "?";
}

void SelectionStrategy::validate() const {
  if (kind == SelectionKind::kth_similar && k < 1) throw ContractError(kModule, "similarity rank k must be >= 1");
}

std::vector<double> translate(std::span<const double> feature, const ClassPrototype& target,
                              const ClassPrototype& source) {
  const std::size_t d = feature.size();
  if (target.centroid.size() != d || source.centroid.size() != d) {
    throw ContractError(kModule, "translate: dimension mismatch");
  }
  std::vector<double> out(d);
  for (std::size_t j = 0; j < d; ++j) out[j] = feature[j] + target.centroid[j] - source.centroid[j];
  return out;
}

std::vector<ClassId> rank_new_classes(const ClassPrototype& target, std::span<const ClassPrototype> new_protos) {
  if (new_protos.empty()) throw ProtocolError(kModule, "no new classes to rank");
  std::vector<std::pair<double, ClassId>> scored;
  scored.reserve(new_protos.size());
  for (const auto& p : new_protos) {
    if (p.centroid.size() != target.centroid.size()) throw ContractError(kModule, "rank: dimension mismatch");
    scored.emplace_back(cosine(target.centroid, p.centroid, target.class_id, p.class_id), p.class_id);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<ClassId> order;
  order.reserve(scored.size());
  for (const auto& [_, id] : scored) order.push_back(id);
  return order;
}

PseudoFeatureSet generate_for_past_class(const ClassPrototype& target, std::span<const NewClassView> new_classes,
                                         const SelectionStrategy& strategy, std::size_t samples) {
  if (new_classes.empty()) throw ProtocolError(kModule, "no new classes available to translate from");
  if (samples == 0) throw ContractError(kModule, "samples per class must be >= 1");
  strategy.validate();
  for (const auto& nc : new_classes) {
    if (nc.prototype == nullptr || nc.rows == nullptr || nc.rows->rows() == 0) {
      throw ContractError(kModule, "new class view without rows");
    }
    if (nc.rows->cols() != target.centroid.size()) throw ContractError(kModule, "new class dimension mismatch");
  }

  PseudoFeatureSet out;
  out.target_class = target.class_id;
  out.features = DenseMatrix(samples, target.centroid.size());
  out.source_record.reserve(samples);

  auto emit = [&](std::size_t slot, const NewClassView& nc, std::size_t row) {
    auto v = translate(nc.rows->row(row), target, *nc.prototype);
    std::copy(v.begin(), v.end(), out.features.row(slot).begin());
    out.source_record.push_back({nc.prototype->class_id, row});
  };

  switch (strategy.kind) {
    case SelectionKind::kth_similar: {
      std::vector<ClassPrototype> protos;
      protos.reserve(new_classes.size());
      for (const auto& nc : new_classes) protos.push_back(*nc.prototype);
      const auto order = rank_new_classes(target, protos);
      const ClassId chosen = order[std::min(strategy.k, order.size()) - 1];
      const auto& source = *std::find_if(new_classes.begin(), new_classes.end(),
                                         [&](const NewClassView& nc) { return nc.prototype->class_id == chosen; });
      for (std::size_t i = 0; i < samples; ++i) emit(i, source, i % source.rows->rows());
      break;
    }
    case SelectionKind::random: {
      std::vector<std::pair<std::size_t, std::size_t>> pool;  // (view index, row)
      for (std::size_t c = 0; c < new_classes.size(); ++c) {
        for (std::size_t r = 0; r < new_classes[c].rows->rows(); ++r) pool.emplace_back(c, r);
      }
      auto rng = make_rng(strategy.seed, target.class_id);
      std::vector<std::size_t> picks;
      if (!strategy.random_with_replacement && pool.size() >= samples) {
        picks = sample_without_replacement(rng, pool.size(), samples);
      } else {
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        for (std::size_t i = 0; i < samples; ++i) picks.push_back(pick(rng));
      }
      for (std::size_t i = 0; i < samples; ++i) {
        const auto [c, r] = pool[picks[i]];
        emit(i, new_classes[c], r);
      }
      break;
    }
    case SelectionKind::herding: {
      DenseMatrix translated;
      std::vector<std::pair<std::size_t, std::size_t>> origin;
      for (std::size_t c = 0; c < new_classes.size(); ++c) {
        const auto& nc = new_classes[c];
        for (std::size_t r = 0; r < nc.rows->rows(); ++r) {
          translated.append_row(translate(nc.rows->row(r), target, *nc.prototype));
          origin.emplace_back(c, r);
        }
      }
      const auto picked = herd(translated, target.centroid, samples);
      for (std::size_t i = 0; i < samples; ++i) {
        const auto idx = picked.selected_indices[i];
        auto dst = out.features.row(i);
        auto src = translated.row(idx);
        std::copy(src.begin(), src.end(), dst.begin());
        const auto [c, r] = origin[idx];
        out.source_record.push_back({new_classes[c].prototype->class_id, r});
      }
      break;
    }
  }
  return out;
}

}  // namespace fetril
