#include "fetril/synth.hpp"

#include <cmath>
#include <random>

#include "fetril/errors.hpp"
#include "fetril/rng.hpp"

namespace fetril {

namespace {

constexpr const char* kModule = "synth_bench";

// Hard preset: per-dimension sigma large enough that clusters overlap after
// L2 normalization at d=64, with NCM accuracy well below the easy preset.
constexpr double kEasySigma = 1.0;
constexpr double kHardSigma = 2.0;

DatasetManifest manifest_for(const std::string& name, Split split, const std::vector<FeatureMatrix>& ms) {
  DatasetManifest m;
  m.name = name;
  m.split = split;
  m.dim = ms.front().dim;
  for (const auto& fm : ms) m.classes.push_back({fm.class_id, fm.rows, ""});
  return m;
}

}  // namespace

std::string to_string(SynthPreset p) { return p == SynthPreset::easy ? "easy" : "hard"; }

SynthPreset parse_preset(const std::string& text) {
  if (text == "easy") return SynthPreset::easy;
  if (text == "hard") return SynthPreset::hard;
  throw ContractError(kModule, "unknown preset '" + text + "', expected easy or hard");
}

SynthSpec SynthSpec::from_preset(SynthPreset preset, std::size_t num_classes, std::size_t dim, std::size_t samples,
                                 std::uint64_t seed) {
  SynthSpec s;
  s.num_classes = num_classes;
  s.dim = dim;
  s.samples_per_class = samples;
  s.seed = seed;
  s.preset = preset;
  s.class_center_scale = 1.0;
  s.within_class_sigma = preset == SynthPreset::easy ? kEasySigma : kHardSigma;
  return s;
}

std::size_t SynthSpec::test_samples_per_class() const noexcept {
  const auto n = static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(samples_per_class)));
  return n == 0 ? 1 : n;
}

void SynthSpec::validate() const {
  if (num_classes < 1 || dim < 1 || samples_per_class < 1) throw ContractError(kModule, "counts must be >= 1");
  if (!(within_class_sigma > 0.0)) throw ContractError(kModule, "sigma must be positive");
  if (!(class_center_scale > 0.0)) throw ContractError(kModule, "center scale must be positive");
}

SynthDataset generate(const SynthSpec& spec) {
  spec.validate();
  std::vector<FeatureMatrix> train;
  std::vector<FeatureMatrix> test;
  const std::size_t n_test = spec.test_samples_per_class();
  for (std::size_t k = 0; k < spec.num_classes; ++k) {
    auto rng = make_rng(spec.seed, k);
    std::uniform_real_distribution<double> center_dist(-spec.class_center_scale, spec.class_center_scale);
    std::normal_distribution<double> noise(0.0, spec.within_class_sigma);
    std::vector<double> center(spec.dim);
    for (auto& c : center) c = center_dist(rng);

    auto draw = [&](std::size_t rows) {
      FeatureMatrix m{static_cast<ClassId>(k), rows, spec.dim, std::vector<float>(rows * spec.dim)};
      for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < spec.dim; ++j) m.data[i * spec.dim + j] = static_cast<float>(center[j] + noise(rng));
      }
      return m;
    };
    train.push_back(draw(spec.samples_per_class));
    test.push_back(draw(n_test));
  }
  const std::string name = "synth-" + to_string(spec.preset);
  auto train_manifest = manifest_for(name, Split::train, train);
  auto test_manifest = manifest_for(name, Split::test, test);
  return {FeatureStore(std::move(train_manifest), std::move(train)), FeatureStore(std::move(test_manifest), std::move(test))};
}

void write_synth(const SynthSpec& spec, const std::filesystem::path& out_dir) {
  auto data = generate(spec);
  auto collect = [](const FeatureStore& store) {
    std::vector<FeatureMatrix> ms;
    for (auto id : store.class_ids()) ms.push_back(store.matrix(id));
    return ms;
  };
  const std::string name = "synth-" + to_string(spec.preset);
  write_dataset(out_dir / "train.json", name, Split::train, collect(data.train));
  write_dataset(out_dir / "test.json", name, Split::test, collect(data.test));
}

}  // namespace fetril
