#include "fetril/feature_store.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fetril/errors.hpp"

namespace fetril {

namespace {

constexpr const char* kModule = "feature_store";

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(bytes[offset + k]) << (8 * k);
  return v;
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xFFFFFFFFu) throw ContractError(kModule, std::string(what) + " does not fit in u32");
  return static_cast<std::uint32_t>(v);
}

const char* split_name(Split s) { return s == Split::train ? "train" : "test"; }

}  // namespace

void DenseMatrix::append_row(std::span<const double> values) {
  if (rows_ == 0 && data_.empty()) cols_ = values.size();
  if (values.size() != cols_) throw ContractError("types", "appended row has wrong width");
  data_.insert(data_.end(), values.begin(), values.end());
  ++rows_;
}

void FeatureMatrix::validate() const {
  if (rows < 1) throw ContractError(kModule, "class " + std::to_string(class_id) + " has no rows");
  if (dim < 1) throw ContractError(kModule, "class " + std::to_string(class_id) + " has zero dimension");
  if (data.size() != rows * dim) throw ContractError(kModule, "data size does not match rows x dim");
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw DataError(kModule, "class " + std::to_string(class_id) + " has a non-finite value at row " +
                                   std::to_string(i / dim) + ", column " + std::to_string(i % dim));
    }
  }
}

DenseMatrix FeatureMatrix::to_dense() const {
  DenseMatrix out(rows, dim);
  for (std::size_t i = 0; i < rows; ++i) {
    auto src = row(i);
    auto dst = out.row(i);
    std::copy(src.begin(), src.end(), dst.begin());
  }
  return out;
}

std::vector<std::uint8_t> encode_feature_file(const FeatureMatrix& m) {
  if (m.data.size() != m.rows * m.dim) throw ContractError(kModule, "data size does not match rows x dim");
  std::vector<std::uint8_t> out;
  out.reserve(kFeatureHeaderBytes + m.data.size() * 4);
  out.insert(out.end(), std::begin(kFeatureMagic), std::end(kFeatureMagic));
  put_u32(out, m.class_id);
  put_u32(out, checked_u32(m.rows, "rows"));
  put_u32(out, checked_u32(m.dim, "dim"));
  for (float x : m.data) put_u32(out, std::bit_cast<std::uint32_t>(x));
  return out;
}

FeatureMatrix decode_feature_file(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFeatureHeaderBytes) throw FormatError(kModule, "feature file shorter than its header");
  if (!std::equal(std::begin(kFeatureMagic), std::end(kFeatureMagic), bytes.begin(),
                  [](char a, std::uint8_t b) { return static_cast<std::uint8_t>(a) == b; })) {
    throw FormatError(kModule, "bad magic, expected FTRL1");
  }
  FeatureMatrix m;
  m.class_id = get_u32(bytes, 5);
  m.rows = get_u32(bytes, 9);
  m.dim = get_u32(bytes, 13);
  const std::size_t expected = kFeatureHeaderBytes + m.rows * m.dim * 4;
  if (bytes.size() != expected) {
    throw FormatError(kModule, "payload is " + std::to_string(bytes.size()) + " bytes, header implies " +
                                   std::to_string(expected));
  }
  m.data.resize(m.rows * m.dim);
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    m.data[i] = std::bit_cast<float>(get_u32(bytes, kFeatureHeaderBytes + 4 * i));
  }
  return m;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(kModule, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(kModule, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(kModule, "short write to " + path.string());
}

void write_feature_file(const std::filesystem::path& path, const FeatureMatrix& m) {
  write_file_bytes(path, encode_feature_file(m));
}

FeatureMatrix read_feature_file(const std::filesystem::path& path) {
  try {
    return decode_feature_file(read_file_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(kModule, path.string() + ": " + e.what());
  }
}

std::string manifest_to_json(const DatasetManifest& manifest) {
  nlohmann::ordered_json doc;
  doc["name"] = manifest.name;
  doc["dim"] = manifest.dim;
  doc["split"] = split_name(manifest.split);
  doc["classes"] = nlohmann::ordered_json::array();
  for (const auto& c : manifest.classes) {
    doc["classes"].push_back({{"class_id", c.class_id}, {"count", c.count}, {"path", c.path}});
  }
  return doc.dump(2) + "\n";
}

DatasetManifest manifest_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(kModule, std::string("manifest is not valid JSON: ") + e.what());
  }
  DatasetManifest m;
  try {
    m.name = doc.at("name").get<std::string>();
    m.dim = doc.at("dim").get<std::size_t>();
    const auto split = doc.at("split").get<std::string>();
    if (split == "train") {
      m.split = Split::train;
    } else if (split == "test") {
      m.split = Split::test;
    } else {
      throw FormatError(kModule, "manifest split must be train or test, got '" + split + "'");
    }
    for (const auto& c : doc.at("classes")) {
      m.classes.push_back({c.at("class_id").get<ClassId>(), c.at("count").get<std::size_t>(),
                           c.at("path").get<std::string>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(kModule, std::string("manifest schema violation: ") + e.what());
  }
  if (m.dim == 0) throw FormatError(kModule, "manifest dim must be positive");
  std::set<ClassId> seen;
  for (const auto& c : m.classes) {
    if (!seen.insert(c.class_id).second) {
      throw ConsistencyError(kModule, "class " + std::to_string(c.class_id) + " listed twice");
    }
  }
  return m;
}

FeatureStore::FeatureStore(DatasetManifest manifest, std::vector<FeatureMatrix> matrices)
    : manifest_(std::move(manifest)), matrices_(std::move(matrices)) {
  for (std::size_t i = 0; i < matrices_.size(); ++i) {
    const auto& m = matrices_[i];
    if (m.dim != manifest_.dim) {
      throw ConsistencyError(kModule, "class " + std::to_string(m.class_id) + " has dim " + std::to_string(m.dim) +
                                          " but the dataset declares " + std::to_string(manifest_.dim));
    }
    if (!index_.emplace(m.class_id, i).second) {
      throw ConsistencyError(kModule, "duplicate class " + std::to_string(m.class_id));
    }
  }
}

std::vector<ClassId> FeatureStore::class_ids() const {
  std::vector<ClassId> ids;
  ids.reserve(index_.size());
  for (const auto& [id, _] : index_) ids.push_back(id);
  return ids;
}

const FeatureMatrix& FeatureStore::matrix(ClassId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw ContractError(kModule, "unknown class " + std::to_string(id));
  return matrices_[it->second];
}

std::size_t FeatureStore::max_class_count() const noexcept {
  std::size_t best = 0;
  for (const auto& m : matrices_) best = std::max(best, m.rows);
  return best;
}

FeatureStore load_dataset(const std::filesystem::path& manifest_path) {
  std::string text;
  {
    std::ifstream in(manifest_path);
    if (!in) throw IoError(kModule, "cannot open manifest " + manifest_path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  DatasetManifest manifest = manifest_from_json(text);
  const auto base = manifest_path.parent_path();
  std::vector<FeatureMatrix> matrices;
  matrices.reserve(manifest.classes.size());
  for (const auto& entry : manifest.classes) {
    const auto file = base / entry.path;
    if (!std::filesystem::exists(file)) throw IoError(kModule, "missing feature file " + file.string());
    FeatureMatrix m = read_feature_file(file);
    if (m.class_id != entry.class_id) {
      throw ConsistencyError(kModule, file.string() + " holds class " + std::to_string(m.class_id) +
                                          ", manifest says " + std::to_string(entry.class_id));
    }
    if (m.dim != manifest.dim) {
      throw ConsistencyError(kModule, file.string() + " declares dim " + std::to_string(m.dim) +
                                          ", manifest says " + std::to_string(manifest.dim));
    }
    if (m.rows != entry.count) {
      throw ConsistencyError(kModule, file.string() + " has " + std::to_string(m.rows) + " rows, manifest says " +
                                          std::to_string(entry.count));
    }
    m.validate();
    matrices.push_back(std::move(m));
  }
  return FeatureStore(std::move(manifest), std::move(matrices));
}

void write_dataset(const std::filesystem::path& manifest_path, const std::string& name, Split split,
                   const std::vector<FeatureMatrix>& matrices) {
  DatasetManifest manifest;
  manifest.name = name;
  manifest.split = split;
  manifest.dim = matrices.empty() ? 0 : matrices.front().dim;
  const auto base = manifest_path.parent_path();
  for (const auto& m : matrices) {
    if (m.dim != manifest.dim) throw ConsistencyError(kModule, "classes disagree on dimensionality");
    char buf[32];
    std::snprintf(buf, sizeof buf, "class_%05u.ftrl", m.class_id);
    const std::string rel = std::string(split_name(split)) + "/" + buf;
    write_feature_file(base / rel, m);
    manifest.classes.push_back({m.class_id, m.rows, rel});
  }
  const auto json = manifest_to_json(manifest);
  write_file_bytes(manifest_path, std::span(reinterpret_cast<const std::uint8_t*>(json.data()), json.size()));
}

ClassPrototype compute_prototype(const FeatureMatrix& m, int state_first_seen) {
  m.validate();
  ClassPrototype p{m.class_id, std::vector<double>(m.dim, 0.0), state_first_seen};
  for (std::size_t i = 0; i < m.rows; ++i) {
    auto r = m.row(i);
    for (std::size_t j = 0; j < m.dim; ++j) p.centroid[j] += static_cast<double>(r[j]);
  }
  for (auto& c : p.centroid) c /= static_cast<double>(m.rows);
  return p;
}

ClassPrototype compute_prototype(ClassId class_id, const DenseMatrix& rows, int state_first_seen) {
  if (rows.rows() == 0) throw ContractError(kModule, "class " + std::to_string(class_id) + " has no rows");
  ClassPrototype p{class_id, std::vector<double>(rows.cols(), 0.0), state_first_seen};
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    auto r = rows.row(i);
    for (std::size_t j = 0; j < rows.cols(); ++j) p.centroid[j] += r[j];
  }
  for (auto& c : p.centroid) c /= static_cast<double>(rows.rows());
  return p;
}

std::vector<double> l2_normalize(std::span<const double> v) {
  const double norm = std::sqrt(squared_norm(v));
  std::vector<double> out(v.size(), 0.0);
  if (norm <= kNormEpsilon) return out;
  for (std::size_t j = 0; j < v.size(); ++j) out[j] = v[j] / norm;
  return out;
}

DenseMatrix l2_normalize_rows(const DenseMatrix& m) {
  DenseMatrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto n = l2_normalize(m.row(i));
    std::copy(n.begin(), n.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace fetril
