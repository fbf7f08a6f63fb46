// Copyright 2026 The emoadapt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Corpus data model: utterances with MFCC feature matrices, the
// emotion-to-binary-class mapping used for cross-corpus transfer, JSON
// manifest ingestion, the EMOF binary feature format, deterministic
// synthetic corpus pairs for desk-scale verification, and epoch batching.

#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "emoadapt/rng.hpp"

namespace emoadapt {

using Matrix = Eigen::MatrixXd;

enum class Axis { arousal, valence };

inline std::string to_string(Axis a) {
  return a == Axis::arousal ? "arousal" : "valence";
}

inline Axis axis_from_string(const std::string& s) {
  if (s == "arousal") return Axis::arousal;
  if (s == "valence") return Axis::valence;
  throw std::runtime_error("unknown axis: \"" + s + "\"");
}

enum class Role { source, target };

// ---------------------------------------------------------------------------
// Emotion mapping
// ---------------------------------------------------------------------------

// Maps categorical emotions onto the two binary tasks used for
// cross-corpus transfer: arousal (0=Low, 1=High) and valence
// (0=Negative, 1=Positive).
class EmotionMap {
 public:
  EmotionMap() {
    // Canonical nine emotions.  Arousal: low vs. high activation.
    add("boredom", 0, 0);
    add("calm", 0, 1);
    add("neutrality", 0, 1);
    add("sadness", 0, 0);
    add("anger", 1, 0);
    add("disgust", 1, 0);
    add("fear", 1, 0);
    add("happiness", 1, 1);
    add("surprise", 1, 1);
    // Morphological variants commonly found in corpus metadata.  These
    // are spelling aliases only; emotions outside the canonical nine must
    // be registered explicitly by the caller.
    register_alias("neutral", "neutrality");
    register_alias("happy", "happiness");
    register_alias("sad", "sadness");
    register_alias("angry", "anger");
    register_alias("bored", "boredom");
    register_alias("surprised", "surprise");
    register_alias("disgusted", "disgust");
    register_alias("fearful", "fear");
  }

  void register_alias(const std::string& alias, const std::string& canonical) {
    const auto it = table_.find(lower(canonical));
    if (it == table_.end())
      throw std::runtime_error("alias target not a known emotion: \"" +
                               canonical + "\"");
    table_[lower(alias)] = it->second;
  }

  bool known(const std::string& label) const {
    return table_.count(lower(label)) > 0;
  }

  int map(const std::string& label, Axis axis) const {
    const auto it = table_.find(lower(label));
    if (it == table_.end())
      throw std::runtime_error("unknown emotion label: \"" + label + "\"");
    return axis == Axis::arousal ? it->second.first : it->second.second;
  }

 private:
  static std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return s;
  }
  void add(const std::string& name, int arousal, int valence) {
    table_[name] = {arousal, valence};
  }

  std::unordered_map<std::string, std::pair<int, int>> table_;
};

inline int map_emotion(const std::string& label, Axis axis) {
  static const EmotionMap kMap;
  return kMap.map(label, axis);
}

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

struct Utterance {
  std::string sample_id;
  std::string corpus_id;
  Matrix features;                   // frames x coefficients
  std::optional<std::string> label;  // categorical emotion; empty if unknown
};

struct CorpusDataset {
  std::string name;
  Role role = Role::source;
  Axis axis = Axis::arousal;
  std::vector<Utterance> utterances;

  std::size_t n() const { return utterances.size(); }

  int label_index(std::size_t i) const {
    const auto& lab = utterances[i].label;
    if (!lab) throw std::runtime_error("utterance \"" +
                                       utterances[i].sample_id +
                                       "\" has no label");
    return map_emotion(*lab, axis);
  }

  // A copy with every label removed; how targets enter training.
  CorpusDataset without_labels() const {
    CorpusDataset d = *this;
    for (auto& u : d.utterances) u.label.reset();
    return d;
  }

  void validate(int expected_dim = -1) const {
    if (utterances.empty())
      throw std::runtime_error("dataset \"" + name + "\" is empty");
    for (const auto& u : utterances) {
      if (u.features.rows() < 1)
        throw std::runtime_error("utterance \"" + u.sample_id +
                                 "\" has no frames");
      if (expected_dim > 0 && u.features.cols() != expected_dim)
        throw std::runtime_error(
            "utterance \"" + u.sample_id + "\" has feature dim " +
            std::to_string(u.features.cols()) + ", expected " +
            std::to_string(expected_dim));
      if (!u.features.allFinite())
        throw std::runtime_error("utterance \"" + u.sample_id +
                                 "\" has non-finite features");
      if (role == Role::source && !u.label)
        throw std::runtime_error("source utterance \"" + u.sample_id +
                                 "\" is unlabeled");
    }
  }
};

// ---------------------------------------------------------------------------
// EMOF binary feature format
// ---------------------------------------------------------------------------
//
// Layout: magic "EMOF" + version u32 + frames u32 + dim u32, then
// frames*dim float32 values, row-major, all integers and floats
// little-endian.

namespace emof {

constexpr std::uint32_t kVersion = 1;

inline void put_u32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {
      static_cast<unsigned char>(v & 0xff),
      static_cast<unsigned char>((v >> 8) & 0xff),
      static_cast<unsigned char>((v >> 16) & 0xff),
      static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace emof

inline void write_emof(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os.write("EMOF", 4);
  emof::put_u32(os, emof::kVersion);
  emof::put_u32(os, static_cast<std::uint32_t>(m.rows()));
  emof::put_u32(os, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      emof::put_u32(os, std::bit_cast<std::uint32_t>(
                            static_cast<float>(m(i, j))));
    }
  }
  if (!os) throw std::runtime_error("short write to " + path.string());
}

inline Matrix read_emof(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != "EMOF")
    throw std::runtime_error("not an EMOF file: " + path.string());
  const std::uint32_t version = emof::get_u32(is);
  if (version != emof::kVersion)
    throw std::runtime_error("unsupported EMOF version " +
                             std::to_string(version) + " in " + path.string());
  const std::uint32_t rows = emof::get_u32(is);
  const std::uint32_t cols = emof::get_u32(is);
  if (!is || rows == 0 || cols == 0)
    throw std::runtime_error("corrupt EMOF header in " + path.string());
  Matrix m(rows, cols);
  for (std::uint32_t i = 0; i < rows; ++i) {
    for (std::uint32_t j = 0; j < cols; ++j) {
      m(i, j) = static_cast<double>(
          std::bit_cast<float>(emof::get_u32(is)));
    }
  }
  if (!is) throw std::runtime_error("truncated EMOF payload in " +
                                    path.string());
  return m;
}

// ---------------------------------------------------------------------------
// Manifests
// ---------------------------------------------------------------------------

inline CorpusDataset load_manifest(const std::filesystem::path& path,
                                   int expected_dim = 40) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("manifest " + path.string() +
                             " is not valid JSON: " + e.what());
  }
  CorpusDataset d;
  d.name = j.at("name").get<std::string>();
  const std::string role = j.at("role").get<std::string>();
  if (role == "source")
    d.role = Role::source;
  else if (role == "target")
    d.role = Role::target;
  else
    throw std::runtime_error("manifest role must be source|target, got \"" +
                             role + "\"");
  d.axis = axis_from_string(j.at("axis").get<std::string>());

  const auto base = path.parent_path();
  for (const auto& item : j.at("items")) {
    Utterance u;
    u.sample_id = item.at("id").get<std::string>();
    u.corpus_id = d.name;
    const auto feat_path = base / item.at("features").get<std::string>();
    u.features = read_emof(feat_path);
    if (item.contains("label") && !item.at("label").is_null()) {
      u.label = item.at("label").get<std::string>();
      map_emotion(*u.label, d.axis);  // reject unknown labels at load time
    }
    d.utterances.push_back(std::move(u));
  }
  d.validate(expected_dim);
  return d;
}

// Writes features as <dir>/<sample_id>.emof plus <dir>/manifest.json.
// With drop_labels, labels are omitted from the manifest (an unlabeled
// target export).
inline std::filesystem::path save_dataset(const CorpusDataset& d,
                                          const std::filesystem::path& dir,
                                          bool drop_labels = false) {
  std::filesystem::create_directories(dir);
  nlohmann::json items = nlohmann::json::array();
  for (const auto& u : d.utterances) {
    const std::string fname = u.sample_id + ".emof";
    write_emof(dir / fname, u.features);
    nlohmann::json item;
    item["id"] = u.sample_id;
    item["features"] = fname;
    if (u.label && !drop_labels)
      item["label"] = *u.label;
    else
      item["label"] = nullptr;
    items.push_back(std::move(item));
  }
  nlohmann::json j;
  j["name"] = d.name;
  j["role"] = d.role == Role::source ? "source" : "target";
  j["axis"] = to_string(d.axis);
  j["items"] = std::move(items);
  const auto manifest = dir / "manifest.json";
  std::ofstream os(manifest);
  os << j.dump(2) << "\n";
  if (!os) throw std::runtime_error("cannot write " + manifest.string());
  return manifest;
}

// ---------------------------------------------------------------------------
// Synthetic corpus pairs
// ---------------------------------------------------------------------------

// Generator for a matched pair of two-class corpora.  Both corpora draw
// from the same per-class sequence generators (class-dependent mean
// direction plus a class-dependent oscillation); the target is then pushed
// through a fixed affine corpus shift -- a rotation by `rotation` radians
// in successive coordinate planes, a translation of magnitude
// `translation`, and additional observation noise.  Class structure
// survives the shift, so emotion transfers while the corpus signature
// differs: exactly the regime the adaptation losses are built for.
struct SynthSpec {
  int n_source = 200;
  int n_target = 200;
  int frames = 32;
  int feature_dim = 40;
  Axis axis = Axis::arousal;
  double class_sep = 3.0;   // distance between class mean vectors
  double rotation = 0.4;    // radians per coordinate plane, target only
  double translation = 1.5; // magnitude of the target translation
  double noise = 0.5;       // within-class observation noise, both corpora
  double target_noise_extra = 0.25;  // extra noise on the target

  void validate() const {
    if (n_source < 2 || n_target < 2)
      throw std::runtime_error("synthetic corpora need at least 2 samples");
    if (frames < 1 || feature_dim < 1)
      throw std::runtime_error("degenerate synthetic shape");
  }
};

namespace detail {

inline Eigen::VectorXd random_unit(Rng& rng, int dim) {
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v(i) = rng.normal();
  const double n = v.norm();
  return n > 0 ? Eigen::VectorXd(v / n) : Eigen::VectorXd::Unit(dim, 0);
}

// Rotation by `angle` in each successive (2k, 2k+1) coordinate plane.
inline Matrix plane_rotation(int dim, double angle) {
  Matrix r = Matrix::Identity(dim, dim);
  const double c = std::cos(angle), s = std::sin(angle);
  for (int k = 0; k + 1 < dim; k += 2) {
    r(k, k) = c;
    r(k, k + 1) = -s;
    r(k + 1, k) = s;
    r(k + 1, k + 1) = c;
  }
  return r;
}

}  // namespace detail

inline std::pair<CorpusDataset, CorpusDataset> make_synthetic_pair(
    std::uint64_t seed, const SynthSpec& spec = {}) {
  spec.validate();
  const int d = spec.feature_dim;

  // Class generators shared by both corpora.
  Rng gen(derive_seed(seed, "synth.generators", 0));
  const Eigen::VectorXd sep_dir = detail::random_unit(gen, d);
  std::array<Eigen::VectorXd, 2> mean = {
      Eigen::VectorXd(-0.5 * spec.class_sep * sep_dir),
      Eigen::VectorXd(0.5 * spec.class_sep * sep_dir)};
  std::array<Eigen::VectorXd, 2> osc_dir = {detail::random_unit(gen, d),
                                            detail::random_unit(gen, d)};
  const std::array<double, 2> osc_freq = {0.35, 0.9};
  const std::array<double, 2> osc_amp = {1.2, 1.2};

  // Fixed corpus shift for the target.
  const Matrix rot = detail::plane_rotation(d, spec.rotation);
  const Eigen::VectorXd shift =
      spec.translation * detail::random_unit(gen, d);

  const std::array<std::string, 2> emotion =
      spec.axis == Axis::arousal
          ? std::array<std::string, 2>{"sadness", "anger"}
          : std::array<std::string, 2>{"sadness", "happiness"};

  auto draw = [&](Rng& rng, int cls, bool shifted) {
    Matrix x(spec.frames, d);
    const double phase = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    for (int t = 0; t < spec.frames; ++t) {
      Eigen::VectorXd row =
          mean[cls] +
          osc_amp[cls] * std::sin(osc_freq[cls] * t + phase) * osc_dir[cls];
      for (int j = 0; j < d; ++j) row(j) += spec.noise * rng.normal();
      if (shifted) {
        row = rot * row + shift;
        for (int j = 0; j < d; ++j)
          row(j) += spec.target_noise_extra * rng.normal();
      }
      x.row(t) = row.transpose();
    }
    return x;
  };

  auto build = [&](const char* tag, const char* name, Role role, int n,
                   bool shifted) {
    CorpusDataset ds;
    ds.name = name;
    ds.role = role;
    ds.axis = spec.axis;
    Rng rng(derive_seed(seed, tag, 1));
    for (int i = 0; i < n; ++i) {
      Utterance u;
      const int cls = i % 2;  // exactly balanced
      u.sample_id = std::string(role == Role::source ? "src_" : "tgt_") +
                    std::to_string(i);
      u.corpus_id = name;
      u.label = emotion[cls];
      u.features = draw(rng, cls, shifted);
      ds.utterances.push_back(std::move(u));
    }
    return ds;
  };

  return {build("synth.source", "synth_source", Role::source, spec.n_source,
                false),
          build("synth.target", "synth_target", Role::target, spec.n_target,
                true)};
}

// ---------------------------------------------------------------------------
// Batching
// ---------------------------------------------------------------------------

struct BatchPair {
  std::vector<const Utterance*> source;
  std::vector<int> source_labels;
  std::vector<const Utterance*> target;
  int step = 0;  // batch index within the epoch
};

// Per-epoch paired batching.  Both corpora are shuffled with seeds derived
// from (seed, epoch); each batch takes one slice from each corpus.  The
// epoch ends when the smaller corpus runs out, so every batch sees both
// corpora.
class BatchIterator {
 public:
  BatchIterator(const CorpusDataset& source, const CorpusDataset& target,
                int batch_size, std::uint64_t seed, int epoch)
      : source_(&source), target_(&target), batch_size_(batch_size) {
    if (batch_size < 2) throw std::runtime_error("batch_size must be >= 2");
    if (source.n() == 0 || target.n() == 0)
      throw std::runtime_error("cannot batch an empty dataset");
    src_order_.resize(source.n());
    tgt_order_.resize(target.n());
    for (std::size_t i = 0; i < src_order_.size(); ++i) src_order_[i] = i;
    for (std::size_t i = 0; i < tgt_order_.size(); ++i) tgt_order_[i] = i;
    Rng rs(derive_seed(seed, "shuffle.source",
                       static_cast<std::uint64_t>(epoch)));
    Rng rt(derive_seed(seed, "shuffle.target",
                       static_cast<std::uint64_t>(epoch)));
    rs.shuffle(src_order_);
    rt.shuffle(tgt_order_);
    const auto ceil_div = [](std::size_t n, std::size_t b) {
      return (n + b - 1) / b;
    };
    batches_ = static_cast<int>(
        std::min(ceil_div(source.n(), batch_size_),
                 ceil_div(target.n(), batch_size_)));
  }

  int batches() const { return batches_; }

  BatchPair batch(int k) const {
    if (k < 0 || k >= batches_) throw std::out_of_range("batch index");
    BatchPair b;
    b.step = k;
    const auto take = [this, k](const CorpusDataset& ds,
                                const std::vector<std::size_t>& order,
                                std::vector<const Utterance*>* out) {
      const std::size_t lo = static_cast<std::size_t>(k) * batch_size_;
      const std::size_t hi =
          std::min(ds.n(), lo + static_cast<std::size_t>(batch_size_));
      for (std::size_t i = lo; i < hi; ++i)
        out->push_back(&ds.utterances[order[i]]);
    };
    take(*source_, src_order_, &b.source);
    take(*target_, tgt_order_, &b.target);
    for (const Utterance* u : b.source) {
      if (!u->label)
        throw std::runtime_error("unlabeled source utterance in batch");
      b.source_labels.push_back(map_emotion(*u->label, source_->axis));
    }
    return b;
  }

 private:
  const CorpusDataset* source_;
  const CorpusDataset* target_;
  std::size_t batch_size_;
  int batches_ = 0;
  std::vector<std::size_t> src_order_;
  std::vector<std::size_t> tgt_order_;
};

// ---------------------------------------------------------------------------
// Padded batch tensor
// ---------------------------------------------------------------------------

// Stacked-sequence layout consumed by the model: row b*frames + t is frame
// t of utterance b; rows past an utterance's valid length are zero.
// Utterances longer than max_frames are truncated to max_frames.
struct FeatureBatch {
  Matrix x;  // (batch * frames) x dim
  std::vector<int> lengths;
  Eigen::Index batch = 0;
  Eigen::Index frames = 0;
  Eigen::Index dim = 0;
};

inline FeatureBatch pad_batch(const std::vector<const Utterance*>& utts,
                              int max_frames) {
  if (utts.empty()) throw std::runtime_error("cannot pad an empty batch");
  FeatureBatch fb;
  fb.batch = static_cast<Eigen::Index>(utts.size());
  fb.dim = utts[0]->features.cols();
  Eigen::Index frames = 1;
  for (const Utterance* u : utts) {
    if (u->features.cols() != fb.dim)
      throw std::runtime_error("inconsistent feature dims within batch");
    const Eigen::Index len =
        std::min<Eigen::Index>(u->features.rows(), max_frames);
    frames = std::max(frames, len);
  }
  fb.frames = frames;
  fb.x = Matrix::Zero(fb.batch * fb.frames, fb.dim);
  for (Eigen::Index b = 0; b < fb.batch; ++b) {
    const Eigen::Index len =
        std::min<Eigen::Index>(utts[b]->features.rows(), max_frames);
    fb.x.middleRows(b * fb.frames, len) = utts[b]->features.topRows(len);
    fb.lengths.push_back(static_cast<int>(len));
  }
  return fb;
}

}  // namespace emoadapt
