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

// The dual-encoder network:
//
//   shared backbone   3 x [conv1d(k=3) -> batch norm -> ReLU -> dropout
//                          -> max-pool(time, stride 2)]
//   emotion encoder   5 TCN residual blocks (kernel 2, dilations 1,2,4,8,16,
//                     batch norm in place of weight normalization)
//                     -> masked mean over valid frames -> linear -> E
//   corpus encoder    single-layer Bi-LSTM, concatenated final states -> C
//   projection head   linear -> ReLU -> linear, rows L2-normalized
//   classifiers       emotion: linear -> softmax; corpus: linear -> sigmoid
//
// Everything is expressed as compositions of the autodiff primitives, so
// analytic parameter gradients come from the same tape that computes the
// forward pass.  Batch norm uses masked statistics (padding frames carry
// zero weight) and every block re-zeroes padding rows, which makes encoder
// outputs independent of how much padding a batch happens to carry.

#pragma once

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "emoadapt/autodiff.hpp"
#include "emoadapt/corpus.hpp"
#include "emoadapt/rng.hpp"

namespace emoadapt {

struct ModelConfig {
  int input_dim = 40;
  int backbone_blocks = 3;
  int backbone_channels = 64;
  int conv_kernel = 3;
  double dropout = 0.1;
  int tcn_blocks = 5;
  int tcn_kernel = 2;
  bool tcn_dropout = true;  // dropout inside TCN residual blocks
  int feature_dim = 128;
  int lstm_hidden = 64;
  int proj_dim = 128;
  int n_classes = 2;
  int max_frames = 300;

  void validate() const {
    for (const int v : {input_dim, backbone_blocks, backbone_channels,
                        conv_kernel, tcn_blocks, tcn_kernel, feature_dim,
                        lstm_hidden, proj_dim, n_classes, max_frames}) {
      if (v <= 0) throw std::runtime_error("ModelConfig fields must be > 0");
    }
    if (dropout < 0.0 || dropout >= 1.0)
      throw std::runtime_error("dropout must be in [0, 1)");
    // E and C feed one shared projection head, so their widths must agree.
    if (feature_dim != 2 * lstm_hidden)
      throw std::runtime_error(
          "feature_dim must equal 2*lstm_hidden so E and C share the "
          "projection head");
  }

  nlohmann::json to_json() const {
    return {{"input_dim", input_dim},
            {"backbone_blocks", backbone_blocks},
            {"backbone_channels", backbone_channels},
            {"conv_kernel", conv_kernel},
            {"dropout", dropout},
            {"tcn_blocks", tcn_blocks},
            {"tcn_kernel", tcn_kernel},
            {"tcn_dropout", tcn_dropout},
            {"feature_dim", feature_dim},
            {"lstm_hidden", lstm_hidden},
            {"proj_dim", proj_dim},
            {"n_classes", n_classes},
            {"max_frames", max_frames}};
  }

  static ModelConfig from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.input_dim = j.value("input_dim", c.input_dim);
    c.backbone_blocks = j.value("backbone_blocks", c.backbone_blocks);
    c.backbone_channels = j.value("backbone_channels", c.backbone_channels);
    c.conv_kernel = j.value("conv_kernel", c.conv_kernel);
    c.dropout = j.value("dropout", c.dropout);
    c.tcn_blocks = j.value("tcn_blocks", c.tcn_blocks);
    c.tcn_kernel = j.value("tcn_kernel", c.tcn_kernel);
    c.tcn_dropout = j.value("tcn_dropout", c.tcn_dropout);
    c.feature_dim = j.value("feature_dim", c.feature_dim);
    c.lstm_hidden = j.value("lstm_hidden", c.lstm_hidden);
    c.proj_dim = j.value("proj_dim", c.proj_dim);
    c.n_classes = j.value("n_classes", c.n_classes);
    c.max_frames = j.value("max_frames", c.max_frames);
    c.validate();
    return c;
  }
};

// A small desk-scale configuration for gradient checks and fast tests.
inline ModelConfig tiny_model_config() {
  ModelConfig c;
  c.input_dim = 5;
  c.backbone_blocks = 2;
  c.backbone_channels = 4;
  c.conv_kernel = 3;
  c.dropout = 0.1;
  c.tcn_blocks = 2;
  c.tcn_kernel = 2;
  c.feature_dim = 6;
  c.lstm_hidden = 3;
  c.proj_dim = 6;
  c.n_classes = 2;
  c.max_frames = 16;
  return c;
}

// ---------------------------------------------------------------------------
// Parameter store
// ---------------------------------------------------------------------------

// Named tensors in registration order.  "Buffers" (batch-norm running
// statistics) are serialized with the parameters but never optimized.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Matrix value;
    bool buffer = false;
  };

  Matrix& add(const std::string& name, Eigen::Index rows, Eigen::Index cols,
              bool buffer = false) {
    if (index_.count(name))
      throw std::logic_error("duplicate parameter name: " + name);
    index_[name] = entries_.size();
    entries_.push_back({name, Matrix::Zero(rows, cols), buffer});
    return entries_.back().value;
  }

  Matrix& at(const std::string& name) {
    const auto it = index_.find(name);
    if (it == index_.end())
      throw std::logic_error("unknown parameter: " + name);
    return entries_[it->second].value;
  }
  const Matrix& at(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end())
      throw std::logic_error("unknown parameter: " + name);
    return entries_[it->second].value;
  }

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }

  std::size_t trainable_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_)
      if (!e.buffer) n += static_cast<std::size_t>(e.value.size());
    return n;
  }

  bool all_finite() const {
    for (const auto& e : entries_)
      if (!e.value.allFinite()) return false;
    return true;
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

class Model {
 public:
  // Tape-bound views of every parameter; leaves when trainable, constants
  // otherwise.
  struct Graph {
    std::unordered_map<std::string, ad::Node*> nodes;
    ad::Node* at(const std::string& name) const {
      const auto it = nodes.find(name);
      if (it == nodes.end())
        throw std::logic_error("parameter not bound: " + name);
      return it->second;
    }
  };

  struct Encoded {
    ad::Node* E = nullptr;  // batch x feature_dim
    ad::Node* C = nullptr;  // batch x 2*lstm_hidden; null without the branch
  };

  // Masked batch-norm statistics observed during a training forward pass;
  // folded into the running buffers by apply_bn_updates().
  struct BnUpdate {
    std::string prefix;  // e.g. "backbone.0.bn"
    Eigen::RowVectorXd mean;
    Eigen::RowVectorXd var;  // biased batch variance
    double count = 0.0;      // valid rows behind the statistics
  };

  Model() : Model(ModelConfig{}, 0) {}

  Model(ModelConfig cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    register_params();
    init_params(seed);
  }

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  Graph bind(ad::Tape& tape, bool trainable) const {
    Graph g;
    for (const auto& e : params_.entries()) {
      // Running statistics are never differentiated through.
      const bool leaf = trainable && !e.buffer;
      g.nodes[e.name] = leaf ? tape.leaf(e.value) : tape.constant(e.value);
    }
    return g;
  }

  // -------------------------------------------------------------------------
  // Forward graphs
  // -------------------------------------------------------------------------

  // Runs the shared backbone and both encoder branches.  In training mode,
  // batch norm uses masked batch statistics (appending one BnUpdate per
  // layer) and dropout masks are drawn from dropout_seed; in evaluation
  // mode running statistics are used and dropout is a no-op.
  Encoded encode(ad::Tape& tape, const Graph& g, const FeatureBatch& fb,
                 bool train, std::uint64_t dropout_seed,
                 bool corpus_branch = true,
                 std::vector<BnUpdate>* updates = nullptr) const {
    if (fb.batch < 1) throw std::runtime_error("empty batch");
    if (fb.dim != cfg_.input_dim)
      throw std::runtime_error("batch feature dim " + std::to_string(fb.dim) +
                               " != model input_dim " +
                               std::to_string(cfg_.input_dim));
    if (fb.frames > cfg_.max_frames)
      throw std::runtime_error("batch frames exceed max_frames");
    if (!fb.x.allFinite()) throw std::runtime_error("non-finite input batch");

    Rng drop_rng(derive_seed(dropout_seed, "model.dropout", 0));

    ad::Node* x = tape.constant(fb.x);
    Eigen::Index frames = fb.frames;
    std::vector<int> lengths = fb.lengths;

    // Backbone: conv -> BN -> ReLU -> dropout -> max-pool, repeated.
    for (int blk = 0; blk < cfg_.backbone_blocks; ++blk) {
      const std::string p = "backbone." + std::to_string(blk);
      x = conv1d(tape, g, x, p + ".conv", fb.batch, frames,
                 same_offsets(cfg_.conv_kernel));
      x = batch_norm(tape, g, x, p + ".bn", fb.batch, frames, lengths, train,
                     updates);
      x = ad::relu(tape, x);
      x = dropout(tape, x, train, &drop_rng);
      x = mask_rows(tape, x, fb.batch, frames, lengths);
      Eigen::Index pooled = 0;
      x = ad::maxpool_time(tape, x, fb.batch, frames, lengths, &pooled);
      frames = pooled;
      for (int& len : lengths) len = ad::pooled_length(len);
    }

    Encoded out;

    // Emotion branch: TCN residual stack -> masked mean -> linear.
    {
      ad::Node* h = x;
      for (int blk = 0; blk < cfg_.tcn_blocks; ++blk) {
        const std::string p = "tcn." + std::to_string(blk);
        const Eigen::Index dilation = Eigen::Index{1} << blk;
        ad::Node* f = h;
        for (int layer = 1; layer <= 2; ++layer) {
          const std::string lp = p + ".conv" + std::to_string(layer);
          f = conv1d(tape, g, f, lp, fb.batch, frames,
                     causal_offsets(cfg_.tcn_kernel, dilation));
          f = batch_norm(tape, g, f, p + ".bn" + std::to_string(layer),
                         fb.batch, frames, lengths, train, updates);
          f = ad::relu(tape, f);
          if (cfg_.tcn_dropout) f = dropout(tape, f, train, &drop_rng);
          f = mask_rows(tape, f, fb.batch, frames, lengths);
        }
        // Input and output widths match by construction, so the residual
        // shortcut is the identity (a 1x1 conv would only be needed on a
        // width change).
        h = ad::relu(tape, ad::add(tape, h, f));
        h = mask_rows(tape, h, fb.batch, frames, lengths);
      }
      ad::Node* pooled =
          ad::masked_time_mean(tape, h, fb.batch, frames, lengths);
      out.E = ad::add_rowvec(tape, ad::matmul(tape, pooled, g.at("emo.out.w")),
                             g.at("emo.out.b"));
    }

    // Corpus branch: Bi-LSTM over the backbone sequence.
    if (corpus_branch) {
      ad::Node* fwd =
          lstm_direction(tape, g, x, "lstm.fwd", fb.batch, frames, lengths,
                         /*reverse=*/false);
      ad::Node* bwd =
          lstm_direction(tape, g, x, "lstm.bwd", fb.batch, frames, lengths,
                         /*reverse=*/true);
      out.C = ad::concat_cols(tape, fwd, bwd);
    }
    return out;
  }

  ad::Node* emotion_logits(ad::Tape& tape, const Graph& g,
                           ad::Node* E) const {
    return ad::add_rowvec(tape, ad::matmul(tape, E, g.at("cls_emo.w")),
                          g.at("cls_emo.b"));
  }

  // Softmax class probabilities, batch x n_classes.
  ad::Node* classify_emotion(ad::Tape& tape, const Graph& g,
                             ad::Node* E) const {
    return ad::softmax_rows(tape, emotion_logits(tape, g, E));
  }

  // Bernoulli probability of "target corpus", batch x 1.
  ad::Node* classify_corpus(ad::Tape& tape, const Graph& g,
                            ad::Node* C) const {
    ad::Node* logit = ad::add_rowvec(
        tape, ad::matmul(tape, C, g.at("cls_corpus.w")), g.at("cls_corpus.b"));
    return ad::sigmoid(tape, logit);
  }

  // Shared projection head g: linear -> ReLU -> linear, L2-normalized rows.
  ad::Node* project(ad::Tape& tape, const Graph& g, ad::Node* h) const {
    ad::Node* z = ad::add_rowvec(tape, ad::matmul(tape, h, g.at("proj.l1.w")),
                                 g.at("proj.l1.b"));
    z = ad::relu(tape, z);
    z = ad::add_rowvec(tape, ad::matmul(tape, z, g.at("proj.l2.w")),
                       g.at("proj.l2.b"));
    return ad::l2_normalize_rows(tape, z, 1e-12);
  }

  void apply_bn_updates(const std::vector<BnUpdate>& updates,
                        double momentum = 0.1) {
    for (const auto& u : updates) {
      Matrix& mean = params_.at(u.prefix + ".mean");
      Matrix& var = params_.at(u.prefix + ".var");
      mean = (1.0 - momentum) * mean + momentum * u.mean.matrix();
      // Running variance tracks the unbiased estimate.
      const double unbias =
          u.count > 1.5 ? u.count / (u.count - 1.0) : 1.0;
      var = (1.0 - momentum) * var + momentum * (unbias * u.var).matrix();
    }
  }

  // -------------------------------------------------------------------------
  // Evaluation-mode value wrappers
  // -------------------------------------------------------------------------

  std::pair<Matrix, Matrix> encode_eval(const FeatureBatch& fb) const {
    ad::Tape tape;
    const Graph g = bind(tape, /*trainable=*/false);
    const Encoded enc = encode(tape, g, fb, /*train=*/false, 0);
    return {enc.E->value, enc.C->value};
  }

  Matrix classify_emotion_eval(const FeatureBatch& fb) const {
    ad::Tape tape;
    const Graph g = bind(tape, /*trainable=*/false);
    const Encoded enc =
        encode(tape, g, fb, /*train=*/false, 0, /*corpus_branch=*/false);
    return classify_emotion(tape, g, enc.E)->value;
  }

  Matrix project_eval(const Matrix& h) const {
    ad::Tape tape;
    const Graph g = bind(tape, /*trainable=*/false);
    return project(tape, g, tape.constant(h))->value;
  }

  Matrix classify_corpus_eval(const Matrix& c) const {
    ad::Tape tape;
    const Graph g = bind(tape, /*trainable=*/false);
    return classify_corpus(tape, g, tape.constant(c))->value;
  }

 private:
  // One weight row block per tap: W is (kernel*in) x out; bias 1 x out.
  static std::vector<Eigen::Index> same_offsets(int kernel) {
    std::vector<Eigen::Index> offs;
    const int pad = (kernel - 1) / 2;
    for (int j = 0; j < kernel; ++j) offs.push_back(j - pad);
    return offs;
  }

  static std::vector<Eigen::Index> causal_offsets(int kernel,
                                                  Eigen::Index dilation) {
    std::vector<Eigen::Index> offs;
    for (int j = 0; j < kernel; ++j)
      offs.push_back(-dilation * (kernel - 1 - j));
    return offs;
  }

  ad::Node* conv1d(ad::Tape& tape, const Graph& g, ad::Node* x,
                   const std::string& prefix, Eigen::Index batch,
                   Eigen::Index frames,
                   const std::vector<Eigen::Index>& offsets) const {
    ad::Node* w = g.at(prefix + ".w");
    const Eigen::Index in = x->value.cols();
    ad::Node* acc = nullptr;
    for (std::size_t j = 0; j < offsets.size(); ++j) {
      ad::Node* shifted =
          offsets[j] == 0 ? x
                          : ad::shift_time(tape, x, batch, frames, offsets[j]);
      ad::Node* tap = ad::matmul(
          tape, shifted,
          ad::slice_rows(tape, w, static_cast<Eigen::Index>(j) * in, in));
      acc = acc ? ad::add(tape, acc, tap) : tap;
    }
    return ad::add_rowvec(tape, acc, g.at(prefix + ".b"));
  }

  // Batch norm over channels with per-row masking: padding rows carry zero
  // weight in the mean/variance, so statistics are invariant to padding.
  ad::Node* batch_norm(ad::Tape& tape, const Graph& g, ad::Node* x,
                       const std::string& prefix, Eigen::Index batch,
                       Eigen::Index frames, const std::vector<int>& lengths,
                       bool train, std::vector<BnUpdate>* updates) const {
    constexpr double kEps = 1e-5;
    ad::Node* gamma = g.at(prefix + ".gamma");
    ad::Node* beta = g.at(prefix + ".beta");
    if (train) {
      double count = 0.0;
      for (const int len : lengths) count += len;
      Eigen::RowVectorXd w = Eigen::RowVectorXd::Zero(x->value.rows());
      for (Eigen::Index b = 0; b < batch; ++b)
        w.segment(b * frames, lengths[static_cast<std::size_t>(b)])
            .setConstant(1.0 / count);
      ad::Node* wnode = tape.constant(w);
      ad::Node* mu = ad::matmul(tape, wnode, x);  // 1 x channels
      ad::Node* centered = ad::add_rowvec(tape, x, ad::neg(tape, mu));
      ad::Node* var =
          ad::matmul(tape, wnode, ad::square(tape, centered));  // masked E[d^2]
      ad::Node* istd =
          ad::pow_op(tape, ad::add_scalar(tape, var, kEps), -0.5);
      ad::Node* norm = ad::mul_rowvec(tape, centered, istd);
      if (updates)
        updates->push_back(
            {prefix, mu->value.row(0), var->value.row(0), count});
      return ad::add_rowvec(tape, ad::mul_rowvec(tape, norm, gamma), beta);
    }
    const Matrix& rm = params_.at(prefix + ".mean");
    const Matrix& rv = params_.at(prefix + ".var");
    Eigen::RowVectorXd scale =
        (rv.row(0).array() + kEps).rsqrt().matrix();
    ad::Node* norm = ad::mul_rowvec(
        tape, ad::add_rowvec(tape, x, tape.constant(-rm)),
        tape.constant(Matrix(scale)));
    return ad::add_rowvec(tape, ad::mul_rowvec(tape, norm, gamma), beta);
  }

  ad::Node* dropout(ad::Tape& tape, ad::Node* x, bool train,
                    Rng* rng) const {
    if (!train || cfg_.dropout <= 0.0) return x;
    const double keep = 1.0 - cfg_.dropout;
    Matrix mask(x->value.rows(), x->value.cols());
    for (Eigen::Index i = 0; i < mask.rows(); ++i)
      for (Eigen::Index j = 0; j < mask.cols(); ++j)
        mask(i, j) = rng->uniform() < keep ? 1.0 / keep : 0.0;
    return ad::mul_const(tape, x, std::move(mask));
  }

  // Zeroes padding rows so later shifts and statistics see true zeros.
  ad::Node* mask_rows(ad::Tape& tape, ad::Node* x, Eigen::Index batch,
                      Eigen::Index frames,
                      const std::vector<int>& lengths) const {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(x->value.rows());
    for (Eigen::Index b = 0; b < batch; ++b)
      m.segment(b * frames, lengths[static_cast<std::size_t>(b)])
          .setConstant(1.0);
    return ad::rowscale(tape, x, m);
  }

  // One LSTM direction; returns the final hidden state of each sequence
  // (the state after its last valid frame).  Padding steps keep the
  // previous state through 0/1 row gates.
  ad::Node* lstm_direction(ad::Tape& tape, const Graph& g, ad::Node* x,
                           const std::string& prefix, Eigen::Index batch,
                           Eigen::Index frames,
                           const std::vector<int>& lengths,
                           bool reverse) const {
    const Eigen::Index H = cfg_.lstm_hidden;
    ad::Node* wx = g.at(prefix + ".wx");
    ad::Node* wh = g.at(prefix + ".wh");
    ad::Node* bias = g.at(prefix + ".b");
    ad::Node* h = tape.constant(Matrix::Zero(batch, H));
    ad::Node* c = tape.constant(Matrix::Zero(batch, H));
    for (Eigen::Index step = 0; step < frames; ++step) {
      const Eigen::Index t = reverse ? frames - 1 - step : step;
      Eigen::VectorXd gate = Eigen::VectorXd::Zero(batch);
      Eigen::VectorXd hold = Eigen::VectorXd::Ones(batch);
      for (Eigen::Index b = 0; b < batch; ++b) {
        if (t < lengths[static_cast<std::size_t>(b)]) {
          gate(b) = 1.0;
          hold(b) = 0.0;
        }
      }
      ad::Node* xt = ad::select_time(tape, x, batch, frames, t);
      ad::Node* acts = ad::add_rowvec(
          tape,
          ad::add(tape, ad::matmul(tape, xt, wx), ad::matmul(tape, h, wh)),
          bias);
      ad::Node* i_g = ad::sigmoid(tape, ad::slice_cols(tape, acts, 0, H));
      ad::Node* f_g = ad::sigmoid(tape, ad::slice_cols(tape, acts, H, H));
      ad::Node* g_g = ad::tanh_op(tape, ad::slice_cols(tape, acts, 2 * H, H));
      ad::Node* o_g = ad::sigmoid(tape, ad::slice_cols(tape, acts, 3 * H, H));
      ad::Node* c_new =
          ad::add(tape, ad::mul(tape, f_g, c), ad::mul(tape, i_g, g_g));
      ad::Node* h_new = ad::mul(tape, o_g, ad::tanh_op(tape, c_new));
      c = ad::add(tape, ad::rowscale(tape, c_new, gate),
                  ad::rowscale(tape, c, hold));
      h = ad::add(tape, ad::rowscale(tape, h_new, gate),
                  ad::rowscale(tape, h, hold));
    }
    return h;
  }

  // -------------------------------------------------------------------------
  // Parameter registration and initialization
  // -------------------------------------------------------------------------

  void register_params() {
    const int cb = cfg_.backbone_channels;
    int in = cfg_.input_dim;
    for (int blk = 0; blk < cfg_.backbone_blocks; ++blk) {
      const std::string p = "backbone." + std::to_string(blk);
      params_.add(p + ".conv.w", cfg_.conv_kernel * in, cb);
      params_.add(p + ".conv.b", 1, cb);
      add_bn(p + ".bn", cb);
      in = cb;
    }
    for (int blk = 0; blk < cfg_.tcn_blocks; ++blk) {
      const std::string p = "tcn." + std::to_string(blk);
      for (int layer = 1; layer <= 2; ++layer) {
        params_.add(p + ".conv" + std::to_string(layer) + ".w",
                    cfg_.tcn_kernel * cb, cb);
        params_.add(p + ".conv" + std::to_string(layer) + ".b", 1, cb);
        add_bn(p + ".bn" + std::to_string(layer), cb);
      }
    }
    params_.add("emo.out.w", cb, cfg_.feature_dim);
    params_.add("emo.out.b", 1, cfg_.feature_dim);
    for (const std::string dir : {"fwd", "bwd"}) {
      params_.add("lstm." + dir + ".wx", cb, 4 * cfg_.lstm_hidden);
      params_.add("lstm." + dir + ".wh", cfg_.lstm_hidden,
                  4 * cfg_.lstm_hidden);
      params_.add("lstm." + dir + ".b", 1, 4 * cfg_.lstm_hidden);
    }
    params_.add("proj.l1.w", cfg_.feature_dim, cfg_.proj_dim);
    params_.add("proj.l1.b", 1, cfg_.proj_dim);
    params_.add("proj.l2.w", cfg_.proj_dim, cfg_.proj_dim);
    params_.add("proj.l2.b", 1, cfg_.proj_dim);
    params_.add("cls_emo.w", cfg_.feature_dim, cfg_.n_classes);
    params_.add("cls_emo.b", 1, cfg_.n_classes);
    params_.add("cls_corpus.w", 2 * cfg_.lstm_hidden, 1);
    params_.add("cls_corpus.b", 1, 1);
  }

  void add_bn(const std::string& prefix, int channels) {
    params_.add(prefix + ".gamma", 1, channels).setOnes();
    params_.add(prefix + ".beta", 1, channels);
    params_.add(prefix + ".mean", 1, channels, /*buffer=*/true);
    params_.add(prefix + ".var", 1, channels, /*buffer=*/true).setOnes();
  }

  void init_params(std::uint64_t seed) {
    Rng rng(derive_seed(seed, "model.init", 0));
    for (auto& e : params_.entries()) {
      if (e.buffer) continue;  // running stats keep their registered values
      const bool is_bias = e.name.ends_with(".b") ||
                           e.name.ends_with(".beta") ||
                           e.name.ends_with(".gamma");
      if (is_bias) continue;  // zeros (or ones for gamma) from registration
      if (e.name.find(".wh") != std::string::npos) {
        // Orthogonal recurrent weights, one square block per gate.
        const Eigen::Index h = e.value.rows();
        for (Eigen::Index blk = 0; blk < e.value.cols() / h; ++blk) {
          Matrix a(h, h);
          for (Eigen::Index i = 0; i < h; ++i)
            for (Eigen::Index j = 0; j < h; ++j) a(i, j) = rng.normal();
          Eigen::HouseholderQR<Matrix> qr(a);
          Matrix q = qr.householderQ() * Matrix::Identity(h, h);
          const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
          for (Eigen::Index j = 0; j < h; ++j)
            if (r(j, j) < 0) q.col(j) = -q.col(j);
          e.value.middleCols(blk * h, h) = q;
        }
      } else {
        // Kaiming-style uniform with fan-in = rows of the (in x out) map.
        const double bound =
            std::sqrt(6.0 / static_cast<double>(e.value.rows()));
        for (Eigen::Index i = 0; i < e.value.rows(); ++i)
          for (Eigen::Index j = 0; j < e.value.cols(); ++j)
            e.value(i, j) = rng.uniform(-bound, bound);
      }
    }
  }

  ModelConfig cfg_;
  ParamStore params_;
};

}  // namespace emoadapt
