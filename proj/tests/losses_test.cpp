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

#include "emoadapt/losses.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <vector>

#include "emoadapt/rng.hpp"
#include "test_util.hpp"

using namespace emoadapt;
using emoadapt::testing::max_gradcheck_error;
using emoadapt::testing::random_matrix;
namespace adn = emoadapt::ad;

namespace {

constexpr double kGradTol = 1e-4;

Matrix unit_rows(Rng& rng, Eigen::Index n, Eigen::Index d) {
  Matrix m = random_matrix(rng, n, d);
  for (Eigen::Index i = 0; i < n; ++i) m.row(i) /= m.row(i).norm();
  return m;
}

// Straight-line scalar evaluation of the prototype decoupling loss.
// Unlike the graph version there is no log-sum-exp; plain exp/log stay in
// double range for |dot/tau| <= 100.
double decouple_oracle(const Eigen::RowVectorXd& es,
                       const Eigen::RowVectorXd& cs,
                       const Eigen::RowVectorXd& et,
                       const Eigen::RowVectorXd& ct, double tau) {
  auto term = [tau](const Eigen::RowVectorXd& em, const Eigen::RowVectorXd& en,
                    const Eigen::RowVectorXd& cm,
                    const Eigen::RowVectorXd& cn) {
    const double num = std::exp(em.dot(en) / tau);
    const double den =
        std::exp(em.dot(cm) / tau) + std::exp(em.dot(cn) / tau);
    return std::log(num / den);
  };
  return -0.5 * (term(es, et, cs, ct) + term(et, es, ct, cs));
}

// Brute-force pairwise supervised-contrast oracle.
double scl_oracle(const Matrix& z, const std::vector<int>& labels,
                  double tau) {
  const Eigen::Index n = z.rows();
  double total = 0.0;
  int anchors = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<Eigen::Index> positives;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i && labels[j] == labels[i]) positives.push_back(j);
    if (positives.empty()) continue;
    ++anchors;
    double inner = 0.0;
    for (const Eigen::Index j : positives) {
      double den = 0.0;
      for (Eigen::Index k = 0; k < n; ++k)
        if (k != i) den += std::exp(z.row(i).dot(z.row(k)) / tau);
      inner += std::log(std::exp(z.row(i).dot(z.row(j)) / tau) / den);
    }
    total += inner / static_cast<double>(positives.size());
  }
  return anchors == 0 ? 0.0 : -total / static_cast<double>(anchors);
}

// Three-loop kernel-matrix oracle for the biased MMD V-statistic.
double mmd_oracle(const Matrix& x, const Matrix& y,
                  const std::vector<double>& sigma2,
                  const std::vector<double>& beta) {
  auto k = [&](const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
    double v = 0.0;
    for (std::size_t u = 0; u < sigma2.size(); ++u)
      v += beta[u] * std::exp(-(a - b).squaredNorm() / (2.0 * sigma2[u]));
    return v;
  };
  double xx = 0.0, yy = 0.0, xy = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.rows(); ++j) xx += k(x.row(i), x.row(j));
  for (Eigen::Index i = 0; i < y.rows(); ++i)
    for (Eigen::Index j = 0; j < y.rows(); ++j) yy += k(y.row(i), y.row(j));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < y.rows(); ++j) xy += k(x.row(i), y.row(j));
  const double nx = static_cast<double>(x.rows());
  const double ny = static_cast<double>(y.rows());
  return xx / (nx * nx) + yy / (ny * ny) - 2.0 * xy / (nx * ny);
}

double value_of(adn::Node* n) { return n->value(0, 0); }

}  // namespace

// ---------------------------------------------------------------------------
// Cross-entropies
// ---------------------------------------------------------------------------

TEST_CASE("emotion cross-entropy hand examples", "[losses]") {
  adn::Tape t;
  Matrix perfect(2, 2);
  perfect << 1.0, 0.0, 0.0, 1.0;
  // log(1) terms only: feed the true-class column.
  REQUIRE(value_of(emotion_ce(t, t.constant(perfect), {0, 1})) ==
          Catch::Approx(0.0).margin(1e-12));

  Matrix uniform = Matrix::Constant(3, 2, 0.5);
  REQUIRE(value_of(emotion_ce(t, t.constant(uniform), {0, 1, 0})) ==
          Catch::Approx(std::log(2.0)).epsilon(1e-12));

  Matrix p(2, 2);
  p << 0.9, 0.1, 0.2, 0.8;
  REQUIRE(value_of(emotion_ce(t, t.constant(p), {0, 1})) ==
          Catch::Approx(-(std::log(0.9) + std::log(0.8)) / 2.0)
              .epsilon(1e-12));

  REQUIRE_THROWS_WITH(emotion_ce(t, t.constant(p), {0, 2}),
                      Catch::Matchers::ContainsSubstring("out of range"));
}

TEST_CASE("logit-space emotion CE equals the probability form", "[losses]") {
  Rng rng(21);
  adn::Tape t;
  const Matrix logits = random_matrix(rng, 6, 2, 3.0);
  const std::vector<int> y = {0, 1, 1, 0, 1, 0};
  adn::Node* ln = t.constant(logits);
  const double via_probs =
      value_of(emotion_ce(t, adn::softmax_rows(t, ln), y));
  const double via_logits = value_of(emotion_ce_logits(t, ln, y));
  REQUIRE(via_probs == Catch::Approx(via_logits).epsilon(1e-12));

  // The logit form survives magnitudes where softmax underflows.
  Matrix extreme(1, 2);
  extreme << 800.0, -800.0;
  REQUIRE(std::isfinite(
      value_of(emotion_ce_logits(t, t.constant(extreme), {1}))));
}

TEST_CASE("corpus cross-entropy hand examples", "[losses]") {
  adn::Tape t;
  REQUIRE(value_of(corpus_ce(t, t.constant(Matrix::Constant(4, 1, 0.5)),
                             {0, 1, 0, 1})) ==
          Catch::Approx(std::log(2.0)).epsilon(1e-12));

  Matrix p(2, 1);
  p << 0.7, 0.3;
  REQUIRE(value_of(corpus_ce(t, t.constant(p), {1, 0})) ==
          Catch::Approx(-(std::log(0.7) + std::log(0.7)) / 2.0)
              .epsilon(1e-12));

  // Near-perfect confidence drives the loss toward zero.
  Matrix conf(2, 1);
  conf << 1.0 - 1e-9, 1e-9;
  REQUIRE(value_of(corpus_ce(t, t.constant(conf), {1, 0})) ==
          Catch::Approx(0.0).margin(1e-8));

  SECTION("logit form matches and stays finite at extremes") {
    Rng rng(22);
    const Matrix logits = random_matrix(rng, 5, 1, 2.0);
    const std::vector<int> d = {1, 0, 0, 1, 1};
    const double via_probs =
        value_of(corpus_ce(t, adn::sigmoid(t, t.constant(logits)), d));
    const double via_logits =
        value_of(corpus_ce_logits(t, t.constant(logits), d));
    REQUIRE(via_probs == Catch::Approx(via_logits).epsilon(1e-10));
    Matrix extreme(2, 1);
    extreme << 500.0, -500.0;
    REQUIRE(std::isfinite(
        value_of(corpus_ce_logits(t, t.constant(extreme), {0, 1}))));
  }
}

TEST_CASE("cross-entropy gradients match finite differences",
          "[losses][grad]") {
  for (std::uint64_t seed = 100; seed < 105; ++seed) {
    Rng rng(seed);
    const Matrix logits = random_matrix(rng, 5, 2);
    const Matrix clogits = random_matrix(rng, 5, 1);
    const std::vector<int> y = {0, 1, 1, 0, 1};

    auto emo = [&y](adn::Tape& t, const std::vector<adn::Node*>& in) {
      return emotion_ce(t, adn::softmax_rows(t, in[0]), y);
    };
    REQUIRE(max_gradcheck_error(emo, {logits}) < kGradTol);

    auto emo_l = [&y](adn::Tape& t, const std::vector<adn::Node*>& in) {
      return emotion_ce_logits(t, in[0], y);
    };
    REQUIRE(max_gradcheck_error(emo_l, {logits}) < kGradTol);

    auto cor = [&y](adn::Tape& t, const std::vector<adn::Node*>& in) {
      return corpus_ce(t, adn::sigmoid(t, in[0]), y);
    };
    REQUIRE(max_gradcheck_error(cor, {clogits}) < kGradTol);

    auto cor_l = [&y](adn::Tape& t, const std::vector<adn::Node*>& in) {
      return corpus_ce_logits(t, in[0], y);
    };
    REQUIRE(max_gradcheck_error(cor_l, {clogits}) < kGradTol);
  }
}

// ---------------------------------------------------------------------------
// Prototypes and decoupling
// ---------------------------------------------------------------------------

TEST_CASE("prototypes are normalized means", "[losses]") {
  adn::Tape t;
  Matrix z(2, 2);
  z << 1.0, 0.0, 0.0, 1.0;
  adn::Node* p = prototype_of(t, t.constant(z));
  REQUIRE(p->value(0, 0) == Catch::Approx(std::sqrt(0.5)).epsilon(1e-12));
  REQUIRE(p->value(0, 1) == Catch::Approx(std::sqrt(0.5)).epsilon(1e-12));

  Matrix single(1, 3);
  single << 0.0, 1.0, 0.0;
  REQUIRE(prototype_of(t, t.constant(single))->value == single);

  SECTION("row permutation leaves the prototype unchanged") {
    Rng rng(30);
    const Matrix a = unit_rows(rng, 6, 4);
    Matrix b = a;
    b.row(0).swap(b.row(5));
    b.row(1).swap(b.row(3));
    adn::Tape t2;
    REQUIRE(prototype_of(t2, t2.constant(a))->value.isApprox(
        prototype_of(t2, t2.constant(b))->value, 1e-12));
  }
}

TEST_CASE("decoupling loss closed forms", "[losses]") {
  adn::Tape t;
  Matrix u(1, 4);
  u << 0.5, -0.5, 0.5, 0.5;  // unit norm

  SECTION("all prototypes identical gives ln 2 at any temperature") {
    for (const double tau : {1.0, 0.1, 1e-2}) {
      PrototypeSet p{t.constant(u), t.constant(u), t.constant(u),
                     t.constant(u)};
      REQUIRE(value_of(decouple_loss(t, p, tau)) ==
              Catch::Approx(std::log(2.0)).epsilon(1e-10));
    }
  }

  SECTION("antipodal corpus prototypes at tau=1 give -(2 - ln 2)") {
    PrototypeSet p{t.constant(u), t.constant(-u), t.constant(u),
                   t.constant(-u)};
    REQUIRE(value_of(decouple_loss(t, p, 1.0)) ==
            Catch::Approx(-(2.0 - std::log(2.0))).epsilon(1e-10));
  }
}

TEST_CASE("decoupling loss matches the scalar oracle at tau=1e-2",
          "[losses][oracle]") {
  for (std::uint64_t seed = 40; seed < 46; ++seed) {
    Rng rng(seed);
    const Matrix es = unit_rows(rng, 1, 8), cs = unit_rows(rng, 1, 8);
    const Matrix et = unit_rows(rng, 1, 8), ct = unit_rows(rng, 1, 8);
    adn::Tape t;
    PrototypeSet p{t.constant(es), t.constant(cs), t.constant(et),
                   t.constant(ct)};
    const double got = value_of(decouple_loss(t, p, 1e-2));
    const double want =
        decouple_oracle(es.row(0), cs.row(0), et.row(0), ct.row(0), 1e-2);
    REQUIRE(got == Catch::Approx(want).margin(1e-8));
  }
}

TEST_CASE("decoupling loss is rotation invariant", "[losses]") {
  Rng rng(47);
  const Matrix es = unit_rows(rng, 1, 6), cs = unit_rows(rng, 1, 6);
  const Matrix et = unit_rows(rng, 1, 6), ct = unit_rows(rng, 1, 6);
  // Random orthogonal matrix from QR.
  Matrix a = random_matrix(rng, 6, 6);
  Eigen::HouseholderQR<Matrix> qr(a);
  const Matrix q = qr.householderQ() * Matrix::Identity(6, 6);

  adn::Tape t;
  PrototypeSet p1{t.constant(es), t.constant(cs), t.constant(et),
                  t.constant(ct)};
  PrototypeSet p2{t.constant(es * q), t.constant(cs * q),
                  t.constant(et * q), t.constant(ct * q)};
  REQUIRE(value_of(decouple_loss(t, p1, 0.05)) ==
          Catch::Approx(value_of(decouple_loss(t, p2, 0.05)))
              .epsilon(1e-10));
}

TEST_CASE("decouple gradients through prototypes match finite differences",
          "[losses][grad]") {
  for (std::uint64_t seed = 50; seed < 55; ++seed) {
    Rng rng(seed);
    // Chain: raw batches -> unit rows -> prototypes -> loss, w.r.t. raws.
    const Matrix ze_s = random_matrix(rng, 3, 5);
    const Matrix zc_s = random_matrix(rng, 3, 5);
    const Matrix ze_t = random_matrix(rng, 4, 5);
    const Matrix zc_t = random_matrix(rng, 4, 5);
    auto fn = [](adn::Tape& t, const std::vector<adn::Node*>& in) {
      const PrototypeSet p = compute_prototypes(
          t, adn::l2_normalize_rows(t, in[0]), adn::l2_normalize_rows(t, in[1]),
          adn::l2_normalize_rows(t, in[2]), adn::l2_normalize_rows(t, in[3]));
      return decouple_loss(t, p, 0.05);
    };
    REQUIRE(max_gradcheck_error(fn, {ze_s, zc_s, ze_t, zc_t}) < kGradTol);
  }
}

// ---------------------------------------------------------------------------
// Supervised contrastive loss
// ---------------------------------------------------------------------------

TEST_CASE("SCL degenerate and two-row cases", "[losses]") {
  adn::Tape t;
  Rng rng(60);
  bool degenerate = false;

  const Matrix one = unit_rows(rng, 1, 4);
  REQUIRE(value_of(scl_loss(t, t.constant(one), {0}, 1e-2, &degenerate)) ==
          0.0);
  REQUIRE(degenerate);

  // Two rows, same label: the only candidate is the only positive.
  const Matrix two = unit_rows(rng, 2, 4);
  REQUIRE(value_of(scl_loss(t, t.constant(two), {1, 1}, 1e-2, &degenerate)) ==
          Catch::Approx(0.0).margin(1e-12));
  REQUIRE(!degenerate);

  // Two rows, different labels: no positives anywhere.
  REQUIRE(value_of(scl_loss(t, t.constant(two), {0, 1}, 1e-2, &degenerate)) ==
          0.0);
  REQUIRE(degenerate);
}

TEST_CASE("SCL matches the brute-force oracle", "[losses][oracle]") {
  Rng rng(61);
  {
    adn::Tape t;
    const Matrix z = unit_rows(rng, 3, 6);
    const std::vector<int> y = {0, 0, 1};
    REQUIRE(value_of(scl_loss(t, t.constant(z), y, 1e-2)) ==
            Catch::Approx(scl_oracle(z, y, 1e-2)).margin(1e-8));
  }
  for (std::uint64_t seed = 62; seed < 68; ++seed) {
    Rng r2(seed);
    adn::Tape t;
    const Eigen::Index n = 5 + static_cast<Eigen::Index>(r2.below(6));
    const Matrix z = unit_rows(r2, n, 8);
    std::vector<int> y;
    for (Eigen::Index i = 0; i < n; ++i)
      y.push_back(static_cast<int>(r2.below(2)));
    REQUIRE(value_of(scl_loss(t, t.constant(z), y, 1e-2)) ==
            Catch::Approx(scl_oracle(z, y, 1e-2)).margin(1e-8));
  }
}

TEST_CASE("SCL is invariant under joint permutation", "[losses]") {
  Rng rng(70);
  const Matrix z = unit_rows(rng, 7, 5);
  const std::vector<int> y = {0, 1, 0, 1, 1, 0, 0};
  Matrix zp(7, 5);
  const std::vector<int> perm = {3, 6, 0, 5, 1, 4, 2};
  std::vector<int> yp;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    zp.row(static_cast<Eigen::Index>(i)) = z.row(perm[i]);
    yp.push_back(y[static_cast<std::size_t>(perm[i])]);
  }
  adn::Tape t;
  REQUIRE(value_of(scl_loss(t, t.constant(z), y, 1e-2)) ==
          Catch::Approx(value_of(scl_loss(t, t.constant(zp), yp, 1e-2)))
              .epsilon(1e-10));
}

TEST_CASE("SCL stays finite for aligned rows at tau=1e-2", "[losses]") {
  // Nearly identical unit rows: similarities ~1/tau = 100 in the exponent.
  Rng rng(71);
  Matrix z(4, 3);
  for (Eigen::Index i = 0; i < 4; ++i) {
    Eigen::RowVectorXd v(3);
    v << 1.0, 1e-4 * rng.normal(), 1e-4 * rng.normal();
    z.row(i) = v / v.norm();
  }
  adn::Tape t;
  const double loss =
      value_of(scl_loss(t, t.constant(z), {0, 0, 1, 1}, 1e-2));
  REQUIRE(std::isfinite(loss));
}

TEST_CASE("SCL gradients match finite differences", "[losses][grad]") {
  const std::vector<int> y = {0, 0, 1, 1, 0};
  for (std::uint64_t seed = 80; seed < 85; ++seed) {
    Rng rng(seed);
    const Matrix raw = random_matrix(rng, 5, 6);
    auto fn = [&y](adn::Tape& t, const std::vector<adn::Node*>& in) {
      return scl_loss(t, adn::l2_normalize_rows(t, in[0]), y, 0.05);
    };
    REQUIRE(max_gradcheck_error(fn, {raw}) < kGradTol);
  }
}

// ---------------------------------------------------------------------------
// MK-MMD
// ---------------------------------------------------------------------------

TEST_CASE("MMD of identical multisets is zero", "[losses]") {
  Rng rng(90);
  const Matrix x = random_matrix(rng, 6, 5);
  Matrix y = x;
  y.row(0).swap(y.row(4));  // same multiset, different order
  adn::Tape t;
  const LossConfig cfg;
  const auto sigma2 = mmd_bandwidths((Matrix(12, 5) << x, y).finished(), cfg);
  const double d2 = value_of(
      mk_mmd(t, t.constant(x), t.constant(y), sigma2, cfg.mmd_weights));
  REQUIRE(std::abs(d2) < 1e-10);
}

TEST_CASE("MMD singleton closed form", "[losses][oracle]") {
  // ||x - y||^2 = 2 sigma^2 with one kernel: d^2 = 2 - 2/e.
  Matrix x(1, 2), y(1, 2);
  x << 0.0, 0.0;
  y << 2.0, 0.0;  // squared distance 4
  adn::Tape t;
  const double d2 = value_of(mk_mmd(t, t.constant(x), t.constant(y),
                                    {2.0},  // sigma^2 = 2, so d^2 = 2 sigma^2
                                    {1.0}));
  REQUIRE(d2 ==
          Catch::Approx(2.0 - 2.0 * std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("MMD matches the three-loop oracle", "[losses][oracle]") {
  const LossConfig cfg;
  for (std::uint64_t seed = 91; seed < 97; ++seed) {
    Rng rng(seed);
    const Matrix x = random_matrix(rng, 7, 6);
    const Matrix y = random_matrix(rng, 5, 6, 1.3);
    Matrix pooled(12, 6);
    pooled << x, y;
    const auto sigma2 = mmd_bandwidths(pooled, cfg);
    adn::Tape t;
    const double got = value_of(
        mk_mmd(t, t.constant(x), t.constant(y), sigma2, cfg.mmd_weights));
    REQUIRE(got == Catch::Approx(mmd_oracle(x, y, sigma2, cfg.mmd_weights))
                       .margin(1e-10));
    REQUIRE(got > -1e-10);  // biased estimator non-negativity
  }
}

TEST_CASE("MMD grows with translation under fixed bandwidths", "[losses]") {
  Rng rng(98);
  const Matrix x = random_matrix(rng, 8, 4);
  const Matrix base = random_matrix(rng, 8, 4);
  const std::vector<double> sigma2 = {1.0, 2.0, 4.0};
  const std::vector<double> beta = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  double prev = -1.0;
  for (const double shift : {0.0, 0.5, 1.0, 2.0}) {
    Matrix y = base;
    y.col(0).array() += shift;
    adn::Tape t;
    const double d2 =
        value_of(mk_mmd(t, t.constant(x), t.constant(y), sigma2, beta));
    REQUIRE(d2 > prev);
    prev = d2;
  }
}

TEST_CASE("median heuristic handles odd, even, and degenerate counts",
          "[losses]") {
  Matrix three(3, 1);
  three << 0.0, 1.0, 3.0;  // pair distances^2: 1, 9, 4 -> median 4
  REQUIRE(median_sq_distance(three) == Catch::Approx(4.0));

  Matrix four(4, 1);
  four << 0.0, 1.0, 3.0, 7.0;
  // pairs^2: 1, 9, 49, 4, 36, 16 -> sorted 1,4,9,16,36,49 -> (9+16)/2
  REQUIRE(median_sq_distance(four) == Catch::Approx(12.5));

  REQUIRE(median_sq_distance(Matrix::Ones(5, 3)) == 1e-12);  // floor
  REQUIRE(median_sq_distance(Matrix::Ones(1, 3)) == 1e-12);  // no pairs

  const LossConfig cfg;
  const auto sigma2 = mmd_bandwidths(four, cfg);
  REQUIRE(sigma2.size() == 5);
  REQUIRE(sigma2[2] == Catch::Approx(12.5));
  REQUIRE(sigma2[0] == Catch::Approx(0.25 * 12.5));
}

TEST_CASE("MMD gradients match finite differences", "[losses][grad]") {
  const std::vector<double> sigma2 = {0.5, 1.0, 2.0};
  const std::vector<double> beta = {0.5, 0.25, 0.25};
  for (std::uint64_t seed = 110; seed < 115; ++seed) {
    Rng rng(seed);
    const Matrix x = random_matrix(rng, 4, 3);
    const Matrix y = random_matrix(rng, 5, 3);
    auto fn = [&](adn::Tape& t, const std::vector<adn::Node*>& in) {
      return mk_mmd(t, in[0], in[1], sigma2, beta);
    };
    REQUIRE(max_gradcheck_error(fn, {x, y}) < kGradTol);
  }
}

// ---------------------------------------------------------------------------
// Composites
// ---------------------------------------------------------------------------

TEST_CASE("alignment and total loss arithmetic", "[losses]") {
  adn::Tape t;
  REQUIRE(value_of(align_loss(t, t.scalar(0.0), t.scalar(0.0), 0.1)) == 0.0);
  REQUIRE(value_of(align_loss(t, t.scalar(1.0), t.scalar(2.0), 0.1)) ==
          Catch::Approx(1.2).epsilon(1e-12));
  REQUIRE(value_of(align_loss(t, t.scalar(0.7), t.scalar(5.0), 0.0)) ==
          Catch::Approx(0.7).epsilon(1e-12));

  REQUIRE(value_of(total_loss(t, t.scalar(0.5), t.scalar(0.7), t.scalar(1.2),
                              t.scalar(std::log(2.0)))) ==
          Catch::Approx(0.5 + 0.7 + 1.2 + std::log(2.0)).epsilon(1e-12));
  // Disabled terms drop out exactly.
  REQUIRE(value_of(total_loss(t, t.scalar(0.5), t.scalar(0.7), t.scalar(1.2),
                              nullptr)) ==
          Catch::Approx(2.4).epsilon(1e-12));
  REQUIRE(value_of(total_loss(t, nullptr, nullptr, nullptr, nullptr)) == 0.0);
}

TEST_CASE("loss config validation and serialization", "[losses]") {
  LossConfig cfg;
  REQUIRE_NOTHROW(cfg.validate());
  REQUIRE(LossConfig::from_json(cfg.to_json()).to_json() == cfg.to_json());

  LossConfig bad = cfg;
  bad.mmd_weights = {0.5, 0.5, 0.5, 0.5, 0.5};
  REQUIRE_THROWS_WITH(bad.validate(),
                      Catch::Matchers::ContainsSubstring("sum to 1"));
  bad = cfg;
  bad.tau_s = 0.0;
  REQUIRE_THROWS(bad.validate());
  bad = cfg;
  bad.mmd_multipliers.pop_back();
  REQUIRE_THROWS(bad.validate());
}

TEST_CASE("combined objective gradcheck through all loss terms",
          "[losses][grad]") {
  // One tape mixing every loss, differentiated w.r.t. shared feature
  // matrices: the integration-level version of the per-loss checks.
  const std::vector<int> ys = {0, 1, 0, 1};
  const std::vector<int> dom = {0, 0, 0, 0, 1, 1, 1, 1};
  const std::vector<int> pseudo = {1, 0, 1, 0};
  const std::vector<double> sigma2 = {1.0, 2.0};
  const std::vector<double> beta = {0.5, 0.5};
  for (std::uint64_t seed = 120; seed < 125; ++seed) {
    Rng rng(seed);
    const Matrix Es = random_matrix(rng, 4, 6);
    const Matrix Et = random_matrix(rng, 4, 6);
    const Matrix Cs = random_matrix(rng, 4, 6);
    const Matrix Ct = random_matrix(rng, 4, 6);
    auto fn = [&](adn::Tape& t, const std::vector<adn::Node*>& in) {
      adn::Node* Es_n = in[0];
      adn::Node* Et_n = in[1];
      adn::Node* Cs_n = in[2];
      adn::Node* Ct_n = in[3];
      adn::Node* ce = emotion_ce_logits(t, Es_n, {0, 1, 0, 1});
      adn::Node* cc = corpus_ce_logits(
          t, adn::row_sum(t, adn::concat_rows(t, Cs_n, Ct_n)), dom);
      const PrototypeSet p = compute_prototypes(
          t, adn::l2_normalize_rows(t, Es_n), adn::l2_normalize_rows(t, Cs_n),
          adn::l2_normalize_rows(t, Et_n), adn::l2_normalize_rows(t, Ct_n));
      adn::Node* dec = decouple_loss(t, p, 0.05);
      std::vector<int> scl_labels = ys;
      scl_labels.insert(scl_labels.end(), pseudo.begin(), pseudo.end());
      adn::Node* scl = scl_loss(
          t,
          adn::l2_normalize_rows(t, adn::concat_rows(t, Es_n, Et_n)),
          scl_labels, 0.05);
      adn::Node* d2 = mk_mmd(t, Es_n, Et_n, sigma2, beta);
      return total_loss(t, ce, cc, align_loss(t, d2, scl, 0.1), dec);
    };
    REQUIRE(max_gradcheck_error(fn, {Es, Et, Cs, Ct}) < kGradTol);
  }
}
