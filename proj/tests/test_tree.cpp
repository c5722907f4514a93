#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "policylearn/errors.hpp"
#include "policylearn/tree.hpp"

using namespace policylearn;

namespace {

std::vector<int> tree_predictions(const DecisionTree& tree, const Matrix& features) {
  std::vector<int> out(features.rows());
  for (std::size_t i = 0; i < features.rows(); ++i)
    out[i] = predict(tree, features.row(i)).modal;
  return out;
}

// Depth-2 axis-aligned ground truth: class = 1 + (v1>0) + 2*(v2>0).
struct Depth2Data {
  Matrix features;
  std::vector<int> labels;
};

Depth2Data depth2_rule(std::size_t n, std::uint64_t seed, double surrogate_noise = 0.1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, surrogate_noise);
  Depth2Data d;
  d.features = Matrix(n, 4);
  d.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v1 = unif(rng);
    const double v2 = unif(rng);
    d.features(i, 0) = v1;
    d.features(i, 1) = v2;
    d.features(i, 2) = v1 + noise(rng);  // surrogate for v1
    d.features(i, 3) = v2 + noise(rng);  // surrogate for v2
    d.labels[i] = 1 + (v1 > 0.0 ? 1 : 0) + (v2 > 0.0 ? 2 : 0);
  }
  return d;
}

}  // namespace

TEST_CASE("single separable feature: one split, zero training error") {
  Matrix x(40, 1);
  std::vector<int> labels(40);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (std::size_t i = 0; i < 40; ++i) {
    x(i, 0) = unif(rng);
    labels[i] = x(i, 0) > 0.0 ? 2 : 1;
  }
  const DecisionTree tree = fit_tree(x, labels, 3, 2, 1e-4);
  CHECK(tree.n_leaves() == 2);
  CHECK(std::abs(tree.nodes[0].threshold) < 0.2);
  CHECK(misclassification_rate(tree_predictions(tree, x), labels) == doctest::Approx(0.0));
}

TEST_CASE("pure-noise labels with a large cp collapse to one leaf") {
  std::mt19937_64 rng(5);
  Matrix x(200, 3);
  std::vector<int> labels(200);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t i = 0; i < 200; ++i) {
    for (std::size_t j = 0; j < 3; ++j) x(i, j) = unif(rng);
    labels[i] = 1 + static_cast<int>(rng() % 3);
  }
  const DecisionTree tree = fit_tree(x, labels, 6, 5, 0.1);
  CHECK(tree.n_leaves() == 1);
  // Leaf posterior equals class frequencies.
  std::vector<std::size_t> counts(3, 0);
  for (int l : labels) ++counts[static_cast<std::size_t>(l - 1)];
  for (std::size_t c = 0; c < 3; ++c)
    CHECK(tree.nodes[0].posterior[c] ==
          doctest::Approx(static_cast<double>(counts[c]) / 200.0).epsilon(1e-12));
}

TEST_CASE("all labels identical yields a valid single-leaf tree") {
  Matrix x(10, 2, 0.5);
  const DecisionTree tree = fit_tree(x, std::vector<int>(10, 1), 4, 2, 1e-3);
  CHECK(tree.n_leaves() == 1);
  CHECK(tree.nodes[0].modal == 1);
}

TEST_CASE("depth-2 rule is learned exactly on complete data") {
  const Depth2Data d = depth2_rule(400, 17);
  const DecisionTree tree = fit_tree(d.features, d.labels, 2, 5, 1e-4);
  CHECK(misclassification_rate(tree_predictions(tree, d.features), d.labels) ==
        doctest::Approx(0.0));
  CHECK(tree.depth() <= 2);
}

TEST_CASE("training misclassification is non-increasing in max_depth") {
  const Depth2Data d = depth2_rule(300, 23, 0.4);
  double prev = 1.0;
  for (int depth = 0; depth <= 5; ++depth) {
    const DecisionTree tree = fit_tree(d.features, d.labels, depth, 2, 1e-5);
    const double mis = misclassification_rate(tree_predictions(tree, d.features), d.labels);
    CHECK(mis <= prev + 1e-12);
    prev = mis;
  }
}

TEST_CASE("leaf posteriors equal routed class frequencies exactly") {
  const Depth2Data d = depth2_rule(120, 29);
  const DecisionTree tree = fit_tree(d.features, d.labels, 2, 5, 1e-4);
  // Route every training row; per leaf, recount classes.
  std::vector<std::vector<std::size_t>> counts(tree.nodes.size(),
                                               std::vector<std::size_t>(4, 0));
  std::vector<std::size_t> totals(tree.nodes.size(), 0);
  for (std::size_t i = 0; i < 120; ++i) {
    const TreePrediction p = predict(tree, d.features.row(i));
    for (std::size_t nidx = 0; nidx < tree.nodes.size(); ++nidx) {
      if (tree.nodes[nidx].is_leaf && tree.nodes[nidx].leaf_id == p.leaf_id) {
        ++counts[nidx][static_cast<std::size_t>(d.labels[i] - 1)];
        ++totals[nidx];
      }
    }
  }
  for (std::size_t nidx = 0; nidx < tree.nodes.size(); ++nidx) {
    const TreeNode& nd = tree.nodes[nidx];
    if (!nd.is_leaf) continue;
    REQUIRE(totals[nidx] == nd.n);
    for (std::size_t c = 0; c < 4; ++c) {
      CHECK(nd.class_counts[c] == counts[nidx][c]);
      CHECK(nd.posterior[c] ==
            doctest::Approx(static_cast<double>(counts[nidx][c]) / static_cast<double>(nd.n))
                .epsilon(1e-15));
    }
  }
}

TEST_CASE("surrogate routing: primary missing uses the correlated backup") {
  const Depth2Data d = depth2_rule(500, 31);
  const DecisionTree tree = fit_tree(d.features, d.labels, 2, 5, 1e-4);

  // The root splits on v1 or v2; its top surrogate must be the matching
  // correlated feature (index + 2).
  const TreeNode& root = tree.nodes[0];
  REQUIRE_FALSE(root.is_leaf);
  REQUIRE_FALSE(root.surrogates.empty());
  CHECK(root.surrogates[0].feature == root.feature + 2);
  CHECK(root.surrogates[0].agreement > 0.9);

  // A vector observed only on the surrogates still routes consistently.
  Vector v(4, missing_value());
  v[2] = 0.8;   // says v1 > 0
  v[3] = -0.6;  // says v2 < 0
  const TreePrediction p = predict(tree, v);
  CHECK(p.modal == 2);  // 1 + (v1>0) + 2*(v2>0) = 2
}

TEST_CASE("all features missing routes along majority directions to some leaf") {
  const Depth2Data d = depth2_rule(200, 37);
  const DecisionTree tree = fit_tree(d.features, d.labels, 2, 5, 1e-4);
  const TreePrediction p = predict(tree, Vector(4, missing_value()));
  CHECK(p.leaf_id >= 1);
  CHECK(p.modal >= 1);
  CHECK(p.modal <= 4);
}

TEST_CASE("30% MCAR on split features keeps misclassification under 10%") {
  Depth2Data d = depth2_rule(600, 41);
  std::mt19937_64 rng(43);
  std::bernoulli_distribution miss(0.3);
  for (std::size_t i = 0; i < 600; ++i) {
    if (miss(rng)) d.features(i, 0) = missing_value();
    if (miss(rng)) d.features(i, 1) = missing_value();
  }
  const DecisionTree tree = fit_tree(d.features, d.labels, 2, 5, 1e-4);
  const double mis = misclassification_rate(tree_predictions(tree, d.features), d.labels);
  CHECK(mis <= 0.10);
}

TEST_CASE("surrogate agreement beats the majority-direction baseline") {
  const Depth2Data d = depth2_rule(400, 47, 0.5);
  const DecisionTree tree = fit_tree(d.features, d.labels, 3, 5, 1e-4);
  for (const auto& nd : tree.nodes) {
    if (nd.is_leaf) continue;
    const double baseline =
        static_cast<double>(std::max(nd.class_counts.size(), std::size_t{0}));
    (void)baseline;
    for (const auto& s : nd.surrogates) {
      // Baseline agreement is at least 1/2 by construction.
      CHECK(s.agreement > 0.5);
    }
  }
}

TEST_CASE("select_cp: separable two-class data returns a large cp") {
  Matrix x(60, 1);
  std::vector<int> labels(60);
  for (std::size_t i = 0; i < 60; ++i) {
    x(i, 0) = i < 30 ? -1.0 - static_cast<double>(i) * 0.01 : 1.0 + static_cast<double>(i) * 0.01;
    labels[i] = i < 30 ? 1 : 2;
  }
  const double cp = select_cp(x, labels, 4, 2);
  CHECK(cp == doctest::Approx(0.1));  // largest grid value already works

  // Single class: the largest grid value suffices too.
  const double cp1 = select_cp(x, std::vector<int>(60, 1), 4, 2);
  CHECK(cp1 == doctest::Approx(0.1));
}

TEST_CASE("select_cp on 5-class synthetic keeps every class modal") {
  std::mt19937_64 rng(53);
  std::normal_distribution<double> normal(0.0, 0.3);
  const std::vector<double> shares{0.10, 0.55, 0.20, 0.11, 0.04};
  Matrix x(1000, 2);
  std::vector<int> labels(1000);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t i = 0; i < 1000; ++i) {
    double u = unif(rng);
    int cls = 1;
    double acc = 0.0;
    for (std::size_t g = 0; g < 5; ++g) {
      acc += shares[g];
      if (u < acc) {
        cls = static_cast<int>(g) + 1;
        break;
      }
    }
    labels[i] = cls;
    x(i, 0) = static_cast<double>(cls) + normal(rng);
    x(i, 1) = normal(rng);
  }
  const double cp = select_cp(x, labels, 8, 5);
  const DecisionTree tree = fit_tree(x, labels, 8, 5, cp);
  CHECK(tree.n_leaves() >= 5);
  for (int cls = 1; cls <= 5; ++cls) CHECK(tree.class_is_modal_somewhere(cls));
}

TEST_CASE("misclassification_rate basics") {
  CHECK(misclassification_rate({1, 2, 3}, {1, 2, 3}) == doctest::Approx(0.0));
  CHECK(misclassification_rate({1, 1, 1, 1, 2, 2, 2, 2, 2, 2},
                               {1, 1, 1, 1, 1, 1, 1, 1, 2, 2}) == doctest::Approx(0.4));
  CHECK_THROWS_AS(misclassification_rate({1, 2}, {1}), ValidationError);
}

TEST_CASE("rank_features puts the informative features first") {
  const Depth2Data d = depth2_rule(500, 59, 0.8);
  const auto order = rank_features(d.features, d.labels, 4, 5, 1e-4);
  // v1 and v2 carry the rule; they must outrank their noisy copies.
  CHECK(((order[0] == 0 && order[1] == 1) || (order[0] == 1 && order[1] == 0)));
}

TEST_CASE("tree JSON and text rendering round trip") {
  const Depth2Data d = depth2_rule(200, 61);
  const DecisionTree tree = fit_tree(d.features, d.labels, 2, 5, 1e-4);
  const DecisionTree back = tree_from_json(tree_to_json(tree, "cfg=y"));
  CHECK(back.n_classes == tree.n_classes);
  CHECK(back.n_leaves() == tree.n_leaves());
  for (std::size_t i = 0; i < 200; ++i) {
    const TreePrediction a = predict(tree, d.features.row(i));
    const TreePrediction b = predict(back, d.features.row(i));
    CHECK(a.leaf_id == b.leaf_id);
    CHECK(a.modal == b.modal);
  }
  const std::string text = render_tree(tree, {"age", "income", "age2", "income2"});
  CHECK(text.find("split") != std::string::npos);
  CHECK(text.find("leaf #") != std::string::npos);
  CHECK(render_tree(tree) == render_tree(tree));  // stable for snapshots
}

TEST_CASE("empty input is rejected") {
  CHECK_THROWS_AS(fit_tree(Matrix(0, 2), {}, 3, 2, 0.01), ValidationError);
}
