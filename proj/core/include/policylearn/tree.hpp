#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "policylearn/matrix.hpp"

namespace policylearn {

struct SurrogateSplit {
  std::size_t feature = 0;
  double threshold = 0.0;
  bool swap = false;       // true: value <= threshold routes right
  double agreement = 0.0;  // fraction agreeing with the primary split
};

struct TreeNode {
  bool is_leaf = true;
  std::size_t n = 0;                     // routed training observations
  std::vector<std::size_t> class_counts; // over {1..S}

  // internal nodes
  std::size_t feature = 0;
  double threshold = 0.0;
  std::vector<SurrogateSplit> surrogates;  // ranked by agreement
  bool default_left = true;                // majority direction
  int left = -1;
  int right = -1;

  // leaves
  int leaf_id = -1;
  Vector posterior;  // class frequencies of routed observations
  int modal = 0;
};

struct TreePrediction {
  int leaf_id = 0;
  int modal = 0;
  Vector posterior;
};

// CART-style classification tree with Gini splits, surrogate rules for
// missing values, and per-leaf class posteriors.
struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  int n_classes = 0;
  int max_depth = 0;
  std::size_t min_leaf = 0;
  double cp = 0.0;

  std::size_t n_leaves() const;
  int depth() const;
  bool class_is_modal_somewhere(int cls) const;
};

DecisionTree fit_tree(const Matrix& features, const std::vector<int>& labels, int max_depth,
                      std::size_t min_leaf, double cp, int n_classes = 0);

// Largest cp on the deterministic grid 10^{-1}..10^{-6} (61 log-spaced
// points, scanned from the largest) whose tree keeps every class modal in at
// least one leaf. Throws ValidationError naming the classes that stay
// unrepresented even at the smallest grid value.
double select_cp(const Matrix& features, const std::vector<int>& labels, int max_depth,
                 std::size_t min_leaf, int n_classes = 0);

TreePrediction predict(const DecisionTree& tree, const Vector& v);

double misclassification_rate(const std::vector<int>& predicted, const std::vector<int>& reference);

// Features ordered by total Gini impurity decrease in a pilot tree; a greedy
// stand-in for the exhaustive subset search over candidate feature sets.
std::vector<std::size_t> rank_features(const Matrix& features, const std::vector<int>& labels,
                                       int max_depth, std::size_t min_leaf, double cp,
                                       int n_classes = 0);

std::string tree_to_json(const DecisionTree& tree, const std::string& provenance = "");
DecisionTree tree_from_json(const std::string& text);
std::string render_tree(const DecisionTree& tree,
                        const std::vector<std::string>& feature_names = {});

}  // namespace policylearn
