#include "policylearn/tree.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"
#include "policylearn/errors.hpp"

namespace policylearn {

namespace {

// n * Gini(counts) = n - sum(c^2)/n; additive over disjoint sets.
double gini_sum(const std::vector<std::size_t>& counts, std::size_t n) {
  if (n == 0) return 0.0;
  double sq = 0.0;
  for (std::size_t c : counts) sq += static_cast<double>(c) * static_cast<double>(c);
  return static_cast<double>(n) - sq / static_cast<double>(n);
}

struct CandidateSplit {
  bool found = false;
  std::size_t feature = 0;
  double threshold = 0.0;
  double decrease = 0.0;  // over rows observed on the feature
};

struct Builder {
  const Matrix& x;
  const std::vector<int>& labels;  // 1-based
  int n_classes;
  int max_depth;
  std::size_t min_leaf;
  double cp_threshold;  // cp * root impurity, in gini_sum units
  DecisionTree* tree;
  int next_leaf_id = 1;

  std::vector<std::size_t> count_classes(const std::vector<std::size_t>& rows) const {
    std::vector<std::size_t> counts(static_cast<std::size_t>(n_classes), 0);
    for (std::size_t i : rows) ++counts[static_cast<std::size_t>(labels[i] - 1)];
    return counts;
  }

  CandidateSplit best_primary(const std::vector<std::size_t>& rows) const {
    CandidateSplit best;
    std::vector<std::pair<double, int>> vals;
    for (std::size_t f = 0; f < x.cols(); ++f) {
      vals.clear();
      for (std::size_t i : rows) {
        const double v = x(i, f);
        if (!is_missing(v)) vals.emplace_back(v, labels[i]);
      }
      if (vals.size() < 2) continue;
      std::sort(vals.begin(), vals.end());

      std::vector<std::size_t> left(static_cast<std::size_t>(n_classes), 0);
      std::vector<std::size_t> right(static_cast<std::size_t>(n_classes), 0);
      for (const auto& vc : vals) ++right[static_cast<std::size_t>(vc.second - 1)];
      const double total = gini_sum(right, vals.size());

      for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
        const auto cls = static_cast<std::size_t>(vals[k].second - 1);
        ++left[cls];
        --right[cls];
        if (vals[k].first == vals[k + 1].first) continue;  // not a boundary
        const double thr = vals[k].first + 0.5 * (vals[k + 1].first - vals[k].first);
        const double dec =
            total - gini_sum(left, k + 1) - gini_sum(right, vals.size() - k - 1);
        if (!best.found || dec > best.decrease ||
            (dec == best.decrease &&
             (f < best.feature || (f == best.feature && thr < best.threshold)))) {
          best.found = true;
          best.feature = f;
          best.threshold = thr;
          best.decrease = dec;
        }
      }
    }
    return best;
  }

  std::vector<SurrogateSplit> find_surrogates(const std::vector<std::size_t>& rows,
                                              std::size_t primary_f, double primary_t) const {
    std::vector<SurrogateSplit> out;
    std::vector<std::pair<double, bool>> vals;  // (surrogate value, primary goes left)
    for (std::size_t f = 0; f < x.cols(); ++f) {
      if (f == primary_f) continue;
      vals.clear();
      for (std::size_t i : rows) {
        const double pv = x(i, primary_f);
        const double sv = x(i, f);
        if (is_missing(pv) || is_missing(sv)) continue;
        vals.emplace_back(sv, pv <= primary_t);
      }
      if (vals.size() < 2) continue;
      std::sort(vals.begin(), vals.end());
      const std::size_t n_both = vals.size();
      std::size_t total_left = 0;
      for (const auto& vb : vals) total_left += vb.second ? 1 : 0;
      const std::size_t baseline = std::max(total_left, n_both - total_left);

      std::size_t left_and_left = 0;  // primary-left rows with value <= t
      std::size_t seen = 0;
      std::size_t best_match = 0;
      double best_thr = 0.0;
      bool best_swap = false;
      bool have = false;
      for (std::size_t k = 0; k + 1 < n_both; ++k) {
        ++seen;
        if (vals[k].second) ++left_and_left;
        if (vals[k].first == vals[k + 1].first) continue;
        const double thr = vals[k].first + 0.5 * (vals[k + 1].first - vals[k].first);
        // no swap: <=t goes left
        const std::size_t match_noswap = left_and_left + ((n_both - total_left) - (seen - left_and_left));
        const std::size_t match_swap = n_both - match_noswap;
        const std::size_t m = std::max(match_noswap, match_swap);
        const bool swap = match_swap > match_noswap;
        if (!have || m > best_match) {
          have = true;
          best_match = m;
          best_thr = thr;
          best_swap = swap;
        }
      }
      if (have && best_match > baseline) {
        SurrogateSplit s;
        s.feature = f;
        s.threshold = best_thr;
        s.swap = best_swap;
        s.agreement = static_cast<double>(best_match) / static_cast<double>(n_both);
        out.push_back(s);
      }
    }
    std::stable_sort(out.begin(), out.end(), [](const SurrogateSplit& a, const SurrogateSplit& b) {
      if (a.agreement != b.agreement) return a.agreement > b.agreement;
      return a.feature < b.feature;
    });
    return out;
  }

  // Routes a row to true=left / false=right via primary, then surrogates,
  // then the majority direction.
  static bool route_left(double primary_v, double primary_t,
                         const std::vector<SurrogateSplit>& surrogates, bool default_left,
                         const Matrix& x, std::size_t i) {
    if (!is_missing(primary_v)) return primary_v <= primary_t;
    for (const auto& s : surrogates) {
      const double sv = x(i, s.feature);
      if (is_missing(sv)) continue;
      const bool le = sv <= s.threshold;
      return s.swap ? !le : le;
    }
    return default_left;
  }

  int build(const std::vector<std::size_t>& rows, int depth) {
    TreeNode node;
    node.n = rows.size();
    node.class_counts = count_classes(rows);
    const double node_impurity = gini_sum(node.class_counts, rows.size());

    const auto make_leaf = [&](TreeNode&& nd) {
      nd.is_leaf = true;
      nd.leaf_id = next_leaf_id++;
      nd.posterior.assign(static_cast<std::size_t>(n_classes), 0.0);
      for (std::size_t c = 0; c < nd.class_counts.size(); ++c)
        nd.posterior[c] = static_cast<double>(nd.class_counts[c]) / static_cast<double>(nd.n);
      nd.modal = 1;
      for (std::size_t c = 1; c < nd.class_counts.size(); ++c)
        if (nd.class_counts[c] > nd.class_counts[static_cast<std::size_t>(nd.modal - 1)])
          nd.modal = static_cast<int>(c) + 1;
      tree->nodes.push_back(std::move(nd));
      return static_cast<int>(tree->nodes.size()) - 1;
    };

    if (depth >= max_depth || rows.size() < 2 * min_leaf || node_impurity == 0.0)
      return make_leaf(std::move(node));

    const CandidateSplit cand = best_primary(rows);
    if (!cand.found || cand.decrease <= 0.0) return make_leaf(std::move(node));

    std::vector<SurrogateSplit> surrogates = find_surrogates(rows, cand.feature, cand.threshold);

    // Majority direction among rows routed by the primary split.
    std::size_t n_left_primary = 0, n_primary = 0;
    for (std::size_t i : rows) {
      const double v = x(i, cand.feature);
      if (is_missing(v)) continue;
      ++n_primary;
      if (v <= cand.threshold) ++n_left_primary;
    }
    const bool default_left = n_left_primary >= n_primary - n_left_primary;

    std::vector<std::size_t> left_rows, right_rows;
    for (std::size_t i : rows) {
      if (route_left(x(i, cand.feature), cand.threshold, surrogates, default_left, x, i))
        left_rows.push_back(i);
      else
        right_rows.push_back(i);
    }
    if (left_rows.size() < min_leaf || right_rows.size() < min_leaf)
      return make_leaf(std::move(node));

    // Acceptance uses the post-routing children.
    const double routed_decrease = node_impurity -
                                   gini_sum(count_classes(left_rows), left_rows.size()) -
                                   gini_sum(count_classes(right_rows), right_rows.size());
    if (routed_decrease < cp_threshold) return make_leaf(std::move(node));

    node.is_leaf = false;
    node.feature = cand.feature;
    node.threshold = cand.threshold;
    node.surrogates = std::move(surrogates);
    node.default_left = default_left;
    tree->nodes.push_back(std::move(node));
    const int self = static_cast<int>(tree->nodes.size()) - 1;
    const int li = build(left_rows, depth + 1);
    tree->nodes[static_cast<std::size_t>(self)].left = li;
    const int ri = build(right_rows, depth + 1);
    tree->nodes[static_cast<std::size_t>(self)].right = ri;
    return self;
  }
};

void renumber_leaves(DecisionTree& tree) {
  int next = 1;
  std::function<void(int)> walk = [&](int idx) {
    TreeNode& nd = tree.nodes[static_cast<std::size_t>(idx)];
    if (nd.is_leaf) {
      nd.leaf_id = next++;
      return;
    }
    walk(nd.left);
    walk(nd.right);
  };
  if (!tree.nodes.empty()) walk(0);
}

// Weakest-link cost-complexity pruning on impurity sums, collapsing any
// internal node whose per-leaf impurity gain falls below the cp threshold.
void prune(DecisionTree& tree, double threshold) {
  bool changed = true;
  while (changed) {
    changed = false;
    double worst_gain = std::numeric_limits<double>::infinity();
    int worst = -1;
    std::function<std::pair<double, std::size_t>(int)> walk =
        [&](int idx) -> std::pair<double, std::size_t> {
      TreeNode& nd = tree.nodes[static_cast<std::size_t>(idx)];
      if (nd.is_leaf) return {gini_sum(nd.class_counts, nd.n), 1};
      const auto l = walk(nd.left);
      const auto r = walk(nd.right);
      const double subtree_imp = l.first + r.first;
      const std::size_t leaves = l.second + r.second;
      const double node_imp = gini_sum(nd.class_counts, nd.n);
      const double gain = (node_imp - subtree_imp) / static_cast<double>(leaves - 1);
      if (gain < worst_gain) {
        worst_gain = gain;
        worst = idx;
      }
      return {subtree_imp, leaves};
    };
    if (tree.nodes.empty() || tree.nodes[0].is_leaf) return;
    walk(0);
    if (worst >= 0 && worst_gain < threshold) {
      TreeNode& nd = tree.nodes[static_cast<std::size_t>(worst)];
      nd.is_leaf = true;
      nd.left = nd.right = -1;
      nd.surrogates.clear();
      nd.posterior.assign(nd.class_counts.size(), 0.0);
      for (std::size_t c = 0; c < nd.class_counts.size(); ++c)
        nd.posterior[c] = static_cast<double>(nd.class_counts[c]) / static_cast<double>(nd.n);
      nd.modal = 1;
      for (std::size_t c = 1; c < nd.class_counts.size(); ++c)
        if (nd.class_counts[c] > nd.class_counts[static_cast<std::size_t>(nd.modal - 1)])
          nd.modal = static_cast<int>(c) + 1;
      changed = true;
    }
  }
  renumber_leaves(tree);
}

}  // namespace

std::size_t DecisionTree::n_leaves() const {
  std::size_t n = 0;
  for (const auto& nd : nodes) n += nd.is_leaf ? 1 : 0;
  return n;
}

int DecisionTree::depth() const {
  std::function<int(int)> walk = [&](int idx) -> int {
    const TreeNode& nd = nodes[static_cast<std::size_t>(idx)];
    if (nd.is_leaf) return 0;
    return 1 + std::max(walk(nd.left), walk(nd.right));
  };
  return nodes.empty() ? 0 : walk(0);
}

bool DecisionTree::class_is_modal_somewhere(int cls) const {
  for (const auto& nd : nodes)
    if (nd.is_leaf && nd.modal == cls) return true;
  return false;
}

DecisionTree fit_tree(const Matrix& features, const std::vector<int>& labels, int max_depth,
                      std::size_t min_leaf, double cp, int n_classes) {
  const std::size_t n = features.rows();
  if (n == 0 || features.cols() == 0) throw ValidationError("fit_tree: empty input");
  if (labels.size() != n) throw ValidationError("fit_tree: labels length != rows");
  if (max_depth < 0) throw ValidationError("fit_tree: max_depth must be >= 0");
  if (min_leaf < 1) throw ValidationError("fit_tree: min_leaf must be >= 1");
  int max_label = 0;
  for (int l : labels) {
    if (l < 1) throw ValidationError("fit_tree: labels must lie in {1..S}");
    max_label = std::max(max_label, l);
  }
  if (n_classes <= 0) n_classes = max_label;
  if (max_label > n_classes) throw ValidationError("fit_tree: label exceeds n_classes");

  DecisionTree tree;
  tree.n_classes = n_classes;
  tree.max_depth = max_depth;
  tree.min_leaf = min_leaf;
  tree.cp = cp;

  std::vector<std::size_t> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = i;
  std::vector<std::size_t> root_counts(static_cast<std::size_t>(n_classes), 0);
  for (int l : labels) ++root_counts[static_cast<std::size_t>(l - 1)];
  const double root_impurity = gini_sum(root_counts, n);
  const double threshold = cp * root_impurity;

  Builder b{features, labels, n_classes, max_depth, min_leaf, threshold, &tree};
  b.build(rows, 0);
  prune(tree, threshold);
  return tree;
}

double select_cp(const Matrix& features, const std::vector<int>& labels, int max_depth,
                 std::size_t min_leaf, int n_classes) {
  if (n_classes <= 0)
    for (int l : labels) n_classes = std::max(n_classes, l);
  std::set<int> present(labels.begin(), labels.end());

  double last_cp = 0.0;
  DecisionTree last_tree;
  for (int k = 0; k <= 60; ++k) {
    const double cp = std::pow(10.0, -1.0 - static_cast<double>(k) / 12.0);
    DecisionTree tree = fit_tree(features, labels, max_depth, min_leaf, cp, n_classes);
    bool all_modal = true;
    for (int cls : present)
      if (!tree.class_is_modal_somewhere(cls)) all_modal = false;
    if (all_modal) return cp;
    last_cp = cp;
    last_tree = std::move(tree);
  }
  std::string missing;
  for (int cls : present)
    if (!last_tree.class_is_modal_somewhere(cls))
      missing += (missing.empty() ? "" : ", ") + std::to_string(cls);
  throw ValidationError("select_cp: no grid cp (down to " + std::to_string(last_cp) +
                        ") makes every class modal; missing classes: " + missing);
}

TreePrediction predict(const DecisionTree& tree, const Vector& v) {
  if (tree.nodes.empty()) throw ValidationError("predict: empty tree");
  int idx = 0;
  for (;;) {
    const TreeNode& nd = tree.nodes[static_cast<std::size_t>(idx)];
    if (nd.is_leaf) return TreePrediction{nd.leaf_id, nd.modal, nd.posterior};
    bool left;
    const double pv = nd.feature < v.size() ? v[nd.feature] : missing_value();
    if (!is_missing(pv)) {
      left = pv <= nd.threshold;
    } else {
      left = nd.default_left;
      for (const auto& s : nd.surrogates) {
        const double sv = s.feature < v.size() ? v[s.feature] : missing_value();
        if (is_missing(sv)) continue;
        const bool le = sv <= s.threshold;
        left = s.swap ? !le : le;
        break;
      }
    }
    idx = left ? nd.left : nd.right;
  }
}

double misclassification_rate(const std::vector<int>& predicted,
                              const std::vector<int>& reference) {
  if (predicted.size() != reference.size())
    throw ValidationError("misclassification_rate: length mismatch");
  if (predicted.empty()) throw ValidationError("misclassification_rate: empty input");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i)
    if (predicted[i] != reference[i]) ++wrong;
  return static_cast<double>(wrong) / static_cast<double>(predicted.size());
}

std::vector<std::size_t> rank_features(const Matrix& features, const std::vector<int>& labels,
                                       int max_depth, std::size_t min_leaf, double cp,
                                       int n_classes) {
  const DecisionTree pilot = fit_tree(features, labels, max_depth, min_leaf, cp, n_classes);
  Vector importance(features.cols(), 0.0);
  for (const auto& nd : pilot.nodes) {
    if (nd.is_leaf) continue;
    const double node_imp = gini_sum(nd.class_counts, nd.n);
    const TreeNode& l = pilot.nodes[static_cast<std::size_t>(nd.left)];
    const TreeNode& r = pilot.nodes[static_cast<std::size_t>(nd.right)];
    const double dec =
        node_imp - gini_sum(l.class_counts, l.n) - gini_sum(r.class_counts, r.n);
    importance[nd.feature] += std::max(dec, 0.0);
  }
  std::vector<std::size_t> order(features.cols());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return importance[a] > importance[b];
  });
  return order;
}

namespace {

nlohmann::json node_to_json(const DecisionTree& tree, int idx) {
  const TreeNode& nd = tree.nodes[static_cast<std::size_t>(idx)];
  nlohmann::json j;
  j["n"] = nd.n;
  if (nd.is_leaf) {
    j["type"] = "leaf";
    j["leaf_id"] = nd.leaf_id;
    j["modal"] = nd.modal;
    j["posterior"] = nd.posterior;
    j["class_counts"] = nd.class_counts;
    return j;
  }
  j["type"] = "split";
  j["feature"] = nd.feature;
  j["threshold"] = nd.threshold;
  j["default"] = nd.default_left ? "L" : "R";
  nlohmann::json surr = nlohmann::json::array();
  for (const auto& s : nd.surrogates)
    surr.push_back(nlohmann::json{{"feature", s.feature},
                                  {"threshold", s.threshold},
                                  {"swap", s.swap},
                                  {"agreement", s.agreement}});
  j["surrogates"] = std::move(surr);
  j["left"] = node_to_json(tree, nd.left);
  j["right"] = node_to_json(tree, nd.right);
  return j;
}

int node_from_json(const nlohmann::json& j, DecisionTree& tree) {
  TreeNode nd;
  nd.n = j.at("n").get<std::size_t>();
  if (j.at("type") == "leaf") {
    nd.is_leaf = true;
    nd.leaf_id = j.at("leaf_id").get<int>();
    nd.modal = j.at("modal").get<int>();
    nd.posterior = j.at("posterior").get<Vector>();
    nd.class_counts = j.at("class_counts").get<std::vector<std::size_t>>();
    tree.nodes.push_back(std::move(nd));
    return static_cast<int>(tree.nodes.size()) - 1;
  }
  nd.is_leaf = false;
  nd.feature = j.at("feature").get<std::size_t>();
  nd.threshold = j.at("threshold").get<double>();
  nd.default_left = j.at("default").get<std::string>() == "L";
  for (const auto& js : j.at("surrogates")) {
    SurrogateSplit s;
    s.feature = js.at("feature").get<std::size_t>();
    s.threshold = js.at("threshold").get<double>();
    s.swap = js.at("swap").get<bool>();
    s.agreement = js.at("agreement").get<double>();
    nd.surrogates.push_back(s);
  }
  tree.nodes.push_back(std::move(nd));
  const int self = static_cast<int>(tree.nodes.size()) - 1;
  const int li = node_from_json(j.at("left"), tree);
  tree.nodes[static_cast<std::size_t>(self)].left = li;
  const int ri = node_from_json(j.at("right"), tree);
  tree.nodes[static_cast<std::size_t>(self)].right = ri;
  return self;
}

std::string fmt_short(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

void render_node(const DecisionTree& tree, int idx, const std::vector<std::string>& names,
                 int indent, std::ostringstream& os) {
  const TreeNode& nd = tree.nodes[static_cast<std::size_t>(idx)];
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  if (nd.is_leaf) {
    os << pad << "leaf #" << nd.leaf_id << " n=" << nd.n << " modal=" << nd.modal
       << " posterior=(";
    for (std::size_t c = 0; c < nd.posterior.size(); ++c)
      os << (c ? ", " : "") << fmt_short(nd.posterior[c]);
    os << ")\n";
    return;
  }
  const auto fname = [&](std::size_t f) {
    return f < names.size() ? names[f] : "x" + std::to_string(f + 1);
  };
  os << pad << "split " << fname(nd.feature) << " <= " << fmt_short(nd.threshold)
     << " n=" << nd.n << " default=" << (nd.default_left ? "L" : "R");
  if (!nd.surrogates.empty()) {
    os << " surrogates=[";
    for (std::size_t s = 0; s < nd.surrogates.size(); ++s) {
      const auto& sr = nd.surrogates[s];
      os << (s ? ", " : "") << fname(sr.feature) << (sr.swap ? " > " : " <= ")
         << fmt_short(sr.threshold) << " (" << fmt_short(sr.agreement) << ")";
    }
    os << "]";
  }
  os << "\n";
  render_node(tree, nd.left, names, indent + 1, os);
  render_node(tree, nd.right, names, indent + 1, os);
}

}  // namespace

std::string tree_to_json(const DecisionTree& tree, const std::string& provenance) {
  nlohmann::json j;
  if (!provenance.empty()) j["provenance"] = provenance;
  j["n_classes"] = tree.n_classes;
  j["max_depth"] = tree.max_depth;
  j["min_leaf"] = tree.min_leaf;
  j["cp"] = tree.cp;
  j["root"] = node_to_json(tree, 0);
  return j.dump(2) + "\n";
}

DecisionTree tree_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  DecisionTree tree;
  tree.n_classes = j.at("n_classes").get<int>();
  tree.max_depth = j.at("max_depth").get<int>();
  tree.min_leaf = j.at("min_leaf").get<std::size_t>();
  tree.cp = j.at("cp").get<double>();
  node_from_json(j.at("root"), tree);
  return tree;
}

std::string render_tree(const DecisionTree& tree, const std::vector<std::string>& names) {
  std::ostringstream os;
  if (!tree.nodes.empty()) render_node(tree, 0, names, 0, os);
  return os.str();
}

}  // namespace policylearn
