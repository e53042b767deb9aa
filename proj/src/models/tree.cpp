#include "sigbench/models/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <omp.h>

#include "sigbench/binio.hpp"
#include "sigbench/rng.hpp"

namespace sigbench::models {
namespace {

using data::FeatureKind;
using data::FeatureMatrix;

bool row_has_feature(const FeatureMatrix& X, std::size_t row, std::int32_t feature) {
  const auto act = X.active_row(row);
  return std::binary_search(act.begin(), act.end(), feature);
}

struct Split {
  double gini = std::numeric_limits<double>::infinity();
  std::int32_t feature = -1;
  double threshold = 0.0;
  bool valid = false;

  // Deterministic preference order: impurity, then feature, then threshold.
  bool better_than(const Split& o) const {
    if (!valid) return false;
    if (!o.valid) return true;
    if (gini != o.gini) return gini < o.gini;
    if (feature != o.feature) return feature < o.feature;
    return threshold < o.threshold;
  }
};

class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& X, const std::vector<int>& y, int num_classes,
              const TreeParams& params)
      : X_(X), y_(y), K_(num_classes), params_(params) {}

  std::vector<TreeNode> build() {
    std::vector<std::size_t> rows(X_.rows);
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    nodes_.clear();
    grow(std::move(rows), 0);
    return std::move(nodes_);
  }

 private:
  std::int32_t grow(std::vector<std::size_t> rows, int depth) {
    const std::int32_t index = static_cast<std::int32_t>(nodes_.size());
    nodes_.emplace_back();
    const std::uint64_t node_seed = derive_seed(params_.seed, node_counter_++);

    std::vector<std::uint32_t> counts(K_, 0);
    for (std::size_t r : rows) ++counts[y_[r]];
    const bool pure = std::count_if(counts.begin(), counts.end(),
                                    [](std::uint32_t c) { return c > 0; }) <= 1;
    const bool depth_capped = params_.max_depth >= 0 && depth >= params_.max_depth;

    Split split;
    if (!pure && !depth_capped && rows.size() >= 2 * static_cast<std::size_t>(params_.min_leaf))
      split = find_best_split(rows, counts, node_seed);

    if (!split.valid) {
      make_leaf(index, counts);
      return index;
    }

    std::vector<std::size_t> left, right;
    left.reserve(rows.size());
    right.reserve(rows.size());
    for (std::size_t r : rows) {
      if (value_at(r, split.feature) <= split.threshold) left.push_back(r);
      else right.push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();

    nodes_[index].split_feature = split.feature;
    nodes_[index].threshold = split.threshold;
    const std::int32_t l = grow(std::move(left), depth + 1);
    nodes_[index].left = l;
    const std::int32_t r = grow(std::move(right), depth + 1);
    nodes_[index].right = r;
    return index;
  }

  void make_leaf(std::int32_t index, const std::vector<std::uint32_t>& counts) {
    TreeNode& node = nodes_[index];
    node.leaf_distribution = counts;
    std::uint32_t best = 0;
    node.leaf_class = 0;
    for (int c = 0; c < K_; ++c) {
      if (counts[c] > best) {
        best = counts[c];
        node.leaf_class = c;
      }
    }
  }

  double value_at(std::size_t row, std::int32_t feature) const {
    if (X_.kind == FeatureKind::RawPixels) return X_.row(row)[feature];
    return row_has_feature(X_, row, feature) ? 1.0 : 0.0;
  }

  Split find_best_split(const std::vector<std::size_t>& rows,
                        const std::vector<std::uint32_t>& counts, std::uint64_t node_seed) {
    return X_.kind == FeatureKind::RawPixels ? best_split_dense(rows, node_seed)
                                             : best_split_onehot(rows, counts, node_seed);
  }

  // Candidate features for this node; empty result means "all".
  std::vector<std::int32_t> sample_features(std::size_t pool, std::uint64_t node_seed) {
    if (params_.feature_subsample == 0 || params_.feature_subsample >= pool) return {};
    Rng rng(derive_seed(node_seed, 0xfea7));
    std::vector<std::int32_t> all(pool);
    for (std::size_t i = 0; i < pool; ++i) all[i] = static_cast<std::int32_t>(i);
    for (std::size_t i = 0; i < params_.feature_subsample; ++i) {
      const std::size_t j = i + rng.next_below(pool - i);
      std::swap(all[i], all[j]);
    }
    all.resize(params_.feature_subsample);
    std::sort(all.begin(), all.end());
    return all;
  }

  Split best_split_dense(const std::vector<std::size_t>& rows, std::uint64_t node_seed) {
    const std::size_t n = rows.size();
    const auto sampled = sample_features(X_.cols, node_seed);
    const std::size_t n_cand = sampled.empty() ? X_.cols : sampled.size();
    std::vector<Split> per_feature(n_cand);

    const bool parallel = !omp_in_parallel() && n * n_cand > (1u << 16);
#pragma omp parallel for schedule(dynamic, 16) if (parallel)
    for (std::size_t ci = 0; ci < n_cand; ++ci) {
      const std::int32_t f = sampled.empty() ? static_cast<std::int32_t>(ci) : sampled[ci];
      per_feature[ci] = params_.extra_random ? random_split_dense(rows, f, node_seed)
                                             : exact_split_dense(rows, f);
      per_feature[ci].feature = f;
    }

    Split best;
    for (const Split& s : per_feature)
      if (s.better_than(best)) best = s;
    return best;
  }

  Split exact_split_dense(const std::vector<std::size_t>& rows, std::int32_t f) {
    const std::size_t n = rows.size();
    std::vector<std::pair<double, int>> vals(n);
    for (std::size_t i = 0; i < n; ++i) vals[i] = {X_.row(rows[i])[f], y_[rows[i]]};
    std::sort(vals.begin(), vals.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    Split best;
    std::vector<double> left(K_, 0.0);
    std::vector<double> right(K_, 0.0);
    for (const auto& [v, c] : vals) right[c] += 1.0;
    double ssq_left = 0.0, ssq_right = 0.0;
    for (double c : right) ssq_right += c * c;

    for (std::size_t i = 0; i + 1 < n; ++i) {
      const int c = vals[i].second;
      ssq_left += 2.0 * left[c] + 1.0;
      ssq_right -= 2.0 * right[c] - 1.0;
      left[c] += 1.0;
      right[c] -= 1.0;
      if (vals[i + 1].first <= vals[i].first) continue;  // not a boundary
      const double n_left = double(i + 1), n_right = double(n - i - 1);
      if (n_left < params_.min_leaf || n_right < params_.min_leaf) continue;
      const double gini =
          (n_left * (1.0 - ssq_left / (n_left * n_left)) +
           n_right * (1.0 - ssq_right / (n_right * n_right))) /
          double(n);
      double threshold = vals[i].first + 0.5 * (vals[i + 1].first - vals[i].first);
      if (!(threshold >= vals[i].first && threshold < vals[i + 1].first))
        threshold = vals[i].first;  // keep the partition exactly at the scanned boundary
      if (gini < best.gini) {
        best.gini = gini;
        best.threshold = threshold;
        best.valid = true;
      }
    }
    return best;
  }

  Split random_split_dense(const std::vector<std::size_t>& rows, std::int32_t f,
                           std::uint64_t node_seed) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t r : rows) {
      const double v = X_.row(r)[f];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    Split s;
    if (!(hi > lo)) return s;
    Rng rng(derive_seed(node_seed, static_cast<std::uint64_t>(f)));
    const double thr = rng.uniform(lo, hi);  // in [lo, hi): both sides non-empty
    return evaluate_threshold(rows, f, thr);
  }

  Split evaluate_threshold(const std::vector<std::size_t>& rows, std::int32_t f, double thr) {
    const std::size_t n = rows.size();
    std::vector<double> left(K_, 0.0), right(K_, 0.0);
    for (std::size_t r : rows)
      (X_.row(r)[f] <= thr ? left : right)[y_[r]] += 1.0;
    double n_left = 0.0, n_right = 0.0, ssq_left = 0.0, ssq_right = 0.0;
    for (int c = 0; c < K_; ++c) {
      n_left += left[c];
      n_right += right[c];
      ssq_left += left[c] * left[c];
      ssq_right += right[c] * right[c];
    }
    Split s;
    if (n_left < params_.min_leaf || n_right < params_.min_leaf) return s;
    s.gini = (n_left * (1.0 - ssq_left / (n_left * n_left)) +
              n_right * (1.0 - ssq_right / (n_right * n_right))) /
             double(n);
    s.threshold = thr;
    s.valid = true;
    return s;
  }

  // One-hot columns are binary, so the only informative threshold puts the
  // zeros left and the ones right. Class counts per active feature come
  // from a single pass over the node's active index lists.
  Split best_split_onehot(const std::vector<std::size_t>& rows,
                          const std::vector<std::uint32_t>& node_counts,
                          std::uint64_t node_seed) {
    if (hist_.size() != X_.cols * K_) hist_.assign(X_.cols * K_, 0);
    std::vector<std::int32_t> touched;
    for (std::size_t r : rows) {
      const int c = y_[r];
      for (std::int32_t f : X_.active_row(r)) {
        if (hist_[std::size_t(f) * K_] == 0) {
          bool any = false;
          for (int k = 0; k < K_; ++k) any |= hist_[std::size_t(f) * K_ + k] != 0;
          if (!any) touched.push_back(f);
        }
        ++hist_[std::size_t(f) * K_ + c];
      }
    }
    std::sort(touched.begin(), touched.end());

    std::vector<std::int32_t> candidates;
    if (params_.feature_subsample > 0 && params_.feature_subsample < touched.size()) {
      Rng rng(derive_seed(node_seed, 0xfea7));
      for (std::size_t i = 0; i < params_.feature_subsample; ++i) {
        const std::size_t j = i + rng.next_below(touched.size() - i);
        std::swap(touched[i], touched[j]);
      }
      candidates.assign(touched.begin(), touched.begin() + params_.feature_subsample);
      std::sort(candidates.begin(), candidates.end());
    } else {
      candidates = touched;
    }

    const double n = double(rows.size());
    Split best;
    for (std::int32_t f : candidates) {
      double n_right = 0.0, ssq_left = 0.0, ssq_right = 0.0;
      for (int c = 0; c < K_; ++c) {
        const double ones = hist_[std::size_t(f) * K_ + c];
        const double zeros = double(node_counts[c]) - ones;
        n_right += ones;
        ssq_right += ones * ones;
        ssq_left += zeros * zeros;
      }
      const double n_left = n - n_right;
      if (n_left < params_.min_leaf || n_right < params_.min_leaf) continue;
      const double gini = (n_left * (1.0 - ssq_left / (n_left * n_left)) +
                           n_right * (1.0 - ssq_right / (n_right * n_right))) /
                          n;
      Split s;
      s.gini = gini;
      s.feature = f;
      s.threshold = 0.5;
      s.valid = true;
      if (params_.extra_random) {
        Rng rng(derive_seed(node_seed, static_cast<std::uint64_t>(f)));
        s.threshold = rng.uniform(0.0, 1.0);  // same partition, recorded draw
      }
      if (s.better_than(best)) best = s;
    }

    for (std::int32_t f : touched)
      for (int c = 0; c < K_; ++c) hist_[std::size_t(f) * K_ + c] = 0;
    return best;
  }

  const FeatureMatrix& X_;
  const std::vector<int>& y_;
  int K_;
  TreeParams params_;
  std::vector<TreeNode> nodes_;
  std::uint64_t node_counter_ = 0;
  std::vector<std::uint32_t> hist_;  // scratch for one-hot splits
};

void save_nodes(std::ostream& out, const std::vector<TreeNode>& nodes) {
  bin::write_u64(out, nodes.size());
  for (const TreeNode& n : nodes) {
    bin::write_u32(out, static_cast<std::uint32_t>(n.split_feature));
    bin::write_f64(out, n.threshold);
    bin::write_u32(out, static_cast<std::uint32_t>(n.left));
    bin::write_u32(out, static_cast<std::uint32_t>(n.right));
    bin::write_u32(out, static_cast<std::uint32_t>(n.leaf_class));
    bin::write_pod_vector(out, n.leaf_distribution);
  }
}

std::vector<TreeNode> load_nodes(std::istream& in) {
  const std::uint64_t count = bin::read_u64(in);
  std::vector<TreeNode> nodes(count);
  for (TreeNode& n : nodes) {
    n.split_feature = static_cast<std::int32_t>(bin::read_u32(in));
    n.threshold = bin::read_f64(in);
    n.left = static_cast<std::int32_t>(bin::read_u32(in));
    n.right = static_cast<std::int32_t>(bin::read_u32(in));
    n.leaf_class = static_cast<std::int32_t>(bin::read_u32(in));
    n.leaf_distribution = bin::read_pod_vector<std::uint32_t>(in);
  }
  return nodes;
}

}  // namespace

int DecisionTreeModel::predict_row(const FeatureMatrix& X, std::size_t row) const {
  std::int32_t node = 0;
  while (!nodes_[node].is_leaf()) {
    const TreeNode& n = nodes_[node];
    double v;
    if (X.kind == FeatureKind::RawPixels) v = X.row(row)[n.split_feature];
    else v = row_has_feature(X, row, n.split_feature) ? 1.0 : 0.0;
    node = v <= n.threshold ? n.left : n.right;
  }
  return nodes_[node].leaf_class;
}

std::vector<int> DecisionTreeModel::predict(const FeatureMatrix& X) const {
  check_features(*this, X);
  std::vector<int> out(X.rows);
  const bool parallel = !omp_in_parallel() && X.rows > 256;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::size_t i = 0; i < X.rows; ++i) out[i] = predict_row(X, i);
  return out;
}

int DecisionTreeModel::depth() const {
  // Nodes are stored preorder; walk with explicit depths.
  std::vector<std::pair<std::int32_t, int>> stack{{0, 0}};
  int deepest = 0;
  while (!stack.empty()) {
    auto [idx, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    const TreeNode& n = nodes_[idx];
    if (!n.is_leaf()) {
      stack.push_back({n.left, d + 1});
      stack.push_back({n.right, d + 1});
    }
  }
  return deepest;
}

void DecisionTreeModel::save(std::ostream& out) const {
  bin::write_u32(out, static_cast<std::uint32_t>(num_classes_));
  bin::write_u64(out, feature_dim_);
  save_nodes(out, nodes_);
}

std::unique_ptr<DecisionTreeModel> DecisionTreeModel::load_payload(std::istream& in) {
  auto model = std::make_unique<DecisionTreeModel>();
  model->num_classes_ = static_cast<int>(bin::read_u32(in));
  model->feature_dim_ = bin::read_u64(in);
  model->nodes_ = load_nodes(in);
  return model;
}

std::unique_ptr<DecisionTreeModel> fit_tree(const FeatureMatrix& X, const std::vector<int>& y,
                                            int num_classes, const TreeParams& params) {
  if (X.rows == 0 || y.empty()) throw std::invalid_argument("cannot fit a tree on empty data");
  if (X.rows != y.size()) throw std::invalid_argument("feature/label count mismatch");
  auto model = std::make_unique<DecisionTreeModel>();
  model->num_classes_ = num_classes;
  model->feature_dim_ = X.cols;
  model->nodes_ = TreeBuilder(X, y, num_classes, params).build();
  return model;
}

std::vector<int> ForestModel::predict(const FeatureMatrix& X) const {
  check_features(*this, X);
  std::vector<std::uint32_t> votes(X.rows * num_classes_, 0);
  for (const DecisionTreeModel& tree : trees_) {
    const bool parallel = !omp_in_parallel() && X.rows > 256;
#pragma omp parallel for schedule(static) if (parallel)
    for (std::size_t i = 0; i < X.rows; ++i) ++votes[i * num_classes_ + tree.predict_row(X, i)];
  }
  std::vector<int> out(X.rows);
  for (std::size_t i = 0; i < X.rows; ++i) {
    int best = 0;
    for (int c = 1; c < num_classes_; ++c)
      if (votes[i * num_classes_ + c] > votes[i * num_classes_ + best]) best = c;
    out[i] = best;
  }
  return out;
}

void ForestModel::save(std::ostream& out) const {
  bin::write_u32(out, static_cast<std::uint32_t>(num_classes_));
  bin::write_u64(out, feature_dim_);
  bin::write_u32(out, static_cast<std::uint32_t>(trees_.size()));
  for (const auto& tree : trees_) tree.save(out);
}

std::unique_ptr<ForestModel> ForestModel::load_payload(std::istream& in) {
  auto model = std::make_unique<ForestModel>();
  model->num_classes_ = static_cast<int>(bin::read_u32(in));
  model->feature_dim_ = bin::read_u64(in);
  const std::uint32_t n = bin::read_u32(in);
  model->trees_.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i)
    model->trees_.push_back(std::move(*DecisionTreeModel::load_payload(in)));
  return model;
}

std::unique_ptr<ForestModel> fit_forest(const FeatureMatrix& X, const std::vector<int>& y,
                                        int num_classes, const ForestParams& params) {
  if (params.n_trees < 1) throw std::invalid_argument("forest needs at least one tree");
  if (X.rows == 0) throw std::invalid_argument("cannot fit a forest on empty data");
  auto model = std::make_unique<ForestModel>();
  model->num_classes_ = num_classes;
  model->feature_dim_ = X.cols;
  model->trees_.resize(params.n_trees);

  // Per-tree seeds come from the master seed, so the ensemble is identical
  // regardless of how trees are scheduled across threads.
#pragma omp parallel for schedule(dynamic)
  for (int t = 0; t < params.n_trees; ++t) {
    TreeParams tp = params.tree;
    tp.seed = derive_seed(params.seed, static_cast<std::uint64_t>(t));
    model->trees_[t] = std::move(*fit_tree(X, y, num_classes, tp));
  }
  return model;
}

}  // namespace sigbench::models
