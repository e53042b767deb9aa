#pragma once

#include <cstdint>

#include "sigbench/models/model.hpp"

namespace sigbench::models {

struct TreeParams {
  int max_depth = -1;                 // -1 = unlimited
  int min_leaf = 1;
  bool extra_random = false;          // extra-trees style random thresholds
  std::size_t feature_subsample = 0;  // candidate features per node, 0 = all
  std::uint64_t seed = 0;
};

struct ForestParams {
  int n_trees = 50;
  TreeParams tree{.extra_random = true};
  std::uint64_t seed = 0;
};

// One node of a CART tree. Internal nodes hold (feature, threshold) with
// the convention x[feature] <= threshold goes left; leaves hold the
// majority class and the class counts seen at fit time.
struct TreeNode {
  std::int32_t split_feature = -1;
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::int32_t leaf_class = -1;
  std::vector<std::uint32_t> leaf_distribution;

  bool is_leaf() const { return split_feature < 0; }
};

class DecisionTreeModel : public Model {
 public:
  std::string kind() const override { return "tree"; }
  int num_classes() const override { return num_classes_; }
  std::size_t feature_dim() const override { return feature_dim_; }
  std::vector<int> predict(const data::FeatureMatrix& X) const override;
  void save(std::ostream& out) const override;
  static std::unique_ptr<DecisionTreeModel> load_payload(std::istream& in);

  int predict_row(const data::FeatureMatrix& X, std::size_t row) const;
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  int depth() const;

 private:
  friend std::unique_ptr<DecisionTreeModel> fit_tree(const data::FeatureMatrix&,
                                                     const std::vector<int>&, int,
                                                     const TreeParams&);
  std::vector<TreeNode> nodes_;
  int num_classes_ = 0;
  std::size_t feature_dim_ = 0;
};

class ForestModel : public Model {
 public:
  std::string kind() const override { return "forest"; }
  int num_classes() const override { return num_classes_; }
  std::size_t feature_dim() const override { return feature_dim_; }
  std::vector<int> predict(const data::FeatureMatrix& X) const override;
  void save(std::ostream& out) const override;
  static std::unique_ptr<ForestModel> load_payload(std::istream& in);

  const std::vector<DecisionTreeModel>& trees() const { return trees_; }

 private:
  friend std::unique_ptr<ForestModel> fit_forest(const data::FeatureMatrix&,
                                                 const std::vector<int>&, int,
                                                 const ForestParams&);
  std::vector<DecisionTreeModel> trees_;
  int num_classes_ = 0;
  std::size_t feature_dim_ = 0;
};

// Greedy binary threshold splits minimizing Gini impurity. Splitting
// continues while a node is impure and any candidate feature is
// non-constant, so consistent data is interpolated to 100% train accuracy.
std::unique_ptr<DecisionTreeModel> fit_tree(const data::FeatureMatrix& X,
                                            const std::vector<int>& y, int num_classes,
                                            const TreeParams& params);

// Ensemble of trees with per-tree seeds derived from the master seed;
// prediction is majority vote with ties to the lowest class.
std::unique_ptr<ForestModel> fit_forest(const data::FeatureMatrix& X, const std::vector<int>& y,
                                        int num_classes, const ForestParams& params);

}  // namespace sigbench::models
