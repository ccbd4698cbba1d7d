#pragma once

// Histogram-binned CART regression tree shared by the quantile forest and
// quantile boosting. Splits maximize variance reduction; ties go to the
// lowest feature index, then the lowest threshold.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace vphm::baselines {

/// Dense row-major feature matrix.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
};

/// Per-feature bin edges plus the binned training codes. Features with at
/// most `max_bins` distinct values are binned exactly.
class BinnedFeatures {
public:
  BinnedFeatures() = default;
  explicit BinnedFeatures(const FeatureMatrix &x, std::size_t max_bins = 256);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::uint8_t code(std::size_t row, std::size_t feature) const { return codes_[row * cols_ + feature]; }
  const std::uint8_t *row_codes(std::size_t row) const { return codes_.data() + row * cols_; }
  /// Upper edge of each bin; a value goes left of bin b iff value <= edges[b].
  const std::vector<double> &edges(std::size_t feature) const { return edges_[feature]; }

private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<std::vector<double>> edges_;
  std::vector<std::uint8_t> codes_;
};

struct TreeConfig {
  std::size_t max_depth = 40;
  std::size_t min_samples_split = 50;
  std::size_t min_samples_leaf = 13;
  double max_features = 1.0; ///< fraction of features examined per node
};

struct TreeNode {
  std::int32_t feature = -1; ///< -1 marks a leaf
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;      ///< mean target for leaves
  std::int32_t leaf = -1;  ///< dense leaf index
};

struct RegressionTree {
  std::vector<TreeNode> nodes;
  /// Training rows per leaf (with bootstrap multiplicity), CSR layout.
  std::vector<std::uint32_t> leaf_offsets;
  std::vector<std::uint32_t> leaf_rows;

  std::size_t leaf_count() const { return leaf_offsets.empty() ? 0 : leaf_offsets.size() - 1; }
  /// Node index of the leaf reached by x.
  std::size_t find_leaf(std::span<const double> x) const;
  double predict(std::span<const double> x) const { return nodes[find_leaf(x)].value; }
  std::span<const std::uint32_t> rows_in_leaf(std::int32_t leaf) const;
};

/// Grows a tree on `rows` (repeats allowed) against `target`.
RegressionTree fit_tree(const BinnedFeatures &x, std::span<const double> target,
                        std::vector<std::uint32_t> rows, const TreeConfig &config,
                        std::mt19937_64 &rng);

} // namespace vphm::baselines
