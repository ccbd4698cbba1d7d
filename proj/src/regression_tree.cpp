#include "vphm/regression_tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vphm/error.hpp"

namespace vphm::baselines {

BinnedFeatures::BinnedFeatures(const FeatureMatrix &x, std::size_t max_bins)
    : rows_(x.rows), cols_(x.cols), edges_(x.cols), codes_(x.rows * x.cols) {
  require(max_bins >= 2 && max_bins <= 256, "BinnedFeatures: max_bins must lie in [2,256]");
  std::vector<double> col(rows_);
  for (std::size_t f = 0; f < cols_; ++f) {
    for (std::size_t i = 0; i < rows_; ++i)
      col[i] = x.data[i * cols_ + f];
    std::sort(col.begin(), col.end());
    std::vector<double> uniq(col.begin(), std::unique(col.begin(), col.end()));
    auto &e = edges_[f];
    if (uniq.size() <= max_bins) {
      e = std::move(uniq);
    } else {
      for (std::size_t k = 1; k <= max_bins; ++k) {
        const std::size_t pos = std::min(rows_ - 1, k * rows_ / max_bins);
        if (e.empty() || col[pos] > e.back())
          e.push_back(col[pos]);
      }
      if (e.back() < col.back())
        e.back() = col.back();
    }
    for (std::size_t i = 0; i < rows_; ++i) {
      const double v = x.data[i * cols_ + f];
      const auto b = static_cast<std::size_t>(std::lower_bound(e.begin(), e.end(), v) - e.begin());
      codes_[i * cols_ + f] = static_cast<std::uint8_t>(std::min(b, e.size() - 1));
    }
  }
}

std::size_t RegressionTree::find_leaf(std::span<const double> x) const {
  std::size_t n = 0;
  while (nodes[n].feature >= 0) {
    const auto &node = nodes[n];
    n = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)] <= node.threshold
                                     ? node.left
                                     : node.right);
  }
  return n;
}

std::span<const std::uint32_t> RegressionTree::rows_in_leaf(std::int32_t leaf) const {
  const auto l = static_cast<std::size_t>(leaf);
  return {leaf_rows.data() + leaf_offsets[l], leaf_offsets[l + 1] - leaf_offsets[l]};
}

namespace {

struct Split {
  bool found = false;
  std::size_t feature = 0;
  std::size_t bin = 0;
  double score = 0.0;
};

struct Task {
  std::size_t node, begin, end, depth;
};

} // namespace

RegressionTree fit_tree(const BinnedFeatures &x, std::span<const double> target,
                        std::vector<std::uint32_t> rows, const TreeConfig &config,
                        std::mt19937_64 &rng) {
  require(!rows.empty(), "fit_tree: no training rows");
  require(target.size() == x.rows(), "fit_tree: target length differs from feature rows");
  require(config.min_samples_leaf >= 1, "fit_tree: min_samples_leaf must be >= 1");
  const std::size_t d = x.cols();
  const std::size_t n_try =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(config.max_features * static_cast<double>(d))), 1, d);

  std::vector<std::size_t> features(d);
  std::iota(features.begin(), features.end(), 0);
  std::vector<double> cnt(d * 256), sum(d * 256);

  RegressionTree tree;
  tree.nodes.emplace_back();
  std::vector<Task> stack{{0, 0, rows.size(), 0}};
  std::vector<std::pair<std::size_t, std::size_t>> leaf_ranges;

  while (!stack.empty()) {
    const Task t = stack.back();
    stack.pop_back();
    const std::size_t n = t.end - t.begin;
    double total = 0.0;
    for (std::size_t k = t.begin; k < t.end; ++k)
      total += target[rows[k]];

    Split best;
    if (t.depth < config.max_depth && n >= config.min_samples_split && n >= 2 * config.min_samples_leaf) {
      std::vector<std::size_t> tried = features;
      if (n_try < d) {
        std::shuffle(tried.begin(), tried.end(), rng);
        tried.resize(n_try);
        std::sort(tried.begin(), tried.end());
      }
      std::fill(cnt.begin(), cnt.end(), 0.0);
      std::fill(sum.begin(), sum.end(), 0.0);
      for (std::size_t k = t.begin; k < t.end; ++k) {
        const std::uint8_t *codes = x.row_codes(rows[k]);
        const double y = target[rows[k]];
        for (std::size_t f : tried) {
          const std::size_t idx = f * 256 + codes[f];
          cnt[idx] += 1.0;
          sum[idx] += y;
        }
      }
      const double parent = total * total / static_cast<double>(n);
      const double min_leaf = static_cast<double>(config.min_samples_leaf);
      for (std::size_t f : tried) {
        const std::size_t nb = x.edges(f).size();
        double nl = 0.0, sl = 0.0;
        for (std::size_t b = 0; b + 1 < nb; ++b) {
          nl += cnt[f * 256 + b];
          sl += sum[f * 256 + b];
          const double nr = static_cast<double>(n) - nl;
          if (nl < min_leaf)
            continue;
          if (nr < min_leaf)
            break;
          const double score = sl * sl / nl + (total - sl) * (total - sl) / nr;
          if (score > parent * (1.0 + 1e-12) + 1e-15 && (!best.found || score > best.score))
            best = {true, f, b, score};
        }
      }
    }

    if (!best.found) {
      auto &node = tree.nodes[t.node];
      node.value = total / static_cast<double>(n);
      node.leaf = static_cast<std::int32_t>(leaf_ranges.size());
      leaf_ranges.emplace_back(t.begin, t.end);
      continue;
    }

    const auto mid = std::stable_partition(rows.begin() + static_cast<std::ptrdiff_t>(t.begin),
                                           rows.begin() + static_cast<std::ptrdiff_t>(t.end),
                                           [&](std::uint32_t r) { return x.code(r, best.feature) <= best.bin; });
    const std::size_t split = static_cast<std::size_t>(mid - rows.begin());
    const auto left = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    auto &node = tree.nodes[t.node];
    node.feature = static_cast<std::int32_t>(best.feature);
    node.threshold = x.edges(best.feature)[best.bin];
    node.left = left;
    node.right = left + 1;
    node.value = total / static_cast<double>(n);
    // Right pushed first so the left subtree is grown first.
    stack.push_back({static_cast<std::size_t>(left + 1), split, t.end, t.depth + 1});
    stack.push_back({static_cast<std::size_t>(left), t.begin, split, t.depth + 1});
  }

  tree.leaf_offsets.push_back(0);
  for (const auto &[b, e] : leaf_ranges) {
    tree.leaf_rows.insert(tree.leaf_rows.end(), rows.begin() + static_cast<std::ptrdiff_t>(b),
                          rows.begin() + static_cast<std::ptrdiff_t>(e));
    tree.leaf_offsets.push_back(static_cast<std::uint32_t>(tree.leaf_rows.size()));
  }
  return tree;
}

} // namespace vphm::baselines
