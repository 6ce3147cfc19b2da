#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "ghnet/autodiff.hpp"
#include "ghnet/dense.hpp"
#include "ghnet/graph.hpp"

namespace ghnet {

inline constexpr int kUnlabeled = -1;

struct SplitMasks {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;

  bool operator==(const SplitMasks&) const = default;
};

struct GraphDataset {
  std::string name;
  DenseMatrix features;
  std::vector<int> labels;  // kUnlabeled outside the splits is allowed
  CsrMatrix adjacency;
  SplitMasks splits;
  std::size_t num_classes = 0;

  std::size_t num_nodes() const { return features.rows(); }
  std::size_t num_features() const { return features.cols(); }
  std::size_t num_edges() const { return adjacency.nnz() / 2; }

  bool operator==(const GraphDataset&) const = default;
};

// Checks labels, split disjointness and adjacency shape; throws DataError.
void validate_dataset(const GraphDataset& ds);

// GraphDir layout:
//   meta.json     {"name", "num_nodes", "num_features", "num_classes"}
//   edges.tsv     src<TAB>dst per line, 0-based; symmetrized on load
//   features.tsv  num_nodes lines of num_features tab-separated reals
//   labels.tsv    num_nodes lines, one integer, -1 = unlabeled
//   split.json    {"train": [...], "val": [...], "test": [...]}
GraphDataset load_graphdir(const std::filesystem::path& dir);

// Writes each undirected edge once (src < dst). Reals use the shortest
// round-trip representation, so loading the result reproduces `ds` exactly.
void write_graphdir(const GraphDataset& ds, const std::filesystem::path& dir);

struct SbmParams {
  std::size_t blocks = 4;
  std::size_t nodes_per_block = 100;
  double p_in = 0.05;
  double p_out = 0.005;
  std::size_t feat_dim = 16;
  double feat_noise = 1.0;
};

// Planted-partition graph. Node i belongs to block i / nodes_per_block;
// features are the one-hot block centroid plus N(0, feat_noise²) noise;
// splits are 10% / 20% / 70% per block.
GraphDataset synth_sbm(const SbmParams& params, Rng& rng);

// Keeps floor(fraction · |train|) training nodes drawn uniformly at random
// (per class when `stratified`). Validation and test sets are untouched.
GraphDataset subsample_labels(const GraphDataset& ds, double fraction, Rng& rng,
                              bool stratified = false);

}  // namespace ghnet
