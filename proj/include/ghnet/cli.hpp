#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace ghnet::cli {

// Fully resolved description of one CLI invocation. Echoed to
// <out>/plan.json by every experiment subcommand.
struct ExperimentPlan {
  std::string command;
  std::string data;
  std::string model = "ghnet-i";
  std::vector<std::size_t> hops;  // empty: per-model default
  std::size_t hidden = 16;
  double lr = 0.01;
  double dropout = 0.5;
  double weight_decay = 5e-4;
  std::string decay_scope = "first";
  std::size_t epochs = 200;
  std::size_t patience = 10;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::optional<double> fixed_t;
  std::string out;

  // train
  std::optional<std::size_t> export_embeddings;
  std::optional<std::size_t> export_gates;
  std::size_t gate_sample = 100;
  // sweep-hops / ablate-gate / label-rate
  std::vector<std::size_t> k_range{1, 2, 3, 4, 5};
  std::vector<double> t_values{0.1, 0.3, 0.5, 0.7, 0.9};
  std::vector<double> fractions{0.1, 0.2, 0.3, 0.4, 0.5};
  bool stratified = false;
  // gradcheck
  std::string corrupt_op;
  // synth
  std::size_t sbm_blocks = 4;
  std::size_t sbm_nodes_per_block = 100;
  double sbm_p_in = 0.05;
  double sbm_p_out = 0.005;
  std::size_t sbm_feat_dim = 16;
  double sbm_noise = 1.0;
  std::uint64_t sbm_seed = 0;
};

void to_json(nlohmann::json& j, const ExperimentPlan& p);
void from_json(const nlohmann::json& j, ExperimentPlan& p);

// Default hop list when none is given: ghnet 1,5; gcn and mlp 1,1; sgc 2.
std::vector<std::size_t> default_hops(const std::string& model);

// Parses and runs one command line. Returns the process exit code:
// 0 success, 1 runtime failure, 2 usage or configuration error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ghnet::cli
