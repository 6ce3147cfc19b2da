#include "ghnet/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "ghnet/data.hpp"
#include "ghnet/errors.hpp"
#include "ghnet/gradcheck.hpp"
#include "ghnet/io.hpp"
#include "ghnet/models.hpp"
#include "ghnet/train.hpp"

namespace ghnet::cli {

namespace fs = std::filesystem;
using nlohmann::json;

void to_json(json& j, const ExperimentPlan& p) {
  j = json{{"command", p.command},
           {"data", p.data},
           {"model", p.model},
           {"hops", p.hops},
           {"hidden", p.hidden},
           {"lr", p.lr},
           {"dropout", p.dropout},
           {"weight_decay", p.weight_decay},
           {"decay_scope", p.decay_scope},
           {"epochs", p.epochs},
           {"patience", p.patience},
           {"seeds", p.seeds},
           {"fixed_t", p.fixed_t ? json(*p.fixed_t) : json(nullptr)},
           {"out", p.out}};
  if (p.command == "train") {
    j["export_embeddings"] = p.export_embeddings ? json(*p.export_embeddings) : json(nullptr);
    j["export_gates"] = p.export_gates ? json(*p.export_gates) : json(nullptr);
    j["gate_sample"] = p.gate_sample;
  } else if (p.command == "sweep-hops") {
    j["k_range"] = p.k_range;
  } else if (p.command == "ablate-gate") {
    j["t_values"] = p.t_values;
  } else if (p.command == "label-rate") {
    j["fractions"] = p.fractions;
    j["stratified"] = p.stratified;
  }
}

void from_json(const json& j, ExperimentPlan& p) {
  auto opt = [&](const char* key, auto& field) {
    if (j.contains(key) && !j[key].is_null()) j.at(key).get_to(field);
  };
  opt("command", p.command);
  opt("data", p.data);
  opt("model", p.model);
  opt("hops", p.hops);
  opt("hidden", p.hidden);
  opt("lr", p.lr);
  opt("dropout", p.dropout);
  opt("weight_decay", p.weight_decay);
  opt("decay_scope", p.decay_scope);
  opt("epochs", p.epochs);
  opt("patience", p.patience);
  opt("seeds", p.seeds);
  if (j.contains("fixed_t") && !j["fixed_t"].is_null()) p.fixed_t = j["fixed_t"].get<double>();
  opt("out", p.out);
  if (j.contains("export_embeddings") && !j["export_embeddings"].is_null())
    p.export_embeddings = j["export_embeddings"].get<std::size_t>();
  if (j.contains("export_gates") && !j["export_gates"].is_null())
    p.export_gates = j["export_gates"].get<std::size_t>();
  opt("gate_sample", p.gate_sample);
  opt("k_range", p.k_range);
  opt("t_values", p.t_values);
  opt("fractions", p.fractions);
  opt("stratified", p.stratified);
}

std::vector<std::size_t> default_hops(const std::string& model) {
  if (model == "sgc") return {2};
  if (model == "gcn" || model == "mlp") return {1, 1};
  return {1, 5};
}

namespace {

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

std::size_t thread_budget() {
  if (const char* env = std::getenv("GHNET_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    throw UsageError("GHNET_THREADS must be a positive integer");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;
};

// Sample standard deviation; 0 for a single run.
Summary summarize(const std::vector<double>& xs) {
  Summary s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return s;
}

std::string fixed4(double v) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(4);
  os << v;
  return os.str();
}

VariantKind resolve_variant(const std::string& name) {
  auto v = variant_from_name(name);
  if (!v) throw UsageError("unknown model '" + name + "' (mlp, gcn, sgc, ghnet-i, ghnet-o, ghnet-r)");
  return *v;
}

TrainConfig make_train_config(const ExperimentPlan& p) {
  TrainConfig tc;
  tc.lr = p.lr;
  tc.max_epochs = p.epochs;
  tc.patience = p.patience;
  tc.weight_decay = p.weight_decay;
  if (p.decay_scope == "first") {
    tc.decay_scope = DecayScope::FirstBlock;
  } else if (p.decay_scope == "all") {
    tc.decay_scope = DecayScope::AllBlocks;
  } else {
    throw UsageError("--decay-scope must be 'first' or 'all'");
  }
  tc.dropout = p.dropout;
  tc.seeds = p.seeds;
  tc.hidden = p.hidden;
  tc.validate();
  return tc;
}

ModelConfig make_config(const ExperimentPlan& p, const GraphDataset& ds,
                        const std::vector<std::size_t>& hops, std::optional<double> fixed_t) {
  return make_model_config(resolve_variant(p.model), ds.num_features(), p.hidden, ds.num_classes,
                           hops, p.dropout, fixed_t);
}

GraphDataset load_data(const ExperimentPlan& p) {
  if (p.data.empty()) throw UsageError("--data is required");
  return load_graphdir(p.data);
}

fs::path require_out(const ExperimentPlan& p) {
  if (p.out.empty()) throw UsageError("--out is required");
  fs::create_directories(p.out);
  return p.out;
}

void echo_plan(const ExperimentPlan& p, const fs::path& out) {
  write_file_atomic(out / "plan.json", json(p).dump(2) + "\n");
}

std::vector<double> test_accs(const std::vector<TrainResult>& runs) {
  std::vector<double> accs;
  for (const auto& r : runs) accs.push_back(r.metrics.test_acc);
  return accs;
}

json config_echo(const ExperimentPlan& p, const ModelConfig& cfg) {
  json blocks = json::array();
  for (const auto& b : cfg.blocks) {
    blocks.push_back({{"in_dim", b.in_dim},
                      {"out_dim", b.out_dim},
                      {"hops", b.hops},
                      {"activation", b.activation == Activation::Relu ? "relu" : "identity"}});
  }
  return {{"model", p.model},
          {"blocks", blocks},
          {"dropout", cfg.dropout},
          {"fixed_t", cfg.fixed_t ? json(*cfg.fixed_t) : json(nullptr)},
          {"num_classes", cfg.num_classes},
          {"lr", p.lr},
          {"weight_decay", p.weight_decay},
          {"decay_scope", p.decay_scope},
          {"epochs", p.epochs},
          {"patience", p.patience}};
}

int cmd_train(const ExperimentPlan& p, std::ostream& out) {
  const GraphDataset ds = load_data(p);
  const fs::path dir = require_out(p);
  const auto hops = p.hops.empty() ? default_hops(p.model) : p.hops;
  const ModelConfig cfg = make_config(p, ds, hops, p.fixed_t);
  const TrainConfig tc = make_train_config(p);
  echo_plan(p, dir);

  const auto runs = train_seeds(cfg, tc, ds, thread_budget());
  const json echo = config_echo(p, cfg);
  for (const auto& r : runs) {
    const fs::path seed_dir = dir / ("seed_" + std::to_string(r.metrics.seed));
    write_file_atomic(seed_dir / "run.json", run_metrics_to_json(r.metrics, echo).dump(2) + "\n");
    if (p.export_embeddings) {
      export_embeddings(r.model, ds, *p.export_embeddings, seed_dir / "embeddings.tsv");
    }
    if (p.export_gates) {
      export_gate_histogram(r.model, ds, *p.export_gates, p.gate_sample, r.metrics.seed,
                            seed_dir / "gates.tsv");
    }
  }
  const auto accs = test_accs(runs);
  const Summary s = summarize(accs);
  write_file_atomic(dir / "summary.json",
                    json{{"model", p.model}, {"dataset", ds.name}, {"test_acc", accs},
                         {"mean", s.mean}, {"stddev", s.stddev}}
                            .dump(2) +
                        "\n");
  out << p.model << " on " << ds.name << ": test accuracy " << fixed4(s.mean) << " +/- "
      << fixed4(s.stddev) << " over " << accs.size() << " seed(s)\n";
  return 0;
}

int cmd_sweep_hops(const ExperimentPlan& p, std::ostream& out) {
  const GraphDataset ds = load_data(p);
  const fs::path dir = require_out(p);
  if (p.k_range.empty()) throw UsageError("--k-range is empty");
  const TrainConfig tc = make_train_config(p);
  const auto base = p.hops.empty() ? default_hops(p.model) : p.hops;
  echo_plan(p, dir);

  std::string table = "k\tmean\tstddev\n";
  for (std::size_t k : p.k_range) {
    auto hops = base;
    hops.back() = k;
    const auto runs = train_seeds(make_config(p, ds, hops, p.fixed_t), tc, ds, thread_budget());
    const Summary s = summarize(test_accs(runs));
    table += std::to_string(k) + "\t" + format_real(s.mean) + "\t" + format_real(s.stddev) + "\n";
  }
  write_file_atomic(dir / "sweep_hops.tsv", table);
  out << "sweep-hops " << p.model << " on " << ds.name << ": " << p.k_range.size()
      << " rows written to " << (dir / "sweep_hops.tsv").string() << "\n";
  return 0;
}

int cmd_ablate_gate(const ExperimentPlan& p, std::ostream& out) {
  const GraphDataset ds = load_data(p);
  const fs::path dir = require_out(p);
  if (!is_ghnet(resolve_variant(p.model))) throw UsageError("ablate-gate needs a ghnet model");
  const TrainConfig tc = make_train_config(p);
  const auto hops = p.hops.empty() ? default_hops(p.model) : p.hops;
  echo_plan(p, dir);

  std::string table = "t\tmean\tstddev\n";
  auto row = [&](const std::string& label, std::optional<double> t) {
    const auto runs = train_seeds(make_config(p, ds, hops, t), tc, ds, thread_budget());
    const Summary s = summarize(test_accs(runs));
    table += label + "\t" + format_real(s.mean) + "\t" + format_real(s.stddev) + "\n";
    return s.mean;
  };
  for (double t : p.t_values) row(format_real(t), t);
  const double gated = row("gate", std::nullopt);
  write_file_atomic(dir / "ablate_gate.tsv", table);
  out << "ablate-gate " << p.model << " on " << ds.name << ": learned gate " << fixed4(gated)
      << ", table in " << (dir / "ablate_gate.tsv").string() << "\n";
  return 0;
}

int cmd_label_rate(const ExperimentPlan& p, std::ostream& out) {
  const GraphDataset ds = load_data(p);
  const fs::path dir = require_out(p);
  if (!is_ghnet(resolve_variant(p.model))) throw UsageError("label-rate compares a ghnet model against gcn");
  const TrainConfig tc = make_train_config(p);
  const auto hops = p.hops.empty() ? default_hops(p.model) : p.hops;
  ExperimentPlan gcn_plan = p;
  gcn_plan.model = "gcn";
  echo_plan(p, dir);

  std::string table =
      "fraction\ttrain_nodes\tlabel_rate\tgcn_mean\tgcn_stddev\tghnet_mean\tghnet_stddev\tdelta\t"
      "relative_improvement\n";
  for (double fraction : p.fractions) {
    std::vector<double> gcn_accs;
    std::vector<double> ghnet_accs;
    std::size_t train_nodes = 0;
    for (std::uint64_t seed : p.seeds) {
      Rng rng(seed);
      const GraphDataset sub = subsample_labels(ds, fraction, rng, p.stratified);
      train_nodes = sub.splits.train.size();
      gcn_accs.push_back(
          train_model(make_config(gcn_plan, sub, default_hops("gcn"), std::nullopt), tc, sub, seed)
              .metrics.test_acc);
      ghnet_accs.push_back(
          train_model(make_config(p, sub, hops, p.fixed_t), tc, sub, seed).metrics.test_acc);
    }
    const Summary g = summarize(gcn_accs);
    const Summary h = summarize(ghnet_accs);
    const double label_rate =
        static_cast<double>(train_nodes) / static_cast<double>(ds.num_nodes());
    table += format_real(fraction) + "\t" + std::to_string(train_nodes) + "\t" +
             format_real(label_rate) + "\t" + format_real(g.mean) + "\t" + format_real(g.stddev) +
             "\t" + format_real(h.mean) + "\t" + format_real(h.stddev) + "\t" +
             format_real(h.mean - g.mean) + "\t" +
             format_real(g.mean > 0.0 ? (h.mean - g.mean) / g.mean : 0.0) + "\n";
  }
  write_file_atomic(dir / "label_rate.tsv", table);
  out << "label-rate " << p.model << " vs gcn on " << ds.name << ": " << p.fractions.size()
      << " rows written to " << (dir / "label_rate.tsv").string() << "\n";
  return 0;
}

int cmd_gradcheck(const ExperimentPlan& p, std::ostream& out) {
  TapeOptions options;
  if (!p.corrupt_op.empty()) {
    options.corrupt_backward = op_from_name(p.corrupt_op);
    if (!options.corrupt_backward) throw UsageError("unknown op '" + p.corrupt_op + "'");
  }
  const auto entries = run_gradient_suite(1e-5, options);
  std::string report = "check\tworst_rel_error\tstatus\n";
  bool all = true;
  for (const auto& e : entries) {
    all = all && e.passed;
    report += e.name + "\t" + format_real(e.result.max_rel_error) + "\t" +
              (e.passed ? "PASS" : "FAIL") + "\n";
  }
  out << report;
  if (!p.out.empty()) {
    fs::create_directories(p.out);
    write_file_atomic(fs::path(p.out) / "gradcheck.tsv", report);
  }
  out << (all ? "gradcheck: all checks below 1e-5\n" : "gradcheck: FAILED\n");
  return all ? 0 : 1;
}

int cmd_synth(const ExperimentPlan& p, std::ostream& out) {
  const fs::path dir = require_out(p);
  SbmParams sp;
  sp.blocks = p.sbm_blocks;
  sp.nodes_per_block = p.sbm_nodes_per_block;
  sp.p_in = p.sbm_p_in;
  sp.p_out = p.sbm_p_out;
  sp.feat_dim = p.sbm_feat_dim;
  sp.feat_noise = p.sbm_noise;
  Rng rng(p.sbm_seed);
  const GraphDataset ds = synth_sbm(sp, rng);
  write_graphdir(ds, dir);
  out << "synth: " << ds.num_nodes() << " nodes, " << ds.num_edges() << " edges, "
      << ds.num_classes << " classes written to " << dir.string() << "\n";
  return 0;
}

void add_common(CLI::App* sub, ExperimentPlan& p) {
  sub->add_option("--data", p.data, "GraphDir dataset directory");
  sub->add_option("--model", p.model, "mlp, gcn, sgc, ghnet-i, ghnet-o or ghnet-r");
  sub->add_option("--hops", p.hops, "hops per block, comma separated")->delimiter(',');
  sub->add_option("--hidden", p.hidden, "hidden width");
  sub->add_option("--lr", p.lr, "Adam learning rate");
  sub->add_option("--dropout", p.dropout, "dropout probability");
  sub->add_option("--weight-decay", p.weight_decay, "L2 weight decay");
  sub->add_option("--decay-scope", p.decay_scope, "first or all blocks");
  sub->add_option("--epochs", p.epochs, "maximum epochs");
  sub->add_option("--patience", p.patience, "early-stopping patience (epochs)");
  sub->add_option("--seeds", p.seeds, "seeds, comma separated")->delimiter(',');
  sub->add_option("--fixed-t", p.fixed_t, "replace the learned gate by a constant");
  sub->add_option("--out", p.out, "output directory");
  sub->add_option("--plan", "JSON plan providing defaults for every flag");
}

// --plan is read before the real parse so explicit flags override it.
void preload_plan(const std::vector<std::string>& args, ExperimentPlan& p) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string path;
    if (args[i] == "--plan" && i + 1 < args.size()) {
      path = args[i + 1];
    } else if (args[i].rfind("--plan=", 0) == 0) {
      path = args[i].substr(7);
    } else {
      continue;
    }
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read plan file " + path);
    try {
      json::parse(in).get_to(p);
    } catch (const json::exception& e) {
      throw UsageError("plan file " + path + ": " + e.what());
    }
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  ExperimentPlan plan;
  CLI::App app{"Graph highway network experiments"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "train a model over all seeds");
  add_common(train, plan);
  train->add_option("--export-embeddings", plan.export_embeddings, "block whose output to dump");
  train->add_option("--export-gates", plan.export_gates, "block whose gates to dump");
  train->add_option("--gate-sample", plan.gate_sample, "nodes sampled for the gate dump");

  auto* sweep = app.add_subcommand("sweep-hops", "vary the hops of the last block");
  add_common(sweep, plan);
  sweep->add_option("--k-range", plan.k_range, "hop values, comma separated")->delimiter(',');

  auto* ablate = app.add_subcommand("ablate-gate", "replace the gate by fixed constants");
  add_common(ablate, plan);
  ablate->add_option("--t-values", plan.t_values, "gate constants, comma separated")
      ->delimiter(',');

  auto* label = app.add_subcommand("label-rate", "train on subsampled labels vs gcn");
  add_common(label, plan);
  label->add_option("--fractions", plan.fractions, "training fractions, comma separated")
      ->delimiter(',');
  label->add_flag("--stratified", plan.stratified, "subsample per class");

  auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  grad->add_option("--out", plan.out, "directory for gradcheck.tsv");
  grad->add_option("--corrupt-op", plan.corrupt_op, "negative control: break one backward rule");

  auto* synth = app.add_subcommand("synth", "write a stochastic block model GraphDir");
  synth->add_option("--out", plan.out, "output directory");
  synth->add_option("--blocks", plan.sbm_blocks, "number of blocks");
  synth->add_option("--nodes-per-block", plan.sbm_nodes_per_block, "nodes per block");
  synth->add_option("--p-in", plan.sbm_p_in, "within-block edge probability");
  synth->add_option("--p-out", plan.sbm_p_out, "between-block edge probability");
  synth->add_option("--feat-dim", plan.sbm_feat_dim, "feature width");
  synth->add_option("--noise", plan.sbm_noise, "feature noise stddev");
  synth->add_option("--seed", plan.sbm_seed, "generator seed");

  try {
    preload_plan(args, plan);
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  plan.command = app.get_subcommands().front()->get_name();
  try {
    if (plan.command == "train") return cmd_train(plan, out);
    if (plan.command == "sweep-hops") return cmd_sweep_hops(plan, out);
    if (plan.command == "ablate-gate") return cmd_ablate_gate(plan, out);
    if (plan.command == "label-rate") return cmd_label_rate(plan, out);
    if (plan.command == "gradcheck") return cmd_gradcheck(plan, out);
    if (plan.command == "synth") return cmd_synth(plan, out);
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    // UsageError, ConfigError, ShapeError, GraphError
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace ghnet::cli
