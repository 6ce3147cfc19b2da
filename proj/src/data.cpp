#include "ghnet/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string_view>

#include <json.hpp>

#include "ghnet/errors.hpp"
#include "ghnet/io.hpp"

namespace ghnet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.filename().string() + ": missing or unreadable (" + path.string() + ")");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.filename().string() + ": missing or unreadable (" + path.string() + ")");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.filename().string() + ": " + e.what());
  }
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find('\t', start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view text, const std::string& file, std::size_t line_no) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw DataError(file + ": line " + std::to_string(line_no) + ": cannot parse '" +
                    std::string(text) + "'");
  }
  return value;
}

std::vector<std::size_t> read_id_list(const json& j, const char* key, std::size_t n) {
  if (!j.contains(key) || !j[key].is_array()) {
    throw DataError(std::string("split.json: missing array '") + key + "'");
  }
  std::vector<std::size_t> ids;
  for (const auto& v : j[key]) {
    if (!v.is_number_integer() || v.get<long long>() < 0 ||
        static_cast<std::size_t>(v.get<long long>()) >= n) {
      throw DataError(std::string("split.json: '") + key + "' contains an invalid node id " +
                      v.dump());
    }
    ids.push_back(v.get<std::size_t>());
  }
  return ids;
}

}  // namespace

void validate_dataset(const GraphDataset& ds) {
  const std::size_t n = ds.num_nodes();
  if (ds.labels.size() != n) throw DataError("labels.tsv: label count does not match num_nodes");
  if (!ds.adjacency.is_square() || ds.adjacency.num_rows() != n) {
    throw DataError("edges.tsv: adjacency is not " + std::to_string(n) + "x" + std::to_string(n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const int y = ds.labels[i];
    if (y != kUnlabeled && (y < 0 || static_cast<std::size_t>(y) >= ds.num_classes)) {
      throw DataError("labels.tsv: label " + std::to_string(y) + " of node " + std::to_string(i) +
                      " out of range for " + std::to_string(ds.num_classes) + " classes");
    }
  }
  std::vector<int> owner(n, -1);
  const std::vector<std::size_t>* sets[] = {&ds.splits.train, &ds.splits.val, &ds.splits.test};
  const char* names[] = {"train", "val", "test"};
  for (int s = 0; s < 3; ++s) {
    if (sets[s]->empty()) throw DataError(std::string("split.json: '") + names[s] + "' is empty");
    for (std::size_t id : *sets[s]) {
      if (id >= n) throw DataError("split.json: node id " + std::to_string(id) + " out of range");
      if (owner[id] != -1) {
        throw DataError("split.json: overlapping splits (node " + std::to_string(id) + " in " +
                        names[owner[id]] + " and " + names[s] + ")");
      }
      owner[id] = s;
      if (ds.labels[id] == kUnlabeled) {
        throw DataError("labels.tsv: node " + std::to_string(id) + " in '" + names[s] +
                        "' has no label");
      }
    }
  }
}

GraphDataset load_graphdir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("dataset directory not found: " + dir.string());

  const json meta = read_json(dir / "meta.json");
  GraphDataset ds;
  std::size_t n = 0;
  std::size_t d = 0;
  try {
    ds.name = meta.at("name").get<std::string>();
    n = meta.at("num_nodes").get<std::size_t>();
    d = meta.at("num_features").get<std::size_t>();
    ds.num_classes = meta.at("num_classes").get<std::size_t>();
  } catch (const json::exception& e) {
    throw DataError(std::string("meta.json: ") + e.what());
  }

  const auto feature_lines = read_lines(dir / "features.tsv");
  if (feature_lines.size() != n) {
    throw DataError("features.tsv: " + std::to_string(feature_lines.size()) +
                    " rows but meta.json says num_nodes = " + std::to_string(n));
  }
  ds.features = DenseMatrix(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto fields = split_tabs(feature_lines[i]);
    if (fields.size() != d) {
      throw DataError("features.tsv: line " + std::to_string(i + 1) + " has " +
                      std::to_string(fields.size()) + " columns but meta.json says num_features = " +
                      std::to_string(d));
    }
    for (std::size_t j = 0; j < d; ++j) {
      ds.features(i, j) = parse_number<double>(fields[j], "features.tsv", i + 1);
    }
  }

  const auto label_lines = read_lines(dir / "labels.tsv");
  if (label_lines.size() != n) {
    throw DataError("labels.tsv: " + std::to_string(label_lines.size()) +
                    " rows but meta.json says num_nodes = " + std::to_string(n));
  }
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    ds.labels[i] = parse_number<int>(label_lines[i], "labels.tsv", i + 1);
  }

  const auto edge_lines = read_lines(dir / "edges.tsv");
  std::vector<Edge> edges;
  edges.reserve(edge_lines.size());
  for (std::size_t i = 0; i < edge_lines.size(); ++i) {
    const auto fields = split_tabs(edge_lines[i]);
    if (fields.size() != 2) {
      throw DataError("edges.tsv: line " + std::to_string(i + 1) + " is not a src<TAB>dst pair");
    }
    Edge e{parse_number<std::size_t>(fields[0], "edges.tsv", i + 1),
           parse_number<std::size_t>(fields[1], "edges.tsv", i + 1)};
    if (e.src >= n || e.dst >= n) {
      throw DataError("edges.tsv: line " + std::to_string(i + 1) + " references a node >= " +
                      std::to_string(n));
    }
    edges.push_back(e);
  }
  ds.adjacency = build_csr(edges, n);

  const json split = read_json(dir / "split.json");
  ds.splits.train = read_id_list(split, "train", n);
  ds.splits.val = read_id_list(split, "val", n);
  ds.splits.test = read_id_list(split, "test", n);

  validate_dataset(ds);
  return ds;
}

void write_graphdir(const GraphDataset& ds, const fs::path& dir) {
  validate_dataset(ds);
  fs::create_directories(dir);

  json meta = {{"name", ds.name},
               {"num_nodes", ds.num_nodes()},
               {"num_features", ds.num_features()},
               {"num_classes", ds.num_classes}};
  write_file_atomic(dir / "meta.json", meta.dump(2) + "\n");

  std::string edges;
  for (std::size_t r = 0; r < ds.adjacency.num_rows(); ++r) {
    for (std::size_t c : ds.adjacency.row_cols(r)) {
      if (c > r) edges += std::to_string(r) + "\t" + std::to_string(c) + "\n";
    }
  }
  write_file_atomic(dir / "edges.tsv", edges);

  std::string features;
  for (std::size_t i = 0; i < ds.num_nodes(); ++i) {
    auto row = ds.features.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j > 0) features += '\t';
      features += format_real(row[j]);
    }
    features += '\n';
  }
  write_file_atomic(dir / "features.tsv", features);

  std::string labels;
  for (int y : ds.labels) labels += std::to_string(y) + "\n";
  write_file_atomic(dir / "labels.tsv", labels);

  json split = {{"train", ds.splits.train}, {"val", ds.splits.val}, {"test", ds.splits.test}};
  write_file_atomic(dir / "split.json", split.dump() + "\n");
}

GraphDataset synth_sbm(const SbmParams& p, Rng& rng) {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(p.p_in) || !in_unit(p.p_out) || p.p_in == 0.0 || p.p_out == 1.0) {
    throw ConfigError("synth_sbm: need 0 < p_in <= 1 and 0 <= p_out < 1");
  }
  if (!(p.p_in > p.p_out)) throw ConfigError("synth_sbm: p_in must exceed p_out");
  if (p.blocks < 2 || p.nodes_per_block < 10) {
    throw ConfigError("synth_sbm: need >= 2 blocks of >= 10 nodes");
  }
  if (p.feat_dim < p.blocks) throw ConfigError("synth_sbm: feat_dim must be >= blocks");
  if (!(p.feat_noise >= 0.0)) throw ConfigError("synth_sbm: feat_noise must be >= 0");

  const std::size_t n = p.blocks * p.nodes_per_block;
  GraphDataset ds;
  ds.name = "sbm";
  ds.num_classes = p.blocks;
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) ds.labels[i] = static_cast<int>(i / p.nodes_per_block);

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double prob = ds.labels[i] == ds.labels[j] ? p.p_in : p.p_out;
      if (unif(rng) < prob) edges.push_back({i, j});
    }
  }
  ds.adjacency = build_csr(edges, n);

  std::normal_distribution<double> noise(0.0, 1.0);
  ds.features = DenseMatrix(n, p.feat_dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p.feat_dim; ++j) {
      const double centroid = static_cast<std::size_t>(ds.labels[i]) == j ? 1.0 : 0.0;
      const double eps = noise(rng);
      ds.features(i, j) = centroid + p.feat_noise * eps;
    }
  }

  const std::size_t n_train = std::max<std::size_t>(1, p.nodes_per_block / 10);
  const std::size_t n_val = std::max<std::size_t>(1, p.nodes_per_block / 5);
  for (std::size_t b = 0; b < p.blocks; ++b) {
    std::vector<std::size_t> members(p.nodes_per_block);
    for (std::size_t k = 0; k < members.size(); ++k) members[k] = b * p.nodes_per_block + k;
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t k = 0; k < members.size(); ++k) {
      auto& dst = k < n_train ? ds.splits.train
                  : k < n_train + n_val ? ds.splits.val
                                        : ds.splits.test;
      dst.push_back(members[k]);
    }
  }
  std::sort(ds.splits.train.begin(), ds.splits.train.end());
  std::sort(ds.splits.val.begin(), ds.splits.val.end());
  std::sort(ds.splits.test.begin(), ds.splits.test.end());
  validate_dataset(ds);
  return ds;
}

GraphDataset subsample_labels(const GraphDataset& ds, double fraction, Rng& rng, bool stratified) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ConfigError("subsample_labels: fraction must lie in (0, 1]");
  }
  // The epsilon keeps products such as 0.3 · 140 = 41.99999... from losing a node.
  auto keep_count = [fraction](std::size_t total) {
    return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(total) + 1e-9));
  };

  std::vector<std::size_t> kept;
  if (!stratified) {
    kept = ds.splits.train;
    std::shuffle(kept.begin(), kept.end(), rng);
    kept.resize(std::min(kept.size(), keep_count(ds.splits.train.size())));
  } else {
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t id : ds.splits.train) by_class[ds.labels[id]].push_back(id);
    for (auto& [label, members] : by_class) {
      std::shuffle(members.begin(), members.end(), rng);
      const std::size_t m = std::min(members.size(), keep_count(members.size()));
      kept.insert(kept.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(m));
    }
  }
  if (kept.empty()) throw ConfigError("subsample_labels: fraction leaves no training nodes");
  std::sort(kept.begin(), kept.end());

  GraphDataset out = ds;
  out.splits.train = std::move(kept);
  return out;
}

}  // namespace ghnet
