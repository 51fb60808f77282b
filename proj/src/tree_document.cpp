#include "recten/tree_document.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace recten {

using Json = nlohmann::ordered_json;

namespace {

constexpr const char* kFormat = "recten-tree";
constexpr int kFormatVersion = 1;

[[noreturn]] void schema_error(const std::string& what) { throw std::runtime_error("tree document: " + what); }

const Json& member(const Json& j, const char* name) {
  if (!j.is_object() || !j.contains(name)) schema_error(std::string("missing field '") + name + "'");
  return j.at(name);
}

template <class T>
T get_as(const Json& j, const char* name) {
  try {
    return member(j, name).get<T>();
  } catch (const nlohmann::json::exception& e) {
    schema_error(std::string("field '") + name + "': " + e.what());
  }
}

Json supports_to_json(const Cluster& c, const std::array<std::vector<std::string>, 3>& keys) {
  Json modes = Json::array();
  for (std::size_t m = 0; m < 3; ++m) {
    Json list = Json::array();
    for (const auto& s : c.supports[m]) {
      Json e = Json::array({s.index, s.strength});
      if (s.index < keys[m].size()) e.push_back(keys[m][s.index]);
      list.push_back(std::move(e));
    }
    modes.push_back(std::move(list));
  }
  return modes;
}

}  // namespace

Json to_json(const TreeDocument& doc) {
  Json j;
  j["format"] = kFormat;
  j["format_version"] = kFormatVersion;
  Json meta;
  meta["input"] = doc.metadata.input;
  meta["params"] = doc.metadata.params;
  meta["seed"] = doc.metadata.seed;
  meta["tool_version"] = doc.metadata.tool_version;
  if (doc.metadata.timestamp) meta["timestamp"] = *doc.metadata.timestamp;
  j["metadata"] = std::move(meta);

  const auto& t = doc.tree;
  j["root"] = {{"dims", t.root_dims}, {"nnz", t.root_nnz}};
  if (auto it = doc.labels.find(kRootId); it != doc.labels.end()) j["root"]["label"] = it->second;

  Json nodes = Json::array();
  for (const auto& [id, c] : t.nodes) {
    Json n;
    n["id"] = id;
    n["level"] = c.level;
    n["parent"] = c.parent;
    n["termination"] = std::string(to_string(c.termination));
    n["nnz"] = c.nnz;
    if (auto it = doc.labels.find(id); it != doc.labels.end()) n["label"] = it->second;
    n["supports"] = supports_to_json(c, doc.keys);
    nodes.push_back(std::move(n));
  }
  j["nodes"] = std::move(nodes);

  Json children = Json::object();
  for (const auto& [id, kids] : t.children) children[std::to_string(id)] = kids;
  j["children"] = std::move(children);
  return j;
}

TreeDocument tree_document_from_json(const Json& j) {
  if (get_as<std::string>(j, "format") != kFormat) schema_error("unknown format");
  if (get_as<int>(j, "format_version") != kFormatVersion) schema_error("unsupported format version");
  TreeDocument doc;
  const Json& meta = member(j, "metadata");
  doc.metadata.input = get_as<std::string>(meta, "input");
  doc.metadata.params = member(meta, "params");
  doc.metadata.seed = get_as<std::uint64_t>(meta, "seed");
  doc.metadata.tool_version = get_as<std::string>(meta, "tool_version");
  if (meta.contains("timestamp")) doc.metadata.timestamp = get_as<std::string>(meta, "timestamp");

  const Json& root = member(j, "root");
  doc.tree.root_dims = get_as<Dims>(root, "dims");
  doc.tree.root_nnz = get_as<std::uint64_t>(root, "nnz");
  if (root.contains("label")) doc.labels[kRootId] = get_as<std::string>(root, "label");

  const Json& nodes = member(j, "nodes");
  if (!nodes.is_array()) schema_error("'nodes' must be an array");
  for (const Json& n : nodes) {
    Cluster c;
    c.id = get_as<ClusterId>(n, "id");
    if (c.id == kRootId) schema_error("node id 0 is reserved for the root");
    c.level = get_as<int>(n, "level");
    c.parent = get_as<ClusterId>(n, "parent");
    try {
      c.termination = termination_from_string(get_as<std::string>(n, "termination"));
    } catch (const std::invalid_argument& e) {
      schema_error(e.what());
    }
    c.nnz = get_as<std::uint64_t>(n, "nnz");
    if (n.contains("label")) doc.labels[c.id] = get_as<std::string>(n, "label");
    const Json& sup = member(n, "supports");
    if (!sup.is_array() || sup.size() != 3) schema_error("'supports' must hold three modes");
    for (std::size_t m = 0; m < 3; ++m) {
      for (const Json& e : sup[m]) {
        if (!e.is_array() || e.size() < 2 || e.size() > 3 || !e[0].is_number_unsigned() || !e[1].is_number())
          schema_error("support entries are [index, strength] or [index, strength, key]");
        const auto idx = e[0].get<Index>();
        c.supports[m].push_back({idx, e[1].get<double>()});
        if (e.size() == 3) {
          if (!e[2].is_string()) schema_error("support key must be a string");
          auto& keys = doc.keys[m];
          if (keys.size() <= idx) keys.resize(static_cast<std::size_t>(idx) + 1);
          keys[idx] = e[2].get<std::string>();
        }
      }
    }
    if (!doc.tree.nodes.emplace(c.id, std::move(c)).second) schema_error("duplicate node id");
  }

  const Json& children = member(j, "children");
  if (!children.is_object()) schema_error("'children' must be an object");
  for (const auto& [key, kids] : children.items()) {
    ClusterId id = 0;
    try {
      std::size_t used = 0;
      id = std::stoull(key, &used);
      if (used != key.size()) throw std::invalid_argument(key);
    } catch (const std::exception&) {
      schema_error("bad children key '" + key + "'");
    }
    try {
      doc.tree.children[id] = kids.get<std::vector<ClusterId>>();
    } catch (const nlohmann::json::exception& e) {
      schema_error(e.what());
    }
  }
  if (auto err = validate_tree(doc.tree); !err.empty()) schema_error(err);
  return doc;
}

std::string serialize(const TreeDocument& doc) { return to_json(doc).dump(2) + "\n"; }

TreeDocument parse_tree_document(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    schema_error(std::string("invalid JSON: ") + e.what());
  }
  return tree_document_from_json(j);
}

TreeDocument read_tree_document_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_tree_document(ss.str());
}

Json params_to_json(const RecTenParams& p) {
  Json j;
  j["epsilon"] = p.epsilon;
  j["k"] = p.k;
  j["lambda"] = p.lambda;
  j["rank_max"] = p.r_max;
  j["cc_threshold"] = p.cc_threshold;
  j["seed"] = p.seed;
  j["max_depth"] = p.max_depth;
  j["max_sweeps"] = p.max_sweeps;
  j["rel_tol"] = p.rel_tol;
  j["next_level"] = std::string(to_string(p.next_level));
  return j;
}

RecTenParams params_from_json(const Json& j) {
  RecTenParams p;
  p.epsilon = get_as<double>(j, "epsilon");
  p.k = get_as<double>(j, "k");
  p.lambda = get_as<double>(j, "lambda");
  p.r_max = get_as<std::size_t>(j, "rank_max");
  p.cc_threshold = get_as<double>(j, "cc_threshold");
  p.seed = get_as<std::uint64_t>(j, "seed");
  p.max_depth = get_as<int>(j, "max_depth");
  p.max_sweeps = get_as<int>(j, "max_sweeps");
  p.rel_tol = get_as<double>(j, "rel_tol");
  p.next_level = next_level_from_string(get_as<std::string>(j, "next_level"));
  return p;
}

TreeDocument truth_document(const GroundTruth& truth, const Dims& dims) {
  if (truth.nodes.empty()) throw std::invalid_argument("truth_document: empty truth");
  TreeDocument doc;
  doc.metadata.input = "ground truth";
  doc.tree.root_dims = dims;
  doc.tree.root_nnz = truth.labels.size();
  doc.labels[kRootId] = truth.nodes[0].label;

  // Projections of every node's cells, including those labeled with a descendant.
  std::vector<std::array<std::set<Index>, 3>> proj(truth.nodes.size());
  for (const auto& [cell, label] : truth.labels) {
    for (int id = label; id > 0; id = truth.nodes.at(static_cast<std::size_t>(id)).parent)
      for (std::size_t m = 0; m < 3; ++m) proj[static_cast<std::size_t>(id)][m].insert(cell[m]);
  }
  doc.tree.children[kRootId] = {};
  for (std::size_t n = 1; n < truth.nodes.size(); ++n) {
    const auto& tn = truth.nodes[n];
    if (tn.parent < 0 || static_cast<std::size_t>(tn.parent) >= n) throw std::invalid_argument("truth_document: nodes must follow their parent");
    Cluster c;
    c.id = n;
    c.level = tn.level;
    c.parent = static_cast<ClusterId>(tn.parent);
    c.nnz = 1;
    for (std::size_t m = 0; m < 3; ++m) {
      for (Index i : proj[n][m]) c.supports[m].push_back({i, 1.0});
      c.nnz *= c.supports[m].size();
    }
    doc.tree.children[c.parent].push_back(c.id);
    doc.tree.children[c.id];
    doc.labels[c.id] = tn.label;
    doc.tree.nodes.emplace(c.id, std::move(c));
  }
  return doc;
}

GroundTruth truth_from_document(const TreeDocument& doc, std::map<Coord, int> labels) {
  GroundTruth truth;
  const std::size_t count = doc.tree.nodes.empty() ? 1 : doc.tree.nodes.rbegin()->first + 1;
  if (doc.tree.nodes.size() + 1 != count) throw std::runtime_error("truth tree: node ids must be 1..n without gaps");
  truth.nodes.resize(count);
  auto label_of = [&](ClusterId id) {
    auto it = doc.labels.find(id);
    return it == doc.labels.end() ? std::to_string(id) : it->second;
  };
  truth.nodes[0] = {label_of(kRootId), -1, 0};
  for (const auto& [id, c] : doc.tree.nodes) truth.nodes[id] = {label_of(id), static_cast<int>(c.parent), c.level};
  for (const auto& [cell, l] : labels)
    if (l < 0 || static_cast<std::size_t>(l) >= count) throw std::runtime_error("labels refer to node " + std::to_string(l) + " missing from the truth tree");
  truth.labels = std::move(labels);
  return truth;
}

}  // namespace recten
