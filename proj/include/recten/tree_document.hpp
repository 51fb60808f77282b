#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "recten/recten.hpp"
#include "recten/synthgen.hpp"

namespace recten {

inline constexpr const char* kToolVersion = "0.1.0";

struct TreeMetadata {
  std::string input;
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  std::uint64_t seed = 0;
  std::string tool_version = kToolVersion;
  /// Omitted from the JSON when empty.
  std::optional<std::string> timestamp;

  friend bool operator==(const TreeMetadata&, const TreeMetadata&) = default;
};

/// Serializable hierarchy: a ClusterTree plus run metadata, optional string
/// keys per mode (from ingestion) and optional node labels (reference trees).
struct TreeDocument {
  TreeMetadata metadata;
  ClusterTree tree;
  /// keys[m][i] names index i of mode m; empty when the input had no names.
  std::array<std::vector<std::string>, 3> keys;
  std::map<ClusterId, std::string> labels;

  friend bool operator==(const TreeDocument&, const TreeDocument&) = default;
};

nlohmann::ordered_json to_json(const TreeDocument& doc);
/// Throws std::runtime_error on schema violations.
TreeDocument tree_document_from_json(const nlohmann::ordered_json& j);

/// Pretty-printed JSON followed by a newline; stable for a given document.
std::string serialize(const TreeDocument& doc);
TreeDocument parse_tree_document(std::string_view text);
TreeDocument read_tree_document_file(const std::string& path);

RecTenParams params_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json params_to_json(const RecTenParams& p);

/// Reference tree as a document: node n is truth node n, supports are the
/// projections of the node's labeled cells (its own and its descendants'),
/// strengths 1, and every node carries its truth label.
TreeDocument truth_document(const GroundTruth& truth, const Dims& dims);

/// Inverse of truth_document's tree part; cell labels come from a labels file.
GroundTruth truth_from_document(const TreeDocument& doc, std::map<Coord, int> labels);

}  // namespace recten
