#include "recten/html_export.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "recten/commands.hpp"

namespace recten {

namespace {

constexpr std::size_t kTopIndices = 10;
constexpr const char* kModeNames[3] = {"mode 1", "mode 2", "mode 3"};

std::string escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

void render_modes(std::ostream& out, const TreeDocument& doc, const Cluster& c, const std::string& pad) {
  for (std::size_t m = 0; m < 3; ++m) {
    std::vector<SupportEntry> top = c.supports[m];
    std::stable_sort(top.begin(), top.end(), [](const auto& a, const auto& b) { return a.strength > b.strength; });
    if (top.size() > kTopIndices) top.resize(kTopIndices);
    out << pad << "<p>" << kModeNames[m] << " (" << c.supports[m].size() << " indices): ";
    for (std::size_t n = 0; n < top.size(); ++n) {
      if (n) out << ", ";
      const auto& keys = doc.keys[m];
      const std::string name = top[n].index < keys.size() && !keys[top[n].index].empty() ? keys[top[n].index]
                                                                                          : std::to_string(top[n].index);
      out << "<code>" << escape(name) << "</code> " << fmt(top[n].strength);
    }
    out << "</p>\n";
  }
}

void render_node(std::ostream& out, const TreeDocument& doc, ClusterId id, int depth) {
  const std::string pad(static_cast<std::size_t>(depth) * 2, ' ');
  const auto& t = doc.tree;
  out << pad << "<details" << (depth == 0 ? " open" : "") << ">\n";
  if (id == kRootId) {
    out << pad << "  <summary>input tensor " << t.root_dims[0] << " x " << t.root_dims[1] << " x " << t.root_dims[2]
        << ", nnz " << t.root_nnz << ", " << t.children_of(kRootId).size() << " clusters</summary>\n";
  } else {
    const Cluster& c = t.nodes.at(id);
    out << pad << "  <summary>cluster " << id;
    if (auto it = doc.labels.find(id); it != doc.labels.end()) out << " [" << escape(it->second) << "]";
    out << ": level " << c.level << ", nnz " << c.nnz << ", termination " << to_string(c.termination) << "</summary>\n";
    render_modes(out, doc, c, pad + "  ");
  }
  for (ClusterId kid : t.children_of(id)) render_node(out, doc, kid, depth + 1);
  out << pad << "</details>\n";
}

}  // namespace

std::string render_html(const TreeDocument& doc) {
  std::ostringstream out;
  out << "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>RecTen cluster tree</title>\n"
      << "<style>\nbody { font-family: sans-serif; }\ndetails { margin-left: 1.2em; border-left: 1px solid #ccc; "
         "padding-left: 0.5em; }\nsummary { cursor: pointer; }\np { margin: 0.2em 0 0.2em 1em; font-size: 90%; }\n"
      << "</style>\n</head>\n<body>\n<h1>Cluster tree</h1>\n<p>input: " << escape(doc.metadata.input)
      << ", seed " << doc.metadata.seed << ", version " << escape(doc.metadata.tool_version) << "</p>\n";
  render_node(out, doc, kRootId, 0);
  out << "</body>\n</html>\n";
  return out.str();
}

void export_html(const TreeDocument& doc, const std::string& path) { write_file_atomic(path, render_html(doc)); }

}  // namespace recten
