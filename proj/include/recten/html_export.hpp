#pragma once

#include <string>

#include "recten/tree_document.hpp"

namespace recten {

/// Self-contained page: one nested <details> section per cluster with its
/// level, nnz, termination and the ten strongest indices of each mode.
/// No scripts, stylesheets or links to external resources.
std::string render_html(const TreeDocument& doc);

/// render_html written to `path` through a temporary file and a rename.
void export_html(const TreeDocument& doc, const std::string& path);

}  // namespace recten
