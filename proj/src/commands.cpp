#include "recten/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "recten/html_export.hpp"
#include "recten/metrics.hpp"
#include "recten/parallel.hpp"
#include "recten/tree_document.hpp"

namespace recten {

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + tmp + " for writing");
    f << content;
    f.flush();
    if (!f) {
      f.close();
      std::remove(tmp.c_str());
      throw std::runtime_error("write failed: " + tmp);
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::remove(tmp.c_str());
    throw std::runtime_error("cannot rename " + tmp + " to " + path + ": " + ec.message());
  }
}

namespace {

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

template <class F>
int guarded(std::ostream& err, const char* name, F&& body) {
  try {
    return body();
  } catch (const UsageError& e) {
    err << "recten " << name << ": " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "recten " << name << ": error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) return 0.0;
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

SyntheticTensor generate(const std::string& kind, std::uint64_t seed) {
  if (kind == "hier") return gen_hier(seed);
  if (kind == "flat") return gen_flat(FlatParams{}, seed);
  throw UsageError("unknown generator '" + kind + "' (expected hier or flat)");
}

}  // namespace

int cmd_decompose(const DecomposeOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, "decompose", [&] {
    if (opts.input_events.empty() == opts.input_tensor.empty())
      throw UsageError("exactly one of --input-events or --input-tensor is required");
    if (opts.output.empty()) throw UsageError("--output is required");
    try {
      opts.params.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }

    TreeDocument doc;
    SparseTensor3 t;
    if (!opts.input_events.empty()) {
      std::size_t skipped = 0;
      const auto events = parse_events_file(opts.input_events, opts.schema, &skipped);
      if (skipped) err << "recten decompose: skipped " << skipped << " malformed rows\n";
      auto et = build_tensor(events);
      t = std::move(et.tensor);
      doc.keys[0] = et.actors.keys();
      doc.keys[1] = et.objects.keys();
      // Weeks have no string keys; t_min anchors week 0.
      doc.metadata.input = "events:" + std::filesystem::path(opts.input_events).filename().string() +
                           " t_min=" + std::to_string(et.t_min);
    } else {
      t = read_tensor_file(opts.input_tensor);
      doc.metadata.input = "tensor:" + std::filesystem::path(opts.input_tensor).filename().string();
    }
    if (t.empty()) throw std::runtime_error("input tensor has no entries");

    doc.tree = recten_run(t, opts.params);
    doc.metadata.params = params_to_json(opts.params);
    doc.metadata.seed = opts.params.seed;
    if (opts.timestamps) doc.metadata.timestamp = utc_now();
    write_file_atomic(opts.output, serialize(doc));
    if (!opts.html.empty()) export_html(doc, opts.html);

    const auto counts = doc.tree.level_counts();
    out << "clusters=" << doc.tree.nodes.size() << "\nlevels=" << counts.size() << "\n";
    for (std::size_t l = 0; l < counts.size(); ++l) out << "level_" << (l + 1) << "=" << counts[l] << "\n";
    return kExitOk;
  });
}

int cmd_synth(const SynthOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, "synth", [&] {
    if (opts.kind != "flat" && opts.kind != "hier") throw UsageError("synth needs 'flat' or 'hier'");
    if (opts.out.empty()) throw UsageError("--out is required");
    if (!(opts.noise >= 0.0 && opts.noise < 100.0)) throw UsageError("--noise must be in [0, 100)");
    SyntheticTensor s;
    try {
      s = opts.kind == "flat" ? gen_flat(opts.flat, opts.seed) : gen_hier(opts.hier, opts.seed);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    if (opts.noise > 0.0) s.tensor = add_noise(s.tensor, opts.noise, opts.seed);

    std::ostringstream ts;
    write_tensor(ts, s.tensor);
    write_file_atomic(opts.out, ts.str());
    if (!opts.labels.empty()) {
      std::ostringstream ls;
      write_labels(ls, s.truth);
      write_file_atomic(opts.labels, ls.str());
    }
    if (!opts.truth_tree.empty()) {
      TreeDocument doc = truth_document(s.truth, s.tensor.dims());
      doc.metadata.input = "synth:" + opts.kind;
      doc.metadata.seed = opts.seed;
      doc.metadata.params = {{"noise", opts.noise}};
      write_file_atomic(opts.truth_tree, serialize(doc));
    }
    out << "nnz=" << s.tensor.nnz() << "\nlabeled=" << s.truth.labels.size() << "\ntruth_nodes=" << s.truth.nodes.size()
        << "\n";
    return kExitOk;
  });
}

int cmd_eval(const EvalOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, "eval", [&] {
    if (opts.tree.empty() || opts.labels.empty()) throw UsageError("--tree and --labels are required");
    std::set<std::string> wanted;
    for (const auto& m : opts.metrics) {
      if (m != "tp" && m != "ri" && m != "ted") throw UsageError("unknown metric '" + m + "'");
      wanted.insert(m);
    }
    if (wanted.empty()) throw UsageError("no metrics requested");
    if (wanted.count("ted") && opts.truth_tree.empty()) throw UsageError("ted needs --truth-tree");

    const TreeDocument doc = read_tree_document_file(opts.tree);
    auto labels = read_labels_file(opts.labels);
    const Dims& dims = doc.tree.root_dims;
    for (const auto& [c, l] : labels)
      if (c[0] >= dims[0] || c[1] >= dims[1] || c[2] >= dims[2])
        throw std::runtime_error("labeled cell lies outside the tree's tensor dimensions");
    std::vector<Coord> extra;
    if (!opts.include_unlabeled_from.empty()) {
      const auto t = read_tensor_file(opts.include_unlabeled_from);
      if (t.dims() != dims) throw std::runtime_error("tensor dimensions differ from the tree's");
      for (const auto& e : t.entries()) extra.push_back(e.idx);
    }

    Evaluation ev;
    if (wanted.count("tp") || wanted.count("ri")) ev = evaluate_partition(doc.tree, labels, extra);
    if (wanted.count("ted")) {
      const TreeDocument truth_doc = read_tree_document_file(opts.truth_tree);
      const GroundTruth truth = truth_from_document(truth_doc, labels);
      ev.ted = tree_edit_distance(tree_for_ted(doc.tree, truth), truth_tree(truth));
    }

    std::string header, row;
    for (const char* m : {"tp", "ri", "ted"}) {
      if (!wanted.count(m)) continue;
      const std::string v = std::string(m) == "ted" ? std::to_string(ev.ted) : format_double(std::string(m) == "tp" ? ev.tp : ev.ri);
      out << m << "=" << v << "\n";
      header += (header.empty() ? "" : ",") + std::string(m);
      row += (row.empty() ? "" : ",") + v;
    }
    if (wanted.count("tp") || wanted.count("ri")) out << "cells=" << ev.cells << "\n";
    if (!opts.csv.empty()) write_file_atomic(opts.csv, header + "\n" + row + "\n");
    return kExitOk;
  });
}

std::vector<double> parse_grid(const std::string& spec) {
  double lo, hi, step;
  char c1, c2;
  std::istringstream in(spec);
  std::string rest;
  if (!(in >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':' || (in >> rest))
    throw UsageError("grid must look like lo:hi:step");
  if (!(step > 0.0) || !(hi >= lo) || !std::isfinite(lo) || !std::isfinite(hi)) throw UsageError("empty grid '" + spec + "'");
  std::vector<double> out;
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
  for (std::size_t i = 0; i <= n; ++i) out.push_back(lo + static_cast<double>(i) * step);
  return out;
}

std::vector<SweepRow> run_sweep(const SweepOptions& opts) {
  static const std::set<std::string> params{"epsilon", "k", "lambda", "noise"};
  if (!params.count(opts.param)) throw UsageError("--param must be one of epsilon, k, lambda, noise");
  if (opts.repeats < 1) throw UsageError("--repeats must be at least 1");
  const auto grid = parse_grid(opts.grid);

  // One data set per repeat, shared by every grid value.
  std::vector<SyntheticTensor> data(static_cast<std::size_t>(opts.repeats));
  std::vector<std::uint64_t> seeds(data.size());
  for (std::size_t r = 0; r < data.size(); ++r) {
    seeds[r] = derive_seed(opts.params.seed, {0x7377656570, r});
    data[r] = generate(opts.generator, seeds[r]);
  }

  const std::size_t tasks = grid.size() * data.size();
  std::vector<SweepRow> rows(tasks);
  parallel_for(tasks, [&](std::size_t n) {
    const std::size_t g = n / data.size(), r = n % data.size();
    RecTenParams p = opts.params;
    p.seed = seeds[r];
    double noise = opts.noise;
    if (opts.param == "epsilon") p.epsilon = grid[g];
    if (opts.param == "k") p.k = grid[g];
    if (opts.param == "lambda") p.lambda = grid[g];
    if (opts.param == "noise") noise = grid[g];
    p.validate();
    const SparseTensor3 t = noise > 0.0 ? add_noise(data[r].tensor, noise, seeds[r]) : data[r].tensor;
    const ClusterTree tree = recten_run(t, p);
    const Evaluation ev = evaluate(tree, data[r].truth);
    rows[n] = {grid[g], seeds[r], ev.tp, ev.ri, ev.ted, tree.level_counts()};
  });
  return rows;
}

std::vector<SweepMedian> sweep_medians(const std::vector<SweepRow>& rows) {
  std::vector<SweepMedian> out;
  std::vector<double> values;
  for (const auto& r : rows)
    if (std::find(values.begin(), values.end(), r.value) == values.end()) values.push_back(r.value);
  for (double v : values) {
    std::vector<double> tp, ri, ted;
    for (const auto& r : rows)
      if (r.value == v) tp.push_back(r.tp), ri.push_back(r.ri), ted.push_back(static_cast<double>(r.ted));
    out.push_back({v, median(tp), median(ri), median(ted)});
  }
  return out;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::size_t depth = 0;
  for (const auto& r : rows) depth = std::max(depth, r.level_counts.size());
  std::ostringstream s;
  s << "param_value,seed,tp,ri,ted";
  for (std::size_t l = 0; l < depth; ++l) s << ",level_" << (l + 1);
  s << "\n";
  for (const auto& r : rows) {
    s << format_double(r.value) << "," << r.seed << "," << format_double(r.tp) << "," << format_double(r.ri) << "," << r.ted;
    for (std::size_t l = 0; l < depth; ++l) s << "," << (l < r.level_counts.size() ? r.level_counts[l] : 0);
    s << "\n";
  }
  return s.str();
}

std::string medians_csv(const std::vector<SweepMedian>& medians) {
  std::ostringstream s;
  s << "param_value,median_tp,median_ri,median_ted\n";
  for (const auto& m : medians)
    s << format_double(m.value) << "," << format_double(m.tp) << "," << format_double(m.ri) << "," << format_double(m.ted) << "\n";
  return s.str();
}

int cmd_sweep(const SweepOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, "sweep", [&] {
    if (opts.generator != "hier" && opts.generator != "flat") throw UsageError("--generator must be hier or flat");
    try {
      opts.params.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    const auto rows = run_sweep(opts);
    const auto med = sweep_medians(rows);
    if (!opts.output.empty()) write_file_atomic(opts.output, sweep_csv(rows));
    else out << sweep_csv(rows);
    if (!opts.medians.empty()) write_file_atomic(opts.medians, medians_csv(med));
    else out << medians_csv(med);
    return kExitOk;
  });
}

}  // namespace recten
