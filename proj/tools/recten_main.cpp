// recten command-line front end: decompose | synth | eval | sweep.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "recten/commands.hpp"

using namespace recten;

namespace {

void add_run_params(CLI::App* app, RecTenParams& p) {
  app->add_option("--epsilon", p.epsilon, "Percent of cluster entries zeroed before recursing")->capture_default_str();
  app->add_option("--k", p.k, "Minimum cluster size, percent of the sibling average")->capture_default_str();
  app->add_option("--lambda", p.lambda, "L1 penalty weight")->capture_default_str();
  app->add_option("--rank-max", p.r_max, "Largest rank tried by the rank estimate")->capture_default_str();
  app->add_option("--cc-threshold", p.cc_threshold, "Core consistency needed to accept a rank")->capture_default_str();
  app->add_option("--seed", p.seed, "Random seed")->capture_default_str();
  app->add_option("--max-depth", p.max_depth, "Deepest level expanded")->capture_default_str();
  app->add_option("--max-sweeps", p.max_sweeps, "Solver sweep cap")->capture_default_str();
  app->add_option("--rel-tol", p.rel_tol, "Solver relative convergence tolerance")->capture_default_str();
  app->add_option_function<std::string>(
         "--next-level", [&p](const std::string& s) { p.next_level = next_level_from_string(s); },
         "Tensor recursed into: restricted | rank_one")
      ->check(CLI::IsMember({"restricted", "rank_one"}))
      ->default_str("rank_one");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RecTen: recursive hierarchical clustering of sparse 3-mode tensors"};
  app.require_subcommand(1);

  DecomposeOptions dec;
  auto* d = app.add_subcommand("decompose", "Build the cluster tree of a tensor or event log");
  d->add_option("--input-events", dec.input_events, "Delimited event file with a header row");
  d->add_option("--input-tensor", dec.input_tensor, "Tensor text file");
  d->add_option("--output", dec.output, "Tree JSON output path");
  d->add_option("--html", dec.html, "Optional HTML tree view");
  d->add_option("--actor-col", dec.schema.actor_col)->capture_default_str();
  d->add_option("--object-col", dec.schema.object_col)->capture_default_str();
  d->add_option("--time-col", dec.schema.time_col)->capture_default_str();
  d->add_option("--weight-col", dec.schema.weight_col, "Optional weight column");
  d->add_option("--delimiter", dec.schema.delimiter)->capture_default_str();
  d->add_flag("--skip-bad", dec.schema.skip_bad, "Skip malformed rows instead of failing");
  d->add_flag("!--no-timestamps", dec.timestamps, "Leave the run timestamp out of the metadata");
  add_run_params(d, dec.params);

  SynthOptions syn;
  auto* s = app.add_subcommand("synth", "Generate a synthetic tensor with ground truth");
  s->add_option("kind", syn.kind, "flat | hier")->required()->check(CLI::IsMember({"flat", "hier"}));
  s->add_option("--out", syn.out, "Tensor output path");
  s->add_option("--labels", syn.labels, "Cell label output path");
  s->add_option("--truth-tree", syn.truth_tree, "Reference tree JSON output path");
  s->add_option("--noise", syn.noise, "Percent of cells per slice receiving |N(0,1)| noise")->capture_default_str();
  s->add_option("--seed", syn.seed)->capture_default_str();
  s->add_option("--dispersion", syn.flat.dispersion, "flat: Manhattan radius")->capture_default_str();
  s->add_option("--concentration", syn.flat.concentration, "flat: cells per pattern")->capture_default_str();
  s->add_option("--overlap", syn.flat.overlap_fraction, "flat: shared fraction of overlapping pairs")->capture_default_str();
  s->add_option_function<std::string>(
       "--initiator",
       [&syn](const std::string& v) {
         syn.hier.initiator = v == "diagonal" ? HierParams::Initiator::diagonal : HierParams::Initiator::block;
       },
       "hier: block | diagonal")
      ->check(CLI::IsMember({"block", "diagonal"}))
      ->default_str("block");
  s->add_option("--leaf-density", syn.hier.leaf_density)->capture_default_str();
  s->add_option("--background-weight", syn.hier.background_weight)->capture_default_str();
  s->add_option("--leaf-jitter", syn.hier.leaf_jitter)->capture_default_str();

  EvalOptions ev;
  auto* e = app.add_subcommand("eval", "Score a tree against ground-truth labels");
  e->add_option("--tree", ev.tree, "Tree JSON");
  e->add_option("--labels", ev.labels, "Cell labels");
  e->add_option("--truth-tree", ev.truth_tree, "Reference tree JSON (needed for ted)");
  e->add_option("--metrics", ev.metrics, "Comma-separated subset of tp,ri,ted")->delimiter(',');
  e->add_option("--csv", ev.csv, "Also write the values as one CSV row");
  e->add_option("--include-unlabeled", ev.include_unlabeled_from,
                "Tensor whose unlabeled cells join the universe as their own class");

  SweepOptions sw;
  auto* w = app.add_subcommand("sweep", "Parameter sensitivity sweep on synthetic data");
  w->add_option("--param", sw.param, "epsilon | k | lambda | noise");
  w->add_option("--grid", sw.grid, "lo:hi:step");
  w->add_option("--repeats", sw.repeats)->capture_default_str();
  w->add_option("--generator", sw.generator, "hier | flat")->capture_default_str();
  w->add_option("--noise", sw.noise, "Noise percent when noise is not the swept parameter")->capture_default_str();
  w->add_option("--output", sw.output, "Per-run CSV (stdout if omitted)");
  w->add_option("--medians", sw.medians, "Per-value medians CSV (stdout if omitted)");
  add_run_params(w, sw.params);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const std::exception& err) {
    std::cerr << "recten: " << err.what() << "\n";
    return kExitUsage;
  }

  if (d->parsed()) return cmd_decompose(dec, std::cout, std::cerr);
  if (s->parsed()) return cmd_synth(syn, std::cout, std::cerr);
  if (e->parsed()) return cmd_eval(ev, std::cout, std::cerr);
  if (w->parsed()) return cmd_sweep(sw, std::cout, std::cerr);
  return kExitUsage;
}
