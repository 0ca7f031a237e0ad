#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "simrep/analysis.hpp"
#include "simrep/clustering.hpp"
#include "simrep/config.hpp"
#include "simrep/container.hpp"
#include "simrep/embedding.hpp"
#include "simrep/errors.hpp"
#include "simrep/model_family.hpp"
#include "simrep/nn.hpp"
#include "simrep/report.hpp"
#include "simrep/rng.hpp"
#include "simrep/testdata.hpp"

namespace simrep {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kGradTolerance = 1e-4;

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string format = "both";
  std::string dataset;
  std::string model;
  std::optional<std::size_t> threads;
};

// Collects artifacts for the subcommand manifest.
class Run {
 public:
  Run(std::string subcommand, const Options& opts) : subcommand_(std::move(subcommand)), opts_(opts) {}

  RunConfig& config() {
    if (!config_) {
      if (opts_.config.empty()) throw ConfigError(subcommand_ + ": --config is required");
      std::ifstream in(opts_.config);
      if (!in) throw ConfigError("cannot open config file " + opts_.config);
      json doc;
      try {
        doc = json::parse(in);
      } catch (const json::exception& e) {
        throw ConfigError("config " + opts_.config + " is not valid JSON: " + e.what());
      }
      if (opts_.seed) doc["seed"] = *opts_.seed;
      config_ = parse_run_config(doc, fs::path(opts_.config).parent_path());
      if (opts_.threads) config_->threads = *opts_.threads;
    }
    return *config_;
  }
  bool has_config() const { return !opts_.config.empty(); }

  fs::path out_dir() {
    if (!opts_.out.empty()) return opts_.out;
    if (has_config() && !config().output_dir.empty()) return config().output_dir;
    throw ConfigError(subcommand_ + ": no output directory (use --out or output_dir)");
  }
  fs::path dataset_path() { return opts_.dataset.empty() ? out_dir() / "dataset.simrep" : fs::path(opts_.dataset); }
  fs::path model_path() { return opts_.model.empty() ? out_dir() / "model.simrep" : fs::path(opts_.model); }
  bool want_csv() const { return opts_.format != "svg"; }
  bool want_svg() const { return opts_.format != "csv"; }
  std::size_t threads() { return has_config() ? config().threads : opts_.threads.value_or(0); }

  void write(const std::string& name, const std::string& bytes) {
    write_file_atomic(out_dir() / name, bytes);
    artifacts_.push_back({{"file", name}, {"bytes", bytes.size()}, {"fnv1a64", hex64(fnv1a64(bytes))}});
  }
  void csv(const std::string& name, const CsvTable& table) {
    if (want_csv()) write(name, to_csv(table));
  }
  void svg(const std::string& name, const std::string& text) {
    if (want_svg()) write(name, text);
  }
  void seed(const std::string& key, json value) { seeds_[key] = std::move(value); }

  void finish(std::ostream& out, const std::string& summary) {
    json manifest = {{"subcommand", subcommand_}, {"summary", summary}, {"seeds", seeds_}, {"artifacts", artifacts_}};
    if (has_config()) manifest["config_hash"] = config().hash();
    write_file_atomic(out_dir() / (subcommand_ + ".manifest.json"), manifest.dump(2) + "\n");
    out << subcommand_ << ": " << summary << '\n';
  }

 private:
  std::string subcommand_;
  const Options& opts_;
  std::optional<RunConfig> config_;
  json artifacts_ = json::array();
  json seeds_ = json::object();
};

std::string fmt(double v) { return format_number(v); }

std::vector<std::string> member_columns(std::size_t members) {
  std::vector<std::string> cols;
  for (std::size_t k = 0; k < members; ++k) cols.push_back("member_" + std::to_string(k));
  return cols;
}

void append_members(std::vector<std::string>& row, const DistanceSummary& s, std::size_t members) {
  for (std::size_t k = 0; k < members; ++k) row.push_back(k < s.per_member.size() ? fmt(s.per_member[k]) : "");
}

DatasetContainer testdata_container(const TestData& data, TestShape shape, std::uint64_t seed) {
  DatasetContainer c;
  c.shape_tag = ShapeTag::kVector;
  c.dims = {9};
  c.parameter_names = {"x", "y"};
  c.samples = data.lifted;
  c.meta = json{{"family", "testdata"}, {"shape", shape == TestShape::kBlobs ? "blobs" : "rings"}, {"seed", seed}}.dump();
  return c;
}

CsvTable testdata_points(const TestData& data) {
  CsvTable t{{"index", "x", "y", "label"}, {}};
  for (std::size_t i = 0; i < data.labels.size(); ++i)
    t.add({std::to_string(i), fmt(data.points[2 * i]), fmt(data.points[2 * i + 1]), std::to_string(data.labels[i])});
  return t;
}

int cmd_testdata(Run& run, const Options& opts, std::ostream& out) {
  TestdataRequest req;
  std::uint64_t seed = 0;
  if (run.has_config()) {
    req = run.config().testdata;
    seed = run.config().seed;
  } else if (opts.seed) {
    seed = *opts.seed;
  } else {
    throw ConfigError("testdata: give --config or an explicit --seed");
  }
  const auto data = gen_testdata(req.shape, req.n, seed);
  run.seed("testdata", seed);
  run.write("dataset.simrep", encode_dataset(testdata_container(data, req.shape, seed)));
  run.csv("testdata_points.csv", testdata_points(data));
  run.finish(out, std::to_string(req.n) + " test points (" + (req.shape == TestShape::kBlobs ? "blobs" : "rings") +
                      "), seed " + std::to_string(seed));
  return kExitOk;
}

int cmd_generate(Run& run, const Options& opts, std::ostream& out) {
  auto& cfg = run.config();
  if (cfg.testdata_family) return cmd_testdata(run, opts, out);
  const auto family = cfg.make_family();
  const auto ranges = cfg.resolved_ranges(*family);
  const auto result = monte_carlo(*family, ranges, cfg.samples, cfg.seed, cfg.replicates, cfg.threads);
  if (result.samples.empty()) throw SimulationError("generate: every simulation failed");

  json failures = json::array();
  for (const auto& f : result.failures)
    failures.push_back({{"sample", f.sample}, {"replicate", f.replicate}, {"reason", f.reason}});
  DatasetContainer c;
  c.shape_tag = family->shape_tag();
  c.dims = result.samples.front().dims;
  c.parameter_names = family->parameter_names();
  c.samples = result.samples;
  c.meta = json{{"family", std::string(to_string(family->kind()))},
                {"seed", cfg.seed},
                {"requested", result.requested},
                {"failures", failures}}
               .dump();
  run.seed("monte_carlo", cfg.seed);
  run.write("dataset.simrep", encode_dataset(c));

  CsvTable fail_table{{"sample", "replicate", "reason"}, {}};
  for (const auto& f : result.failures) fail_table.add({std::to_string(f.sample), std::to_string(f.replicate), f.reason});
  run.csv("generate_failures.csv", fail_table);
  run.finish(out, std::to_string(result.samples.size()) + " of " + std::to_string(result.requested) + " " +
                      std::string(to_string(family->kind())) + " simulations, seed " + std::to_string(cfg.seed));
  return kExitOk;
}

int cmd_train(Run& run, std::ostream& out) {
  auto& cfg = run.config();
  const std::string dataset_bytes = read_file(run.dataset_path());
  const auto data = decode_dataset(dataset_bytes);
  if (data.samples.size() < 2) throw InputError("train: dataset needs at least 2 samples");
  const auto spec = cfg.encoder ? *cfg.encoder : default_encoder(data.shape_tag, data.dims, cfg.output_dim);
  if (spec.input_shape != data.dims)
    throw ConfigError("train: encoder input " + nn::shape_string(spec.input_shape) + " does not match dataset " +
                      nn::shape_string(data.dims));
  const auto policy = policy_from_json(cfg.augmentation, data.shape_tag);
  auto train = cfg.train;
  train.threads = cfg.threads;
  auto model = train_ensemble(data.samples, spec, train, policy);
  model.provenance = json{{"config_hash", cfg.hash()},
                          {"dataset_fnv1a64", hex64(fnv1a64(dataset_bytes))},
                          {"train", train_config_to_json(train)},
                          {"augmentation", policy_to_json(policy)}}
                         .dump();
  run.seed("train", train.base_seed);
  run.seed("members", model.member_seeds);
  run.write("model.simrep", encode_model(model));

  CsvTable loss{{"member", "epoch", "loss"}, {}};
  for (std::size_t m = 0; m < model.loss_curves.size(); ++m)
    for (std::size_t e = 0; e < model.loss_curves[m].size(); ++e)
      loss.add({std::to_string(m), std::to_string(e), fmt(model.loss_curves[m][e])});
  run.csv("train_loss.csv", loss);
  double last = 0.0;
  for (const auto& curve : model.loss_curves) last += curve.back() / static_cast<double>(model.loss_curves.size());
  run.finish(out, std::to_string(model.size()) + " members trained on " + std::to_string(data.samples.size()) +
                      " samples, final mean loss " + fmt(last));
  return kExitOk;
}

int cmd_consensus(Run& run, std::ostream& out) {
  auto& cfg = run.config();
  const auto model = load_model(run.model_path());
  const fs::path data_path = cfg.consensus.dataset.empty() ? run.dataset_path() : fs::path(cfg.consensus.dataset);
  const auto data = load_dataset(data_path);
  std::vector<std::size_t> sizes;
  for (const auto n : cfg.consensus.sizes)
    if (n < data.samples.size()) sizes.push_back(n);
  if (sizes.empty()) throw ConfigError("consensus: every neighborhood size is >= the number of points");
  const auto reports = consensus_ensemble(model, data.samples, sizes, cfg.threads);

  CsvTable table{{"n", "ensemble_score", "random_baseline", "ratio", "points", "members"}, {}};
  CsvTable pairs{{"n", "member_a", "member_b", "score"}, {}};
  Series score{"ensemble consensus", {}, {}, {}, "#1f77b4"};
  Series baseline{"random baseline n/(N-1)", {}, {}, {}, "#7f7f7f", true};
  for (const auto& r : reports) {
    table.add({std::to_string(r.n), fmt(r.ensemble_score), fmt(r.random_baseline),
               fmt(r.ensemble_score / r.random_baseline), std::to_string(r.points), std::to_string(r.members)});
    for (std::size_t a = 0; a < r.members; ++a)
      for (std::size_t b = a + 1; b < r.members; ++b)
        pairs.add({std::to_string(r.n), std::to_string(a), std::to_string(b), fmt(r.score(a, b))});
    score.x.push_back(static_cast<double>(r.n));
    score.y.push_back(r.ensemble_score);
    baseline.x.push_back(static_cast<double>(r.n));
    baseline.y.push_back(r.random_baseline);
  }
  run.csv("consensus.csv", table);
  run.csv("consensus_pairs.csv", pairs);
  LineChart chart;
  chart.title = "Consensus score";
  chart.x_label = "neighborhood size n";
  chart.y_label = "score";
  chart.series = {score, baseline};
  run.svg("consensus.svg", render_svg(chart));
  std::string summary = "consensus over " + std::to_string(data.samples.size()) + " points:";
  for (const auto& r : reports) summary += " n=" + std::to_string(r.n) + " " + fmt(r.ensemble_score);
  run.finish(out, summary);
  return kExitOk;
}

void emit_sweep(Run& run, const SweepResult& sweep, std::size_t members, bool flux) {
  auto header = std::vector<std::string>{"value", "is_base", "ok", "mean", "std", "pairs_per_member", "failure"};
  for (const auto& c : member_columns(members)) header.push_back(c);
  CsvTable table{header, {}};
  Series line{"mean distance", {}, {}, {}, "#1f77b4"};
  std::optional<std::size_t> highlight;
  for (std::size_t i = 0; i < sweep.points.size(); ++i) {
    const auto& p = sweep.points[i];
    std::vector<std::string> row{fmt(p.value), i == sweep.base_index ? "1" : "0", p.ok ? "1" : "0",
                                 p.ok ? fmt(p.summary.mean) : "", p.ok ? fmt(p.summary.std) : "",
                                 std::to_string(p.pairs_per_member), p.failure};
    append_members(row, p.summary, members);
    table.add(std::move(row));
    if (!p.ok) continue;
    if (i == sweep.base_index) highlight = line.x.size();
    line.x.push_back(p.value);
    line.y.push_back(p.summary.mean);
    line.err.push_back(p.summary.std);
  }
  run.csv("sweep.csv", table);
  if (flux) {
    CsvTable profile{{"parameter", "base_value", "plateau_points", "non_decreasing"}, {}};
    profile.add({sweep.parameter, fmt(sweep.base_value), std::to_string(sweep.plateau_points),
                 sweep.non_decreasing ? "1" : "0"});
    run.csv("sweep_profile.csv", profile);
  }
  // Plot in ascending value order; the CSV keeps the requested order.
  std::vector<std::size_t> order(line.x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return line.x[a] < line.x[b]; });
  Series sorted = line;
  for (std::size_t k = 0; k < order.size(); ++k) {
    sorted.x[k] = line.x[order[k]];
    sorted.y[k] = line.y[order[k]];
    sorted.err[k] = line.err[order[k]];
    if (highlight && *highlight == order[k]) highlight = k;
  }
  LineChart chart;
  chart.title = "Distance from base output: " + sweep.parameter;
  chart.x_label = sweep.parameter;
  chart.y_label = "ensemble distance";
  chart.series = {sorted};
  chart.highlight = highlight;
  run.svg("sweep.svg", render_svg(chart));
}

int cmd_sweep(Run& run, std::ostream& out) {
  auto& cfg = run.config();
  if (!cfg.sweep) throw ConfigError("sweep: the config has no 'sweep' section");
  if (cfg.testdata_family) throw ConfigError("sweep: not available for the testdata family");
  const auto model = load_model(run.model_path());
  const auto family = cfg.make_family();
  const auto& req = *cfg.sweep;
  SweepResult sweep;
  if (family->kind() == FamilyKind::kFba) {
    const auto& net = static_cast<const FbaFamily&>(*family).network();
    std::string reaction = req.target.starts_with("lb:") ? req.target.substr(3) : req.target;
    sweep = flux_bound_sweep(net, model, net.reaction_index(reaction), req.values, cfg.threads);
  } else {
    const std::size_t index = family->parameter_index(req.target);
    const auto base = family->base_parameters();
    auto values = req.values;
    if (req.factors)
      for (auto& v : values) v *= base[index];
    sweep = parameter_sweep(*family, model, base, index, values, req.replicates, cfg.seed, cfg.threads);
  }
  run.seed("sweep", cfg.seed);
  emit_sweep(run, sweep, model.size(), family->kind() == FamilyKind::kFba);
  std::size_t ok = 0;
  double peak = 0.0;
  for (const auto& p : sweep.points)
    if (p.ok) {
      ++ok;
      peak = std::max(peak, p.summary.mean);
    }
  std::string summary = sweep.parameter + ": " + std::to_string(ok) + "/" + std::to_string(sweep.points.size()) +
                        " points, max mean distance " + fmt(peak);
  if (family->kind() == FamilyKind::kFba) summary += ", plateau " + std::to_string(sweep.plateau_points);
  run.finish(out, summary);
  return kExitOk;
}

int cmd_knockout(Run& run, std::ostream& out) {
  auto& cfg = run.config();
  if (cfg.testdata_family || cfg.family != FamilyKind::kFba) throw ConfigError("knockout: needs an fba config");
  const auto model = load_model(run.model_path());
  const auto family = cfg.make_family();
  const auto& net = static_cast<const FbaFamily&>(*family).network();
  const auto result = knockout_sweep(net, model, cfg.threads);

  auto header =
      std::vector<std::string>{"reaction", "subsystem", "status", "base_flux", "identical_to_base", "mean", "std"};
  for (const auto& c : member_columns(model.size())) header.push_back(c);
  CsvTable reactions{header, {}};
  for (const auto& e : result.reactions) {
    std::vector<std::string> row{e.name, e.subsystem, to_string(e.status), fmt(e.base_flux),
                                 e.identical_to_base ? "1" : "0", e.feasible() ? fmt(e.summary.mean) : "",
                                 e.feasible() ? fmt(e.summary.std) : ""};
    append_members(row, e.summary, model.size());
    reactions.add(std::move(row));
  }
  const auto ranking = result.ranking();
  CsvTable subsystems{{"subsystem", "reactions", "feasible", "excluded", "mean", "std", "rank"}, {}};
  BarChart chart{"Knockout distance by subsystem", "mean ensemble distance", {}, {"mean"}, {{}}, {{}}};
  for (const auto& s : result.subsystems) {
    const auto it = std::find(ranking.begin(), ranking.end(), s.subsystem);
    subsystems.add({s.subsystem, std::to_string(s.reactions), std::to_string(s.feasible), s.excluded ? "1" : "0",
                    s.excluded ? "" : fmt(s.mean), s.excluded ? "" : fmt(s.std),
                    it == ranking.end() ? "" : std::to_string(it - ranking.begin() + 1)});
    if (s.excluded) continue;
    chart.labels.push_back(s.subsystem);
    chart.values[0].push_back(s.mean);
    chart.errors[0].push_back(s.std);
  }
  run.csv("knockout_reactions.csv", reactions);
  run.csv("knockout_subsystems.csv", subsystems);
  run.svg("knockout.svg", render_svg(chart));
  std::size_t infeasible = 0;
  for (const auto& e : result.reactions) infeasible += e.feasible() ? 0 : 1;
  run.finish(out, std::to_string(result.reactions.size()) + " knockouts (" + std::to_string(infeasible) +
                      " infeasible), top subsystem " + (ranking.empty() ? "none" : ranking.front()));
  return kExitOk;
}

int cmd_sensitivity(Run& run, std::ostream& out) {
  auto& cfg = run.config();
  if (cfg.testdata_family) throw ConfigError("sensitivity: not available for the testdata family");
  const auto model = load_model(run.model_path());
  const auto family = cfg.make_family();
  SensitivityOptions opts;
  opts.delta = cfg.sensitivity.delta;
  opts.relative = cfg.sensitivity.relative;
  opts.replicates = cfg.sensitivity.replicates;
  opts.seed = cfg.seed;
  opts.threads = cfg.threads;
  const auto result = local_sensitivity(*family, model, family->base_parameters(), final_values, opts);

  CsvTable table{{"parameter", "ok", "projected_mean", "projected_std", "specified", "projected_normalized",
                  "specified_normalized", "projected_rank", "specified_rank", "failure"},
                 {}};
  BarChart chart{"Local sensitivity (+" + fmt(result.delta * 100) + "%)", "normalized sensitivity", {},
                 {"projected", "specified"}, {{}, {}}, {}};
  for (const auto& e : result.entries) {
    table.add({e.parameter, e.ok ? "1" : "0", fmt(e.projected.mean), fmt(e.projected.std), fmt(e.specified),
               fmt(e.projected_normalized), fmt(e.specified_normalized), std::to_string(e.projected_rank),
               std::to_string(e.specified_rank), e.failure});
    chart.labels.push_back(e.parameter);
    chart.values[0].push_back(e.projected_normalized);
    chart.values[1].push_back(e.specified_normalized);
  }
  run.csv("sensitivity.csv", table);
  run.svg("sensitivity.svg", render_svg(chart));
  run.seed("sensitivity", cfg.seed);
  std::string top_p, top_s;
  for (const auto& e : result.entries) {
    if (e.projected_rank == 1) top_p = e.parameter;
    if (e.specified_rank == 1) top_s = e.parameter;
  }
  run.finish(out, std::to_string(result.entries.size()) + " parameters; most sensitive projected " + top_p +
                      ", specified " + top_s +
                      (result.projected_degenerate || result.specified_degenerate ? " (degenerate column)" : ""));
  return kExitOk;
}

std::vector<ScalarOutput> scalar_outputs(ShapeTag tag, const std::vector<std::size_t>& dims,
                                         const ModelFamily* family) {
  std::vector<ScalarOutput> outputs;
  std::vector<std::string> names;
  switch (tag) {
    case ShapeTag::kGrid: names = {"cancer_final", "tcell_final", "macrophage_final"}; break;
    case ShapeTag::kTimeseries:
      for (std::size_t c = 0; c < dims.at(1); ++c) names.push_back("x" + std::to_string(c + 1) + "_final");
      break;
    case ShapeTag::kVector:
      for (std::size_t j = 0; j < dims.at(0); ++j) {
        if (family && family->kind() == FamilyKind::kFba)
          names.push_back("flux:" + static_cast<const FbaFamily*>(family)->network().reactions.at(j));
        else
          names.push_back("out_" + std::to_string(j));
      }
      break;
  }
  if (tag == ShapeTag::kGrid && dims.at(2) != names.size()) names.resize(dims.at(2), "channel");
  for (std::size_t j = 0; j < names.size(); ++j)
    outputs.push_back({names[j], [j](const SimulationOutput& o) { return final_values(o).at(j); }});
  return outputs;
}

int cmd_cluster(Run& run, std::ostream& out) {
  auto& cfg = run.config();
  const auto model = load_model(run.model_path());
  auto data = load_dataset(run.dataset_path());
  if (cfg.cluster.samples && cfg.cluster.samples < data.samples.size()) data.samples.resize(cfg.cluster.samples);
  const std::size_t n = data.samples.size();
  if (cfg.cluster.k > n) throw ConfigError("cluster: k exceeds the number of samples");
  const auto matrix = ensemble_distance_matrix(project_dataset(model, data.samples, cfg.threads));
  const auto clusters = agglomerative_cluster(matrix, n, cfg.cluster.k, cfg.cluster.linkage);
  const auto family = cfg.testdata_family ? nullptr : cfg.make_family();
  const auto outputs = scalar_outputs(data.shape_tag, data.dims, family.get());
  const auto profile =
      characterize_clusters(clusters.assignment, clusters.k, data.samples, data.parameter_names, outputs, cfg.cluster.bins);

  CsvTable assign{{"sample", "cluster"}, {}};
  for (std::size_t i = 0; i < n; ++i) assign.add({std::to_string(i), std::to_string(clusters.assignment[i])});
  CsvTable merges{{"step", "a", "b", "height", "size"}, {}};
  for (std::size_t m = 0; m < clusters.dendrogram.merges.size(); ++m) {
    const auto& mg = clusters.dendrogram.merges[m];
    merges.add({std::to_string(m), std::to_string(mg.a), std::to_string(mg.b), fmt(mg.height), std::to_string(mg.size)});
  }
  CsvTable summary{{"cluster", "variable", "kind", "count", "min", "q1", "median", "q3", "max", "mean", "std"}, {}};
  CsvTable hist{{"cluster", "variable", "kind", "bin", "bin_low", "bin_high", "count"}, {}};
  HistogramGrid grid{"Per-cluster distributions (k = " + std::to_string(clusters.k) + ")", {}, {}};
  for (std::size_t c = 0; c < clusters.k; ++c) grid.group_names.push_back("cluster " + std::to_string(c));
  auto describe_rows = [&](const Distribution& d, std::size_t c, const char* kind) {
    summary.add({std::to_string(c), d.name, kind, std::to_string(d.count), fmt(d.min), fmt(d.q1), fmt(d.median),
                 fmt(d.q3), fmt(d.max), fmt(d.mean), fmt(d.std)});
    const double width = (d.bin_high - d.bin_low) / static_cast<double>(d.bins.size());
    for (std::size_t b = 0; b < d.bins.size(); ++b)
      hist.add({std::to_string(c), d.name, kind, std::to_string(b), fmt(d.bin_low + width * static_cast<double>(b)),
                fmt(d.bin_low + width * static_cast<double>(b + 1)), std::to_string(d.bins[b])});
  };
  for (const auto& cl : profile.clusters) {
    for (const auto& d : cl.parameters) describe_rows(d, cl.cluster, "parameter");
    for (const auto& d : cl.outputs) describe_rows(d, cl.cluster, "output");
  }
  const std::size_t vars = profile.clusters.empty() ? 0 : profile.clusters[0].parameters.size() + profile.clusters[0].outputs.size();
  for (std::size_t v = 0; v < vars; ++v) {
    HistogramPanel panel;
    for (const auto& cl : profile.clusters) {
      const bool is_param = v < cl.parameters.size();
      const auto& d = is_param ? cl.parameters[v] : cl.outputs[v - cl.parameters.size()];
      panel.title = d.name;
      panel.low = d.bin_low;
      panel.high = d.bin_high;
      panel.counts.push_back(d.bins);
    }
    grid.panels.push_back(std::move(panel));
  }
  CsvTable sep{{"variable", "kind", "separation"}, {}};
  for (const auto& s : profile.separations) sep.add({s.name, s.is_parameter ? "parameter" : "output", fmt(s.value)});

  run.csv("cluster_assignments.csv", assign);
  run.csv("cluster_merges.csv", merges);
  run.csv("cluster_summary.csv", summary);
  run.csv("cluster_histograms.csv", hist);
  run.csv("cluster_separation.csv", sep);
  run.svg("cluster.svg", render_svg(grid));
  std::string sizes;
  for (const auto s : clusters.sizes) sizes += (sizes.empty() ? "" : "/") + std::to_string(s);
  const auto* strongest = profile.strongest();
  run.finish(out, std::to_string(n) + " samples in " + std::to_string(clusters.k) + " clusters (" + sizes + ")" +
                      (strongest ? ", strongest separation " + strongest->name + " " + fmt(strongest->value) : ""));
  return kExitOk;
}

int cmd_gradcheck(Run& run, const Options& opts, std::ostream& out) {
  const std::uint64_t seed = opts.seed.value_or(7);
  struct Stack {
    const char* name;
    nn::EncoderSpec spec;
  };
  using nn::LayerSpec;
  const std::vector<Stack> stacks = {
      {"dense", {{9}, {LayerSpec::dense(12), LayerSpec::relu(), LayerSpec::dense(8), LayerSpec::relu(), LayerSpec::dense(4)}, 4}},
      {"conv1d", {{16, 3}, {LayerSpec::conv1d(5, 4), LayerSpec::relu(), LayerSpec::conv1d(4, 3, 2), LayerSpec::relu(),
                            LayerSpec::global_avg_pool(), LayerSpec::dense(4)}, 4}},
      {"conv2d", {{9, 9, 2}, {LayerSpec::conv2d(4, 3), LayerSpec::relu(), LayerSpec::conv2d(3, 2), LayerSpec::relu(),
                              LayerSpec::flatten(), LayerSpec::dense(4)}, 4}},
      {"maxpool", {{10, 10, 2}, {LayerSpec::conv2d(3, 3), LayerSpec::relu(), LayerSpec::maxpool(2), LayerSpec::flatten(),
                                 LayerSpec::dense(5), LayerSpec::relu(), LayerSpec::dense(3)}, 3}},
  };
  CsvTable table{{"family", "max_relative_error", "checked", "skipped", "pass"}, {}};
  bool all = true;
  std::string summary;
  for (const auto& s : stacks) {
    const auto report = nn::grad_check(s.spec, seed, 1e-4);
    const bool pass = report.max_relative_error <= kGradTolerance;
    all = all && pass;
    table.add({s.name, fmt(report.max_relative_error), std::to_string(report.checked), std::to_string(report.skipped),
               pass ? "1" : "0"});
    out << "gradcheck " << s.name << ": max relative error " << fmt(report.max_relative_error) << " over "
        << report.checked << " parameters (" << report.skipped << " skipped) " << (pass ? "ok" : "FAIL") << '\n';
    summary += std::string(summary.empty() ? "" : ", ") + s.name + " " + fmt(report.max_relative_error);
  }
  if (!opts.out.empty() || (run.has_config() && !run.config().output_dir.empty())) {
    run.csv("gradcheck.csv", table);
    run.seed("gradcheck", seed);
    run.finish(out, summary);
  }
  return all ? kExitOk : kExitRuntime;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"simrep: contrastive encoder ensembles for comparing simulation outputs"};
  app.require_subcommand(1, 1);
  Options opts;
  const std::vector<std::pair<const char*, const char*>> commands = {
      {"generate", "Monte Carlo dataset from the configured model family"},
      {"train", "train the encoder ensemble on a dataset container"},
      {"consensus", "ensemble consensus score for each neighborhood size"},
      {"sweep", "single-parameter (or flux-bound) distance sweep"},
      {"knockout", "single-reaction knockouts grouped by subsystem"},
      {"sensitivity", "one-at-a-time local sensitivity"},
      {"cluster", "average-linkage clustering of the projected dataset"},
      {"testdata", "synthetic 2-D test data lifted to nine dimensions"},
      {"gradcheck", "finite-difference check of the network gradients"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opts.config, "run configuration JSON");
    sub->add_option("--out", opts.out, "output directory (overrides output_dir)");
    sub->add_option("--seed", opts.seed, "base seed (overrides the config seed)");
    sub->add_option("--format", opts.format, "artifacts to emit")->check(CLI::IsMember({"csv", "svg", "both"}));
    sub->add_option("--dataset", opts.dataset, "dataset container (default OUT/dataset.simrep)");
    sub->add_option("--model", opts.model, "model container (default OUT/model.simrep)");
    sub->add_option("--threads", opts.threads, "worker threads (0 = all cores)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitValidation;
  }
  const std::string name = app.get_subcommands().front()->get_name();
  Run run(name, opts);
  try {
    if (name == "generate") return cmd_generate(run, opts, out);
    if (name == "train") return cmd_train(run, out);
    if (name == "consensus") return cmd_consensus(run, out);
    if (name == "sweep") return cmd_sweep(run, out);
    if (name == "knockout") return cmd_knockout(run, out);
    if (name == "sensitivity") return cmd_sensitivity(run, out);
    if (name == "cluster") return cmd_cluster(run, out);
    if (name == "testdata") return cmd_testdata(run, opts, out);
    if (name == "gradcheck") return cmd_gradcheck(run, opts, out);
  } catch (const ConfigError& e) {
    err << name << ": " << e.what() << '\n';
    return kExitValidation;
  } catch (const ShapeError& e) {
    err << name << ": " << e.what() << '\n';
    return kExitValidation;
  } catch (const InputError& e) {
    err << name << ": " << e.what() << '\n';
    return kExitValidation;
  } catch (const ContainerError& e) {
    err << name << ": " << e.what() << " [" << to_string(e.code()) << "]\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << name << ": " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitValidation;
}

}  // namespace simrep
