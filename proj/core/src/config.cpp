#include "simrep/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "simrep/errors.hpp"
#include "simrep/flux.hpp"
#include "simrep/rng.hpp"

namespace simrep {

using nlohmann::json;

namespace {

constexpr std::uint64_t kTrainSeedTag = 0x747261696eULL;

const std::set<std::string> kTopLevelKeys = {
    "family",  "seed",    "samples",   "replicates", "output_dir",  "network",     "lv",       "abm",
    "ranges",  "encoder", "output_dim", "train",     "augmentation", "consensus", "sweep",    "sensitivity",
    "cluster", "testdata", "threads"};

template <class T>
T get_or(const json& doc, const char* key, T fallback) {
  if (!doc.contains(key) || doc.at(key).is_null()) return fallback;
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

std::size_t positive(const json& doc, const char* key, std::size_t fallback) {
  if (doc.contains(key) && doc.at(key).is_number_integer() && doc.at(key).get<long long>() < 0)
    throw ConfigError(std::string("config: '") + key + "' must be non-negative");
  const auto v = get_or<std::size_t>(doc, key, fallback);
  if (v == 0) throw ConfigError(std::string("config: '") + key + "' must be >= 1");
  return v;
}

std::string kind_key(nn::LayerKind kind) {
  switch (kind) {
    case nn::LayerKind::kDense: return "dense";
    case nn::LayerKind::kConv1d: return "conv1d";
    case nn::LayerKind::kConv2d: return "conv2d";
    case nn::LayerKind::kMaxPool: return "maxpool";
    case nn::LayerKind::kFlatten: return "flatten";
    case nn::LayerKind::kActivation: return "activation";
    case nn::LayerKind::kGlobalAvgPool: return "global_avg_pool";
  }
  return "unknown";
}

}  // namespace

json spec_to_json(const nn::EncoderSpec& spec) {
  json layers = json::array();
  for (const auto& l : spec.layers) {
    json j = {{"type", kind_key(l.kind)}};
    switch (l.kind) {
      case nn::LayerKind::kDense:
        j["units"] = l.units;
        if (l.declared_inputs) j["inputs"] = l.declared_inputs;
        break;
      case nn::LayerKind::kConv1d:
      case nn::LayerKind::kConv2d:
        j["filters"] = l.units;
        j["kernel"] = l.kernel;
        j["stride"] = l.stride;
        break;
      case nn::LayerKind::kMaxPool: j["window"] = l.window; break;
      case nn::LayerKind::kActivation:
        j["activation"] = l.activation == nn::Activation::kRelu ? "relu" : "linear";
        break;
      default: break;
    }
    layers.push_back(j);
  }
  return {{"input_shape", spec.input_shape}, {"layers", layers}, {"output_dim", spec.output_dim}};
}

nn::EncoderSpec spec_from_json(const json& doc) {
  nn::EncoderSpec spec;
  try {
    spec.input_shape = doc.at("input_shape").get<nn::Shape>();
    spec.output_dim = doc.value("output_dim", std::size_t{16});
    for (const auto& j : doc.at("layers")) {
      const auto type = j.at("type").get<std::string>();
      if (type == "dense") {
        spec.layers.push_back(nn::LayerSpec::dense(j.at("units").get<std::size_t>(), j.value("inputs", std::size_t{0})));
      } else if (type == "conv1d") {
        spec.layers.push_back(nn::LayerSpec::conv1d(j.at("filters").get<std::size_t>(), j.at("kernel").get<std::size_t>(),
                                                    j.value("stride", std::size_t{1})));
      } else if (type == "conv2d") {
        spec.layers.push_back(nn::LayerSpec::conv2d(j.at("filters").get<std::size_t>(), j.at("kernel").get<std::size_t>(),
                                                    j.value("stride", std::size_t{1})));
      } else if (type == "maxpool") {
        spec.layers.push_back(nn::LayerSpec::maxpool(j.at("window").get<std::size_t>()));
      } else if (type == "flatten") {
        spec.layers.push_back(nn::LayerSpec::flatten());
      } else if (type == "global_avg_pool") {
        spec.layers.push_back(nn::LayerSpec::global_avg_pool());
      } else if (type == "activation" || type == "relu" || type == "linear") {
        const auto act = type == "activation" ? j.at("activation").get<std::string>() : type;
        if (act == "relu") spec.layers.push_back(nn::LayerSpec::relu());
        else if (act == "linear") spec.layers.push_back(nn::LayerSpec::linear());
        else throw ConfigError("encoder: unknown activation '" + act + "'");
      } else {
        throw ConfigError("encoder: unknown layer type '" + type + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("encoder: ") + e.what());
  }
  nn::infer_shapes(spec);
  return spec;
}

json policy_to_json(const AugmentationPolicy& policy) {
  return {{"family", std::string(to_string(policy.family))},
          {"noise_sigma", policy.noise_sigma},
          {"mask_fraction", policy.mask_fraction},
          {"grid_symmetry", policy.grid_symmetry}};
}

AugmentationPolicy policy_from_json(const json& doc, ShapeTag family) {
  AugmentationPolicy policy = AugmentationPolicy::defaults_for(family);
  policy.noise_sigma = get_or(doc, "noise_sigma", policy.noise_sigma);
  policy.mask_fraction = get_or(doc, "mask_fraction", policy.mask_fraction);
  policy.grid_symmetry = get_or(doc, "grid_symmetry", policy.grid_symmetry);
  try {
    policy.validate();
  } catch (const InputError& e) {
    throw ConfigError(e.what());
  }
  return policy;
}

json train_config_to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"temperature", c.temperature},
          {"epochs", c.epochs},
          {"learning_rate", c.adam.learning_rate},
          {"beta1", c.adam.beta1},
          {"beta2", c.adam.beta2},
          {"epsilon", c.adam.epsilon},
          {"ensemble_size", c.ensemble_size},
          {"seed", c.base_seed},
          {"member_seeds", c.resolved_member_seeds()}};
}

TrainConfig train_config_from_json(const json& doc, std::uint64_t base_seed) {
  TrainConfig c;
  c.batch_size = get_or(doc, "batch_size", c.batch_size);
  c.temperature = get_or(doc, "temperature", c.temperature);
  c.epochs = get_or(doc, "epochs", c.epochs);
  c.adam.learning_rate = get_or(doc, "learning_rate", c.adam.learning_rate);
  c.adam.beta1 = get_or(doc, "beta1", c.adam.beta1);
  c.adam.beta2 = get_or(doc, "beta2", c.adam.beta2);
  c.adam.epsilon = get_or(doc, "epsilon", c.adam.epsilon);
  c.ensemble_size = get_or(doc, "ensemble_size", c.ensemble_size);
  c.base_seed = get_or(doc, "seed", base_seed);
  c.member_seeds = get_or(doc, "member_seeds", c.member_seeds);
  c.threads = get_or(doc, "threads", c.threads);
  c.validate();
  return c;
}

nn::EncoderSpec default_encoder(ShapeTag tag, const std::vector<std::size_t>& dims, std::size_t output_dim) {
  switch (tag) {
    case ShapeTag::kVector: return nn::vector_encoder(dims.at(0), output_dim);
    case ShapeTag::kTimeseries: return nn::timeseries_encoder(dims.at(0), dims.at(1), output_dim);
    case ShapeTag::kGrid: return nn::grid_encoder(dims.at(0), dims.at(1), dims.at(2), output_dim);
  }
  throw ConfigError("unknown shape tag");
}

std::unique_ptr<ModelFamily> RunConfig::make_family() const {
  if (testdata_family) return nullptr;
  switch (family) {
    case FamilyKind::kLv: return std::make_unique<LvFamily>(lv_base_params(), lv);
    case FamilyKind::kAbm: return std::make_unique<AbmFamily>(abm);
    case FamilyKind::kFba: {
      std::filesystem::path path = network;
      if (path.is_relative() && !base_dir.empty() && !std::filesystem::exists(path)) path = base_dir / path;
      return std::make_unique<FbaFamily>(load_flux_network(path));
    }
  }
  return nullptr;
}

ParamRanges RunConfig::resolved_ranges(const ModelFamily& fam) const {
  ParamRanges r = fam.default_ranges();
  for (const auto& [name, range] : ranges) {
    const auto it = std::find(r.names.begin(), r.names.end(), name);
    if (it == r.names.end()) throw ConfigError("ranges: unknown parameter '" + name + "'");
    r.ranges[static_cast<std::size_t>(it - r.names.begin())] = range;
  }
  try {
    r.validate();
  } catch (const InputError& e) {
    throw ConfigError(e.what());
  }
  return r;
}

AugmentationPolicy RunConfig::resolved_policy() const {
  ShapeTag tag = ShapeTag::kVector;
  if (!testdata_family) tag = family == FamilyKind::kLv ? ShapeTag::kTimeseries
                               : family == FamilyKind::kAbm ? ShapeTag::kGrid
                                                            : ShapeTag::kVector;
  return policy_from_json(augmentation, tag);
}

std::string RunConfig::hash() const { return hex64(fnv1a64(source.dump())); }

RunConfig parse_run_config(const json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("config: top level must be a JSON object");
  for (const auto& [key, value] : doc.items())
    if (!kTopLevelKeys.contains(key)) throw ConfigError("config: unknown key '" + key + "'");

  RunConfig c;
  c.source = doc;
  c.base_dir = base_dir;
  const auto family = get_or<std::string>(doc, "family", "");
  if (family == "testdata") {
    c.testdata_family = true;
  } else if (const auto kind = parse_family(family)) {
    c.family = *kind;
  } else {
    throw ConfigError("config: 'family' must be one of lv, fba, abm, testdata");
  }
  if (!doc.contains("seed") || !doc.at("seed").is_number_integer())
    throw ConfigError("config: an explicit integer 'seed' is required");
  c.seed = doc.at("seed").get<std::uint64_t>();
  c.samples = positive(doc, "samples", c.samples);
  c.replicates = positive(doc, "replicates", c.replicates);
  c.output_dir = get_or<std::string>(doc, "output_dir", "");
  c.threads = get_or(doc, "threads", c.threads);
  c.output_dim = positive(doc, "output_dim", c.output_dim);

  if (c.family == FamilyKind::kFba && !c.testdata_family) {
    c.network = get_or<std::string>(doc, "network", "");
    if (c.network.empty()) throw ConfigError("config: fba runs need a 'network' path");
  }
  if (doc.contains("lv")) {
    const auto& lv = doc.at("lv");
    c.lv.t_end = get_or(lv, "t_end", c.lv.t_end);
    c.lv.dt = get_or(lv, "dt", c.lv.dt);
    c.lv.n_out = positive(lv, "n_out", c.lv.n_out);
    if (!(c.lv.t_end > 0.0) || !(c.lv.dt > 0.0)) throw ConfigError("config: lv t_end and dt must be > 0");
  }
  if (doc.contains("abm")) {
    const auto& abm = doc.at("abm");
    c.abm.side = get_or(abm, "side", c.abm.side);
    c.abm.steps = get_or(abm, "steps", c.abm.steps);
    if (abm.contains("rates")) {
      auto values = c.abm.rates.to_vector();
      const auto names = AbmRates::parameter_names();
      for (const auto& [key, value] : abm.at("rates").items()) {
        const auto it = std::find(names.begin(), names.end(), key);
        if (it == names.end()) throw ConfigError("config: unknown ABM rate '" + key + "'");
        values[static_cast<std::size_t>(it - names.begin())] = value.get<double>();
      }
      c.abm.rates = AbmRates::from_vector(values);
    }
    try {
      c.abm.validate();
    } catch (const InputError& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  }
  if (doc.contains("ranges")) {
    for (const auto& [name, value] : doc.at("ranges").items()) {
      if (!value.is_array() || value.size() != 2) throw ConfigError("ranges: '" + name + "' must be [low, high]");
      const ParamRange r{value[0].get<double>(), value[1].get<double>()};
      if (!(r.low <= r.high)) throw ConfigError("ranges: '" + name + "' has low > high");
      c.ranges.emplace_back(name, r);
    }
  }
  if (doc.contains("encoder")) {
    c.encoder = spec_from_json(doc.at("encoder"));
    c.output_dim = c.encoder->output_dim;
  }
  try {
    c.train = train_config_from_json(doc.value("train", json::object()), derive_seed(c.seed, kTrainSeedTag));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: train: ") + e.what());
  }
  c.augmentation = doc.value("augmentation", json::object());
  c.resolved_policy();

  if (doc.contains("consensus")) {
    const auto& j = doc.at("consensus");
    c.consensus.sizes = get_or(j, "sizes", c.consensus.sizes);
    c.consensus.dataset = get_or<std::string>(j, "dataset", "");
    if (c.consensus.sizes.empty()) throw ConfigError("consensus: 'sizes' must not be empty");
    for (const auto n : c.consensus.sizes)
      if (n == 0) throw ConfigError("consensus: neighborhood sizes must be >= 1");
  }
  if (doc.contains("sweep")) {
    const auto& j = doc.at("sweep");
    SweepRequest s;
    s.target = get_or<std::string>(j, "parameter", get_or<std::string>(j, "reaction", ""));
    if (s.target.empty()) throw ConfigError("sweep: 'parameter' (or 'reaction') is required");
    s.replicates = get_or(j, "replicates", c.replicates);
    if (j.contains("values")) {
      s.values = get_or(j, "values", s.values);
    } else if (j.contains("count")) {
      // Geometric spacing between low_factor and high_factor times the base value.
      const auto count = j.at("count").get<std::size_t>();
      const double lo = get_or(j, "low_factor", 0.5), hi = get_or(j, "high_factor", 2.0);
      if (count < 2 || !(lo > 0.0) || !(hi > lo)) throw ConfigError("sweep: need count >= 2 and 0 < low_factor < high_factor");
      for (std::size_t i = 0; i < count; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(count - 1);
        s.values.push_back(std::exp2(std::log2(lo) + t * (std::log2(hi) - std::log2(lo))));
      }
      if (std::find(s.values.begin(), s.values.end(), 1.0) == s.values.end()) {
        s.values.push_back(1.0);
        std::sort(s.values.begin(), s.values.end());
      }
      s.factors = true;
    } else {
      throw ConfigError("sweep: give 'values' or 'count'");
    }
    c.sweep = s;
  }
  if (doc.contains("sensitivity")) {
    const auto& j = doc.at("sensitivity");
    c.sensitivity.delta = get_or(j, "delta", c.sensitivity.delta);
    c.sensitivity.relative = get_or(j, "relative", c.sensitivity.relative);
    c.sensitivity.replicates = get_or(j, "replicates", c.sensitivity.replicates);
  }
  if (doc.contains("cluster")) {
    const auto& j = doc.at("cluster");
    c.cluster.k = positive(j, "k", c.cluster.k);
    c.cluster.samples = get_or(j, "samples", c.cluster.samples);
    c.cluster.bins = positive(j, "bins", c.cluster.bins);
    const auto linkage = get_or<std::string>(j, "linkage", "average");
    const auto parsed = parse_linkage(linkage);
    if (!parsed) throw ConfigError("cluster: unknown linkage '" + linkage + "'");
    c.cluster.linkage = *parsed;
  }
  if (doc.contains("testdata")) {
    const auto& j = doc.at("testdata");
    const auto shape = get_or<std::string>(j, "shape", "blobs");
    if (shape == "blobs") c.testdata.shape = TestShape::kBlobs;
    else if (shape == "rings") c.testdata.shape = TestShape::kRings;
    else throw ConfigError("testdata: shape must be blobs or rings");
    c.testdata.n = get_or(j, "n", c.testdata.n);
    if (c.testdata.n < 10) throw ConfigError("testdata: n must be >= 10");
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_run_config(doc, path.parent_path());
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace simrep
