#include "simrep/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "simrep/config.hpp"
#include "simrep/errors.hpp"

namespace simrep {

using nlohmann::json;

namespace {

constexpr char kMagic[] = "SIMREP1";
constexpr std::size_t kMagicSize = 7;
constexpr std::size_t kPrefixSize = kMagicSize + 4;

void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

std::uint32_t get_u32(const std::string& in, std::size_t offset) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[offset + b])) << (8 * b);
  return v;
}

void put_f32(std::string& out, double value) {
  put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(value)));
}

float get_f32(const std::string& in, std::size_t offset) { return std::bit_cast<float>(get_u32(in, offset)); }

std::string frame(const json& header, const std::string& payload) {
  const std::string text = header.dump();
  std::string out(kMagic, kMagicSize);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  out += payload;
  return out;
}

struct Framed {
  json header;
  std::size_t payload_offset = 0;
  std::size_t payload_size = 0;
};

Framed unframe(const std::string& bytes, const char* expected_format) {
  if (bytes.size() < kMagicSize || bytes.compare(0, kMagicSize, kMagic, kMagicSize) != 0)
    throw ContainerError(ContainerErrorCode::kBadMagic, "container: bad magic (not a SIMREP1 file)");
  if (bytes.size() < kPrefixSize) throw ContainerError(ContainerErrorCode::kTruncated, "container: truncated before header");
  const std::uint32_t header_size = get_u32(bytes, kMagicSize);
  if (bytes.size() < kPrefixSize + header_size)
    throw ContainerError(ContainerErrorCode::kTruncated, "container: truncated inside the header");
  Framed f;
  try {
    f.header = json::parse(bytes.begin() + kPrefixSize, bytes.begin() + kPrefixSize + header_size);
  } catch (const json::exception& e) {
    throw ContainerError(ContainerErrorCode::kBadHeader, std::string("container: header is not JSON: ") + e.what());
  }
  if (!f.header.is_object() || !f.header.contains("schema_version"))
    throw ContainerError(ContainerErrorCode::kBadHeader, "container: header lacks schema_version");
  const auto version = f.header.at("schema_version");
  if (!version.is_number_unsigned() || version.get<std::uint32_t>() != kContainerSchemaVersion)
    throw ContainerError(ContainerErrorCode::kVersionMismatch,
                         "container: schema version " + version.dump() + " (expected " +
                             std::to_string(kContainerSchemaVersion) + ")");
  if (f.header.value("format", std::string()) != expected_format)
    throw ContainerError(ContainerErrorCode::kBadHeader,
                         std::string("container: expected format '") + expected_format + "'");
  f.payload_offset = kPrefixSize + header_size;
  f.payload_size = bytes.size() - f.payload_offset;
  return f;
}

// Compares the payload against its declared and expected sizes. A payload
// holding a whole number of fewer records than declared is a length
// mismatch; any other short payload is a truncation.
void check_payload(const Framed& f, std::size_t expected, std::size_t record_bytes) {
  const auto declared = f.header.value("payload_bytes", std::size_t{0});
  if (declared != expected)
    throw ContainerError(ContainerErrorCode::kLengthMismatch,
                         "container: header declares " + std::to_string(declared) + " payload bytes but its counts need " +
                             std::to_string(expected));
  if (f.payload_size == expected) return;
  if (f.payload_size > expected)
    throw ContainerError(ContainerErrorCode::kLengthMismatch,
                         "container: " + std::to_string(f.payload_size - expected) + " trailing bytes after the payload");
  if (record_bytes > 0 && f.payload_size % record_bytes == 0)
    throw ContainerError(ContainerErrorCode::kLengthMismatch,
                         "container: payload holds " + std::to_string(f.payload_size / record_bytes) +
                             " records, header claims " + std::to_string(expected / record_bytes));
  throw ContainerError(ContainerErrorCode::kTruncated,
                       "container: payload truncated (" + std::to_string(f.payload_size) + " of " +
                           std::to_string(expected) + " bytes)");
}

template <class T>
T header_field(const json& header, const char* key) {
  try {
    return header.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ContainerError(ContainerErrorCode::kBadHeader, std::string("container: header field '") + key + "': " + e.what());
  }
}

}  // namespace

const char* to_string(ContainerErrorCode code) {
  switch (code) {
    case ContainerErrorCode::kIo: return "io";
    case ContainerErrorCode::kBadMagic: return "bad_magic";
    case ContainerErrorCode::kTruncated: return "truncated";
    case ContainerErrorCode::kVersionMismatch: return "version_mismatch";
    case ContainerErrorCode::kLengthMismatch: return "length_mismatch";
    case ContainerErrorCode::kBadHeader: return "bad_header";
  }
  return "unknown";
}

std::string encode_dataset(const DatasetContainer& c) {
  const std::size_t features = nn::shape_size(c.dims);
  const std::size_t count = c.samples.size();
  const std::size_t param_count = count ? c.samples.front().params.size() : c.parameter_names.size();
  if (!c.parameter_names.empty() && c.parameter_names.size() != param_count)
    throw InputError("dataset container: parameter names do not match the sample parameters");
  std::vector<std::uint64_t> seeds;
  for (const auto& s : c.samples) {
    if (s.shape_tag != c.shape_tag || s.dims != c.dims)
      throw ShapeError("dataset container: sample shape differs from the container shape");
    if (s.params.size() != param_count) throw InputError("dataset container: samples carry different parameter counts");
    seeds.push_back(s.seed);
  }
  json meta;
  try {
    meta = json::parse(c.meta);
  } catch (const json::exception&) {
    meta = c.meta;
  }
  const std::size_t payload_bytes = 4 * count * (features + param_count);
  const json header = {{"format", "simrep-dataset"},
                       {"schema_version", kContainerSchemaVersion},
                       {"shape_tag", std::string(to_string(c.shape_tag))},
                       {"dims", c.dims},
                       {"count", count},
                       {"param_count", param_count},
                       {"parameter_names", c.parameter_names},
                       {"seeds", seeds},
                       {"payload_bytes", payload_bytes},
                       {"meta", meta}};
  std::string payload;
  payload.reserve(payload_bytes);
  for (const auto& s : c.samples)
    for (const double v : s.data) put_f32(payload, v);
  for (const auto& s : c.samples)
    for (const double v : s.params) put_f32(payload, v);
  return frame(header, payload);
}

DatasetContainer decode_dataset(const std::string& bytes) {
  const Framed f = unframe(bytes, "simrep-dataset");
  DatasetContainer c;
  const auto tag = parse_shape_tag(header_field<std::string>(f.header, "shape_tag"));
  if (!tag) throw ContainerError(ContainerErrorCode::kBadHeader, "container: unknown shape_tag");
  c.shape_tag = *tag;
  c.dims = header_field<std::vector<std::size_t>>(f.header, "dims");
  if (c.dims.size() != shape_rank(c.shape_tag))
    throw ContainerError(ContainerErrorCode::kBadHeader, "container: dims do not match the shape tag");
  const auto count = header_field<std::size_t>(f.header, "count");
  const auto param_count = header_field<std::size_t>(f.header, "param_count");
  c.parameter_names = header_field<std::vector<std::string>>(f.header, "parameter_names");
  const auto seeds = header_field<std::vector<std::uint64_t>>(f.header, "seeds");
  if (seeds.size() != count) throw ContainerError(ContainerErrorCode::kBadHeader, "container: seed list length differs from count");
  const json meta = f.header.value("meta", json::object());
  c.meta = meta.is_string() ? meta.get<std::string>() : meta.dump();

  const std::size_t features = nn::shape_size(c.dims);
  check_payload(f, 4 * count * (features + param_count), 4 * (features + param_count));

  c.samples.resize(count);
  std::size_t offset = f.payload_offset;
  for (std::size_t i = 0; i < count; ++i) {
    auto& s = c.samples[i];
    s.shape_tag = c.shape_tag;
    s.dims = c.dims;
    s.seed = seeds[i];
    s.data.resize(features);
    for (auto& v : s.data) {
      v = get_f32(bytes, offset);
      offset += 4;
    }
  }
  for (auto& s : c.samples) {
    s.params.resize(param_count);
    for (auto& v : s.params) {
      v = get_f32(bytes, offset);
      offset += 4;
    }
  }
  return c;
}

std::string encode_model(const EnsembleModel& model) {
  if (model.members.empty()) throw InputError("model container: ensemble has no members");
  const std::size_t per_member = model.members.front().parameter_count();
  json init_seeds = json::array();
  std::string payload;
  for (const auto& member : model.members) {
    if (member.spec != model.spec || member.parameter_count() != per_member)
      throw ShapeError("model container: member does not match the ensemble spec");
    init_seeds.push_back(member.init_seed);
    for (const auto& layer : member.layers) {
      for (const float w : layer.weight) put_f32(payload, w);
      for (const float b : layer.bias) put_f32(payload, b);
    }
  }
  const json header = {{"format", "simrep-model"},
                       {"schema_version", kContainerSchemaVersion},
                       {"spec", spec_to_json(model.spec)},
                       {"shape_tag", std::string(to_string(model.shape_tag))},
                       {"dims", model.dims},
                       {"normalization", {{"mean", model.normalization.mean}, {"stddev", model.normalization.stddev}}},
                       {"members", model.members.size()},
                       {"member_seeds", model.member_seeds},
                       {"init_seeds", init_seeds},
                       {"loss_curves", model.loss_curves},
                       {"provenance", model.provenance},
                       {"parameters_per_member", per_member},
                       {"payload_bytes", payload.size()}};
  return frame(header, payload);
}

EnsembleModel decode_model(const std::string& bytes) {
  const Framed f = unframe(bytes, "simrep-model");
  EnsembleModel model;
  try {
    model.spec = spec_from_json(f.header.at("spec"));
  } catch (const std::exception& e) {
    throw ContainerError(ContainerErrorCode::kBadHeader, std::string("container: bad encoder spec: ") + e.what());
  }
  const auto tag = parse_shape_tag(header_field<std::string>(f.header, "shape_tag"));
  if (!tag) throw ContainerError(ContainerErrorCode::kBadHeader, "container: unknown shape_tag");
  model.shape_tag = *tag;
  model.dims = header_field<std::vector<std::size_t>>(f.header, "dims");
  const auto& norm = f.header.at("normalization");
  model.normalization.mean = header_field<std::vector<double>>(norm, "mean");
  model.normalization.stddev = header_field<std::vector<double>>(norm, "stddev");
  if (model.normalization.mean.size() != nn::shape_size(model.dims) ||
      model.normalization.stddev.size() != model.normalization.mean.size())
    throw ContainerError(ContainerErrorCode::kBadHeader, "container: normalization does not match dims");
  const auto members = header_field<std::size_t>(f.header, "members");
  model.member_seeds = header_field<std::vector<std::uint64_t>>(f.header, "member_seeds");
  const auto init_seeds = header_field<std::vector<std::uint64_t>>(f.header, "init_seeds");
  model.loss_curves = header_field<std::vector<std::vector<double>>>(f.header, "loss_curves");
  model.provenance = header_field<std::string>(f.header, "provenance");
  if (init_seeds.size() != members)
    throw ContainerError(ContainerErrorCode::kBadHeader, "container: init seed list length differs from member count");

  auto layout = nn::init_encoder<float>(model.spec, 0);
  const std::size_t per_member = layout.parameter_count();
  if (header_field<std::size_t>(f.header, "parameters_per_member") != per_member)
    throw ContainerError(ContainerErrorCode::kBadHeader, "container: parameter count disagrees with the encoder spec");
  check_payload(f, 4 * members * per_member, 4 * per_member);

  std::size_t offset = f.payload_offset;
  for (std::size_t m = 0; m < members; ++m) {
    auto weights = layout;
    weights.init_seed = init_seeds[m];
    for (auto& layer : weights.layers) {
      for (auto& w : layer.weight) {
        w = get_f32(bytes, offset);
        offset += 4;
      }
      for (auto& b : layer.bias) {
        b = get_f32(bytes, offset);
        offset += 4;
      }
    }
    model.members.push_back(std::move(weights));
  }
  return model;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContainerError(ContainerErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ContainerError(ContainerErrorCode::kIo, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ContainerError(ContainerErrorCode::kIo, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void save_dataset(const std::filesystem::path& path, const DatasetContainer& c) {
  write_file_atomic(path, encode_dataset(c));
}

DatasetContainer load_dataset(const std::filesystem::path& path) { return decode_dataset(read_file(path)); }

void save_model(const std::filesystem::path& path, const EnsembleModel& model) {
  write_file_atomic(path, encode_model(model));
}

EnsembleModel load_model(const std::filesystem::path& path) { return decode_model(read_file(path)); }

}  // namespace simrep
