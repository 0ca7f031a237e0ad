#pragma once

// Binary containers for datasets and trained ensembles.
//
// Layout: the 7 bytes "SIMREP1", a uint32 little-endian header length, a
// UTF-8 JSON header of that length, then a little-endian float32 payload.
// See docs/formats.md for the header fields.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "simrep/contrastive.hpp"
#include "simrep/simulation_output.hpp"

namespace simrep {

inline constexpr std::uint32_t kContainerSchemaVersion = 1;

enum class ContainerErrorCode {
  kIo = 1,
  kBadMagic = 2,
  kTruncated = 3,
  kVersionMismatch = 4,
  kLengthMismatch = 5,
  kBadHeader = 6,
};

const char* to_string(ContainerErrorCode code);

class ContainerError : public std::runtime_error {
 public:
  ContainerError(ContainerErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ContainerErrorCode code() const noexcept { return code_; }

 private:
  ContainerErrorCode code_;
};

struct DatasetContainer {
  ShapeTag shape_tag = ShapeTag::kVector;
  std::vector<std::size_t> dims;
  std::vector<std::string> parameter_names;
  Dataset samples;
  /// Free-form JSON object (family, generator seed, failures...).
  std::string meta = "{}";
};

/// Bytes of a dataset container. Data and parameters are stored as float32.
std::string encode_dataset(const DatasetContainer& container);
DatasetContainer decode_dataset(const std::string& bytes);

void save_dataset(const std::filesystem::path& path, const DatasetContainer& container);
DatasetContainer load_dataset(const std::filesystem::path& path);

/// Model payload: each member's layers in order, weights then biases, as float32.
std::string encode_model(const EnsembleModel& model);
EnsembleModel decode_model(const std::string& bytes);

void save_model(const std::filesystem::path& path, const EnsembleModel& model);
EnsembleModel load_model(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
/// Writes to a sibling temporary file, then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

}  // namespace simrep
