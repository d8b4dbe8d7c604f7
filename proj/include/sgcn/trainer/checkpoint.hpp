#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "sgcn/network/model.hpp"
#include "sgcn/numcore/adam.hpp"

namespace sgcn::trainer {

inline constexpr char kMagic[4] = {'S', 'G', 'C', 'N'};
inline constexpr std::uint32_t kFormatVersion = 1;

enum class DType : std::uint8_t { f32 = 0, f64 = 1, u8 = 2 };

struct Section {
  std::string name;
  DType dtype = DType::f32;
  std::vector<std::uint64_t> dims;
  std::vector<std::uint8_t> payload;  // little-endian element bytes

  template <typename Real>
  static Section from_tensor(std::string name, const numcore::Tensor<Real>& t);
  static Section from_text(std::string name, const std::string& text);

  /// Converts f32/f64 payloads to the requested precision.
  template <typename Real>
  numcore::Tensor<Real> to_tensor() const;
  std::string to_text() const;
};

/// Raw container: magic, version, config JSON, named sections, CRC32.
struct CheckpointFile {
  std::string config_json;
  std::vector<Section> sections;

  const Section* find(const std::string& name) const;
  const Section& at(const std::string& name) const;
};

/// Thrown with "not a checkpoint", "unsupported version" or
/// "corrupt checkpoint" (plus detail) for malformed files.
struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> encode(const CheckpointFile& file);
CheckpointFile decode(const std::vector<std::uint8_t>& bytes);

/// Writes through a temporary file and renames it into place.
void write_checkpoint(const std::filesystem::path& path, const CheckpointFile& file);
CheckpointFile read_checkpoint(const std::filesystem::path& path);

std::uint32_t crc32_of(const std::vector<std::uint8_t>& bytes);
std::uint32_t file_crc32(const std::filesystem::path& path);

/// Parameter and batch-norm sections of a model.
template <typename Real>
void add_model_sections(CheckpointFile& file, const network::SgcnModel<Real>& model);

/// Optimizer moment sections; the step counter travels in the train state.
template <typename Real>
void add_optimizer_sections(CheckpointFile& file, const network::SgcnModel<Real>& model,
                            const numcore::AdamState<Real>& adam);

/// Copies parameter and buffer sections into `model`, checking names and shapes.
template <typename Real>
void restore_model(const CheckpointFile& file, network::SgcnModel<Real>& model);

template <typename Real>
void restore_optimizer(const CheckpointFile& file, const network::SgcnModel<Real>& model,
                       numcore::AdamState<Real>& adam);

/// Builds a model from the embedded config and loads its weights, converting
/// precision when needed.
template <typename Real>
std::unique_ptr<network::SgcnModel<Real>> load_model(const CheckpointFile& file);

template <typename Real>
std::unique_ptr<network::SgcnModel<Real>> load_model(const std::filesystem::path& path) {
  return load_model<Real>(read_checkpoint(path));
}

}  // namespace sgcn::trainer
