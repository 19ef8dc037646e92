#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mhls/features.hpp"
#include "mhls/model.hpp"
#include "mhls/tensor.hpp"

namespace mhls {

inline constexpr std::uint32_t kFormatVersion = 1;

/// Raised for unreadable, truncated or mismatched files.
class FormatError : public std::runtime_error {
 public:
  enum class Kind { io, bad_magic, bad_version, bad_variant, truncated, missing, shape };

  FormatError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct NamedArray {
  std::string name;
  Tensor value;
};

/// Tagged list of named arrays. Layout, all integers u32 little-endian and all
/// values f64 little-endian: "MHLS", version, tag, count, arrays, count,
/// extras. Strings are length-prefixed; an array is name, rank, dims, data.
struct Archive {
  std::uint32_t version = kFormatVersion;
  std::string tag;
  std::vector<NamedArray> arrays;
  std::vector<NamedArray> extras;

  const Tensor* find_array(const std::string& name) const;
  const Tensor* find_extra(const std::string& name) const;
  /// Throws FormatError(missing) when absent.
  const Tensor& extra(const std::string& name) const;
};

void write_archive(std::ostream& out, const Archive& archive);
Archive read_archive(std::istream& in);
void save_archive(const std::filesystem::path& path, const Archive& archive);
Archive load_archive(const std::filesystem::path& path);

struct TrainingMeta {
  std::size_t epoch = 0;
  double val_loss = 0.0;
  double threshold = 0.5;
  std::size_t t_w = 0;
};

struct Checkpoint {
  SequenceModel model;
  std::optional<FeatureScaler> scaler;
  TrainingMeta meta;
};

Archive to_archive(const Checkpoint& ckpt);
/// Rebuilds the model from its stored sizes and arrays. With `expected`, a
/// checkpoint of another variant is rejected with FormatError(bad_variant).
Checkpoint from_archive(const Archive& archive, std::optional<CellKind> expected = {});

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<CellKind> expected = {});

}  // namespace mhls
