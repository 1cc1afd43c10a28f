#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "v2st/numerics/errors.hpp"
#include "v2st/numerics/params.hpp"
#include "v2st/numerics/tensor.hpp"

namespace v2st::inline V2ST_REAL_NS::harness {

namespace fs = std::filesystem;

// Malformed or inconsistent files on disk. Each failure mode has its own type.
class FormatError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};
class MagicError : public FormatError {
 public:
  using FormatError::FormatError;
};
class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};
class TruncatedPayloadError : public FormatError {
 public:
  using FormatError::FormatError;
};
class DanglingPathError : public FormatError {
 public:
  using FormatError::FormatError;
};

std::vector<std::uint8_t> read_bytes(const fs::path& path);
// Writes through a temporary sibling and renames it into place.
void write_bytes(const fs::path& path, std::span<const std::uint8_t> bytes);
void write_text(const fs::path& path, const std::string& text);

// "DDTF", u16 version, u16 ndim, u32 dims[ndim], f32 payload; little-endian.
inline constexpr std::uint16_t kTensorFileVersion = 1;
std::vector<std::uint8_t> encode_tensor(const Tensor& t);
// Decodes one tensor starting at bytes[0]; `consumed` receives its length.
Tensor decode_tensor(std::span<const std::uint8_t> bytes, std::size_t* consumed = nullptr);
void save_tensor(const fs::path& path, const Tensor& t);
Tensor load_tensor(const fs::path& path);

// Integer id sequences stored as [1, n] float tensors (exact below 2^24).
Tensor ids_tensor(std::span<const int> ids);
std::vector<int> tensor_ids(const Tensor& t);
Tensor wave_tensor(std::span<const float> wave);
std::vector<float> tensor_wave(const Tensor& t);

struct ManifestEntry {
  std::string id;
  std::vector<std::string> tasks;
  std::map<std::string, std::string> files;  // role -> path relative to the manifest
  std::string transcript;
  int speaker = 0;
  double duration_s = 0;
  nlohmann::json extra = nlohmann::json::object();
};

void save_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries);
// Throws FormatError on a bad line or a duplicate id and DanglingPathError
// when a referenced file is missing.
std::vector<ManifestEntry> load_manifest(const fs::path& path);
fs::path resolve(const fs::path& manifest, const ManifestEntry& e, const std::string& role);

// "DDCK", u16 version, u32 header length, header JSON, u32 tensor count, then
// per tensor a u16 name length, the name, a u32 byte length and a TensorFile.
struct Checkpoint {
  nlohmann::json header = nlohmann::json::object();
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor& tensor(const std::string& name) const;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const fs::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const fs::path& path);

void put_params(Checkpoint& ckpt, const ParamStore& store, const std::string& prefix = "");
// Copies values into `store`; names and shapes must match exactly.
void take_params(const Checkpoint& ckpt, ParamStore& store, const std::string& prefix = "");

// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t v);

}  // namespace v2st::inline V2ST_REAL_NS::harness
