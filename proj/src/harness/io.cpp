#include "v2st/harness/io.hpp"

#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace v2st::inline V2ST_REAL_NS::harness {

namespace {

constexpr char kTensorMagic[4] = {'D', 'D', 'T', 'F'};
constexpr char kCheckpointMagic[4] = {'D', 'D', 'C', 'K'};
constexpr std::uint16_t kCheckpointVersion = 1;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_bytes(std::vector<std::uint8_t>& out, std::string_view s) { out.insert(out.end(), s.begin(), s.end()); }

// Bounds-checked little-endian reader.
class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) {
      throw TruncatedPayloadError(what_ + ": truncated payload (need " + std::to_string(pos_ + n) + " bytes, have " +
                                  std::to_string(bytes_.size()) + ")");
    }
  }
  std::uint16_t u16() {
    need(2);
    const std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::span<const std::uint8_t> rest() const { return bytes_.subspan(pos_); }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }
  std::size_t pos() const { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_text(const fs::path& path, const std::string& text) {
  write_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + 4 * t.shape().size() + 4 * t.size());
  put_bytes(out, std::string_view(kTensorMagic, 4));
  put_u16(out, kTensorFileVersion);
  put_u16(out, static_cast<std::uint16_t>(t.ndim()));
  for (int d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
  for (Real v : t.values()) {
    const float f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
  }
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes, std::size_t* consumed) {
  Reader r(bytes, "tensor file");
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kTensorMagic, 4) != 0) {
    throw MagicError("tensor file: bad magic (expected DDTF)");
  }
  r.skip(4);
  const std::uint16_t version = r.u16();
  if (version != kTensorFileVersion) {
    throw VersionError("tensor file: unsupported version " + std::to_string(version));
  }
  const std::uint16_t ndim = r.u16();
  Shape shape;
  std::uint64_t numel = 1;
  for (int i = 0; i < ndim; ++i) {
    const std::uint32_t d = r.u32();
    if (d > static_cast<std::uint32_t>(std::numeric_limits<int>::max())) throw FormatError("tensor file: dimension too large");
    shape.push_back(static_cast<int>(d));
    numel *= d;
  }
  r.need(4 * numel);
  std::vector<Real> data(static_cast<std::size_t>(numel));
  const std::uint8_t* p = r.rest().data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(p[4 * i + static_cast<std::size_t>(b)]) << (8 * b);
    float f;
    std::memcpy(&f, &bits, 4);
    data[i] = static_cast<Real>(f);
  }
  if (consumed) *consumed = r.pos() + 4 * numel;
  return Tensor(std::move(shape), std::move(data));
}

void save_tensor(const fs::path& path, const Tensor& t) { write_bytes(path, encode_tensor(t)); }

Tensor load_tensor(const fs::path& path) {
  const auto bytes = read_bytes(path);
  try {
    return decode_tensor(bytes);
  } catch (const FormatError& e) {
    // Keep the error kind, add the file name.
    const std::string msg = path.string() + ": " + e.what();
    if (dynamic_cast<const MagicError*>(&e)) throw MagicError(msg);
    if (dynamic_cast<const VersionError*>(&e)) throw VersionError(msg);
    if (dynamic_cast<const TruncatedPayloadError*>(&e)) throw TruncatedPayloadError(msg);
    throw FormatError(msg);
  }
}

Tensor ids_tensor(std::span<const int> ids) {
  std::vector<Real> v(ids.begin(), ids.end());
  return Tensor({1, static_cast<int>(ids.size())}, std::move(v));
}

std::vector<int> tensor_ids(const Tensor& t) {
  std::vector<int> out;
  out.reserve(t.size());
  for (Real v : t.values()) out.push_back(static_cast<int>(std::lround(v)));
  return out;
}

Tensor wave_tensor(std::span<const float> wave) {
  return Tensor({1, static_cast<int>(wave.size())}, std::vector<Real>(wave.begin(), wave.end()));
}

std::vector<float> tensor_wave(const Tensor& t) { return std::vector<float>(t.values().begin(), t.values().end()); }

void save_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries) {
  std::string text;
  for (const auto& e : entries) {
    nlohmann::json j = e.extra;
    j["id"] = e.id;
    j["tasks"] = e.tasks;
    j["files"] = e.files;
    j["transcript"] = e.transcript;
    j["speaker"] = e.speaker;
    j["duration_s"] = e.duration_s;
    text += j.dump() + "\n";
  }
  write_text(path, text);
}

std::vector<ManifestEntry> load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open manifest " + path.string());
  std::vector<ManifestEntry> out;
  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("id") || !j.contains("files")) throw FormatError(where + ": missing id or files");
    ManifestEntry e;
    try {
      e.id = j.at("id").get<std::string>();
      e.tasks = j.value("tasks", std::vector<std::string>{});
      e.files = j.at("files").get<std::map<std::string, std::string>>();
      e.transcript = j.value("transcript", std::string{});
      e.speaker = j.value("speaker", 0);
      e.duration_s = j.value("duration_s", 0.0);
    } catch (const nlohmann::json::exception& ex) {
      throw FormatError(where + ": " + ex.what());
    }
    for (const char* k : {"id", "tasks", "files", "transcript", "speaker", "duration_s"}) j.erase(k);
    e.extra = std::move(j);
    if (!seen.insert(e.id).second) throw FormatError(where + ": duplicate id '" + e.id + "'");
    for (const auto& [role, rel] : e.files) {
      if (!fs::exists(path.parent_path() / rel)) {
        throw DanglingPathError(where + ": '" + e.id + "' references missing file " + rel);
      }
    }
    out.push_back(std::move(e));
  }
  return out;
}

fs::path resolve(const fs::path& manifest, const ManifestEntry& e, const std::string& role) {
  auto it = e.files.find(role);
  if (it == e.files.end()) throw ValidationError("sample '" + e.id + "' has no " + role + " file");
  return manifest.parent_path() / it->second;
}

const Tensor& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw ValidationError("checkpoint has no tensor '" + name + "'");
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  std::vector<std::uint8_t> out;
  put_bytes(out, std::string_view(kCheckpointMagic, 4));
  put_u16(out, kCheckpointVersion);
  const std::string header = ckpt.header.dump();
  put_u32(out, static_cast<std::uint32_t>(header.size()));
  put_bytes(out, header);
  put_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    put_u16(out, static_cast<std::uint16_t>(name.size()));
    put_bytes(out, name);
    const auto blob = encode_tensor(t);
    put_u32(out, static_cast<std::uint32_t>(blob.size()));
    out.insert(out.end(), blob.begin(), blob.end());
  }
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw MagicError("checkpoint: bad magic (expected DDCK)");
  }
  Reader r(bytes, "checkpoint");
  r.skip(4);
  const std::uint16_t version = r.u16();
  if (version != kCheckpointVersion) throw VersionError("checkpoint: unsupported version " + std::to_string(version));
  Checkpoint ckpt;
  const std::string header = r.str(r.u32());
  try {
    ckpt.header = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: bad header: ") + e.what());
  }
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str(r.u16());
    const std::uint32_t len = r.u32();
    r.need(len);
    std::size_t used = 0;
    Tensor t = decode_tensor(r.rest().first(len), &used);
    if (used != len) throw FormatError("checkpoint: tensor '" + name + "' length mismatch");
    r.skip(len);
    ckpt.tensors.emplace_back(std::move(name), std::move(t));
  }
  return ckpt;
}

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt) { write_bytes(path, encode_checkpoint(ckpt)); }

Checkpoint load_checkpoint(const fs::path& path) {
  if (!fs::exists(path)) throw ValidationError("checkpoint not found: " + path.string());
  return decode_checkpoint(read_bytes(path));
}

void put_params(Checkpoint& ckpt, const ParamStore& store, const std::string& prefix) {
  for (const auto& p : store.params()) ckpt.tensors.emplace_back(prefix + p.name, p.var.value());
}

void take_params(const Checkpoint& ckpt, ParamStore& store, const std::string& prefix) {
  for (const auto& p : store.params()) {
    const Tensor& t = ckpt.tensor(prefix + p.name);
    if (t.shape() != p.var.value().shape()) {
      throw ValidationError("checkpoint tensor '" + prefix + p.name + "' has shape " + shape_str(t.shape()) +
                            ", model expects " + shape_str(p.var.value().shape()));
    }
    Var v = p.var;
    v.mutable_value().storage() = t.storage();
  }
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

}  // namespace v2st::inline V2ST_REAL_NS::harness
