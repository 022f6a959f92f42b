#include "perfgat/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "perfgat/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "container payloads are little-endian; big-endian hosts are unsupported");

namespace perfgat::io {

namespace {

constexpr char kMagic[8] = {'P', 'E', 'R', 'F', 'G', 'A', 'T', 'C'};

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t p = 1;
  for (std::size_t d : shape) p *= d;
  return p;
}

}  // namespace

void ArtifactContainer::add(const std::string& name, std::vector<std::size_t> shape,
                            std::vector<double> data) {
  if (name.empty()) throw DataError("container: array name must be non-empty");
  if (has(name)) throw DataError("container: duplicate array '" + name + "'");
  if (shape_product(shape) != data.size()) {
    throw DataError("container: array '" + name + "' has " + std::to_string(data.size()) +
                    " values for its shape");
  }
  arrays_.push_back(Array{name, std::move(shape), std::move(data)});
}

void ArtifactContainer::add_matrix(const std::string& name, const num::Matrix& m) {
  add(name, {m.rows(), m.cols()}, {m.data().begin(), m.data().end()});
}

void ArtifactContainer::add_vector(const std::string& name, const num::Vector& v) {
  add(name, {v.len()}, {v.data().begin(), v.data().end()});
}

bool ArtifactContainer::has(const std::string& name) const {
  for (const Array& a : arrays_) {
    if (a.name == name) return true;
  }
  return false;
}

const ArtifactContainer::Array& ArtifactContainer::array(const std::string& name) const {
  for (const Array& a : arrays_) {
    if (a.name == name) return a;
  }
  throw DataError("container: missing array '" + name + "'");
}

num::Matrix ArtifactContainer::matrix(const std::string& name) const {
  const Array& a = array(name);
  if (a.shape.size() != 2) {
    throw DataError("container: array '" + name + "' is not 2-D");
  }
  return num::Matrix(a.shape[0], a.shape[1], a.data);
}

num::Vector ArtifactContainer::vector(const std::string& name) const {
  const Array& a = array(name);
  if (a.shape.size() != 1) {
    throw DataError("container: array '" + name + "' is not 1-D");
  }
  return num::Vector(a.data);
}

void ArtifactContainer::set_meta_json(const std::string& json_text) {
  const nlohmann::json parsed = nlohmann::json::parse(json_text, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object()) {
    throw DataError("container: meta must be a JSON object");
  }
  meta_json_ = parsed.dump();
}

std::vector<std::uint8_t> ArtifactContainer::serialize() const {
  nlohmann::json manifest;
  manifest["schema_version"] = kSchemaVersion;
  manifest["endianness"] = "little";
  manifest["meta"] = nlohmann::json::parse(meta_json_);
  nlohmann::json entries = nlohmann::json::array();
  std::size_t offset = 0;
  for (const Array& a : arrays_) {
    nlohmann::json e;
    e["name"] = a.name;
    e["dtype"] = "f64";
    e["shape"] = a.shape;
    e["offset"] = offset;
    e["nbytes"] = a.data.size() * sizeof(double);
    entries.push_back(std::move(e));
    offset += a.data.size() * sizeof(double);
  }
  manifest["arrays"] = std::move(entries);
  const std::string text = manifest.dump();

  std::vector<std::uint8_t> out;
  out.reserve(sizeof(kMagic) + 8 + text.size() + offset);
  out.insert(out.end(), kMagic, kMagic + sizeof(kMagic));
  const std::uint64_t len = text.size();
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(len >> (8 * b)));
  out.insert(out.end(), text.begin(), text.end());
  for (const Array& a : arrays_) {
    const std::size_t bytes = a.data.size() * sizeof(double);
    const std::size_t pos = out.size();
    out.resize(pos + bytes);
    std::memcpy(out.data() + pos, a.data.data(), bytes);
  }
  return out;
}

ArtifactContainer ArtifactContainer::deserialize(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < sizeof(kMagic) + 8 ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw DataError("container: bad magic or truncated header");
  }
  std::uint64_t len = 0;
  for (int b = 0; b < 8; ++b) {
    len |= static_cast<std::uint64_t>(bytes[sizeof(kMagic) + b]) << (8 * b);
  }
  const std::size_t manifest_start = sizeof(kMagic) + 8;
  if (bytes.size() < manifest_start + len) {
    throw DataError("container: truncated manifest");
  }
  const std::string text(bytes.begin() + manifest_start,
                         bytes.begin() + manifest_start + len);
  const nlohmann::json manifest = nlohmann::json::parse(text, nullptr, false);
  if (manifest.is_discarded()) throw DataError("container: malformed manifest JSON");

  const std::int64_t version = manifest.value("schema_version", std::int64_t{-1});
  if (version != kSchemaVersion) {
    throw DataError("container: schema version mismatch: file has " +
                    std::to_string(version) + ", library supports " +
                    std::to_string(kSchemaVersion));
  }
  if (manifest.value("endianness", "") != "little") {
    throw DataError("container: unsupported endianness");
  }

  ArtifactContainer out;
  out.set_meta_json(manifest.contains("meta") ? manifest["meta"].dump() : "{}");
  const std::size_t payload_start = manifest_start + len;
  for (const auto& e : manifest.at("arrays")) {
    const std::string name = e.at("name").get<std::string>();
    if (e.at("dtype").get<std::string>() != "f64") {
      throw DataError("container: array '" + name + "' has unsupported dtype");
    }
    const std::vector<std::size_t> shape = e.at("shape").get<std::vector<std::size_t>>();
    const std::size_t offset = e.at("offset").get<std::size_t>();
    const std::size_t nbytes = e.at("nbytes").get<std::size_t>();
    if (nbytes != shape_product(shape) * sizeof(double)) {
      throw DataError("container: array '" + name + "' byte length disagrees with shape");
    }
    if (payload_start + offset + nbytes > bytes.size()) {
      throw DataError("container: array '" + name + "' runs past end of file");
    }
    std::vector<double> data(nbytes / sizeof(double));
    std::memcpy(data.data(), bytes.data() + payload_start + offset, nbytes);
    out.add(name, shape, std::move(data));
  }
  return out;
}

void ArtifactContainer::write_file(const std::filesystem::path& path) const {
  const std::vector<std::uint8_t> bytes = serialize();
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("container: cannot open '" + path.string() + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("container: write failed for '" + path.string() + "'");
}

ArtifactContainer ArtifactContainer::read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("container: cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace perfgat::io
