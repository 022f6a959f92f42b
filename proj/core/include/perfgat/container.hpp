#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "perfgat/matrix.hpp"

namespace perfgat::io {

inline constexpr std::int64_t kSchemaVersion = 1;

// Manifest-plus-payload array container: a JSON manifest (names, shapes,
// dtypes, offsets, schema version) followed by flat little-endian float64
// payloads. Round-trips are bitwise; schema version mismatches are hard
// errors.
class ArtifactContainer {
 public:
  struct Array {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<double> data;
  };

  // Throws DataError when the data length does not match the shape product
  // or the name is empty/duplicate.
  void add(const std::string& name, std::vector<std::size_t> shape,
           std::vector<double> data);
  void add_matrix(const std::string& name, const num::Matrix& m);
  void add_vector(const std::string& name, const num::Vector& v);

  bool has(const std::string& name) const;
  const Array& array(const std::string& name) const;  // DataError when absent
  num::Matrix matrix(const std::string& name) const;  // requires a 2-D shape
  num::Vector vector(const std::string& name) const;  // requires a 1-D shape

  const std::vector<Array>& arrays() const { return arrays_; }

  // Free-form JSON object carried in the manifest. Must parse as an object.
  void set_meta_json(const std::string& json_text);
  const std::string& meta_json() const { return meta_json_; }

  std::vector<std::uint8_t> serialize() const;
  static ArtifactContainer deserialize(const std::vector<std::uint8_t>& bytes);

  void write_file(const std::filesystem::path& path) const;
  static ArtifactContainer read_file(const std::filesystem::path& path);

 private:
  std::vector<Array> arrays_;
  std::string meta_json_ = "{}";
};

}  // namespace perfgat::io
