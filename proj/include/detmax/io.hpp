#ifndef DETMAX_IO_HPP
#define DETMAX_IO_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "detmax/common.hpp"

namespace detmax {

/// Binary container of named float64 matrices.
///
/// Layout (all integers little-endian):
///   "DMXC"  u32 version(=1)  u32 count
///   count x { u32 name_len, name bytes, u64 rows, u64 cols,
///             rows*cols f64 in row-major order }
/// A file whose payload length disagrees with the declared shapes is rejected.
struct MatrixContainer {
  struct Entry {
    std::string name;
    Matrix value;
  };
  std::vector<Entry> entries;

  void put(const std::string& name, const Matrix& value);
  bool has(const std::string& name) const;
  /// Throws Error when the name is missing.
  const Matrix& get(const std::string& name) const;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

inline constexpr std::uint32_t kContainerVersion = 1;

std::string encode_container(const MatrixContainer& c);
MatrixContainer decode_container(const std::string& bytes);

void write_container(const std::filesystem::path& path, const MatrixContainer& c);
MatrixContainer read_container(const std::filesystem::path& path);

/// Plain numeric CSV, one matrix row per line, no header. Values are written
/// with 17 significant digits so they read back exactly.
void write_matrix_csv(const std::filesystem::path& path, const Matrix& m);
Matrix read_matrix_csv(const std::filesystem::path& path);

/// Shortest round-trip decimal form of a double ("." separator, no locale).
std::string format_double(double v);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace detmax

#endif  // DETMAX_IO_HPP
