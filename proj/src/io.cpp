#include "detmax/io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace detmax {

static_assert(std::endian::native == std::endian::little,
              "container I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'D', 'M', 'X', 'C'};

template <typename T>
void put_raw(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T take(const char* what) {
    need(sizeof(T), what);
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string take_string(std::size_t len) {
    need(len, "array name");
    std::string s = bytes_.substr(pos_, len);
    pos_ += len;
    return s;
  }

  void need(std::size_t len, const char* what) const {
    if (bytes_.size() - pos_ < len) {
      std::ostringstream msg;
      msg << "size mismatch: file ends inside " << what << " (need " << len << " bytes at offset "
          << pos_ << ", have " << bytes_.size() - pos_ << ")";
      throw FormatError(msg.str());
    }
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t pos() const { return pos_; }
  const char* data() const { return bytes_.data() + pos_; }
  void skip(std::size_t n) { pos_ += n; }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void MatrixContainer::put(const std::string& name, const Matrix& value) {
  for (Entry& e : entries) {
    if (e.name == name) {
      e.value = value;
      return;
    }
  }
  entries.push_back({name, value});
}

bool MatrixContainer::has(const std::string& name) const {
  for (const Entry& e : entries)
    if (e.name == name) return true;
  return false;
}

const Matrix& MatrixContainer::get(const std::string& name) const {
  for (const Entry& e : entries)
    if (e.name == name) return e.value;
  throw Error("container has no array named '" + name + "'");
}

std::string encode_container(const MatrixContainer& c) {
  std::string out(kMagic, 4);
  put_raw<std::uint32_t>(out, kContainerVersion);
  put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(c.entries.size()));
  for (const auto& e : c.entries) {
    put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out += e.name;
    put_raw<std::uint64_t>(out, static_cast<std::uint64_t>(e.value.rows()));
    put_raw<std::uint64_t>(out, static_cast<std::uint64_t>(e.value.cols()));
    for (Index i = 0; i < e.value.rows(); ++i)
      for (Index j = 0; j < e.value.cols(); ++j) put_raw<double>(out, e.value(i, j));
  }
  return out;
}

MatrixContainer decode_container(const std::string& bytes) {
  Reader r(bytes);
  r.need(4, "magic tag");
  if (std::memcmp(r.data(), kMagic, 4) != 0) throw FormatError("not a matrix container (bad magic)");
  r.skip(4);
  const auto version = r.take<std::uint32_t>("version");
  if (version != kContainerVersion)
    throw FormatError("unsupported container version " + std::to_string(version));
  const auto count = r.take<std::uint32_t>("array count");
  MatrixContainer c;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto len = r.take<std::uint32_t>("name length");
    std::string name = r.take_string(len);
    const auto rows = r.take<std::uint64_t>("row count");
    const auto cols = r.take<std::uint64_t>("column count");
    if (cols != 0 && rows > (r.remaining() / sizeof(double)) / cols) {
      std::ostringstream msg;
      msg << "size mismatch: array '" << name << "' declares " << rows << "x" << cols
          << " but only " << r.remaining() << " payload bytes remain";
      throw FormatError(msg.str());
    }
    Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j) m(i, j) = r.take<double>("array payload");
    c.entries.push_back({std::move(name), std::move(m)});
  }
  if (r.remaining() != 0) {
    throw FormatError("size mismatch: " + std::to_string(r.remaining()) +
                      " trailing bytes after the declared arrays");
  }
  return c;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open '" + path.string() + "' for writing");
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw Error("write to '" + path.string() + "' failed");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_container(const std::filesystem::path& path, const MatrixContainer& c) {
  write_text(path, encode_container(c));
}

MatrixContainer read_container(const std::filesystem::path& path) {
  return decode_container(read_text(path));
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
  std::string out;
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
  write_text(path, out);
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t start = 0;
    while (start <= line.size()) {
      std::size_t end = line.find(',', start);
      if (end == std::string::npos) end = line.size();
      double v = 0.0;
      const char* b = line.data() + start;
      const char* e = line.data() + end;
      while (b < e && *b == ' ') ++b;
      const auto res = std::from_chars(b, e, v);
      if (res.ec != std::errc() || res.ptr != e)
        throw FormatError(path.string() + ":" + std::to_string(lineno) + ": bad number");
      row.push_back(v);
      start = end + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": ragged row");
    rows.push_back(std::move(row));
  }
  Matrix m(static_cast<Index>(rows.size()),
           rows.empty() ? 0 : static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return m;
}

}  // namespace detmax
