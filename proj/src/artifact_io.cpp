#include "qmor/artifact_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "qmor/errors.hpp"

namespace qmor::io {

std::uint64_t fnv1a64(const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

namespace {

static_assert(sizeof(double) == 8, "IEEE-754 binary64 layout assumed");

std::uint64_t to_le_bits(double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  return bits;
}

double from_le_bits(std::uint64_t bits) {
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

void append_f64(std::string& buf, const double* values, std::size_t count) {
  const std::size_t base = buf.size();
  buf.resize(base + 8 * count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t bits = to_le_bits(values[i]);
    std::memcpy(buf.data() + base + 8 * i, &bits, 8);
  }
}

void append_f64(std::string& buf, const Vector& v) {
  append_f64(buf, v.data(), static_cast<std::size_t>(v.size()));
}

void append_f64(std::string& buf, const Matrix& m) {
  append_f64(buf, m.data(), static_cast<std::size_t>(m.size()));
}

PayloadReader::PayloadReader(const std::string& buf, std::string what)
    : buf_(buf), what_(std::move(what)) {}

void PayloadReader::require(std::size_t bytes) const {
  if (pos_ + bytes > buf_.size()) {
    std::ostringstream msg;
    msg << "truncated " << what_ << ": " << (pos_ + bytes - buf_.size())
        << " bytes missing (need " << (pos_ + bytes) << ", have " << buf_.size() << ")";
    throw InvalidArgument(msg.str());
  }
}

Vector PayloadReader::take_vector(Index n) {
  require(8 * static_cast<std::size_t>(n));
  Vector v(n);
  for (Index i = 0; i < n; ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, buf_.data() + pos_ + 8 * static_cast<std::size_t>(i), 8);
    v(i) = from_le_bits(bits);
  }
  pos_ += 8 * static_cast<std::size_t>(n);
  return v;
}

Matrix PayloadReader::take_matrix(Index rows, Index cols) {
  require(8 * static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j) m.col(j) = take_vector(rows);
  return m;
}

double PayloadReader::take_scalar() { return take_vector(1)(0); }

bool PayloadReader::exhausted() const { return pos_ == buf_.size(); }

std::size_t PayloadReader::remaining() const { return buf_.size() - pos_; }

std::map<std::string, std::string> parse_header(const std::string& line,
                                                const std::string& magic,
                                                const std::string& path) {
  std::istringstream in(line);
  std::string word, version;
  in >> word >> version;
  if (word != magic || version != "v1")
    throw InvalidArgument(path + ": malformed header (expected \"" + magic + " v1\")");
  std::map<std::string, std::string> tokens;
  while (in >> word) {
    const auto eq = word.find('=');
    if (eq == std::string::npos || eq == 0)
      throw InvalidArgument(path + ": malformed header token \"" + word + "\"");
    tokens[word.substr(0, eq)] = word.substr(eq + 1);
  }
  return tokens;
}

void write_artifact(const std::string& path, const std::string& magic,
                    const std::vector<std::pair<std::string, std::string>>& tokens,
                    const std::string& payload) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot open " + path + " for writing");
  out << magic << " v1";
  for (const auto& [k, v] : tokens) out << ' ' << k << '=' << v;
  char crc[17];
  std::snprintf(crc, sizeof crc, "%016llx",
                static_cast<unsigned long long>(fnv1a64(payload.data(), payload.size())));
  out << " LEN=" << payload.size() << " CRC64=" << crc << '\n';
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  out.flush();
  if (!out) throw InvalidArgument("failed writing " + path);
}

ArtifactFile read_artifact(const std::string& path, const std::string& magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument(path + ": empty file");
  ArtifactFile file;
  file.tokens = parse_header(line, magic, path);
  std::ostringstream rest;
  rest << in.rdbuf();
  file.payload = rest.str();
  // A recorded byte length separates truncation (with an exact missing count)
  // from in-place corruption, which the checksum below catches.
  if (file.tokens.count("LEN")) {
    const auto expected =
        static_cast<std::size_t>(token_index(file.tokens, "LEN", path));
    if (file.payload.size() < expected) {
      std::ostringstream msg;
      msg << "truncated " << path << ": " << (expected - file.payload.size())
          << " bytes missing (need " << expected << ", have " << file.payload.size()
          << ")";
      throw InvalidArgument(msg.str());
    }
    if (file.payload.size() > expected) {
      std::ostringstream msg;
      msg << path << ": payload longer than header declares ("
          << (file.payload.size() - expected) << " extra bytes)";
      throw InvalidArgument(msg.str());
    }
  }
  if (auto it = file.tokens.find("CRC64"); it != file.tokens.end()) {
    char crc[17];
    std::snprintf(crc, sizeof crc, "%016llx",
                  static_cast<unsigned long long>(
                      fnv1a64(file.payload.data(), file.payload.size())));
    if (it->second != crc)
      throw InvalidArgument(path + ": checksum mismatch (header " + it->second +
                            ", payload " + crc + ")");
  }
  return file;
}

namespace {
const std::string& find_token(const std::map<std::string, std::string>& tokens,
                              const std::string& key, const std::string& path) {
  const auto it = tokens.find(key);
  if (it == tokens.end())
    throw InvalidArgument(path + ": header is missing " + key + "=");
  return it->second;
}
}  // namespace

Index token_index(const std::map<std::string, std::string>& tokens,
                  const std::string& key, const std::string& path) {
  const std::string& text = find_token(tokens, key, path);
  try {
    std::size_t used = 0;
    const long long v = std::stoll(text, &used);
    if (used != text.size() || v < 0) throw std::invalid_argument(text);
    return static_cast<Index>(v);
  } catch (const std::exception&) {
    throw InvalidArgument(path + ": bad header value " + key + "=" + text);
  }
}

double token_double(const std::map<std::string, std::string>& tokens,
                    const std::string& key, const std::string& path) {
  const std::string& text = find_token(tokens, key, path);
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw InvalidArgument(path + ": bad header value " + key + "=" + text);
  }
}

std::string token_string(const std::map<std::string, std::string>& tokens,
                         const std::string& key, const std::string& path) {
  return find_token(tokens, key, path);
}

}  // namespace qmor::io
