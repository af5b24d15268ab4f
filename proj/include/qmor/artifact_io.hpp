#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qmor/dense.hpp"

namespace qmor::io {

/// FNV-1a 64-bit hash, used as the artifact payload checksum.
std::uint64_t fnv1a64(const void* data, std::size_t n);

/// Little-endian IEEE-754 serialization of doubles into / out of a byte buffer.
void append_f64(std::string& buf, const double* values, std::size_t count);
void append_f64(std::string& buf, const Vector& v);
void append_f64(std::string& buf, const Matrix& m);  // column-major

/// Cursor over a payload buffer; throws with the missing byte count when the
/// payload is shorter than a read requires.
class PayloadReader {
 public:
  PayloadReader(const std::string& buf, std::string what);
  Vector take_vector(Index n);
  Matrix take_matrix(Index rows, Index cols);  // column-major
  double take_scalar();
  bool exhausted() const;
  std::size_t remaining() const;

 private:
  void require(std::size_t bytes) const;
  const std::string& buf_;
  std::string what_;
  std::size_t pos_ = 0;
};

/// Parses a one-line artifact header "<MAGIC> v1 key=value ...".  Returns the
/// key/value tokens after validating the magic and version words.
std::map<std::string, std::string> parse_header(const std::string& line,
                                                const std::string& magic,
                                                const std::string& path);

/// Writes "<magic> v1 <tokens...> CRC64=<hex>\n" + payload to path; the
/// checksum covers the payload bytes.
void write_artifact(const std::string& path, const std::string& magic,
                    const std::vector<std::pair<std::string, std::string>>& tokens,
                    const std::string& payload);

/// Reads an artifact written by write_artifact: returns header tokens and the
/// payload after verifying the declared checksum (when present).
struct ArtifactFile {
  std::map<std::string, std::string> tokens;
  std::string payload;
};
ArtifactFile read_artifact(const std::string& path, const std::string& magic);

/// Header-token accessors with error messages naming the file.
Index token_index(const std::map<std::string, std::string>& tokens,
                  const std::string& key, const std::string& path);
double token_double(const std::map<std::string, std::string>& tokens,
                    const std::string& key, const std::string& path);
std::string token_string(const std::map<std::string, std::string>& tokens,
                         const std::string& key, const std::string& path);

}  // namespace qmor::io
