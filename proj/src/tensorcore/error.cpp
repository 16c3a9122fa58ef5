#include "tdq/error.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "tdq/binary_io.hpp"

namespace tdq {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid input";
    case ErrorKind::Shape: return "shape error";
    case ErrorKind::State: return "state error";
    case ErrorKind::Io: return "I/O error";
    case ErrorKind::Format: return "format error";
    case ErrorKind::Range: return "range error";
    case ErrorKind::Underflow: return "underflow";
    case ErrorKind::UndefinedPair: return "undefined pair";
    case ErrorKind::Numeric: return "numeric failure";
    case ErrorKind::Usage: return "usage error";
  }
  return "error";
}

namespace io {

void write_atomically(const std::string& path,
                      const std::function<void(std::ostream&)>& body) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) fail(ErrorKind::Io, "cannot open " + tmp + " for writing");
    try {
      body(os);
    } catch (...) {
      os.close();
      std::remove(tmp.c_str());
      throw;
    }
    os.flush();
    if (!os) {
      std::remove(tmp.c_str());
      fail(ErrorKind::Io, "write failed for " + path);
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::remove(tmp.c_str());
    fail(ErrorKind::Io, "cannot rename " + tmp + " to " + path + ": " + ec.message());
  }
}

}  // namespace io
}  // namespace tdq
