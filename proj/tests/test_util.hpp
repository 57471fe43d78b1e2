#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <unistd.h>

#include "molaff/error.hpp"
#include "molaff/random.hpp"

namespace testutil {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    molaff::Rng rng(std::hash<std::string>{}(tag) ^ static_cast<std::uint64_t>(::getpid()));
    path_ = std::filesystem::temp_directory_path() / ("molaff_" + tag + "_" + std::to_string(rng.next_u64() % 1000000007));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::filesystem::path write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
  return path;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Kind of the molaff::Error thrown by `f`, or nullopt.
template <typename F>
std::optional<molaff::ErrorKind> error_kind(F&& f) {
  try {
    f();
  } catch (const molaff::Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

}  // namespace testutil
