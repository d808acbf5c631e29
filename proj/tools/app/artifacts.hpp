#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace aspectkit::app {

struct Provenance {
  std::string config_hash;
  std::string corpus_hash;
  std::string code_version;

  nlohmann::json to_json() const;
};

/// Raised in --check mode when a regenerated artifact differs from the file
/// already on disk.
class CheckMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes run artifacts. JSON documents get a "provenance" member; other
/// formats get a `<file>.meta.json` sidecar with the provenance and the
/// file's SHA-256. In check mode existing files are compared instead of
/// overwritten.
class ArtifactWriter {
 public:
  ArtifactWriter(Provenance provenance, bool check);

  void write_json(const std::filesystem::path& path, nlohmann::json document);
  void write_text(const std::filesystem::path& path, const std::string& content);

  const std::vector<std::filesystem::path>& written() const noexcept { return written_; }
  std::size_t verified() const noexcept { return verified_; }

 private:
  void emit(const std::filesystem::path& path, const std::string& bytes);

  Provenance provenance_;
  bool check_;
  std::vector<std::filesystem::path> written_;
  std::size_t verified_ = 0;
};

std::filesystem::path sidecar_path(const std::filesystem::path& artifact);

std::string read_file(const std::filesystem::path& path);

/// Plain write for files outside the determinism contract (call logs).
void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace aspectkit::app
