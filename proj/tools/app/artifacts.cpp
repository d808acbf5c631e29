#include "artifacts.hpp"

#include <fstream>
#include <iterator>

#include "aspectkit/error.hpp"
#include "aspectkit/hash.hpp"

namespace aspectkit::app {

namespace fs = std::filesystem;
using nlohmann::json;

json Provenance::to_json() const {
  return {{"config_hash", config_hash}, {"corpus_hash", corpus_hash}, {"code_version", code_version}};
}

fs::path sidecar_path(const fs::path& artifact) {
  return fs::path(artifact.string() + ".meta.json");
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Input, "cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  // Write-then-rename so an interrupted run never leaves a half-written artifact.
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Input, "cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw Error(ErrorKind::Input, "write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

ArtifactWriter::ArtifactWriter(Provenance provenance, bool check)
    : provenance_(std::move(provenance)), check_(check) {}

void ArtifactWriter::emit(const fs::path& path, const std::string& bytes) {
  if (check_ && fs::exists(path)) {
    if (read_file(path) != bytes) {
      throw CheckMismatch("artifact differs from the previous run: " + path.string());
    }
    ++verified_;
    return;
  }
  write_file(path, bytes);
  written_.push_back(path);
}

void ArtifactWriter::write_json(const fs::path& path, json document) {
  document["provenance"] = provenance_.to_json();
  emit(path, document.dump(2) + "\n");
}

void ArtifactWriter::write_text(const fs::path& path, const std::string& content) {
  emit(path, content);
  json meta = {{"artifact", path.filename().string()},
               {"sha256", sha256_hex(content)},
               {"provenance", provenance_.to_json()}};
  emit(sidecar_path(path), meta.dump(2) + "\n");
}

}  // namespace aspectkit::app
