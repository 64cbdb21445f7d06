#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <unistd.h>

#include "misinfo/dataset.hpp"
#include "misinfo/domain.hpp"
#include "misinfo/personalization.hpp"

namespace testing_support {

namespace fs = std::filesystem;

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("misinfo-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& p) const { return path_ / p; }

 private:
  fs::path path_;
};

inline fs::path data_file(const std::string& name) { return fs::path(MISINFO_DATA_DIR) / name; }

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline misinfo::Claim claim(std::string id, misinfo::Veracity v,
                            misinfo::Topic t = misinfo::Topic::Other) {
  misinfo::Claim c;
  c.id = id;
  c.headline = "Headline " + id;
  c.source = "example.org";
  c.veracity = v;
  c.topic = t;
  return c;
}

/// Ten claims alternating true/false, every third one medical.
inline std::shared_ptr<const misinfo::Dataset> small_dataset(int n = 10) {
  std::vector<misinfo::Claim> cs;
  for (int i = 0; i < n; ++i)
    cs.push_back(claim("c" + std::to_string(i),
                       i % 2 ? misinfo::Veracity::False : misinfo::Veracity::True,
                       i % 3 == 0 ? misinfo::Topic::Medical : misinfo::Topic::Political));
  return std::make_shared<const misinfo::Dataset>(std::move(cs));
}

inline misinfo::ReferenceTable reference_table() {
  auto t = misinfo::ReferenceTable::load(data_file("reference_table.json").string());
  t.set_uniform_prior();
  return t;
}

}  // namespace testing_support
