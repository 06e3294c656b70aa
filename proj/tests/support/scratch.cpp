#include "scratch.hpp"

#include "taskfactor/csv.hpp"

#include <atomic>
#include <chrono>
#include <random>

namespace taskfactor::testing {

namespace fs = std::filesystem;

ScratchDir::ScratchDir(const std::string& tag) {
  static std::atomic<unsigned> counter{0};
  std::random_device rd;
  const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
  path_ = fs::temp_directory_path() /
          ("taskfactor_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(stamp) + "_" +
           std::to_string(counter++));
  fs::create_directories(path_);
}

ScratchDir::~ScratchDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    files[fs::relative(entry.path(), root).generic_string()] = csv::read_file(entry.path());
  }
  return files;
}

fs::path copy_fixture(const fs::path& fixture_dir, const fs::path& dest) {
  fs::create_directories(dest);
  for (const auto& entry : fs::directory_iterator(fixture_dir)) {
    if (entry.is_regular_file()) fs::copy_file(entry.path(), dest / entry.path().filename());
  }
  return dest / "run.toml";
}

} // namespace taskfactor::testing
