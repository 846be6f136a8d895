#pragma once

// Shared helpers for the test binaries: scratch directories and tiny
// deterministic frame builders.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

#include <pipeflow/frame.hpp>
#include <pipeflow/util.hpp>

namespace testsupport {

struct TempDir {
  std::filesystem::path path;

  TempDir() {
    static std::atomic<int> counter{0};
    path = std::filesystem::temp_directory_path() /
           ("pipeflow_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

inline pipeflow::Frame random_frame(int width, int height, int channels, pipeflow::Rng& rng) {
  std::vector<std::uint8_t> data(static_cast<std::size_t>(width) * height * channels);
  for (auto& b : data) b = rng.byte();
  return pipeflow::make_frame(width, height, channels, 0, std::move(data));
}

inline pipeflow::GrayFrame gray_of(const std::vector<float>& values, int width, int height) {
  pipeflow::GrayFrame g;
  g.width = width;
  g.height = height;
  g.data = values;
  return g;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace testsupport
