#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace dslgen {

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

// One JSON value per non-blank line. Throws LoadError with the line number.
std::vector<nlohmann::ordered_json> read_jsonl(const std::filesystem::path& path);
std::string to_jsonl(const std::vector<nlohmann::ordered_json>& rows);

std::string sha256_hex(std::string_view data);
std::uint64_t fnv1a64(std::string_view data);

std::string trim(std::string_view text);

// Collapses every run of whitespace into one space and trims the ends.
std::string squash_whitespace(std::string_view text);

std::string csv_escape(std::string_view field);

// mt19937_64 is fully specified by the standard, unlike the distributions,
// so sampling helpers built on it are byte-stable across toolchains.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);
  std::uint64_t next();
  // Uniform in [0, bound); bound > 0.
  std::uint64_t below(std::uint64_t bound);
  // Uniform in [0, 1).
  double unit();

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace dslgen
