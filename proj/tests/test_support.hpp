#pragma once

// Fixture paths and independent oracles shared by the unit and acceptance
// tests. Oracles never call into the library code they check.

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <unistd.h>

namespace testsupport {

inline std::filesystem::path data_dir() { return DSLGEN_TEST_DATA; }
inline std::filesystem::path data(const std::string& name) { return data_dir() / name; }

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("dslgen-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Longest common subsequence by enumerating every subsequence of the
// shorter list and testing it against the longer one.
template <typename T>
std::size_t brute_force_lcss(const std::vector<T>& a, const std::vector<T>& b) {
  const auto& s = a.size() <= b.size() ? a : b;
  const auto& l = a.size() <= b.size() ? b : a;
  std::size_t best = 0;
  for (std::uint32_t mask = 0; mask < (1u << s.size()); ++mask) {
    std::size_t len = static_cast<std::size_t>(__builtin_popcount(mask));
    if (len <= best) continue;
    std::size_t j = 0;
    bool ok = true;
    for (std::size_t i = 0; i < s.size() && ok; ++i) {
      if (!(mask & (1u << i))) continue;
      while (j < l.size() && !(l[j] == s[i])) ++j;
      if (j == l.size()) ok = false; else ++j;
    }
    if (ok) best = len;
  }
  return best;
}

inline double brute_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  long double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<long double>(a[i]) * b[i];
    na += static_cast<long double>(a[i]) * a[i];
    nb += static_cast<long double>(b[i]) * b[i];
  }
  if (na == 0 || nb == 0) return 0.0;
  return static_cast<double>(dot / std::sqrt(na * nb));
}

// Indices ranked by cosine descending, ties by index ascending.
inline std::vector<std::size_t> brute_rank(const std::vector<std::vector<double>>& rows,
                                           const std::vector<double>& query) {
  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t i = 0; i < rows.size(); ++i) scored.emplace_back(brute_cosine(rows[i], query), i);
  std::sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
    if (x.first != y.first) return x.first > y.first;
    return x.second < y.second;
  });
  std::vector<std::size_t> out;
  for (const auto& s : scored) out.push_back(s.second);
  return out;
}

inline double set_jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t common = 0;
  for (const auto& x : a) common += b.count(x);
  return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

// Cosine of raw term-frequency vectors over lower-cased alphanumeric tokens.
inline double token_cosine(const std::string& x, const std::string& y) {
  auto counts = [](const std::string& s) {
    std::map<std::string, double> c;
    std::string cur;
    for (char ch : s + " ") {
      if (std::isalnum(static_cast<unsigned char>(ch))) {
        cur += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      } else if (!cur.empty()) {
        c[cur] += 1;
        cur.clear();
      }
    }
    return c;
  };
  const auto a = counts(x), b = counts(y);
  double dot = 0, na = 0, nb = 0;
  for (const auto& [k, v] : a) {
    na += v * v;
    if (auto it = b.find(k); it != b.end()) dot += v * it->second;
  }
  for (const auto& [k, v] : b) nb += v * v;
  if (na == 0 || nb == 0) return 0.0;
  return dot / std::sqrt(na * nb);
}

// Ten short prompts for pair mining. Callers check that no two distinct
// tokens share a hash bucket, so hashing equals exact token
// counting and the oracle can work on raw token counts.
// Pairs are (nl, dsl).
inline const std::vector<std::pair<std::string, std::string>> kToyTst = {
    {"send email when form submitted", "t = await f.Form({}); e = o.SendEmail({});"},
    {"send email when form is submitted", "t = await f.Form({}); e = o.SendEmail({}); n = p.Notify({});"},
    {"post teams message when form submitted", "t = await f.Form({}); m = teams.Post({});"},
    {"post teams message daily", "t = await r.Recurrence({}); m = teams.Post({});"},
    {"create planner task for new email", "t = await o.OnEmail({}); k = planner.Task({});"},
    {"create planner task for every new email", "t = await o.OnEmail({}); k = planner.Task({}); n = p.Notify({});"},
    {"save attachment to onedrive", "t = await o.OnEmail({}); f = od.Create({});"},
    {"translate new tweets", "t = await tw.OnTweet({}); x = tr.Translate({});"},
    {"notify me about new tweets", "t = await tw.OnTweet({}); n = p.Notify({});"},
    {"add excel row for new sharepoint item", "t = await sp.OnItem({}); x = xl.AddRow({});"},
};

}  // namespace testsupport
