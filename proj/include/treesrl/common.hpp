#ifndef TREESRL_COMMON_HPP
#define TREESRL_COMMON_HPP

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace treesrl {

// Error taxonomy mirrors the CLI exit codes: usage=2, data=3, numeric=4.
class usage_error : public std::runtime_error {
public:
  explicit usage_error(const std::string& msg) : std::runtime_error(msg) {}
};

class data_error : public std::runtime_error {
public:
  explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
  data_error(const std::string& msg, long line)
      : std::runtime_error(msg + " (line " + std::to_string(line) + ")"), line_(line) {}
  long line() const { return line_; }

private:
  long line_ = -1;
};

class numeric_error : public std::runtime_error {
public:
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      break;
    }
    out.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline std::string strip(std::string_view s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Seeded RNG used everywhere randomness is needed; one generator per run,
// handed down explicitly so runs are reproducible from --seed alone.
using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  return d(rng);
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  std::uniform_int_distribution<std::size_t> d(0, n - 1);
  return d(rng);
}

// Chunked parallel map with ordered merge. Results are merged in chunk order,
// so output is deterministic for a fixed thread count. Exceptions thrown by a
// chunk are captured and rethrown on the calling thread (first chunk wins).
template <typename Acc, typename MapFn, typename MergeFn>
Acc parallel_chunks(std::size_t n, int threads, MapFn map_chunk, MergeFn merge) {
  if (threads <= 1 || n == 0) return map_chunk(std::size_t(0), n);
  std::size_t t = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  std::vector<Acc> partial(t);
  std::vector<std::exception_ptr> errors(t);
  std::vector<std::thread> pool;
  std::size_t per = (n + t - 1) / t;
  for (std::size_t i = 0; i < t; ++i) {
    std::size_t lo = i * per, hi = std::min(n, lo + per);
    pool.emplace_back([&, i, lo, hi] {
      try {
        partial[i] = map_chunk(lo, hi);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (std::size_t i = 0; i < t; ++i)
    if (errors[i]) std::rethrow_exception(errors[i]);
  Acc out = std::move(partial[0]);
  for (std::size_t i = 1; i < t; ++i) merge(out, partial[i]);
  return out;
}

}  // namespace treesrl

#endif
